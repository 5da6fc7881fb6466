"""Hot integration kernels: fixed-step RK4 time stepping.

Both kernels are written as plain scalar Python loops and compiled with
numba's ``@njit`` when available.  Setting the environment variable
``SELFOSC_NUMBA=0`` before import selects the uncompiled pure-Python path
(identical arithmetic, much slower).  ``benchmarks/bench_backends.py``
compares the two.
"""

import math
import os

import numpy as np

_flag = os.environ.get("SELFOSC_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _flag not in ("0", "false", "no", "off")

DIVERGENCE_LIMIT = 1.0e6  # |x| or |v| beyond this aborts the integration


def _schedule_value(t, bp_t, bp_p):
    """Piecewise-linear p(t); constant extrapolation outside the breakpoints."""
    n = bp_t.shape[0]
    if t <= bp_t[0]:
        return bp_p[0]
    if t >= bp_t[n - 1]:
        return bp_p[n - 1]
    i = 0
    while bp_t[i + 1] < t:
        i += 1
    w = (t - bp_t[i]) / (bp_t[i + 1] - bp_t[i])
    return bp_p[i] + w * (bp_p[i + 1] - bp_p[i])


def _poly_deriv(t, x, v, p, omega0, inv_q0, omega_m2, g3t, g5t, a3, a5, fm, phi0):
    """Right-hand side of the nonlinear-damping equation of motion.

    dx/dt = v
    dv/dt = -(omega0/Q0)(1 - p + g3t x^2 + g5t x^4) v
            - (omega_m^2 x + a3 x^3 + a5 x^5) + 2 fm cos(omega0 t + phi0)
    """
    x2 = x * x
    bracket = 1.0 - p + (g3t + g5t * x2) * x2
    dv = -(omega0 * inv_q0) * bracket * v - (omega_m2 + (a3 + a5 * x2) * x2) * x
    if fm != 0.0:
        dv += 2.0 * fm * math.cos(omega0 * t + phi0)
    return v, dv


def rk4_polynomial(x0, v0, t0, dt, nsteps,
                   omega0, inv_q0, omega_m2, g3t, g5t, a3, a5, fm, phi0,
                   bp_t, bp_p, x_out):
    """Integrate the polynomial oscillator with p(t) from a breakpoint table.

    ``x_out`` must have length nsteps + 1; it receives x at every step
    (x_out[0] = x0).  Returns (x, v, n_done); n_done < nsteps signals
    divergence at step index n_done.
    """
    x = x0
    v = v0
    x_out[0] = x
    for k in range(nsteps):
        t = t0 + k * dt
        th = t + 0.5 * dt
        p1 = _schedule_value(t, bp_t, bp_p)
        p2 = _schedule_value(th, bp_t, bp_p)
        p3 = _schedule_value(t + dt, bp_t, bp_p)

        k1x, k1v = _poly_deriv(t, x, v, p1,
                               omega0, inv_q0, omega_m2, g3t, g5t, a3, a5, fm, phi0)
        k2x, k2v = _poly_deriv(th, x + 0.5 * dt * k1x, v + 0.5 * dt * k1v, p2,
                               omega0, inv_q0, omega_m2, g3t, g5t, a3, a5, fm, phi0)
        k3x, k3v = _poly_deriv(th, x + 0.5 * dt * k2x, v + 0.5 * dt * k2v, p2,
                               omega0, inv_q0, omega_m2, g3t, g5t, a3, a5, fm, phi0)
        k4x, k4v = _poly_deriv(t + dt, x + dt * k3x, v + dt * k3v, p3,
                               omega0, inv_q0, omega_m2, g3t, g5t, a3, a5, fm, phi0)

        x = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        x_out[k + 1] = x
        if not (abs(x) < DIVERGENCE_LIMIT and abs(v) < DIVERGENCE_LIMIT):
            return x, v, k + 1
    return x, v, nsteps


def _physical_deriv(x, v, f_ph, omega0, inv_q0, omega0_sq, inv_mass,
                    f_rad, f_amp, inv_tau, fringe_k, working_point, fringe_phase):
    """Damped oscillator plus relaxing photothermal force.

    The steady-state force follows a raised-sine fringe of unit peak:
    F_ss(x) = f_amp * (1 + cos(fringe_k*(working_point + x) + fringe_phase)) / 2.
    """
    f_ss = f_amp * 0.5 * (1.0 + math.cos(fringe_k * (working_point + x) + fringe_phase))
    dv = -(omega0 * inv_q0) * v - omega0_sq * x + (f_rad + f_ph) * inv_mass
    df = (f_ss - f_ph) * inv_tau
    return v, dv, df


def rk4_physical(x0, v0, f0, dt, nsteps,
                 omega0, inv_q0, omega0_sq, inv_mass, f_rad, f_amp, inv_tau,
                 fringe_k, working_point, fringe_phase, x_out):
    """Integrate the (x, v, f_ph) physical model; same recording contract
    as ``rk4_polynomial``."""
    x = x0
    v = v0
    f = f0
    x_out[0] = x
    for k in range(nsteps):
        k1x, k1v, k1f = _physical_deriv(x, v, f,
                                        omega0, inv_q0, omega0_sq, inv_mass,
                                        f_rad, f_amp, inv_tau,
                                        fringe_k, working_point, fringe_phase)
        k2x, k2v, k2f = _physical_deriv(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v,
                                        f + 0.5 * dt * k1f,
                                        omega0, inv_q0, omega0_sq, inv_mass,
                                        f_rad, f_amp, inv_tau,
                                        fringe_k, working_point, fringe_phase)
        k3x, k3v, k3f = _physical_deriv(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v,
                                        f + 0.5 * dt * k2f,
                                        omega0, inv_q0, omega0_sq, inv_mass,
                                        f_rad, f_amp, inv_tau,
                                        fringe_k, working_point, fringe_phase)
        k4x, k4v, k4f = _physical_deriv(x + dt * k3x, v + dt * k3v, f + dt * k3f,
                                        omega0, inv_q0, omega0_sq, inv_mass,
                                        f_rad, f_amp, inv_tau,
                                        fringe_k, working_point, fringe_phase)

        x = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        f = f + (dt / 6.0) * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
        x_out[k + 1] = x
        if not (abs(x) < DIVERGENCE_LIMIT and abs(v) < DIVERGENCE_LIMIT):
            return x, v, f, k + 1
    return x, v, f, nsteps


# Keep the uncompiled implementations importable for the benchmark.
rk4_polynomial_py = rk4_polynomial
rk4_physical_py = rk4_physical

NUMBA_ACTIVE = False
if NUMBA_REQUESTED:
    try:
        from numba import njit
    except ImportError:
        pass
    else:
        _schedule_value = njit(cache=True)(_schedule_value)
        _poly_deriv = njit(cache=True)(_poly_deriv)
        _physical_deriv = njit(cache=True)(_physical_deriv)
        rk4_polynomial = njit(cache=True)(rk4_polynomial)
        rk4_physical = njit(cache=True)(rk4_physical)
        NUMBA_ACTIVE = True


def sliding_window_max(values, width):
    """Sliding maximum of |values| over ``width`` samples (centered window).

    Vectorized via stride tricks; the edges use the truncated window.
    Returns an array of the same length.
    """
    a = np.abs(np.asarray(values, dtype=float))
    n = a.size
    w = int(width)
    if w <= 1 or n <= 1:
        return a.copy()
    w = min(w, n)
    windows = np.lib.stride_tricks.sliding_window_view(a, w)
    core = windows.max(axis=1)
    out = np.empty(n)
    half = w // 2
    out[half:half + core.size] = core
    # truncated windows at the boundaries
    for i in range(half):
        out[i] = a[:i + w - half].max()
    tail_start = half + core.size
    for i in range(tail_start, n):
        out[i] = a[i - half:].max()
    return out
