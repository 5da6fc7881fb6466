"""Deterministic fixed-step RK4 integration, sweeps and ring-downs.

The classical 4th-order Runge-Kutta scheme with a fixed step keeps runs
bit-for-bit reproducible; the built-in model types dispatch to compiled
kernels, arbitrary callables fall back to a Python loop with the same
arithmetic.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import PhysicalRHS, PolynomialRHS, State

TWO_PI = 2.0 * math.pi


class DivergenceError(RuntimeError):
    """State exceeded the overflow guard during integration."""

    def __init__(self, time):
        super().__init__(f"integration diverged at t = {time:.6g} "
                         f"(|state| > {_kernels.DIVERGENCE_LIMIT:g})")
        self.time = time


@dataclass(frozen=True)
class TimeTrace:
    """Uniformly sampled displacement signal."""

    t0: float
    dt: float
    samples: np.ndarray
    metadata: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples",
                           np.asarray(self.samples, dtype=float))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.samples.size == 0:
            raise ValueError("samples must be non-empty")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    def times(self):
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def duration(self):
        return self.dt * (self.samples.size - 1)

    @property
    def sample_rate(self):
        return 1.0 / self.dt


@dataclass(frozen=True)
class SweepSchedule:
    """Piecewise-linear p(t) defined by (time, p) breakpoints."""

    breakpoints: tuple

    def __post_init__(self):
        bps = tuple((float(t), float(p)) for t, p in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        if len(bps) < 2:
            raise ValueError("need at least two breakpoints")
        times = [t for t, _ in bps]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("breakpoint times must be strictly increasing")

    @property
    def t_start(self):
        return self.breakpoints[0][0]

    @property
    def t_end(self):
        return self.breakpoints[-1][0]

    def arrays(self):
        ts = np.array([t for t, _ in self.breakpoints])
        ps = np.array([p for _, p in self.breakpoints])
        return ts, ps

    def value(self, t):
        ts, ps = self.arrays()
        return np.interp(t, ts, ps)


@dataclass(frozen=True)
class SweepRecord:
    """Result of a parameter sweep: x(t), the applied p(t), and the envelope."""

    trace: TimeTrace
    p_of_t: TimeTrace
    envelope: TimeTrace
    metadata: dict = field(default_factory=dict)


def _check_dt(rhs, dt):
    omega = getattr(rhs, "omega_fast", None)
    if omega is not None and dt > (TWO_PI / omega) / 50.0:
        raise ValueError(
            f"dt = {dt:g} too coarse: need dt <= {(TWO_PI / omega) / 50.0:g} "
            f"(1/50 of the fastest period)")


def _run_rk4(rhs, y0, t0, dt, nsteps, schedule=None):
    """Advance nsteps, recording x at every step.

    Returns (x_array of length nsteps+1, final state tuple).  Dispatches
    to the compiled kernels for the built-in model types.
    """
    if isinstance(rhs, PolynomialRHS):
        if schedule is None:
            bp_t = np.array([t0, t0 + max(nsteps, 1) * dt])
            bp_p = np.array([rhs.control.p, rhs.control.p])
        else:
            bp_t, bp_p = schedule.arrays()
        pp = rhs.params
        x_out = np.empty(nsteps + 1)
        x, v, n_done = _kernels.rk4_polynomial(
            float(y0[0]), float(y0[1]), t0, dt, nsteps,
            pp.omega0, 1.0 / pp.q0, pp.omega_m ** 2,
            rhs.g3, rhs.g5, rhs.a3, rhs.a5, pp.f_m, pp.phi0,
            bp_t, bp_p, x_out)
        if n_done < nsteps:
            raise DivergenceError(t0 + n_done * dt)
        return x_out, (x, v)

    if isinstance(rhs, PhysicalRHS):
        pp = rhs.params
        x_out = np.empty(nsteps + 1)
        x, v, f, n_done = _kernels.rk4_physical(
            float(y0[0]), float(y0[1]), float(y0[2]), dt, nsteps,
            pp.omega0, 1.0 / pp.q0, pp.omega0 ** 2, 1.0 / pp.mass,
            pp.f_rad, pp.photothermal_amplitude, 1.0 / pp.tau,
            4.0 * math.pi / pp.fringe.wavelength, pp.working_point,
            pp.fringe_phase, x_out)
        if n_done < nsteps:
            raise DivergenceError(n_done * dt)
        return x_out, (x, v, f)

    # generic callable
    y = np.asarray(y0, dtype=float).copy()
    x_out = np.empty(nsteps + 1)
    x_out[0] = y[0]
    for k in range(nsteps):
        t = t0 + k * dt
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        x_out[k + 1] = y[0]
        if np.any(np.abs(y) >= _kernels.DIVERGENCE_LIMIT):
            raise DivergenceError(t + dt)
    return x_out, tuple(y)


def _decimate(x, t0, dt, every, metadata=""):
    every = max(int(every), 1)
    return TimeTrace(t0=t0, dt=dt * every, samples=x[::every], metadata=metadata)


def integrate(rhs, initial, duration, dt, record_every=1, metadata=""):
    """Integrate ``rhs`` from a State for ``duration``; returns x(t).

    dt must resolve the fastest oscillation with at least 50 steps per
    period (checked when the rhs exposes ``omega_fast``).
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    _check_dt(rhs, dt)
    if isinstance(initial, State):
        y0 = initial.as_array()
        t0 = initial.t
    else:
        y0 = np.asarray(initial, dtype=float)
        t0 = 0.0
    ndim = getattr(rhs, "ndim", None)
    if ndim is not None and y0.size != ndim:
        raise ValueError(f"initial state has {y0.size} components, expected {ndim}")
    nsteps = int(round(duration / dt))
    x, _ = _run_rk4(rhs, y0, t0, dt, nsteps)
    return _decimate(x, t0, dt, record_every, metadata)


def envelope_window_steps(omega0, dt):
    """Number of samples covering one drive period 2 pi / omega0."""
    return max(int(round(TWO_PI / (omega0 * dt))), 1)


def run_sweep(params, schedule, seed, dt, mode="quintic",
              record_every=1, initial_scale=1e-3):
    """Integrate the polynomial model with p following ``schedule``.

    The initial (x, v) are drawn uniformly from +-initial_scale with the
    explicit ``seed``; the envelope is the sliding-window maximum of |x|
    over one drive period.
    """
    from .model import SweepControl, build_polynomial_rhs

    rhs = build_polynomial_rhs(params, SweepControl(p=max(schedule.value(schedule.t_start), 0.0)),
                               mode=mode)
    _check_dt(rhs, dt)
    rng = np.random.default_rng(seed)
    x0, v0 = rng.uniform(-initial_scale, initial_scale, size=2)
    t0 = schedule.t_start
    nsteps = int(round((schedule.t_end - t0) / dt))
    x, _ = _run_rk4(rhs, (x0, v0), t0, dt, nsteps, schedule=schedule)

    window = envelope_window_steps(params.omega0, dt)
    env = _kernels.sliding_window_max(x, window)
    times = t0 + dt * np.arange(nsteps + 1)
    bp_t, bp_p = schedule.arrays()
    p_vals = np.interp(times, bp_t, bp_p)

    meta = {"seed": seed, "mode": mode, "dt": dt}
    return SweepRecord(
        trace=_decimate(x, t0, dt, record_every, "sweep x"),
        p_of_t=_decimate(p_vals, t0, dt, record_every, "sweep p"),
        envelope=_decimate(env, t0, dt, record_every, "sweep envelope"),
        metadata=meta)


def run_ringdown(rhs, initial_amplitude, duration, dt, record_every=1):
    """Free-decay trace from (x = A0, v = 0[, f_ph = F_ss(A0)]).

    For the physical model the amplitude must stay in the linear regime
    of the fringe (at most 1% of the fringe period).
    """
    if isinstance(rhs, PhysicalRHS):
        period = rhs.params.fringe.wavelength / 2.0
        if abs(initial_amplitude) > 0.01 * period:
            raise ValueError(
                f"initial amplitude {initial_amplitude:g} exceeds 1% of the "
                f"fringe period {period:g}")
        initial = State(x=initial_amplitude, v=0.0,
                        f_ph=rhs.steady_force(initial_amplitude))
    else:
        initial = State(x=initial_amplitude, v=0.0)
    return integrate(rhs, initial, duration, dt, record_every=record_every,
                     metadata="ringdown")
