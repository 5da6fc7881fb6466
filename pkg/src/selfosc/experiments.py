"""High-level protocols: amplitude/Q hysteresis against the control
parameter, jump detection, and the effective-Q linearity checks that tie
the delayed-force physical model back to the closed-form Q_eff(P).
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import fitting, optics
from ._kernels import sliding_window_max
from .integrate import TWO_PI, envelope_window_steps, _run_rk4, run_ringdown
from .model import (PhysicalModelParams, SweepControl, build_physical_rhs,
                    build_polynomial_rhs)


@dataclass(frozen=True)
class BranchStep:
    """One settled point of a hysteresis branch."""

    control: float
    amplitude: float
    q_eff: float
    settled: bool


@dataclass(frozen=True)
class HysteresisCurve:
    up_branch: tuple
    down_branch: tuple
    jump_up: Optional[float]
    jump_down: Optional[float]
    metadata: dict = field(default_factory=dict)

    def loop_area(self):
        """Integral of (down^2 - up^2) amplitude over p; > 0 means a real loop."""
        up_p = np.array([s.control for s in self.up_branch])
        up_a = np.array([s.amplitude for s in self.up_branch])
        dn = sorted(self.down_branch, key=lambda s: s.control)
        dn_p = np.array([s.control for s in dn])
        dn_a = np.array([s.amplitude for s in dn])
        grid = up_p
        dn_on_grid = np.interp(grid, dn_p, dn_a)
        return float(np.trapezoid(dn_on_grid ** 2 - up_a ** 2, grid))


def detect_jumps(up_records, down_records, ratio=5.0):
    """Locate the amplitude discontinuity on each branch.

    A jump is the first consecutive pair whose amplitude ratio exceeds
    ``ratio``; the reported value is the midpoint of the two control
    values.  Either jump may be absent (None).
    """
    if len(up_records) < 3 or len(down_records) < 3:
        raise ValueError("need at least 3 points per branch")
    jump_up = None
    for (p0, a0), (p1, a1) in zip(up_records, up_records[1:]):
        if a1 > ratio * max(a0, 1e-300):
            jump_up = 0.5 * (p0 + p1)
            break
    jump_down = None
    for (p0, a0), (p1, a1) in zip(down_records, down_records[1:]):
        if a0 > ratio * max(a1, 1e-300):
            jump_down = 0.5 * (p0 + p1)
            break
    return jump_up, jump_down


def _envelope_of(x, params, dt):
    return sliding_window_max(x, envelope_window_steps(params.omega0, dt))


def _settled_measures(env):
    """Mean amplitude over the final 10% and a <=1%-drift settled flag."""
    n = env.size
    amplitude = float(env[int(0.9 * n):].mean())
    last = env[int(0.8 * n):]
    drift = abs(float(last[-1]) - float(last[0]))
    return amplitude, drift <= 0.01 * max(amplitude, 1e-12)


def _qeff_from_kick(rhs, state, params, p, amplitude, dt,
                    kick_amplitude, kick_factor, duration):
    """Effective Q from the relaxation rate of a small perturbation.

    Rest state: a fresh small-amplitude ring-down (decay, or growth
    beyond the instability giving a negative Q).  Limit cycle: the state
    is kicked up by ``kick_factor`` and the decay rate of the envelope
    deviation is fitted.  Marginal relaxation reports inf.
    """
    nsteps = int(round(duration / dt))
    window = envelope_window_steps(params.omega0, dt)
    if amplitude < 10.0 * kick_amplitude:
        x, _ = _run_rk4(rhs, (kick_amplitude, 0.0), 0.0, dt, nsteps)
        env = sliding_window_max(x, window)[window:-window]
        logs = np.log(np.maximum(env, 1e-300))
        t = dt * np.arange(logs.size)
        rate = -float(np.polyfit(t, logs, 1)[0])
    else:
        kicked = tuple(kick_factor * s for s in state)
        x, _ = _run_rk4(rhs, kicked, 0.0, dt, nsteps)
        env = sliding_window_max(x, window)[window:-window]
        dev = env - amplitude
        keep = dev > 0.005 * amplitude
        n_keep = int(np.argmin(keep)) if not keep.all() else dev.size
        if n_keep < 10:
            return math.inf
        t = dt * np.arange(n_keep)
        rate = -float(np.polyfit(t, np.log(dev[:n_keep]), 1)[0])
    if abs(rate) * duration < 1e-9:
        return math.inf
    return params.omega0 / (2.0 * rate)


def hysteresis_experiment(params, p_grid, dwell_time, seed, dt=None,
                          mode="quintic", measure_q=True,
                          kick_amplitude=0.02, q_probe_duration=600.0,
                          initial_scale=1e-3):
    """Step p up the grid and back down, carrying the oscillator state.

    At each step the model dwells for ``dwell_time``, the settled
    envelope amplitude is recorded (flagged unsettled when it still
    drifts by more than 1% over the last 20% of the dwell), and an
    effective Q is measured from a small-kick relaxation probe.  Jumps
    are detected on both branches.
    """
    p_grid = [float(p) for p in p_grid]
    if len(p_grid) < 2 or any(b <= a for a, b in zip(p_grid, p_grid[1:])):
        raise ValueError("p_grid must be strictly increasing with >= 2 points")
    decay_time = 2.0 * params.q0 / params.omega0
    if dwell_time < 50.0 * decay_time:
        raise ValueError(f"dwell_time must be >= 50 decay times "
                         f"({50.0 * decay_time:g})")
    if dt is None:
        dt = TWO_PI / (100.0 * params.omega0)

    rng = np.random.default_rng(seed)
    state = tuple(rng.uniform(-initial_scale, initial_scale, size=2))
    nsteps = int(round(dwell_time / dt))

    def run_branch(ps, t_start):
        nonlocal state
        steps = []
        t = t_start
        for p in ps:
            rhs = build_polynomial_rhs(params, SweepControl(p=p), mode=mode)
            x, state_new = _run_rk4(rhs, state, t, dt, nsteps)
            state = state_new
            t += dwell_time
            env = _envelope_of(x, params, dt)
            amplitude, settled = _settled_measures(env)
            q_eff = math.nan
            if measure_q:
                q_eff = _qeff_from_kick(rhs, state, params, p, amplitude, dt,
                                        kick_amplitude, 1.15, q_probe_duration)
            steps.append(BranchStep(control=p, amplitude=amplitude,
                                    q_eff=q_eff, settled=settled))
        return steps, t

    up, t_end = run_branch(p_grid, 0.0)
    down, _ = run_branch(list(reversed(p_grid[:-1])), t_end)

    jump_up, jump_down = detect_jumps(
        [(s.control, s.amplitude) for s in up],
        [(s.control, s.amplitude) for s in down])
    return HysteresisCurve(
        up_branch=tuple(up), down_branch=tuple(down),
        jump_up=jump_up, jump_down=jump_down,
        metadata={"seed": seed, "mode": mode, "dwell_time": dwell_time,
                  "dt": dt})


def physical_params_for_power(photothermal, fringe, power,
                              working_point=None, f_rad=0.0):
    """PhysicalModelParams reproducing c_ph = kappa * power.

    The working point defaults to lambda/8, the steepest negative slope
    of the raised-sine force fringe; the force amplitude is scaled so the
    local force-displacement slope is -kappa*power, which linearizes to
    the closed-form Q_eff(P).
    """
    lam = fringe.wavelength
    if working_point is None:
        working_point = lam / 8.0
    s = math.sin(4.0 * math.pi * working_point / lam)
    if s <= 0.0:
        raise ValueError("working point must sit on the negative fringe slope")
    mass = photothermal.c_z / photothermal.omega0 ** 2
    amplitude = photothermal.kappa * power * lam / (2.0 * math.pi * s)
    return PhysicalModelParams(
        mass=mass, omega0=photothermal.omega0, q0=photothermal.q0,
        tau=photothermal.tau, f_rad=f_rad,
        photothermal_amplitude=amplitude, fringe=fringe,
        working_point=working_point)


def measure_ringdown_q(photothermal, fringe, power, n_cycles=1500,
                       steps_per_cycle=100, amplitude=None, trim_cycles=5):
    """Ring-down Q of the physical model at the given laser power.

    Integrates a free decay, strips the static deflection, extracts the
    envelope and fits its exponential rate.  Raises FitError when the
    envelope grows (beyond the critical power).
    """
    pm = physical_params_for_power(photothermal, fringe, power)
    rhs = build_physical_rhs(pm)
    period = TWO_PI / pm.omega0
    dt = period / steps_per_cycle
    if amplitude is None:
        amplitude = 0.004 * fringe.wavelength
    trace = run_ringdown(rhs, amplitude, n_cycles * period, dt)
    x = trace.samples - trace.samples.mean()
    env = sliding_window_max(x, steps_per_cycle)
    lo = trim_cycles * steps_per_cycle
    from .integrate import TimeTrace
    env_trace = TimeTrace(t0=lo * dt, dt=dt, samples=env[lo:-steps_per_cycle],
                          metadata="ringdown envelope")
    q, _, _ = fitting.fit_ringdown(env_trace, pm.omega0 / TWO_PI)
    return q


@dataclass(frozen=True)
class LinearityScan:
    """Least-squares line through (power, 1/Q_eff) samples."""

    slope: float
    intercept: float
    residual_norm: float
    zero_crossing: float
    powers: tuple
    inverse_q: tuple
    source: str


def qeff_linearity_scan(photothermal, power_grid, source="formula",
                        fringe=None, n_cycles=1500, steps_per_cycle=100):
    """Fit 1/Q_eff versus laser power with a straight line.

    source "formula" evaluates the closed form (exactly affine);
    "ringdown" measures each point from a physical-model free decay
    (requires ``fringe``).  Reports the extrapolated zero crossing, the
    power where the rest state destabilizes.
    """
    powers = np.asarray(list(power_grid), dtype=float)
    if powers.size < 2:
        raise ValueError("need at least 2 powers")
    if source == "formula":
        inv_q = np.array([optics.inverse_effective_q(photothermal, p)
                          for p in powers])
    elif source == "ringdown":
        if fringe is None:
            raise ValueError("ringdown source requires fringe parameters")
        inv_q = np.array([1.0 / measure_ringdown_q(photothermal, fringe, p,
                                                   n_cycles=n_cycles,
                                                   steps_per_cycle=steps_per_cycle)
                          for p in powers])
    else:
        raise ValueError(f"unknown source {source!r}")
    slope, intercept = np.polyfit(powers, inv_q, 1)
    resid = float(np.linalg.norm(inv_q - (slope * powers + intercept)))
    zero = -intercept / slope if slope != 0.0 else math.inf
    return LinearityScan(slope=float(slope), intercept=float(intercept),
                         residual_norm=resid, zero_crossing=float(zero),
                         powers=tuple(powers), inverse_q=tuple(inv_q),
                         source=source)
