import math

import numpy as np
import pytest

from selfosc import (DivergenceError, OscillatorParams, State, SweepControl,
                     SweepSchedule, build_physical_rhs, build_polynomial_rhs,
                     critical_power, effective_q, integrate, run_ringdown,
                     run_sweep)
from selfosc.dsp import envelope
from selfosc.experiments import physical_params_for_power
from selfosc.fitting import FitError, fit_ringdown

TWO_PI = 2.0 * math.pi


def _undamped_rhs():
    # zero net damping via p = 1 with no nonlinear terms
    params = OscillatorParams(omega0=1.0, q0=10.0, omega_m=1.0)
    return build_polynomial_rhs(params, SweepControl(p=1.0))


def test_undamped_matches_cosine():
    rhs = _undamped_rhs()
    dt = TWO_PI / 1000.0
    trace = integrate(rhs, State(x=1.0, v=0.0), duration=100 * TWO_PI, dt=dt)
    err = np.abs(trace.samples - np.cos(trace.times()))
    assert err.max() < 1e-8


def test_undamped_energy_conserved():
    rhs = _undamped_rhs()
    dt = TWO_PI / 1000.0
    n = int(round(100 * TWO_PI / dt))
    from selfosc.integrate import _run_rk4
    _, (x, v) = _run_rk4(rhs, (1.0, 0.0), 0.0, dt, n)
    energy = 0.5 * (x * x + v * v)
    assert abs(energy / 0.5 - 1.0) < 1e-8


def test_linear_decay_rate():
    params = OscillatorParams(omega0=1.0, q0=10.0, omega_m=1.0)
    rhs = build_polynomial_rhs(params, SweepControl(p=0.0))
    dt = TWO_PI / 200.0
    trace = integrate(rhs, State(x=1.0, v=0.0), duration=200.0, dt=dt)
    env = envelope(trace, TWO_PI)
    # trim the edge windows, then the fitted rate must give Q0 within 0.5%
    core = env.samples[400:-400]
    from selfosc.integrate import TimeTrace
    env_trace = TimeTrace(t0=0.0, dt=dt, samples=core)
    q, _, _ = fit_ringdown(env_trace, 1.0 / TWO_PI)
    assert abs(q / 10.0 - 1.0) < 0.005


def test_zero_state_stays_zero(quintic_params):
    params = OscillatorParams(omega0=1.0, q0=10.0, omega_m=1.0,
                              gamma3=-2.0, gamma5=1.0, f_m=0.0)
    rhs = build_polynomial_rhs(params, SweepControl(p=0.8))
    trace = integrate(rhs, State(x=0.0, v=0.0), duration=50.0, dt=TWO_PI / 100)
    assert np.all(trace.samples == 0.0)


def test_divergence_guard_names_time():
    # p = 2 pure linear anti-damping grows without bound
    params = OscillatorParams(omega0=1.0, q0=10.0, omega_m=1.0)
    rhs = build_polynomial_rhs(params, SweepControl(p=2.0))
    with pytest.raises(DivergenceError) as info:
        integrate(rhs, State(x=1e-3, v=0.0), duration=1000.0, dt=TWO_PI / 100)
    assert info.value.time > 0.0


def test_dt_precondition():
    rhs = _undamped_rhs()
    with pytest.raises(ValueError):
        integrate(rhs, State(x=1.0, v=0.0), duration=10.0, dt=TWO_PI / 10.0)


def test_sweep_determinism(quintic_params):
    sched = SweepSchedule(breakpoints=((0.0, 0.0), (500.0, 0.4)))
    a = run_sweep(quintic_params, sched, seed=42, dt=TWO_PI / 100)
    b = run_sweep(quintic_params, sched, seed=42, dt=TWO_PI / 100)
    assert np.array_equal(a.trace.samples, b.trace.samples)
    assert np.array_equal(a.envelope.samples, b.envelope.samples)
    c = run_sweep(quintic_params, sched, seed=43, dt=TWO_PI / 100)
    assert not np.array_equal(a.trace.samples, c.trace.samples)


def test_sweep_record_alignment(quintic_params):
    sched = SweepSchedule(breakpoints=((0.0, 0.0), (300.0, 0.2)))
    rec = run_sweep(quintic_params, sched, seed=1, dt=TWO_PI / 100,
                    record_every=5)
    assert rec.trace.t0 == rec.p_of_t.t0 == rec.envelope.t0
    assert rec.trace.samples.size == rec.p_of_t.samples.size \
        == rec.envelope.samples.size
    assert rec.p_of_t.samples[0] == 0.0
    assert rec.p_of_t.samples[-1] == pytest.approx(0.2)


def test_subthreshold_sweep_never_grows():
    # free dynamics below the fold decay; envelope never regrows
    params = OscillatorParams(omega0=1.0, q0=10.0, omega_m=1.0,
                              gamma3=-2.0, gamma5=1.0, f_m=0.0)
    sched = SweepSchedule(breakpoints=((0.0, 0.0), (1000.0, 0.49),
                                       (2000.0, 0.49)))
    rec = run_sweep(params, sched, seed=3, dt=TWO_PI / 100)
    n = rec.envelope.samples.size
    head_max = rec.envelope.samples[:n // 10].max()
    assert rec.envelope.samples[-1] <= head_max


def test_driven_rest_bound(quintic_params):
    # held at p = 0 the response stays bounded by the drive estimate
    sched = SweepSchedule(breakpoints=((0.0, 0.0), (2000.0, 0.0)))
    rec = run_sweep(quintic_params, sched, seed=11, dt=TWO_PI / 100,
                    initial_scale=1e-3)
    p = quintic_params
    bound = 10.0 * (1e-3 + 2.0 * p.f_m * p.q0 / p.omega0 ** 2)
    assert rec.envelope.samples.max() < bound


def test_schedule_validation():
    with pytest.raises(ValueError):
        SweepSchedule(breakpoints=((0.0, 0.0),))
    with pytest.raises(ValueError):
        SweepSchedule(breakpoints=((0.0, 0.0), (0.0, 1.0)))


# --- ring-downs against the closed-form Q_eff ------------------------------

def _ringdown_q(photothermal, fringe, power, n_cycles=1200):
    from selfosc.experiments import measure_ringdown_q
    return measure_ringdown_q(photothermal, fringe, power, n_cycles=n_cycles)


def test_ringdown_zero_light_recovers_q0(instrument_photothermal, fringe_830nm):
    q = _ringdown_q(instrument_photothermal, fringe_830nm, 0.0)
    assert abs(q / instrument_photothermal.q0 - 1.0) < 0.01


def test_ringdown_half_critical_power(instrument_photothermal, fringe_830nm):
    p_half = 0.5 * critical_power(instrument_photothermal)
    q = _ringdown_q(instrument_photothermal, fringe_830nm, p_half)
    expected = effective_q(instrument_photothermal, p_half)
    assert abs(q / expected - 1.0) < 0.05


def test_ringdown_above_critical_grows(instrument_photothermal, fringe_830nm):
    power = 1.5 * critical_power(instrument_photothermal)
    pm = physical_params_for_power(instrument_photothermal, fringe_830nm,
                                   power)
    rhs = build_physical_rhs(pm)
    period = TWO_PI / pm.omega0
    trace = run_ringdown(rhs, 0.004 * fringe_830nm.wavelength,
                         600 * period, period / 100.0)
    x = trace.samples - trace.samples.mean()
    half = x.size // 2
    assert np.abs(x[half:]).max() > np.abs(x[:half]).max()


def test_ringdown_amplitude_guard(instrument_photothermal, fringe_830nm):
    pm = physical_params_for_power(instrument_photothermal, fringe_830nm, 0.0)
    rhs = build_physical_rhs(pm)
    period = TWO_PI / pm.omega0
    with pytest.raises(ValueError):
        run_ringdown(rhs, 0.02 * fringe_830nm.wavelength, 10 * period,
                     period / 100.0)


def test_growing_envelope_is_a_fit_error(instrument_photothermal,
                                         fringe_830nm):
    power = 1.5 * critical_power(instrument_photothermal)
    with pytest.raises(FitError):
        _ringdown_q(instrument_photothermal, fringe_830nm, power,
                    n_cycles=600)
