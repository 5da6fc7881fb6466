import math

import numpy as np
import pytest

from selfosc import (InterferometerParams, OscillatorParams,
                     PhysicalModelParams, State, SweepControl,
                     build_physical_rhs, build_polynomial_rhs, integrate)
from selfosc.model import EvaluationError, ModelError


def test_damping_bracket_cancels_by_hand():
    # g3=-2, g5=1 at x=1 gives bracket 1 - 2 + 1 = 0, so dv = -omega_m^2 x
    params = OscillatorParams(omega0=1.0, q0=10.0, omega_m=1.0,
                              gamma3=-2.0, gamma5=1.0)
    rhs = build_polynomial_rhs(params, SweepControl(p=0.0), mode="quintic")
    deriv = rhs(0.0, np.array([1.0, 1.0]))
    assert deriv[0] == 1.0
    assert deriv[1] == -1.0


def test_rest_state_is_fixed_point(quintic_params):
    params = OscillatorParams(omega0=1.0, q0=10.0, omega_m=1.0,
                              gamma3=-2.0, gamma5=1.0, f_m=0.0)
    for mode in ("vdp", "quintic", "general"):
        for p in (0.0, 0.5, 1.0, 1.5):
            rhs = build_polynomial_rhs(params, SweepControl(p=p), mode=mode)
            assert np.all(rhs(3.7, np.array([0.0, 0.0])) == 0.0)


def test_linear_damping_vanishes_at_threshold():
    params = OscillatorParams(omega0=1.0, q0=10.0, omega_m=1.0)
    rhs = build_polynomial_rhs(params, SweepControl(p=1.0), mode="quintic")
    deriv = rhs(0.0, np.array([0.0, 2.0]))
    assert deriv[0] == 2.0
    assert deriv[1] == 0.0


def test_rhs_is_pure(quintic_params):
    rhs = build_polynomial_rhs(quintic_params, SweepControl(p=0.7))
    y = np.array([0.3, -0.4])
    a = rhs(1.234, y)
    b = rhs(1.234, y)
    assert np.array_equal(a, b)


def test_bracket_times_v_parity(quintic_params):
    # damping force bracket(x)*v is odd in v and even in x
    rhs = build_polynomial_rhs(quintic_params, SweepControl(p=0.7))
    rng = np.random.default_rng(7)
    for x, v in rng.uniform(-2, 2, size=(50, 2)):
        f = rhs.damping_bracket(x) * v
        assert rhs.damping_bracket(-x) * v == pytest.approx(f, rel=1e-14)
        assert rhs.damping_bracket(x) * (-v) == pytest.approx(-f, rel=1e-14)


def test_vdp_mode_ignores_gamma5():
    params = OscillatorParams(gamma3=1.0, gamma5=99.0)
    vdp = build_polynomial_rhs(params, SweepControl(p=0.0), mode="vdp")
    assert vdp.g5 == 0.0
    ref = OscillatorParams(gamma3=1.0, gamma5=0.0)
    quintic = build_polynomial_rhs(ref, SweepControl(p=0.0), mode="quintic")
    y = np.array([1.3, -0.2])
    assert np.array_equal(vdp(0.5, y), quintic(0.5, y))


def test_general_mode_adds_stiffness_terms():
    params = OscillatorParams(omega0=1.0, q0=10.0, omega_m=1.0,
                              gamma3=-2.0, gamma5=1.0, alpha3=0.3, alpha5=0.1)
    gen = build_polynomial_rhs(params, SweepControl(p=0.4), mode="general")
    qui = build_polynomial_rhs(params, SweepControl(p=0.4), mode="quintic")
    x, v = 0.8, -0.5
    dgen = gen(0.0, np.array([x, v]))
    dqui = qui(0.0, np.array([x, v]))
    expected_extra = -(0.3 * x ** 3 + 0.1 * x ** 5)
    assert dgen[1] - dqui[1] == pytest.approx(expected_extra, rel=1e-14)


def test_tilde_coefficient_conversion():
    params = OscillatorParams(omega0=2.0, q0=8.0, omega_m=2.0,
                              gamma3=-2.0, gamma5=1.0)
    assert params.gamma3_absolute() == pytest.approx(-0.5)
    assert params.gamma5_absolute() == pytest.approx(0.25)


def test_invalid_construction():
    with pytest.raises(ModelError):
        OscillatorParams(omega0=-1.0)
    with pytest.raises(ModelError):
        OscillatorParams(q0=0.0)
    with pytest.raises(ModelError):
        OscillatorParams(gamma3=math.nan)
    with pytest.raises(ModelError):
        SweepControl(p=-0.1)
    params = OscillatorParams()
    with pytest.raises(ModelError):
        build_polynomial_rhs(params, SweepControl(p=0.0), mode="cubic")


def test_nonfinite_state_rejected(quintic_params):
    rhs = build_polynomial_rhs(quintic_params, SweepControl(p=0.0))
    with pytest.raises(EvaluationError):
        rhs(0.0, np.array([math.inf, 0.0]))


# --- physical model -------------------------------------------------------

def _physical(amplitude=1e-12, f_rad=0.0, tau=2e-6, working_point=830e-9 / 8):
    fringe = InterferometerParams(wavelength=830e-9)
    return PhysicalModelParams(mass=1.3e-11, omega0=2 * math.pi * 74083.0,
                               q0=31000.0, tau=tau, f_rad=f_rad,
                               photothermal_amplitude=amplitude,
                               fringe=fringe, working_point=working_point)


def test_photothermal_relaxation_fixed_point():
    rhs = build_physical_rhs(_physical(amplitude=3e-12))
    x = 1e-10
    f_ss = rhs.steady_force(x)
    deriv = rhs(0.0, np.array([x, 0.0, f_ss]))
    assert deriv[2] == 0.0
    assert rhs(0.0, np.array([x, 0.0, 0.5 * f_ss]))[2] > 0.0
    assert rhs(0.0, np.array([x, 0.0, 2.0 * f_ss]))[2] < 0.0


def test_photothermal_relaxes_exponentially():
    # with x frozen, f_ph follows F_ss with the closed-form exponential lag
    pm = _physical(amplitude=3e-12)
    rhs = build_physical_rhs(pm)
    x0 = 2e-10
    f_ss = rhs.steady_force(x0)

    def frozen(t, y):
        return np.array([0.0, 0.0, (f_ss - y[2]) / pm.tau])

    trace_dt = pm.tau / 200.0
    from selfosc.integrate import _run_rk4
    _, final = _run_rk4(frozen, (x0, 0.0, 0.0), 0.0, trace_dt, 600)
    expected = f_ss * (1.0 - math.exp(-600 * trace_dt / pm.tau))
    assert final[2] == pytest.approx(expected, rel=1e-9)


def test_zero_light_reduces_to_linear_oscillator():
    pm = _physical(amplitude=0.0, f_rad=0.0)
    phys = build_physical_rhs(pm)
    lin = build_polynomial_rhs(
        OscillatorParams(omega0=pm.omega0, q0=pm.q0, omega_m=pm.omega0),
        SweepControl(p=0.0), mode="quintic")
    dt = 2 * math.pi / pm.omega0 / 100.0
    a0 = 1e-9
    tr_phys = integrate(phys, State(x=a0, v=0.0, f_ph=0.0), 300 * dt, dt)
    tr_lin = integrate(lin, State(x=a0, v=0.0), 300 * dt, dt)
    assert np.max(np.abs(tr_phys.samples - tr_lin.samples)) <= 1e-24


def test_steady_force_slope_matches_finite_difference():
    # local force-displacement slope is the optical spring constant
    pm = _physical(amplitude=5e-12)
    rhs = build_physical_rhs(pm)
    h = 1e-12
    fd = (rhs.steady_force(h) - rhs.steady_force(-h)) / (2.0 * h)
    lam = pm.fringe.wavelength
    k = 4.0 * math.pi / lam
    analytic = -pm.photothermal_amplitude * 0.5 * k * math.sin(
        k * pm.working_point)
    assert fd == pytest.approx(analytic, rel=1e-6)


def test_physical_validation():
    with pytest.raises(ModelError):
        _physical(tau=0.0)
    with pytest.raises(ModelError):
        PhysicalModelParams(mass=-1.0, omega0=1.0, q0=1.0, tau=1.0,
                            f_rad=0.0, photothermal_amplitude=0.0,
                            fringe=InterferometerParams(wavelength=830e-9),
                            working_point=0.0)
