import math

import numpy as np
import pytest

from selfosc import (InterferometerParams, NoiseParams, PhotothermalParams,
                     critical_power, effective_q, finesse, fringe_intensity,
                     inverse_effective_q, lissajous_curve,
                     thermal_frequency_noise)
from selfosc.optics import OpticsError, lissajous_kind

# instrument-value evaluation of the frequency-noise formula, frozen from
# a direct high-precision computation
DF_RMS_INSTRUMENT = 6.124436312672193e-3


def test_fringe_periodicity():
    params = InterferometerParams(wavelength=830e-9, visibility=0.8,
                                  mean_intensity=2.0)
    lam = params.wavelength
    for d in np.linspace(0.0, lam, 13):
        i1, _ = fringe_intensity(params, d)
        i2, _ = fringe_intensity(params, d + lam / 2.0)
        assert i2 == pytest.approx(i1, rel=1e-9, abs=1e-12)


def test_fringe_slope_extrema():
    params = InterferometerParams(wavelength=830e-9, visibility=0.8,
                                  mean_intensity=2.0)
    lam = params.wavelength
    _, s0 = fringe_intensity(params, 0.0)
    _, s_quarter = fringe_intensity(params, lam / 4.0)
    assert abs(s0) < 1e-6 * abs(
        params.mean_intensity * params.visibility * 4 * math.pi / lam)
    assert abs(s_quarter) < 1e-6 * abs(
        params.mean_intensity * params.visibility * 4 * math.pi / lam)
    _, s_eighth = fringe_intensity(params, lam / 8.0)
    expected = params.mean_intensity * params.visibility * 4 * math.pi / lam
    assert abs(s_eighth) == pytest.approx(expected, rel=1e-12)


def test_fringe_slope_matches_finite_difference():
    params = InterferometerParams(wavelength=1.0, visibility=0.7,
                                  mean_intensity=1.5)
    h = 1e-7
    for d in (0.03, 0.11, 0.29):
        up, _ = fringe_intensity(params, d + h)
        dn, _ = fringe_intensity(params, d - h)
        _, slope = fringe_intensity(params, d)
        assert slope == pytest.approx((up - dn) / (2 * h), rel=1e-6)


def test_finesse_values():
    assert finesse(0.04, 1.0) == pytest.approx(1.756, abs=5e-4)
    assert finesse(0.9, 0.9) == pytest.approx(29.803764797388308, rel=1e-12)
    assert finesse(0.3, 0.7) == finesse(0.7, 0.3)


def test_finesse_monotone_and_domain():
    values = [finesse(r, r) for r in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert all(b > a for a, b in zip(values, values[1:]))
    with pytest.raises(OpticsError):
        finesse(1.0, 1.0)
    with pytest.raises(OpticsError):
        finesse(0.0, 0.5)


def test_effective_q_zero_power(instrument_photothermal):
    assert effective_q(instrument_photothermal, 0.0) == \
        instrument_photothermal.q0


def test_inverse_q_is_affine(instrument_photothermal):
    powers = np.array([1e-5, 2e-4, 5e-4])
    inv = np.array([inverse_effective_q(instrument_photothermal, p)
                    for p in powers])
    slope01 = (inv[1] - inv[0]) / (powers[1] - powers[0])
    slope12 = (inv[2] - inv[1]) / (powers[2] - powers[1])
    assert slope01 == pytest.approx(slope12, rel=1e-9)


def test_inverse_q_vanishes_at_critical_power(instrument_photothermal):
    p_crit = critical_power(instrument_photothermal)
    assert abs(inverse_effective_q(instrument_photothermal, p_crit)) < 1e-15
    assert inverse_effective_q(instrument_photothermal, 1.2 * p_crit) < 0.0
    assert effective_q(instrument_photothermal, 1.2 * p_crit) < 0.0


def test_half_critical_power_doubles_q(instrument_photothermal):
    p_half = 0.5 * critical_power(instrument_photothermal)
    assert effective_q(instrument_photothermal, p_half) == pytest.approx(
        2.0 * instrument_photothermal.q0, rel=1e-12)


def test_critical_power_scalings(instrument_photothermal):
    base = critical_power(instrument_photothermal)
    pt = instrument_photothermal
    doubled_kappa = PhotothermalParams(q0=pt.q0, c_z=pt.c_z,
                                       kappa=2 * pt.kappa, tau=pt.tau,
                                       omega0=pt.omega0, omega_m=pt.omega_m)
    assert critical_power(doubled_kappa) == pytest.approx(base / 2, rel=1e-12)
    doubled_q0 = PhotothermalParams(q0=2 * pt.q0, c_z=pt.c_z, kappa=pt.kappa,
                                    tau=pt.tau, omega0=pt.omega0,
                                    omega_m=pt.omega_m)
    assert critical_power(doubled_q0) == pytest.approx(base / 2, rel=1e-12)


def _noise(**overrides):
    kwargs = dict(amplitude=1e-9, bandwidth=1.0, temperature=10.0,
                  f0=74083.0, q=31000.0, c_l=2.8)
    kwargs.update(overrides)
    return NoiseParams(**kwargs)


def test_thermal_noise_instrument_value():
    value = thermal_frequency_noise(_noise())
    assert value == pytest.approx(DF_RMS_INSTRUMENT, rel=1e-12)
    assert abs(value / 6.12e-3 - 1.0) < 1e-3


def test_thermal_noise_scalings():
    base = thermal_frequency_noise(_noise())
    assert thermal_frequency_noise(_noise(amplitude=2e-9)) == \
        pytest.approx(base / 2.0, rel=1e-12)
    assert thermal_frequency_noise(_noise(q=60 * 31000.0)) == \
        pytest.approx(base / math.sqrt(60.0), rel=1e-12)
    assert thermal_frequency_noise(_noise(q=18 * 31000.0)) == \
        pytest.approx(base / math.sqrt(18.0), rel=1e-12)
    assert thermal_frequency_noise(_noise(bandwidth=4.0)) == \
        pytest.approx(base * 2.0, rel=1e-12)
    assert thermal_frequency_noise(_noise(temperature=40.0)) == \
        pytest.approx(base * 2.0, rel=1e-12)


# --- Lissajous curve -------------------------------------------------------

def _curve(phase, depth=1e-5, n_points=128):
    fringe = InterferometerParams(wavelength=1.0)
    return lissajous_curve(phase, depth, fringe,
                           inverse_q_mean=1.0 / 31000.0, n_points=n_points)


def _bbox_area(pts):
    return (pts[:, 0].ptp()) * (pts[:, 1].ptp())


def test_lissajous_zero_phase_collinear():
    pts = _curve(0.0)
    slope, inv_q = pts[:, 0], pts[:, 1]
    fit = np.polyfit(slope, inv_q, 1)
    resid = inv_q - np.polyval(fit, slope)
    assert np.max(np.abs(resid)) < 1e-12 * np.ptp(inv_q)
    assert lissajous_kind(0.0) == "line"
    assert lissajous_kind(math.pi) == "line"


def test_lissajous_quarter_phase_is_widest():
    areas = [_bbox_area(_curve(ph))
             for ph in (0.1, 0.5, math.pi / 2, 2.2, 3.0)]
    assert max(areas) == areas[2]
    assert lissajous_kind(math.pi / 2) == "oval"


def test_lissajous_closes():
    pts = _curve(1.1)
    assert abs(pts[0, 0] - pts[-1, 0]) < 1e-12
    assert abs(pts[0, 1] - pts[-1, 1]) < 1e-12


def test_lissajous_area_shrinks_continuously_to_zero():
    phases = [0.5, 0.2, 0.1, 0.05, 0.01, 0.001]
    areas = [_bbox_area(_curve(ph)) for ph in phases]
    assert all(b < a for a, b in zip(areas, areas[1:]))
    # height collapses linearly with the phase
    heights = [float(np.ptp(_curve(ph)[:, 1])) for ph in phases]
    assert heights[-1] < 2e-3 * heights[0]


def test_lissajous_depth_validation():
    with pytest.raises(OpticsError):
        _curve(0.3, depth=1.0)
