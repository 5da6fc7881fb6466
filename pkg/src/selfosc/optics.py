"""Closed-form optical and optomechanical formulas.

Low-finesse (two-beam) fringe model, cavity finesse, power-dependent
effective quality factor with its critical power, thermal frequency
noise, and the Lissajous curve of 1/Q_eff against the interferometer
slope.  All functions are pure.
"""

import math
from dataclasses import dataclass

import numpy as np

BOLTZMANN = 1.380649e-23  # J/K


class OpticsError(ValueError):
    pass


@dataclass(frozen=True)
class InterferometerParams:
    """Two-beam fiber interferometer: fringe period is wavelength/2."""

    wavelength: float          # m
    visibility: float = 1.0    # 0..1
    mean_intensity: float = 1.0
    r1: float = 0.04           # fiber-end reflectivity
    r2: float = 1.0            # cantilever reflectivity

    def __post_init__(self):
        if not self.wavelength > 0:
            raise OpticsError("wavelength must be positive")
        if not 0.0 <= self.visibility <= 1.0:
            raise OpticsError("visibility must be in [0, 1]")
        if not (0.0 <= self.r1 <= 1.0 and 0.0 <= self.r2 <= 1.0):
            raise OpticsError("reflectivities must be in [0, 1]")


@dataclass(frozen=True)
class PhotothermalParams:
    """Inputs of the effective-Q formula; c_ph = kappa * power."""

    q0: float        # intrinsic quality factor
    c_z: float       # cantilever spring constant, N/m
    kappa: float     # optical-spring gain, N/m per W
    tau: float       # photothermal delay, s
    omega0: float    # rad/s
    omega_m: float   # modified angular frequency, rad/s

    def __post_init__(self):
        for name in ("q0", "c_z", "tau", "omega0", "omega_m"):
            if not getattr(self, name) > 0:
                raise OpticsError(f"{name} must be positive")
        if self.kappa < 0:
            raise OpticsError("kappa must be >= 0")


@dataclass(frozen=True)
class NoiseParams:
    """Inputs of the thermal frequency-noise formula."""

    amplitude: float    # oscillation amplitude, m
    bandwidth: float    # detection bandwidth, Hz
    temperature: float  # K
    f0: float           # resonance frequency, Hz
    q: float            # quality factor
    c_l: float          # longitudinal spring constant, N/m
    boltzmann: float = BOLTZMANN

    def __post_init__(self):
        for name in ("amplitude", "bandwidth", "temperature", "f0", "q",
                     "c_l", "boltzmann"):
            if not getattr(self, name) > 0:
                raise OpticsError(f"{name} must be positive")


def fringe_intensity(params, distance):
    """Intensity and its slope dI/dD at fiber-cantilever distance D.

    I(D) = mean_intensity * (1 + visibility * cos(4 pi D / wavelength)).
    """
    k = 4.0 * math.pi / params.wavelength
    phase = k * distance
    intensity = params.mean_intensity * (1.0 + params.visibility * math.cos(phase))
    slope = -params.mean_intensity * params.visibility * k * math.sin(phase)
    return intensity, slope


def finesse(r1, r2):
    """Cavity finesse F = pi (R1 R2)^(1/4) / (1 - (R1 R2)^(1/2))."""
    rr = r1 * r2
    if not 0.0 < rr < 1.0:
        raise OpticsError(f"need 0 < r1*r2 < 1, got {rr}")
    return math.pi * rr ** 0.25 / (1.0 - math.sqrt(rr))


def inverse_effective_q(params, power):
    """1/Q_eff = 1/Q0 - (kappa P / c_z) * omega0 tau / (1 + tau^2 omega_m^2)."""
    if power < 0:
        raise OpticsError("power must be >= 0")
    gain = (params.kappa * power / params.c_z) \
        * params.omega0 * params.tau / (1.0 + (params.tau * params.omega_m) ** 2)
    return 1.0 / params.q0 - gain


def effective_q(params, power):
    """Signed effective quality factor at the given laser power.

    Returns a negative value beyond the critical power (anti-damping)
    and +inf exactly at it; the sign change is the caller's signal that
    the rest state has become unstable.
    """
    inv = inverse_effective_q(params, power)
    if inv == 0.0:
        return math.inf
    return 1.0 / inv


def critical_power(params):
    """Laser power where 1/Q_eff crosses zero (inf for kappa = 0)."""
    if params.kappa == 0.0:
        return math.inf
    return params.c_z * (1.0 + (params.tau * params.omega_m) ** 2) \
        / (params.q0 * params.kappa * params.omega0 * params.tau)


def thermal_frequency_noise(params):
    """RMS thermal frequency noise of a self-oscillated cantilever.

    df_rms = (1/A) sqrt(kB T B f0 / (pi Q c_L)), in Hz.
    """
    return (1.0 / params.amplitude) * math.sqrt(
        params.boltzmann * params.temperature * params.bandwidth * params.f0
        / (math.pi * params.q * params.c_l))


def lissajous_kind(phase_offset):
    """'line' when the Q-modulation is in (anti)phase with the slope, else 'oval'."""
    reduced = math.fmod(phase_offset, math.pi)
    if min(abs(reduced), abs(abs(reduced) - math.pi)) < 1e-12:
        return "line"
    return "oval"


def lissajous_curve(phase_offset, q_modulation_depth, params,
                    inverse_q_mean=1.0 / 31000.0, n_points=256):
    """Parametric (slope, 1/Q_eff) curve over one fringe period.

    The 1/Q_eff modulation is a sinusoid of the cantilever position with
    the same period as the interferometer slope; ``phase_offset`` is its
    phase relative to the slope, so 0 or pi degenerates to a straight
    line and pi/2 traces the widest oval.  The first and last points
    coincide (closed curve).
    """
    if q_modulation_depth < 0 or q_modulation_depth > inverse_q_mean:
        raise OpticsError("modulation depth must keep 1/Q_eff within [0, 2/Q_mean]")
    half_period = params.wavelength / 2.0
    x0 = np.linspace(0.0, half_period, n_points + 1)
    theta = 4.0 * math.pi * x0 / params.wavelength
    slope = -params.mean_intensity * params.visibility \
        * (4.0 * math.pi / params.wavelength) * np.sin(theta)
    inv_q = inverse_q_mean - q_modulation_depth * np.sin(theta + phase_offset)
    return np.column_stack([slope, inv_q])
