import math

import pytest

from selfosc import InterferometerParams, OscillatorParams, PhotothermalParams

TWO_PI = 2.0 * math.pi


@pytest.fixture
def quintic_params():
    """The nonlinear-damping parameter set used throughout the sweeps."""
    return OscillatorParams(omega0=1.0, q0=10.0, omega_m=1.0,
                            gamma3=-2.0, gamma5=1.0, f_m=1e-4)


@pytest.fixture
def instrument_photothermal():
    """Cantilever/interferometer values of the measurement setup."""
    f0 = 74083.0
    return PhotothermalParams(q0=31000.0, c_z=2.8, kappa=0.42, tau=2e-6,
                              omega0=TWO_PI * f0, omega_m=TWO_PI * f0)


@pytest.fixture
def fringe_830nm():
    return InterferometerParams(wavelength=830e-9)
