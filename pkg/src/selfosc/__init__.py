"""Optomechanical cantilever self-excitation: simulation and analysis toolkit."""

from ._kernels import NUMBA_ACTIVE
from .model import (
    ModelError,
    OscillatorParams,
    PhysicalModelParams,
    State,
    SweepControl,
    build_physical_rhs,
    build_polynomial_rhs,
)
from .integrate import (
    DivergenceError,
    SweepRecord,
    SweepSchedule,
    TimeTrace,
    integrate,
    run_ringdown,
    run_sweep,
)
from .slowflow import (
    BifurcationSummary,
    BranchPoint,
    classify,
    fold_point,
    steady_amplitudes,
)
from .optics import (
    InterferometerParams,
    NoiseParams,
    PhotothermalParams,
    critical_power,
    effective_q,
    finesse,
    fringe_intensity,
    inverse_effective_q,
    lissajous_curve,
    thermal_frequency_noise,
)

__version__ = "0.1.0"
