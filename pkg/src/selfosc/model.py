"""Parameter types and equation-of-motion builders for the cantilever models.

Two families of right-hand sides:

* polynomial: nonlinear-damping oscillator
      x'' + (omega0/Q0)(1 - p + g3 x^2 + g5 x^4) x' + omega_m^2 x
          (+ alpha3 x^3 + alpha5 x^5 in general mode)
      = 2 f_m cos(omega0 t + phi0)
  where p is a dimensionless control proportional to laser power and
  g3, g5 are the dimensionless damping-bracket coefficients.

* physical: linearly damped oscillator driven by a constant radiation
  force plus a photothermal force that relaxes with delay tau toward a
  raised-sine fringe profile of the displacement.

Both builders return pure callables ``rhs(t, y) -> ndarray`` suitable for
the integrators in :mod:`selfosc.integrate` (which dispatch to compiled
kernels when they recognize these types).
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .optics import InterferometerParams

MODES = ("vdp", "quintic", "general")


class ModelError(ValueError):
    """Invalid parameters or mode at construction time."""


class EvaluationError(ValueError):
    """Non-finite state handed to a derivative function."""


def _require_finite(name, *values):
    for v in values:
        if not math.isfinite(v):
            raise ModelError(f"{name}: non-finite value {v!r}")


@dataclass(frozen=True)
class OscillatorParams:
    """Coefficients of the polynomial equations of motion.

    ``gamma3``/``gamma5`` hold the dimensionless damping-bracket (tilde)
    coefficients; the absolute damping coefficients are
    (omega0/q0) * gamma (see :meth:`gamma3_absolute`).
    """

    omega0: float = 1.0
    q0: float = 10.0
    omega_m: float = 1.0
    gamma3: float = 0.0
    gamma5: float = 0.0
    alpha3: float = 0.0
    alpha5: float = 0.0
    f_m: float = 0.0
    phi0: float = 0.0

    def __post_init__(self):
        if not (self.omega0 > 0 and math.isfinite(self.omega0)):
            raise ModelError("omega0 must be positive and finite")
        if not (self.q0 > 0 and math.isfinite(self.q0)):
            raise ModelError("q0 must be positive and finite")
        if not (self.omega_m > 0 and math.isfinite(self.omega_m)):
            raise ModelError("omega_m must be positive and finite")
        _require_finite("OscillatorParams", self.gamma3, self.gamma5,
                        self.alpha3, self.alpha5, self.f_m, self.phi0)

    def gamma3_absolute(self):
        """Damping coefficient in the non-factored (per length^2) form."""
        return (self.omega0 / self.q0) * self.gamma3

    def gamma5_absolute(self):
        return (self.omega0 / self.q0) * self.gamma5


@dataclass(frozen=True)
class SweepControl:
    """Dimensionless sweep parameter proportional to laser power."""

    p: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p >= 0):
            raise ModelError("p must be finite and >= 0")


@dataclass(frozen=True)
class PhysicalModelParams:
    """Parameters of the delayed-photothermal-force model (SI units)."""

    mass: float                      # kg
    omega0: float                    # rad/s
    q0: float
    tau: float                       # photothermal delay, s
    f_rad: float                     # constant radiation-pressure force, N
    photothermal_amplitude: float    # peak steady-state photothermal force, N
    fringe: InterferometerParams
    working_point: float             # cavity-length offset within the fringe, m
    fringe_phase: float = 0.0        # force fringe phase relative to intensity

    def __post_init__(self):
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ModelError("mass must be positive")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ModelError("tau must be positive")
        if not (self.omega0 > 0 and self.q0 > 0):
            raise ModelError("omega0 and q0 must be positive")
        _require_finite("PhysicalModelParams", self.f_rad,
                        self.photothermal_amplitude, self.working_point,
                        self.fringe_phase)


@dataclass(frozen=True)
class State:
    """Instantaneous oscillator state; f_ph only in the physical model."""

    x: float
    v: float
    f_ph: Optional[float] = None
    t: float = 0.0

    def as_array(self):
        if self.f_ph is None:
            return np.array([self.x, self.v])
        return np.array([self.x, self.v, self.f_ph])


@dataclass(frozen=True)
class PolynomialRHS:
    """Derivative function for the polynomial equation of motion.

    Effective coefficients are resolved at construction from the mode;
    evaluation is pure and reentrant.
    """

    params: OscillatorParams
    control: SweepControl
    mode: str
    # resolved coefficients
    g3: float = field(init=False)
    g5: float = field(init=False)
    a3: float = field(init=False)
    a5: float = field(init=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ModelError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        p = self.params
        object.__setattr__(self, "g3", p.gamma3)
        object.__setattr__(self, "g5", 0.0 if self.mode == "vdp" else p.gamma5)
        use_alpha = self.mode == "general"
        object.__setattr__(self, "a3", p.alpha3 if use_alpha else 0.0)
        object.__setattr__(self, "a5", p.alpha5 if use_alpha else 0.0)

    @property
    def ndim(self):
        return 2

    @property
    def omega_fast(self):
        return max(self.params.omega0, self.params.omega_m)

    def damping_bracket(self, x, p=None):
        """(1 - p + g3 x^2 + g5 x^4); multiplies (omega0/Q0) * v."""
        if p is None:
            p = self.control.p
        x2 = x * x
        return 1.0 - p + (self.g3 + self.g5 * x2) * x2

    def __call__(self, t, y):
        x, v = float(y[0]), float(y[1])
        if not (math.isfinite(x) and math.isfinite(v)):
            raise EvaluationError(f"non-finite state (x={x}, v={v}) at t={t}")
        pp = self.params
        x2 = x * x
        dv = (-(pp.omega0 / pp.q0) * self.damping_bracket(x) * v
              - (pp.omega_m ** 2 + (self.a3 + self.a5 * x2) * x2) * x)
        if pp.f_m != 0.0:
            dv += 2.0 * pp.f_m * math.cos(pp.omega0 * t + pp.phi0)
        return np.array([v, dv])


@dataclass(frozen=True)
class PhysicalRHS:
    """Derivative function for the (x, v, f_ph) physical model."""

    params: PhysicalModelParams

    @property
    def ndim(self):
        return 3

    @property
    def omega_fast(self):
        return self.params.omega0

    def steady_force(self, x):
        """F_ss(x): photothermal force once the delay has relaxed.

        Raised-sine fringe of unit peak (period lambda/2), so
        ``photothermal_amplitude`` carries all force units.
        """
        pp = self.params
        k = 4.0 * math.pi / pp.fringe.wavelength
        arg = k * (pp.working_point + x) + pp.fringe_phase
        return pp.photothermal_amplitude * 0.5 * (1.0 + math.cos(arg))

    def __call__(self, t, y):
        x, v, f_ph = float(y[0]), float(y[1]), float(y[2])
        if not (math.isfinite(x) and math.isfinite(v) and math.isfinite(f_ph)):
            raise EvaluationError(f"non-finite state at t={t}")
        pp = self.params
        dv = (-(pp.omega0 / pp.q0) * v - pp.omega0 ** 2 * x
              + (pp.f_rad + f_ph) / pp.mass)
        df = (self.steady_force(x) - f_ph) / pp.tau
        return np.array([v, dv, df])


def build_polynomial_rhs(params, control, mode="quintic"):
    """Construct the polynomial-mode derivative function.

    mode:
      "vdp"     -- van der Pol damping (gamma5 ignored)
      "quintic" -- damping bracket up to x^4
      "general" -- quintic damping plus cubic/quintic stiffness terms
    """
    if not isinstance(params, OscillatorParams):
        raise ModelError("params must be an OscillatorParams")
    if not isinstance(control, SweepControl):
        raise ModelError("control must be a SweepControl")
    return PolynomialRHS(params=params, control=control, mode=mode)


def build_physical_rhs(params):
    """Construct the physical-model derivative function over (x, v, f_ph)."""
    if not isinstance(params, PhysicalModelParams):
        raise ModelError("params must be a PhysicalModelParams")
    return PhysicalRHS(params=params)
