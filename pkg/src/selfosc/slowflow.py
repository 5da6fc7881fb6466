"""Averaged amplitude equation for the quintic-damped oscillator.

Averaging x = A cos(theta) over one cycle of

    x'' + (omega0/Q0)(1 - p + g3 x^2 + g5 x^4) x' + omega_m^2 x = 0

gives the slow flow

    A' = -(omega0 / 2 Q0) * A * [(1 - p) + g3 A^2 / 4 + g5 A^4 / 8]

(cycle averages <sin^2> = 1/2, <cos^2 sin^2> = 1/8, <cos^4 sin^2> = 1/16).
Nonzero limit-cycle amplitudes are the positive roots of the bracket,
a quadratic in A^2; their stability follows from the sign of the slow
flow's derivative at the root.  The test suite verifies this reduction
against brute-force integration of the full equation.
"""

import math
from dataclasses import dataclass
from typing import Optional

class ClassificationError(ValueError):
    """Coefficient signs incompatible with the requested analysis."""


@dataclass(frozen=True)
class BranchPoint:
    """One limit-cycle (or rest-state) amplitude at a given p."""

    p: float
    amplitude: float
    stable: bool

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")


@dataclass(frozen=True)
class BifurcationSummary:
    kind: str                              # "subcritical" | "supercritical"
    hopf_p: float = 1.0
    fold_p: Optional[float] = None
    fold_amplitude: Optional[float] = None


def bracket(gamma3t, gamma5t, p, amplitude):
    """Averaged damping bracket (1-p) + g3 A^2/4 + g5 A^4/8."""
    u = amplitude * amplitude
    return (1.0 - p) + gamma3t * u / 4.0 + gamma5t * u * u / 8.0


def amplitude_rate(gamma3t, gamma5t, p, amplitude, omega0=1.0, q0=10.0):
    """Slow-flow dA/dt at the given amplitude."""
    return -(omega0 / (2.0 * q0)) * amplitude * bracket(gamma3t, gamma5t, p, amplitude)


def _bracket_slope(gamma3t, gamma5t, amplitude):
    """d(bracket)/dA; positive at a root means the root is stable."""
    return amplitude * (gamma3t + gamma5t * amplitude * amplitude) / 2.0


def steady_amplitudes(gamma3t, gamma5t, p):
    """All steady amplitudes at p, including A = 0, sorted ascending.

    Nonzero amplitudes solve (1-p) + g3 A^2/4 + g5 A^4/8 = 0; with
    g5 = 0 this falls back to the van der Pol quadratic.
    """
    points = [BranchPoint(p=p, amplitude=0.0, stable=p < 1.0)]
    us = []
    if gamma5t == 0.0:
        if gamma3t != 0.0:
            u = -4.0 * (1.0 - p) / gamma3t
            if u > 0.0:
                us.append(u)
    else:
        r = gamma3t / gamma5t
        disc = r * r - 8.0 * (1.0 - p) / gamma5t
        if disc == 0.0:
            us.append(-r)
        elif disc > 0.0:
            sq = math.sqrt(disc)
            us.extend(u for u in (-r - sq, -r + sq) if u > 0.0)
    for u in sorted(u for u in us if u > 0.0):
        a = math.sqrt(u)
        points.append(BranchPoint(p=p, amplitude=a,
                                  stable=_bracket_slope(gamma3t, gamma5t, a) > 0.0))
    return points


def fold_point(gamma3t, gamma5t):
    """Saddle-node of limit cycles: (p_fold, A_fold).

    The bracket's quadratic in A^2 has its double root at A^2 = -g3/g5,
    which happens at p_fold = 1 - g3^2 / (8 g5).  Requires g3 < 0 and
    g5 > 0 (the subcritical case); anything else has no fold.
    """
    if not (gamma3t < 0.0 and gamma5t > 0.0):
        raise ClassificationError(
            f"no fold for (gamma3={gamma3t}, gamma5={gamma5t}); "
            "need gamma3 < 0 and gamma5 > 0")
    p_fold = 1.0 - gamma3t * gamma3t / (8.0 * gamma5t)
    a_fold = math.sqrt(-gamma3t / gamma5t)
    return p_fold, a_fold


def classify(gamma3t, gamma5t):
    """Bifurcation type of the rest state's loss of stability at p = 1."""
    if gamma3t < 0.0 and gamma5t > 0.0:
        p_fold, a_fold = fold_point(gamma3t, gamma5t)
        return BifurcationSummary(kind="subcritical", hopf_p=1.0,
                                  fold_p=p_fold, fold_amplitude=a_fold)
    return BifurcationSummary(kind="supercritical", hopf_p=1.0)


def branch_diagram(gamma3t, gamma5t, p_values):
    """BranchPoints for every p in p_values (flat list, CLI/plot helper)."""
    rows = []
    for p in p_values:
        rows.extend(steady_amplitudes(gamma3t, gamma5t, p))
    return rows
