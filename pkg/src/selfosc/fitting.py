"""Resonance-curve least squares and ring-down fitting.

The lineshape is the driven harmonic oscillator amplitude response

    A(f) = A_floor + (A_max/Q) / sqrt((1 - f^2/f0^2)^2 + (f/(f0 Q))^2)

fitted by Levenberg-Marquardt with an analytic Jacobian.  Four staged
procedures mirror how narrow experimental peaks are handled: a plain
four-parameter fit, a staged refit, and two fixed-peak-amplitude
variants where A_max comes from the time-domain envelope (the second of
which scans f0 on a sub-bin grid to minimize the Q uncertainty).
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

PROCEDURES = ("four_param", "staged_refit", "fixed_amax_auto_f0",
              "fixed_amax_scan_f0")

_PARAM_NAMES = ("a_max", "f0", "q_eff", "a_floor")

MAX_ITERATIONS = 200
REL_TOL = 1e-10
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class FitError(RuntimeError):
    """Fit failed; carries the best-so-far state when available."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class ResonanceFit:
    """Fitted lineshape parameters; fixed parameters carry sd = None."""

    a_max: float
    f0: float
    q_eff: float
    a_floor: float
    sd_a_max: Optional[float]
    sd_f0: Optional[float]
    sd_q_eff: Optional[float]
    sd_a_floor: Optional[float]
    procedure: str
    residual_norm: float
    n_iterations: int = 0

    def __post_init__(self):
        if self.a_max < 0 or self.a_floor < 0:
            raise ValueError("a_max and a_floor must be >= 0")
        if not self.q_eff > 0:
            raise ValueError("q_eff must be positive")


def eval_resonance(a_max, f0, q_eff, a_floor, f):
    """Amplitude response of a damped driven harmonic oscillator."""
    f = np.asarray(f, dtype=float)
    r2 = (f / f0) ** 2
    denom = np.sqrt((1.0 - r2) ** 2 + r2 / q_eff ** 2)
    return a_floor + (a_max / q_eff) / denom


def resonance_jacobian(a_max, f0, q_eff, a_floor, f):
    """Analytic partials of eval_resonance w.r.t. (a_max, f0, q_eff, a_floor)."""
    f = np.asarray(f, dtype=float)
    r2 = (f / f0) ** 2
    d = (1.0 - r2) ** 2 + r2 / q_eff ** 2
    sq = np.sqrt(d)
    j = np.empty((f.size, 4))
    j[:, 0] = 1.0 / (q_eff * sq)
    # dD/df0 = (2 r2/f0) * (2 (1 - r2) - 1/q^2); dA/df0 = -(a_max/2q) D^-3/2 dD/df0
    dd_df0 = (2.0 * r2 / f0) * (2.0 * (1.0 - r2) - 1.0 / q_eff ** 2)
    j[:, 1] = -(a_max / (2.0 * q_eff)) * dd_df0 / (d * sq)
    # dA/dq = -a_max/(q^2 sqrt(D)) + a_max r2 / (q^4 D^(3/2))
    j[:, 2] = -a_max / (q_eff ** 2 * sq) + a_max * r2 / (q_eff ** 4 * d * sq)
    j[:, 3] = 1.0
    return j


def _initial_guess(freqs, amps):
    i_peak = int(np.argmax(amps))
    f0 = freqs[i_peak]
    floor = float(np.median(amps))
    a_max = max(amps[i_peak] - floor, 1e-30)
    df = freqs[1] - freqs[0] if freqs.size > 1 else 1.0
    above = amps >= floor + a_max / math.sqrt(2.0)
    width = max(int(np.count_nonzero(above)), 1) * df
    q = max(f0 / width, 1.0)
    return np.array([a_max, f0, q, max(floor, 0.0)])


def _solve_lm(freqs, amps, theta0, free, max_iter=MAX_ITERATIONS):
    """Damped Gauss-Newton on the masked parameter vector.

    Returns (theta, sd over all 4 params with None at fixed ones,
    residual norm, iterations).  Raises FitError with best-so-far on
    non-convergence.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    free = np.asarray(free, dtype=bool)
    n_free = int(free.sum())

    def ssr_of(th):
        r = amps - eval_resonance(*th, freqs)
        return r, float(r @ r)

    resid, ssr = ssr_of(theta)
    lam = 1e-3
    n_iter = 0
    converged = False
    for n_iter in range(1, max_iter + 1):
        jac = resonance_jacobian(*theta, freqs)[:, free]
        jtj = jac.T @ jac
        jtr = jac.T @ resid
        try:
            step = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj)), jtr)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        trial = theta.copy()
        trial[free] += step
        if trial[1] <= 0 or trial[2] <= 0:
            lam *= 10.0
            continue
        trial_resid, trial_ssr = ssr_of(trial)
        if trial_ssr <= ssr:
            rel = np.max(np.abs(step) / np.maximum(np.abs(trial[free]), 1e-300))
            theta, resid, ssr = trial, trial_resid, trial_ssr
            lam = max(lam * 0.1, 1e-15)
            if rel < REL_TOL:
                converged = True
                break
        else:
            lam *= 10.0
            if lam > 1e12:
                break

    sd = _standard_deviations(freqs, theta, free, ssr)
    if not converged:
        best = _as_fit(theta, sd, "unconverged", math.sqrt(ssr), n_iter)
        raise FitError(f"no convergence after {n_iter} iterations", best=best)
    return theta, sd, math.sqrt(ssr), n_iter


def _standard_deviations(freqs, theta, free, ssr):
    m, k = freqs.size, int(free.sum())
    sd = [None] * 4
    if m <= k or k == 0:
        return sd
    jac = resonance_jacobian(*theta, freqs)[:, free]
    try:
        cov = np.linalg.inv(jac.T @ jac) * (ssr / (m - k))
    except np.linalg.LinAlgError:
        return sd
    diag = np.sqrt(np.maximum(np.diag(cov), 0.0))
    j = 0
    for i in range(4):
        if free[i]:
            sd[i] = float(diag[j])
            j += 1
    return sd


def _as_fit(theta, sd, procedure, residual_norm, n_iter):
    return ResonanceFit(
        a_max=float(max(theta[0], 0.0)), f0=float(theta[1]),
        q_eff=float(theta[2]), a_floor=float(max(theta[3], 0.0)),
        sd_a_max=sd[0], sd_f0=sd[1], sd_q_eff=sd[2], sd_a_floor=sd[3],
        procedure=procedure, residual_norm=residual_norm, n_iterations=n_iter)


def fit_resonance(spectrum, procedure="four_param", time_domain_amax=None,
                  init=None):
    """Fit the resonance formula to a Spectrum with the chosen procedure.

    four_param          -- all four parameters free
    staged_refit        -- fit (f0, q) at fixed a_max, then refit
                           (a_max, q) at the found f0; floor fixed 0
    fixed_amax_auto_f0  -- a_max fixed from the time domain, fit (f0, q)
    fixed_amax_scan_f0  -- a_max fixed, q-only fits on a sub-bin f0 scan
                           picking the f0 that minimizes sd(q)

    time_domain_amax supplies the envelope amplitude for the fixed-a_max
    procedures (required there).
    """
    if procedure not in PROCEDURES:
        raise ValueError(f"unknown procedure {procedure!r}; expected {PROCEDURES}")
    freqs = spectrum.frequencies()
    amps = spectrum.amplitudes.astype(float)
    if freqs.size < 5:
        raise FitError("need at least 5 bins")

    theta0 = _initial_guess(freqs, amps)
    if init:
        for i, name in enumerate(_PARAM_NAMES):
            if name in init:
                theta0[i] = float(init[name])

    if procedure == "four_param":
        if np.count_nonzero(amps > theta0[3]) < 5:
            raise FitError("need at least 5 bins above the noise floor")
        theta, sd, rn, it = _solve_lm(freqs, amps, theta0,
                                      [True, True, True, True])
        return _as_fit(theta, sd, procedure, rn, it)

    # remaining procedures fix the floor at zero (large-amplitude branch)
    theta0[3] = 0.0
    if procedure == "staged_refit":
        if time_domain_amax is not None:
            theta0[0] = float(time_domain_amax)
        theta, _, _, it1 = _solve_lm(freqs, amps, theta0,
                                     [False, True, True, False])
        theta, sd, rn, it2 = _solve_lm(freqs, amps, theta,
                                       [True, False, True, False])
        return _as_fit(theta, sd, procedure, rn, it1 + it2)

    if time_domain_amax is None:
        raise FitError(f"{procedure} requires time_domain_amax")
    theta0[0] = float(time_domain_amax)

    if procedure == "fixed_amax_auto_f0":
        theta, sd, rn, it = _solve_lm(freqs, amps, theta0,
                                      [False, True, True, False])
        return _as_fit(theta, sd, procedure, rn, it)

    # fixed_amax_scan_f0: golden-section search over +-1 bin
    df = spectrum.df

    def q_fit_at(f0):
        th = theta0.copy()
        th[1] = f0
        theta, sd, rn, it = _solve_lm(freqs, amps, th,
                                      [False, False, True, False])
        obj = sd[2] if sd[2] is not None else math.inf
        return obj, (theta, sd, rn, it)

    lo, hi = theta0[1] - df, theta0[1] + df
    a, b = lo + (1 - _GOLDEN) * (hi - lo), lo + _GOLDEN * (hi - lo)
    fa, res_a = q_fit_at(a)
    fb, res_b = q_fit_at(b)
    total_iters = res_a[3] + res_b[3]
    while hi - lo > 1e-6 * df:
        if fa <= fb:
            hi, b, fb, res_b = b, a, fa, res_a
            a = lo + (1 - _GOLDEN) * (hi - lo)
            fa, res_a = q_fit_at(a)
            total_iters += res_a[3]
        else:
            lo, a, fa, res_a = a, b, fb, res_b
            b = lo + _GOLDEN * (hi - lo)
            fb, res_b = q_fit_at(b)
            total_iters += res_b[3]
    theta, sd, rn, _ = res_a if fa <= fb else res_b
    return _as_fit(theta, sd, procedure, rn, total_iters)


def log_envelope_rate(trace):
    """Signed decay rate of ln(envelope) by linear regression.

    Positive = decaying.  Also returns the starting amplitude and the
    worst absolute log residual (a non-exponential envelope shows up as
    a large residual).
    """
    y = trace.samples
    if np.any(y <= 0):
        raise FitError("envelope must be strictly positive over the fit window")
    t = trace.times()
    logs = np.log(y)
    slope, intercept = np.polyfit(t, logs, 1)
    resid = np.max(np.abs(logs - (slope * t + intercept)))
    return -float(slope), float(math.exp(intercept + slope * t[0])), float(resid)


def fit_ringdown(envelope_trace, f0_hint):
    """Exponential-decay fit of an envelope: returns (q, f0, amplitude0).

    q = omega0 / (2 * decay rate) with omega0 = 2 pi f0_hint.  A growing
    envelope raises FitError (negative effective damping, i.e.
    self-oscillation); an unresolved (constant) envelope reports
    q = inf as the divergence flag.
    """
    rate, amplitude0, resid = log_envelope_rate(envelope_trace)
    if resid > 0.7:
        raise FitError("envelope is not an exponential decay "
                       f"(max log residual {resid:.2f})")
    span = rate * envelope_trace.duration
    if span < -1e-6:
        raise FitError(f"growing envelope (net gain {-span:.3g} over the window)")
    if abs(span) < 1e-6:
        return math.inf, f0_hint, amplitude0
    omega0 = 2.0 * math.pi * f0_hint
    return omega0 / (2.0 * rate), f0_hint, amplitude0
