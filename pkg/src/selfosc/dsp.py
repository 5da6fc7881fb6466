"""Deterministic signal chain: mixing, low-pass filtering, amplitude
spectra, dBV and displacement calibration, and envelope extraction.

Mirrors an interferometric AFM detection chain: the photodiode signal is
multiplied with a reference tone, low-passed to keep the difference
band, Fourier transformed, and calibrated from volts to nanometers.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import sliding_window_max
from .integrate import TimeTrace

# light detecting unit sensitivity: 415 nm per 13 V peak-to-peak
SENSITIVITY_NM_PER_VPP = 415.0 / 13.0


class SignalChainError(ValueError):
    pass


class UnitError(ValueError):
    pass


@dataclass(frozen=True)
class Spectrum:
    """Single-sided amplitude spectrum: bin k sits at f0_bin + k*df."""

    f0_bin: float
    df: float
    amplitudes: np.ndarray
    unit: str = "arb"

    def __post_init__(self):
        object.__setattr__(self, "amplitudes",
                           np.asarray(self.amplitudes, dtype=float))
        if not self.df > 0:
            raise ValueError("df must be positive")
        if np.any(self.amplitudes < 0):
            raise ValueError("amplitudes must be >= 0")

    def frequencies(self):
        return self.f0_bin + self.df * np.arange(self.amplitudes.size)

    def peak_frequency(self):
        return self.f0_bin + self.df * int(np.argmax(self.amplitudes))


@dataclass(frozen=True)
class CalibrationConstants:
    sensitivity_nm_per_vpp: float = SENSITIVITY_NM_PER_VPP
    amplification: float = 1.0

    def __post_init__(self):
        if not (self.sensitivity_nm_per_vpp > 0 and self.amplification > 0):
            raise ValueError("calibration constants must be positive")


def design_lowpass(cutoff, sample_rate, numtaps=None):
    """Blackman-windowed-sinc FIR taps, unity DC gain, linear phase.

    The default tap count puts the transition band at roughly the cutoff
    width, with the ~74 dB Blackman stopband beyond.
    """
    nyquist = sample_rate / 2.0
    if not 0 < cutoff < nyquist:
        raise SignalChainError(
            f"cutoff {cutoff:g} Hz outside (0, {nyquist:g}) Hz")
    if numtaps is None:
        numtaps = int(math.ceil(5.5 * sample_rate / cutoff))
    numtaps = max(int(numtaps), 5)
    if numtaps % 2 == 0:
        numtaps += 1
    n = np.arange(numtaps) - (numtaps - 1) / 2.0
    fc = cutoff / sample_rate
    h = 2.0 * fc * np.sinc(2.0 * fc * n)
    h *= np.blackman(numtaps)
    return h / h.sum()


def mix_and_lowpass(trace, ref_freq, cutoff, numtaps=None):
    """Multiply by cos(2 pi ref_freq t) and low-pass the product.

    Keeps the difference band and suppresses the sum band (>= 40 dB for
    the default filter).  ref_freq = 0 reduces to plain low-pass
    filtering of the input.
    """
    fs = trace.sample_rate
    if not 0 <= ref_freq < fs / 2.0:
        raise SignalChainError(f"ref_freq {ref_freq:g} Hz outside [0, Nyquist)")
    h = design_lowpass(cutoff, fs, numtaps=numtaps)
    if ref_freq > 0:
        mixed = trace.samples * np.cos(2.0 * math.pi * ref_freq * trace.times())
    else:
        mixed = trace.samples
    out = np.convolve(mixed, h, mode="same")
    return TimeTrace(t0=trace.t0, dt=trace.dt, samples=out,
                     metadata=f"{trace.metadata} | mixed {ref_freq:g} Hz, "
                              f"lowpass {cutoff:g} Hz")


def amplitude_spectrum(trace, unit="arb", window="rect"):
    """Single-sided amplitude spectrum with tone-amplitude normalization.

    A pure tone A*cos(2 pi f t) centered on a bin yields bin amplitude A;
    the DC bin carries the mean value.  window: "rect" (default) or
    "hann" (amplitude-corrected for the coherent gain).
    """
    x = trace.samples
    n = x.size
    if n < 2:
        raise SignalChainError("need at least 2 samples")
    if window == "rect":
        spec = np.fft.rfft(x)
    elif window == "hann":
        w = np.hanning(n)
        spec = np.fft.rfft(x * w) * (n / w.sum())
    else:
        raise SignalChainError(f"unknown window {window!r}")
    amps = np.abs(spec) / n
    amps[1:] *= 2.0
    if n % 2 == 0:
        amps[-1] /= 2.0  # Nyquist bin is not doubled
    df = 1.0 / (n * trace.dt)
    return Spectrum(f0_bin=0.0, df=df, amplitudes=amps, unit=unit)


def dbv_to_veff(level_dbv):
    """Effective voltage from a dBV level: V_eff = 10^(L/20)."""
    return 10.0 ** (np.asarray(level_dbv, dtype=float) / 20.0)


def calibrate_to_displacement(spectrum, cal, fringe_slope_sign=-1):
    """Convert a voltage spectrum (V_eff per bin) to displacement in nm.

    amplitude_nm = amplitude_V * 2*sqrt(2) * sensitivity / amplification;
    the 2*sqrt(2) converts V_eff to V_pp.  Spectral amplitudes are
    magnitudes, so the interferometer slope sign only fixes the sign
    convention of the underlying deflection, not the values here.
    """
    if spectrum.unit not in ("V", "volt", "volts"):
        raise UnitError(f"expected a voltage spectrum, got unit {spectrum.unit!r}")
    if fringe_slope_sign not in (-1, 1):
        raise SignalChainError("fringe_slope_sign must be +1 or -1")
    factor = 2.0 * math.sqrt(2.0) * cal.sensitivity_nm_per_vpp / cal.amplification
    return Spectrum(f0_bin=spectrum.f0_bin, df=spectrum.df,
                    amplitudes=spectrum.amplitudes * factor, unit="nm")


def envelope(trace, window):
    """Sliding-window maximum of |x| over a window given in time units.

    The window should cover at least one oscillation period; shorter
    than one sample is rejected.
    """
    if window < trace.dt:
        raise SignalChainError(
            f"window {window:g} shorter than the sample interval {trace.dt:g}")
    width = max(int(round(window / trace.dt)), 1)
    env = sliding_window_max(trace.samples, width)
    return TimeTrace(t0=trace.t0, dt=trace.dt, samples=env,
                     metadata=f"{trace.metadata} | envelope w={window:g}")
