"""Spectrum-analyser emulation: Welch PSD at a requested RBW, dBm readout, peak search.

Photocurrent records come in two flavours. A real record is the current
itself. A complex record is the band-pass equivalent of a real current
around ``f_center``: i(t) = sqrt(2) Re[z(t) exp(2j pi f_center t)], so that
mean |z|^2 equals the band power of i(t) and the two-sided PSD of z at
offset d equals the one-sided PSD of i(t) at ``f_center + d``.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import signal

from .constants import watts_to_dbm

WINDOW = "hann"


class RBWError(ValueError):
    """Requested resolution bandwidth is finer than the record allows."""

    def __init__(self, rbw_target, min_rbw):
        self.rbw_target = rbw_target
        self.min_rbw = min_rbw
        super().__init__(f"RBW {rbw_target:g} Hz unachievable; minimum for this record "
                         f"is {min_rbw:.6g} Hz")


class PeakError(ValueError):
    pass


@dataclass(frozen=True)
class TimeSeries:
    fs: float
    samples: np.ndarray
    t0: float = 0.0
    f_center: float | None = None  # set for complex band-pass records

    def __post_init__(self):
        x = np.asarray(self.samples)
        object.__setattr__(self, "samples", x)
        if self.fs <= 0:
            raise ValueError("fs must be > 0")
        if x.ndim != 1 or x.size < 2:
            raise ValueError("samples must be 1-D with at least 2 values")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        if np.iscomplexobj(x) and self.f_center is None:
            object.__setattr__(self, "f_center", 0.0)

    @property
    def is_complex(self):
        return np.iscomplexobj(self.samples)

    @property
    def duration(self):
        return self.samples.size / self.fs

    def power(self):
        """Mean-square current (variance for real records) [A^2]."""
        if self.is_complex:
            return float(np.mean(np.abs(self.samples) ** 2))
        return float(np.var(self.samples))

    def times(self):
        return self.t0 + np.arange(self.samples.size) / self.fs


def window_enbw(n):
    """Equivalent noise bandwidth of the analysis window, in bins."""
    w = signal.get_window(WINDOW, n)
    return n * np.sum(w**2) / np.sum(w) ** 2


ENBW_BINS = 1.5  # periodic Hann


def min_rbw(fs, n):
    return ENBW_BINS * fs / n


@dataclass(frozen=True)
class SpectrumResult:
    freqs: np.ndarray  # [Hz]
    psd: np.ndarray  # current PSD [A^2/Hz]
    rbw: float  # [Hz]
    z_load: float = 50.0  # [ohm]
    g_amp: float = 1.0  # power gain after detection
    n_avg: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def df(self):
        return float(self.freqs[1] - self.freqs[0])

    @property
    def bin_power(self):
        """Power per RBW bin delivered to the load [W]."""
        return self.psd * self.rbw * self.z_load * self.g_amp

    @property
    def power_dbm(self):
        return watts_to_dbm(self.bin_power)

    def with_floor(self, floor_w_per_hz):
        """Add a flat analyser floor given in W/Hz at the load."""
        extra = floor_w_per_hz / (self.z_load * self.g_amp)
        return SpectrumResult(self.freqs, self.psd + extra, self.rbw, self.z_load, self.g_amp,
                              self.n_avg, dict(self.meta))

    def integrated_power(self, f0, half_width):
        """Total power within f0 +- half_width at the load [W]."""
        m = np.abs(self.freqs - f0) <= half_width
        return float(np.sum(self.psd[m]) * self.df * self.z_load * self.g_amp)


def estimate_psd(x: TimeSeries, rbw_target, z_load=50.0, g_amp=1.0, overlap=0.5) -> SpectrumResult:
    """Hann-windowed Welch average with the segment length set by ``rbw_target``.

    The reported RBW is the window ENBW times the bin spacing and never
    exceeds ``rbw_target``.
    """
    n = x.samples.size
    if rbw_target <= 0:
        raise ValueError("rbw_target must be > 0")
    nperseg = int(math.ceil(ENBW_BINS * x.fs / rbw_target * (1 - 1e-12)))
    if nperseg > n:
        raise RBWError(rbw_target, min_rbw(x.fs, n))
    nperseg = max(nperseg, 2)
    noverlap = int(nperseg * overlap)
    if x.is_complex:
        f, p = signal.welch(x.samples, fs=x.fs, window=WINDOW, nperseg=nperseg,
                            noverlap=noverlap, detrend=False, return_onesided=False,
                            scaling="density")
        f = np.fft.fftshift(f) + x.f_center
        p = np.fft.fftshift(p)
    else:
        f, p = signal.welch(x.samples, fs=x.fs, window=WINDOW, nperseg=nperseg,
                            noverlap=noverlap, detrend="constant", scaling="density")
    step = nperseg - noverlap
    n_avg = 1 + (n - nperseg) // step
    rbw = window_enbw(nperseg) * x.fs / nperseg
    return SpectrumResult(freqs=f, psd=np.asarray(p, dtype=float), rbw=rbw, z_load=z_load,
                          g_amp=g_amp, n_avg=n_avg)


@dataclass(frozen=True)
class PeakReading:
    f_peak: float  # [Hz]
    p_peak: float  # [dBm]
    noise_floor: float  # [dBm]
    snr_db: float

    @property
    def excess_snr(self):
        """(peak - floor) / floor; equals 1 when the tone power matches the noise."""
        return 10.0 ** (self.snr_db / 10.0) - 1.0


def find_peak(spec: SpectrumResult, f_center, half_window, exclude_rbw=3.0) -> PeakReading:
    """Largest bin within ``f_center +- half_window``.

    The floor is the mean bin power over the whole spectrum outside
    +- ``exclude_rbw`` RBWs of the peak. Bins above 100x the median (spurs,
    sidebands) are left out; for Welch-averaged noise that cut removes
    nothing, so the mean stays unbiased even with a single segment, where a
    median would read ln 2 (-1.6 dB) low.
    """
    f = spec.freqs
    if f_center + half_window < f[0] or f_center - half_window > f[-1]:
        raise PeakError(f"window {f_center:g} +- {half_window:g} Hz outside spectrum "
                        f"[{f[0]:g}, {f[-1]:g}] Hz")
    m = np.abs(f - f_center) <= half_window
    if not np.any(m):
        raise PeakError("no bins inside the search window")
    idx = np.flatnonzero(m)
    k = idx[np.argmax(spec.psd[idx])]
    away = np.abs(f - f[k]) > exclude_rbw * spec.rbw
    if not np.any(away):
        raise PeakError("no bins left to estimate the noise floor")
    p = spec.bin_power
    peak_dbm = float(watts_to_dbm(p[k]))
    rest = p[away]
    rest = rest[rest <= 100.0 * np.median(rest)]
    floor_dbm = float(watts_to_dbm(np.mean(rest)))
    return PeakReading(f_peak=float(f[k]), p_peak=peak_dbm, noise_floor=floor_dbm,
                       snr_db=peak_dbm - floor_dbm)


def _fwhm(freqs, y):
    k = int(np.argmax(y))
    half = y[k] / 2.0
    i = k
    while i > 0 and y[i] > half:
        i -= 1
    j = k
    while j < y.size - 1 and y[j] > half:
        j += 1
    if y[i] > half or y[j] > half:
        raise PeakError("line does not fall to half maximum inside the span")
    fl = np.interp(half, [y[i], y[i + 1]], [freqs[i], freqs[i + 1]])
    fr = np.interp(half, [y[j], y[j - 1]], [freqs[j], freqs[j - 1]])
    return float(fr - fl)


def measure_fwhm(freqs, psd, floor=0.0, smooth_fraction=0.1):
    """Full width at half maximum of the dominant line, by linear interpolation.

    On a line many bins wide the largest bin is an upward noise excursion,
    which biases the width low. A second pass therefore smooths the PSD with
    a boxcar of ``smooth_fraction`` times the first-pass width (when that is
    at least 3 bins) before locating the maximum.
    """
    freqs = np.asarray(freqs, dtype=float)
    y = np.asarray(psd, dtype=float) - floor
    w = _fwhm(freqs, y)
    m = int(smooth_fraction * w / abs(freqs[1] - freqs[0]))
    if m >= 3:
        y = np.convolve(y, np.ones(m) / m, mode="same")
        w = _fwhm(freqs, y)
    return w
