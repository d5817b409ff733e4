"""Analytic heterodyne budget: beat current, total noise, SNR and NEP vs LO power.

SNR is the current ratio ``i_het / i_n`` with ``i_het`` the beat amplitude
2 R sqrt(P_LO P_S); ``snr**2`` is the matching power ratio. Setting the two
currents equal gives the heterodyne NEP.
"""

from dataclasses import dataclass, replace
import math
from typing import NamedTuple, Sequence

import numpy as np

from .constants import CONST, watts_to_dbm
from .detectors import DetectorModel, DomainError, NoiseBreakdown, detector_noise_psd, preset


@dataclass(frozen=True)
class LaserSource:
    nu0: float  # optical frequency [Hz]
    power: float  # [W]
    linewidth_fwhm: float = 1e6  # Lorentzian FWHM [Hz]
    rin_db_hz: float = float("-inf")  # RIN at the analysis frequency [dB/Hz]
    driver_noise: float = 100e-12  # current-driver noise density [A/Hz^0.5]
    lfn_current_psd: float = 0.0  # beat-referred frequency-noise CNPD [A^2/Hz]

    def __post_init__(self):
        if self.nu0 <= 0:
            raise DomainError("nu0 must be > 0")
        if self.power < 0:
            raise DomainError("power must be >= 0")
        if self.linewidth_fwhm < 0:
            raise DomainError("linewidth_fwhm must be >= 0")
        if self.rin_db_hz > -100:
            raise DomainError(f"rin_db_hz must be <= -100 dB/Hz, got {self.rin_db_hz}")
        if self.lfn_current_psd < 0:
            raise DomainError("lfn_current_psd must be >= 0")

    @property
    def wavelength(self):
        return CONST.c / self.nu0

    @property
    def rin_linear(self):
        return 0.0 if math.isinf(self.rin_db_hz) else 10.0 ** (self.rin_db_hz / 10.0)

    def replace(self, **changes):
        return replace(self, **changes)


def qcl(lam=4.6e-6, power=1e-3, **kw) -> LaserSource:
    """A DFB QCL at wavelength ``lam``."""
    return LaserSource(nu0=CONST.c / lam, power=power, **kw)


def reference_lo(detector_name) -> LaserSource:
    """LO used for the tabulated noise currents (MCT: 1 mW, QCD and QWIP: 30 mW).

    The RIN level is an effective residual value chosen so that
    sqrt(S_RIN) matches the tabulated order of magnitude
    (1e-14 A/rtHz for MCT, 1e-15 for the intersubband detectors) under
    S_RIN = RIN (R P_LO)^2. Raw QCL RIN of -150..-180 dB/Hz would give a far
    larger term, so these levels describe what survives balancing.
    """
    det = preset(detector_name)
    if detector_name == "MCT":
        p_lo, sqrt_lfn, sqrt_rin = 1e-3, 1e-13, 1e-14
    else:
        p_lo, sqrt_lfn, sqrt_rin = 30e-3, 1e-15, 1e-15
    rin_db = 10.0 * math.log10(sqrt_rin**2 / (det.R * p_lo) ** 2)
    return LaserSource(nu0=det.nu, power=p_lo, linewidth_fwhm=1e6, rin_db_hz=rin_db,
                       lfn_current_psd=sqrt_lfn**2)


@dataclass(frozen=True)
class BudgetPoint:
    p_lo: float
    p_s: float
    f_rf: float
    delta_f: float
    i_het: float
    i_n: float
    snr: float  # current ratio
    nep_h: float  # [W] in delta_f
    breakdown: NoiseBreakdown

    @property
    def snr_power(self):
        return self.snr**2


class PeakPower(NamedTuple):
    watts: float
    dbm: float


def heterodyne_current(r, p_lo, p_s):
    """Beat-note amplitude 2 R sqrt(P_LO P_S) [A]."""
    for name, v in (("r", r), ("p_lo", p_lo), ("p_s", p_s)):
        if np.any(np.asarray(v) < 0):
            raise DomainError(f"{name} must be >= 0")
    return 2.0 * r * np.sqrt(np.asarray(p_lo, dtype=float) * p_s)


def shot_noise_psd(det: DetectorModel, p_lo):
    if np.any(np.asarray(p_lo) < 0):
        raise DomainError("p_lo must be >= 0")
    return 2.0 * CONST.e * det.g * det.R * np.asarray(p_lo, dtype=float)


def lo_noise_psd(det: DetectorModel, lo: LaserSource, f_rf, p_lo=None) -> NoiseBreakdown:
    """LO-induced CNPD terms. ``p_lo`` overrides ``lo.power``."""
    p = lo.power if p_lo is None else p_lo
    if p == 0:
        return NoiseBreakdown(f_rf=float(f_rf))
    return NoiseBreakdown(
        f_rf=float(f_rf),
        s_shot=float(shot_noise_psd(det, p)),
        s_lfn=lo.lfn_current_psd,
        s_rin=lo.rin_linear * (det.R * p) ** 2,
    )


def noise_breakdown(det, lo, p_lo, f_rf, n_detectors=1) -> NoiseBreakdown:
    """Full breakdown; ``n_detectors=2`` counts the intrinsic noise of both
    detectors of a balanced pair (one shared TIA)."""
    intrinsic = detector_noise_psd(det, f_rf)
    if n_detectors != 1:
        intrinsic = intrinsic.scaled(("s_d_bg", "s_th", "s_1f"), n_detectors)
    return intrinsic + lo_noise_psd(det, lo, f_rf, p_lo)


def total_noise_current(det, lo, p_lo, f_rf, delta_f, n_detectors=1):
    """i_n = sqrt(delta_f * sum_j S_j) [A]."""
    if delta_f <= 0:
        raise DomainError("delta_f must be > 0")
    return math.sqrt(delta_f * noise_breakdown(det, lo, p_lo, f_rf, n_detectors).total)


def heterodyne_nep(det, lo, p_lo, f_rf, delta_f, exact=False, n_detectors=1):
    """Signal power giving SNR = 1 in ``delta_f`` [W].

    Default is the approximate closed form that drops S_LFN and S_RIN;
    ``exact=True`` keeps every term.
    """
    if p_lo <= 0:
        raise DomainError("p_lo must be > 0")
    if delta_f <= 0:
        raise DomainError("delta_f must be > 0")
    b = noise_breakdown(det, lo, p_lo, f_rf, n_detectors)
    if exact:
        return delta_f * b.total / (4.0 * det.R**2 * p_lo)
    return delta_f * (b.s_det / (4.0 * det.R**2 * p_lo) + CONST.e * det.g / (2.0 * det.R))


def nep_shot_limit(det, delta_f=1.0):
    """delta_f e g / (2 R)."""
    if delta_f <= 0:
        raise DomainError("delta_f must be > 0")
    return delta_f * CONST.e * det.g / (2.0 * det.R)


def nep_shot_limit_eta(det, delta_f=1.0):
    """delta_f h nu / (2 eta), the same limit written with the quantum efficiency."""
    return delta_f * CONST.h * det.nu / (2.0 * det.eta)


def nep_ideal(lam, delta_f=1.0):
    """Shot-noise heterodyne NEP of a detector with unit quantum efficiency."""
    return delta_f * CONST.h * CONST.c / lam / 2.0


def crossover_power(det, lo, f_rf, n_detectors=1, rtol=1e-10):
    """LO power where S_shot equals S_det, by bisection in log(P)."""
    s_det = noise_breakdown(det, lo, 0.0, f_rf, n_detectors).s_det
    lo_p, hi_p = 1e-18, 1e3
    f = lambda p: float(shot_noise_psd(det, p)) - s_det
    if f(lo_p) > 0 or f(hi_p) < 0:
        raise DomainError("crossover outside [1e-18, 1e3] W")
    while hi_p / lo_p - 1.0 > rtol:
        mid = math.sqrt(lo_p * hi_p)
        if f(mid) > 0:
            hi_p = mid
        else:
            lo_p = mid
    return math.sqrt(lo_p * hi_p)


def budget_point(det, lo, p_lo, f_rf, delta_f, p_s=0.0, n_detectors=1, exact=True):
    b = noise_breakdown(det, lo, p_lo, f_rf, n_detectors)
    i_n = math.sqrt(delta_f * b.total)
    i_het = float(heterodyne_current(det.R, p_lo, p_s))
    nep = heterodyne_nep(det, lo, p_lo, f_rf, delta_f, exact=exact, n_detectors=n_detectors)
    return BudgetPoint(p_lo=float(p_lo), p_s=float(p_s), f_rf=float(f_rf), delta_f=float(delta_f),
                       i_het=i_het, i_n=i_n, snr=i_het / i_n if i_n > 0 else math.inf,
                       nep_h=nep, breakdown=b)


def sweep_nep_vs_plo(det, lo, f_rf, delta_f, p_lo_grid: Sequence[float], p_s=0.0,
                     n_detectors=1, exact=True):
    grid = np.asarray(p_lo_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("p_lo_grid must be a non-empty 1-D sequence")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise DomainError("p_lo_grid must be positive and strictly increasing")
    return [budget_point(det, lo, p, f_rf, delta_f, p_s, n_detectors, exact) for p in grid]


def theoretical_peak_power(r, z, p_s, p_lo, g_amp) -> PeakPower:
    """I_h = 4 Z R^2 P_S P_LO G_AMP, the heterodyne power on the analyser."""
    for name, v in (("r", r), ("z", z), ("p_s", p_s), ("p_lo", p_lo), ("g_amp", g_amp)):
        if np.any(np.asarray(v) <= 0):
            raise DomainError(f"{name} must be > 0")
    w = 4.0 * z * r**2 * np.asarray(p_s, dtype=float) * p_lo * g_amp
    if w.ndim == 0:
        w = float(w)
        return PeakPower(w, float(watts_to_dbm(w)))
    return PeakPower(w, watts_to_dbm(w))
