"""Detector parameters, intrinsic current-noise PSDs and NEP definitions.

All quantities are SI except the specific detectivity ``D_star``, which is
kept in its conventional cm Hz^0.5 / W and converted where used.

Terminology: CNPD = current noise power density [A^2/Hz].
"""

from dataclasses import asdict, dataclass, field, fields, replace
import math

import numpy as np

from .constants import CONST, T_AMBIENT


class DomainError(ValueError):
    """An argument lies outside the physical domain of a formula."""


def _positive(name, value):
    if not np.all(np.asarray(value) > 0):
        raise DomainError(f"{name} must be > 0, got {value!r}")


def _efficiency(eta):
    if not np.all((np.asarray(eta) > 0) & (np.asarray(eta) <= 1)):
        raise DomainError(f"eta must lie in (0, 1], got {eta!r}")


def photon_energy(lam):
    """h c / lambda [J]."""
    _positive("lambda", lam)
    return CONST.h * CONST.c / np.asarray(lam, dtype=float)


def photons_per_second(power, lam):
    if np.any(np.asarray(power) < 0):
        raise DomainError(f"power must be >= 0, got {power!r}")
    return np.asarray(power, dtype=float) / photon_energy(lam)


def responsivity(eta, g, lam):
    """Photocurrent responsivity R = eta g e lambda / (h c) [A/W]."""
    _efficiency(eta)
    _positive("g", g)
    return eta * g * CONST.e / photon_energy(lam)


def nep_classical(delta_f, nu, eta):
    """Shot-limited direct-detection NEP, delta_f h nu / eta [W]."""
    _positive("delta_f", delta_f)
    _positive("nu", nu)
    _efficiency(eta)
    return delta_f * CONST.h * nu / eta


def nep_spd(dcr, nu, eta):
    """Photon-counting NEP from the dark-count rate, h nu sqrt(2 DCR) / eta [W/Hz^0.5]."""
    if np.any(np.asarray(dcr) < 0):
        raise DomainError(f"dcr must be >= 0, got {dcr!r}")
    _positive("nu", nu)
    _efficiency(eta)
    return CONST.h * nu * np.sqrt(2.0 * np.asarray(dcr, dtype=float)) / eta


def nep_from_dstar(d_star, a_e):
    """NEP = sqrt(A_e) / D* [W/Hz^0.5]; ``d_star`` in cm Hz^0.5/W, ``a_e`` in m^2."""
    _positive("d_star", d_star)
    _positive("a_e", a_e)
    return np.sqrt(np.asarray(a_e, dtype=float) * 1e4) / d_star


@dataclass(frozen=True)
class DetectorModel:
    name: str
    lambda_p: float  # [m]
    T_det: float  # [K]
    eta: float
    g: float
    R: float  # [A/W]
    D_star: float  # [cm Hz^0.5 / W]
    f_c: float  # [Hz]
    A_e: float  # [m^2]
    r_diff: float  # [ohm]
    i_dark_bg: float  # [A]
    r_tia: float | None = None  # [ohm]
    f_1f_corner: float = 100e3  # [Hz]
    s_1f_exponent: float = 1.0
    s_1f_at_corner: float = 0.0  # 1/f CNPD at the corner frequency [A^2/Hz]
    dark_count_rate: float | None = None  # [1/s]
    # datasheet figures kept for cross-checks only
    linear_nep: float | None = None  # [W/Hz^0.5]
    nep_h_sn: float | None = None  # [W/Hz^0.5]
    r_tolerance: float = 0.05  # accepted |R - R(eta, g, lambda)| / R
    notes: str = ""

    def __post_init__(self):
        _efficiency(self.eta)
        for name in ("g", "R", "D_star", "f_c", "A_e", "r_diff", "i_dark_bg", "T_det",
                     "f_1f_corner"):
            _positive(name, getattr(self, name))
        if not 1e-6 < self.lambda_p < 20e-6:
            raise DomainError(f"lambda_p must lie in (1 um, 20 um), got {self.lambda_p}")
        if self.r_tia is not None:
            _positive("r_tia", self.r_tia)
        if self.s_1f_at_corner < 0:
            raise DomainError("s_1f_at_corner must be >= 0")

    @property
    def nu(self):
        return CONST.c / self.lambda_p

    @property
    def r_from_physics(self):
        return float(responsivity(self.eta, self.g, self.lambda_p))

    def responsivity_mismatch(self):
        """Relative deviation of the stored R from eta g e lambda / (h c)."""
        return abs(self.R - self.r_from_physics) / self.R

    def check_consistency(self):
        return self.responsivity_mismatch() <= self.r_tolerance

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise KeyError(f"unknown detector keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class NoiseBreakdown:
    """Per-term CNPD [A^2/Hz] at one RF frequency.

    ``s_d_bg, s_th, s_1f, s_tia`` are the detector-intrinsic group, the rest
    are induced by the local oscillator.
    """

    f_rf: float
    s_d_bg: float = 0.0
    s_th: float = 0.0
    s_1f: float = 0.0
    s_tia: float = 0.0
    s_shot: float = 0.0
    s_lfn: float = 0.0
    s_rin: float = 0.0
    total: float = field(init=False)

    TERMS = ("s_d_bg", "s_th", "s_1f", "s_tia", "s_shot", "s_lfn", "s_rin")
    DETECTOR_TERMS = ("s_d_bg", "s_th", "s_1f", "s_tia")
    LO_TERMS = ("s_shot", "s_lfn", "s_rin")

    def __post_init__(self):
        for name in self.TERMS:
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")
        object.__setattr__(self, "total", math.fsum(getattr(self, t) for t in self.TERMS))

    @property
    def s_det(self):
        return math.fsum(getattr(self, t) for t in self.DETECTOR_TERMS)

    @property
    def s_lo(self):
        return math.fsum(getattr(self, t) for t in self.LO_TERMS)

    def __add__(self, other):
        if not isinstance(other, NoiseBreakdown):
            return NotImplemented
        if other.f_rf != self.f_rf:
            raise ValueError("cannot add breakdowns at different RF frequencies")
        return NoiseBreakdown(self.f_rf, **{t: getattr(self, t) + getattr(other, t)
                                            for t in self.TERMS})

    def scaled(self, terms, factor):
        """Copy with the named terms multiplied by ``factor``."""
        vals = {t: getattr(self, t) * (factor if t in terms else 1.0) for t in self.TERMS}
        return NoiseBreakdown(self.f_rf, **vals)

    def as_dict(self):
        d = {t: getattr(self, t) for t in self.TERMS}
        d["f_rf"] = self.f_rf
        d["total"] = self.total
        return d


def detector_noise_psd(det: DetectorModel, f_rf, t_amb=T_AMBIENT) -> NoiseBreakdown:
    """Detector-intrinsic CNPD terms at ``f_rf``; LO-induced terms are zero.

    The TIA Johnson noise is evaluated at ``t_amb`` because the amplifier sits
    at room temperature whatever the detector temperature.
    """
    if f_rf <= 0:
        raise DomainError(f"f_rf must be > 0, got {f_rf}")
    e, k = CONST.e, CONST.k_b
    s_tia = 4.0 * k * t_amb / det.r_tia if det.r_tia is not None else 0.0
    s_1f = det.s_1f_at_corner * (det.f_1f_corner / f_rf) ** det.s_1f_exponent
    return NoiseBreakdown(
        f_rf=float(f_rf),
        s_d_bg=2.0 * e * det.g * det.i_dark_bg,
        s_th=4.0 * k * det.T_det / det.r_diff,
        s_1f=s_1f,
        s_tia=s_tia,
    )


# Datasheet rows. r_diff and i_dark_bg are not datasheet values; they invert
# S_d+bg = 2 e g i and S_th = 4 k T / r against the quoted noise currents at
# 100 MHz (MCT: 8.5e-13 and 3.5e-12 A/rtHz; QCD: 1.5e-14 and 4.2e-13 A/rtHz).
# The QWIP has no quoted noise currents: its linear NEP times R (5e-12 A/rtHz)
# is split evenly between the dark and Johnson terms.
_E = CONST.e
_K = CONST.k_b


def _invert_dark(sqrt_s, g):
    return sqrt_s**2 / (2.0 * _E * g)


def _invert_johnson(sqrt_s, T):
    return 4.0 * _K * T / sqrt_s**2


_QWIP_HALF = (4.0e-11 * 0.125) / math.sqrt(2.0)

_PRESETS = {
    "MCT": dict(
        name="MCT", lambda_p=4.70e-6, T_det=200.0, eta=0.344, g=1.0, R=1.3,
        D_star=2.0e10, f_c=0.5e9, A_e=1.0e-6,
        r_diff=_invert_johnson(3.5e-12, 200.0),
        i_dark_bg=_invert_dark(8.5e-13, 1.0),
        r_tia=1e4,
        # sqrt(S_1/f) ~ 1e-18 A/rtHz at 100 MHz
        s_1f_at_corner=(1.0e-18) ** 2 * (100e6 / 100e3),
        linear_nep=5.0e-12, nep_h_sn=6.2e-20, r_tolerance=0.03,
        notes="PVI-2TE-5 class photovoltaic HgCdTe; AC TIA 10 kOhm",
    ),
    "QWIP": dict(
        name="QWIP", lambda_p=4.95e-6, T_det=295.0, eta=0.042, g=0.75, R=0.125,
        D_star=7.0e7, f_c=26e9, A_e=9.0e-4 * 1e-6,
        r_diff=_invert_johnson(_QWIP_HALF, 295.0),
        i_dark_bg=_invert_dark(_QWIP_HALF, 0.75),
        s_1f_at_corner=(1.0e-19) ** 2 * (100e6 / 100e3),
        linear_nep=4.0e-11, nep_h_sn=9.6e-19, r_tolerance=0.01,
        notes="45-degree facet QWIP; noise defaults split from linear NEP x R",
    ),
    "QCD": dict(
        name="QCD", lambda_p=4.65e-6, T_det=295.0, eta=0.024, g=0.01, R=1.8e-3,
        D_star=1.5e9, f_c=20e9, A_e=2.5e-3 * 1e-6,
        r_diff=_invert_johnson(4.2e-13, 295.0),
        i_dark_bg=_invert_dark(1.5e-14, 0.01),
        s_1f_at_corner=(1.0e-19) ** 2 * (100e6 / 100e3),
        linear_nep=3.0e-10, nep_h_sn=5.1e-19,
        # tabulated R is twice eta g e lambda / (h c)
        r_tolerance=1.05,
        notes="ridge-waveguide QCD; tabulated R is 2x the eta-g-lambda value",
    ),
}

PRESET_NAMES = tuple(_PRESETS)


def preset(name) -> DetectorModel:
    try:
        return DetectorModel(**_PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown detector preset {name!r}; known: {', '.join(PRESET_NAMES)}") from None


def all_presets():
    return {n: preset(n) for n in PRESET_NAMES}
