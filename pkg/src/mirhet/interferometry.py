"""Heterodyne interferometry: a Mach-Zehnder signal arm scanned by a piezo mirror.

Two copies of the signal field, dephased by dphi, beat against the LO. The
beat amplitude then follows (1 + cos dphi) and the beat power
(1 + cos dphi)^2, which is what :func:`fit_fringe` fits.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
import math

import numpy as np
from scipy import optimize

from .chain import ScenarioConfig, point_seed, simulate
from .constants import watts_to_dbm


class FitError(RuntimeError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


def interferogram_model(delta_phi, r, z, p_s, p_lo, g_amp, time_average=True):
    """Beat power on the analyser vs MZI phase [W].

    Peak form: 4 R^2 Z P_S P_LO G (1 + cos dphi)^2. With ``time_average``
    (default) the cos^2 of the carrier is averaged to 1/2, which is what an
    RMS-calibrated analyser and :func:`mirhet.chain.simulate` report.
    """
    k = 4.0 * r**2 * z * p_s * p_lo * g_amp * (0.5 if time_average else 1.0)
    return k * (1.0 + np.cos(delta_phi)) ** 2


def field_intensity(t, delta_phi, e_s, e_lo, w_s, w_lo):
    """|E_LO e^{i w_LO t} + E_s e^{i w_s t} (1 + e^{i dphi})|^2, evaluated directly."""
    t = np.asarray(t, dtype=float)
    f = e_lo * np.exp(1j * w_lo * t) + e_s * np.exp(1j * w_s * t) * (1.0 + np.exp(1j * delta_phi))
    return np.abs(f) ** 2


def field_cross_term(t, delta_phi, e_s, e_lo, w_s, w_lo):
    """Beat part of :func:`field_intensity`: total minus the two self terms."""
    self_terms = abs(e_lo) ** 2 + abs(e_s) ** 2 * abs(1.0 + np.exp(1j * delta_phi)) ** 2
    return field_intensity(t, delta_phi, e_s, e_lo, w_s, w_lo) - self_terms


def cross_term_quadratures(t, delta_phi, e_s, e_lo, w_s, w_lo):
    """(in-phase, quadrature) amplitudes of the beat over whole beat periods.

    Projects the cross term on cos(dw t) and sin(dw t). For real fields the
    exact values are 2 E_s E_LO (1 + cos dphi) and -2 E_s E_LO sin dphi.
    """
    dw = w_s - w_lo
    x = field_cross_term(t, delta_phi, e_s, e_lo, w_s, w_lo)
    c, s = np.cos(dw * t), np.sin(dw * t)
    return 2.0 * np.mean(x * c), 2.0 * np.mean(x * s)


def geometry_factor(lam, double_pass=True):
    """dphi per metre of piezo travel; 4 pi / lambda for a reflecting mirror."""
    return (4.0 if double_pass else 2.0) * math.pi / lam


@dataclass(frozen=True)
class InterferogramScan:
    positions: np.ndarray  # [m]
    delta_phi: np.ndarray  # [rad]
    powers: np.ndarray  # beat power at the analyser [W]
    p_s_nominal: float  # [W]
    lam: float  # [m]
    geometry_factor: float  # [rad/m]
    noise_floor: np.ndarray | None = None  # [W] per bin

    def __post_init__(self):
        x = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "delta_phi", np.asarray(self.delta_phi, dtype=float))
        object.__setattr__(self, "powers", np.asarray(self.powers, dtype=float))
        if x.size > 1:
            d = np.diff(x)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ValueError("positions must be strictly monotone")
        if np.any(self.powers < 0):
            raise ValueError("powers must be >= 0")
        if not np.allclose(self.delta_phi, self.geometry_factor * x, rtol=1e-12, atol=1e-12):
            raise ValueError("delta_phi inconsistent with positions and geometry_factor")

    def __len__(self):
        return self.positions.size

    @property
    def powers_dbm(self):
        return watts_to_dbm(self.powers)


def scan(sc: ScenarioConfig, positions, geometry=None, threads=1) -> InterferogramScan:
    """One simulated reading per piezo position with dphi = geometry * x.

    The reading is the analyser bin at the expected beat frequency (a
    zero-span reading), so positions near a fringe minimum report the noise
    floor rather than the largest noise bin nearby. Each position gets its
    own seed derived from ``(sc.seed, index)``.
    """
    if sc.mode not in ("BHD_AOM", "BHD_PLL"):
        raise ValueError("interferogram scans need a stabilised mode (BHD_AOM or BHD_PLL)")
    x = np.asarray(positions, dtype=float)
    lam = sc.lo.wavelength
    gf = geometry_factor(lam) if geometry is None else float(geometry)
    phi = gf * x
    p_s = sc.signal_power()
    if x.size == 0:
        return InterferogramScan(x, phi, np.empty(0), p_s, lam, gf, np.empty(0))

    def one(i):
        r = simulate(replace(sc, mzi_phase=float(phi[i]), seed=point_seed(sc.seed, i)))
        spec = r.spectrum
        k = int(np.argmin(np.abs(spec.freqs - r.f_expected)))
        floor = 10.0 ** (r.peak.noise_floor / 10.0) * 1e-3
        return spec.bin_power[k], floor

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(one, range(x.size)))
    else:
        out = [one(i) for i in range(x.size)]
    powers = np.array([o[0] for o in out])
    floors = np.array([o[1] for o in out])
    return InterferogramScan(x, phi, powers, p_s, lam, gf, floors)


@dataclass(frozen=True)
class FringeFit:
    amplitude: float  # A in A (1 + cos(2 pi x / T + phi0))^2 / 4 [W]
    period: float  # [m]
    phase_offset: float  # [rad]
    baseline: float  # [W]
    r_squared: float
    extinction_db: float
    stderr: tuple = ()  # 1-sigma of (amplitude, period, phase_offset, baseline)
    nfev: int = 0

    def as_dict(self):
        d = dict(amplitude_w=self.amplitude, period_m=self.period,
                 phase_offset_rad=self.phase_offset, baseline_w=self.baseline,
                 r_squared=self.r_squared, extinction_db=self.extinction_db, nfev=self.nfev)
        if self.stderr:
            names = ("amplitude_w", "period_m", "phase_offset_rad", "baseline_w")
            d["covariance_diagonal"] = {n: s**2 for n, s in zip(names, self.stderr)}
        return d


def fringe(x, amplitude, period, phase, baseline):
    return amplitude * (1.0 + np.cos(2.0 * np.pi * x / period + phase)) ** 2 / 4.0 + baseline


def _seed_period(x, y):
    """Period of the dominant non-DC FFT bin, on a uniform resampling of the data."""
    n = x.size
    xu = np.linspace(x[0], x[-1], n)
    yu = np.interp(xu, x, y) if x[0] < x[-1] else np.interp(xu[::-1], x[::-1], y[::-1])[::-1]
    spec = np.abs(np.fft.rfft((yu - yu.mean()) * np.hanning(n), n=8 * n))
    f = np.fft.rfftfreq(8 * n, d=abs(xu[1] - xu[0]))
    k = 1 + int(np.argmax(spec[1:]))
    return 1.0 / f[k]


def _quadrature_phase(x, y, period):
    arg = 2.0 * np.pi * x / period
    yc = y - y.mean()
    c, s = np.dot(yc, np.cos(arg)), np.dot(yc, np.sin(arg))
    return math.atan2(-s, c)


def fit_fringe(data, y=None, period_guess=None, n_phase_starts=8) -> FringeFit:
    """Least-squares fit of A (1 + cos(2 pi x / T + phi0))^2 / 4 + baseline.

    ``data`` is an :class:`InterferogramScan` or the positions array (then
    pass ``y``). Start values: period from the dominant FFT bin (or
    ``period_guess``), phase from a quadrature projection, amplitude and
    baseline from the data range. If that start fails, 8 phase starts are
    tried; when all fail a :class:`FitError` carries the diagnostics.
    """
    if isinstance(data, InterferogramScan):
        x, yy = data.positions, data.powers
        if period_guess is None and data.geometry_factor > 0:
            period_guess = 2.0 * np.pi / data.geometry_factor
    else:
        x, yy = np.asarray(data, dtype=float), np.asarray(y, dtype=float)
    if x.size < 8:
        raise ValueError("need at least 8 positions")
    if x.shape != yy.shape:
        raise ValueError("positions and powers differ in shape")
    scale = float(np.max(np.abs(yy)))
    if scale == 0:
        raise FitError("all powers are zero")
    yn = yy / scale
    t0 = _seed_period(x, yn)
    span = abs(x[-1] - x[0])
    if period_guess is not None and not 0.5 < t0 / period_guess < 2.0:
        t0 = period_guess
    if span < t0 * (1 - 1e-9):
        raise ValueError(f"positions span {span:g} m, less than one period ({t0:g} m)")

    ss_tot = float(np.sum((yn - yn.mean()) ** 2))

    def resid(p):
        return fringe(x, *p) - yn

    lo_b = [0.0, 0.25 * t0, -np.inf, 0.0]
    hi_b = [np.inf, 4.0 * t0, np.inf, np.inf]
    a0, b0 = float(yn.max() - yn.min()), max(float(yn.min()), 0.0)
    phi0 = _quadrature_phase(x, yn, t0)
    starts = [phi0] + [phi0 + 2.0 * np.pi * k / n_phase_starts for k in range(1, n_phase_starts)]
    best, tried = None, []
    for ph in starts:
        try:
            sol = optimize.least_squares(resid, [a0, t0, ph, b0], bounds=(lo_b, hi_b),
                                         x_scale=[1.0, t0, 1.0, 1.0], ftol=1e-15, xtol=1e-15,
                                         gtol=1e-15, max_nfev=2000)
        except (ValueError, np.linalg.LinAlgError) as exc:
            tried.append((ph, str(exc)))
            continue
        r2 = 1.0 - 2.0 * sol.cost / ss_tot if ss_tot > 0 else 1.0
        tried.append((ph, r2))
        if sol.success and (best is None or sol.cost < best[0].cost):
            best = (sol, r2)
        if best is not None and best[1] > 0.9:
            break
    if best is None:
        raise FitError("fringe fit did not converge from any start",
                       dict(starts=tried, period_seed=t0))
    sol, r2 = best
    a, period, ph, b = sol.x
    ph = float(math.remainder(ph, 2.0 * np.pi))
    curve = fringe(x, a, period, ph, b) * scale
    cmin, cmax = float(curve.min()), float(curve.max())
    ext = math.inf if cmin <= 0 else 10.0 * math.log10(cmax / cmin)
    dof = max(x.size - 4, 1)
    try:
        cov = np.linalg.inv(sol.jac.T @ sol.jac) * (2.0 * sol.cost / dof)
        err = np.sqrt(np.abs(np.diag(cov)))
        err = (err[0] * scale, err[1], err[2], err[3] * scale)
    except np.linalg.LinAlgError:
        err = ()
    return FringeFit(amplitude=float(a * scale), period=float(period), phase_offset=ph,
                     baseline=float(b * scale), r_squared=float(min(max(r2, 0.0), 1.0)),
                     extinction_db=ext, stderr=tuple(float(e) for e in err), nfev=int(sol.nfev))
