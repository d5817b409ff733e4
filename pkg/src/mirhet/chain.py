"""Time-domain simulation of the four detection configurations.

Laser fields -> attenuation/chopper (and optional MZI) -> mixing splitter ->
one or two photodiodes -> difference current -> amplifier cascade ->
spectrum analyser.

The photocurrent is kept as its complex band-pass equivalent around the
analyser centre frequency (see :mod:`mirhet.spectral`), so a beat at
~100 MHz costs nothing to represent: only frame offsets from the analyser
centre must fit inside +-fs/2. DC photocurrent terms sit outside the RF band
and are dropped.

Record lengths for ~1 Hz RBW are handled in two ways:

* BHD_AOM: the self-heterodyne beat is free of laser phase noise (the
  common phase cancels sample by sample), so the fields are synthesised
  directly at the analyser span.
* BHD_PLL: fields and loop run at ``fs`` in chunks; the deterministic beat
  is boxcar-averaged by M/8 and FIR-decimated by 8 to the span, and the white
  detection noise is drawn directly at the span rate.
"""

from dataclasses import dataclass, field, replace
import math
import time
import warnings

import numpy as np
from scipy import signal

from .budget import LaserSource, qcl
from .constants import CONST, db_to_lin, dbm_to_watts
from .detectors import DetectorModel, detector_noise_psd, preset
from .optics import (AliasingError, AomConfig, Field, LaserStream, OpticalPath, apply_aom,
                     apply_mzi, as_generator, attenuate_and_chop)
from .pll import LockReport, PllConfig, PllState, reference_beat, run_pll
from .spectral import (ENBW_BINS, PeakError, PeakReading, RBWError, SpectrumResult, TimeSeries,
                       estimate_psd, find_peak)

MODES = ("SHD_FREE", "BHD_FREE", "BHD_AOM", "BHD_PLL")
CHUNK = 1 << 21  # samples per chunk of a long record


class ConfigError(ValueError):
    pass


def point_seed(seed, index):
    """Independent 64-bit seed for sweep point ``index`` of a run seeded with ``seed``."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class BalancedModule:
    det_a: DetectorModel
    det_b: DetectorModel | None = None  # None -> same as det_a
    cmrr_db: float = 40.0
    # responsivity deficit of channel b (internal splitter + diode mismatch)
    internal_splitter_imbalance: float = 0.0

    def __post_init__(self):
        if self.det_b is None:
            object.__setattr__(self, "det_b", self.det_a)
        if not self.cmrr_db >= 0:
            raise ConfigError("cmrr_db must be >= 0")
        if not 0 <= self.internal_splitter_imbalance < 1:
            raise ConfigError("internal_splitter_imbalance must lie in [0, 1)")
        if abs(self.det_a.lambda_p - self.det_b.lambda_p) > 0.15 * self.det_a.lambda_p:
            raise ConfigError("det_a and det_b must share a wavelength band")

    @property
    def subtraction_gain(self):
        """Weight of channel b in i_a - g i_b; 1 - 10^(-CMRR/20)."""
        return 1.0 - 10.0 ** (-self.cmrr_db / 20.0)

    @property
    def r_a(self):
        return self.det_a.R

    @property
    def r_b(self):
        return self.det_b.R * (1.0 - self.internal_splitter_imbalance)


@dataclass(frozen=True)
class AmplifierStage:
    gain_db: float
    input_noise_current: float = 0.0  # referred to the stage input [A/Hz^0.5]
    band: tuple = (70e6, 150e6)  # [Hz]

    def __post_init__(self):
        if not math.isfinite(self.gain_db):
            raise ConfigError("gain_db must be finite")
        if self.input_noise_current < 0:
            raise ConfigError("input_noise_current must be >= 0")
        lo, hi = self.band
        if not lo < hi:
            raise ConfigError("amplifier band needs f_lo < f_hi")

    @property
    def gain(self):
        return float(db_to_lin(self.gain_db))

    def covers(self, f):
        return self.band[0] <= f <= self.band[1]


def default_amps():
    """ZFL-500LN + ZX60-P103LN style cascade, 70-150 MHz."""
    return (AmplifierStage(24.6, 1e-12), AmplifierStage(20.0, 1e-12))


@dataclass(frozen=True)
class ScenarioConfig:
    mode: str
    lo: LaserSource = field(default_factory=qcl)
    sig: LaserSource | None = None  # AOM mode: optional, sets the power entering the AOM
    path: OpticalPath = field(default_factory=OpticalPath)
    aom: AomConfig | None = None
    pll: PllConfig | None = None
    balanced: BalancedModule | DetectorModel | None = None
    amps: tuple = field(default_factory=default_amps)
    fs: float = 500e6  # [Hz]
    duration: float = 2e-3  # [s]
    seed: int = 0
    z_load: float = 50.0  # [ohm]
    instrument_noise_dbm_per_hz: float | None = -115.0
    rbw: float = 300e3  # [Hz]
    f_center: float | None = None  # analyser centre; default = expected beat
    analyzer_span: float | None = None  # record rate after decimation [Hz]
    peak_half_window: float | None = None  # [Hz]
    mzi_phase: float | None = None  # [rad]
    mzi_coupling: str = "in_phase"
    parasitic_spur_dbm: float | None = None
    parasitic_spur_freq: float | None = None  # default: expected beat
    max_samples: int = 4_000_000_000

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.balanced is None:
            object.__setattr__(self, "balanced", BalancedModule(preset("MCT")))
        elif isinstance(self.balanced, DetectorModel):
            object.__setattr__(self, "balanced", BalancedModule(self.balanced))
        object.__setattr__(self, "amps", tuple(self.amps))
        if self.mode == "BHD_AOM" and self.aom is None:
            raise ConfigError("BHD_AOM mode requires an [aom] section")
        if self.mode == "BHD_PLL" and self.pll is None:
            raise ConfigError("BHD_PLL mode requires a [pll] section")
        if self.mode != "BHD_AOM" and self.sig is None:
            raise ConfigError(f"{self.mode} mode requires a distinct signal laser")
        if self.mode == "BHD_AOM" and self.lo.power <= 0:
            raise ConfigError("BHD_AOM mode derives the signal from the LO; lo.power must be > 0")
        for name in ("fs", "duration", "rbw", "z_load"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.mzi_coupling not in ("in_phase", "field"):
            raise ConfigError("mzi_coupling must be 'in_phase' or 'field'")
        lam = self.balanced.det_a.lambda_p
        if abs(self.lo.wavelength - lam) > 0.15 * lam:
            raise ConfigError(f"LO wavelength {self.lo.wavelength:.3e} m outside the "
                              f"detector band around {lam:.3e} m")
        fs_sim, m1, m2 = self.sampling()
        n = self.duration * fs_sim
        if n > self.max_samples:
            raise ConfigError(f"duration * fs = {n:.3g} samples exceeds max_samples = "
                              f"{self.max_samples:.3g}")
        off = self.expected_beat() - self.center
        if abs(off) >= fs_sim / (2 * m1 * m2) and self.mode != "BHD_AOM":
            raise ConfigError(f"beat offset {off:g} Hz from the analyser centre is outside "
                              f"the simulated band +-{fs_sim / (2 * m1 * m2):g} Hz")

    # derived quantities ---------------------------------------------------
    def expected_beat(self):
        if self.mode == "BHD_AOM":
            return self.aom.f_shift
        if self.mode == "BHD_PLL":
            return self.pll.f_clock
        return abs(self.sig.nu0 - self.lo.nu0)

    @property
    def center(self):
        return self.expected_beat() if self.f_center is None else self.f_center

    @property
    def single_detector(self):
        return self.mode == "SHD_FREE"

    def span(self):
        if self.analyzer_span is not None:
            return min(self.analyzer_span, self.fs)
        if self.mode in ("BHD_AOM", "BHD_PLL"):
            return min(self.fs, 2000.0 * self.rbw)
        return self.fs

    def sampling(self):
        """(simulation rate, boxcar factor, FIR factor)."""
        span = self.span()
        if self.mode == "BHD_AOM":
            return span, 1, 1
        ratio = self.fs / span
        if ratio < 16:
            return self.fs, 1, 1
        m = 8 * int(ratio // 8)
        return self.fs, m // 8, 8

    def signal_source_power(self):
        """Signal power before the OD filters [W]."""
        if self.mode == "BHD_AOM":
            p_in = self.sig.power if self.sig is not None else self.lo.power
            return p_in * self.aom.diffraction_efficiency
        return self.sig.power

    def signal_power(self):
        """Signal power at the mixing splitter while the chopper is open [W]."""
        return self.signal_source_power() * self.path.attenuation

    def replace(self, **changes):
        return replace(self, **changes)


def with_signal_power(sc: ScenarioConfig, p_s) -> ScenarioConfig:
    """Copy of ``sc`` whose OD filters put ``p_s`` on the splitter (0 blocks the beam)."""
    p0 = sc.signal_source_power()
    if p_s < 0:
        raise ConfigError("p_s must be >= 0")
    if p_s > p0 * (1 + 1e-12):
        raise ConfigError(f"p_s = {p_s:g} W exceeds the available {p0:g} W")
    od = math.inf if p_s == 0 else max(0.0, math.log10(p0 / p_s))
    return replace(sc, path=replace(sc.path, od_total=od))


# detection ---------------------------------------------------------------
def _white(rng, n, psd, fs):
    """Complex white noise whose two-sided PSD is ``psd`` at sample rate ``fs``."""
    if psd <= 0:
        return np.zeros(n, dtype=complex)
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt(psd * fs / 2.0)


def beat_current(e_lo: Field, e_sig: Field, module: BalancedModule, path: OpticalPath, f_center,
                 single=False):
    """Noise-free band-pass current of the beat term (difference current, or port 3 alone)."""
    if len(e_lo) != len(e_sig):
        raise ValueError("e_lo and e_sig lengths differ")
    if e_lo.fs != e_sig.fs:
        raise ValueError("e_lo and e_sig sample rates differ")
    d = e_sig.carrier - e_lo.carrier
    if d >= 0:
        w = np.conj(e_lo.samples) * e_sig.samples
        rot, off = 1j, d - f_center
    else:
        w = e_lo.samples * np.conj(e_sig.samples)
        rot, off = -1j, -d - f_center
    if abs(off) >= e_lo.fs / 2:
        raise AliasingError(f"beat at {abs(d):g} Hz is {off:g} Hz from the analyser centre, "
                            f"outside +-{e_lo.fs / 2:g} Hz")
    if off != 0.0:
        w = w * np.exp(2j * np.pi * off * e_lo.times())
    k = math.sqrt(2.0 * path.splitter_t * max(path.splitter_reflection, 0.0)) * rot
    if single:
        return k * module.r_a * w
    return k * (module.r_a + module.subtraction_gain * module.r_b) * w


def detection_noise(n, fs, module: BalancedModule, path: OpticalPath, p_lo, p_s, f_center, rng,
                    rin_lo=0.0, rin_s=0.0, single=False):
    """Band-pass noise current: RIN, per-port shot + intrinsic noise, one TIA.

    Draw order is fixed (LO RIN, signal RIN, port 3, port 4, TIA) so results
    depend only on the generator state.
    """
    rng = as_generator(rng)
    t, r = path.splitter_t, max(path.splitter_reflection, 0.0)
    rho_lo = _white(rng, n, rin_lo * p_lo**2, fs)
    rho_s = _white(rng, n, rin_s * p_s**2, fs)
    e = CONST.e
    intr_a = detector_noise_psd(module.det_a, f_center)
    intr_b = detector_noise_psd(module.det_b, f_center)
    p3, p4 = t * p_lo + r * p_s, r * p_lo + t * p_s
    s3 = intr_a.s_d_bg + intr_a.s_th + intr_a.s_1f + 2 * e * module.det_a.g * module.r_a * p3
    s4 = intr_b.s_d_bg + intr_b.s_th + intr_b.s_1f + 2 * e * module.det_b.g * module.r_b * p4
    i3 = module.r_a * (t * rho_lo + r * rho_s) + _white(rng, n, s3, fs)
    i4 = module.r_b * (r * rho_lo + t * rho_s) + _white(rng, n, s4, fs)
    tia = _white(rng, n, intr_a.s_tia, fs)
    if single:
        return i3 + tia
    return i3 - module.subtraction_gain * i4 + tia


def balanced_detect(e_lo: Field, e_sig: Field, module: BalancedModule, path=None, f_center=None,
                    seed=None, single=False) -> TimeSeries:
    """Difference photocurrent (port 3 only when ``single``) as a band-pass TimeSeries.

    ``f_center`` defaults to the beat frequency. ``seed=None`` returns the
    noise-free beat; otherwise RIN, shot and detector noise are added with
    levels from the mean port powers.
    """
    path = OpticalPath() if path is None else path
    if len(e_lo) != len(e_sig):
        raise ValueError("e_lo and e_sig lengths differ")
    if f_center is None:
        f_center = abs(e_sig.carrier - e_lo.carrier)
        if f_center == 0:
            raise ValueError("f_center is required when the fields share a carrier")
    z = beat_current(e_lo, e_sig, module, path, f_center, single)
    if seed is not None:
        z = z + detection_noise(z.size, e_lo.fs, module, path, e_lo.power(), e_sig.power(),
                                f_center, seed, e_lo.rin, e_sig.rin, single)
    return TimeSeries(e_lo.fs, z, t0=e_lo.t0, f_center=f_center)


# amplifiers --------------------------------------------------------------
def band_warnings(amps, f):
    return [f"beat at {f / 1e6:.3f} MHz outside amplifier {k} band "
            f"[{a.band[0] / 1e6:g}, {a.band[1] / 1e6:g}] MHz"
            for k, a in enumerate(amps) if not a.covers(f)]


def amplify(x: TimeSeries, amps, seed=None, f_beat=None) -> TimeSeries:
    """Cascade: each stage adds its input-referred white noise, then applies its gain.

    Response is flat; a beat outside a stage band only raises a warning.
    """
    amps = tuple(amps)
    if not amps:
        return x
    if f_beat is None and x.f_center:
        f_beat = x.f_center
    if f_beat is not None:
        for msg in band_warnings(amps, f_beat):
            warnings.warn(msg, stacklevel=2)
    rng = as_generator(seed)
    y = x.samples
    for a in amps:
        if a.input_noise_current > 0:
            s = a.input_noise_current**2
            if x.is_complex:
                y = y + _white(rng, y.size, s, x.fs)
            else:
                y = y + rng.standard_normal(y.size) * math.sqrt(s * x.fs / 2.0)
        y = y * math.sqrt(a.gain)
    return TimeSeries(x.fs, y, t0=x.t0, f_center=x.f_center)


def total_gain(amps):
    return math.prod(a.gain for a in amps)


# full scenario -----------------------------------------------------------
@dataclass
class SimulationResult:
    mode: str
    seed: int
    spectrum: SpectrumResult
    peak: PeakReading
    f_expected: float
    p_lo: float  # at the splitter [W]
    p_s: float  # at the splitter, chopper open [W]
    g_amp: float
    sideband: PeakReading | None = None
    lock: LockReport | None = None
    warnings: list = field(default_factory=list)
    wall_time: float = 0.0
    record: TimeSeries | None = None

    def report(self):
        d = dict(mode=self.mode, seed=self.seed, f_expected_hz=self.f_expected,
                 p_lo_w=self.p_lo, p_s_w=self.p_s, g_amp=self.g_amp, rbw_hz=self.spectrum.rbw,
                 n_avg=self.spectrum.n_avg, peak_freq_hz=self.peak.f_peak,
                 peak_dbm=self.peak.p_peak, noise_floor_dbm=self.peak.noise_floor,
                 snr_db=self.peak.snr_db, lock=None if self.lock is None else self.lock.as_dict(),
                 sideband=None, warnings=list(self.warnings), wall_time_s=self.wall_time)
        if self.sideband is not None:
            d["sideband"] = dict(freq_hz=self.sideband.f_peak, peak_dbm=self.sideband.p_peak,
                                 snr_db=self.sideband.snr_db)
        return d


def _tone(n, fs, t0, offset, dbm, z_load, rng):
    a = math.sqrt(float(dbm_to_watts(dbm)) / z_load)
    ph = rng.uniform(0, 2 * np.pi)
    t = t0 + np.arange(n) / fs
    return a * np.exp(1j * (2 * np.pi * offset * t + ph))


def simulate(sc: ScenarioConfig, keep_record=False) -> SimulationResult:
    """Run one scenario end to end; deterministic for a given ``sc.seed``."""
    t_start = time.perf_counter()
    s_lo, s_sig, s_det, s_amp, s_spur = np.random.SeedSequence(int(sc.seed)).spawn(5)
    rng_lo, rng_sig = np.random.default_rng(s_lo), np.random.default_rng(s_sig)
    f_exp, f_c = sc.expected_beat(), sc.center
    fs_sim, m1, m2 = sc.sampling()
    fs_an = fs_sim / (m1 * m2)
    n_out = int(round(sc.duration * fs_an))
    n_sim = n_out * m1 * m2
    if sc.rbw < ENBW_BINS / sc.duration:
        raise RBWError(sc.rbw, ENBW_BINS / sc.duration)
    if n_out < 2:
        raise ConfigError("duration too short for the analyser span")
    module, path = sc.balanced, sc.path
    aom_mode = sc.mode == "BHD_AOM"

    lo_stream = LaserStream(sc.lo, fs_sim, rng_lo)
    sig_stream = None if aom_mode else LaserStream(sc.sig, fs_sim, rng_sig,
                                                   carrier=sc.sig.nu0 - sc.lo.nu0)
    p_in = sc.signal_source_power() / (sc.aom.diffraction_efficiency if aom_mode else 1.0)
    state = PllState() if sc.mode == "BHD_PLL" else None
    lock = None
    pieces, e_lo_pow, e_s_pow = [], 0.0, 0.0
    chunk = m1 * max(1, CHUNK // m1)
    for start in range(0, n_sim, chunk):
        n = min(chunk, n_sim - start)
        e_lo = lo_stream.next(n)
        if aom_mode:
            e_s = apply_aom(e_lo.scaled(p_in / sc.lo.power), sc.aom)
        else:
            e_s = sig_stream.next(n)
        if state is not None:
            e_lo, lock, state = run_pll(reference_beat(e_lo, e_s, sc.pll.f_clock), sc.pll, e_lo,
                                        state)
        if sc.mzi_phase is not None:
            e_s = apply_mzi(e_s, sc.mzi_phase, sc.mzi_coupling)
        e_s = attenuate_and_chop(e_s, path)
        e_lo_pow += float(np.sum(np.abs(e_lo.samples) ** 2))
        e_s_pow += float(np.sum(np.abs(e_s.samples) ** 2))
        z = beat_current(e_lo, e_s, module, path, f_c, sc.single_detector)
        if m1 > 1:
            z = z.reshape(-1, m1).mean(axis=1)
        pieces.append(z)
    z = np.concatenate(pieces)
    if m2 > 1:
        z = signal.resample_poly(z, 1, m2)[:n_out]
    p_lo_mean, p_s_mean = e_lo_pow / n_sim, e_s_pow / n_sim

    rng_det = np.random.default_rng(s_det)
    z = z + detection_noise(z.size, fs_an, module, path, p_lo_mean, p_s_mean, f_c, rng_det,
                            sc.lo.rin_linear, 0.0 if sc.sig is None else sc.sig.rin_linear,
                            sc.single_detector)
    ts = TimeSeries(fs_an, z, f_center=f_c)
    warn = band_warnings(sc.amps, f_exp)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ts = amplify(ts, sc.amps, np.random.default_rng(s_amp), f_exp)
    g = total_gain(sc.amps)

    rng_spur = np.random.default_rng(s_spur)
    spurs = []
    if sc.mode == "BHD_PLL" and sc.pll.clock_spur_dbm is not None:
        spurs.append((sc.pll.f_clock, sc.pll.clock_spur_dbm))
    if sc.parasitic_spur_dbm is not None:
        spurs.append((sc.parasitic_spur_freq or f_exp, sc.parasitic_spur_dbm))
    y = ts.samples
    for f_sp, dbm in spurs:
        off = f_sp - f_c
        if abs(off) >= fs_an / 2:
            warn.append(f"spur at {f_sp:g} Hz outside the analyser span; dropped")
            continue
        y = y + _tone(y.size, fs_an, 0.0, off, dbm, sc.z_load, rng_spur)
    ts = TimeSeries(fs_an, y, f_center=f_c)

    out = estimate_psd(ts, sc.rbw, z_load=sc.z_load)
    spec = SpectrumResult(out.freqs, out.psd / g, out.rbw, sc.z_load, g, out.n_avg,
                          dict(mode=sc.mode, seed=sc.seed))
    if sc.instrument_noise_dbm_per_hz is not None:
        spec = spec.with_floor(float(dbm_to_watts(sc.instrument_noise_dbm_per_hz)))

    half = sc.peak_half_window
    if half is None:
        half = 5.0 * spec.rbw
        if sc.mode in ("SHD_FREE", "BHD_FREE"):
            half = max(half, 3.0 * (sc.lo.linewidth_fwhm + sc.sig.linewidth_fwhm))
        half = min(half, fs_an / 2)
    peak = find_peak(spec, f_exp, half)
    side = None
    if path.chopper_freq is not None and abs(f_exp + path.chopper_freq - f_c) < fs_an / 2:
        try:
            side = find_peak(spec, f_exp + path.chopper_freq, 2.0 * spec.rbw)
        except PeakError as exc:
            warn.append(f"chopper sideband not measured: {exc}")
    if lock is not None and not lock.locked:
        warn.append(f"PLL out of lock: residual phase {lock.residual_rms:.2f} rad rms")
    return SimulationResult(mode=sc.mode, seed=int(sc.seed), spectrum=spec, peak=peak,
                            f_expected=f_exp, p_lo=p_lo_mean, p_s=sc.signal_power(), g_amp=g,
                            sideband=side, lock=lock, warnings=warn,
                            wall_time=time.perf_counter() - t_start,
                            record=ts if keep_record else None)


# threshold search --------------------------------------------------------
@dataclass
class ThresholdResult:
    p_threshold: float  # [W]
    powers: list
    excess_snr: list
    mode: str


def mean_excess_snr(sc: ScenarioConfig, p_s, n_seeds=3, index=0):
    vals = []
    for k in range(n_seeds):
        s = replace(with_signal_power(sc, p_s), seed=point_seed(sc.seed, index * 1000 + k))
        vals.append(simulate(s).peak.excess_snr)
    return float(np.mean(vals))


def min_detectable_power(sc: ScenarioConfig, p_guess, n_seeds=3, iters=6) -> ThresholdResult:
    """Signal power at which the mean excess peak SNR, (peak - floor)/floor, equals 1.

    Brackets by decades from ``p_guess``, bisects in log(P), then
    interpolates log(excess) linearly between the final bracket.
    """
    powers, vals = [], []

    def ev(p):
        v = mean_excess_snr(sc, p, n_seeds, len(powers))
        powers.append(p)
        vals.append(v)
        return v

    lo = hi = p_guess
    v = ev(p_guess)
    v_lo = v_hi = v
    for _ in range(12):
        if v_lo < 1:
            break
        lo /= 10
        v_lo = ev(lo)
    for _ in range(12):
        if v_hi >= 1:
            break
        hi *= 10
        v_hi = ev(hi)
    if v_lo >= 1 or v_hi < 1:
        raise RuntimeError("could not bracket the SNR = 1 point")
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        v = ev(mid)
        if v >= 1:
            hi, v_hi = mid, v
        else:
            lo, v_lo = mid, v
    y0, y1 = math.log(max(v_lo, 1e-6)), math.log(v_hi)
    x0, x1 = math.log(lo), math.log(hi)
    x = x0 + (0.0 - y0) * (x1 - x0) / (y1 - y0) if y1 != y0 else 0.5 * (x0 + x1)
    return ThresholdResult(math.exp(x), powers, vals, sc.mode)
