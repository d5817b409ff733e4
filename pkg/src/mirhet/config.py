"""INI-style run configuration.

Sections: [scenario] [lo] [signal] [path] [aom] [pll] [balanced] [detector]
[amps] [readout] [sweep] [interferogram]. Numbers use Python float syntax,
lists are comma separated and ``none`` clears an optional value. Errors name
the file, line, section and key.
"""

import configparser
from dataclasses import dataclass, fields
import math
import re

import numpy as np

from .budget import LaserSource
from .chain import AmplifierStage, BalancedModule, ConfigError, ScenarioConfig, with_signal_power
from .constants import CONST
from .detectors import DetectorModel, preset
from .optics import AomConfig, OpticalPath
from .pll import PllConfig

NONE = ("none", "")


@dataclass
class RawConfig:
    parser: configparser.ConfigParser
    text: str
    path: str = "<string>"

    def line_of(self, section, key=None):
        sec = None
        for i, line in enumerate(self.text.splitlines(), 1):
            m = re.match(r"\s*\[([^\]]+)\]", line)
            if m:
                sec = m.group(1).strip()
                if key is None and sec == section:
                    return i
                continue
            if sec == section and key is not None:
                m = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
                if m and m.group(1).lower() == key.lower():
                    return i
        return 0

    def error(self, section, key, msg):
        line = self.line_of(section, key)
        where = f"[{section}]" + (f" {key}" if key else "")
        return ConfigError(f"{self.path}:{line}: {where}: {msg}")

    def has(self, section):
        return self.parser.has_section(section)

    def keys(self, section):
        return list(self.parser[section]) if self.has(section) else []

    def get(self, section, key, default=None, kind=float):
        if not self.has(section) or key not in self.parser[section]:
            return default
        raw = self.parser[section][key].strip()
        if raw.lower() in NONE:
            return None
        try:
            if kind is float:
                return float(raw)
            if kind is int:
                try:
                    return int(raw)
                except ValueError:
                    f = float(raw)
                    if not f.is_integer():
                        raise
                    return int(f)
            if kind is bool:
                if raw.lower() in ("1", "true", "yes", "on"):
                    return True
                if raw.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(raw)
            if kind == "floats":
                return [float(v) for v in raw.split(",") if v.strip()]
            if kind == "strs":
                return [v.strip() for v in raw.split(",") if v.strip()]
            return raw
        except ValueError:
            raise self.error(section, key, f"cannot parse {raw!r} as {getattr(kind, '__name__', kind)}") from None

    def check_keys(self, section, allowed):
        for k in self.keys(section):
            if k not in allowed:
                raise self.error(section, k, f"unknown key; allowed: {', '.join(sorted(allowed))}")


def load(path=None, text=None) -> RawConfig:
    if text is None:
        if path is None:
            text = ""
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str  # keys are case-sensitive field names (T_det, D_star, R, ...)
    try:
        cp.read_string(text, source=str(path or "<string>"))
    except configparser.Error as exc:
        raise ConfigError(f"{path or '<string>'}: {exc}") from None
    return RawConfig(cp, text, str(path or "<string>"))


# detectors ----------------------------------------------------------------
_DET_FIELDS = {f.name: f for f in fields(DetectorModel)}


def detector_to_ini(det: DetectorModel, section="detector") -> str:
    """Lossless INI rendering (floats via repr)."""
    lines = [f"[{section}]"]
    for name in _DET_FIELDS:
        v = getattr(det, name)
        lines.append(f"{name} = {'none' if v is None else (repr(v) if isinstance(v, float) else v)}")
    return "\n".join(lines) + "\n"


def detector_from_section(raw: RawConfig, section="detector") -> DetectorModel:
    base = raw.get(section, "preset", None, str)
    allowed = set(_DET_FIELDS) | {"preset"}
    raw.check_keys(section, allowed)
    if base is not None:
        try:
            d = preset(base).to_dict()
        except KeyError as exc:
            raise raw.error(section, "preset", str(exc.args[0])) from None
    else:
        d = {}
    for k in raw.keys(section):
        if k == "preset":
            continue
        if k in ("name", "notes"):
            d[k] = raw.get(section, k, None, str) or ""
        else:
            d[k] = raw.get(section, k)
    try:
        return DetectorModel(**d)
    except TypeError as exc:
        raise raw.error(section, None, f"incomplete detector definition: {exc}") from None
    except ValueError as exc:
        raise raw.error(section, None, str(exc)) from None


def _detector(raw, name_key_section, key):
    """Preset name from ``key``, or the [detector] section if present."""
    name = raw.get(name_key_section, key, None, str)
    if raw.has("detector") and (name is None or name == raw.get("detector", "name", None, str)):
        return detector_from_section(raw)
    try:
        return preset(name or "MCT")
    except KeyError as exc:
        raise raw.error(name_key_section, key, str(exc.args[0])) from None


# lasers -------------------------------------------------------------------
_LASER_KEYS = {"wavelength", "nu0", "power", "linewidth_fwhm", "rin_db_hz", "driver_noise",
               "lfn_current_psd"}


def _laser(raw, section, ref: LaserSource | None = None, default_lam=4.6e-6):
    allowed = set(_LASER_KEYS) | ({"beat_offset", "power_at_splitter"} if section == "signal" else set())
    raw.check_keys(section, allowed)
    kw = {}
    for k in ("power", "linewidth_fwhm", "rin_db_hz", "driver_noise", "lfn_current_psd"):
        v = raw.get(section, k)
        if v is not None:
            kw[k] = v
    nu0 = raw.get(section, "nu0")
    lam = raw.get(section, "wavelength")
    off = raw.get(section, "beat_offset") if section == "signal" else None
    if nu0 is None:
        if off is not None and ref is not None:
            nu0 = ref.nu0 + off
        elif lam is not None:
            nu0 = CONST.c / lam
        elif ref is not None:
            nu0 = ref.nu0 + 100e6
        else:
            nu0 = CONST.c / default_lam
    kw.setdefault("power", 1e-3)
    try:
        return LaserSource(nu0=nu0, **kw)
    except ValueError as exc:
        raise raw.error(section, None, str(exc)) from None


def _build(raw, section, cls, keys, **fixed):
    raw.check_keys(section, set(keys))
    kw = dict(fixed)
    for k in keys:
        v = raw.get(section, k)
        if v is not None or (raw.has(section) and k in raw.parser[section]):
            kw[k] = v
    try:
        return cls(**kw)
    except (ValueError, TypeError) as exc:
        raise raw.error(section, None, str(exc)) from None


def scenario_from_config(raw: RawConfig, seed=None, rbw=None) -> ScenarioConfig:
    raw.check_keys("scenario", {"mode", "fs", "duration", "seed", "max_samples", "mzi_phase",
                                "mzi_coupling", "parasitic_spur_dbm", "parasitic_spur_freq"})
    mode = raw.get("scenario", "mode", "BHD_AOM", str)
    lo = _laser(raw, "lo")
    sig = _laser(raw, "signal", ref=lo) if raw.has("signal") or mode != "BHD_AOM" else None
    path = _build(raw, "path", OpticalPath,
                  ["od_total", "splitter_t", "splitter_loss", "chopper_freq", "chopper_duty"])
    aom = _build(raw, "aom", AomConfig, ["f_shift", "diffraction_efficiency"]) \
        if raw.has("aom") or mode == "BHD_AOM" else None
    pll = _build(raw, "pll", PllConfig, ["f_clock", "loop_bandwidth", "kp", "ki",
                                         "ref_detector_bandwidth", "clock_spur_dbm", "damping",
                                         "settle_time"]) \
        if raw.has("pll") or mode == "BHD_PLL" else None
    raw.check_keys("balanced", {"detector", "detector_b", "cmrr_db", "internal_splitter_imbalance"})
    det_a = _detector(raw, "balanced", "detector")
    name_b = raw.get("balanced", "detector_b", None, str)
    det_b = det_a if name_b is None else _detector(raw, "balanced", "detector_b")
    try:
        module = BalancedModule(det_a, det_b,
                                cmrr_db=raw.get("balanced", "cmrr_db", 40.0),
                                internal_splitter_imbalance=raw.get(
                                    "balanced", "internal_splitter_imbalance", 0.0))
    except ValueError as exc:
        raise raw.error("balanced", None, str(exc)) from None
    raw.check_keys("amps", {"gains_db", "input_noise", "band"})
    if raw.has("amps"):
        gains = raw.get("amps", "gains_db", [], "floats") or []
        noise = raw.get("amps", "input_noise", None, "floats") or [1e-12] * len(gains)
        band = raw.get("amps", "band", None, "floats") or [70e6, 150e6]
        if len(noise) != len(gains):
            raise raw.error("amps", "input_noise", "needs one value per gain")
        if len(band) != 2:
            raise raw.error("amps", "band", "needs two values: f_lo, f_hi")
        try:
            amps = tuple(AmplifierStage(g, n, tuple(band)) for g, n in zip(gains, noise))
        except ValueError as exc:
            raise raw.error("amps", None, str(exc)) from None
    else:
        amps = None
    raw.check_keys("readout", {"rbw", "z_load", "instrument_noise_dbm_per_hz", "f_center",
                               "analyzer_span", "peak_half_window"})
    kw = dict(mode=mode, lo=lo, sig=sig, path=path, aom=aom, pll=pll, balanced=module)
    if amps is not None:
        kw["amps"] = amps
    for sec, k, kind in (("scenario", "fs", float), ("scenario", "duration", float),
                         ("scenario", "seed", int), ("scenario", "max_samples", int),
                         ("scenario", "mzi_phase", float), ("scenario", "mzi_coupling", str),
                         ("scenario", "parasitic_spur_dbm", float),
                         ("scenario", "parasitic_spur_freq", float),
                         ("readout", "rbw", float), ("readout", "z_load", float),
                         ("readout", "instrument_noise_dbm_per_hz", float),
                         ("readout", "f_center", float), ("readout", "analyzer_span", float),
                         ("readout", "peak_half_window", float)):
        if raw.has(sec) and k in raw.parser[sec]:
            kw[k] = raw.get(sec, k, None, kind)
    if seed is not None:
        kw["seed"] = seed
    if rbw is not None:
        kw["rbw"] = rbw
    try:
        sc = ScenarioConfig(**kw)
    except ConfigError as exc:
        raise raw.error("scenario", None, str(exc)) from None
    p_split = raw.get("signal", "power_at_splitter")
    if p_split is not None:
        try:
            sc = with_signal_power(sc, p_split)
        except ConfigError as exc:
            raise raw.error("signal", "power_at_splitter", str(exc)) from None
    return sc


# sweeps -------------------------------------------------------------------
@dataclass
class NepSweepConfig:
    detectors: list
    p_lo_grid: np.ndarray
    f_rf: float
    delta_f: float
    n_detectors: int
    exact: bool
    ideal_wavelength: float | None
    lo: LaserSource


def nep_sweep_from_config(raw: RawConfig) -> NepSweepConfig:
    raw.check_keys("sweep", {"detectors", "p_lo_min", "p_lo_max", "n_points", "p_lo_values",
                             "f_rf", "delta_f", "n_detectors", "exact", "ideal_wavelength"})
    names = raw.get("sweep", "detectors", ["MCT"], "strs")
    dets = []
    for n in names:
        if raw.has("detector") and n == raw.get("detector", "name", None, str):
            dets.append(detector_from_section(raw))
            continue
        try:
            dets.append(preset(n))
        except KeyError as exc:
            raise raw.error("sweep", "detectors", str(exc.args[0])) from None
    vals = raw.get("sweep", "p_lo_values", None, "floats")
    if vals is None:
        n = raw.get("sweep", "n_points", 61, int)
        lo_p, hi_p = raw.get("sweep", "p_lo_min", 1e-9), raw.get("sweep", "p_lo_max", 1.0)
        if n is None or n < 1:
            raise raw.error("sweep", "n_points", "grid is empty")
        if not 0 < lo_p <= hi_p:
            raise raw.error("sweep", "p_lo_min", "need 0 < p_lo_min <= p_lo_max")
        vals = np.logspace(math.log10(lo_p), math.log10(hi_p), n) if n > 1 else np.array([hi_p])
    grid = np.asarray(vals, dtype=float)
    if grid.size == 0:
        raise raw.error("sweep", "p_lo_values", "grid is empty")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise raw.error("sweep", "p_lo_values", "powers must be positive and increasing")
    lo = _laser(raw, "lo") if raw.has("lo") else LaserSource(nu0=CONST.c / 4.6e-6, power=1e-3)
    return NepSweepConfig(
        detectors=dets, p_lo_grid=grid, f_rf=raw.get("sweep", "f_rf", 100e6),
        delta_f=raw.get("sweep", "delta_f", 1.0), n_detectors=raw.get("sweep", "n_detectors", 1, int),
        exact=raw.get("sweep", "exact", False, bool),
        ideal_wavelength=raw.get("sweep", "ideal_wavelength", 4.6e-6), lo=lo)


def p_s_values(raw: RawConfig):
    raw.check_keys("sweep", {"p_s_values", "p_s_min", "p_s_max", "n_points"})
    vals = raw.get("sweep", "p_s_values", None, "floats")
    if vals is None and raw.get("sweep", "p_s_min") is not None:
        n = raw.get("sweep", "n_points", 4, int)
        vals = list(np.logspace(math.log10(raw.get("sweep", "p_s_min")),
                                math.log10(raw.get("sweep", "p_s_max", 1e-12)), n))
    if vals is not None and len(vals) == 0:
        raise raw.error("sweep", "p_s_values", "grid is empty")
    return vals


@dataclass
class InterferogramConfig:
    positions: np.ndarray
    geometry: float | None
    od_ladder: list


def interferogram_from_config(raw: RawConfig, sc: ScenarioConfig) -> InterferogramConfig:
    raw.check_keys("interferogram", {"x_start", "x_stop", "n_positions", "geometry", "od_ladder"})
    lam = sc.lo.wavelength
    x0 = raw.get("interferogram", "x_start", 0.0)
    x1 = raw.get("interferogram", "x_stop", 1.5 * lam)
    n = raw.get("interferogram", "n_positions", 31, int)
    if n is None or n < 0:
        raise raw.error("interferogram", "n_positions", "must be >= 0")
    geo = raw.get("interferogram", "geometry", "double", str)
    if geo not in ("double", "single"):
        raise raw.error("interferogram", "geometry", "must be 'double' or 'single'")
    gf = (4.0 if geo == "double" else 2.0) * math.pi / lam
    ods = raw.get("interferogram", "od_ladder", None, "floats")
    return InterferogramConfig(np.linspace(x0, x1, n), gf, ods or [sc.path.od_total])
