"""Atomic, deterministic file output: CSV, JSON, spectra and the run manifest."""

from dataclasses import asdict, dataclass, field
import csv
import datetime as dt
import io
import json
import math
import os
import tempfile

import numpy as np

from . import __version__


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def atomic_write_text(path, text):
    """Write via a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj):
    return atomic_write_text(path, dumps_json(obj))


def csv_text(header, rows, comment=None):
    buf = io.StringIO()
    if comment is not None:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def write_csv(path, header, rows, comment=None):
    return atomic_write_text(path, csv_text(header, rows, comment))


def write_spectrum(path, spec, meta=None):
    """Spectrum CSV: a ``# {json}`` header line, then freq / PSD / bin power rows."""
    head = dict(rbw_hz=spec.rbw, z_load_ohm=spec.z_load, g_amp=spec.g_amp, n_avg=spec.n_avg,
                psd_reference="detector output (input of the amplifier chain)")
    head.update(meta or {})
    rows = zip(spec.freqs, spec.psd, spec.power_dbm)
    return write_csv(path, ["freq_hz", "psd_a2_per_hz", "power_dbm"], rows,
                     comment=json.dumps(_clean(head), sort_keys=True))


def read_spectrum(path):
    """(header dict, rows array) from :func:`write_spectrum` output."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    meta = json.loads(lines[0][1:])
    return meta, np.loadtxt(lines[2:], delimiter=",", ndmin=2)


def now_iso():
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    config_path: str | None
    seed: int | None
    tool_version: str = __version__
    outputs: list = field(default_factory=list)
    started: str = field(default_factory=now_iso)
    finished: str | None = None
    wall_time_s: float | None = None

    def add(self, path):
        self.outputs.append(os.fspath(path))
        return path

    def finish(self, out_dir, wall_time=None):
        """Write ``manifest.json`` last; every listed output must exist."""
        missing = [p for p in self.outputs if not os.path.exists(p)]
        if missing:
            raise FileNotFoundError(f"outputs missing before manifest: {missing}")
        self.finished = now_iso()
        self.wall_time_s = wall_time
        return write_json(os.path.join(out_dir, "manifest.json"), asdict(self))
