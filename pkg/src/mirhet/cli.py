"""Command-line entry point.

    mirhet presets [--name MCT ...]
    mirhet nep-sweep --config fig1b.ini
    mirhet simulate --config fig3a.ini
    mirhet interferogram --config fig4c.ini
    mirhet validate-table1

Data goes to files under ``--out`` (written atomically, manifest.json last);
stdout only carries a short human-readable summary.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
import os
import sys
import time
from importlib import resources

import numpy as np

from . import __version__
from .budget import crossover_power, nep_ideal, sweep_nep_vs_plo, theoretical_peak_power
from .chain import ConfigError, point_seed, simulate, with_signal_power
from .config import (detector_to_ini, interferogram_from_config, load, nep_sweep_from_config,
                     p_s_values, scenario_from_config)
from .detectors import PRESET_NAMES, DomainError, NoiseBreakdown, preset
from .interferometry import FitError, fit_fringe, scan
from .io import RunManifest, atomic_write_text, write_csv, write_json, write_spectrum
from .spectral import PeakError, RBWError
from .table1 import summary_line, validate_table1

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def cookbook_path(name):
    """Path of a shipped cookbook config (fig1b, figS2, fig3a, fig4c)."""
    return str(resources.files("mirhet") / "configs" / f"{name}.ini")


def _out(args, name):
    return os.path.join(args.out, name)


def _config(args):
    return load(args.config) if args.config else load(text="")


def cmd_presets(args, man):
    names = args.name or list(PRESET_NAMES)
    dets = {}
    for n in names:
        try:
            dets[n] = preset(n)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
    if args.format == "csv":
        keys = list(next(iter(dets.values())).to_dict())
        rows = [[d.to_dict()[k] for k in keys] for d in dets.values()]
        man.add(write_csv(_out(args, "presets.csv"), keys, rows))
    else:
        man.add(write_json(_out(args, "presets.json"), {n: d.to_dict() for n, d in dets.items()}))
    ini = "\n".join(detector_to_ini(d, f"detector.{n}") for n, d in dets.items())
    man.add(atomic_write_text(_out(args, "presets.ini"), ini))
    for n, d in dets.items():
        print(f"{n:5s} lambda={d.lambda_p * 1e6:.2f} um  R={d.R:g} A/W  eta={d.eta:g}  g={d.g:g}")


NEP_COLUMNS = ["curve", "detector", "p_lo_W", "i_n_A_per_rtHz", "nep_W"] + \
    [f"{t}_A2_per_Hz" for t in NoiseBreakdown.TERMS]


def nep_sweep_rows(cfg):
    rows = []
    if cfg.ideal_wavelength is not None:
        ideal = nep_ideal(cfg.ideal_wavelength, cfg.delta_f)
        for p in cfg.p_lo_grid:
            rows.append(["ideal_eta_1", "ideal", p, "", ideal] + [""] * len(NoiseBreakdown.TERMS))
    summary = {}
    for det in cfg.detectors:
        pts = sweep_nep_vs_plo(det, cfg.lo, cfg.f_rf, cfg.delta_f, cfg.p_lo_grid,
                               n_detectors=cfg.n_detectors, exact=cfg.exact)
        for pt in pts:
            b = pt.breakdown
            rows.append(["detector", det.name, pt.p_lo, (b.total) ** 0.5, pt.nep_h]
                        + [getattr(b, t) for t in NoiseBreakdown.TERMS])
        summary[det.name] = dict(
            nep_at_max_p_lo_W=pts[-1].nep_h,
            crossover_p_lo_W=crossover_power(det, cfg.lo, cfg.f_rf, cfg.n_detectors))
    return rows, summary


def cmd_nep_sweep(args, man):
    raw = _config(args)
    cfg = nep_sweep_from_config(raw)
    rows, summary = nep_sweep_rows(cfg)
    meta = dict(f_rf_hz=cfg.f_rf, delta_f_hz=cfg.delta_f, n_detectors=cfg.n_detectors,
                exact=cfg.exact, ideal_wavelength_m=cfg.ideal_wavelength, detectors=summary)
    if cfg.ideal_wavelength is not None:
        meta["ideal_nep_W"] = nep_ideal(cfg.ideal_wavelength, cfg.delta_f)
    man.add(write_csv(_out(args, "nep_sweep.csv"), NEP_COLUMNS, rows))
    man.add(write_json(_out(args, "nep_sweep.json"), meta))
    for n, s in summary.items():
        print(f"{n:5s} NEP at max P_LO = {s['nep_at_max_p_lo_W']:.3e} W  "
              f"crossover P_LO = {s['crossover_p_lo_W']:.3e} W")


def _run_points(sc, powers, threads):
    def one(i):
        s = sc if powers is None else replace(with_signal_power(sc, powers[i]),
                                              seed=point_seed(sc.seed, i))
        return simulate(s)
    n = 1 if powers is None else len(powers)
    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, range(n)))
    return [one(i) for i in range(n)]


def cmd_simulate(args, man):
    raw = _config(args)
    sc = scenario_from_config(raw, seed=args.seed, rbw=args.rbw)
    powers = p_s_values(raw)
    t0 = time.perf_counter()
    results = _run_points(sc, powers, args.threads)
    reports = []
    det = sc.balanced.det_a
    for i, r in enumerate(results):
        tag = "spectrum.csv" if powers is None else f"spectrum_{i:03d}.csv"
        man.add(write_spectrum(_out(args, tag), r.spectrum,
                               dict(mode=r.mode, seed=r.seed, p_s_w=r.p_s, p_lo_w=sc.lo.power)))
        rep = r.report()
        rep.pop("wall_time_s")
        if r.p_s > 0:
            th = theoretical_peak_power(det.R, sc.z_load, r.p_s, sc.lo.power, r.g_amp)
            rep["theory_ih_dbm"] = th.dbm
            rep["theory_rms_dbm"] = th.dbm - 10 * np.log10(2.0)
        reports.append(rep)
    if powers is not None:
        rows = [[rep["p_s_w"], rep["peak_dbm"], rep["noise_floor_dbm"], rep["snr_db"],
                 rep.get("theory_ih_dbm", ""), rep.get("theory_rms_dbm", "")] for rep in reports]
        man.add(write_csv(_out(args, "peak_sweep.csv"),
                          ["p_s_W", "peak_dBm", "noise_floor_dBm", "snr_dB", "theory_Ih_dBm",
                           "theory_rms_dBm"], rows))
    body = reports[0] if powers is None else dict(points=reports)
    body["config"] = dict(mode=sc.mode, seed=sc.seed, rbw_hz=sc.rbw, fs_hz=sc.fs,
                          duration_s=sc.duration, p_lo_w=sc.lo.power, detector=det.name)
    man.add(write_json(_out(args, "report.json"), body))
    man.seed = sc.seed
    for rep in reports:
        print(f"{rep['mode']} P_S={rep['p_s_w']:.3e} W peak={rep['peak_dbm']:.2f} dBm "
              f"floor={rep['noise_floor_dbm']:.2f} dBm SNR={rep['snr_db']:.1f} dB")
    print(f"simulated {len(results)} point(s) in {time.perf_counter() - t0:.2f} s")


def cmd_interferogram(args, man):
    raw = _config(args)
    sc = scenario_from_config(raw, seed=args.seed, rbw=args.rbw)
    icfg = interferogram_from_config(raw, sc)
    rows, fits = [], {}
    for k, od in enumerate(icfg.od_ladder):
        s = replace(sc, path=replace(sc.path, od_total=od), seed=point_seed(sc.seed, 10_000 + k))
        sres = scan(s, icfg.positions, icfg.geometry, threads=args.threads)
        for x, ph, p in zip(sres.positions, sres.delta_phi, sres.powers_dbm):
            rows.append([od, x, ph, p])
        key = f"OD{od:g}"
        try:
            fits[key] = dict(p_s_w=sres.p_s_nominal, **fit_fringe(sres).as_dict())
        except (FitError, ValueError) as exc:
            fits[key] = dict(p_s_w=sres.p_s_nominal, error=str(exc))
    man.add(write_csv(_out(args, "scan.csv"), ["od", "position_m", "phase_rad", "power_dBm"], rows))
    man.add(write_json(_out(args, "fit.json"), dict(
        mode=sc.mode, seed=sc.seed, lambda_m=sc.lo.wavelength, geometry_factor_rad_per_m=icfg.geometry,
        fits=fits)))
    man.seed = sc.seed
    for key, f in fits.items():
        if "error" in f:
            print(f"{key}: fit failed: {f['error']}")
        else:
            print(f"{key}: P_S={f['p_s_w']:.3e} W period={f['period_m'] * 1e6:.3f} um "
                  f"r2={f['r_squared']:.4f} extinction={f['extinction_db']:.1f} dB")


def cmd_validate_table1(args, man):
    checks = validate_table1()
    rows = [c.as_dict() for c in checks]
    if args.format == "csv":
        keys = list(rows[0])
        man.add(write_csv(_out(args, "table1.csv"), keys, [[r[k] for k in keys] for r in rows]))
    else:
        man.add(write_json(_out(args, "table1.json"), dict(checks=rows)))
    for c in checks:
        print(summary_line(c))
    bad = [c for c in checks if c.status == "fail"]
    print(f"{len(checks) - len(bad)}/{len(checks)} checks pass or are documented expected failures")
    return EXIT_NUMERIC if bad else EXIT_OK


COMMANDS = {
    "presets": cmd_presets,
    "nep-sweep": cmd_nep_sweep,
    "simulate": cmd_simulate,
    "interferogram": cmd_interferogram,
    "validate-table1": cmd_validate_table1,
}


def _common(suppress):
    """Shared flags; the sub-command copy only overrides values it actually sees."""
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--config", metavar="PATH", default=d(None))
    c.add_argument("--out", metavar="DIR", default=d("out"))
    c.add_argument("--seed", type=int, default=d(None))
    c.add_argument("--rbw", type=float, metavar="HZ", default=d(None),
                   help="override the readout RBW")
    c.add_argument("--threads", type=int, default=d(1))
    c.add_argument("--format", choices=("csv", "json"), default=d("json"))
    return c


def build_parser():
    p = argparse.ArgumentParser(prog="mirhet", description=__doc__.splitlines()[0],
                                parents=[_common(False)])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[_common(True)])
        if name == "presets":
            sp.add_argument("--name", action="append", help="restrict to these presets")
    return p


def main(argv=None):
    p = build_parser()
    args = p.parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    man = RunManifest(command=args.command, config_path=args.config, seed=args.seed)
    t0 = time.perf_counter()
    try:
        os.makedirs(args.out, exist_ok=True)
        code = COMMANDS[args.command](args, man) or EXIT_OK
        man.finish(args.out, time.perf_counter() - t0)
        return code
    except RBWError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DomainError, PeakError, FitError, FloatingPointError, ArithmeticError, RuntimeError,
            ValueError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
