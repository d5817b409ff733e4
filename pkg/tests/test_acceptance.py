"""Acceptance criteria 1-10, one PASS/FAIL line each (see the summary at the end of the run).

Tolerances are the contract values. Two literal checks are known to be red
and are left failing on purpose: the analyser reads RMS power (3.01 dB under
the peak-amplitude formula), and the single-term beat expression drops a
quadrature component of the field expansion.
"""

import math
import os
import time
from dataclasses import replace

import numpy as np
import pytest

from mirhet.budget import (crossover_power, heterodyne_nep, nep_shot_limit, noise_breakdown,
                           qcl, shot_noise_psd, reference_lo, sweep_nep_vs_plo,
                           theoretical_peak_power)
from mirhet.chain import (AmplifierStage, ScenarioConfig, min_detectable_power, simulate,
                          with_signal_power)
from mirhet.cli import cookbook_path, main
from mirhet.config import load, nep_sweep_from_config, scenario_from_config
from mirhet.detectors import detector_noise_psd, photons_per_second, preset, responsivity
from mirhet.interferometry import (cross_term_quadratures, field_cross_term, fit_fringe, scan)
from mirhet.optics import AomConfig, OpticalPath
from mirhet.pll import PllConfig
from mirhet.spectral import ENBW_BINS, TimeSeries, estimate_psd, find_peak, measure_fwhm
from mirhet.table1 import validate_table1

OPERATING_P_LO = {"MCT": 1e-3, "QWIP": 10e-3, "QCD": 20e-3}
NOISELESS_AMPS = (AmplifierStage(24.6, 0.0), AmplifierStage(20.0, 0.0))


def rel(a, b):
    return abs(a / b - 1.0)


def fig3a():
    return scenario_from_config(load(cookbook_path("fig3a")))


# 1 -----------------------------------------------------------------------
def test_c1_table1(verdict):
    t0 = time.perf_counter()
    mct, qwip, qcd = preset("MCT"), preset("QWIP"), preset("QCD")
    r_mct = responsivity(mct.eta, mct.g, mct.lambda_p)
    r_qwip = responsivity(qwip.eta, qwip.g, qwip.lambda_p)
    n_mct = nep_shot_limit(mct)
    f_qcd = 5.1e-19 / nep_shot_limit(qcd)
    f_qwip = 9.6e-19 / nep_shot_limit(qwip)
    checks = validate_table1()
    flagged = {(c.detector, c.check) for c in checks if c.status == "expected-fail"}
    report_ok = ("QCD", "linear_nep") in flagged and ("QWIP", "nep_h_sn_eg") in flagged \
        and not any(c.status == "fail" for c in checks)
    dt = time.perf_counter() - t0
    ok = (rel(r_mct, 1.3) <= 0.03 and rel(r_qwip, 0.125) <= 0.01 and rel(n_mct, 6.2e-20) <= 0.05
          and 0.5 <= f_qcd <= 2 and 0.5 <= f_qwip <= 2 and report_ok and dt < 1.0)
    verdict("C1 detector datasheet table reproduction", ok,
            f"R_MCT={r_mct:.4f} ({rel(r_mct, 1.3):.1%}, tol 3%), R_QWIP={r_qwip:.4f} "
            f"({rel(r_qwip, 0.125):.2%}, tol 1%), NEP_h-SN MCT={n_mct:.3e} "
            f"({rel(n_mct, 6.2e-20):.1%}, tol 5%), table/eg-form QCD x{f_qcd:.2f} QWIP x{f_qwip:.3f} "
            f"(tol x2), discrepancy report ok={report_ok}, {dt * 1e3:.0f} ms")


# 2 -----------------------------------------------------------------------
def test_c2_noise_current_table(verdict):
    t0 = time.perf_counter()
    s_mct = math.sqrt(shot_noise_psd(preset("MCT"), 1e-3))
    s_qcd = math.sqrt(shot_noise_psd(preset("QCD"), 30e-3))
    bm, bq = detector_noise_psd(preset("MCT"), 100e6), detector_noise_psd(preset("QCD"), 100e6)
    pairs = [(math.sqrt(bm.s_th), 3.5e-12), (math.sqrt(bm.s_d_bg), 8.5e-13),
             (math.sqrt(bq.s_th), 4.2e-13), (math.sqrt(bq.s_d_bg), 1.5e-14)]
    worst = max(rel(a, b) for a, b in pairs)
    dt = time.perf_counter() - t0
    ok = rel(s_mct, 2.1e-11) <= 0.10 and rel(s_qcd, 4.4e-13) <= 0.10 and worst <= 0.25 and dt < 1
    verdict("C2 noise-current table", ok,
            f"sqrt S_shot MCT={s_mct:.3e} ({rel(s_mct, 2.1e-11):.1%}), QCD={s_qcd:.3e} "
            f"({rel(s_qcd, 4.4e-13):.1%}) tol 10%; worst S_th/S_d+bg deviation {worst:.1%} tol 25%")


# 3 -----------------------------------------------------------------------
def test_c3_quantum_limit(verdict):
    nep = heterodyne_nep(preset("MCT"), reference_lo("MCT"), 10.0, 100e6, 1.0)
    n_ph = photons_per_second(1e-18, 4.6e-6)
    ok = rel(nep, 0.06e-18) <= 0.10 and 20 <= n_ph <= 25
    verdict("C3 quantum-limit point", ok,
            f"NEP_h(MCT, 1 Hz, shot-limited)={nep * 1e18:.4f} aW ({rel(nep, 0.06e-18):.1%}, "
            f"tol 10%); photons/s at 1 aW, 4.6 um = {n_ph:.2f} (range [20, 25])")


# 4 -----------------------------------------------------------------------
def test_c4_sweep_properties(verdict):
    t0 = time.perf_counter()
    cfg = nep_sweep_from_config(load(cookbook_path("fig1b")))
    grid = np.geomspace(1e-9, 1e3, 241)
    msgs, ok = [], True
    for det in cfg.detectors:
        pts = sweep_nep_vs_plo(det, cfg.lo, cfg.f_rf, 1.0, grid, exact=False)
        nep = np.array([p.nep_h for p in pts])
        i_n = np.array([math.sqrt(p.breakdown.total) for p in pts])
        pc_ = crossover_power(det, cfg.lo, cfg.f_rf)
        mono = bool(np.all(np.diff(nep) <= 0))
        gap = heterodyne_nep(det, cfg.lo, 100 * pc_, cfg.f_rf, 1.0) / nep_shot_limit(det) - 1
        low = grid <= pc_ / 100
        flat = float(i_n[low].max() / i_n[low].min() - 1)
        hi = grid >= 100 * pc_
        slope = float(np.polyfit(np.log10(grid[hi]), np.log10(i_n[hi]), 1)[0])
        # the gap at exactly 100x crossover is S_det/S_shot = 1/100 by construction
        good = mono and gap <= 0.01 * (1 + 1e-9) and flat < 0.01 and abs(slope - 0.5) <= 0.02
        ok &= good
        msgs.append(f"{det.name}: mono={mono} gap@100xPc={gap:.4%} flat={flat:.2%} "
                    f"slope={slope:.4f}")
    dt = time.perf_counter() - t0
    ok &= dt < 5
    verdict("C4 NEP-vs-P_LO sweep properties", ok, "; ".join(msgs) + f"; {dt:.2f} s")


# 5 -----------------------------------------------------------------------
@pytest.mark.parametrize("name", ["MCT", "QWIP", "QCD"])
def test_c5a_zero_signal_psd(verdict, name):
    det, p_lo = preset(name), OPERATING_P_LO[name]
    lo = reference_lo(name).replace(power=p_lo)
    sc = ScenarioConfig("BHD_AOM", lo=lo, aom=AomConfig(), balanced=det, amps=NOISELESS_AMPS,
                        fs=100e6, duration=0.05, rbw=300.0, seed=51,
                        instrument_noise_dbm_per_hz=None)
    t0 = time.perf_counter()
    r = simulate(with_signal_power(sc, 0.0))
    dt = time.perf_counter() - t0
    want = noise_breakdown(det, lo, p_lo, 105e6, n_detectors=2).total
    got = float(np.mean(r.spectrum.psd))
    d_db = 10 * math.log10(got / want)
    verdict(f"C5a P_S=0 difference-current PSD vs analytic noise-budget total [{name}, P_LO={p_lo:g} W]",
            abs(d_db) <= 0.5 and dt < 60,
            f"sim {got:.4e} vs analytic {want:.4e} A^2/Hz: {d_db:+.3f} dB (tol 0.5 dB), {dt:.2f} s")


@pytest.fixture(scope="module")
def c5_points():
    sc = fig3a()
    out = []
    for i, p in enumerate([1e-12, 1e-13, 1e-14, 1e-15]):
        t0 = time.perf_counter()
        r = simulate(replace(with_signal_power(sc, p), seed=1000 + i))
        out.append((p, r, time.perf_counter() - t0))
    return sc, out


def test_c5b_peak_vs_ih_literal(verdict, c5_points):
    sc, pts = c5_points
    det = sc.balanced.det_a
    d = [r.peak.p_peak - theoretical_peak_power(det.R, sc.z_load, p, sc.lo.power, r.g_amp).dbm
         for p, r, _ in pts]
    worst = max(d, key=abs)
    verdict("C5b BHD_AOM 1 Hz peak vs I_h = 4ZR^2 P_S P_LO G (literal)",
            all(abs(x) <= 1.0 for x in d),
            f"peak - I_h = {', '.join(f'{x:+.2f}' for x in d)} dB (tol 1 dB); worst {worst:+.2f} dB. "
            "The analyser reads RMS bin power, i.e. I_h/2 (-3.01 dB)")


def test_c5c_peak_vs_rms_ih(verdict, c5_points):
    sc, pts = c5_points
    det = sc.balanced.det_a
    d = [r.peak.p_peak - theoretical_peak_power(det.R, sc.z_load, p, sc.lo.power, r.g_amp).dbm
         + 10 * math.log10(2) for p, r, _ in pts]
    verdict("C5c [informational] BHD_AOM 1 Hz peak vs RMS convention I_h/2",
            all(abs(x) <= 1.0 for x in d),
            f"peak - I_h/2 = {', '.join(f'{x:+.2f}' for x in d)} dB (tol 1 dB)")


def test_c5d_peak_slope(verdict, c5_points):
    _, pts = c5_points
    x = np.log10([p for p, _, _ in pts])
    y = np.array([r.peak.p_peak for _, r, _ in pts])
    slope = float(np.polyfit(x, y, 1)[0])
    t_max = max(t for _, _, t in pts)
    verdict("C5d BHD_AOM peak slope vs P_S", abs(slope - 10) <= 0.3 and t_max < 60,
            f"{slope:.3f} dB/decade over 1 pW..1 fW (tol 10 +- 0.3); slowest point {t_max:.2f} s")


# 6 -----------------------------------------------------------------------
def free_scenario(mode):
    lo = qcl(power=1e-3, linewidth_fwhm=1e6)
    sig = lo.replace(nu0=lo.nu0 + 100e6)
    return ScenarioConfig(mode, lo=lo, sig=sig, fs=100e6, duration=1e-3, rbw=300e3, seed=61,
                          instrument_noise_dbm_per_hz=None)


def pll_scenario(rbw=300.0, duration=20e-3, **kw):
    lo = qcl(power=1e-3, linewidth_fwhm=1e6)
    sig = lo.replace(nu0=lo.nu0 + 100e6)
    return ScenarioConfig("BHD_PLL", lo=lo, sig=sig, pll=PllConfig(), fs=50e6, duration=duration,
                          rbw=rbw, seed=62, instrument_noise_dbm_per_hz=None, **kw)


@pytest.fixture(scope="module")
def c6_aom():
    sc = replace(fig3a(), instrument_noise_dbm_per_hz=None, seed=60)
    det = sc.balanced.det_a
    rbw = simulate(with_signal_power(sc, 1e-15)).spectrum.rbw
    nep = heterodyne_nep(det, sc.lo, sc.lo.power, sc.aom.f_shift, rbw, exact=True,
                         n_detectors=2)
    t0 = time.perf_counter()
    th = min_detectable_power(sc, 2 * nep, n_seeds=3)
    return th, nep, time.perf_counter() - t0


def test_c6a_threshold_closure(verdict, c6_aom):
    th, nep, dt = c6_aom
    ratio = th.p_threshold / nep
    verdict("C6a BHD_AOM threshold vs analytic NEP_h*df (MCT, 1 Hz RBW, analyser floor off)",
            1 / 3 <= ratio <= 3 and dt < 300,
            f"simulated P(excess SNR=1)={th.p_threshold:.3e} W, NEP_h*df={nep:.3e} W, "
            f"ratio {ratio:.2f} (tol x3), {dt:.1f} s")


def test_c6b_mode_ordering(verdict, c6_aom):
    t0 = time.perf_counter()
    th = {"SHD_FREE": min_detectable_power(free_scenario("SHD_FREE"), 1e-12).p_threshold,
          "BHD_FREE": min_detectable_power(free_scenario("BHD_FREE"), 1e-12).p_threshold,
          "BHD_PLL": min_detectable_power(pll_scenario(), 1e-16).p_threshold,
          "BHD_AOM": c6_aom[0].p_threshold}
    dt = time.perf_counter() - t0 + c6_aom[2]
    ok = th["SHD_FREE"] > th["BHD_FREE"] > max(th["BHD_PLL"], th["BHD_AOM"]) and dt < 300
    verdict("C6b minimum detectable power ordering SHD_FREE > BHD_FREE > stabilised", ok,
            ", ".join(f"{k}={v:.2e} W" for k, v in th.items())
            + f" (free modes at 300 kHz RBW, PLL at 300 Hz, AOM at 1 Hz); {dt:.1f} s")


# 7 -----------------------------------------------------------------------
def test_c7a_aom_rbw_limited(verdict):
    sc = replace(with_signal_power(fig3a(), 1e-12), duration=20.0, seed=71)
    r = simulate(sc)
    s = r.spectrum
    m = np.abs(s.freqs - sc.aom.f_shift) <= 20 * s.rbw
    fwhm = measure_fwhm(s.freqs[m], s.psd[m])
    verdict("C7a AOM self-heterodyne beat RBW-limited at 1 Hz RBW", fwhm <= 2 * s.rbw,
            f"FWHM {fwhm:.3f} Hz at RBW {s.rbw:.3f} Hz (limit 2 RBW; laser linewidth "
            f"{sc.lo.linewidth_fwhm:.0e} Hz)")


@pytest.mark.parametrize("dnu", [1e6, 3e6])
def test_c7b_free_running_linewidth(verdict, dnu):
    t0 = time.perf_counter()
    lo = qcl(power=1e-3, linewidth_fwhm=dnu)
    sig = lo.replace(nu0=lo.nu0 + 100e6)
    # strong signal: the line sits > 40 dB over the white floor, so no floor subtraction
    # (a floor estimate from the spectrum would include the Lorentzian wings)
    sc = with_signal_power(ScenarioConfig("BHD_FREE", lo=lo, sig=sig, fs=100e6, duration=1e-3,
                                          rbw=30e3, instrument_noise_dbm_per_hz=None), 1e-6)
    acc, n_seeds = None, 20
    for k in range(n_seeds):
        r = simulate(replace(sc, seed=700 + k))
        acc = r.spectrum.psd if acc is None else acc + r.spectrum.psd
    fwhm = measure_fwhm(r.spectrum.freqs, acc / n_seeds)
    dt = time.perf_counter() - t0
    verdict(f"C7b free-running beat FWHM = linewidth sum (dnu = {dnu / 1e6:g} MHz per laser)",
            rel(fwhm, 2 * dnu) <= 0.30 and dt < 120,
            f"FWHM {fwhm / 1e6:.3f} MHz vs {2 * dnu / 1e6:g} MHz ({rel(fwhm, 2 * dnu):.1%}, tol 30%), "
            f"{n_seeds} seeds, {dt:.1f} s")


def test_c7c_pll_locked(verdict):
    t0 = time.perf_counter()
    r = simulate(with_signal_power(pll_scenario(rbw=10.0, duration=0.3), 1e-9))
    free = simulate(with_signal_power(free_scenario("BHD_FREE"), 1e-9))
    dt = time.perf_counter() - t0
    ok = (r.lock.locked and r.lock.residual_rms < 1.0
          and abs(r.peak.f_peak - r.f_expected) <= r.spectrum.df
          and r.peak.p_peak > free.peak.p_peak and dt < 120)
    verdict("C7c PLL with default gains locks at f_clock", ok,
            f"residual {r.lock.residual_rms:.3f} rad rms (limit 1), peak at "
            f"{r.peak.f_peak - r.f_expected:+.2f} Hz from f_clock (bin {r.spectrum.df:.2f} Hz), "
            f"{r.peak.p_peak:.1f} dBm at 10 Hz RBW vs free-running {free.peak.p_peak:.1f} dBm at "
            f"300 kHz, {r.lock.cycle_slips} slips, {dt:.1f} s")


# 8 -----------------------------------------------------------------------
def test_c8_spectral_oracle(verdict):
    t0 = time.perf_counter()
    fs, n, nseg = 1e6, 1 << 20, 8192
    t = np.arange(n) / fs
    a = 1e-3
    s = estimate_psd(TimeSeries(fs, a * np.cos(2 * np.pi * 1000 * fs / nseg * t)),
                     ENBW_BINS * fs / nseg)
    tone_err = float(np.max(s.power_dbm) - 10 * math.log10(a**2 / 2 * 50 / 1e-3))
    rng = np.random.default_rng(8)
    s0 = 1e-20
    x = rng.standard_normal(n) * math.sqrt(s0 * fs / 2)
    w = estimate_psd(TimeSeries(fs, x), 300.0)
    inner = w.psd[(w.freqs > 5e3) & (w.freqs < 495e3)]
    floor_err = 10 * math.log10(float(np.mean(inner)) / s0)
    pars = float(np.sum(w.psd) * w.df / np.var(x) - 1)
    sc = replace(with_signal_power(fig3a(), 1e-13), path=OpticalPath(od_total=10, chopper_freq=150.0),
                 rbw=30.0, duration=1.0, seed=81)
    r = simulate(sc)
    side = r.sideband
    side_ok = (side is not None and abs(side.f_peak - (105e6 + 150)) <= r.spectrum.df
               and side.snr_db > 10)
    dt = time.perf_counter() - t0
    ok = abs(tone_err) <= 0.1 and abs(floor_err) <= 0.5 and abs(pars) <= 0.01 and side_ok and dt < 5
    verdict("C8 spectral estimator oracle", ok,
            f"tone {tone_err:+.4f} dB (tol 0.1), white floor {floor_err:+.3f} dB (tol 0.5), "
            f"Parseval {pars:+.3%} (tol 1%), chopper sideband at f_AOM"
            f"{(side.f_peak - 105e6) if side else float('nan'):+.2f} Hz SNR "
            f"{side.snr_db if side else float('nan'):.1f} dB at RBW {r.spectrum.rbw:.1f} Hz; {dt:.2f} s")


# 9 -----------------------------------------------------------------------
def test_c9a_field_expansion_literal(verdict):
    rng = np.random.default_rng(9)
    e_s, e_lo = 0.37, 1.9
    w_lo, w_s = 2 * np.pi * 3e6, 2 * np.pi * 3.5e6
    t = np.linspace(0, 4e-6, 2001)
    worst = 0.0
    for phi in rng.uniform(-np.pi, np.pi, 50):
        exact = field_cross_term(t, phi, e_s, e_lo, w_s, w_lo)
        lit = 2 * abs(e_s * e_lo) * np.cos((w_s - w_lo) * t) * (1 + np.cos(phi))
        worst = max(worst, float(np.max(np.abs(exact - lit)) / np.max(np.abs(exact))))
    verdict("C9a field expansion vs single-term beat expression, pointwise", worst <= 1e-9,
            f"max relative deviation {worst:.3e} (tol 1e-9); the expansion carries an extra "
            "quadrature term -2 E_s E_LO sin(dphi) sin(dw t)")


def test_c9b_field_expansion_in_phase(verdict):
    rng = np.random.default_rng(9)
    e_s, e_lo = 0.37, 1.9
    w_lo, w_s = 2 * np.pi * 3e6, 2 * np.pi * 3.5e6
    t = np.arange(2000) / 1e9  # four whole beat periods
    worst = 0.0
    for phi in rng.uniform(-np.pi, np.pi, 50):
        i_part, _ = cross_term_quadratures(t, phi, e_s, e_lo, w_s, w_lo)
        worst = max(worst, rel(i_part, 2 * e_s * e_lo * (1 + math.cos(phi))))
    verdict("C9b [informational] in-phase beat amplitude = 2 E_s E_LO (1 + cos dphi)",
            worst <= 1e-9, f"max relative deviation {worst:.3e} (tol 1e-9)")


@pytest.fixture(scope="module")
def c9_scans():
    sc = fig3a()
    x = np.linspace(0, 3.45e-6, 31)
    t0 = time.perf_counter()
    out = {}
    for od in (7, 13):
        s = replace(sc, path=OpticalPath(od_total=od), seed=900 + od)
        out[od] = (scan(s, x, threads=4), None)
        out[od] = (out[od][0], fit_fringe(out[od][0]))
    return out, time.perf_counter() - t0


def test_c9c_period(verdict, c9_scans):
    scans, dt = c9_scans
    sres, f = scans[7]
    lam = sres.lam
    verdict("C9c fitted fringe period = lambda/2 at high SNR (100 pW)",
            rel(f.period, lam / 2) <= 0.05 and dt < 120,
            f"period {f.period * 1e6:.4f} um vs {lam / 2 * 1e6:.3f} um "
            f"({rel(f.period, lam / 2):.2%}, tol 5%), r2={f.r_squared:.5f}")


def test_c9d_100aw_scan(verdict, c9_scans):
    scans, dt = c9_scans
    sres, f = scans[13]
    verdict("C9d 100 aW scan: (1+cos)^2 fit extinction and r2",
            f.extinction_db >= 15 and f.r_squared >= 0.99 and dt < 120,
            f"P_S={sres.p_s_nominal:.1e} W, extinction {f.extinction_db:.1f} dB (min 15), "
            f"r2={f.r_squared:.4f} (min 0.99), period {f.period * 1e6:.3f} um; both scans {dt:.1f} s")


# 10 ----------------------------------------------------------------------
def test_c10_determinism(verdict, tmp_path):
    runs = [("presets",), ("validate-table1",),
            ("nep-sweep", "--config", cookbook_path("fig1b")),
            ("nep-sweep", "--config", cookbook_path("figS2")),
            ("simulate", "--config", cookbook_path("fig3a"), "--threads", "2"),
            ("interferogram", "--config", cookbook_path("fig4c"), "--threads", "4")]
    mism, n_files = [], 0
    for k, argv in enumerate(runs):
        outs = []
        for rep in ("a", "b"):
            d = tmp_path / f"{k}{rep}"
            assert main([*argv, "--out", str(d)]) == 0
            outs.append(d)
        for f in sorted(os.listdir(outs[0])):
            if f == "manifest.json":
                continue
            n_files += 1
            if (outs[0] / f).read_bytes() != (outs[1] / f).read_bytes():
                mism.append(f"{argv[0]}:{f}")
    verdict("C10 determinism of every command", not mism,
            f"{n_files} data files compared byte for byte across reruns; mismatches: {mism or 'none'}")
