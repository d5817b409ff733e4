import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
import scipy.constants as pc

from mirhet.budget import (budget_point, crossover_power, heterodyne_current, heterodyne_nep,
                           lo_noise_psd, nep_ideal, nep_shot_limit, nep_shot_limit_eta, qcl,
                           shot_noise_psd, reference_lo, sweep_nep_vs_plo,
                           theoretical_peak_power, total_noise_current)
from mirhet.detectors import PRESET_NAMES, DomainError, detector_noise_psd, preset

F_RF = 100e6
OPERATING_P_LO = {"MCT": 1e-3, "QWIP": 10e-3, "QCD": 20e-3}


def test_heterodyne_current():
    assert heterodyne_current(1.3, 1e-3, 1e-15) == pytest.approx(2.6e-9, rel=1e-12)
    assert heterodyne_current(1.3, 1e-3, 0.0) == 0
    assert heterodyne_current(0.7, 2e-3, 5e-12) == heterodyne_current(0.7, 5e-12, 2e-3)
    with pytest.raises(DomainError):
        heterodyne_current(1.0, -1.0, 1.0)


def test_shot_noise_reference_values():
    assert math.sqrt(shot_noise_psd(preset("MCT"), 1e-3)) == pytest.approx(2.1e-11, rel=0.10)
    assert math.sqrt(shot_noise_psd(preset("QCD"), 30e-3)) == pytest.approx(4.4e-13, rel=0.10)
    assert shot_noise_psd(preset("MCT"), 0.0) == 0


def test_lo_noise_terms():
    d, lo = preset("MCT"), reference_lo("MCT")
    b = lo_noise_psd(d, lo, F_RF)
    assert math.sqrt(b.s_lfn) == pytest.approx(1e-13, rel=0.5)
    assert math.sqrt(b.s_rin) == pytest.approx(1e-14, rel=0.5)
    assert b.s_rin == pytest.approx(10 ** (lo.rin_db_hz / 10) * (d.R * lo.power) ** 2, rel=1e-12)
    assert b.s_d_bg == b.s_th == b.s_tia == 0
    z = lo_noise_psd(d, lo.replace(power=0.0), F_RF)
    assert z.s_shot == z.s_lfn == z.s_rin == 0


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_shot_dominates_at_operating_power(name):
    d = preset(name)
    b = lo_noise_psd(d, reference_lo(name), F_RF, OPERATING_P_LO[name])
    assert b.s_shot > 10 * b.s_lfn and b.s_shot > 10 * b.s_rin


def test_total_noise_current():
    d, lo = preset("MCT"), reference_lo("MCT")
    i = total_noise_current(d, lo, 1e-3, F_RF, 1.0)
    assert i == pytest.approx(2.1e-11, rel=0.15)
    i0 = total_noise_current(d, lo, 0.0, F_RF, 1.0)
    assert i0 == pytest.approx(math.sqrt(detector_noise_psd(d, F_RF).total), rel=1e-14)
    assert total_noise_current(d, lo, 1e-3, F_RF, 4.0) == pytest.approx(2 * i, rel=1e-14)
    with pytest.raises(DomainError):
        total_noise_current(d, lo, 1e-3, F_RF, 0.0)


def test_heterodyne_nep_examples():
    d, lo = preset("MCT"), reference_lo("MCT")
    assert heterodyne_nep(d, lo, 1e3, F_RF, 1.0) == pytest.approx(6.2e-20, rel=0.05)
    assert heterodyne_nep(d, lo, 10.0, F_RF, 1.0) == pytest.approx(0.06e-18, rel=0.10)
    shot = pc.e * d.g / (2 * d.R)
    a = heterodyne_nep(d, lo, 1e-7, F_RF, 1.0) - shot
    b = heterodyne_nep(d, lo, 0.5e-7, F_RF, 1.0) - shot
    assert b == pytest.approx(2 * a, rel=1e-9)
    with pytest.raises(DomainError):
        heterodyne_nep(d, lo, 0.0, F_RF, 1.0)


def test_shot_limits():
    assert nep_shot_limit(preset("MCT")) == pytest.approx(6.2e-20, rel=0.05)
    assert nep_shot_limit(preset("QCD")) == pytest.approx(4.5e-19, rel=0.05)
    assert nep_shot_limit(preset("QWIP")) == pytest.approx(4.8e-19, rel=0.05)
    assert 0.5 < 5.1e-19 / nep_shot_limit(preset("QCD")) < 2
    assert 0.5 < 9.6e-19 / nep_shot_limit(preset("QWIP")) <= 2.01
    m = preset("MCT")
    assert nep_shot_limit_eta(m) == pytest.approx(pc.h * pc.c / m.lambda_p / (2 * m.eta))
    assert nep_ideal(4.6e-6) == pytest.approx(pc.h * pc.c / 4.6e-6 / 2)


def test_sweep_shape():
    d, lo = preset("MCT"), reference_lo("MCT")
    grid = np.geomspace(1e-9, 0.1, 81)
    pts = sweep_nep_vs_plo(d, lo, F_RF, 1.0, grid, exact=False)
    nep = np.array([p.nep_h for p in pts])
    assert np.all(np.diff(nep) <= 0)
    assert nep[-1] == pytest.approx(6.2e-20, rel=0.05)
    one = sweep_nep_vs_plo(d, lo, F_RF, 1.0, [1e-3])[0]
    assert one == budget_point(d, lo, 1e-3, F_RF, 1.0)
    with pytest.raises(DomainError):
        sweep_nep_vs_plo(d, lo, F_RF, 1.0, [])
    with pytest.raises(DomainError):
        sweep_nep_vs_plo(d, lo, F_RF, 1.0, [1e-3, 1e-4])


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_asymptote_gap_and_crossover(name):
    d, lo = preset(name), qcl(lam=preset(name).lambda_p, rin_db_hz=-200, lfn_current_psd=0.0)
    pc_ = crossover_power(d, lo, F_RF)
    b = detector_noise_psd(d, F_RF)
    assert float(shot_noise_psd(d, pc_)) == pytest.approx(b.s_det, rel=1e-6)
    nep = heterodyne_nep(d, lo, 100 * pc_, F_RF, 1.0)
    assert nep >= nep_shot_limit(d)
    # the gap is S_det / S_shot(P), i.e. exactly 1/100 at 100x the crossover
    assert nep / nep_shot_limit(d) - 1 == pytest.approx(0.01, rel=1e-6)
    assert heterodyne_nep(d, lo, 101 * pc_, F_RF, 1.0) / nep_shot_limit(d) - 1 < 0.01


@settings(max_examples=100, deadline=None)
@given(name=st.sampled_from(PRESET_NAMES), p_lo=st.floats(1e-9, 1.0), df=st.floats(1e-3, 1e6),
       nd=st.sampled_from([1, 2]))
def test_snr_closure_and_bookkeeping(name, p_lo, df, nd):
    d, lo = preset(name), reference_lo(name)
    nep = heterodyne_nep(d, lo, p_lo, F_RF, df, exact=True, n_detectors=nd)
    bp = budget_point(d, lo, p_lo, F_RF, df, p_s=nep, n_detectors=nd)
    assert bp.snr == pytest.approx(1.0, rel=1e-9)
    assert bp.i_n ** 2 == pytest.approx(df * bp.breakdown.total, rel=1e-12)
    assert heterodyne_nep(d, lo, p_lo, F_RF, df) >= nep_shot_limit(d, df) * (1 - 1e-12)


def test_peak_power():
    pk = theoretical_peak_power(1.3, 50.0, 1e-15, 1e-3, 10 ** 4.46)
    assert pk.watts == pytest.approx(9.8e-12, rel=0.01)
    assert pk.dbm == pytest.approx(-80.1, abs=0.05)
    assert theoretical_peak_power(1.3, 50, 1e-14, 1e-3, 1).dbm - \
        theoretical_peak_power(1.3, 50, 1e-15, 1e-3, 1).dbm == pytest.approx(10.0, abs=1e-12)
    assert theoretical_peak_power(1.3, 50, 1e-15, 1e-3, 1.0).watts == \
        pytest.approx(4 * 50 * 1.3**2 * 1e-18, rel=1e-14)
    ps = np.geomspace(1e-17, 1e-12, 11)
    db = theoretical_peak_power(1.3, 50, ps, 1e-3, 1.0).dbm
    assert np.allclose(np.diff(db) / np.diff(np.log10(ps)), 10.0, atol=1e-9)
