"""Beat linewidth of two free-running 1 MHz lasers, and the same beat phase-locked."""

from dataclasses import replace

import numpy as np

from mirhet.budget import qcl
from mirhet.chain import ScenarioConfig, simulate, with_signal_power
from mirhet.pll import PllConfig
from mirhet.spectral import measure_fwhm

lo = qcl(power=1e-3, linewidth_fwhm=1e6)
sig = lo.replace(nu0=lo.nu0 + 100e6)

free = with_signal_power(ScenarioConfig("BHD_FREE", lo=lo, sig=sig, fs=100e6, duration=1e-3,
                                        rbw=30e3, instrument_noise_dbm_per_hz=None), 1e-6)
psd = np.mean([simulate(replace(free, seed=k)).spectrum.psd for k in range(8)], axis=0)
r = simulate(free)
print(f"free-running beat FWHM {measure_fwhm(r.spectrum.freqs, psd) / 1e6:.2f} MHz "
      f"(linewidth sum 2 MHz), peak {r.peak.p_peak:.1f} dBm at 30 kHz RBW")

locked = with_signal_power(ScenarioConfig("BHD_PLL", lo=lo, sig=sig, pll=PllConfig(), fs=50e6,
                                          duration=0.1, rbw=30.0, seed=3,
                                          instrument_noise_dbm_per_hz=None), 1e-9)
r = simulate(locked)
print(f"PLL: locked={r.lock.locked} residual {r.lock.residual_rms:.3f} rad rms, "
      f"{r.lock.cycle_slips} cycle slips, peak {r.peak.p_peak:.1f} dBm at "
      f"{r.peak.f_peak - r.f_expected:+.1f} Hz from f_clock (30 Hz RBW)")
