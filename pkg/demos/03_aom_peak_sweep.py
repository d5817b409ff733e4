"""BHD + AOM self-heterodyne: beat peak vs signal power at 1 Hz RBW (shipped fig3a config).

The analyser reads RMS power, so the simulated peak sits ~3 dB under the
peak-amplitude expression I_h^2 Z G and on top of the RMS one.
"""

from dataclasses import replace

from mirhet.budget import theoretical_peak_power
from mirhet.chain import point_seed, simulate, with_signal_power
from mirhet.cli import cookbook_path
from mirhet.config import load, scenario_from_config

sc = replace(scenario_from_config(load(cookbook_path("fig3a"))), duration=2.0)
det = sc.balanced.det_a
print(" P_S [W]   peak [dBm]  I_h^2ZG [dBm]  floor [dBm]  SNR [dB]")
for i, p_s in enumerate([1e-12, 1e-14, 1e-16, 1e-17]):
    r = simulate(replace(with_signal_power(sc, p_s), seed=point_seed(sc.seed, i)))
    th = theoretical_peak_power(det.R, sc.z_load, r.p_s, sc.lo.power, r.g_amp)
    print(f"{p_s:8.0e}  {r.peak.p_peak:10.2f}  {th.dbm:13.2f}  {r.peak.noise_floor:11.2f}  "
          f"{r.peak.snr_db:8.1f}")
