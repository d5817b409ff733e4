"""Heterodyne NEP vs LO power for the three presets (1 Hz bandwidth, 100 MHz IF).

NEP falls as 1/sqrt(P_LO) until the LO shot noise dominates, then flattens at
the shot-noise limit; the crossover is where shot noise equals everything else.
"""

import numpy as np

from mirhet.budget import crossover_power, nep_shot_limit, sweep_nep_vs_plo, reference_lo
from mirhet.detectors import PRESET_NAMES, preset

grid = np.geomspace(1e-9, 1e-1, 9)  # [W]
print("P_LO [W]  " + "  ".join(f"{n:>10s}" for n in PRESET_NAMES))
curves = {n: sweep_nep_vs_plo(preset(n), reference_lo(n), 100e6, 1.0, grid) for n in PRESET_NAMES}
for i, p in enumerate(grid):
    print(f"{p:8.0e}  " + "  ".join(f"{curves[n][i].nep_h:10.3e}" for n in PRESET_NAMES))
print()
for n in PRESET_NAMES:
    d = preset(n)
    print(f"{n:5s} shot limit {nep_shot_limit(d):.3e} W, crossover P_LO "
          f"{crossover_power(d, reference_lo(n), 100e6):.3e} W")
