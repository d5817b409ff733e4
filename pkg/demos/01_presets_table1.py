"""Detector presets, their responsivity / shot-limited NEP, and the Table-1 cross-check."""

from mirhet.budget import nep_shot_limit
from mirhet.detectors import PRESET_NAMES, preset, responsivity
from mirhet.table1 import summary_line, validate_table1

for name in PRESET_NAMES:
    d = preset(name)
    r = responsivity(d.eta, d.g, d.lambda_p)
    print(f"{name:5s} lambda={d.lambda_p * 1e6:5.2f} um  R={r:.4f} A/W  "
          f"NEP_shot(1 Hz)={nep_shot_limit(d):.3e} W")

print()
for c in validate_table1():
    print(summary_line(c))
