"""Heterodyne interferometry: piezo scan over 1.5 fringes at 100 pW and 100 aW, with fits."""

from dataclasses import replace

import numpy as np

from mirhet.cli import cookbook_path
from mirhet.config import load, scenario_from_config
from mirhet.interferometry import fit_fringe, scan
from mirhet.optics import OpticalPath

sc = replace(scenario_from_config(load(cookbook_path("fig4c"))), duration=2.0)
x = np.linspace(0, 3.45e-6, 31)  # [m]
for od in (7, 13):
    s = scan(replace(sc, path=OpticalPath(od_total=od), seed=40 + od), x, threads=4)
    f = fit_fringe(s)
    print(f"OD{od}: P_S={s.p_s_nominal:.1e} W  period {f.period * 1e6:.3f} um  "
          f"extinction {f.extinction_db:.1f} dB  r2={f.r_squared:.4f}")
