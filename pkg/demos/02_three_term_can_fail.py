"""
Why the three-term variance needs a fallback.

With little correlation beyond the intersections, V_G + V_H - V_I can be
negative for the coefficient of interest. This script draws replications
from the simulation design until that happens and shows what the
eigenvalue repair and the max-se rule do with it.
"""

import numpy as np

from twowaycrve.crve import menu_for_dataset
from twowaycrve.simlab import SimConfig, gen_dataset, make_design

cfg = SimConfig(p=5, rho_g=0.0, rho_h=0.0)
design = make_design(cfg)

# %% Find a replication with an undefined CV1 three-term variance
for rep in range(500):
    menu = menu_for_dataset(gen_dataset(cfg, rep, design=design), with_hc=False)
    if not menu["CV1(3)"].defined:
        break
print(f"replication {rep}: CV1 three-term variance of beta_1 is not positive")

V3 = menu.matrices[("CV1", "three-term")].matrix
V3p = menu.matrices[("CV1", "three-plus")].matrix
w = np.linalg.eigvalsh(V3)
print(f"three-term matrix: {np.sum(w <= 0)} of {len(w)} eigenvalues are <= 0")
print(f"V3[0,0] = {V3[0, 0]:.3e}, after eigen repair {V3p[0, 0]:.3e}")

# %% Standard errors side by side
for tag in ("CV1-G", "CV1-H", "CV1(2)", "CV1(3)", "CV1(3+)", "CV1(max)"):
    e = menu[tag]
    se = f"{e.se:.5f}" if e.defined else "undefined"
    print(f"{tag:>9}: {se}" + (f"  (max-se picked {e.selected})" if e.selected else ""))

# %% How often this happens
undefined = 0
R = 300
for rep in range(R):
    m = menu_for_dataset(gen_dataset(cfg, rep, design=design), with_hc=False)
    undefined += not m["CV1(3)"].defined
print(f"undefined in {undefined} of {R} replications ({undefined / R:.1%})")
