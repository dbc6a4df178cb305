"""A tour of the gain patterns and their connectivity functional.

Run with ``python demos/gain_patterns.py``.  Prints plain tables.
"""
import math

import numpy as np

from aniso3d import Cardioid, Donut, Isotropic, NarrowLobe, Sector
from aniso3d.analytic import fit_scaling_exponent
from aniso3d.gain import half_max_solid_angle, s_functional, verify_normalization

patterns = [Isotropic(), Cardioid(1.0), Donut(8.0), NarrowLobe(4.0), Sector(0.2)]

# Every pattern spreads the same total power over the sphere.
print("pattern            integral/(4 pi)   half-max solid angle")
for p in patterns:
    print(f"{p.kind:18s} {verify_normalization(p) / (4 * math.pi):.12f}   {half_max_solid_angle(p):8.4f}")

# S_eta grows with directivity below eta = 3, shrinks above, and is flat at 3.
etas = [2.0, 3.0, 4.0, 6.0]
print("\nS_eta            " + "".join(f"eta={e:<8g}" for e in etas))
for p in patterns:
    vals = [s_functional(p, e)[0] for e in etas]
    print(f"{p.kind:16s} " + "".join(f"{v:<12.5f}" for v in vals))

# For narrow beams S_eta behaves like a power of the beam solid angle.
print("\nfitted exponent of S against beam solid angle")
for eta in (2.0, 6.0):
    slope = fit_scaling_exponent("sector", eta, np.linspace(0.02, 0.1, 9))
    print(f"  eta={eta:g}: {slope:+.4f}  (1 - 3/eta = {1 - 3 / eta:+.4f})")
