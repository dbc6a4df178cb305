"""Corners of a cube, and when directional nodes go blind there.

Run with ``python demos/corner_blind_spots.py``.  Uses a coarse rotation grid
(6 degrees) so it finishes in seconds; the CLI ``multisector`` command
runs the fine version.
"""
import math

from aniso3d import Cardioid, Isotropic, PathLossModel
from aniso3d.boundary import OrientationGrid, corner_mass, min_corner_gain_integral, min_multisector_corner_mass
from aniso3d.thomson import thomson_points

# An isotropic node in the corner of a unit cube.
for eta in (2.0, 3.0, 6.0):
    model = PathLossModel(eta, 1.0)
    m = corner_mass(Isotropic(), [0, 0, 1], Isotropic(), model, truncation=1.0)
    print(f"isotropic corner mass, unit cube, eta={eta:g}: {m:.4f}")

# A cardioid can be turned away from the corner but never goes fully dark.
best = min_corner_gain_integral(Cardioid(1.0), 3.0)
print(f"\nworst-case cardioid corner integral: {best.value:.4f} (axis {best.orientation.round(3)})")

# Sectorized multi-lobe nodes: with few lobes some rotation hides them all.
lam = math.sqrt(30 * math.pi) / 3
grid = OrientationGrid(step_euler=6.0)
print("\n n   min corner mass   blind spot")
for n in (4, 6, 10, 14, 18):
    res = min_multisector_corner_mass(n, lam, PathLossModel(2.0, 1.0), 1.0, grid, thomson_points(n))
    print(f"{n:2d}   {res.value:15.4f}   {'yes' if res.blind_spot else 'no'}")
