"""Connectivity of 3D wireless networks with randomly oriented directional antennas.

Submodules
----------
specfn    special functions and adaptive quadrature
gain      gain patterns and the connectivity functional ``S``
analytic  homogeneous connectivity mass, mean degree, full-connectivity estimate
boundary  corner masses, orientation minimisation, multi-sector blind spots
thomson   evenly spread lobe directions (Thomson problem)
mcsim     seeded Monte Carlo random-graph simulator
cli       command-line front end
"""
from .analytic import (
    PathLossModel,
    boundary_mass_isotropic,
    homogeneous_mass,
    mean_degree_and_pair_probability,
    pfc_homogeneous,
)
from .boundary import (
    Domain,
    OrientationGrid,
    corner_gain_integral,
    corner_mass,
    min_corner_gain_integral,
    min_multisector_corner_mass,
    multisector_corner_mass_3d,
)
from .gain import (
    Cardioid,
    Donut,
    GainPattern,
    Isotropic,
    MultiLobe,
    NarrowLobe,
    OrientationSet,
    Sector,
    half_max_solid_angle,
    pattern_from_dict,
    s_functional,
    verify_normalization,
)
from .mcsim import SimConfig, run_ensemble, sweep_eta
from .specfn import DomainError, QuadratureError, QuadratureSpec
from .thomson import thomson_points, thomson_solve

__version__ = "0.1.0"
