"""Homogeneous connectivity mass and the observables derived from it."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .gain import (
    Donut,
    GainPattern,
    NarrowLobe,
    Sector,
    half_max_solid_angle,
    s_functional,
)
from .specfn import DEFAULT_SPEC, DomainError, QuadratureSpec, gamma_fn

__all__ = [
    "PathLossModel",
    "MassResult",
    "DegreeEstimate",
    "radial_prefactor",
    "homogeneous_mass",
    "mean_degree_and_pair_probability",
    "pfc_homogeneous",
    "pfc_homogeneous_raw",
    "boundary_mass_isotropic",
    "CORNER_SOLID_ANGLES",
    "scaling_family",
    "fit_scaling_exponent",
]


@dataclass(frozen=True)
class PathLossModel:
    """Rayleigh-faded link model ``H = exp(-beta r**eta / (G_i G_j))``."""

    eta: float = 2.0
    beta: float = 1.0

    def __post_init__(self):
        if not self.eta > 0:
            raise DomainError("eta must be > 0")
        if not self.beta > 0:
            raise DomainError("beta must be > 0")

    def connection_range(self, gain_product: float = 1.0) -> float:
        """Distance at which the link probability falls to 1/e."""
        return (gain_product / self.beta) ** (1.0 / self.eta)

    def link_probability(self, r, gain_product):
        r = np.asarray(r, dtype=float)
        q = np.asarray(gain_product, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.exp(-self.beta * r**self.eta / q)
        return np.where(q > 0, out, 0.0)


@dataclass(frozen=True)
class MassResult:
    mass: float
    method: str
    pattern_tx: GainPattern | None = None
    pattern_rx: GainPattern | None = None
    model: PathLossModel | None = None

    def __post_init__(self):
        if self.mass < 0:
            raise DomainError("mass must be non-negative")

    def __float__(self):
        return float(self.mass)


class DegreeEstimate(NamedTuple):
    mu: float
    p2: float
    mu_finite: float


def radial_prefactor(model: PathLossModel) -> float:
    """``Gamma(3/eta) / (eta beta**(3/eta))``, the radial integral of ``r^2 H`` at unit gains."""
    p = 3.0 / model.eta
    return gamma_fn(p) / (model.eta * model.beta**p)


def homogeneous_mass(
    pattern_tx: GainPattern,
    pattern_rx: GainPattern,
    model: PathLossModel,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> MassResult:
    """Bulk connectivity mass for randomly oriented transmit/receive patterns.

    ``M = pi Gamma(3/eta) / (eta beta^(3/eta)) * S[G_tx] * S[G_rx]``; closed
    forms are used where they exist and ``method`` says whether any factor
    needed quadrature.
    """
    s_tx, m_tx = s_functional(pattern_tx, model.eta, spec)
    s_rx, m_rx = s_functional(pattern_rx, model.eta, spec)
    method = "closed" if m_tx == m_rx == "closed" else "quadrature"
    mass = math.pi * radial_prefactor(model) * s_tx * s_rx
    return MassResult(mass, method, pattern_tx, pattern_rx, model)


def mean_degree_and_pair_probability(mass, rho: float, volume: float, n_nodes: int) -> DegreeEstimate:
    """Mean degree ``rho M``, pair probability ``M / V`` and ``(N - 1) p2``."""
    m = float(mass)
    if rho <= 0 or volume <= 0:
        raise DomainError("rho and volume must be positive")
    if n_nodes < 2:
        raise DomainError("need at least two nodes")
    p2 = m / volume
    return DegreeEstimate(rho * m, p2, (n_nodes - 1) * p2)


def pfc_homogeneous_raw(n_nodes: int, rho: float, mass) -> float:
    """``1 - N exp(-rho M)``, unclamped (negative at low density)."""
    return 1.0 - n_nodes * math.exp(-rho * float(mass))


def pfc_homogeneous(n_nodes: int, rho: float, mass) -> float:
    """High-density full-connectivity probability, clamped to ``[0, 1]``."""
    if n_nodes < 1 or rho <= 0:
        raise DomainError("n_nodes and rho must be positive")
    return min(1.0, max(0.0, pfc_homogeneous_raw(n_nodes, rho, mass)))


# bulk, face, right-angled edge, right-angled corner
CORNER_SOLID_ANGLES = {"bulk": 4 * math.pi, "surface": 2 * math.pi, "edge": math.pi, "corner": math.pi / 2}


def boundary_mass_isotropic(model: PathLossModel, omega_b: float) -> float:
    """Isotropic connectivity mass of a boundary component of solid angle ``omega_b``."""
    if not 0.0 < omega_b <= 4 * math.pi + 1e-12:
        raise DomainError("omega_B must lie in (0, 4 pi]")
    return omega_b * radial_prefactor(model)


def scaling_family(family: str, parameter: float) -> GainPattern:
    """Member of one of the directional families used for scaling fits."""
    if family == "sector":
        return Sector(parameter)
    if family == "donut":
        return Donut(parameter)
    if family == "narrow":
        return NarrowLobe(parameter)
    raise DomainError(f"family must be 'sector', 'donut' or 'narrow', got {family!r}")


def fit_scaling_exponent(
    family: str,
    eta: float,
    parameters: Sequence[float],
    quantity: str = "s",
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> float:
    """Least-squares slope of ``log S`` (or ``log M``) against ``log omega``.

    ``omega`` is the measured half-maximum solid angle of each member.  The
    slope should approach ``1 - 3/eta`` for ``S`` and ``2 - 6/eta`` for the
    mass with identical transmit and receive patterns.
    """
    if len(parameters) < 5:
        raise DomainError("need at least 5 sweep points for a scaling fit")
    if quantity not in ("s", "mass"):
        raise DomainError("quantity must be 's' or 'mass'")
    model = PathLossModel(eta=eta, beta=1.0)
    log_w, log_y = [], []
    for p in parameters:
        pat = scaling_family(family, p)
        log_w.append(math.log(half_max_solid_angle(pat)))
        if quantity == "s":
            log_y.append(math.log(s_functional(pat, eta, spec)[0]))
        else:
            log_y.append(math.log(homogeneous_mass(pat, pat, model, spec).mass))
    slope, _ = np.polyfit(log_w, log_y, 1)
    return float(slope)
