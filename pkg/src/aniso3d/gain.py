"""Parametric antenna gain patterns and the connectivity functional.

Patterns live in their body frame with boresight ``+z``.  The rotationally
symmetric ones are functions of the polar angle ``theta`` only and expose
``gain_theta``; :class:`MultiLobe` is a sum of identical, individually
symmetric lobes along explicit unit vectors.

Every pattern is normalised so that its integral over the sphere is 4 pi.
The connectivity functional is::

    S(G; eta) = integral_0^pi  sin(theta) * G(theta) ** (3 / eta)  d theta
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import optimize

from .specfn import (
    DEFAULT_SPEC,
    DomainError,
    QuadratureSpec,
    integrate_1d,
    log_gamma,
)

__all__ = [
    "GainPattern",
    "Isotropic",
    "Cardioid",
    "Donut",
    "NarrowLobe",
    "Sector",
    "MultiLobe",
    "OrientationSet",
    "UnsupportedClosedForm",
    "gain_at",
    "verify_normalization",
    "s_functional_quadrature",
    "s_functional_closed",
    "s_functional",
    "half_max_solid_angle",
    "pattern_from_dict",
    "pattern_to_dict",
]

FOUR_PI = 4.0 * math.pi


class UnsupportedClosedForm(NotImplementedError):
    """No trusted closed form exists for this pattern."""


def _unit_rows(vectors, tol: float = 1e-12) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(vectors, dtype=float))
    if arr.shape[-1] != 3:
        raise DomainError("direction vectors must be 3-vectors")
    norms = np.linalg.norm(arr, axis=1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise DomainError("direction vectors must have unit norm")
    return arr


@dataclass(frozen=True)
class OrientationSet:
    """``n`` unit 3-vectors, stored as a read-only ``(n, 3)`` array."""

    vectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _unit_rows(self.vectors).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "vectors", arr)

    @classmethod
    def normalized(cls, vectors) -> "OrientationSet":
        arr = np.atleast_2d(np.asarray(vectors, dtype=float))
        return cls(arr / np.linalg.norm(arr, axis=1, keepdims=True))

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    def __len__(self):
        return self.n

    def __eq__(self, other):
        return isinstance(other, OrientationSet) and np.array_equal(self.vectors, other.vectors)

    def __hash__(self):
        return hash(self.vectors.tobytes())

    def min_separation(self) -> float:
        """Smallest pairwise angle between the vectors (radians)."""
        if self.n < 2:
            return math.pi
        dots = np.clip(self.vectors @ self.vectors.T, -1.0, 1.0)
        np.fill_diagonal(dots, -1.0)
        return float(np.arccos(dots.max()))

    def rotated(self, rotation: np.ndarray) -> "OrientationSet":
        return OrientationSet.normalized(self.vectors @ np.asarray(rotation).T)


class GainPattern:
    """Base class.  Subclasses are frozen dataclasses."""

    kind: str = ""
    symmetric: bool = True

    # polar-angle interval carrying the gain, and where the maximum sits
    def support(self) -> tuple[float, float]:
        return (0.0, math.pi)

    def peak_theta(self) -> float:
        return 0.0

    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def max_gain(self) -> float:
        return float(self.gain_theta(np.array([self.peak_theta()]))[0])

    def gain_theta(self, theta) -> np.ndarray:
        raise NotImplementedError

    def gain(self, directions) -> np.ndarray:
        """Gain for body-frame unit vectors of shape ``(..., 3)``."""
        d = np.asarray(directions, dtype=float)
        theta = np.arccos(np.clip(d[..., 2], -1.0, 1.0))
        return self.gain_theta(theta)

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Isotropic(GainPattern):
    kind = "isotropic"

    def gain_theta(self, theta):
        return np.ones_like(np.asarray(theta, dtype=float))

    def to_dict(self):
        return {"type": "isotropic"}


@dataclass(frozen=True)
class Cardioid(GainPattern):
    """Patch-antenna approximation ``1 + epsilon cos(theta)``."""

    epsilon: float
    kind = "cardioid"

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise DomainError("cardioid epsilon must lie in [0, 1]")

    def gain_theta(self, theta):
        return 1.0 + self.epsilon * np.cos(np.asarray(theta, dtype=float))

    def to_dict(self):
        return {"type": "cardioid", "epsilon": self.epsilon}


@dataclass(frozen=True)
class Donut(GainPattern):
    """Dipole approximation ``A(m) sin(theta)**m``."""

    m: float
    kind = "donut"

    def __post_init__(self):
        if not self.m > 0:
            raise DomainError("donut m must be > 0")

    @property
    def amplitude(self) -> float:
        m = self.m
        return 2.0 * math.exp(log_gamma((3 + m) / 2) - log_gamma((2 + m) / 2)) / math.sqrt(math.pi)

    def peak_theta(self):
        return 0.5 * math.pi

    def breakpoints(self):
        # the ring narrows like 1/sqrt(m); pin a few edges so the peak is resolved
        w = 1.0 / math.sqrt(self.m)
        pts = {0.5 * math.pi}
        for k in (1.0, 3.0, 8.0):
            if k * w < 0.5 * math.pi:
                pts.update({0.5 * math.pi - k * w, 0.5 * math.pi + k * w})
        return tuple(sorted(pts))

    def gain_theta(self, theta):
        s = np.abs(np.sin(np.asarray(theta, dtype=float)))
        return self.amplitude * s**self.m

    def to_dict(self):
        return {"type": "donut", "m": self.m}


def _cosine_lobe_amplitude(lam: float) -> float:
    # 2(lam^2 - 1) / (lam sin(pi/2lam) - 1), rewritten so lam -> 1 is stable
    d = lam - 1.0
    if d == 0.0:
        return 4.0
    ratio = 2.0 * lam * math.sin(math.pi * d / (4.0 * lam)) ** 2 / d
    return 2.0 * (lam + 1.0) / (1.0 - ratio)


@dataclass(frozen=True)
class NarrowLobe(GainPattern):
    """End-fire/horn approximation: a cosine lobe of half-width ``pi / (2 lambda)``."""

    lam: float
    kind = "narrow"

    def __post_init__(self):
        if not self.lam >= 1.0:
            raise DomainError("narrow-lobe lambda must be >= 1")

    @property
    def amplitude(self) -> float:
        return _cosine_lobe_amplitude(self.lam)

    def support(self):
        return (0.0, math.pi / (2.0 * self.lam))

    def breakpoints(self):
        return (self.support()[1],) if self.lam > 1 else ()

    def gain_theta(self, theta):
        t = np.asarray(theta, dtype=float)
        edge = self.support()[1]
        return np.where(t < edge, self.amplitude * np.cos(self.lam * np.minimum(t, edge)), 0.0)

    def to_dict(self):
        return {"type": "narrow", "lambda": self.lam}


@dataclass(frozen=True)
class Sector(GainPattern):
    """Constant gain ``csc^2(nu pi / 2)`` inside a cone of half-angle ``nu pi``."""

    nu: float
    kind = "sector"

    def __post_init__(self):
        if not 0.0 < self.nu <= 1.0:
            raise DomainError("sector nu must lie in (0, 1]")

    @property
    def level(self) -> float:
        return 1.0 / math.sin(0.5 * self.nu * math.pi) ** 2

    def support(self):
        return (0.0, self.nu * math.pi)

    def breakpoints(self):
        return (self.nu * math.pi,) if self.nu < 1 else ()

    def gain_theta(self, theta):
        t = np.asarray(theta, dtype=float)
        return np.where(t < self.nu * math.pi, self.level, 0.0) if self.nu < 1 else np.full_like(t, self.level)

    def to_dict(self):
        return {"type": "sector", "nu": self.nu}


@dataclass(frozen=True)
class MultiLobe(GainPattern):
    """``n`` identical lobes along ``directions``.

    With ``sectorized=False`` each lobe is the cosine lobe of
    :class:`NarrowLobe` scaled by ``1/n``.  With ``sectorized=True`` each lobe
    is a flat cap of gain ``csc^2(pi / (6 lambda)) / n`` and half-angle
    ``pi / (3 lambda)``, i.e. the half-maximum cone of the cosine lobe.
    """

    n: int
    lam: float
    directions: OrientationSet
    sectorized: bool = False
    kind = "multilobe"
    symmetric = False

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError("multilobe n must be a positive integer")
        if not isinstance(self.directions, OrientationSet):
            object.__setattr__(self, "directions", OrientationSet(self.directions))
        if self.directions.n != self.n:
            raise DomainError(f"expected {self.n} lobe directions, got {self.directions.n}")
        if not self.lam >= 1.0:
            raise DomainError("multilobe lambda must be >= 1")
        if self.lam < math.sqrt(self.n * math.pi) / 3.0 - 1e-12:
            raise DomainError(
                f"lambda={self.lam} < sqrt(n pi)/3 = {math.sqrt(self.n * math.pi) / 3:.6g}: lobes overlap"
            )

    @property
    def lobe_half_angle(self) -> float:
        return math.pi / (3.0 * self.lam) if self.sectorized else math.pi / (2.0 * self.lam)

    @property
    def lobe_level(self) -> float:
        """Peak gain of one lobe."""
        if self.sectorized:
            return 1.0 / (self.n * math.sin(math.pi / (6.0 * self.lam)) ** 2)
        return _cosine_lobe_amplitude(self.lam) / self.n

    def lobe_gain(self, theta) -> np.ndarray:
        """Gain of a single lobe as a function of the angle from its axis."""
        t = np.asarray(theta, dtype=float)
        edge = self.lobe_half_angle
        if self.sectorized:
            return np.where(t < edge, self.lobe_level, 0.0)
        return np.where(t < edge, self.lobe_level * np.cos(self.lam * np.minimum(t, edge)), 0.0)

    def lobes_disjoint(self) -> bool:
        return self.directions.min_separation() >= 2.0 * self.lobe_half_angle

    def single_lobe(self) -> "MultiLobe":
        """The ``n = 1`` pattern with the same lobe shape."""
        return MultiLobe(1, max(self.lam, 1.0), OrientationSet([[0.0, 0.0, 1.0]]), self.sectorized)

    def support(self):
        return (0.0, self.lobe_half_angle)

    def gain_theta(self, theta):
        raise TypeError("multilobe gain depends on full direction; use gain()")

    def gain(self, directions):
        d = np.asarray(directions, dtype=float)
        cosang = np.clip(d @ self.directions.vectors.T, -1.0, 1.0)
        return self.lobe_gain(np.arccos(cosang)).sum(axis=-1)

    def max_gain(self):
        return self.lobe_level

    def to_dict(self):
        return {
            "type": "multilobe",
            "n": self.n,
            "lambda": self.lam,
            "sectorized": self.sectorized,
            "directions": self.directions.vectors.tolist(),
        }


def gain_at(pattern: GainPattern, direction) -> float:
    """Gain of ``pattern`` toward a single body-frame unit vector."""
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise DomainError("direction must be a unit vector")
    return float(pattern.gain(d[None, :])[0])


def _theta_breaks(pattern: GainPattern) -> tuple[float, ...]:
    if isinstance(pattern, MultiLobe):
        return ()
    return pattern.breakpoints()


def verify_normalization(pattern: GainPattern, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Integral of the gain over the sphere (should be 4 pi)."""
    if isinstance(pattern, MultiLobe):
        # G is a plain sum of lobes, each symmetric about its own axis
        lobe = integrate_1d(lambda t: np.sin(t) * pattern.lobe_gain(t), 0.0, pattern.lobe_half_angle, spec)
        return 2.0 * math.pi * pattern.n * lobe
    lo, hi = pattern.support()
    val = integrate_1d(lambda t: np.sin(t) * pattern.gain_theta(t), lo, hi, spec, _theta_breaks(pattern))
    return 2.0 * math.pi * val


def s_functional_quadrature(pattern: GainPattern, eta: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Connectivity functional by adaptive quadrature.

    Multi-lobe patterns are treated lobe by lobe, assuming no overlap.
    """
    if not eta > 0:
        raise DomainError("eta must be > 0")
    p = 3.0 / eta
    if isinstance(pattern, MultiLobe):
        lobe = integrate_1d(
            lambda t: np.sin(t) * pattern.lobe_gain(t) ** p, 0.0, pattern.lobe_half_angle, spec
        )
        return pattern.n * lobe
    lo, hi = pattern.support()
    return integrate_1d(lambda t: np.sin(t) * pattern.gain_theta(t) ** p, lo, hi, spec, _theta_breaks(pattern))


def _cardioid_closed(eps: float, eta: float) -> float:
    q = 1.0 + 3.0 / eta
    if eps < 1e-4:
        # odd binomial series; the next term is O(eps**4)
        return 2.0 + (q - 1.0) * (q - 2.0) * eps * eps / 3.0
    a = q * math.log1p(eps)
    if eps == 1.0:
        diff = math.exp(a)
    else:
        b = q * math.log1p(-eps)
        # e^a - e^b without cancellation for small eps
        diff = 2.0 * math.exp(0.5 * (a + b)) * math.sinh(0.5 * (a - b))
    return eta * diff / (eps * (eta + 3.0))


def _donut_closed(m: float, eta: float) -> float:
    p = 3.0 / eta
    log_amp = math.log(2.0) + log_gamma((3 + m) / 2) - log_gamma((2 + m) / 2) - 0.5 * math.log(math.pi)
    log_int = 0.5 * math.log(math.pi) + log_gamma(1 + p * m / 2) - log_gamma(1.5 + p * m / 2)
    return math.exp(p * log_amp + log_int)


def _sector_closed(nu: float, eta: float) -> float:
    return 2.0 * math.sin(0.5 * nu * math.pi) ** (2.0 - 6.0 / eta)


def s_functional_closed(pattern: GainPattern, eta: float) -> float:
    """Closed-form connectivity functional.

    Raises :class:`UnsupportedClosedForm` for :class:`NarrowLobe`.
    Multi-lobe values are ``n**(1 - 3/eta)`` times the single-lobe quadrature.
    """
    if not eta > 0:
        raise DomainError("eta must be > 0")
    if isinstance(pattern, Isotropic):
        return 2.0
    if isinstance(pattern, Cardioid):
        return _cardioid_closed(pattern.epsilon, eta)
    if isinstance(pattern, Donut):
        return _donut_closed(pattern.m, eta)
    if isinstance(pattern, Sector):
        return _sector_closed(pattern.nu, eta)
    if isinstance(pattern, MultiLobe):
        return pattern.n ** (1.0 - 3.0 / eta) * s_functional_quadrature(pattern.single_lobe(), eta)
    if isinstance(pattern, NarrowLobe):
        raise UnsupportedClosedForm("no trusted closed form for the narrow lobe; use quadrature")
    raise TypeError(f"unknown pattern {pattern!r}")


def s_functional(pattern: GainPattern, eta: float, spec: QuadratureSpec = DEFAULT_SPEC) -> tuple[float, str]:
    """Closed form where available, else quadrature.  Returns ``(value, method)``."""
    try:
        return s_functional_closed(pattern, eta), "closed"
    except UnsupportedClosedForm:
        return s_functional_quadrature(pattern, eta, spec), "quadrature"


def _half_max_interval(g, lo: float, hi: float, peak: float) -> tuple[float, float]:
    """Polar interval around ``peak`` on which ``g >= g(peak) / 2``."""
    half = 0.5 * float(g(peak))

    def f(t):
        return float(g(t)) - half

    # shrink the ends slightly inside the support so edge zeros count as "below"
    span = hi - lo
    a = lo + 1e-15 * span if lo > 0 else lo
    b = hi - 1e-15 * span if hi < math.pi else hi
    left = lo if (peak <= lo or f(a) >= 0) else optimize.brentq(f, a, peak, xtol=1e-15, rtol=1e-15)
    right = hi if (peak >= hi or f(b) >= 0) else optimize.brentq(f, peak, b, xtol=1e-15, rtol=1e-15)
    return left, right


def _cap_area(left: float, right: float) -> float:
    # 2 pi (cos l - cos r), written to keep precision for narrow rings
    return 4.0 * math.pi * math.sin(0.5 * (left + right)) * math.sin(0.5 * (right - left))


def half_max_solid_angle(pattern: GainPattern) -> float:
    """Solid angle on which the gain is at least half of its maximum (numerical)."""
    if isinstance(pattern, Isotropic) or (isinstance(pattern, Cardioid) and pattern.epsilon == 0):
        return FOUR_PI
    if isinstance(pattern, MultiLobe):
        left, right = _half_max_interval(lambda t: pattern.lobe_gain(t), 0.0, pattern.lobe_half_angle, 0.0)
        return pattern.n * _cap_area(left, right)
    if isinstance(pattern, Donut):
        # work in the offset from the equator so the root keeps full precision
        g = lambda d: pattern.gain_theta(0.5 * math.pi - d)  # noqa: E731
        _, width = _half_max_interval(g, 0.0, 0.5 * math.pi, 0.0)
        return 4.0 * math.pi * math.sin(width)
    lo, hi = pattern.support()
    left, right = _half_max_interval(lambda t: pattern.gain_theta(t), lo, hi, pattern.peak_theta())
    return _cap_area(left, right)


_REGISTRY = {
    "isotropic": lambda d: Isotropic(),
    "cardioid": lambda d: Cardioid(float(d["epsilon"])),
    "donut": lambda d: Donut(float(d["m"])),
    "narrow": lambda d: NarrowLobe(float(d["lambda"])),
    "sector": lambda d: Sector(float(d["nu"])),
    "multilobe": lambda d: MultiLobe(
        int(d["n"]),
        float(d["lambda"]),
        OrientationSet.normalized(d["directions"]),
        bool(d.get("sectorized", False)),
    ),
}


def pattern_from_dict(obj: dict[str, Any]) -> GainPattern:
    """Build a pattern from its JSON object form.

    Raises ``KeyError`` naming a missing field and ``DomainError`` for a
    parameter out of range.
    """
    if not isinstance(obj, dict):
        raise DomainError("pattern must be a JSON object")
    kind = obj.get("type")
    if kind not in _REGISTRY:
        raise DomainError(f"pattern.type must be one of {sorted(_REGISTRY)}, got {kind!r}")
    return _REGISTRY[kind](obj)


def pattern_to_dict(pattern: GainPattern) -> dict[str, Any]:
    return pattern.to_dict()
