"""Bounded domains and corner connectivity masses.

A node sits at the corner of a cuboid (or square) whose edges run along the
positive coordinate axes.  For rotationally symmetric patterns the corner
mass follows from the orientation-dependent octant integral of
``G**(3/eta)``; for multi-sector patterns each lobe is truncated at the
distance ``L_hat`` to the far boundary along its axis.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize, special
from scipy.spatial.transform import Rotation

from .analytic import PathLossModel, radial_prefactor
from .gain import GainPattern, Isotropic, MultiLobe, OrientationSet, s_functional
from .specfn import DEFAULT_SPEC, DomainError, QuadratureSpec, integrate_patch, lower_incomplete_gamma

__all__ = [
    "OverlapError",
    "Domain",
    "CornerSpec",
    "OrientationGrid",
    "CornerMinimum",
    "MultisectorMinimum",
    "ray_exit_distance",
    "corner_gain_integral",
    "min_corner_gain_integral",
    "corner_mass",
    "sectorized_lobe_gain",
    "multisector_corner_mass_3d",
    "min_multisector_corner_mass",
    "blind_spot_margin",
    "multisector_gain_2d",
    "multisector_corner_mass_2d",
    "min_multisector_corner_mass_2d",
    "default_workers",
]


class OverlapError(DomainError):
    """Lobe width parameter too small: neighbouring lobes would overlap."""


def default_workers() -> int:
    raw = os.environ.get("ANISO_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``[0, L_x] x [0, L_y] (x [0, L_z])``."""

    kind: str
    lengths: tuple[float, ...]
    periodic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))
        dim = {"cuboid": 3, "square2d": 2}.get(self.kind)
        if dim is None:
            raise DomainError("domain kind must be 'cuboid' or 'square2d'")
        if len(self.lengths) != dim:
            raise DomainError(f"{self.kind} needs {dim} side lengths")
        if any(not v > 0 for v in self.lengths):
            raise DomainError("side lengths must be positive")

    @classmethod
    def cube(cls, side: float, periodic: bool = False) -> "Domain":
        return cls("cuboid", (side, side, side), periodic)

    @classmethod
    def square(cls, side: float) -> "Domain":
        return cls("square2d", (side, side))

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def to_dict(self):
        return {"kind": self.kind, "lengths": list(self.lengths), "periodic": self.periodic}

    @classmethod
    def from_dict(cls, d) -> "Domain":
        return cls(d["kind"], tuple(d["lengths"]), bool(d.get("periodic", False)))


@dataclass(frozen=True)
class CornerSpec:
    apex: tuple[float, ...] = (0.0, 0.0, 0.0)
    omega_b: float = math.pi / 2

    def __post_init__(self):
        if not 0 < self.omega_b <= 4 * math.pi:
            raise DomainError("omega_B must lie in (0, 4 pi]")


@dataclass(frozen=True)
class OrientationGrid:
    """Search grid over boresight directions or over rotations (ZYZ Euler angles).

    Steps are in degrees.  The sphere grid covers ``theta`` in ``[0, 180]``
    and ``phi`` in ``[0, 360)``; the Euler grid covers the full rotation group.
    """

    step_theta: float = 5.0
    step_phi: float = 5.0
    step_euler: float = 2.0

    def __post_init__(self):
        if min(self.step_theta, self.step_phi, self.step_euler) <= 0:
            raise DomainError("grid steps must be positive")

    def sphere_angles(self) -> tuple[np.ndarray, np.ndarray]:
        th = np.deg2rad(np.arange(0.0, 180.0 + 1e-9, self.step_theta))
        if th[-1] < math.pi - 1e-12:
            th = np.append(th, math.pi)
        ph = np.deg2rad(np.arange(0.0, 360.0 - 1e-9, self.step_phi))
        return th, ph

    def euler_axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s = self.step_euler
        a = np.deg2rad(np.arange(0.0, 360.0 - 1e-9, s))
        b = np.deg2rad(np.arange(0.0, 180.0 + 1e-9, s))
        if b[-1] < math.pi - 1e-12:
            b = np.append(b, math.pi)
        return a, b, a.copy()


def _unit_from_angles(theta, phi):
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def ray_exit_distance(domain: Domain, origin, direction):
    """Distance from ``origin`` along ``direction`` to the boundary of ``domain``.

    Zero when the direction leaves the domain immediately.  Vectorised over a
    leading axis of ``direction``.
    """
    if domain.periodic:
        raise DomainError("exit distances are undefined on a periodic domain")
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    hi = np.asarray(domain.lengths)
    if o.shape[-1] != domain.dim or d.shape[-1] != domain.dim:
        raise DomainError("origin/direction dimension does not match the domain")
    if np.any(o < -1e-12) or np.any(o > hi + 1e-12):
        raise DomainError("origin must lie in the domain")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = np.where(d > 0, (hi - o) / d, np.where(d < 0, -o / d, np.inf))
    out = np.maximum(t.min(axis=-1), 0.0)
    return float(out) if out.ndim == 0 else out


def _corner_exit(side: float, d: np.ndarray) -> np.ndarray:
    # exit distance from the corner of a cube/square of side ``side`` (fast path)
    dmin = d.min(axis=-1)
    dmax = d.max(axis=-1)
    with np.errstate(divide="ignore"):
        return np.where(dmin < 0, 0.0, side / dmax)


def _require_symmetric(pattern: GainPattern):
    if not pattern.symmetric:
        raise DomainError("corner integrals need a rotationally symmetric pattern")


def corner_gain_integral(
    pattern: GainPattern, orientation, eta: float, spec: QuadratureSpec = DEFAULT_SPEC
) -> float:
    """Octant integral of ``sin(theta) G(chi)**(3/eta)``, ``chi`` the angle to the boresight."""
    _require_symmetric(pattern)
    v = np.asarray(orientation, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise DomainError("orientation must be a unit vector")
    p = 3.0 / eta

    def f(theta, phi):
        d = _unit_from_angles(theta, phi)
        chi = np.arccos(np.clip(d @ v, -1.0, 1.0))
        return np.sin(theta) * pattern.gain_theta(chi) ** p

    half = 0.5 * math.pi
    return integrate_patch(f, (0.0, half), (0.0, half), spec)


@dataclass(frozen=True)
class CornerMinimum:
    value: float
    orientation: np.ndarray


def _octant_rule(order: int = 48):
    x, w = np.polynomial.legendre.leggauss(order)
    t = 0.25 * math.pi * (x + 1.0)
    wt = 0.25 * math.pi * w
    T, P = np.meshgrid(t, t, indexing="ij")
    W = np.outer(wt, wt) * np.sin(T)
    return _unit_from_angles(T, P).reshape(-1, 3), W.ravel()


def _octant_integral_batch(pattern, orientations, eta, nodes, weights):
    p = 3.0 / eta
    cos_chi = np.clip(orientations @ nodes.T, -1.0, 1.0)
    return (pattern.gain_theta(np.arccos(cos_chi)) ** p) @ weights


def min_corner_gain_integral(
    pattern: GainPattern,
    eta: float,
    grid: OrientationGrid = OrientationGrid(),
    spec: QuadratureSpec = DEFAULT_SPEC,
    shrink_steps: int = 1,
) -> CornerMinimum:
    """Minimum of :func:`corner_gain_integral` over boresight orientations.

    A coarse sphere grid is scanned with a fixed product rule, then the search
    window is shrunk around the best point ``shrink_steps`` times; the
    reported value is recomputed adaptively at the final orientation.
    """
    _require_symmetric(pattern)
    nodes, weights = _octant_rule()
    th, ph = grid.sphere_angles()
    T, P = np.meshgrid(th, ph, indexing="ij")
    cand = _unit_from_angles(T, P).reshape(-1, 3)
    vals = _octant_integral_batch(pattern, cand, eta, nodes, weights)
    k = int(np.argmin(vals))
    best_t, best_p = T.ravel()[k], P.ravel()[k]
    dt, dp = np.deg2rad(grid.step_theta), np.deg2rad(grid.step_phi)
    for _ in range(shrink_steps):
        tt = np.clip(best_t + np.linspace(-dt, dt, 21), 0.0, math.pi)
        pp = best_p + np.linspace(-dp, dp, 21)
        T2, P2 = np.meshgrid(tt, pp, indexing="ij")
        cand = _unit_from_angles(T2, P2).reshape(-1, 3)
        vals = _octant_integral_batch(pattern, cand, eta, nodes, weights)
        k = int(np.argmin(vals))
        best_t, best_p = T2.ravel()[k], P2.ravel()[k]
        dt, dp = dt / 10.0, dp / 10.0
    v = _unit_from_angles(best_t, best_p)
    return CornerMinimum(corner_gain_integral(pattern, v, eta, spec), v)


def _orientation_average(pattern: GainPattern, func, order: int = 64):
    """``(1/4pi) integral f(G_j) dOmega_j`` over a random orientation of node j.

    ``func`` maps an array of gains (broadcast along a trailing axis) to values
    with ``func(0) == 0``.
    """
    if isinstance(pattern, MultiLobe):
        lo, hi, gfun, mult = 0.0, pattern.lobe_half_angle, pattern.lobe_gain, pattern.n
        pieces = [(lo, hi)]
    else:
        lo, hi = pattern.support()
        gfun, mult = pattern.gain_theta, 1
        edges = sorted({lo, hi, *(b for b in pattern.breakpoints() if lo < b < hi)})
        pieces = list(zip(edges[:-1], edges[1:]))
    x, w = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for a, b in pieces:
        t = 0.5 * (b - a) * (x + 1.0) + a
        wt = 0.5 * (b - a) * w * np.sin(t)
        total = total + func(gfun(t)) @ wt
    return 0.5 * mult * total


def corner_mass(
    pattern_i: GainPattern,
    orientation_i,
    pattern_j: GainPattern,
    model: PathLossModel,
    truncation: float = math.inf,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> float:
    """Connectivity mass of a node at a right-angled corner.

    With ``truncation`` infinite the radial integral runs to infinity and the
    result factorises into ``Gamma(3/eta)/(2 eta beta^(3/eta)) * I * S[G_j]``.
    A finite ``truncation`` is the side of the cube the corner belongs to; each
    ray is then cut at its exit distance and the angular integrals are done
    by quadrature.
    """
    _require_symmetric(pattern_i)
    eta, beta = model.eta, model.beta
    if math.isinf(truncation):
        i_val = corner_gain_integral(pattern_i, orientation_i, eta, spec)
        s_j = s_functional(pattern_j, eta, spec)[0]
        return 0.5 * radial_prefactor(model) * i_val * s_j
    if not truncation > 0:
        raise DomainError("truncation must be positive")

    v = np.asarray(orientation_i, dtype=float)
    p = 3.0 / eta
    gam = special.gamma(p)

    def radial(q, L):
        # integral_0^L r^2 exp(-beta r^eta / q) dr, zero where q == 0
        qs = np.where(q > 0, q, 1.0)
        val = (qs / beta) ** p * special.gammainc(p, beta * L**eta / qs) * gam / eta
        return np.where(q > 0, val, 0.0)

    def f(theta, phi):
        d = _unit_from_angles(theta, phi)
        L = _corner_exit(truncation, d)
        g_i = pattern_i.gain_theta(np.arccos(np.clip(d @ v, -1.0, 1.0)))
        if isinstance(pattern_j, Isotropic):
            avg = radial(g_i, L)
        else:
            avg = _orientation_average(pattern_j, lambda gj: radial(g_i[:, None] * gj[None, :], L[:, None]))
        return np.sin(theta) * avg

    half = 0.5 * math.pi
    return integrate_patch(
        f, (0.0, half), (0.0, half), spec, theta_breaks=_CUBE_THETA_KINKS, phi_breaks=_cube_phi_kinks
    )


# where the exit face of a ray from the cube corner changes
_CUBE_THETA_KINKS = (0.25 * math.pi, math.atan(math.sqrt(2.0)))


def _cube_phi_kinks(theta: float) -> tuple[float, ...]:
    pts = [0.25 * math.pi]
    s, c = math.sin(theta), math.cos(theta)
    if s > c > 0:
        r = c / s
        pts += [math.acos(r), math.asin(r)]
    return tuple(pts)


# ---------------------------------------------------------------- multi-sector


def sectorized_lobe_gain(n: int, lam: float) -> float:
    """Cap gain ``csc^2(pi/(6 lambda)) / n`` of an ``n``-lobe sectorized pattern."""
    return 1.0 / (n * math.sin(math.pi / (6.0 * lam)) ** 2)


def _check_lobes_3d(n: int, lam: float):
    if n < 2:
        raise DomainError("multi-sector patterns need n >= 2")
    bound = math.sqrt(n * math.pi) / 3.0
    if lam < bound - 1e-12:
        raise OverlapError(f"lambda={lam} < sqrt(n pi)/3 = {bound:.6g}")


def _multisector_3d_values(dirs: np.ndarray, n: int, lam: float, model: PathLossModel, side: float):
    """Corner mass for a batch of lobe-direction sets ``dirs`` of shape ``(m, n, 3)``."""
    eta, beta = model.eta, model.beta
    g = sectorized_lobe_gain(n, lam)
    s = 3.0 / eta
    pref = 4.0 * math.pi * g ** (2 * s - 2.0) / (n * eta * beta**s) * special.gamma(s)
    L = _corner_exit(side, dirs)
    terms = np.zeros_like(L)
    inside = L > 0
    terms[inside] = special.gammainc(s, beta * L[inside] ** eta / g**2)
    return pref * terms.sum(axis=-1)


def multisector_corner_mass_3d(
    n: int,
    lam: float,
    orientations: OrientationSet,
    model: PathLossModel,
    cube_side: float = 1.0,
) -> float:
    """Truncated corner mass of an ``n``-lobe sectorized pattern.

    Each lobe contributes ``gamma(3/eta, beta L_hat^eta / g^2)``, where
    ``L_hat`` is the exit distance from the corner along the lobe axis (zero
    for a lobe pointing out of the cube).
    """
    _check_lobes_3d(n, lam)
    if not isinstance(orientations, OrientationSet):
        orientations = OrientationSet(orientations)
    if orientations.n != n:
        raise DomainError(f"expected {n} orientations, got {orientations.n}")
    g = sectorized_lobe_gain(n, lam)
    s = 3.0 / model.eta
    L = _corner_exit(cube_side, orientations.vectors)
    terms = lower_incomplete_gamma(s, model.beta * L**model.eta / g**2)
    pref = 4.0 * math.pi * g ** (2 * s - 2.0) / (n * model.eta * model.beta**s)
    return float(pref * np.sum(terms))


def _margins(dirs):
    # >= 0 iff every lobe axis has a non-positive component (all outside the open octant)
    return -dirs.min(axis=-1).max(axis=-1)


@dataclass(frozen=True)
class MultisectorMinimum:
    value: float
    euler_zyz: np.ndarray
    rotation: np.ndarray
    blind_spot: bool
    margin: float
    grid_value: float


def _rotate(euler, base):
    return Rotation.from_euler("ZYZ", euler).apply(base)


def min_multisector_corner_mass(
    n: int,
    lam: float,
    model: PathLossModel,
    cube_side: float = 1.0,
    euler_grid: OrientationGrid = OrientationGrid(),
    base_configuration: OrientationSet | None = None,
    refine: int = 4,
    workers: int | None = None,
) -> MultisectorMinimum:
    """Minimum corner mass over rigid rotations of ``base_configuration``.

    The full ZYZ Euler grid is scanned (chunked by the first angle, optionally
    in parallel with deterministic reduction).  The ``refine`` best grid
    rotations seed local Nelder-Mead searches of the mass and of the
    blind-spot margin ``max over rotations of min_k (-min_i (R v_k)_i)``.
    A non-negative margin means some rotation points every lobe axis out of
    the corner, i.e. the minimum mass is exactly zero.
    """
    _check_lobes_3d(n, lam)
    if base_configuration is None:
        from .thomson import thomson_points

        base_configuration = thomson_points(n)
    base = base_configuration.vectors
    if base.shape[0] != n:
        raise DomainError(f"base configuration has {base.shape[0]} points, expected {n}")
    a_ax, b_ax, c_ax = euler_grid.euler_axes()
    B, C = np.meshgrid(b_ax, c_ax, indexing="ij")
    bc = np.stack([B.ravel(), C.ravel()], axis=1)
    keep = max(1, refine)

    def scan(ia):
        eul = np.column_stack([np.full(len(bc), a_ax[ia]), bc])
        R = Rotation.from_euler("ZYZ", eul).as_matrix()
        dirs = np.einsum("mij,kj->mki", R, base)
        vals = _multisector_3d_values(dirs, n, lam, model, cube_side)
        marg = _margins(dirs)
        iv = np.argsort(vals, kind="stable")[:keep]
        im = np.argsort(-marg, kind="stable")[:keep]
        return vals[iv], eul[iv], marg[im], eul[im]

    nworkers = default_workers() if workers is None else workers
    if nworkers > 1:
        with ThreadPoolExecutor(nworkers) as pool:
            parts = list(pool.map(scan, range(len(a_ax))))
    else:
        parts = [scan(i) for i in range(len(a_ax))]

    vals = np.concatenate([p[0] for p in parts])
    veul = np.concatenate([p[1] for p in parts])
    margs = np.concatenate([p[2] for p in parts])
    meul = np.concatenate([p[3] for p in parts])
    order_v = np.argsort(vals, kind="stable")[:keep]
    order_m = np.argsort(-margs, kind="stable")[:keep]
    grid_value = float(vals[order_v[0]])

    best_val, best_eul = grid_value, veul[order_v[0]]
    best_margin, margin_eul = float(margs[order_m[0]]), meul[order_m[0]]

    def mass_at(e):
        return float(_multisector_3d_values(_rotate(e, base)[None], n, lam, model, cube_side)[0])

    def neg_margin(e):
        return -float(_margins(_rotate(e, base)[None])[0])

    opts = dict(xatol=1e-9, fatol=1e-13, maxiter=3000)
    if refine > 0:
        for k in order_m:
            res = optimize.minimize(neg_margin, meul[k], method="Nelder-Mead", options=opts)
            if -res.fun > best_margin:
                best_margin, margin_eul = float(-res.fun), res.x
        if best_margin < 0 and best_val > 0:
            for k in order_v:
                res = optimize.minimize(mass_at, veul[k], method="Nelder-Mead", options=opts)
                if res.fun < best_val:
                    best_val, best_eul = float(res.fun), res.x

    if best_margin >= 0:
        val = mass_at(margin_eul)
        if val == 0.0:
            best_val, best_eul = 0.0, margin_eul
    best_eul = np.asarray(best_eul, dtype=float)
    return MultisectorMinimum(
        value=best_val,
        euler_zyz=best_eul,
        rotation=Rotation.from_euler("ZYZ", best_eul).as_matrix(),
        blind_spot=best_val == 0.0,
        margin=best_margin,
        grid_value=grid_value,
    )


def blind_spot_margin(points: OrientationSet, rotation) -> float:
    """Margin of a rotated configuration; ``>= 0`` means no lobe axis enters the octant."""
    dirs = points.vectors @ np.asarray(rotation).T
    return float(_margins(dirs[None])[0])


# ---------------------------------------------------------------- 2D


def _check_lobes_2d(n: int, lam: float):
    if n < 2:
        raise DomainError("multi-sector patterns need n >= 2")
    if lam < 3 * n:
        raise OverlapError(f"2D lobes overlap unless lambda >= 3n = {3 * n}")


def multisector_gain_2d(n: int, lam: float) -> float:
    """Sector gain ``3 lambda / n`` of a lobe of angular width ``2 pi / (3 lambda)``."""
    return 3.0 * lam / n


def _multisector_2d_values(offsets, n, lam, model, side):
    eta, beta = model.eta, model.beta
    g = multisector_gain_2d(n, lam)
    s = 2.0 / eta
    ang = np.asarray(offsets, dtype=float)[..., None] + 2.0 * math.pi * np.arange(1, n + 1) / n
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    L = _corner_exit(side, dirs)
    terms = np.zeros_like(L)
    inside = L > 0
    terms[inside] = special.gammainc(s, beta * L[inside] ** eta / g**2)
    pref = 2.0 * math.pi * g ** (2 * s - 2.0) / (n * eta * beta**s) * special.gamma(s)
    return pref * terms.sum(axis=-1)


def multisector_corner_mass_2d(
    n: int, lam: float, offset_x: float, model: PathLossModel, square_side: float = 1.0
) -> float:
    """Corner mass of an ``n``-sector 2D pattern with lobes at ``2 pi k / n + x``."""
    _check_lobes_2d(n, lam)
    if not 0.0 <= offset_x < 2.0 * math.pi / n + 1e-12:
        raise DomainError("offset_x must lie in [0, 2 pi / n)")
    return float(_multisector_2d_values(offset_x, n, lam, model, square_side))


def min_multisector_corner_mass_2d(
    n: int, lam: float, model: PathLossModel, square_side: float = 1.0, grid_points: int = 4096
) -> tuple[float, float]:
    """``(min value, argmin offset)`` over the lobe offset ``x``."""
    _check_lobes_2d(n, lam)
    period = 2.0 * math.pi / n
    xs = np.arange(grid_points) * (period / grid_points)
    vals = _multisector_2d_values(xs, n, lam, model, square_side)
    k = int(np.argmin(vals))
    best_x, best = float(xs[k]), float(vals[k])
    if best > 0:
        h = period / grid_points
        lo, hi = max(0.0, best_x - h), min(period, best_x + h)
        res = optimize.minimize_scalar(
            lambda x: float(_multisector_2d_values(x, n, lam, model, square_side)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-12},
        )
        if res.fun < best:
            best, best_x = float(res.fun), float(res.x)
    return best, best_x
