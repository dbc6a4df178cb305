"""Thomson-problem point sets: ``n`` unit vectors of minimal Coulomb energy."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .gain import OrientationSet
from .specfn import DomainError

__all__ = [
    "ThomsonConvergenceError",
    "ThomsonResult",
    "coulomb_energy",
    "coulomb_energy_and_gradient",
    "descend",
    "thomson_points",
    "thomson_solve",
    "pairwise_angles",
    "write_thomson_file",
    "read_thomson_file",
]


class ThomsonConvergenceError(RuntimeError):
    pass


def coulomb_energy_and_gradient(x: np.ndarray) -> tuple[float, np.ndarray]:
    d = x[:, None, :] - x[None, :, :]
    r = np.linalg.norm(d, axis=-1)
    np.fill_diagonal(r, np.inf)
    if np.any(r == 0):
        raise DomainError("coincident points have infinite Coulomb energy")
    inv = 1.0 / r
    energy = 0.5 * float(inv.sum())
    grad = -np.einsum("ijk,ij->ik", d, inv**3)
    return energy, grad


def coulomb_energy(points) -> float:
    """Sum over pairs of ``1 / |x_i - x_j|``."""
    x = points.vectors if isinstance(points, OrientationSet) else np.asarray(points, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DomainError("need at least two points")
    return coulomb_energy_and_gradient(x)[0]


@dataclass
class ThomsonResult:
    points: OrientationSet
    energy: float
    grad_norm: float
    iterations: int
    converged: bool
    energies: list[float] = field(default_factory=list, repr=False)


def _tangent(x, g):
    return g - np.sum(g * x, axis=1, keepdims=True) * x


def descend(x0, tol: float = 1e-6, max_iter: int = 100_000, record: bool = False) -> ThomsonResult:
    """Projected gradient descent on the sphere with a monotone line search.

    Each accepted step lowers (or keeps) the energy.  Float rounding stalls
    the energy comparison at a tangential gradient norm of roughly 1e-8, so
    ``tol`` should stay above that.
    """
    x = np.asarray(x0, dtype=float)
    x = x / np.linalg.norm(x, axis=1, keepdims=True)
    energy, grad = coulomb_energy_and_gradient(x)
    step = 0.1 / max(1, x.shape[0])
    trace = [energy] if record else []
    gnorm = math.inf
    it = 0
    for it in range(max_iter):
        gt = _tangent(x, grad)
        gnorm = float(np.linalg.norm(gt))
        if gnorm <= tol:
            break
        while True:
            y = x - step * gt
            y /= np.linalg.norm(y, axis=1, keepdims=True)
            e_new, g_new = coulomb_energy_and_gradient(y)
            if e_new <= energy:
                break
            step *= 0.5
            if step < 1e-300:
                # cannot make progress in floating point
                return ThomsonResult(OrientationSet.normalized(x), energy, gnorm, it, gnorm <= tol, trace)
        x, energy, grad = y, e_new, g_new
        if record:
            trace.append(energy)
        step *= 1.5
    return ThomsonResult(OrientationSet.normalized(x), energy, gnorm, it, gnorm <= tol, trace)


def _restart(n, seed, restart, tol, max_iter):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n, restart)))
    x0 = rng.normal(size=(n, 3))
    return descend(x0, tol=tol, max_iter=max_iter)


def thomson_solve(
    n: int,
    restarts: int = 20,
    tol: float = 1e-6,
    seed: int = 0,
    max_iter: int = 100_000,
    workers: int = 1,
) -> ThomsonResult:
    """Best of ``restarts`` independent descents from random starts.

    Results depend only on ``(n, restarts, tol, seed)``, not on ``workers``.
    """
    if n < 2:
        raise DomainError("thomson needs n >= 2")
    if restarts < 1:
        raise DomainError("restarts must be >= 1")
    args = [(n, seed, k, tol, max_iter) for k in range(restarts)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda a: _restart(*a), args))
    else:
        results = [_restart(*a) for a in args]
    done = [r for r in results if r.converged]
    if not done:
        raise ThomsonConvergenceError(f"no restart reached gradient norm {tol} for n={n}")
    # first restart within 1e-9 of the lowest energy, so ties resolve by index
    e_min = min(r.energy for r in done)
    return next(r for r in done if r.energy <= e_min + 1e-9)


def thomson_points(n: int, restarts: int = 20, tol: float = 1e-6, seed: int = 0) -> OrientationSet:
    return thomson_solve(n, restarts=restarts, tol=tol, seed=seed).points


def pairwise_angles(points) -> np.ndarray:
    """Sorted pairwise angles (radians) between the vectors."""
    x = points.vectors if isinstance(points, OrientationSet) else np.asarray(points, dtype=float)
    i, j = np.triu_indices(x.shape[0], 1)
    return np.sort(np.arccos(np.clip(np.sum(x[i] * x[j], axis=1), -1.0, 1.0)))


def write_thomson_file(path, points, comments: Sequence[str] = ()) -> None:
    """Plain text: ``n`` on the first line, then one ``x y z`` row per point.

    ``comments`` are appended as ``#`` lines, which the reader skips.
    """
    x = points.vectors if isinstance(points, OrientationSet) else np.asarray(points, dtype=float)
    lines = [str(x.shape[0])]
    lines += [" ".join(f"{c:.12g}" for c in row) for row in x]
    lines += [f"# {c}" for c in comments]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_thomson_file(path) -> OrientationSet:
    text = Path(path).read_text(encoding="utf-8")
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise DomainError(f"{path}: empty Thomson file")
    n = int(rows[0][0])
    body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    if body.shape != (n, 3):
        raise DomainError(f"{path}: expected {n} rows of 3 coordinates, got shape {body.shape}")
    return OrientationSet.normalized(body)
