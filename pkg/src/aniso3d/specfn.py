"""Special functions and adaptive quadrature used by the analytic formulas.

Everything here is a pure function of its arguments.  Integrands handed to
:func:`integrate_1d` / :func:`integrate_patch` must accept numpy arrays and
return arrays of the same shape.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

__all__ = [
    "DomainError",
    "QuadratureError",
    "QuadratureSpec",
    "DEFAULT_SPEC",
    "gamma_fn",
    "log_gamma",
    "lower_incomplete_gamma",
    "integrate_1d",
    "integrate_patch",
    "radial_cutoff",
]


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature ran out of subdivisions before meeting tolerance."""


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    max_subdivisions: int = 2000

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise DomainError("tolerances must be non-negative")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise DomainError("at least one of abs_tol, rel_tol must be positive")
        if int(self.max_subdivisions) < 1:
            raise DomainError("max_subdivisions must be >= 1")


DEFAULT_SPEC = QuadratureSpec()


def gamma_fn(x: float) -> float:
    """Gamma function for positive real arguments."""
    if not x > 0:
        raise DomainError(f"gamma_fn requires x > 0, got {x!r}")
    return math.gamma(x)


def log_gamma(x: float) -> float:
    if not x > 0:
        raise DomainError(f"log_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def lower_incomplete_gamma(s, x):
    r"""Lower incomplete gamma :math:`\gamma(s, x) = \int_0^x t^{s-1} e^{-t} dt`.

    Vectorised over ``x`` (and ``s``).  Returns a float for scalar input.
    """
    s_arr = np.asarray(s, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    if np.any(~(s_arr > 0)):
        raise DomainError("lower_incomplete_gamma requires s > 0")
    if np.any(~(x_arr >= 0)):
        raise DomainError("lower_incomplete_gamma requires x >= 0")
    out = special.gammainc(s_arr, x_arr) * special.gamma(s_arr)
    if out.ndim == 0:
        return float(out)
    return out


# Gauss-Kronrod 7/15 nodes on [-1, 1] (positive half; symmetric).
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_KWEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes (1, 3, 5, 7 counted from the end).
_GWEIGHTS = np.zeros(15)
_GWEIGHTS[[1, 3, 5]] = _WG[:3]
_GWEIGHTS[[13, 11, 9]] = _WG[:3]
_GWEIGHTS[7] = _WG[3]


def _gk15(f, a, b):
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c + h * _NODES
    y = np.asarray(f(x), dtype=float)
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape)
    if not np.all(np.isfinite(y)):
        raise QuadratureError(f"integrand not finite on [{a}, {b}]")
    kronrod = h * float(_KWEIGHTS @ y)
    gauss = h * float(_GWEIGHTS @ y)
    return kronrod, abs(kronrod - gauss)


def integrate_1d(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
    breakpoints: Sequence[float] = (),
) -> float:
    """Globally adaptive Gauss-Kronrod (7/15) integration of ``f`` on ``[a, b]``.

    ``breakpoints`` inside ``(a, b)`` seed the initial partition, which is
    how callers deal with gain patterns that have a support edge.

    Raises
    ------
    QuadratureError
        If ``spec.max_subdivisions`` intervals are used without reaching
        ``max(abs_tol, rel_tol * |I|)``.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("integrate_1d needs finite limits; truncate improper integrals first")
    if b < a:
        raise DomainError("integrate_1d requires a <= b")
    if a == b:
        return 0.0

    edges = sorted({a, b, *(p for p in breakpoints if a < p < b)})
    heap = []
    total = 0.0
    err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = _gk15(f, lo, hi)
        total += val
        err += e
        heapq.heappush(heap, (-e, lo, hi, val))
    n_intervals = len(heap)

    while err > max(spec.abs_tol, spec.rel_tol * abs(total)):
        if n_intervals >= spec.max_subdivisions:
            raise QuadratureError(
                f"no convergence after {n_intervals} subdivisions "
                f"(estimate {total:.12g}, error {err:.3g})"
            )
        neg_e, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise QuadratureError("interval width reached machine precision")
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        total += v1 + v2 - val
        err += e1 + e2 + neg_e
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        n_intervals += 1
        if n_intervals % 64 == 0:
            # re-sum to stop drift from the running updates
            total = sum(item[3] for item in heap)
            err = sum(-item[0] for item in heap)
    return total


def integrate_patch(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    theta_range: tuple[float, float],
    phi_range: tuple[float, float],
    spec: QuadratureSpec = DEFAULT_SPEC,
    theta_breaks: Sequence[float] = (),
    phi_breaks: Sequence[float] | Callable[[float], Sequence[float]] = (),
) -> float:
    """Nested adaptive integral of ``f(theta, phi)`` over a (theta, phi) patch.

    No ``sin(theta)`` Jacobian is applied; include it in ``f`` if you want
    solid-angle measure.  ``phi_breaks`` may be a callable of ``theta`` when
    the inner integrand's kinks move with the outer variable.
    """
    t0, t1 = theta_range
    p0, p1 = phi_range
    if not (0.0 <= t0 <= t1 <= math.pi + 1e-12 and 0.0 <= p0 <= p1 <= 2 * math.pi + 1e-12):
        raise DomainError("patch must lie within [0, pi] x [0, 2 pi]")
    # inner tolerance is tightened so the outer rule sees a smooth function
    inner = QuadratureSpec(spec.abs_tol * 0.1, spec.rel_tol * 0.1, spec.max_subdivisions)

    def outer(thetas):
        out = np.empty_like(thetas)
        for k, t in enumerate(thetas):
            brk = phi_breaks(t) if callable(phi_breaks) else phi_breaks
            out[k] = integrate_1d(lambda ph: f(np.full_like(ph, t), ph), p0, p1, inner, brk)
        return out

    return integrate_1d(outer, t0, t1, spec, theta_breaks)


def radial_cutoff(beta: float, eta: float, max_gain_product: float, abs_tol: float = 1e-10) -> float:
    """Radius past which ``exp(-beta r**eta / q)`` is below ``abs_tol * 1e-3``.

    ``q`` is the largest gain product that can occur.
    """
    if beta <= 0 or eta <= 0 or max_gain_product <= 0 or abs_tol <= 0:
        raise DomainError("radial_cutoff requires positive arguments")
    level = -math.log(abs_tol * 1e-3)
    return (max_gain_product * level / beta) ** (1.0 / eta)
