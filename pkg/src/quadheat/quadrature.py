"""Tensor-product integration on truncated boxes.

Trapezoid and Gauss-Legendre rules over [-R, R]^d for smooth integrands with
known Gaussian decay.  The tail_rate field records the decay exponent of the
integrand and feeds an a priori bound on the mass outside the box, which
callers use to refuse under-resolved requests.

Reductions sum node values with numpy's pairwise summation in a fixed order,
so repeated runs are bit-stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

NODE_BUDGET = 10**8
RULES = ("trapezoid", "gauss_legendre")


@dataclass(frozen=True)
class QuadratureSpec:
    """Box half-width and node count per axis, rule, and integrand decay rate."""

    half_width: float
    points: int
    rule: str = "trapezoid"
    tail_rate: float = 1.0

    def __post_init__(self):
        if self.points < 8:
            raise ValueError(f"need at least 8 points per axis, got {self.points}")
        if self.half_width <= 0.0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}, expected one of {RULES}")
        if self.tail_rate <= 0.0:
            raise ValueError(f"tail_rate must be positive, got {self.tail_rate}")


@lru_cache(maxsize=64)
def _leggauss(points: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(points)


def axis_nodes(spec: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the one-dimensional rule on [-R, R]."""
    R = spec.half_width
    if spec.rule == "trapezoid":
        x = np.linspace(-R, R, spec.points)
        h = x[1] - x[0]
        w = np.full(spec.points, h)
        w[0] = w[-1] = 0.5 * h
        return x, w
    x, w = _leggauss(spec.points)
    return R * x, R * w.copy()


def _node_count(spec: QuadratureSpec, d: int) -> int:
    count = spec.points**d
    if count > NODE_BUDGET:
        raise ValueError(
            f"{spec.points}^{d} = {count} nodes exceeds the budget {NODE_BUDGET}"
        )
    return count


def tensor_nodes(spec: QuadratureSpec, d: int) -> tuple[np.ndarray, np.ndarray]:
    """All nodes of the tensor rule as an (N, d) array with their weights."""
    _node_count(spec, d)
    x, w = axis_nodes(spec)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*([w] * d), indexing="ij")
    wts = np.ones(pts.shape[0])
    for g in wgrids:
        wts *= g.ravel()
    return pts, wts


def integrate(f, spec: QuadratureSpec, d: int) -> complex:
    """Tensor rule applied to a vectorized integrand over [-R, R]^d.

    ``f`` maps an (N, d) array of points to N complex values.
    """
    value, _ = integrate_with_estimate(f, spec, d)
    return value


def integrate_with_estimate(f, spec: QuadratureSpec, d: int) -> tuple[complex, float]:
    """Integral value plus the a priori tail bound scaled by max |f| on nodes."""
    pts, wts = tensor_nodes(spec, d)
    vals = np.asarray(f(pts))
    if vals.shape != (pts.shape[0],):
        raise ValueError(
            f"integrand returned shape {vals.shape}, expected ({pts.shape[0]},)"
        )
    value = complex(np.sum(wts * vals))
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    return value, tail_bound(spec, scale, d=d)


def tail_bound(spec: QuadratureSpec, boundary_max: float, d: int = 2) -> float:
    """Conservative mass bound outside the box for a tail_rate-decaying integrand.

    ``boundary_max`` is the magnitude scale of the integrand (its overall
    max); the bound is boundary_max * Vol(boundary) * exp(-tail_rate R^2)
    with Vol(boundary) = 2 d (2R)^{d-1}.
    """
    R = spec.half_width
    area = 2.0 * d * (2.0 * R) ** (d - 1)
    return boundary_max * area * np.exp(-spec.tail_rate * R * R)
