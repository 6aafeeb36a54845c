"""Single-layer densities on a circle and their Dirac-mass approximation.

A density phi on the circle is replaced by sum_i lambda_i delta_{x_i} with
lambda_i the integral of phi over arc i and x_i a point of that arc.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_legendre

from .grid2d import (CartesianGrid, FeField, _grad_at, _value_at, basis_values, locate,
                     seminorm_h1)

__all__ = [
    "Circle",
    "CurvePartition",
    "LayerDensity",
    "DiracLayer",
    "partition_circle",
    "layer_weights",
    "assemble_dirac_load",
    "dirac_matrix",
    "grid_crossings",
    "discrete_trace_seminorm",
    "pairing_exact",
    "trace_ratio",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Circle:
    center: tuple = (0.5, 0.5)
    radius: float = 0.3

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        cx, cy = self.center
        object.__setattr__(self, "center", (float(cx), float(cy)))

    @property
    def margin(self) -> float:
        """Distance from the circle to the boundary of the unit square."""
        cx, cy = self.center
        return min(cx, cy, 1 - cx, 1 - cy) - self.radius

    @property
    def length(self) -> float:
        return TWO_PI * self.radius

    def point(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        cx, cy = self.center
        return np.stack([cx + self.radius * np.cos(theta), cy + self.radius * np.sin(theta)], -1)

    def polar(self, x, y):
        cx, cy = self.center
        dx, dy = np.asarray(x) - cx, np.asarray(y) - cy
        return np.hypot(dx, dy), np.arctan2(dy, dx)


@dataclass(frozen=True)
class CurvePartition:
    circle: Circle
    angles: np.ndarray  # N + 1 arc boundaries, angles[-1] = angles[0] + 2 pi
    collocation_angles: np.ndarray

    @property
    def n_arcs(self) -> int:
        return self.angles.size - 1

    @property
    def arc_lengths(self) -> np.ndarray:
        return self.circle.radius * np.diff(self.angles)

    @property
    def htilde(self) -> float:
        return float(self.arc_lengths.max())

    @property
    def points(self) -> np.ndarray:
        return self.circle.point(self.collocation_angles)


@dataclass(frozen=True)
class LayerDensity:
    """phi as one of: constant ``c``, 1D power x^{s-1}, or sine series
    sum_n c_n sin(n theta) (coefficients indexed from n = 1)."""

    variant: str
    c: float = 0.0
    s: float = 1.0
    coefficients: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.variant not in ("constant", "power1d", "sine"):
            raise ValueError(f"unknown density variant {self.variant!r}")
        if self.variant == "power1d" and self.s <= 0:
            raise ValueError("power density needs s > 0")
        if self.variant == "sine":
            c = np.asarray(self.coefficients, dtype=float)
            if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
                raise ValueError("sine series needs finite coefficients")
            object.__setattr__(self, "coefficients", c)

    @classmethod
    def constant(cls, c: float) -> "LayerDensity":
        return cls("constant", c=float(c))

    @classmethod
    def power1d(cls, s: float) -> "LayerDensity":
        return cls("power1d", s=float(s))

    @classmethod
    def sine_series(cls, coefficients) -> "LayerDensity":
        return cls("sine", coefficients=coefficients)

    @property
    def n_series(self) -> int:
        return 0 if self.coefficients is None else self.coefficients.size

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.variant == "constant":
            return np.full(theta.shape, self.c)
        if self.variant == "power1d":
            return theta ** (self.s - 1)
        return _sine_sum(self.coefficients, theta.ravel()).reshape(theta.shape)


def _sine_sum(coef, theta, chunk=2**22):
    n = np.arange(1, coef.size + 1)
    out = np.empty(theta.size)
    step = max(1, chunk // coef.size)
    for s0 in range(0, theta.size, step):
        t = theta[s0:s0 + step]
        out[s0:s0 + step] = np.sin(np.outer(t, n)) @ coef
    return out


@dataclass(frozen=True)
class DiracLayer:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if P.shape != (w.size, 2):
            raise ValueError("one weight per 2D point expected")
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "weights", w)


def _fraction(rule) -> float:
    named = {"midpoint": 0.5, "left": 0.0, "right": 1.0}
    if isinstance(rule, str):
        if rule not in named:
            raise ValueError(f"unknown collocation rule {rule!r}")
        return named[rule]
    a = float(rule)
    if not 0.0 <= a <= 1.0:
        raise ValueError("collocation fraction must lie in [0, 1]")
    return a


def partition_circle(circle: Circle, target_htilde: float, rule="midpoint",
                     theta0: float = 0.0) -> CurvePartition:
    """N = ceil(2 pi R / target) equal arcs starting at ``theta0``."""
    L = circle.length
    if not 0 < target_htilde < L:
        raise ValueError("target arc length must lie in (0, 2 pi R)")
    ratio = L / target_htilde
    N = int(math.ceil(ratio - 1e-9 * ratio))
    angles = theta0 + TWO_PI * np.arange(N + 1) / N
    alpha = _fraction(rule)
    coll = angles[:-1] + alpha * (angles[1:] - angles[:-1])
    return CurvePartition(circle, angles, coll)


def layer_weights(density: LayerDensity, partition: CurvePartition,
                  chunk: int = 2**22) -> DiracLayer:
    """lambda_i = integral of phi over arc i (exact for the supported variants)."""
    R = partition.circle.radius
    th = partition.angles
    if density.variant == "power1d":
        raise ValueError("the power density is defined on an interval, not on a circle")
    if density.variant == "constant":
        lam = density.c * partition.arc_lengths
    else:
        c = density.coefficients
        n = np.arange(1, c.size + 1)
        lam = np.empty(partition.n_arcs)
        step = max(1, chunk // c.size)
        for s0 in range(0, partition.n_arcs, step):
            a, b = th[s0:s0 + step + 1][:-1], th[s0 + 1:s0 + step + 1]
            diff = np.cos(np.outer(a, n)) - np.cos(np.outer(b, n))
            lam[s0:s0 + a.size] = R * (diff @ (c / n))
    return DiracLayer(partition.points, lam)


def _check_interior(points):
    P = np.atleast_2d(points)
    if np.any(P < 0) or np.any(P > 1):
        raise ValueError("Dirac point outside the unit square")
    if np.any(P == 0) or np.any(P == 1):
        raise ValueError("Dirac point on the boundary of the unit square")


def dirac_matrix(grid: CartesianGrid, points) -> sp.csr_matrix:
    """(n_points, n_nodes) matrix of basis values N_j(x_i)."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    _check_interior(P)
    cells, ref = locate(grid, P)
    vals = basis_values(ref[:, 0], ref[:, 1])
    rows = np.repeat(np.arange(P.shape[0]), 4)
    M = sp.coo_matrix((vals.ravel(), (rows, grid.cell_nodes(cells).ravel())),
                      shape=(P.shape[0], grid.n_nodes))
    return M.tocsr()


def assemble_dirac_load(grid: CartesianGrid, dirac: DiracLayer) -> np.ndarray:
    """b_j = sum_i lambda_i N_j(x_i) over the full node set."""
    return dirac_matrix(grid, dirac.points).T @ dirac.weights


def grid_crossings(grid: CartesianGrid, circle: Circle, extra=()) -> np.ndarray:
    """Sorted angles in [0, 2 pi] where the circle meets grid lines, with
    0 and 2 pi included.  Consecutive angles bound an arc inside one cell."""
    cx, cy = circle.center
    R = circle.radius
    lines = np.arange(grid.n + 1) * grid.h
    raw = [np.asarray(extra, dtype=float)]
    cs = (lines - cx) / R
    a = np.arccos(cs[np.abs(cs) <= 1])
    raw += [a, -a]
    sn = (lines - cy) / R
    a = np.arcsin(sn[np.abs(sn) <= 1])
    raw += [a, math.pi - a]
    th = np.unique(np.concatenate([[0.0, TWO_PI], np.mod(np.concatenate(raw), TWO_PI)]))
    th = th[np.concatenate([[True], np.diff(th) > 1e-14])]
    th[-1] = TWO_PI
    return th


def _arc_rule(breaks, order, max_width=None):
    """Gauss points/weights (in angle) over consecutive arcs of ``breaks``."""
    a, b = breaks[:-1], breaks[1:]
    if max_width is not None:
        k = np.maximum(1, np.ceil((b - a) / max_width).astype(int))
        if np.any(k > 1):
            sub_a, sub_b = [], []
            for ai, bi, ki in zip(a, b, k):
                e = np.linspace(ai, bi, ki + 1)
                sub_a.append(e[:-1])
                sub_b.append(e[1:])
            a, b = np.concatenate(sub_a), np.concatenate(sub_b)
    x, w = roots_legendre(order)
    x, w = (x + 1) / 2, w / 2
    theta = a[:, None] + (b - a)[:, None] * x[None, :]
    weights = (b - a)[:, None] * w[None, :]
    return theta.ravel(), weights.ravel()


def _field_on_circle(field: FeField, circle: Circle, theta):
    pts = circle.point(theta)
    cells, ref = locate(field.grid, pts)
    return cells, ref


def discrete_trace_seminorm(field: FeField, circle: Circle, order: int = 4) -> float:
    """sqrt of the arc-length integral of |grad v_h|^2 over the circle."""
    breaks = grid_crossings(field.grid, circle)
    theta, w = _arc_rule(breaks, order)
    cells, ref = _field_on_circle(field, circle, theta)
    g = _grad_at(field, cells, ref)
    return float(np.sqrt(circle.radius * np.sum(w * np.sum(g**2, axis=1))))


def pairing_exact(density: LayerDensity, field: FeField, circle: Circle, order: int = 6) -> float:
    """Arc-length integral of phi v_h over the circle.

    Arcs are split at grid-line crossings; for sine series each piece is
    further split so it spans at most half a period of the top mode.
    """
    if density.variant == "power1d":
        raise ValueError("the power density is defined on an interval, not on a circle")
    breaks = grid_crossings(field.grid, circle)
    width = math.pi / density.n_series if density.variant == "sine" else None
    theta, w = _arc_rule(breaks, order, width)
    cells, ref = _field_on_circle(field, circle, theta)
    v = _value_at(field, cells, ref)
    return float(circle.radius * np.sum(w * density(theta) * v))


def trace_ratio(field: FeField, circle: Circle) -> float:
    """|gamma_0 v_h|_{1,gamma} h^{1/2} / |v_h|_{1,Omega}."""
    return discrete_trace_seminorm(field, circle) * math.sqrt(field.grid.h) / seminorm_h1(field)
