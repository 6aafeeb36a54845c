"""Uniform cartesian Q1 finite elements on the unit square.

Node (i, j) sits at (i h, j h) and has index ``j * (n + 1) + i``.  Cell
(i, j) has index ``j * n + i`` and its four nodes are listed
counterclockwise from the lower-left corner.  Cells are half open: a point
on a shared edge belongs to the cell above / to the right of it, except on
x = 1 or y = 1 where the last cell is used.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_legendre

__all__ = [
    "CartesianGrid",
    "FeField",
    "QuadRule",
    "SparseSystem",
    "build_grid",
    "q1_eval",
    "locate",
    "basis_values",
    "local_stiffness",
    "assemble_stiffness",
    "assemble_volume_load",
    "apply_dirichlet",
    "interpolate",
    "fe_eval",
    "fe_grad",
    "cell_quadrature",
]


@dataclass(frozen=True)
class CartesianGrid:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("a grid needs n >= 2 cells per side")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def n_nodes(self) -> int:
        return (self.n + 1) ** 2

    @property
    def n_cells(self) -> int:
        return self.n * self.n

    @property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.n + 1) / self.n
        X, Y = np.meshgrid(t, t)  # row j is y = j h
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def boundary_mask(self) -> np.ndarray:
        k = np.arange(self.n + 1)
        I, J = np.meshgrid(k, k)
        on = (I == 0) | (I == self.n) | (J == 0) | (J == self.n)
        return on.ravel()

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.nonzero(~self.boundary_mask)[0]

    def cell_nodes(self, cells=None) -> np.ndarray:
        """(m, 4) node indices of ``cells`` (all cells by default)."""
        if cells is None:
            cells = np.arange(self.n_cells)
        cells = np.asarray(cells)
        i, j = cells % self.n, cells // self.n
        ll = j * (self.n + 1) + i
        return np.stack([ll, ll + 1, ll + self.n + 2, ll + self.n + 1], axis=-1)

    def cell_origin(self, cells) -> np.ndarray:
        cells = np.asarray(cells)
        return np.stack([cells % self.n, cells // self.n], axis=-1) * self.h


@dataclass
class FeField:
    grid: CartesianGrid
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.grid.n_nodes,):
            raise ValueError("one coefficient per node expected")


@dataclass(frozen=True)
class QuadRule:
    """Tensor Gauss rule per cell, with uniform subdivision of cut cells.

    Cells met by the cut curve are split into ``2**cut_cell_depth`` sub-cells
    per side, each integrated with ``cut_order`` points per axis.  Cells next
    to a focus point (an integrable singularity of the integrand) are
    additionally refined toward it, down to ``2**-focus_depth`` of a cell.
    """

    order: int = 5
    cut_order: int = 3
    cut_cell_depth: int = 3
    focus_depth: int = 12

    def reference(self, cut: bool = False):
        """Points (m, 2) and weights (m,) on [0, 1]^2, weights summing to 1."""
        if not cut:
            return _tensor_gauss(self.order)
        pts, wts = _tensor_gauss(self.cut_order)
        k = 2**self.cut_cell_depth
        off = np.stack(np.meshgrid(np.arange(k), np.arange(k), indexing="ij"), -1).reshape(-1, 2)
        P = (off[:, None, :] + pts[None, :, :]) / k
        W = np.broadcast_to(wts / k**2, (off.shape[0], wts.size))
        return P.reshape(-1, 2), W.ravel().copy()


def _tensor_gauss(m):
    x, w = roots_legendre(m)
    x, w = (x + 1) / 2, w / 2
    X, Y = np.meshgrid(x, x, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()]), np.outer(w, w).ravel()


@dataclass
class SparseSystem:
    """Symmetric sparse system.  ``interior`` maps reduced indices to node
    indices once Dirichlet rows are eliminated (None before)."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    interior: Optional[np.ndarray] = None
    n_full: Optional[int] = None

    @property
    def reduced(self) -> bool:
        return self.interior is not None

    def expand(self, x: np.ndarray) -> np.ndarray:
        """Scatter a reduced solution to the full node set (zeros on the boundary)."""
        if not self.reduced:
            return np.asarray(x, dtype=float).copy()
        full = np.zeros(self.n_full)
        full[self.interior] = x
        return full


def build_grid(n: int) -> CartesianGrid:
    return CartesianGrid(int(n))


def basis_values(xi, eta):
    """Bilinear basis on the reference cell, shape (..., 4)."""
    xi, eta = np.asarray(xi, dtype=float), np.asarray(eta, dtype=float)
    return np.stack([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta], axis=-1)


def basis_reference_gradients(xi, eta):
    """d/dxi and d/deta of the reference basis, shape (..., 4, 2)."""
    xi, eta = np.asarray(xi, dtype=float), np.asarray(eta, dtype=float)
    dxi = np.stack([-(1 - eta), (1 - eta), eta, -eta], axis=-1)
    deta = np.stack([-(1 - xi), -xi, xi, (1 - xi)], axis=-1)
    return np.stack([dxi, deta], axis=-1)


def locate(grid: CartesianGrid, points):
    """Cell index and reference coordinates of each point (half-open cells)."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(P < 0.0) or np.any(P > 1.0):
        raise ValueError("point outside the unit square")
    n = grid.n
    s = P * n
    ij = np.minimum(np.floor(s).astype(int), n - 1)
    ref = s - ij
    return ij[:, 1] * n + ij[:, 0], ref


def q1_eval(grid: CartesianGrid, point):
    """Return (cell, 4 basis values, 4 basis gradients) at a single point."""
    cells, ref = locate(grid, np.asarray(point, dtype=float).reshape(1, 2))
    vals = basis_values(ref[0, 0], ref[0, 1])
    grads = basis_reference_gradients(ref[0, 0], ref[0, 1]) / grid.h
    return int(cells[0]), vals, grads


def local_stiffness() -> np.ndarray:
    """Exact Q1 cell stiffness; independent of h in 2D."""
    return np.array([[4, -1, -2, -1],
                     [-1, 4, -1, -2],
                     [-2, -1, 4, -1],
                     [-1, -2, -1, 4]], dtype=float) / 6.0


def assemble_stiffness(grid: CartesianGrid) -> sp.csr_matrix:
    conn = grid.cell_nodes()
    K = local_stiffness()
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    data = np.tile(K.ravel(), grid.n_cells)
    A = sp.coo_matrix((data, (rows, cols)), shape=(grid.n_nodes,) * 2).tocsr()
    A.sum_duplicates()
    return A


def cut_cells(grid: CartesianGrid, circle) -> np.ndarray:
    """Boolean mask of cells whose closure meets the circle."""
    if circle is None:
        return np.zeros(grid.n_cells, dtype=bool)
    org = grid.cell_origin(np.arange(grid.n_cells))
    lo, hi = org, org + grid.h
    c = np.asarray(circle.center, dtype=float)
    nearest = np.clip(c, lo, hi)
    dmin = np.linalg.norm(nearest - c, axis=1)
    far = np.where(np.abs(lo - c) > np.abs(hi - c), lo, hi)
    dmax = np.linalg.norm(far - c, axis=1)
    return (dmin <= circle.radius) & (circle.radius <= dmax)


def _graded_boxes(focus_ref, min_level, max_level):
    """Boxes (x0, y0, size) of [0,1]^2, uniform to ``min_level`` and split
    further while a box lies within one box width of ``focus_ref``."""
    out = []
    stack = [(0.0, 0.0, 1.0, 0)]
    while stack:
        x0, y0, size, lev = stack.pop()
        d = np.hypot(max(x0 - focus_ref[0], 0.0, focus_ref[0] - x0 - size),
                     max(y0 - focus_ref[1], 0.0, focus_ref[1] - y0 - size))
        if lev < min_level or (lev < max_level and d <= size):
            half = size / 2
            for dx in (0.0, half):
                for dy in (0.0, half):
                    stack.append((x0 + dx, y0 + dy, half, lev + 1))
        else:
            out.append((x0, y0, size))
    out.sort()
    return np.array(out)


def _focus_cells(grid: CartesianGrid, focus):
    """Map cell -> focus point (reference coords) for cells within h of it."""
    hits = {}
    for fx, fy in np.atleast_2d(np.asarray(focus, dtype=float)):
        i0, j0 = int(np.floor(fx * grid.n)), int(np.floor(fy * grid.n))
        for i in range(i0 - 1, i0 + 2):
            for j in range(j0 - 1, j0 + 2):
                if 0 <= i < grid.n and 0 <= j < grid.n:
                    hits.setdefault(j * grid.n + i, (fx * grid.n - i, fy * grid.n - j))
    return hits


def cell_quadrature(grid: CartesianGrid, quad: QuadRule, circle=None, cells=None, focus=None):
    """Quadrature points over a set of cells.

    Returns ``(cell, ref, xy, weight)`` flattened arrays, ordered cell by
    cell; weights include the cell area.
    """
    if cells is None:
        cells = np.arange(grid.n_cells)
    cells = np.asarray(cells)
    cut = cut_cells(grid, circle)[cells]
    hot = _focus_cells(grid, focus) if focus is not None else {}
    is_hot = np.isin(cells, np.fromiter(hot, dtype=int, count=len(hot)))
    out = []
    for flag in (False, True):
        sel = cells[(cut == flag) & ~is_hot]
        if sel.size == 0:
            continue
        ref, w = quad.reference(cut=flag)
        c = np.repeat(sel, w.size)
        R = np.tile(ref, (sel.size, 1))
        W = np.tile(w, sel.size) * grid.h**2
        out.append((c, R, W))
    gp, gw = _tensor_gauss(quad.cut_order)
    for cell in cells[is_hot]:
        boxes = _graded_boxes(hot[int(cell)], quad.cut_cell_depth, quad.focus_depth)
        R = (boxes[:, None, :2] + boxes[:, None, 2:3] * gp[None]).reshape(-1, 2)
        W = (boxes[:, 2:3] ** 2 * gw[None]).ravel() * grid.h**2
        out.append((np.full(W.size, cell), R, W))
    if not out:
        empty = np.zeros(0)
        return np.zeros(0, int), np.zeros((0, 2)), np.zeros((0, 2)), empty
    c = np.concatenate([o[0] for o in out])
    R = np.concatenate([o[1] for o in out])
    W = np.concatenate([o[2] for o in out])
    order = np.argsort(c, kind="stable")
    c, R, W = c[order], R[order], W[order]
    xy = grid.cell_origin(c) + R * grid.h
    return c, R, xy, W


def assemble_volume_load(grid: CartesianGrid, f: Callable, quad: QuadRule | None = None,
                         cut=None, focus=None, chunk: int = 200_000) -> np.ndarray:
    """Load vector b_j = int f N_j; ``f(x, y)`` takes coordinate arrays."""
    quad = quad or QuadRule()
    b = np.zeros(grid.n_nodes)
    cells, ref, xy, w = cell_quadrature(grid, quad, cut, focus=focus)
    for s0 in range(0, w.size, chunk):
        sl = slice(s0, s0 + chunk)
        fv = np.asarray(f(xy[sl, 0], xy[sl, 1]), dtype=float)
        contrib = (fv * w[sl])[:, None] * basis_values(ref[sl, 0], ref[sl, 1])
        np.add.at(b, grid.cell_nodes(cells[sl]).ravel(), contrib.ravel())
    return b


def apply_dirichlet(system: SparseSystem, grid: CartesianGrid) -> SparseSystem:
    """Eliminate homogeneous Dirichlet nodes symmetrically."""
    if system.reduced:
        raise ValueError("system is already reduced")
    interior = grid.interior_nodes
    A = system.matrix.tocsr()[interior][:, interior].tocsr()
    return SparseSystem(A, np.asarray(system.rhs, dtype=float)[interior], interior, grid.n_nodes)


def interpolate(grid: CartesianGrid, g: Callable) -> FeField:
    nodes = grid.nodes
    return FeField(grid, np.asarray(g(nodes[:, 0], nodes[:, 1]), dtype=float))


def fe_eval(field: FeField, points) -> np.ndarray:
    cells, ref = locate(field.grid, points)
    N = basis_values(ref[:, 0], ref[:, 1])
    return np.sum(N * field.coefficients[field.grid.cell_nodes(cells)], axis=1)


def fe_grad(field: FeField, points) -> np.ndarray:
    cells, ref = locate(field.grid, points)
    return _grad_at(field, cells, ref)


def _grad_at(field: FeField, cells, ref):
    G = basis_reference_gradients(ref[:, 0], ref[:, 1]) / field.grid.h  # (m, 4, 2)
    coef = field.coefficients[field.grid.cell_nodes(cells)]
    return np.einsum("mk,mkd->md", coef, G)


def _value_at(field: FeField, cells, ref):
    N = basis_values(ref[:, 0], ref[:, 1])
    return np.sum(N * field.coefficients[field.grid.cell_nodes(cells)], axis=1)


def seminorm_h1(field: FeField) -> float:
    """Exact |v_h|_{1, Omega} from the stiffness quadratic form."""
    c = field.coefficients
    return float(np.sqrt(max(c @ (assemble_stiffness(field.grid) @ c), 0.0)))
