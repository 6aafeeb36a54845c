"""Conjugate gradients and the point-constrained saddle-point solve.

The saddle system

    A u + B^T lam = f,    B u = 0

is reduced to the Schur complement S = B A^{-1} B^T acting on the
multipliers, solved by an outer CG whose matrix-vector products run an
inner CG on A.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .grid2d import CartesianGrid, SparseSystem, basis_values, locate

log = logging.getLogger(__name__)

__all__ = [
    "CGResult",
    "SolverError",
    "SaddleSystem",
    "SaddleResult",
    "cg_solve",
    "build_constraints",
    "saddle_solve",
]


class SolverError(RuntimeError):
    pass


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float  # relative, ||b - A x|| / ||b||
    converged: bool
    history: list = field(default_factory=list)


def cg_solve(system, tol: float = 1e-10, maxit: int = 10_000, x0=None,
             precondition: bool = True) -> CGResult:
    """Jacobi-preconditioned CG.

    ``system`` is a :class:`SparseSystem` or a ``(matrix, rhs)`` pair where
    the matrix may also be a ``LinearOperator`` (then no preconditioning).
    Non-convergence is flagged on the result; NaNs raise ``SolverError``.
    """
    if isinstance(system, SparseSystem):
        A, b = system.matrix, system.rhs
    else:
        A, b = system
    b = np.asarray(b, dtype=float)
    n = b.size
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return CGResult(np.zeros(n), 0, 0.0, True, [0.0])

    if precondition and sp.issparse(A):
        d = A.diagonal()
        if np.any(d <= 0):
            raise SolverError("non-positive diagonal; matrix is not SPD")
        dinv = 1.0 / d
    else:
        dinv = np.ones(n)

    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = float(r @ z)
    res = float(np.linalg.norm(r)) / bnorm
    history = [res]
    it = 0
    while res > tol and it < maxit:
        Ap = A @ p
        pAp = float(p @ Ap)
        if not np.isfinite(pAp):
            raise SolverError(f"NaN/inf encountered at iteration {it}")
        if pAp <= 0:
            raise SolverError("matrix is not positive definite along a search direction")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = dinv * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
        res = float(np.linalg.norm(r)) / bnorm
        history.append(res)
    if not np.isfinite(res):
        raise SolverError("NaN in CG residual")
    converged = res <= tol
    if not converged:
        log.warning("CG stopped after %d iterations at relative residual %.3e", it, res)
    return CGResult(x, it, res, converged, history)


def build_constraints(grid: CartesianGrid, points, interior=None) -> sp.csr_matrix:
    """Point-evaluation rows B[i, j] = N_j(x_i) over interior unknowns.

    ``interior`` lists the node index of each unknown (all interior nodes
    by default); basis functions of eliminated nodes are dropped.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(P <= 0) or np.any(P >= 1):
        raise ValueError("constraint points must lie strictly inside the square")
    if np.unique(P, axis=0).shape[0] != P.shape[0]:
        raise ValueError("duplicate constraint points make B rank deficient")
    if interior is None:
        interior = grid.interior_nodes
    cells, ref = locate(grid, P)
    vals = basis_values(ref[:, 0], ref[:, 1]).ravel()
    nodes = grid.cell_nodes(cells).ravel()
    rows = np.repeat(np.arange(P.shape[0]), 4)
    to_reduced = np.full(grid.n_nodes, -1)
    to_reduced[interior] = np.arange(interior.size)
    cols = to_reduced[nodes]
    keep = (cols >= 0) & (vals != 0.0)
    B = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(P.shape[0], interior.size))
    return B.tocsr()


@dataclass
class SaddleSystem:
    stiffness: SparseSystem
    constraints: sp.csr_matrix


@dataclass
class SaddleResult:
    u: np.ndarray  # reduced (interior) coefficients
    multipliers: np.ndarray
    outer_iterations: int
    inner_iterations: int
    constraint_residual: float  # ||B u||_inf
    converged: bool


def saddle_solve(saddle: SaddleSystem, tol_outer: float = 1e-10, tol_inner: float = 1e-12,
                 maxit_outer: int = 2_000, maxit_inner: int = 20_000) -> SaddleResult:
    """Uzawa-type Schur complement CG for A u + B^T lam = f, B u = 0."""
    A, f = saddle.stiffness.matrix, saddle.stiffness.rhs
    B = saddle.constraints
    m = B.shape[0]
    inner_its = 0

    def a_solve(rhs):
        nonlocal inner_its
        res = cg_solve((A, rhs), tol=tol_inner, maxit=maxit_inner)
        inner_its += res.iterations
        if not res.converged:
            raise SolverError(f"inner CG failed (residual {res.residual:.2e})")
        return res.x

    u0 = a_solve(f)
    if m == 0:
        return SaddleResult(u0, np.zeros(0), 0, inner_its, 0.0, True)

    S = LinearOperator((m, m), matvec=lambda lam: B @ a_solve(B.T @ lam), dtype=float)
    outer = cg_solve((S, B @ u0), tol=tol_outer, maxit=maxit_outer, precondition=False)
    if not outer.converged:
        raise SolverError(
            f"Schur complement CG stagnated at {outer.residual:.2e} after {outer.iterations} "
            "iterations; constraints may be too dense for the mesh (htilde < h?)"
        )
    lam = outer.x
    u = a_solve(f - B.T @ lam)
    bu = float(np.max(np.abs(B @ u))) if u.size else 0.0
    return SaddleResult(u, lam, outer.iterations, inner_its, bu, True)
