"""Exact solutions with a normal-derivative jump across a circle.

The Poisson case uses the harmonic series

    S(rho, theta) = sum_{n <= N} (R / rho)^n n^{-s-1} sin(n theta),   rho >= R,

damped by a quintic cut function outside the circle and reflected inside
through the affine radius map l(r) = r (1 - R_max / R) + R_max.  The series
and its derivatives are the imaginary/real parts of power sums in
zeta = (R / rho) e^{i theta}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .layer import Circle, LayerDensity

__all__ = [
    "chi_eval",
    "ManufacturedPoisson",
    "RadialSaddleCase",
    "exact_u",
    "exact_grad_u",
    "rhs_f",
    "density_phi",
    "radial_case",
    "power_sums",
]

# zeta^n below exp(-_DECAY) is dropped
_DECAY = 45.0


def chi_eval(eps: float, x):
    """Quintic cut function: 1 for x <= 0, 0 for x >= eps, C^2 joins.

    Returns (value, first derivative, second derivative)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    t = np.clip(x / eps, 0.0, 1.0)
    val = -6 * t**5 + 15 * t**4 - 10 * t**3 + 1
    d1 = (-30 * t**4 + 60 * t**3 - 30 * t**2) / eps
    d2 = (-120 * t**3 + 180 * t**2 - 60 * t) / eps**2
    return val, d1, d2


def power_sums(zeta, coefs, budget: int = 2**20):
    """sum_n coefs[n-1, k] zeta^n for each point, shape (m, k).

    Terms are dropped once |zeta|^n < exp(-45); points are processed in
    bins of similar effective length so cost follows the needed terms.
    """
    zeta = np.asarray(zeta, dtype=complex).ravel()
    coefs = np.asarray(coefs, dtype=complex)
    N = coefs.shape[0]
    out = np.zeros((zeta.size, coefs.shape[1]), dtype=complex)
    q = np.abs(zeta)
    with np.errstate(divide="ignore"):
        need = np.where(q < 1, np.ceil(_DECAY / -np.log(np.maximum(q, 1e-300))), N)
    need = np.clip(need, 1, N).astype(int)
    need[q == 0] = 0
    bins = np.minimum(2 ** np.ceil(np.log2(np.maximum(need, 1))).astype(int), N)
    bins[need == 0] = 0
    for K in np.unique(bins):
        if K == 0:
            continue
        idx = np.nonzero(bins == K)[0]
        step = max(1, budget // K)
        for s0 in range(0, idx.size, step):
            sel = idx[s0:s0 + step]
            Z = np.cumprod(np.broadcast_to(zeta[sel, None], (sel.size, K)), axis=1)
            out[sel] = Z @ coefs[:K]
    return out


@dataclass(frozen=True)
class ManufacturedPoisson:
    """Geometry and smoothness of the manufactured Poisson problem.

    The circle is centred in the unit square, so the margin to the boundary
    is rho = 0.5 - R and R_max = R + rho = 0.5.
    """

    radius: float = 0.3
    s: float = 0.5
    n_series: int = 2048

    def __post_init__(self):
        if not 0 < self.radius < 0.5:
            raise ValueError("radius must lie in (0, 0.5)")
        if self.s <= 0:
            raise ValueError("s must be positive")
        if self.n_series < 1:
            raise ValueError("need at least one series term")

    @property
    def circle(self) -> Circle:
        return Circle((0.5, 0.5), self.radius)

    @property
    def rho(self) -> float:
        return 0.5 - self.radius

    @property
    def r_max(self) -> float:
        return self.radius + self.rho

    @property
    def slope(self) -> float:
        """l'(r) = 1 - R_max / R of the interior radius map."""
        return 1.0 - self.r_max / self.radius

    def mapped_radius(self, r):
        return np.asarray(r) * self.slope + self.r_max

    @property
    def singular_point(self) -> np.ndarray:
        """Where sum n^{-s} sin(n theta) is singular (theta = 0 on the circle)."""
        return self.circle.point(0.0)

    def truncation_ok(self, h: float) -> bool:
        return self.n_series >= 2 * math.pi / h

    def _coefs(self):
        n = np.arange(1, self.n_series + 1, dtype=float)
        a = n ** (-self.s - 1)
        return np.column_stack([a, n * a, n * n * a])


def _evaluate(case: ManufacturedPoisson, x, y, side=None, want="u"):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast(x, y).shape
    x, y = np.broadcast_to(x, shape).ravel(), np.broadcast_to(y, shape).ravel()
    R, eps = case.radius, case.rho / 3
    r, theta = case.circle.polar(x, y)
    if side is None:
        inside = r < R
    elif side == "inner":
        inside = np.ones(r.shape, dtype=bool)
    elif side == "outer":
        inside = np.zeros(r.shape, dtype=bool)
    else:
        raise ValueError("side must be None, 'inner' or 'outer'")
    rho_o = np.where(inside, case.mapped_radius(r), r)
    chi, dchi, ddchi = chi_eval(eps, rho_o - R - eps)
    live = chi != 0.0  # chi, chi', chi'' all vanish together past eps

    out = np.zeros((r.size, 2)) if want == "grad" else np.zeros(r.size)
    if not np.any(live):
        return out.reshape(shape + out.shape[1:])

    ro, th = rho_o[live], theta[live]
    zeta = (R / ro) * np.exp(1j * th)
    P = power_sums(zeta, case._coefs())
    S = P[:, 0].imag
    S_th = P[:, 1].real
    S_r = -P[:, 1].imag / ro
    c, dc, ddc = chi[live], dchi[live], ddchi[live]

    if want == "u":
        out[live] = c * S
    elif want == "grad":
        U_r = dc * S + c * S_r
        U_th = c * S_th
        ins = inside[live]
        rl = r[live]
        d_r = np.where(ins, case.slope * U_r, U_r)
        d_t = np.where(rl > 0, U_th / np.where(rl > 0, rl, 1.0), 0.0)
        ct, st = np.cos(th), np.sin(th)
        out[live, 0] = d_r * ct - d_t * st
        out[live, 1] = d_r * st + d_t * ct
    else:
        ins = inside[live]
        rl = r[live]
        S_thth = -P[:, 2].imag
        S_rr = (P[:, 2] + P[:, 1]).imag / ro**2
        U_r = dc * S + c * S_r
        U_rr = ddc * S + 2 * dc * S_r + c * S_rr
        U_thth = c * S_thth
        # outside: chi S is harmonic where chi is 1, leaving only the chi', chi'' terms
        lap_out = ddc * S + dc * (2 * S_r + S / ro)
        safe_r = np.where(rl > 0, rl, 1.0)
        k = case.slope
        lap_in = k * k * U_rr + (k / safe_r) * U_r + U_thth / safe_r**2
        out[live] = -np.where(ins, lap_in, lap_out)
    return out.reshape(shape + out.shape[1:])


def exact_u(case: ManufacturedPoisson, x, y):
    return _evaluate(case, x, y, want="u")


def exact_grad_u(case: ManufacturedPoisson, x, y, side=None):
    """Cartesian gradient, shape (..., 2).  ``side`` forces the inner or
    outer branch for points on (or near) the circle."""
    return _evaluate(case, x, y, side=side, want="grad")


def rhs_f(case: ManufacturedPoisson, x, y, side=None):
    """Volume source f = -Laplacian(u) off the circle."""
    return _evaluate(case, x, y, side=side, want="f")


def density_phi(case: ManufacturedPoisson) -> LayerDensity:
    """Jump of the radial derivative, inner minus outer:
    (R_max / R^2) sum_n n^{-s} sin(n theta)."""
    n = np.arange(1, case.n_series + 1, dtype=float)
    return LayerDensity.sine_series(case.r_max / case.radius**2 * n ** (-case.s))


@dataclass(frozen=True)
class RadialSaddleCase:
    """u = (r - R) chi_{rho/3}(r - R - rho/3) outside the circle, 0 inside."""

    radius: float = 0.3
    center: tuple = (0.5, 0.5)

    @property
    def circle(self) -> Circle:
        return Circle(self.center, self.radius)

    @property
    def rho(self) -> float:
        return self.circle.margin

    def profile(self, r):
        """(g, g', g'') of the outer radial profile."""
        R, eps = self.radius, self.rho / 3
        r = np.asarray(r, dtype=float)
        c, dc, ddc = chi_eval(eps, r - R - eps)
        d = r - R
        return d * c, c + d * dc, 2 * dc + d * ddc


def radial_case(case: RadialSaddleCase):
    """Return (u, grad_u, f, multiplier magnitude) for the fictitious-domain test.

    The callables take coordinate arrays ``(x, y)``.  f vanishes inside the
    disk, and the exact multiplier density has magnitude |g'(R)| = 1."""
    R = case.radius
    circle = case.circle

    def u(x, y):
        r, _ = circle.polar(x, y)
        g, _, _ = case.profile(r)
        return np.where(r >= R, g, 0.0)

    def grad(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        r, th = circle.polar(x, y)
        _, dg, _ = case.profile(r)
        dg = np.where(r >= R, dg, 0.0)
        return np.stack([dg * np.cos(th), dg * np.sin(th)], axis=-1)

    def f(x, y):
        r, _ = circle.polar(x, y)
        _, dg, ddg = case.profile(r)
        safe = np.where(r > 0, r, 1.0)
        return np.where(r > R, -(ddg + dg / safe), 0.0)

    _, dg_R, _ = case.profile(R)
    return u, grad, f, float(abs(dg_R))
