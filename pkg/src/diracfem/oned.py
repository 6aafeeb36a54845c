"""One-dimensional kernel: P0 interpolation on [0, 1], fractional Sobolev
norms of piecewise-smooth functions, and the power-density pairing example.

Piecewise functions are always evaluated *per piece*, so values at a
breakpoint are one-sided limits and jumps never need special casing.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import roots_jacobi, roots_legendre

__all__ = [
    "IntervalPartition",
    "PiecewiseFunction1D",
    "FractionalQuad",
    "uniform_partition",
    "p0_interpolate",
    "fractional_norm",
    "pairing_power_density",
    "pairing_error_constant",
    "lemma1_order_study",
]


@dataclass(frozen=True)
class IntervalPartition:
    breakpoints: np.ndarray
    collocation: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        c = np.asarray(self.collocation, dtype=float)
        if b.ndim != 1 or b.size < 2:
            raise ValueError("need at least two breakpoints")
        if b[0] != 0.0 or b[-1] != 1.0:
            raise ValueError("breakpoints must span [0, 1]")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if c.shape != (b.size - 1,):
            raise ValueError("one collocation point per subinterval")
        if np.any(c < b[:-1]) or np.any(c > b[1:]):
            raise ValueError("collocation point outside its subinterval")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "collocation", c)

    @property
    def n(self) -> int:
        return self.breakpoints.size - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def h(self) -> float:
        return float(self.lengths.max())

    @property
    def quasi_uniformity(self) -> float:
        """max |gamma_i| / min |gamma_i|."""
        ell = self.lengths
        return float(ell.max() / ell.min())


@dataclass(frozen=True)
class PiecewiseFunction1D:
    """A function that is smooth on each subinterval of ``partition``.

    ``kind`` selects how ``values`` is read:

    * ``"constant"``: array of one value per piece;
    * ``"linear"``: array of shape (n, 2) with left/right endpoint values;
    * ``"callable"``: ``values(x, piece)`` returning the value of piece
      ``piece`` at ``x`` (both arrays of the same shape).
    """

    partition: IntervalPartition
    kind: str
    values: object

    def __post_init__(self):
        n = self.partition.n
        if self.kind == "constant":
            v = np.asarray(self.values, dtype=float)
            if v.shape != (n,):
                raise ValueError("constant pieces need n values")
            object.__setattr__(self, "values", v)
        elif self.kind == "linear":
            v = np.asarray(self.values, dtype=float)
            if v.shape != (n, 2):
                raise ValueError("linear pieces need (n, 2) endpoint values")
            object.__setattr__(self, "values", v)
        elif self.kind == "callable":
            if not callable(self.values):
                raise TypeError("callable kind needs a callable rule")
        else:
            raise ValueError(f"unknown kind {self.kind!r}")

    @classmethod
    def sampled(cls, partition: IntervalPartition, f: Callable) -> "PiecewiseFunction1D":
        """Wrap a globally defined function ``f(x)``."""
        return cls(partition, "callable", lambda x, piece: np.asarray(f(x), dtype=float))

    def evaluate_piece(self, x, piece) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        piece = np.broadcast_to(np.asarray(piece, dtype=int), x.shape)
        if self.kind == "constant":
            return self.values[piece]
        if self.kind == "linear":
            b = self.partition.breakpoints
            a, c = b[piece], b[piece + 1]
            t = (x - a) / (c - a)
            return (1 - t) * self.values[piece, 0] + t * self.values[piece, 1]
        return np.broadcast_to(self.values(x, piece), x.shape)

    def __call__(self, x) -> np.ndarray:
        # right-continuous piece lookup; x = 1 belongs to the last piece
        x = np.asarray(x, dtype=float)
        b = self.partition.breakpoints
        piece = np.clip(np.searchsorted(b, x, side="right") - 1, 0, self.partition.n - 1)
        return self.evaluate_piece(x, piece)

    def __sub__(self, other: "PiecewiseFunction1D") -> "PiecewiseFunction1D":
        if other.partition is not self.partition and not (
            np.array_equal(other.partition.breakpoints, self.partition.breakpoints)
        ):
            raise ValueError("partitions differ")
        return PiecewiseFunction1D(
            self.partition,
            "callable",
            lambda x, piece: self.evaluate_piece(x, piece) - other.evaluate_piece(x, piece),
        )

    def __neg__(self) -> "PiecewiseFunction1D":
        return PiecewiseFunction1D(
            self.partition, "callable", lambda x, piece: -self.evaluate_piece(x, piece)
        )


def uniform_partition(n: int, rule="midpoint") -> IntervalPartition:
    """``n`` equal subintervals; ``rule`` is midpoint/left/right or a
    fraction alpha in [0, 1] locating x_i = a_i + alpha |gamma_i|."""
    if n < 1:
        raise ValueError("n must be >= 1")
    alpha = _collocation_fraction(rule)
    b = np.arange(n + 1) / n
    return IntervalPartition(b, b[:-1] + alpha * (b[1:] - b[:-1]))


def _collocation_fraction(rule) -> float:
    named = {"midpoint": 0.5, "left": 0.0, "right": 1.0}
    if isinstance(rule, str):
        try:
            return named[rule]
        except KeyError:
            raise ValueError(f"unknown collocation rule {rule!r}") from None
    alpha = float(rule)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("collocation fraction must lie in [0, 1]")
    return alpha


def p0_interpolate(v, partition: IntervalPartition) -> PiecewiseFunction1D:
    """Piecewise constant interpolant sum_i v(x_i) 1_{gamma_i}."""
    idx = np.arange(partition.n)
    if isinstance(v, PiecewiseFunction1D):
        vals = v.evaluate_piece(partition.collocation, idx)
    else:
        vals = np.asarray(v(partition.collocation), dtype=float)
    return PiecewiseFunction1D(partition, "constant", np.array(vals, dtype=float))


@dataclass(frozen=True)
class FractionalQuad:
    """Gauss orders for the H^r double integral.

    ``order`` points per axis on far blocks; the singular blocks (diagonal
    and adjacent pieces) use Duffy coordinates with a Gauss-Jacobi rule
    that absorbs the |y - x|^{-2r} factor exactly.
    """

    order: int = 8


def _legendre01(m):
    x, w = roots_legendre(m)
    return (x + 1) / 2, w / 2


def _jacobi01(m, beta):
    # weight t^beta on [0, 1]
    x, w = roots_jacobi(m, 0.0, beta)
    return (x + 1) / 2, w / 2 ** (beta + 1)


def fractional_norm(w: PiecewiseFunction1D, r: float, quad: FractionalQuad | None = None):
    """Return ``(l2_part, seminorm_part, total)`` of ``w`` in H^r(0, 1).

    The seminorm is the Gagliardo double integral with kernel
    |y - x|^{-1-2r}; total is the sum of the two parts (not the root of
    the sum of squares).  For r = 0 only the L2 part is kept.
    """
    r = float(r)
    if not 0.0 <= r < 0.5:
        raise ValueError("fractional order must satisfy 0 <= r < 1/2")
    quad = quad or FractionalQuad()
    part = w.partition
    b, ell, n, m = part.breakpoints, part.lengths, part.n, quad.order

    tg, wg = _legendre01(m)
    xs = b[:-1, None] + ell[:, None] * tg[None, :]  # (n, m)
    pieces = np.repeat(np.arange(n)[:, None], m, axis=1)
    ws = w.evaluate_piece(xs, pieces)
    wts = ell[:, None] * wg[None, :]
    l2 = float(np.sqrt(np.sum(wts * ws**2)))
    if r == 0.0:
        return l2, 0.0, l2

    semi2 = _far_blocks(xs, ws, wts, r) + _diagonal_blocks(w, r, m) + _adjacent_blocks(w, r, m)
    semi = float(np.sqrt(max(semi2, 0.0)))
    return l2, semi, l2 + semi


def _far_blocks(xs, ws, wts, r):
    n, m = xs.shape
    X, W, A = xs.ravel(), ws.ravel(), wts.ravel()
    pid = np.repeat(np.arange(n), m)
    total = 0.0
    step = max(1, 2**21 // max(X.size, 1))
    for s0 in range(0, X.size, step):
        sl = slice(s0, s0 + step)
        far = np.abs(pid[sl, None] - pid[None, :]) > 1
        d = np.abs(X[sl, None] - X[None, :])
        d = np.where(far, d, 1.0)
        val = (W[sl, None] - W[None, :]) ** 2 / d ** (1 + 2 * r)
        total += float(np.sum(np.where(far, val, 0.0) * A[sl, None] * A[None, :]))
    return total


def _diagonal_blocks(w, r, m):
    # integral over [a,b]^2 = 2 int_0^L dd int_a^{b-d} (w(x+d)-w(x))^2 dd^{-1-2r} dx
    # with dd = L t, x = a + L (1 - t) u.
    part = w.partition
    a, ell = part.breakpoints[:-1], part.lengths
    t, wt = _jacobi01(m, -2 * r)
    u, wu = _legendre01(m)
    T, U = np.meshgrid(t, u, indexing="ij")
    Wq = np.outer(wt, wu)
    x = a[:, None, None] + ell[:, None, None] * (1 - T) * U
    y = x + ell[:, None, None] * T
    idx = np.broadcast_to(np.arange(part.n)[:, None, None], x.shape)
    diff2 = (w.evaluate_piece(y, idx) - w.evaluate_piece(x, idx)) ** 2
    # t^{-2r} is carried by the Jacobi weight
    integrand = (1 - T) * diff2 / T
    return float(np.sum(2 * ell ** (1 - 2 * r) * np.sum(integrand * Wq, axis=(1, 2))))


def _adjacent_blocks(w, r, m):
    part = w.partition
    if part.n < 2:
        return 0.0
    b, ell = part.breakpoints, part.lengths
    mid = b[1:-1]
    left, right = np.arange(part.n - 1), np.arange(1, part.n)
    L1, L2 = ell[:-1], ell[1:]
    sq = np.minimum(L1, L2)

    uj, wj = _jacobi01(m, -2 * r)
    v, wv = _legendre01(m)
    U, V = np.meshgrid(uj, v, indexing="ij")
    Wq = np.outer(wj, wv)

    def block(p, q):
        # p = distance into the left piece, q = distance into the right piece
        li = np.broadcast_to(left[:, None, None], p.shape)
        ri = np.broadcast_to(right[:, None, None], p.shape)
        x = mid[:, None, None] - p
        y = mid[:, None, None] + q
        return (w.evaluate_piece(y, ri) - w.evaluate_piece(x, li)) ** 2

    s3 = sq[:, None, None]
    total = 0.0
    # Duffy triangles of the corner square; Jacobian s^2 u, kernel (s u (1+v))^{-1-2r}
    for p, q in ((s3 * U, s3 * U * V), (s3 * U * V, s3 * U)):
        num = block(p, q)
        integrand = num * (1 + V) ** (-1 - 2 * r)
        total += float(np.sum(sq ** (1 - 2 * r) * np.sum(integrand * Wq, axis=(1, 2))))

    # leftover rectangles when neighbouring pieces differ in length
    tg, wg = _legendre01(m)
    for k in np.nonzero(np.abs(L1 - L2) > 1e-15 * np.maximum(L1, L2))[0]:
        s = sq[k]
        if L1[k] > s:
            p_rng, q_rng = (s, L1[k]), (0.0, s)
        else:
            p_rng, q_rng = (0.0, s), (s, L2[k])
        total += _rect_panels(w, mid[k], left[k], right[k], p_rng, q_rng, r, tg, wg, s)
    return 2.0 * total


def _rect_panels(w, mid, li, ri, p_rng, q_rng, r, tg, wg, size):
    total = 0.0
    np_ = max(1, int(np.ceil((p_rng[1] - p_rng[0]) / size - 1e-12)))
    nq_ = max(1, int(np.ceil((q_rng[1] - q_rng[0]) / size - 1e-12)))
    pe = np.linspace(*p_rng, np_ + 1)
    qe = np.linspace(*q_rng, nq_ + 1)
    for i in range(np_):
        for j in range(nq_):
            hp, hq = pe[i + 1] - pe[i], qe[j + 1] - qe[j]
            P = pe[i] + hp * tg[:, None]
            Q = qe[j] + hq * tg[None, :]
            P, Q = np.broadcast_arrays(P, Q)
            num = (w.evaluate_piece(mid + Q, np.full(Q.shape, ri))
                   - w.evaluate_piece(mid - P, np.full(P.shape, li))) ** 2
            total += hp * hq * float(np.sum(np.outer(wg, wg) * num / (P + Q) ** (1 + 2 * r)))
    return total


def pairing_error_constant(s: float) -> float:
    """C(s) = 1/(s(s+1)) - 1/(s(s+1)2^s) - 1/(2s)."""
    return 1 / (s * (s + 1)) - 1 / (s * (s + 1) * 2**s) - 1 / (2 * s)


def _hat(x, htilde, h):
    return 1.0 - np.abs(x - htilde / 2) / h


def pairing_power_density(s: float, htilde: float, h: float, xi: float | None = None,
                          check: bool = True):
    """Pairings of phi(x) = x^{s-1} on (0, htilde) with the hat
    v_h(x) = 1 - |x - htilde/2| / h.

    Returns ``(exact_pairing, dirac_pairing, error)``.  The exact pairing is
    the closed form; with ``check`` it is first compared with adaptive
    quadrature and a ``RuntimeError`` is raised on disagreement.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    if htilde <= 0 or h <= 0:
        raise ValueError("htilde and h must be positive")
    xi = htilde / 2 if xi is None else float(xi)
    if not 0.0 <= xi <= htilde:
        raise ValueError("collocation point must lie in [0, htilde]")
    mass = htilde**s / s
    exact = mass + pairing_error_constant(s) * htilde ** (s + 1) / h
    if check:
        oracle = _pairing_quadrature(s, htilde, h)
        if abs(oracle - exact) > 1e-10 * max(1.0, abs(exact)):
            raise RuntimeError(f"closed form {exact!r} disagrees with quadrature {oracle!r}")
    dirac = mass * _hat(xi, htilde, h)
    return exact, dirac, abs(exact - dirac)


def _pairing_quadrature(s, htilde, h):
    # x^{s-1} is handled by the algebraic weight; split at the kink of the hat
    half = htilde / 2
    left, _ = integrate.quad(lambda x: _hat(x, htilde, h), 0.0, half,
                             weight="alg", wvar=(s - 1, 0.0), epsabs=0, epsrel=1e-13)
    right, _ = integrate.quad(lambda x: x ** (s - 1) * _hat(x, htilde, h), half, htilde,
                              epsabs=0, epsrel=1e-13, limit=200)
    return left + right


def lemma1_order_study(v: Callable, r: float, n_sequence: Sequence[int],
                       rule="midpoint", quad: FractionalQuad | None = None):
    """Interpolation errors ||v - P0 v||_{H^r} on uniform partitions.

    Returns a list of dicts with keys h, n, l2, seminorm, total.
    """
    rows = []
    for n in n_sequence:
        part = uniform_partition(int(n), rule)
        err = PiecewiseFunction1D.sampled(part, v) - p0_interpolate(v, part)
        l2, semi, total = fractional_norm(err, r, quad)
        rows.append({"h": 1.0 / n, "n": int(n), "l2": l2, "seminorm": semi, "total": total})
    return rows
