import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diracfem.manufactured import (ManufacturedPoisson, RadialSaddleCase, chi_eval, density_phi,
                                   exact_grad_u, exact_u, radial_case, rhs_f)

CASE = ManufacturedPoisson(0.3, 0.5, 256)


def test_chi_values():
    eps = 0.07
    v, d1, d2 = chi_eval(eps, np.array([0.0, eps, eps / 2, -1.0, 2.0]))
    assert v.tolist()[:2] == [1.0, 0.0]
    assert v[2] == pytest.approx(0.5, abs=1e-15)
    assert v[3] == 1.0 and v[4] == 0.0
    assert np.all(d1[[0, 1, 3, 4]] == 0) and np.all(d2[[0, 1, 3, 4]] == 0)
    with pytest.raises(ValueError):
        chi_eval(0.0, 0.1)


@settings(max_examples=50)
@given(st.floats(0.01, 1.0), st.floats(0.0, 1.0))
def test_chi_monotone_and_consistent(eps, t):
    x = t * eps
    v, d1, d2 = chi_eval(eps, x)
    assert d1 <= 0.0
    step = 1e-6 * eps
    vp, d1p, _ = chi_eval(eps, x + step)
    vm, d1m, _ = chi_eval(eps, x - step)
    assert (vp - vm) / (2 * step) == pytest.approx(float(d1), abs=1e-6 / eps)
    assert (d1p - d1m) / (2 * step) == pytest.approx(float(d2), abs=1e-4 / eps**2)


def test_case_geometry():
    assert CASE.rho == pytest.approx(0.2)
    assert CASE.r_max == pytest.approx(0.5)
    assert CASE.slope == pytest.approx(1 - 0.5 / 0.3)
    with pytest.raises(ValueError):
        ManufacturedPoisson(0.6)


def test_u_vanishes_far_out_and_at_center():
    assert exact_u(CASE, 0.5, 0.5) == 0.0
    r = 0.3 + 2 * 0.2 / 3 + 1e-9
    th = np.linspace(0, 2 * np.pi, 50)
    x, y = 0.5 + r * np.cos(th), 0.5 + r * np.sin(th)
    assert np.all(exact_u(CASE, x, y) == 0.0)
    assert np.all(exact_grad_u(CASE, x, y) == 0.0)


def test_u_zero_on_square_boundary(rng):
    t = rng.random(250)
    pts = np.concatenate([np.c_[t, 0 * t], np.c_[t, 1 + 0 * t], np.c_[0 * t, t], np.c_[1 + 0 * t, t]])
    assert np.max(np.abs(exact_u(CASE, pts[:, 0], pts[:, 1]))) <= 1e-14


def test_continuity_across_circle(rng):
    th = rng.uniform(0, 2 * np.pi, 100)
    x, y = 0.5 + 0.3 * np.cos(th), 0.5 + 0.3 * np.sin(th)
    d = 1e-13
    inner = exact_u(CASE, x - d * np.cos(th), y - d * np.sin(th))
    outer = exact_u(CASE, x + d * np.cos(th), y + d * np.sin(th))
    assert np.max(np.abs(inner - outer)) <= 1e-10


def test_jump_reproduces_density(rng):
    th = rng.uniform(0.05, 2 * np.pi - 0.05, 100)
    x, y = 0.5 + 0.3 * np.cos(th), 0.5 + 0.3 * np.sin(th)
    n = np.stack([np.cos(th), np.sin(th)], -1)
    dr_in = np.sum(exact_grad_u(CASE, x, y, side="inner") * n, axis=1)
    dr_out = np.sum(exact_grad_u(CASE, x, y, side="outer") * n, axis=1)
    phi = density_phi(CASE)(th)
    # inner minus outer equals +phi, so -Laplacian(u) = phi delta_gamma + f
    assert np.max(np.abs((dr_in - dr_out) - phi)) <= 1e-8 * np.max(np.abs(phi))


def _sample_off_circle(rng, m, gap=0.02):
    P = rng.uniform(0.02, 0.98, (m, 2))
    r = np.hypot(P[:, 0] - 0.5, P[:, 1] - 0.5)
    return P[np.abs(r - 0.3) > gap]


def test_gradient_matches_finite_differences(rng):
    P = _sample_off_circle(rng, 200)
    step = 1e-6
    g = exact_grad_u(CASE, P[:, 0], P[:, 1])
    fx = (exact_u(CASE, P[:, 0] + step, P[:, 1]) - exact_u(CASE, P[:, 0] - step, P[:, 1])) / (2 * step)
    fy = (exact_u(CASE, P[:, 0], P[:, 1] + step) - exact_u(CASE, P[:, 0], P[:, 1] - step)) / (2 * step)
    assert np.max(np.abs(g - np.c_[fx, fy])) <= 1e-6


@pytest.mark.parametrize("s", [0.25, 1.0])
def test_source_matches_five_point_laplacian(rng, s):
    case = ManufacturedPoisson(0.3, s, 256)
    P = _sample_off_circle(rng, 200, gap=0.03)
    x, y, d = P[:, 0], P[:, 1], 1e-4
    u = lambda a, b: exact_u(case, a, b)  # noqa: E731
    lap = (u(x + d, y) + u(x - d, y) + u(x, y + d) + u(x, y - d) - 4 * u(x, y)) / d**2
    f = rhs_f(case, x, y)
    scale = np.max(np.abs(f))
    assert np.max(np.abs(f + lap)) <= 1e-4 * scale


def test_source_vanishes_in_harmonic_band(rng):
    r = rng.uniform(0.3 + 1e-6, 0.3 + 0.2 / 3, 100)
    th = rng.uniform(0, 2 * np.pi, 100)
    f = rhs_f(CASE, 0.5 + r * np.cos(th), 0.5 + r * np.sin(th))
    assert np.all(f == 0.0)


def test_density_coefficients():
    c = density_phi(CASE).coefficients
    assert c[0] == pytest.approx(0.5 / 0.09, rel=1e-15)
    assert c[3] / c[0] == pytest.approx(4**-0.5, rel=1e-14)
    assert c.size == 256


def test_truncation_rule():
    assert ManufacturedPoisson(n_series=2048).truncation_ok(2.0**-8)
    assert not ManufacturedPoisson(n_series=256).truncation_ok(2.0**-6)


def test_radial_case(rng):
    case = RadialSaddleCase()
    u, grad, f, mag = radial_case(case)
    assert mag == 1.0
    th = rng.uniform(0, 2 * np.pi, 100)
    # sampled points sit within roundoff of the circle, where u = (r - R) chi
    assert np.max(np.abs(u(0.5 + 0.3 * np.cos(th), 0.5 + 0.3 * np.sin(th)))) <= 1e-15
    t = rng.random(100)
    assert np.all(u(t, 0 * t) == 0.0) and np.all(u(1 + 0 * t, t) == 0.0)
    g, dg, _ = case.profile(np.array([0.3, 0.3 + 2 * 0.2 / 3]))
    assert g[0] == 0.0 and dg[0] == 1.0 and g[1] == 0.0
    # f against a finite-difference radial Laplacian, away from the chi joins
    r = rng.uniform(0.3, 0.5, 200)
    r = r[(np.abs(r - 0.3 - 0.2 / 3) > 1e-3) & (np.abs(r - 0.3 - 0.4 / 3) > 1e-3)
          & (np.abs(r - 0.3) > 1e-3)]
    d = 1e-4
    gp, g0, gm = (case.profile(r + d)[0], case.profile(r)[0], case.profile(r - d)[0])
    lap = (gp - 2 * g0 + gm) / d**2 + (gp - gm) / (2 * d * r)
    assert np.max(np.abs(f(0.5 + r, 0.5 + 0 * r) + lap)) <= 1e-4 * max(1.0, np.max(np.abs(lap)))
    assert np.all(f(np.full(5, 0.5), np.linspace(0.3, 0.7, 5)) == 0.0)
    assert math.isclose(np.hypot(*grad(np.array([0.85]), np.array([0.5]))[0]), 1.0)
