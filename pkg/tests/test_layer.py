import math

import numpy as np
import pytest
from scipy import integrate

from diracfem.grid2d import FeField, build_grid, interpolate, locate, seminorm_h1
from diracfem.harness import random_band_fields
from diracfem.layer import (Circle, DiracLayer, LayerDensity, assemble_dirac_load,
                            dirac_matrix, discrete_trace_seminorm, grid_crossings, layer_weights,
                            pairing_exact, partition_circle)

CIRCLE = Circle((0.5, 0.5), 0.3)


def test_partition_count_and_lengths():
    part = partition_circle(CIRCLE, 0.1)
    assert part.n_arcs == 19
    assert np.allclose(part.arc_lengths, 2 * math.pi * 0.3 / 19, rtol=1e-14)
    assert part.arc_lengths.sum() == pytest.approx(2 * math.pi * 0.3, abs=1e-12)


def test_partition_left_rule_and_range():
    part = partition_circle(CIRCLE, 0.05, "left")
    assert np.array_equal(part.collocation_angles, part.angles[:-1])
    for bad in (0.0, -1.0, 2 * math.pi * 0.3):
        with pytest.raises(ValueError):
            partition_circle(CIRCLE, bad)


def test_points_lie_on_circle():
    part = partition_circle(CIRCLE, 0.01, 0.3)
    r, _ = CIRCLE.polar(*part.points.T)
    assert np.max(np.abs(r - 0.3)) <= 1e-12


def test_constant_weights():
    part = partition_circle(CIRCLE, 0.07)
    lam = layer_weights(LayerDensity.constant(1.0), part).weights
    assert np.allclose(lam, 2 * math.pi * 0.3 / part.n_arcs, rtol=1e-14)


def test_sine_weights_sum_and_quarter_arc():
    lam = layer_weights(LayerDensity.sine_series([1.0]), partition_circle(CIRCLE, 0.03)).weights
    assert abs(lam.sum()) <= 1e-12
    unit = Circle((0.5, 0.5), 1.0)
    quarter = partition_circle(unit, 2 * math.pi / 4)
    assert layer_weights(LayerDensity.sine_series([1.0]), quarter).weights[0] == pytest.approx(
        1.0, abs=1e-14)


def test_power_density_rejected():
    with pytest.raises(ValueError):
        layer_weights(LayerDensity.power1d(0.5), partition_circle(CIRCLE, 0.1))
    with pytest.raises(ValueError):
        LayerDensity.sine_series([1.0, np.nan])


def test_closed_form_weights_vs_quadrature(rng):
    for _ in range(20):
        m = int(rng.integers(1, 40))
        coefs = rng.standard_normal(m) / np.arange(1, m + 1)
        density = LayerDensity.sine_series(coefs)
        part = partition_circle(CIRCLE, float(rng.uniform(0.02, 0.4)), theta0=rng.uniform(0, 6))
        lam = layer_weights(density, part).weights
        for i in range(part.n_arcs):
            a, b = part.angles[i], part.angles[i + 1]
            ref, _ = integrate.quad(lambda t: density(np.array(t)), a, b, limit=200,
                                    epsabs=1e-14, epsrel=1e-13)
            assert lam[i] == pytest.approx(0.3 * ref, abs=1e-10)


def test_dirac_at_node_and_center():
    g = build_grid(4)
    b = assemble_dirac_load(g, DiracLayer([[0.5, 0.25]], [2.0]))
    expected = np.zeros(g.n_nodes)
    expected[1 * 5 + 2] = 2.0
    assert np.array_equal(b, expected)
    b = assemble_dirac_load(g, DiracLayer([[0.375, 0.375]], [1.0]))
    assert sorted(b[b != 0].tolist()) == [0.25] * 4


def test_dirac_load_sums_and_linearity(rng):
    g = build_grid(16)
    part = partition_circle(CIRCLE, 0.04)
    lam, mu = rng.standard_normal((2, part.n_arcs))
    load = lambda w: assemble_dirac_load(g, DiracLayer(part.points, w))  # noqa: E731
    assert abs(load(lam).sum() - lam.sum()) <= 1e-13
    # linear up to summation-order roundoff
    assert np.max(np.abs(load(lam + mu) - load(lam) - load(mu))) <= 1e-14


def test_dirac_rejects_outside_and_boundary():
    g = build_grid(4)
    with pytest.raises(ValueError):
        dirac_matrix(g, [[1.2, 0.5]])
    with pytest.raises(ValueError):
        dirac_matrix(g, [[0.0, 0.5]])


def test_grid_crossings_split_arcs_by_cell():
    g = build_grid(16)
    th = grid_crossings(g, CIRCLE)
    assert th[0] == 0.0 and th[-1] == 2 * math.pi and np.all(np.diff(th) > 0)
    t = th[:-1, None] + np.diff(th)[:, None] * np.array([0.1, 0.5, 0.9])[None, :]
    cells, _ = locate(g, CIRCLE.point(t.ravel()))
    cells = cells.reshape(t.shape)
    assert np.all(cells == cells[:, :1])


def test_trace_seminorm_examples():
    g = build_grid(16)
    assert discrete_trace_seminorm(interpolate(g, lambda x, y: 2 + 0 * x), CIRCLE) <= 1e-13
    val = discrete_trace_seminorm(interpolate(g, lambda x, y: x), CIRCLE)
    assert val**2 == pytest.approx(2 * math.pi * 0.3, rel=1e-12)


def test_pairing_exact_examples():
    g = build_grid(16)
    one = interpolate(g, lambda x, y: 1 + 0 * x)
    assert pairing_exact(LayerDensity.constant(1.0), one, CIRCLE) == pytest.approx(
        2 * math.pi * 0.3, rel=1e-13)
    assert abs(pairing_exact(LayerDensity.sine_series([1.0]), one, CIRCLE)) <= 1e-13


def test_pairing_of_smooth_field_vs_polar_quadrature():
    g = build_grid(32)
    density = LayerDensity.sine_series([1.0, 0.5])
    field = interpolate(g, lambda x, y: x * y)
    ref, _ = integrate.quad(lambda t: density(np.array(t)) * float(
        np.prod(CIRCLE.point(t))), 0, 2 * math.pi, epsabs=1e-14, limit=200)
    # x y is bilinear, so the field reproduces it exactly on the circle
    assert pairing_exact(density, field, CIRCLE) == pytest.approx(0.3 * ref, abs=1e-12)


def test_dirac_pairing_error_bound(rng):
    """|<phi, v_h> - sum lambda_i v_h(x_i)| / (h^{1/2} |v_h|_1) stays bounded (s = 1/2)."""
    n = np.arange(1, 257, dtype=float)
    density = LayerDensity.sine_series(n**-0.5 / 0.18)
    worst = []
    for k in (4, 5, 6, 7):
        g = build_grid(2**k)
        dirac = layer_weights(density, partition_circle(CIRCLE, g.h))
        D = dirac_matrix(g, dirac.points)
        ratios = []
        for f in random_band_fields(g, CIRCLE, 50, rng):
            err = abs(pairing_exact(density, f, CIRCLE) - dirac.weights @ (D @ f.coefficients))
            ratios.append(err / (math.sqrt(g.h) * seminorm_h1(f)))
        worst.append(max(ratios))
    worst = np.array(worst)
    assert np.all(np.isfinite(worst))
    # bounded: no growth under refinement beyond a factor 2 per halving, none overall
    assert np.all(worst[1:] <= 2.0 * worst[:-1])
    assert worst.max() <= 2.0 * worst[0]


def test_band_fields_are_supported_near_circle(rng):
    g = build_grid(16)
    (f,) = random_band_fields(g, CIRCLE, 1, rng)
    nodes = g.nodes[f.coefficients != 0]
    r, _ = CIRCLE.polar(*nodes.T)
    assert np.all(np.abs(r - 0.3) <= math.sqrt(2) * g.h)
    assert np.all(f.coefficients[g.boundary_mask] == 0)
    assert isinstance(f, FeField)
