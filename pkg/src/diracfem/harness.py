"""Experiment drivers, order fitting and CSV output.

Every driver is deterministic for a given config (random fields come from
``numpy.random.default_rng(seed)``).  Rows carry wall-clock times unless
``timing`` is switched off, which makes the CSV byte-reproducible.
"""
from __future__ import annotations

import dataclasses
import io
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import oned
from .grid2d import (FeField, QuadRule, SparseSystem, apply_dirichlet, assemble_stiffness,
                     assemble_volume_load, build_grid, cut_cells)
from .layer import (Circle, assemble_dirac_load, layer_weights, partition_circle,
                    trace_ratio)
from .manufactured import (ManufacturedPoisson, RadialSaddleCase, density_phi, exact_grad_u,
                           exact_u, radial_case, rhs_f)
from .norms2d import h1_error, l2_error, region_energy
from .solver import SaddleSystem, SolverError, build_constraints, cg_solve, saddle_solve

log = logging.getLogger(__name__)

STUDIES = ("poisson", "saddle", "oned", "lemma1", "trace")
CSV_HEADER = "study,s,h,htilde,dofs,n_constraints,error_h1,error_l2,solver_iters,wall_ms"


class ConfigError(ValueError):
    pass


def _power_of_two_exponent(h: float) -> int:
    k = -math.log2(h)
    if h <= 0 or abs(k - round(k)) > 1e-12:
        raise ConfigError(f"h = {h!r} is not a power of two")
    return int(round(k))


@dataclass
class ExperimentConfig:
    study: str = "poisson"
    h_max: float = 2.0**-4
    h_min: float = 2.0**-7
    s: tuple = (0.25, 0.5, 0.75, 1.0)
    htilde_rule: str = "equal"  # equal | ratio | fixed
    htilde_ratio: Optional[float] = None  # study default: 1 in 2D, 2 for oned
    htilde: Optional[float] = None
    collocation: str = "midpoint"
    radius: float = 0.3
    center_x: float = 0.5
    center_y: float = 0.5
    n_series: int = 2048
    quad_order: int = 5
    cut_order: int = 3
    cut_depth: int = 3
    focus_depth: int = 12
    cg_tol: float = 1e-12
    tol_inner: float = 1e-12
    tol_outer: float = 1e-10
    maxit: int = 20_000
    r: tuple = (0.0, 0.25, 0.4)
    n_list: tuple = (16, 32, 64, 128)
    n_fields: int = 100
    seed: int = 0
    timing: bool = True
    out: str = "-"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.study not in STUDIES:
            raise ConfigError(f"unknown study {self.study!r}")
        if self.htilde_rule not in ("equal", "ratio", "fixed"):
            raise ConfigError(f"unknown htilde rule {self.htilde_rule!r}")
        if self.htilde_rule == "fixed" and not (self.htilde and self.htilde > 0):
            raise ConfigError("htilde_rule = fixed needs a positive htilde")
        if self.htilde_ratio is not None and self.htilde_ratio <= 0:
            raise ConfigError("htilde_ratio must be positive")
        if self.h_min > self.h_max:
            raise ConfigError("h_min exceeds h_max")
        _power_of_two_exponent(self.h_max)
        _power_of_two_exponent(self.h_min)
        if self.study == "poisson" and self.n_series < 2 * math.pi / self.h_min:
            raise ConfigError(
                f"n_series = {self.n_series} < 2 pi / h_min = {2 * math.pi / self.h_min:.1f}")
        if not self.s or any(v <= 0 for v in self.s):
            raise ConfigError("s values must be positive")
        if any(not 0 <= v < 0.5 for v in self.r):
            raise ConfigError("fractional orders r must lie in [0, 1/2)")

    @property
    def h_list(self) -> list:
        k0, k1 = _power_of_two_exponent(self.h_max), _power_of_two_exponent(self.h_min)
        return [2.0**-k for k in range(k0, k1 + 1)]

    @property
    def quad(self) -> QuadRule:
        return QuadRule(self.quad_order, self.cut_order, self.cut_depth, self.focus_depth)

    def ratio(self) -> float:
        if self.htilde_ratio is not None:
            return self.htilde_ratio
        return 2.0 if self.study == "oned" else 1.0

    def target_htilde(self, h: float) -> float:
        if self.htilde_rule == "fixed":
            return float(self.htilde)
        if self.htilde_rule == "ratio" or self.htilde_ratio is not None:
            return self.ratio() * h
        return 2.0 * h if self.study == "oned" else h


def _parse_value(kind, text: str):
    text = text.strip()
    if kind is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {text!r}")
    if kind is float:
        if "^" in text:
            base, exp = text.split("^", 1)
            return float(base) ** float(exp)
        return float(text)
    if kind is int:
        return int(text)
    return text


_KINDS = {
    "h_max": float, "h_min": float, "htilde_ratio": float, "htilde": float,
    "radius": float, "center_x": float, "center_y": float, "n_series": int,
    "quad_order": int, "cut_order": int, "cut_depth": int, "focus_depth": int,
    "cg_tol": float, "tol_inner": float, "tol_outer": float, "maxit": int,
    "n_fields": int, "seed": int, "timing": bool,
    "s": (float,), "r": (float,), "n_list": (int,),
}


def parse_config_text(text: str, **defaults) -> ExperimentConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    values = dict(defaults)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in names:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = coerce(key, val)
    try:
        return ExperimentConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def coerce(key: str, val):
    kind = _KINDS.get(key, str)
    try:
        if isinstance(kind, tuple):
            if not isinstance(val, str):
                return tuple(kind[0](v) for v in val)
            return tuple(_parse_value(kind[0], v) for v in val.split(",") if v.strip())
        return _parse_value(kind, val) if isinstance(val, str) else kind(val)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {val!r}") from exc


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config_text(text)
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


@dataclass
class ConvergenceReport:
    study: str
    s: Optional[float]
    rows: list = field(default_factory=list)
    fitted_order: float = float("nan")
    pairwise_orders: list = field(default_factory=list)

    def errors(self, key="error_h1"):
        return np.array([r[key] for r in self.rows], dtype=float)

    @property
    def failed(self) -> bool:
        return any(r.get("failed") for r in self.rows)


def fit_order(rows):
    """Least-squares slope of log(error) against log(h), plus pairwise slopes.

    ``rows`` is a sequence of (h, error) pairs."""
    rows = sorted(((float(h), float(e)) for h, e in rows), key=lambda t: -t[0])
    if len(rows) < 2:
        raise ValueError("need at least two (h, error) rows to fit an order")
    h = np.array([r[0] for r in rows])
    e = np.array([r[1] for r in rows])
    if np.any(e <= 0) or np.any(h <= 0):
        raise ValueError("errors and mesh sizes must be positive")
    lh, le = np.log(h), np.log(e)
    slope = float(np.polyfit(lh, le, 1)[0])
    pairwise = list(np.diff(le) / np.diff(lh))
    return slope, [float(p) for p in pairwise]


def _finish(report: ConvergenceReport, key="error_h1"):
    report.rows.sort(key=lambda r: -r["h"])
    good = [(r["h"], r[key]) for r in report.rows if not r.get("failed") and r[key] > 0]
    if len(good) >= 2:
        report.fitted_order, report.pairwise_orders = fit_order(good)
    return report


def _ms(t0, cfg):
    return int(round((time.perf_counter() - t0) * 1000)) if cfg.timing else 0


def _circle_warnings(cfg, circle, h):
    if circle.radius < h:
        log.warning("radius %.3g is below h = %.3g; the trace bound assumes R > h",
                    circle.radius, h)
    if cfg.target_htilde(h) < h:
        log.warning("htilde < h at h = %.3g: consistency and constraint crowding degrade", h)


def poisson_row(cfg: ExperimentConfig, s: float, h: float) -> dict:
    """One rung of the manufactured Poisson ladder."""
    t0 = time.perf_counter()
    grid = build_grid(round(1 / h))
    case = ManufacturedPoisson(cfg.radius, s, cfg.n_series)
    if not case.truncation_ok(h):
        raise ConfigError(f"n_series {cfg.n_series} < 2 pi / h at h = {h}")
    circle = case.circle
    _circle_warnings(cfg, circle, h)
    part = partition_circle(circle, cfg.target_htilde(h), cfg.collocation)
    dirac = layer_weights(density_phi(case), part)
    quad, focus = cfg.quad, case.singular_point
    rhs = assemble_dirac_load(grid, dirac) + assemble_volume_load(
        grid, lambda x, y: rhs_f(case, x, y), quad, cut=circle, focus=focus)
    system = apply_dirichlet(SparseSystem(assemble_stiffness(grid), rhs), grid)
    row = dict(study="poisson", s=s, h=h, htilde=part.htilde, dofs=system.interior.size,
               n_constraints=part.n_arcs)
    try:
        res = cg_solve(system, tol=cfg.cg_tol, maxit=cfg.maxit)
        if not res.converged:
            raise SolverError(f"CG residual {res.residual:.2e} after {res.iterations} iterations")
    except SolverError as exc:
        log.error("poisson s=%g h=%g: %s", s, h, exc)
        return {**row, "error_h1": float("nan"), "error_l2": float("nan"),
                "solver_iters": 0, "wall_ms": _ms(t0, cfg), "failed": True}
    uh = FeField(grid, system.expand(res.x))
    e1 = h1_error(uh, lambda x, y: exact_grad_u(case, x, y), circle, quad, focus=focus)
    e0 = l2_error(uh, lambda x, y: exact_u(case, x, y), circle, quad, focus=focus)
    return {**row, "error_h1": e1, "error_l2": e0, "solver_iters": res.iterations,
            "wall_ms": _ms(t0, cfg)}


def run_poisson_convergence(cfg: ExperimentConfig) -> list:
    """One ConvergenceReport per s value."""
    reports = []
    for s in cfg.s:
        rep = ConvergenceReport("poisson", s)
        for h in cfg.h_list:
            rep.rows.append(poisson_row(cfg, s, h))
            log.info("poisson s=%g h=2^%d: %s", s, round(math.log2(h)), rep.rows[-1]["error_h1"])
        reports.append(_finish(rep))
    return reports


def saddle_row(cfg: ExperimentConfig, h: float) -> dict:
    t0 = time.perf_counter()
    grid = build_grid(round(1 / h))
    case = RadialSaddleCase(cfg.radius, (cfg.center_x, cfg.center_y))
    circle = case.circle
    if circle.margin <= 0:
        raise ConfigError("the circle must lie strictly inside the unit square")
    _circle_warnings(cfg, circle, h)
    u, grad, f, _ = radial_case(case)
    part = partition_circle(circle, cfg.target_htilde(h), cfg.collocation)
    quad = cfg.quad
    rhs = assemble_volume_load(grid, f, quad, cut=circle)
    system = apply_dirichlet(SparseSystem(assemble_stiffness(grid), rhs), grid)
    B = build_constraints(grid, part.points, system.interior)
    row = dict(study="saddle", s=None, h=h, htilde=part.htilde, dofs=system.interior.size,
               n_constraints=part.n_arcs)
    try:
        res = saddle_solve(SaddleSystem(system, B), cfg.tol_outer, cfg.tol_inner,
                           maxit_inner=cfg.maxit)
    except SolverError as exc:
        log.error("saddle h=%g: %s", h, exc)
        return {**row, "error_h1": float("nan"), "error_l2": float("nan"),
                "solver_iters": 0, "wall_ms": _ms(t0, cfg), "failed": True}
    uh = FeField(grid, system.expand(res.u))
    inside = lambda x, y: circle.polar(x, y)[0] < circle.radius  # noqa: E731
    density = res.multipliers / part.arc_lengths
    window = np.convolve(np.r_[density[-2:], density, density[:2]], np.ones(5) / 5, "valid")
    return {
        **row,
        "error_h1": h1_error(uh, grad, circle, quad),
        "error_l2": l2_error(uh, u, circle, quad),
        "solver_iters": res.outer_iterations,
        "wall_ms": _ms(t0, cfg),
        "inner_iters": res.inner_iterations,
        "constraint_residual": res.constraint_residual,
        "interior_energy": region_energy(uh, inside, circle, quad),
        "density_min": float(np.min(np.abs(density))),
        "density_max": float(np.max(np.abs(density))),
        "density_mean": float(np.mean(density)),
        "density_window_min": float(window.min()),
        "density_window_max": float(window.max()),
    }


def run_saddle_convergence(cfg: ExperimentConfig) -> ConvergenceReport:
    rep = ConvergenceReport("saddle", None)
    for h in cfg.h_list:
        rep.rows.append(saddle_row(cfg, h))
        log.info("saddle h=2^%d: %s", round(math.log2(h)), rep.rows[-1]["error_h1"])
    return _finish(rep)


def run_oned_suite(cfg: ExperimentConfig) -> list:
    """Power-density pairing errors with x_i = htilde / 2 and h = htilde / ratio.

    The ``h`` column holds the hat width; orders are fitted in htilde."""
    reports = []
    for s in cfg.s:
        rep = ConvergenceReport("oned", s)
        for h in cfg.h_list:
            t0 = time.perf_counter()
            ht = cfg.target_htilde(h)
            exact, dirac, err = oned.pairing_power_density(s, ht, h)
            predicted = abs(oned.pairing_error_constant(s)) * ht ** (s + 1) / h
            rep.rows.append(dict(study="oned", s=s, h=h, htilde=ht, dofs=None, n_constraints=1,
                                 error_h1=err, error_l2=None, solver_iters=None,
                                 wall_ms=_ms(t0, cfg), predicted=predicted,
                                 exact_pairing=exact, dirac_pairing=dirac))
        rep.rows.sort(key=lambda r: -r["h"])
        rep.fitted_order, rep.pairwise_orders = fit_order(
            [(r["htilde"], r["error_h1"]) for r in rep.rows])
        reports.append(rep)
    return reports


def run_lemma1(cfg: ExperimentConfig, v=None) -> list:
    """H^r interpolation errors of v (default sin 2 pi x); ``s`` column holds r."""
    v = v or (lambda x: np.sin(2 * np.pi * x))
    reports = []
    for r in cfg.r:
        rep = ConvergenceReport("lemma1", r)
        for row in oned.lemma1_order_study(v, r, cfg.n_list, cfg.collocation):
            rep.rows.append(dict(study="lemma1", s=r, h=row["h"], htilde=None, dofs=row["n"],
                                 n_constraints=None, error_h1=row["total"],
                                 error_l2=row["l2"], solver_iters=None, wall_ms=0,
                                 seminorm=row["seminorm"]))
        reports.append(_finish(rep))
    return reports


def random_band_fields(grid, circle, n_fields: int, rng) -> list:
    """Random nodal fields supported on the cells met by the circle."""
    cells = np.nonzero(cut_cells(grid, circle))[0]
    nodes = np.unique(grid.cell_nodes(cells))
    nodes = nodes[~grid.boundary_mask[nodes]]
    fields = []
    for _ in range(n_fields):
        c = np.zeros(grid.n_nodes)
        c[nodes] = rng.uniform(-1.0, 1.0, nodes.size)
        fields.append(FeField(grid, c))
    return fields


def run_trace(cfg: ExperimentConfig) -> ConvergenceReport:
    """Discrete trace ratios; error_h1 holds the max ratio, error_l2 the mean."""
    rng = np.random.default_rng(cfg.seed)
    circle = Circle((cfg.center_x, cfg.center_y), cfg.radius)
    rep = ConvergenceReport("trace", None)
    for h in cfg.h_list:
        t0 = time.perf_counter()
        grid = build_grid(round(1 / h))
        _circle_warnings(cfg, circle, h)
        ratios = np.array([trace_ratio(f, circle)
                           for f in random_band_fields(grid, circle, cfg.n_fields, rng)])
        rep.rows.append(dict(study="trace", s=None, h=h, htilde=None, dofs=grid.interior_nodes.size,
                             n_constraints=None, error_h1=float(ratios.max()),
                             error_l2=float(ratios.mean()), solver_iters=None,
                             wall_ms=_ms(t0, cfg)))
    return _finish(rep)


def run_lemma_studies(cfg: ExperimentConfig):
    return run_lemma1(cfg), run_trace(cfg)


def run_study(cfg: ExperimentConfig) -> list:
    if cfg.study == "poisson":
        return run_poisson_convergence(cfg)
    if cfg.study == "saddle":
        return [run_saddle_convergence(cfg)]
    if cfg.study == "oned":
        return run_oned_suite(cfg)
    if cfg.study == "lemma1":
        return run_lemma1(cfg)
    return [run_trace(cfg)]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    cols = CSV_HEADER.split(",")
    for rep in reports:
        for row in rep.rows:
            buf.write(",".join(row["study"] if c == "study" else _fmt(row.get(c)) for c in cols))
            buf.write("\n")
    for rep in reports:
        pair = ";".join(_fmt(p) for p in rep.pairwise_orders)
        buf.write(f"#order,{rep.study},{_fmt(rep.s)},{_fmt(rep.fitted_order)},{pair}\n")
    return buf.getvalue()


def check_reports(cfg: ExperimentConfig, reports) -> list:
    """Threshold checks per study; returns a list of violation messages."""
    bad = []
    if cfg.study == "poisson":
        saturated = []
        for rep in reports:
            s, p = rep.s, rep.fitted_order
            lo, hi = (s, 0.6) if s < 0.5 else (0.4, 0.8)
            if not lo <= p <= hi:
                bad.append(f"poisson s={s}: order {p:.3f} outside [{lo}, {hi}]")
            if np.any(np.diff(rep.errors()) >= 0):
                bad.append(f"poisson s={s}: errors do not decrease strictly")
            if s > 0.5:
                saturated.append(p)
        if len(saturated) > 1 and max(saturated) - min(saturated) >= 0.15:
            bad.append(f"poisson: saturated orders spread {max(saturated) - min(saturated):.3f}")
    elif cfg.study == "saddle":
        rep = reports[0]
        if not rep.fitted_order >= 0.45:
            bad.append(f"saddle: order {rep.fitted_order:.3f} < 0.45")
        if any(r.get("constraint_residual", np.inf) > 1e-9 for r in rep.rows):
            bad.append("saddle: ||B u_h||_inf above 1e-9")
        energy = [r.get("interior_energy", np.nan) for r in rep.rows]
        if not np.all(np.diff(energy) < 0):
            bad.append("saddle: interior energy not decreasing")
    elif cfg.study == "oned":
        for rep in reports:
            if abs(rep.fitted_order - rep.s) > 1e-6:
                bad.append(f"oned s={rep.s}: order {rep.fitted_order:.8f} != s")
            for r in rep.rows:
                if abs(r["error_h1"] - r["predicted"]) > 1e-10 * r["predicted"]:
                    bad.append(f"oned s={rep.s} h={r['h']}: closed form mismatch")
    elif cfg.study == "lemma1":
        for rep in reports:
            if rep.fitted_order < 1 - rep.s - 0.1:
                bad.append(f"lemma1 r={rep.s}: order {rep.fitted_order:.3f} < {0.9 - rep.s:.2f}")
    elif cfg.study == "trace":
        m = reports[0].errors()
        if m.max() / m.min() >= 2:
            bad.append(f"trace: max ratio varies by {m.max() / m.min():.2f}x")
    if any(rep.failed for rep in reports):
        bad.append("solver failure in at least one row")
    return bad
