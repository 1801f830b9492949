"""Acceptance suite: criteria 1-11 as data, shared by the CLI and the tests.

Every criterion returns a :class:`CriterionResult` holding named checks.
Each check stores the measured value, the target as text and whether it
passed.  Timing checks are flagged so that the CSV report can leave their
wall-clock values out and stay byte-identical between runs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .ansatz import admissible_box, box_centers, make_config
from .groundstate import (
    evaluate_profile,
    extract_constants,
    nehari_terms,
    newton_psi,
    solve_ground_state,
    tail_rate_fit,
)
from .interaction import (
    build_pair_tables,
    multi_bump_energy,
    overlap,
    pair_interaction,
    ring_sum_ratio,
)
from .nonlocal_field import SampledField, VParams, energy_total
from .oracles import double_quadrature_A2
from .reduced_energy import ReducedModel, F1, fixed_point_t, solve_critical
from .ansatz import evaluate_W
from . import reduction as red


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    target: str
    passed: bool
    timing: bool = False


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    checks: tuple[Check, ...]
    seconds: float
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = [f"{c.name}={c.value:.6g}{'' if c.passed else ' (target ' + c.target + ')'}"
                 for c in self.checks]
        extra = "; ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                          for k, v in self.info.items())
        tail = f" [{extra}]" if extra else ""
        return f"criterion {self.number:2d} {status}  {self.title}: " + ", ".join(parts) + tail


def _within(x: float, lo: float, hi: float) -> bool:
    return lo <= x <= hi


class Context:
    """Lazily computed shared inputs (ground state, constants, pair tables)."""

    def __init__(self, seed: int = 0, workers: int = 1, gs=None):
        self.seed = seed
        self.workers = workers
        self.timings: dict[str, float] = {}
        if gs is not None:
            self.__dict__["gs"] = gs
            self.timings["groundstate"] = 0.0

    @cached_property
    def gs(self):
        t = time.perf_counter()
        gs = solve_ground_state()
        self.timings["groundstate"] = time.perf_counter() - t
        return gs

    @cached_property
    def constants(self):
        return extract_constants(self.gs)

    @cached_property
    def tables(self):
        t = time.perf_counter()
        tab = build_pair_tables(self.gs, workers=self.workers)
        self.timings["pair_tables"] = time.perf_counter() - t
        return tab


# --------------------------------------------------------------------------
# criteria


def criterion_1(ctx: Context) -> CriterionResult:
    gs = ctx.gs
    newton = float(np.max(np.abs(gs.psi_values - newton_psi(gs)) / gs.psi_values))
    lhs, rhs = nehari_terms(gs)
    neh = abs(lhs / rhs - 1.0)
    rt = ctx.timings["groundstate"]
    return CriterionResult(1, "ground-state consistency", (
        Check("newton_rel", newton, "<= 1e-6", newton <= 1e-6),
        Check("nehari_rel", neh, "<= 1e-5", neh <= 1e-5),
        Check("runtime_s", rt, "< 10", rt < 10, timing=True),
    ), rt)


def criterion_2(ctx: Context) -> CriterionResult:
    gs, c = ctx.gs, ctx.constants
    fit = tail_rate_fit(gs, with_power=True)
    naive = tail_rate_fit(gs, with_power=False)
    lo, hi = c.fit_windows[1]
    sel = (gs.radii >= lo) & (gs.radii <= hi)
    sp = gs.radii[sel] * gs.psi_values[sel]
    flat = float(np.max(np.abs(sp / np.mean(sp) - 1.0)))
    rate = fit["rate"]
    return CriterionResult(2, "decay laws", (
        Check("tail_rate", rate, "-1 +- 5e-3", abs(rate + 1.0) <= 5e-3),
        Check("s_psi_flatness", flat, "<= 1e-2", flat <= 1e-2),
    ), 0.0, {"prefactor_power": fit["power"], "rate_without_prefactor": naive["rate"]})


def criterion_3(ctx: Context) -> CriterionResult:
    t = time.perf_counter()
    c = ctx.constants
    gs2 = solve_ground_state(node_count=2 * ctx.gs.node_count)
    c2 = extract_constants(gs2)
    dA1 = abs(c2.A1 / c.A1 - 1.0)
    dA2 = abs(c2.A2 / c.A2 - 1.0)
    s = np.linspace(0.0, ctx.gs.r_max, 6001)
    a2q = double_quadrature_A2(s, evaluate_profile(ctx.gs, s))
    dq = abs(a2q / c.A2 - 1.0)
    return CriterionResult(3, "constants stability", (
        Check("A1_refine_rel", dA1, "< 1e-4", dA1 < 1e-4),
        Check("A2_refine_rel", dA2, "< 1e-4", dA2 < 1e-4),
        Check("A2_double_quadrature_rel", dq, "< 1e-4", dq < 1e-4),
    ), time.perf_counter() - t, {"A1": c.A1, "A2": c.A2})


def criterion_4(ctx: Context) -> CriterionResult:
    t = time.perf_counter()
    errs = {m: abs(ring_sum_ratio(m) * math.pi / 2.0 - 1.0) for m in (10**4, 10**5, 10**6)}
    rt = time.perf_counter() - t
    dec = errs[10**4] > errs[10**5] > errs[10**6]
    return CriterionResult(4, "lattice-sum limit", (
        Check("rel_err_1e6", errs[10**6], "<= 0.05", errs[10**6] <= 0.05),
        Check("err_decreasing", float(dec), "1", dec),
        Check("runtime_s", rt, "< 5", rt < 5, timing=True),
    ), rt, {"rel_err_1e4": errs[10**4], "rel_err_1e5": errs[10**5]})


def pair_remainder(ctx: Context, d: np.ndarray) -> np.ndarray:
    A1 = ctx.constants.A1
    P = np.array([pair_interaction(ctx.gs, x) for x in d])
    return 8.0 * math.pi * d * P / A1**2 - 1.0


def criterion_5(ctx: Context) -> CriterionResult:
    t = time.perf_counter()
    _ = ctx.tables
    rem20 = abs(float(pair_remainder(ctx, np.array([20.0]))[0]))
    d = np.linspace(8.0, 24.0, 17)
    rem = np.abs(pair_remainder(ctx, d))
    slope = float(np.polyfit(np.log(d), np.log(rem), 1)[0])
    rt = time.perf_counter() - t
    return CriterionResult(5, "pair interaction asymptote", (
        Check("remainder_d20", rem20, "<= 0.1", rem20 <= 0.1),
        Check("loglog_slope_8_24", slope, "-1 +- 0.15", abs(slope + 1.0) <= 0.15),
        Check("runtime_s", rt, "< 60", rt < 60, timing=True),
    ), rt, {"remainder_d8": float(rem[0]), "remainder_d16": float(rem[8])})


def overlap_rates(ctx: Context, lo: float = 10.0, hi: float = 20.0) -> dict:
    d = np.linspace(lo, hi, 21)
    logO = np.log([overlap(ctx.gs, x) for x in d])
    naive = float(np.polyfit(d, logO, 1)[0])
    A = np.column_stack([np.ones_like(d), np.log(d), d])
    coef, *_ = np.linalg.lstsq(A, logO, rcond=None)
    return {"rate": float(coef[2]), "power": float(coef[1]), "naive_slope": naive}


def criterion_6(ctx: Context) -> CriterionResult:
    r = overlap_rates(ctx)
    return CriterionResult(6, "overlap decay", (
        Check("exp_rate_10_20", r["rate"], "-1 +- 0.05", abs(r["rate"] + 1.0) <= 0.05),
    ), 0.0, {"prefactor_power": r["power"], "slope_without_prefactor": r["naive_slope"]})


GRID_CASE = dict(m=6, r=12.0, t=0.5, spacing=0.35, margin=17.0, decay_tol=1e-5)


def remainder_gap(ctx: Context, m: int, q: float = 0.5) -> float:
    c = ctx.constants
    r, t = box_centers(m, q, c.A1)
    cfg = make_config(m, r, t)
    vp = VParams(b=1.0, q=q)
    total = multi_bump_energy(cfg, ctx.gs, c, vp, ctx.tables).breakdown.total
    gap = abs(total - m * F1(ReducedModel(m, q, 1.0, c.A1, c.A2), r, t))
    return gap / (m * m * m / (r * r * (1.0 - t * t)))


def criterion_7(ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    g = GRID_CASE
    cfg = make_config(g["m"], g["r"], g["t"])
    vp = VParams(b=1.0, q=0.5)
    semi = multi_bump_energy(cfg, ctx.gs, ctx.constants, vp, ctx.tables)
    pts = cfg.points
    hxy = float(np.max(np.hypot(pts[:, 0], pts[:, 1]))) + g["margin"]
    hz = float(np.max(np.abs(pts[:, 2]))) + g["margin"]
    f = SampledField.centered((hxy, hxy, hz), g["spacing"])
    f = f.with_values(evaluate_W(cfg, ctx.gs, np.stack(f.coordinates(), axis=-1)))
    grid = energy_total(f, vp, decay_tol=g["decay_tol"])
    del f
    rel = abs(grid.total - semi.breakdown.total) / abs(semi.breakdown.total)
    gaps = {m: remainder_gap(ctx, m) for m in (8, 16, 32)}
    growth = gaps[32] / gaps[8]
    return CriterionResult(7, "energy-expansion agreement", (
        Check("grid_vs_semi_rel", rel, "<= 1e-2", rel <= 1e-2),
        Check("normalized_gap_growth_8_to_32", growth, "<= 2 (bounded)", growth <= 2.0),
    ), time.perf_counter() - t0,
        {"gap8": gaps[8], "gap16": gaps[16], "gap32": gaps[32],
         "semi_total": semi.breakdown.total, "grid_total": grid.total})


CRITICAL_MS = (10**3, 10**4, 10**5, 10**6)


def criterion_8(ctx: Context) -> CriterionResult:
    c = ctx.constants
    q = 0.5
    checks = []
    info = {}
    t_all = time.perf_counter()
    slow = 0.0
    for m in CRITICAL_MS:
        t = time.perf_counter()
        model = ReducedModel(m, q, 1.0, c.A1, c.A2)
        fp = fixed_point_t(model)
        box = admissible_box(m, q, 1.0, c.A1)
        cp = solve_critical(model, box)
        slow = max(slow, time.perf_counter() - t)
        lm = math.log(m)
        tag = f"m=1e{round(math.log10(m))}"
        checks.append(Check(f"{tag}_fp_iters", fp.iterations, "< 50", fp.iterations < 50))
        checks.append(Check(f"{tag}_contraction_x_lnm", fp.contraction * lm, "<= 10",
                            fp.contraction <= 10.0 / lm))
        sp = cp.sign_pattern
        checks.append(Check(f"{tag}_F_rr_sign", sp["F_rr"], "+1", sp["F_rr"] > 0))
        checks.append(Check(f"{tag}_F_tt_sign", sp["F_tt"], "-1", sp["F_tt"] < 0))
        checks.append(Check(f"{tag}_det_sign", sp["det"], "-1", sp["det"] < 0))
        checks.append(Check(f"{tag}_is_saddle", float(cp.classification == "saddle"), "1",
                            cp.classification == "saddle"))
        info[f"{tag}_class"] = cp.classification
        if m >= 10**5:
            ts = cp.t_star * math.sqrt(lm)
            rr = cp.r_star / box_centers(m, q, c.A1)[0]
            checks.append(Check(f"{tag}_t_sqrt_lnm", ts, "[0.9, 1.1]", _within(ts, 0.9, 1.1)))
            checks.append(Check(f"{tag}_r_ratio", rr, "[0.99, 1.01]", _within(rr, 0.99, 1.01)))
    checks.append(Check("max_runtime_per_m_s", slow, "< 5", slow < 5, timing=True))
    return CriterionResult(8, "critical point", tuple(checks), time.perf_counter() - t_all, info)


SCALING_GRID = dict(spacing=0.8, margin=16.0, decay_tol=1e-5)


def synthetic_problem(ctx: Context, case: str = "m4-sep15", **grid) -> red.ReductionProblem:
    sc = red.SYNTHETIC[case]
    r, t = red.synthetic_config(sc)
    cfg = make_config(sc.m, r, t)
    vp = red.balanced_potential(cfg, ctx.gs, sc.q)
    return red.ReductionProblem.build(cfg, ctx.gs, vp, **grid)


def criterion_9(ctx: Context) -> CriterionResult:
    t = time.perf_counter()
    prob = synthetic_problem(ctx, **SCALING_GRID)
    rng = np.random.default_rng(ctx.seed)
    phi = red.project_E1(red.random_symmetric_field(prob, rng), prob)
    phi /= np.max(np.abs(phi))
    d = red.project_E1(red.random_symmetric_field(prob, rng), prob)
    d /= np.max(np.abs(d))
    e1 = red.nprime_norm_scaling(prob, phi)
    e2 = red.n2_norm_scaling(prob, phi, d)
    rt = time.perf_counter() - t
    return CriterionResult(9, "remainder operator scalings", (
        Check("nprime_exponent", e1, "2 +- 0.1", abs(e1 - 2.0) <= 0.1),
        Check("n2_proxy_exponent", e2, "1 +- 0.15", abs(e2 - 1.0) <= 0.15),
        Check("runtime_s", rt, "< 300", rt < 300, timing=True),
    ), rt, {"grid": "x".join(map(str, prob.grid.dims))})


REDUCE_GRID = dict(spacing=0.6, margin=16.0, decay_tol=1e-5)


def criterion_10(ctx: Context) -> CriterionResult:
    t = time.perf_counter()
    prob = synthetic_problem(ctx, **REDUCE_GRID)
    rng = np.random.default_rng(ctx.seed)
    v = red.random_symmetric_field(prob, rng)
    p1 = red.project_E1(v, prob)
    p2 = red.project_E1(p1, prob)
    idem = float(np.max(np.abs(p2 - p1)) / np.max(np.abs(p1)))
    w = red.project_E1(red.random_symmetric_field(prob, rng), prob)
    a, b = red.bilinear(p1, w, prob), red.bilinear(w, p1, prob)
    symm = abs(a - b) / abs(a)
    converged = True
    info: dict = {}
    try:
        _, diag = red.solve_phi(prob, n_probes=red.MIN_PROBES, seed=ctx.seed)
    except red.ReductionError as exc:
        converged = False
        diag = None
        info["error"] = str(exc)
    checks = [Check("solve_converged", float(converged), "1", converged)]
    if diag is not None:
        drop = 1.0 - diag.residual_after / diag.residual_before
        checks += [Check("contraction_ratio", diag.contraction_ratio, "< 1", diag.contraction_ratio < 1),
                   Check("residual_drop", drop, ">= 0.7", drop >= 0.7)]
        info |= {"residual_before": diag.residual_before, "residual_after": diag.residual_after,
                "coercivity": diag.coercivity_lower_bound, "phi_norm": diag.phi_norm}
    checks += [Check("projection_idempotence", idem, "<= 1e-12", idem <= 1e-12),
               Check("L_form_symmetry", symm, "<= 1e-10", symm <= 1e-10)]
    return CriterionResult(10, "reduction smoke test", tuple(checks), time.perf_counter() - t, info)


def criterion_11(ctx: Context) -> CriterionResult:
    """Byte-identical CSV artifacts from two independent runs with one seed."""
    from .cli import RunConfig, render_csv_artifacts

    t = time.perf_counter()
    cfg = RunConfig.defaults(seed=ctx.seed)
    first = render_csv_artifacts(cfg, Context(ctx.seed, ctx.workers))
    second = render_csv_artifacts(cfg, Context(ctx.seed, ctx.workers))
    same = first == second
    return CriterionResult(11, "determinism", (
        Check("csv_bytes_identical", float(same), "1", same),
    ), time.perf_counter() - t, {"files": len(first)})


CRITERIA: dict[int, Callable[[Context], CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
    11: criterion_11,
}


def run(ctx: Context | None = None, numbers=None, report: Callable[[str], None] | None = None):
    ctx = ctx or Context()
    out = []
    for n in numbers or sorted(CRITERIA):
        res = CRITERIA[n](ctx)
        out.append(res)
        if report is not None:
            report(res.line())
    return out


def report_rows(results) -> list[tuple]:
    rows = []
    for r in results:
        for c in r.checks:
            value = "-" if c.timing else f"{float(c.value):.17g}"
            rows.append((r.number, c.name, value, c.target.replace(",", ";"),
                         "pass" if c.passed else "fail"))
    return rows
