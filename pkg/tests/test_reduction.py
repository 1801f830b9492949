import math

import numpy as np
import pytest

from snbumps.acceptance import synthetic_problem
from snbumps.ansatz import BumpConfig, make_config
from snbumps.groundstate import evaluate_profile
from snbumps.nonlocal_field import FieldError, VParams, coulomb, gradient_form
from snbumps.reduction import (
    MIN_PROBES,
    ReductionDiagnostics,
    ReductionError,
    ReductionProblem,
    SectorGrid,
    apply_L,
    bilinear,
    coercivity_estimate,
    constraint_residual,
    constraint_values,
    h_norm,
    l_field,
    lm_norm,
    n2_norm_scaling,
    nprime,
    nprime_norm_scaling,
    probe_basis,
    project_E1,
    random_symmetric_field,
    solve_phi,
    z_functions,
)


def single_bump(r=0.4):
    c = np.array([[r, 0.0, 0.0]])
    return BumpConfig(m=1, r=r, t=0.0, upper_points=c, lower_points=c.copy())


@pytest.fixture(scope="module")
def lone(gs):
    return ReductionProblem.build(single_bump(), gs, VParams(b=0.0), spacing=0.8,
                                  margin=16.0, decay_tol=1e-5)


@pytest.fixture(scope="module")
def projected_pair(coarse_problem):
    rng = np.random.default_rng(7)
    v = project_E1(random_symmetric_field(coarse_problem, rng), coarse_problem)
    w = project_E1(random_symmetric_field(coarse_problem, rng), coarse_problem)
    return v, w


# --------------------------------------------------------------------------
# grid and Z-functions


def test_wedge_weights_sum_to_wedge_volume(coarse_problem):
    g = coarse_problem.grid
    assert g.rotation_exact
    assert float(np.sum(g.wedge_weights)) == pytest.approx(g.box_volume / g.m, rel=1e-12)


def test_integrate_via_wedge(coarse_problem):
    g = coarse_problem.grid
    W = coarse_problem.W
    assert g.integrate(W) == pytest.approx(float(np.sum(W)) * g.template.cell_volume, rel=1e-12)


def test_off_center_template_rejected(coarse_problem):
    tmpl = coarse_problem.grid.template
    shifted = type(tmpl)((tmpl.origin[0] + 0.3,) + tmpl.origin[1:], tmpl.spacing, tmpl.dims,
                         np.zeros(tmpl.dims))
    with pytest.raises(ReductionError):
        SectorGrid.for_template(shifted, 4)


def test_rotation_only_when_exact(gs):
    grid = SectorGrid.build(make_config(6, 10.0, 0.3), 1.0, 8.0)
    assert not grid.rotation_exact
    with pytest.raises(ReductionError):
        grid.rotate(np.zeros(grid.dims))


def test_z_flat_config_coincide(gs):
    cfg = make_config(4, 10.0, 0.0)
    zf = z_functions(cfg, gs, SectorGrid.build(cfg, 1.0, 8.0))
    assert np.array_equal(zf["Z1_upper"], zf["Z1_lower"])


@pytest.mark.parametrize("which", ["r", "t"])
def test_z_matches_finite_difference(gs, which):
    m, r, t = 4, 10.0, 0.4
    cfg = make_config(m, r, t)
    grid = SectorGrid.build(cfg, 0.7, 6.0)
    X = grid.points()
    zf = z_functions(cfg, gs, grid)
    h = 1e-4 * (r if which == "r" else t)

    def bump(rr, tt, lower):
        c = make_config(m, rr, tt)
        centre = (c.lower_points if lower else c.upper_points)[0]
        return evaluate_profile(gs, np.linalg.norm(X - centre, axis=-1))

    for lower, name in ((False, "upper"), (True, "lower")):
        if which == "r":
            fd = (bump(r + h, t, lower) - bump(r - h, t, lower)) / (2 * h)
            z = zf[f"Z1_{name}"][0]
        else:
            fd = (bump(r, t + h, lower) - bump(r, t - h, lower)) / (2 * h)
            z = zf[f"Z2_{name}"][0]
        assert np.max(np.abs(z - fd)) <= 1e-5 * np.max(np.abs(z))


# --------------------------------------------------------------------------
# projection


def test_projection_idempotent(coarse_problem, projected_pair):
    v, _ = projected_pair
    again = project_E1(v, coarse_problem)
    assert np.max(np.abs(again - v)) <= 1e-12 * np.max(np.abs(v))


def test_projected_constraints_vanish(coarse_problem, rng):
    for _ in range(3):
        v = random_symmetric_field(coarse_problem, rng)
        assert constraint_residual(project_E1(v, coarse_problem), coarse_problem) < 1e-10


def test_projected_Z_constraints_vanish(coarse_problem):
    zf = z_functions(coarse_problem.config, coarse_problem.gs, coarse_problem.grid)
    z = zf["Z1_upper"].sum(axis=0) + zf["Z1_lower"].sum(axis=0)
    z = 0.5 * (z + coarse_problem.grid.reflect(z))
    assert constraint_residual(z, coarse_problem) > 1e-3
    assert constraint_residual(project_E1(z, coarse_problem, sym_tol=1e-8), coarse_problem) < 1e-10


def test_projection_rejects_asymmetric(coarse_problem):
    X = coarse_problem.grid.points()
    with pytest.raises(ReductionError):
        project_E1(np.exp(-np.sum((X - [3.0, 2.0, 0.0]) ** 2, axis=-1)), coarse_problem)


def test_constraint_count(coarse_problem, lone):
    assert coarse_problem.n_constraints == 4 * coarse_problem.config.m
    assert constraint_values(coarse_problem.W, coarse_problem).shape == (16,)
    # at t = 0 the lower constraint families repeat the upper ones
    assert lone.n_constraints == 2


def test_T_commutes_with_symmetries(coarse_problem, projected_pair):
    v, _ = projected_pair
    g = coarse_problem.grid
    tv = coulomb(coarse_problem.W * v, g.spacing)
    scale = np.max(np.abs(tv))
    assert np.max(np.abs(tv - g.reflect(tv))) <= 1e-12 * scale
    assert np.max(np.abs(tv - g.rotate(tv))) <= 1e-12 * scale


# --------------------------------------------------------------------------
# linear operator


def test_bilinear_symmetric(coarse_problem, projected_pair):
    v, w = projected_pair
    a, b = bilinear(v, w, coarse_problem), bilinear(w, v, coarse_problem)
    assert abs(a - b) <= 1e-10 * abs(a)


def test_bilinear_matches_operator(coarse_problem, projected_pair):
    v, w = projected_pair
    lv = apply_L(v, coarse_problem)
    direct = float(np.sum(lv * w)) * coarse_problem.cell_volume
    assert direct == pytest.approx(bilinear(v, w, coarse_problem), rel=1e-10)


def test_zero_W_gives_plain_form(coarse_problem, projected_pair):
    v, w = projected_pair
    p = coarse_problem
    bare = ReductionProblem(config=p.config, gs=p.gs, vp=p.vp, grid=p.grid,
                            decay_tol=p.decay_tol, bumps=0 * p.bumps, W=0 * p.W,
                            psi_W=0 * p.psi_W, V=p.V, constraints=p.constraints, gram=p.gram,
                            _gram_inv=p._gram_inv, _eig=p._eig)
    h = p.grid.spacing
    stencil = gradient_form(v, w, h) + float(np.sum(p.V * v * w)) * h**3
    assert bilinear(v, w, bare) == pytest.approx(stencil, rel=1e-10)


def test_apply_L_decay_check(coarse_problem):
    with pytest.raises(FieldError):
        apply_L(np.ones(coarse_problem.grid.dims), coarse_problem)


def test_coercivity_positive(coarse_problem):
    probes = probe_basis(coarse_problem, 50, seed=3)[:50]
    assert coercivity_estimate(coarse_problem, probes) > 0.05


def test_form_is_indefinite_on_E1(coarse_problem):
    # the bump direction survives the constraints, so ⟨Lv, v⟩ changes sign
    probes = probe_basis(coarse_problem, 50, seed=3)[:50]
    quotients = [bilinear(v, v, coarse_problem) / h_norm(v, coarse_problem) ** 2 for v in probes]
    assert min(quotients) < 0 < max(quotients)


def test_too_few_probes(coarse_problem):
    with pytest.raises(ReductionError):
        lm_norm(coarse_problem, n_probes=MIN_PROBES - 1)


# --------------------------------------------------------------------------
# error functional


def test_lone_bump_has_no_error(lone):
    assert np.max(np.abs(l_field(lone))) < 1e-10
    assert lm_norm(lone, n_probes=MIN_PROBES).value < 1e-10


def test_lm_norm_decreases_with_separation(ctx):
    vals = [lm_norm(synthetic_problem(ctx, case, spacing=0.8, margin=16.0, decay_tol=1e-5),
                    n_probes=MIN_PROBES).value
            for case in ("m4-sep12", "m4-sep15", "m4-sep18")]
    assert vals[0] > vals[1] > vals[2] > 0


@pytest.mark.slow
def test_lm_norm_falls_with_m_at_scaled_radii(ctx):
    # radii grow with m ln m, heights follow t = (ln m)^(-1/2)
    vals = []
    ms = (4, 6, 8)
    for m in ms:
        lm = math.log(m)
        cfg = make_config(m, 13.0 * m * lm / (4 * math.log(4)), lm**-0.5)
        prob = ReductionProblem.build(cfg, ctx.gs, VParams(b=1.0, q=0.75), spacing=0.8,
                                      margin=16.0, decay_tol=1e-5)
        vals.append(lm_norm(prob, n_probes=MIN_PROBES).value)
    slope = np.polyfit(np.log(ms), np.log(vals), 1)[0]
    assert slope < 0


# --------------------------------------------------------------------------
# remainder


def test_nprime_zero(coarse_problem):
    assert not np.any(nprime(np.zeros(coarse_problem.grid.dims), coarse_problem))


def test_nprime_quadratic_and_n2_linear(coarse_problem, projected_pair):
    v, w = projected_pair
    phi, d = v / np.max(np.abs(v)), w / np.max(np.abs(w))
    assert abs(nprime_norm_scaling(coarse_problem, phi) - 2.0) <= 0.1
    assert abs(n2_norm_scaling(coarse_problem, phi, d) - 1.0) <= 0.15


# --------------------------------------------------------------------------
# correction solve


@pytest.fixture(scope="module")
def solved(coarse_problem):
    return solve_phi(coarse_problem, n_probes=MIN_PROBES)


def test_solve_reduces_residual(solved):
    _, diag = solved
    assert diag.residual_after <= 0.3 * diag.residual_before
    assert diag.contraction_ratio < 1
    assert diag.coercivity_lower_bound > 0


def test_phi_in_E1(coarse_problem, solved):
    phi, _ = solved
    assert constraint_residual(phi, coarse_problem) < 1e-9


def test_diagnostics_json_nonnegative(solved):
    _, diag = solved
    js = diag.as_json()
    for key in ("lm_norm", "coercivity_lower_bound", "phi_norm", "contraction_ratio",
                "residual_before", "residual_after"):
        assert js[key] >= 0


def test_diagnostics_reject_negative():
    with pytest.raises(ValueError):
        ReductionDiagnostics(lm_norm=-1.0, coercivity_lower_bound=1.0, phi_norm=0.0,
                             contraction_ratio=0.1, residual_before=1.0, residual_after=0.5)


def test_lone_bump_needs_no_correction(lone):
    phi, diag = solve_phi(lone, source="continuum", n_probes=MIN_PROBES)
    assert np.max(np.abs(phi)) < 1e-10
    assert diag.phi_norm < 1e-10


def test_unknown_source(coarse_problem):
    with pytest.raises(ValueError):
        solve_phi(coarse_problem, source="exact")
