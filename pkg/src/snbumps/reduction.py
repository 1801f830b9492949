"""Grid mirror of the finite-dimensional reduction around W_{r,t}.

Fields live on one Cartesian box centered at the origin that holds all 2m
bumps.  A :class:`SectorGrid` adds the symmetry bookkeeping on top: the
y₂-reflection map (always exact on a centered grid), the 2π/m rotation map
(exact only when the rotation sends nodes to nodes, i.e. m ∈ {1, 2, 4}),
and a one-wedge mask with quadrature weights.

All nonlocal pieces go through :func:`snbumps.nonlocal_field.coulomb`, so
T[f] = (1/4π)∫f(y)/|x-y|dy and Ψ_f = ½T[f²].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import fft
from scipy.sparse.linalg import LinearOperator, cg, minres

from .ansatz import BumpConfig
from .groundstate import GroundState, evaluate_profile, profile_derivative
from .nonlocal_field import (
    SampledField,
    VParams,
    check_decay,
    coulomb,
    gradient_form,
    interior,
    laplacian,
    node_radius,
    pde_residual,
)

FAMILIES = ("Z1_upper", "Z1_lower", "Z2_upper", "Z2_lower")
MIN_PROBES = 20
GRAM_COND_MAX = 1e12
STALL_WINDOW = 5


class ReductionError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# grid and symmetry


def _rotation_index(dims: tuple[int, int, int], m: int) -> np.ndarray | None:
    """Flat index of the image of every node under rotation by 2π/m."""
    nx, ny, nz = dims
    i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    if m == 1:
        ii, jj = i, j
    elif m == 2:
        ii, jj = nx - 1 - i, ny - 1 - j
    elif m == 4 and nx == ny:
        # (x, y) -> (-y, x)
        ii, jj = nx - 1 - j, i
    else:
        return None
    return np.ravel_multi_index((ii, jj, k), dims).ravel()


@dataclass(frozen=True, eq=False)
class SectorGrid:
    """Centered box plus the symmetry maps of the double-ring problem."""

    template: SampledField
    m: int
    wedge_weights: np.ndarray
    reflect_index: np.ndarray
    rotate_index: np.ndarray | None

    @classmethod
    def build(cls, config: BumpConfig, spacing: float, margin: float) -> "SectorGrid":
        pts = config.points
        hxy = float(np.max(np.hypot(pts[:, 0], pts[:, 1]))) + margin
        hz = float(np.max(np.abs(pts[:, 2]))) + margin
        tmpl = SampledField.centered((hxy, hxy, hz), spacing)
        return cls.for_template(tmpl, config.m)

    @classmethod
    def for_template(cls, tmpl: SampledField, m: int) -> "SectorGrid":
        x, y, z = tmpl.axes()
        if not (np.allclose(x, -x[::-1]) and np.allclose(y, -y[::-1])):
            raise ReductionError("sector grids must be centered in y1 and y2")
        dims = tmpl.dims
        i, j, k = np.meshgrid(*(np.arange(n) for n in dims), indexing="ij")
        refl = np.ravel_multi_index((i, dims[1] - 1 - j, k), dims).ravel()
        theta = np.arctan2(y[None, :, None], x[:, None, None]) * np.ones(dims)
        half = math.pi / m
        on_edge = np.isclose(np.abs(theta), half, rtol=0, atol=1e-12)
        inside = (np.abs(theta) < half) & ~on_edge
        w = np.where(inside, 1.0, np.where(on_edge, 0.5, 0.0)) * tmpl.cell_volume
        if m == 1:
            w = np.full(dims, tmpl.cell_volume)
        return cls(template=tmpl, m=int(m), wedge_weights=w, reflect_index=refl,
                   rotate_index=_rotation_index(dims, m))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.template.dims

    @property
    def spacing(self) -> float:
        return self.template.spacing

    @property
    def truncation_radius(self) -> float:
        """Distance from the origin to the nearest box face."""
        return float(min(-o for o in self.template.origin))

    @property
    def box_volume(self) -> float:
        return float(np.prod(self.dims)) * self.template.cell_volume

    @property
    def rotation_exact(self) -> bool:
        return self.rotate_index is not None

    def points(self) -> np.ndarray:
        return np.stack(self.template.coordinates(), axis=-1)

    def reflect(self, values: np.ndarray) -> np.ndarray:
        return values.ravel()[self.reflect_index].reshape(self.dims)

    def rotate(self, values: np.ndarray) -> np.ndarray:
        if self.rotate_index is None:
            raise ReductionError(f"rotation by 2π/{self.m} does not map grid nodes to nodes")
        return values.ravel()[self.rotate_index].reshape(self.dims)

    def symmetry_defect(self, values: np.ndarray) -> float:
        """Largest deviation from y₂-evenness and (if exact) rotation invariance."""
        scale = float(np.max(np.abs(values))) or 1.0
        err = float(np.max(np.abs(values - self.reflect(values))))
        if self.rotation_exact:
            err = max(err, float(np.max(np.abs(values - self.rotate(values)))))
        return err / scale

    def integrate(self, values: np.ndarray) -> float:
        """∫ over the box; via one wedge times m when the rotation is exact."""
        if self.rotation_exact:
            return self.m * float(np.sum(self.wedge_weights * values))
        return float(np.sum(values)) * self.template.cell_volume


# --------------------------------------------------------------------------
# problem data


def bump_centers(config: BumpConfig) -> np.ndarray:
    """The 2m centers, with coincident pairs (t = 0) merged into one bump."""
    pts = config.points
    if config.t == 0:
        return config.upper_points.copy()
    return pts


def active_families(config: BumpConfig) -> tuple[str, ...]:
    """Constraint families in use; at t = 0 the lower ones repeat the upper ones."""
    if config.t == 0:
        return tuple(f for f in FAMILIES if f.endswith("upper"))
    return FAMILIES


def _unit(diff: np.ndarray, rho: np.ndarray) -> np.ndarray:
    safe = np.where(rho > 0, rho, 1.0)
    return np.where(rho[..., None] > 0, diff / safe[..., None], 0.0)


def z_functions(config: BumpConfig, gs: GroundState, grid: SectorGrid) -> dict[str, np.ndarray]:
    """∂U_{x̄_i}/∂r, ∂U_{x̲_i}/∂r, ∂U_{x̄_i}/∂t, ∂U_{x̲_i}/∂t on the grid.

    Each family has shape (m, *dims).  With U_c(y) = U(|y - c|),
    ∂U_c/∂p = -U'(ρ)·(y - c)/ρ · ∂c/∂p.
    """
    m, r, t = config.m, config.r, config.t
    X = grid.points()
    w = math.sqrt(1.0 - t * t)
    ang = 2.0 * np.pi * np.arange(m) / m
    out = {}
    for name, centers, sz in (("upper", config.upper_points, 1.0),
                              ("lower", config.lower_points, -1.0)):
        dr = centers / r
        dt = np.column_stack([-r * t / w * np.cos(ang), -r * t / w * np.sin(ang),
                              np.full(m, sz * r)])
        z1 = np.empty((m,) + grid.dims)
        z2 = np.empty((m,) + grid.dims)
        for i, c in enumerate(centers):
            diff = X - c
            rho = np.linalg.norm(diff, axis=-1)
            grad = profile_derivative(gs, rho, "u")[..., None] * _unit(diff, rho)
            z1[i] = -grad @ dr[i]
            z2[i] = -grad @ dt[i]
        out[f"Z1_{name}"] = z1
        out[f"Z2_{name}"] = z2
    return out


@dataclass(frozen=True, eq=False)
class ReductionProblem:
    """Everything the reduction operators need, sampled once on one grid."""

    config: BumpConfig
    gs: GroundState
    vp: VParams
    grid: SectorGrid
    decay_tol: float
    bumps: np.ndarray          # (n_bumps, *dims)
    W: np.ndarray
    psi_W: np.ndarray
    V: np.ndarray
    constraints: np.ndarray    # (4m, N) constraint fields; 2m rows at t = 0
    gram: np.ndarray
    _gram_inv: np.ndarray = dc_field(repr=False)
    _eig: np.ndarray = dc_field(repr=False)

    @classmethod
    def build(cls, config: BumpConfig, gs: GroundState, vp: VParams,
              spacing: float = 0.6, margin: float = 16.0,
              decay_tol: float = 1e-5) -> "ReductionProblem":
        grid = SectorGrid.build(config, spacing, margin)
        return cls.on_grid(config, gs, vp, grid, decay_tol)

    @classmethod
    def on_grid(cls, config: BumpConfig, gs: GroundState, vp: VParams,
                grid: SectorGrid, decay_tol: float = 1e-5) -> "ReductionProblem":
        h = grid.spacing
        X = grid.points()
        centers = bump_centers(config)
        bumps = np.stack([evaluate_profile(gs, np.linalg.norm(X - c, axis=-1), "u")
                          for c in centers])
        W = bumps.sum(axis=0)
        check_decay(grid.template.with_values(W), decay_tol)
        psi_W = 0.5 * coulomb(W * W, h)
        V = vp.V(node_radius(grid.template))
        if np.ndim(V) == 0:
            V = np.full(grid.dims, float(V))
        zf = z_functions(config, gs, grid)
        rows = []
        for fam in active_families(config):
            pts = config.upper_points if fam.endswith("upper") else config.lower_points
            for i, c in enumerate(pts):
                Uc = evaluate_profile(gs, np.linalg.norm(X - c, axis=-1), "u")
                Z = zf[fam][i]
                g = coulomb(Uc * Uc, h) * Z + 2.0 * coulomb(Uc * Z, h) * Uc
                rows.append(g.ravel())
        G = np.array(rows)
        dv = grid.template.cell_volume
        gram = (G @ G.T) * dv
        if np.linalg.cond(gram) > GRAM_COND_MAX:
            raise ReductionError("constraint Gram matrix is singular; refine the grid")
        eig = _dirichlet_symbol(grid.dims, h, vp.V1)
        return cls(config=config, gs=gs, vp=vp, grid=grid, decay_tol=decay_tol,
                   bumps=bumps, W=W, psi_W=psi_W, V=V, constraints=G, gram=gram,
                   _gram_inv=np.linalg.inv(gram), _eig=eig)

    @property
    def n_constraints(self) -> int:
        return self.constraints.shape[0]

    @property
    def cell_volume(self) -> float:
        return self.grid.template.cell_volume

    def field(self, values: np.ndarray) -> SampledField:
        return self.grid.template.with_values(values)


# --------------------------------------------------------------------------
# projection


def constraint_values(v: np.ndarray, prob: ReductionProblem) -> np.ndarray:
    """The 4m integrals ∫(T[U_c²]Z + 2T[U_c Z]U_c)·v."""
    return (prob.constraints @ v.ravel()) * prob.cell_volume


def _project(v: np.ndarray, prob: ReductionProblem) -> np.ndarray:
    a = prob._gram_inv @ constraint_values(v, prob)
    return v - (a @ prob.constraints).reshape(v.shape)


def project_E1(v: np.ndarray, prob: ReductionProblem, sym_tol: float = 1e-10) -> np.ndarray:
    """L²-orthogonal projection onto the common kernel of the 4m constraints.

    One refinement pass keeps the constraint residuals at round-off level.
    """
    v = np.asarray(v, dtype=float).reshape(prob.grid.dims)
    if prob.grid.symmetry_defect(v) > sym_tol:
        raise ReductionError("input is not symmetric under the grid's symmetry group")
    out = _project(v, prob)
    return _project(out, prob)


def constraint_residual(v: np.ndarray, prob: ReductionProblem) -> float:
    """Largest constraint integral relative to ‖v‖₂·‖g‖₂."""
    c = constraint_values(v, prob)
    gn = np.sqrt(np.diag(prob.gram))
    vn = math.sqrt(float(np.sum(v * v)) * prob.cell_volume) or 1.0
    return float(np.max(np.abs(c) / gn) / vn)


# --------------------------------------------------------------------------
# linear operator, norms


def _dirichlet_symbol(dims, h: float, shift: float) -> np.ndarray:
    lam = [(2.0 - 2.0 * np.cos(np.pi * np.arange(1, n + 1) / (n + 1))) / h**2 for n in dims]
    return lam[0][:, None, None] + lam[1][None, :, None] + lam[2][None, None, :] + shift


def precondition(f: np.ndarray, prob: ReductionProblem) -> np.ndarray:
    """(-Δ_h + V1)⁻¹ f with zero values outside the box, via DST-I."""
    return fft.idstn(fft.dstn(f, type=1) / prob._eig, type=1)


def apply_A(v: np.ndarray, prob: ReductionProblem) -> np.ndarray:
    """-Δ_h v + V v, the W = 0 part of L."""
    return -laplacian(v, prob.grid.spacing) + prob.V * v


def apply_L(v: np.ndarray, prob: ReductionProblem, check: bool = True) -> np.ndarray:
    """Lv = -Δ_h v + Vv - Ψ_W v - T[Wv]W."""
    v = np.asarray(v, dtype=float).reshape(prob.grid.dims)
    if check:
        check_decay(prob.field(v), prob.decay_tol)
    h = prob.grid.spacing
    return apply_A(v, prob) - prob.psi_W * v - coulomb(prob.W * v, h) * prob.W


def bilinear(v: np.ndarray, w: np.ndarray, prob: ReductionProblem) -> float:
    """⟨Lv, w⟩ with the kinetic term as a sum over cell faces."""
    h = prob.grid.spacing
    dv = prob.cell_volume
    kin = gradient_form(v, w, h)
    loc = float(np.sum((prob.V - prob.psi_W) * v * w)) * dv
    nl = float(np.sum(coulomb(prob.W * v, h) * prob.W * w)) * dv
    return kin + loc - nl


def h_norm(v: np.ndarray, prob: ReductionProblem) -> float:
    """√(∫|∇v|² + Vv²) on the grid."""
    val = gradient_form(v, v, prob.grid.spacing) + float(np.sum(prob.V * v * v)) * prob.cell_volume
    return math.sqrt(max(val, 0.0))


def _op(prob: ReductionProblem, fn) -> LinearOperator:
    n = prob.W.size
    dims = prob.grid.dims
    return LinearOperator((n, n), matvec=lambda x: fn(x.reshape(dims)).ravel(), dtype=float)


def solve_A(f: np.ndarray, prob: ReductionProblem, rtol: float = 1e-10) -> np.ndarray:
    """(-Δ_h + V)⁻¹ f by preconditioned CG."""
    x, info = cg(_op(prob, lambda v: apply_A(v, prob)), f.ravel(), rtol=rtol,
                 maxiter=500, M=_op(prob, lambda v: precondition(v, prob)))
    if info != 0:
        raise ReductionError("CG stagnated in the H-norm solve")
    return x.reshape(prob.grid.dims)


def dual_norm(f: np.ndarray, prob: ReductionProblem) -> float:
    """‖f‖ in the dual of the H-norm: √⟨f, A⁻¹f⟩."""
    a = solve_A(f, prob)
    return math.sqrt(max(float(np.sum(f * a)) * prob.cell_volume, 0.0))


# --------------------------------------------------------------------------
# error functional, probes


def l_field(prob: ReductionProblem) -> np.ndarray:
    """(V-1)W - (Ψ_W W - Σ_c Ψ_{U_c} U_c): the residual of W with every bump's own
    equation taken as exact."""
    h = prob.grid.spacing
    own = sum(0.5 * coulomb(u * u, h) * u for u in prob.bumps)
    return (prob.V - 1.0) * prob.W - (prob.psi_W * prob.W - own)


def discrete_residual(values: np.ndarray, prob: ReductionProblem) -> np.ndarray:
    """-Δ_h u + Vu - Ψ_u u on the grid."""
    h = prob.grid.spacing
    return -laplacian(values, h) + prob.V * values - 0.5 * coulomb(values * values, h) * values


def _group_images(m: int) -> list[np.ndarray]:
    mats = []
    for j in range(m):
        a = 2.0 * math.pi * j / m
        R = np.array([[math.cos(a), -math.sin(a), 0.0], [math.sin(a), math.cos(a), 0.0],
                      [0.0, 0.0, 1.0]])
        mats.append(R)
        mats.append(R @ np.diag([1.0, -1.0, 1.0]))
    return mats


def random_symmetric_field(prob: ReductionProblem, rng: np.random.Generator,
                           blobs: int = 3) -> np.ndarray:
    """Gaussian blobs near the bumps, summed over the rotation/reflection orbit."""
    X = prob.grid.points()
    centers = bump_centers(prob.config)
    out = np.zeros(prob.grid.dims)
    images = _group_images(prob.config.m)
    for _ in range(blobs):
        base = centers[rng.integers(len(centers))] + rng.normal(scale=2.0, size=3)
        width = rng.uniform(1.0, 2.0)
        amp = rng.normal()
        for R in images:
            c = R @ base
            out += amp * np.exp(-np.sum((X - c) ** 2, axis=-1) / (2.0 * width**2))
    return out


def probe_basis(prob: ReductionProblem, n_probes: int = 50, seed: int = 0) -> list[np.ndarray]:
    """Projected random symmetric probes plus the projected symmetrized Z-fields."""
    if n_probes < MIN_PROBES:
        raise ReductionError(f"at least {MIN_PROBES} probes are needed, got {n_probes}")
    rng = np.random.default_rng(seed)
    probes = [project_E1(random_symmetric_field(prob, rng), prob, sym_tol=1e-8)
              for _ in range(n_probes)]
    zf = z_functions(prob.config, prob.gs, prob.grid)
    for fam in active_families(prob.config):
        z = zf[fam].sum(axis=0)
        z = 0.5 * (z + prob.grid.reflect(z))
        pz = _project(_project(z, prob), prob)
        if np.max(np.abs(pz)) > 0:
            probes.append(pz)
    return probes


@dataclass(frozen=True)
class LmEstimate:
    value: float
    probes: int
    truncation_radius: float
    steepest: float


def lm_norm(prob: ReductionProblem, n_probes: int = 50, seed: int = 0) -> LmEstimate:
    """Riesz-norm estimate of l(φ) = ∫ l_field·φ over φ in the discrete E₁.

    The value is the supremum of |l(φ)|/‖φ‖ over the probe basis plus one
    steepest probe P(-Δ_h+V)⁻¹l, so it is a lower bound of the true norm.
    """
    lf = l_field(prob)
    dv = prob.cell_volume
    best = 0.0
    for p in probe_basis(prob, n_probes, seed):
        n = h_norm(p, prob)
        if n > 0:
            best = max(best, abs(prob.grid.integrate(lf * p)) / n)
    steep = 0.0
    if np.any(lf):
        sp = _project(_project(solve_A(lf, prob), prob), prob)
        n = h_norm(sp, prob)
        if n > 0:
            steep = abs(float(np.sum(lf * sp)) * dv) / n
    return LmEstimate(value=max(best, steep),
                      probes=n_probes + len(active_families(prob.config)) + 1,
                      truncation_radius=prob.grid.truncation_radius, steepest=steep)


def coercivity_estimate(prob: ReductionProblem, probes: list[np.ndarray]) -> float:
    """min over probes of ‖P L v‖_* / ‖v‖, the sampled stand-in for ξ.

    Sampling over a finite set bounds the true infimum from above; the name
    in the diagnostics follows the quantity it stands in for.
    """
    vals = []
    for v in probes:
        n = h_norm(v, prob)
        if n > 0:
            vals.append(dual_norm(_project(apply_L(v, prob, check=False), prob), prob) / n)
    if not vals:
        raise ReductionError("no usable probes")
    return min(vals)


# --------------------------------------------------------------------------
# remainder


def nprime(phi: np.ndarray, prob: ReductionProblem, check: bool = True) -> np.ndarray:
    """N'(φ) = T[Wφ]φ + ½T[φ²]W + ½T[φ²]φ: the part of the residual of W + φ
    beyond first order in φ, with sign so that Res(W+φ) = Res(W) + Lφ - N'(φ)."""
    phi = np.asarray(phi, dtype=float).reshape(prob.grid.dims)
    if not np.any(phi):
        return np.zeros_like(phi)
    if check:
        check_decay(prob.field(phi), prob.decay_tol)
    h = prob.grid.spacing
    t2 = 0.5 * coulomb(phi * phi, h)
    return coulomb(prob.W * phi, h) * phi + t2 * prob.W + t2 * phi


def _l2(v: np.ndarray, prob: ReductionProblem) -> float:
    return math.sqrt(float(np.sum(v * v)) * prob.cell_volume)


def _slope(amplitudes, values) -> float:
    return float(np.polyfit(np.log(amplitudes), np.log(values), 1)[0])


def nprime_norm_scaling(prob: ReductionProblem, phi: np.ndarray,
                        amplitudes=tuple(2.0**-k for k in range(6, 1, -1))) -> float:
    """Log-log slope of ‖N'(aφ)‖₂ against a."""
    vals = [_l2(nprime(a * phi, prob), prob) for a in amplitudes]
    return _slope(amplitudes, vals)


def n2_proxy(phi: np.ndarray, direction: np.ndarray, prob: ReductionProblem,
             eps: float = 1e-3) -> np.ndarray:
    """Central difference of N' at φ along ``direction``: a proxy for N''(φ)[direction]."""
    return (nprime(phi + eps * direction, prob) - nprime(phi - eps * direction, prob)) / (2 * eps)


def n2_norm_scaling(prob: ReductionProblem, phi: np.ndarray, direction: np.ndarray,
                    amplitudes=tuple(2.0**-k for k in range(6, 1, -1))) -> float:
    vals = [_l2(n2_proxy(a * phi, direction, prob), prob) for a in amplitudes]
    return _slope(amplitudes, vals)


# --------------------------------------------------------------------------
# correction solve


@dataclass(frozen=True)
class ReductionDiagnostics:
    lm_norm: float
    coercivity_lower_bound: float
    phi_norm: float
    contraction_ratio: float
    residual_before: float
    residual_after: float
    iterations: int = 0
    truncation_radius: float = 0.0
    probes: int = 0

    def __post_init__(self):
        for name in ("lm_norm", "coercivity_lower_bound", "phi_norm", "contraction_ratio"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def as_json(self) -> dict:
        return {"lm_norm": self.lm_norm, "coercivity_lower_bound": self.coercivity_lower_bound,
                "phi_norm": self.phi_norm, "contraction_ratio": self.contraction_ratio,
                "residual_before": self.residual_before, "residual_after": self.residual_after,
                "iterations": self.iterations, "truncation_radius": self.truncation_radius,
                "probes": self.probes}


def _projected_solve(rhs: np.ndarray, prob: ReductionProblem, x0: np.ndarray | None,
                     rtol: float) -> np.ndarray:
    """Solve PLPx = Prhs inside the projected subspace with MINRES."""
    def pl(v):
        return _project(apply_L(_project(v, prob), prob, check=False), prob)

    def pm(v):
        return _project(precondition(_project(v, prob), prob), prob)

    b = _project(rhs, prob).ravel()
    x, info = minres(_op(prob, pl), b, x0=None if x0 is None else x0.ravel(),
                     rtol=rtol, maxiter=400, M=_op(prob, pm))
    if info != 0:
        raise ReductionError("MINRES stagnated in the projected linear solve")
    return _project(x.reshape(prob.grid.dims), prob)


def solve_phi(prob: ReductionProblem, tol: float = 1e-8, max_iter: int = 60,
              source: str = "discrete", lin_rtol: float = 1e-10,
              n_probes: int = 50, seed: int = 0) -> tuple[np.ndarray, ReductionDiagnostics]:
    """Fixed point φ = -L⁻¹P(l - N'(φ)) in the discrete E₁.

    ``source`` picks the linear term: "discrete" uses the full grid residual
    of W (so W + φ solves the discrete equation modulo the constraint
    directions); "continuum" uses :func:`l_field`, which treats each bump's
    own equation as exactly satisfied.
    """
    if source == "discrete":
        lin = discrete_residual(prob.W, prob)
    elif source == "continuum":
        lin = l_field(prob)
    else:
        raise ValueError("source must be 'discrete' or 'continuum'")
    probes = probe_basis(prob, n_probes, seed)
    xi = coercivity_estimate(prob, probes[:n_probes])
    if not xi > 0:
        raise ReductionError("no coercivity on this grid")
    lm = lm_norm(prob, n_probes, seed)

    phi = np.zeros(prob.grid.dims)
    gaps: list[float] = []
    ratios: list[float] = []
    stalled = 0
    for it in range(1, max_iter + 1):
        nxt = _projected_solve(-(lin - nprime(phi, prob, check=False)), prob, phi, lin_rtol)
        gaps.append(h_norm(nxt - phi, prob))
        phi = nxt
        if len(gaps) > 1 and gaps[-2] > 0:
            ratios.append(gaps[-1] / gaps[-2])
            stalled = stalled + 1 if ratios[-1] >= 1 else 0
            if stalled >= STALL_WINDOW:
                raise ReductionError("fixed-point map is not contracting on this grid")
        if gaps[-1] < tol * max(1.0, h_norm(phi, prob)):
            break
    else:
        raise ReductionError(f"fixed point not reached in {max_iter} iterations")
    ratio = max(ratios) if ratios else 0.0
    if ratio >= 1:
        raise ReductionError(f"observed contraction ratio {ratio:.3g} >= 1")
    _, (before, _) = pde_residual(prob.field(prob.W), prob.vp, prob.decay_tol)
    _, (after, _) = pde_residual(prob.field(prob.W + phi), prob.vp, prob.decay_tol)
    diag = ReductionDiagnostics(
        lm_norm=lm.value, coercivity_lower_bound=xi, phi_norm=h_norm(phi, prob),
        contraction_ratio=ratio, residual_before=before, residual_after=after,
        iterations=it, truncation_radius=prob.grid.truncation_radius, probes=lm.probes)
    return phi, diag


# --------------------------------------------------------------------------
# named synthetic configurations


@dataclass(frozen=True)
class SyntheticCase:
    name: str
    m: int
    ring_gap: float
    layer_gap: float
    q: float = 0.5


SYNTHETIC = {
    "m4-sep15": SyntheticCase("m4-sep15", 4, 15.0, 15.0),
    "m4-sep12": SyntheticCase("m4-sep12", 4, 12.0, 12.0),
    "m4-sep18": SyntheticCase("m4-sep18", 4, 18.0, 18.0),
    "m6-sep15": SyntheticCase("m6-sep15", 6, 15.0, 15.0),
    "m8-sep15": SyntheticCase("m8-sep15", 8, 15.0, 15.0),
}


def synthetic_config(case: SyntheticCase) -> tuple[float, float]:
    """(r, t) giving the requested ring and layer gaps."""
    rc = case.ring_gap / (2.0 * math.sin(math.pi / case.m))
    rt = 0.5 * case.layer_gap
    r = math.hypot(rc, rt)
    return r, rt / r


def balanced_potential(config: BumpConfig, gs: GroundState, q: float = 0.5) -> VParams:
    """V = 1 + b/|x|^q with b chosen so V - 1 equals the Newtonian field of the
    other bumps at x̄₁."""
    pts = bump_centers(config)
    ext = sum(evaluate_profile(gs, float(np.linalg.norm(pts[0] - c)), "psi") for c in pts[1:])
    return VParams(b=float(ext) * config.r**q, q=q)
