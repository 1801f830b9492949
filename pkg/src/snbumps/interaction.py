"""Semi-analytic pair quantities and the multi-bump energy decomposition.

For radial f, g the two-center integral ∫f(|x|) g(|x - d e|) dx equals

    (2π/d) ∫₀^∞ s f(s) [G(s + d) - G(|s - d|)] ds,   G(ρ) = ∫₀^ρ σ g(σ) dσ,

so every pair quantity is a one-dimensional Gauss–Legendre integral over
cumulative tables of the profile.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

from .ansatz import BumpConfig, separations
from .groundstate import AsymptoticConstants, GroundState, evaluate_profile
from .nonlocal_field import EnergyBreakdown, VParams

PAIR_MAGIC = "SNBUMPS-PT"
PAIR_VERSION = "1"

# profile is treated as zero where u < CUT_REL·u(0)
CUT_REL = 1e-12
GL_ORDER = 16
PANEL = 0.5
TABLE_D_MAX = 60.0


class InteractionError(ValueError):
    pass


class _Cumulative:
    """G(ρ) = ∫₀^ρ σ g(σ) dσ with an accurate complement for large ρ."""

    def __init__(self, s: np.ndarray, g: np.ndarray):
        integrand = s * g
        fwd = cumulative_simpson(integrand, x=s, initial=0.0)
        total = fwd[-1]
        rev = cumulative_simpson(integrand[::-1], x=(s[-1] - s)[::-1], initial=0.0)[::-1]
        self.total = float(total)
        self.s_max = float(s[-1])
        keep = rev > 0
        self._fwd = CubicSpline(s, fwd)
        self._logc = CubicSpline(s[keep], np.log(rev[keep]))
        self._c_end = float(s[keep][-1])
        # switch from forward to complementary form where G crosses half its total
        self.split = float(s[np.searchsorted(fwd, 0.5 * total)])

    def complement(self, x):
        x = np.asarray(x, dtype=float)
        out = np.exp(self._logc(np.minimum(x, self._c_end)))
        return np.where(x > self._c_end, 0.0, out)

    def between(self, a, b):
        """∫_a^b σ g(σ) dσ for 0 ≤ a ≤ b, elementwise."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        low = self._fwd(np.minimum(b, self.s_max)) - self._fwd(np.minimum(a, self.s_max))
        high = self.complement(a) - self.complement(b)
        return np.where(b <= self.split, low, high)


@dataclass(frozen=True, eq=False)
class ProfileQuadrature:
    """Cumulative tables of U and U² on an extended radial grid."""

    gs: GroundState
    s_cut: float
    cum_u: _Cumulative = field(repr=False)
    cum_u2: _Cumulative = field(repr=False)

    @classmethod
    def build(cls, gs: GroundState, extent: float = 40.0) -> "ProfileQuadrature":
        u0 = gs.u_values[0]
        h = gs.radii[1] - gs.radii[0]
        s = np.arange(0.0, gs.r_max + extent + 0.5 * h, h)
        u = evaluate_profile(gs, s, "u")
        below = np.nonzero(u < CUT_REL * u0)[0]
        s_cut = float(s[below[0]]) if below.size else float(s[-1])
        u = np.where(s < s_cut, u, 0.0)
        return cls(gs=gs, s_cut=s_cut, cum_u=_Cumulative(s, u), cum_u2=_Cumulative(s, u * u))

    def u(self, s):
        return np.where(np.asarray(s) < self.s_cut, evaluate_profile(self.gs, s, "u"), 0.0)

    def psi(self, s):
        return evaluate_profile(self.gs, s, "psi")


def _gl_panels(a: float, b: float, breaks=()) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(GL_ORDER)
    edges = sorted({a, b, *[c for c in breaks if a < c < b]})
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        n = max(1, int(math.ceil((hi - lo) / PANEL)))
        e = np.linspace(lo, hi, n + 1)
        half = 0.5 * np.diff(e)
        mid = 0.5 * (e[:-1] + e[1:])
        nodes.append((mid[:, None] + half[:, None] * x[None, :]).ravel())
        weights.append((half[:, None] * w[None, :]).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def _two_center(pq: ProfileQuadrature, f: Callable, cum: _Cumulative, d: float) -> float:
    """∫ f(|x|) g(|x - d e|) dx with g encoded by ``cum``."""
    lo = max(0.0, d - pq.s_cut)
    hi = d + pq.s_cut
    s, w = _gl_panels(lo, hi, breaks=(d,))
    vals = s * f(s) * cum.between(np.abs(s - d), s + d)
    return float(2.0 * math.pi / d * np.dot(w, vals))


def _one_center(pq: ProfileQuadrature, f: Callable) -> float:
    s, w = _gl_panels(0.0, pq.s_cut)
    return float(4.0 * math.pi * np.dot(w, s * s * f(s)))


D_TINY = 1e-9


def pair_interaction(gs: GroundState | ProfileQuadrature, d: float) -> float:
    """P(d) = ∫Ψ_U(x) U²(x - d e) dx."""
    pq = gs if isinstance(gs, ProfileQuadrature) else _quadrature(gs)
    d = abs(float(d))
    if d < D_TINY:
        return _one_center(pq, lambda s: pq.psi(s) * pq.u(s) ** 2)
    return _two_center(pq, pq.psi, pq.cum_u2, d)


def overlap(gs: GroundState | ProfileQuadrature, d: float) -> float:
    """O(d) = ∫U(x) U(x - d e) dx."""
    pq = gs if isinstance(gs, ProfileQuadrature) else _quadrature(gs)
    d = abs(float(d))
    if d < D_TINY:
        return _one_center(pq, lambda s: pq.u(s) ** 2)
    return _two_center(pq, pq.u, pq.cum_u, d)


def coupling(gs: GroundState | ProfileQuadrature, d: float) -> float:
    """Q(d) = ∫Ψ_U(x) U(x) U(x - d e) dx = ∫∇U·∇U_d + U U_d."""
    pq = gs if isinstance(gs, ProfileQuadrature) else _quadrature(gs)
    d = abs(float(d))
    if d < D_TINY:
        return _one_center(pq, lambda s: pq.psi(s) * pq.u(s) ** 2)
    return _two_center(pq, lambda s: pq.psi(s) * pq.u(s), pq.cum_u, d)


_QUAD_CACHE: dict[int, ProfileQuadrature] = {}


def _quadrature(gs: GroundState) -> ProfileQuadrature:
    key = id(gs)
    pq = _QUAD_CACHE.get(key)
    if pq is None or pq.gs is not gs:
        pq = ProfileQuadrature.build(gs)
        _QUAD_CACHE.clear()
        _QUAD_CACHE[key] = pq
    return pq


# --------------------------------------------------------------------------
# tables


@dataclass(frozen=True, eq=False)
class PairTables:
    d_grid: np.ndarray
    pair_interaction_values: np.ndarray
    overlap_values: np.ndarray
    coupling_values: np.ndarray
    quadrature: ProfileQuadrature | None = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("pair_interaction_values", "overlap_values", "coupling_values"):
            v = getattr(self, name)
            if np.any(v <= 0) or np.any(np.diff(v) >= 0):
                raise InteractionError(f"{name} must be positive and strictly decreasing")
        # interpolate logs, which are smooth in d
        object.__setattr__(self, "_splines", tuple(
            CubicSpline(self.d_grid, np.log(v)) for v in
            (self.pair_interaction_values, self.overlap_values, self.coupling_values)))

    def _lookup(self, k: int, d, direct: Callable) -> np.ndarray | float:
        d = np.abs(np.asarray(d, dtype=float))
        flat_d = d.reshape(-1)
        out = np.exp(self._splines[k](np.minimum(flat_d, self.d_grid[-1])))
        beyond = np.flatnonzero(flat_d > self.d_grid[-1])
        if beyond.size:
            if self.quadrature is None:
                raise InteractionError("separation beyond the table and no profile attached")
            for i in beyond:
                out[i] = direct(self.quadrature, flat_d[i])
        return float(out[0]) if d.ndim == 0 else out.reshape(d.shape)

    def P(self, d):
        return self._lookup(0, d, pair_interaction)

    def O(self, d):
        return self._lookup(1, d, overlap)

    def Q(self, d):
        return self._lookup(2, d, coupling)


def default_d_grid(n: int = 161, d_max: float = TABLE_D_MAX) -> np.ndarray:
    return np.concatenate(([0.0], np.geomspace(0.02, d_max, n - 1)))


def build_pair_tables(gs: GroundState, d_grid: np.ndarray | None = None,
                      workers: int = 1) -> PairTables:
    d_grid = default_d_grid() if d_grid is None else np.asarray(d_grid, dtype=float)
    pq = _quadrature(gs)

    def row(d):
        return pair_interaction(pq, d), overlap(pq, d), coupling(pq, d)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as ex:
            vals = list(ex.map(row, d_grid))
    else:
        vals = [row(d) for d in d_grid]
    arr = np.array(vals)
    return PairTables(d_grid=d_grid, pair_interaction_values=arr[:, 0],
                      overlap_values=arr[:, 1], coupling_values=arr[:, 2], quadrature=pq)


def save_pair_tables(tables: PairTables, path: str | os.PathLike,
                     extra: dict[str, str] | None = None) -> None:
    lines = [f"{PAIR_MAGIC} v{PAIR_VERSION}", f"rows = {tables.d_grid.size}"]
    lines += [f"{k} = {v}" for k, v in (extra or {}).items()]
    lines.append("d,P,O,Q")
    for row in zip(tables.d_grid, tables.pair_interaction_values, tables.overlap_values,
                   tables.coupling_values):
        lines.append(",".join(f"{x:.17g}" for x in row))
    lines.append("END")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_pair_tables(path: str | os.PathLike, gs: GroundState | None = None) -> PairTables:
    with open(path, encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith(PAIR_MAGIC + " v"):
        raise InteractionError("malformed pair-table header")
    if lines[0].split(" v", 1)[1] != PAIR_VERSION:
        raise InteractionError("unsupported pair-table version")
    meta = {}
    i = 1
    while i < len(lines) and " = " in lines[i]:
        k, v = lines[i].split(" = ", 1)
        meta[k] = v
        i += 1
    try:
        if lines[i] != "d,P,O,Q":
            raise ValueError("missing column header d,P,O,Q")
        end = lines.index("END")
        rows = int(meta["rows"])
        data = np.array([[float(x) for x in ln.split(",")] for ln in lines[i + 1:end]])
    except (ValueError, IndexError, KeyError) as exc:
        raise InteractionError(f"bad pair-table contents: {exc}") from None
    if data.shape != (rows, 4):
        raise InteractionError("pair-table row count mismatch")
    return PairTables(d_grid=data[:, 0], pair_interaction_values=data[:, 1],
                      overlap_values=data[:, 2], coupling_values=data[:, 3],
                      quadrature=_quadrature(gs) if gs is not None else None)


# --------------------------------------------------------------------------
# lattice sums


def lattice_sums(config: BumpConfig) -> tuple[float, float]:
    """(Σ_{i≥2} 1/|x̄₁ - x̄_i|, Σ_{i≥1} 1/|x̲_i - x̄₁|) from the closed-form distances.

    At t = 0 the rings coincide and the cross sum is infinite.
    """
    m, r, t = config.m, config.r, config.t
    sn = np.sin(np.arange(m) * np.pi / m)
    c2 = 1.0 - t * t
    s_ring = float(np.sum(1.0 / (2.0 * r * math.sqrt(c2) * sn[1:])))
    if t == 0:
        return s_ring, math.inf
    s_cross = float(np.sum(1.0 / (2.0 * r * np.sqrt(c2 * sn**2 + t * t))))
    return s_ring, s_cross


def ring_sum_ratio(m: int) -> float:
    """Σ_{i=1}^{m-1} 1/sin(iπ/m) / (m ln m); tends to 2/π."""
    i = np.arange(1, m)
    return float(np.sum(1.0 / np.sin(i * np.pi / m)) / (m * math.log(m)))


# --------------------------------------------------------------------------
# potential perturbation


def _shell_excess(vp: VParams, r: float, rho: np.ndarray) -> np.ndarray:
    """(2π/r)·[∫_{|r-ρ|}^{r+ρ} s(V(s)-1) ds] - 4πρ²·(V(r)-1) for the literal law.

    Written as a series in x = ρ/r when x is small so that the excess over
    the point value keeps full relative precision at large r.
    """
    q, b = vp.q, vp.b
    a = 2.0 - q
    x = rho / r
    out = np.empty_like(rho)
    small = x < 0.05
    # [(1+x)^a - (1-x)^a]/a - 2x = (2/a) Σ_{k odd ≥ 3} C(a,k) x^k
    xs = x[small]
    acc = np.zeros_like(xs)
    coef = a
    for k in range(1, 16):
        coef_k = coef
        if k % 2 == 1 and k >= 3:
            acc += coef_k * xs**k
        coef = coef * (a - k) / (k + 1)
    series = 2.0 / a * acc
    xl = x[~small]
    direct = ((1 + xl) ** a - np.abs(1 - xl) ** a) / a - 2.0 * xl
    out[small] = series
    out[~small] = direct
    # ∫ s·b s^{-q} ds over the shell = b r^a [((1+x)^a - |1-x|^a)/a]
    return 2.0 * math.pi / r * b * r**a * out


def v_perturbation_integral(gs: GroundState, config: BumpConfig, vp: VParams,
                            check_support: bool = True) -> tuple[float, float]:
    """(m·∫(V(|y|)-1)U²(y - x̄₁) dy, m·b·A1/r^q).

    The inner angular integral is done exactly: for a bump at distance r
    from the origin the spherical mean of V - 1 over the shell of radius ρ
    around the bump is (1/(2rρ))∫_{|r-ρ|}^{r+ρ} s(V(s)-1) ds.
    """
    pq = _quadrature(gs)
    r, m = config.r, config.m
    if check_support and pq.s_cut > 0.5 * r:
        raise InteractionError(
            f"bump support radius {pq.s_cut:.1f} exceeds r/2 = {0.5 * r:.1f} (bump overlaps origin)")
    rho, w = _gl_panels(0.0, pq.s_cut, breaks=(r,))
    u2 = pq.u(rho) ** 2
    A1 = 4.0 * math.pi * float(np.dot(w, rho**2 * u2))
    asym = m * vp.b * A1 / r**vp.q
    if vp.b == 0 and vp.V1 == 1 and vp.perturbation is None:
        return 0.0, asym
    # literal law: exact excess over the point value, then add the point value
    excess = float(np.dot(w, rho * u2 * _shell_excess(vp, r, rho)))
    total = excess + vp.b * A1 / r**vp.q + (vp.V1 - 1.0) * A1
    if vp.perturbation is not None:
        xg, wg = np.polynomial.legendre.leggauss(24)
        acc = 0.0
        for rh, wr, uu in zip(rho, w, u2):
            lo, hi = abs(r - rh), r + rh
            ss = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
            inner = 0.5 * (hi - lo) * np.dot(wg, ss * vp.perturbation(ss))
            acc += wr * rh * uu * inner
        total += 2.0 * math.pi / r * acc
    return m * total, asym


# --------------------------------------------------------------------------
# multi-bump energy


@dataclass(frozen=True)
class MultiBumpEnergy:
    breakdown: EnergyBreakdown
    three_body: float
    neglect_bound: float


def multi_bump_energy(config: BumpConfig, gs: GroundState, constants: AsymptoticConstants,
                      vp: VParams, tables: PairTables | None = None,
                      min_separation: float = 8.0) -> MultiBumpEnergy:
    """I(W) = I1 + I2 - I3 from pair integrals.

    With P, Q, O the pair, coupling and overlap integrals and sums over the
    2m - 1 partners of one bump:

        I1 = m A2/(8π) + m ΣQ
        I2 = m ∫(V-1)U²(·-x̄₁) + m Σ ⟨V-1⟩ O
        I3 = m A2/(16π) + (m/2) ΣP + 2m ΣQ + (third-bump potential on each overlap)

    Products of two overlaps and triple overlaps are dropped; their size is
    reported as ``neglect_bound``.
    """
    sep = separations(config)
    if sep.minimum < min_separation:
        raise InteractionError(
            f"minimum separation {sep.minimum:.3g} below {min_separation} (overlap regime)")
    m = config.m
    tab = tables if tables is not None else build_pair_tables(gs)
    pts = config.points
    p1 = pts[0]
    others = pts[1:]
    d = np.linalg.norm(others - p1, axis=1)
    P = np.atleast_1d(tab.P(d))
    Q = np.atleast_1d(tab.Q(d))
    O = np.atleast_1d(tab.O(d))
    A2 = constants.A2
    self_energy = A2 / (8.0 * math.pi)

    I1 = m * self_energy + m * float(np.sum(Q))

    v_self, _ = v_perturbation_integral(gs, config, vp, check_support=False)
    v_seg = np.array([_segment_v(vp, p1, x, gs.tail_power) if o > 1e-300 else 0.0
                      for o, x in zip(O, others)])
    I2 = v_self + m * float(np.sum(v_seg * O))

    # potential of every third bump on the overlap density of the pair (1, l)
    three = 0.0
    pq = tab.quadrature or _quadrature(gs)
    for k, (o, x) in enumerate(zip(O, others)):
        if o < 1e-300:
            continue
        seg = _segment_average(pq, pts, 0, k + 1)
        three += o * seg
    three *= m
    I3 = m * self_energy / 2.0 + 0.5 * m * float(np.sum(P)) + 2.0 * m * float(np.sum(Q)) + three

    omax = float(np.max(O)) if O.size else 0.0
    bound = (omax / constants.A1) ** 2 * constants.A2 * (2 * m) ** 2
    bd = EnergyBreakdown.from_terms(I1, I2, I3)
    return MultiBumpEnergy(breakdown=bd, three_body=three, neglect_bound=bound)


def _segment_weights(kappa: float, n: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on [0, 1] with weights ∝ (λ(1-λ))^κ.

    The overlap density of two separated bumps concentrates on the segment
    between them with this profile, κ the tail power.
    """
    xg, wg = np.polynomial.legendre.leggauss(n)
    lam = 0.5 * (xg + 1.0)
    wt = wg * (lam * (1 - lam)) ** kappa
    return lam, wt / wt.sum()


def _segment_v(vp: VParams, a: np.ndarray, b: np.ndarray, kappa: float) -> float:
    """V - 1 averaged over the overlap density of bumps at a and b."""
    lam, wt = _segment_weights(kappa)
    seg = a[None, :] + lam[:, None] * (b - a)[None, :]
    rad = np.maximum(np.linalg.norm(seg, axis=1), 1e-300)
    return float(np.dot(wt, vp.V(rad) - 1.0))


def _segment_average(pq: ProfileQuadrature, pts: np.ndarray, i: int, j: int) -> float:
    """Σ_{k ∉ {i,j}} Ψ_U(|x - p_k|) averaged over the overlap density of bumps i, j."""
    a, b = pts[i], pts[j]
    lam, wt = _segment_weights(pq.gs.tail_power)
    seg = a[None, :] + lam[:, None] * (b - a)[None, :]
    mask = np.ones(len(pts), dtype=bool)
    mask[[i, j]] = False
    dist = np.linalg.norm(seg[:, None, :] - pts[mask][None, :, :], axis=2)
    return float(np.dot(wt, pq.psi(dist).sum(axis=1)))
