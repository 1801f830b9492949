"""Radial ground state of -ΔU + U = Ψ_U U with ΔΨ_U = -U²/2.

The profile is found by shooting on the unshifted radial system

    u'' + (2/s) u' + ψ u = 0,      ψ'' + (2/s) ψ' = -u²/2,

with u(0) = 1 and ψ(0) the bisection parameter.  The decaying branch has a
negative plateau ψ → -E, and the scaling u → u(·/√E)/E lands on the E = 1
problem exactly.  Double precision bisection resolves the decaying branch
only up to a radius of order 20; beyond that the profile is continued with
the linear tail equation, where Ψ is harmonic and U is the decaying
solution of (sU)'' = (1 - Q/s)(sU).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.integrate import cumulative_simpson, simpson, solve_ivp
from scipy.interpolate import CubicSpline
from scipy.special import gamma, gammaincc

TABLE_MAGIC = "SNBUMPS-GS"
TABLE_VERSION = "1"

S_START = 1e-6
BISECT_CAP = 200
RTOL = 1e-12
ATOL = 1e-14
# relative spread of the two bracketing trajectories tolerated at the
# matching radius
MATCH_SPREAD = 1e-10


class GroundStateError(RuntimeError):
    """Shooting or table-consistency failure."""


class TableFormatError(ValueError):
    """Malformed or incompatible ground-state table file."""


@dataclass(frozen=True, eq=False)
class GroundState:
    """Tabulated (U, Ψ) on a uniform radial grid, rescaled to E = 1."""

    radii: np.ndarray
    u_values: np.ndarray
    psi_values: np.ndarray
    r_max: float
    shoot_residual: float
    energy_shift_pre_rescale: float
    _u_spline: CubicSpline = field(init=False, repr=False)
    _psi_spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float)
        u = np.asarray(self.u_values, dtype=float)
        psi = np.asarray(self.psi_values, dtype=float)
        if radii.ndim != 1 or radii.shape != u.shape or radii.shape != psi.shape:
            raise GroundStateError("radii, u_values and psi_values must be 1-D of equal length")
        if radii[0] < 0 or np.any(np.diff(radii) <= 0):
            raise GroundStateError("radii must be nonnegative and strictly increasing")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(psi))):
            raise GroundStateError("non-finite profile values")
        if np.any(u <= 0) or np.any(np.diff(u) >= 0):
            raise GroundStateError("u must be strictly positive and strictly decreasing")
        if np.any(psi <= 0) or np.any(np.diff(psi) >= 0):
            raise GroundStateError("psi must be strictly positive and strictly decreasing")
        for name, arr in (("radii", radii), ("u_values", u), ("psi_values", psi)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        # not-a-knot cubic splines; s=0 is a symmetry point so the
        # derivative there is clamped to zero
        object.__setattr__(self, "_u_spline",
                           CubicSpline(radii, u, bc_type=((1, 0.0), "not-a-knot")))
        object.__setattr__(self, "_psi_spline",
                           CubicSpline(radii, psi, bc_type=((1, 0.0), "not-a-knot")))

    @property
    def node_count(self) -> int:
        return int(self.radii.size)

    @property
    def tail_charge(self) -> float:
        """Q = s·Ψ(s) at r_max; Ψ = Q/s beyond the table."""
        return float(self.psi_values[-1] * self.r_max)

    @property
    def tail_power(self) -> float:
        """Algebraic correction κ in U ~ s^(κ-1) e^{-s}, κ = Q/2."""
        return 0.5 * self.tail_charge


@dataclass(frozen=True)
class AsymptoticConstants:
    A1: float
    A2: float
    lambda2: float
    lambda3: float
    fit_windows: tuple[tuple[float, float], tuple[float, float]]
    fit_residuals: tuple[float, float]
    # fitted κ in s e^s U ~ s^κ; zero for a pure exponential tail
    u_tail_power: float = 0.0


# --------------------------------------------------------------------------
# shooting


def _rhs(s, y):
    u, up, p, pp = y
    return [up, -2.0 * up / s - p * u, pp, -2.0 * pp / s - 0.5 * u * u]


def _series_start(p0: float, s0: float = S_START) -> list[float]:
    return [1.0 - p0 * s0**2 / 6.0, -p0 * s0 / 3.0, p0 - s0**2 / 12.0, -s0 / 6.0]


def _u_zero(s, y):
    return y[0]


_u_zero.terminal = True
_u_zero.direction = -1


def _u_turn(s, y):
    return y[1]


_u_turn.terminal = True
_u_turn.direction = 1


def _trajectory(p0: float, s_end: float):
    return solve_ivp(_rhs, (S_START, s_end), _series_start(p0), method="DOP853",
                     rtol=RTOL, atol=ATOL, events=[_u_zero, _u_turn], dense_output=True)


def _classify(p0: float, s_end: float) -> int:
    """+1 if u crosses zero (ψ(0) too large), -1 if u turns up (too small)."""
    sol = _trajectory(p0, s_end)
    if sol.t_events[0].size:
        return 1
    if sol.t_events[1].size:
        return -1
    return 0


def _bisect(s_end: float, tolerance: float, lo: float = 0.0, hi: float = 5.0):
    if _classify(lo, s_end) != -1 or _classify(hi, s_end) != 1:
        raise GroundStateError("initial bracket for psi(0) does not straddle the decaying branch")
    for _ in range(BISECT_CAP):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        side = _classify(mid, s_end)
        if side == 1:
            hi = mid
        elif side == -1:
            lo = mid
        else:
            # neither event within s_end: integration horizon exhausted
            lo = hi = mid
            break
    else:
        if hi - lo > tolerance:
            raise GroundStateError(f"bisection did not converge in {BISECT_CAP} iterations")
    return lo, hi


def _matching_radius(lo_sol, hi_sol) -> float:
    """Largest radius where the two bracketing trajectories still agree."""
    s_top = min(lo_sol.t[-1], hi_sol.t[-1])
    grid = np.linspace(1.0, s_top, 4000)
    ul = lo_sol.sol(grid)[0]
    uh = hi_sol.sol(grid)[0]
    spread = np.abs(uh - ul) / np.abs(0.5 * (ul + uh))
    bad = np.nonzero(spread > MATCH_SPREAD)[0]
    if bad.size == 0:
        return float(grid[-1])
    if bad[0] < 10:
        raise GroundStateError("bracketing trajectories separate immediately")
    return float(grid[bad[0] - 1])


def _tail_factor(s_grid: np.ndarray, charge: float, s_far: float):
    """g with sU = e^{-s} g on s_grid (descending integration is stable)."""
    kappa = 0.5 * charge

    def rhs(s, y):
        g, gp = y
        return [gp, 2.0 * gp - charge * g / s]

    g0 = s_far**kappa
    y0 = [g0, kappa * g0 / s_far]
    sol = solve_ivp(rhs, (s_far, float(s_grid.min())), y0, method="DOP853",
                    rtol=1e-13, atol=1e-300, dense_output=True)
    g, gp = sol.sol(s_grid)
    return g, gp


def _assemble(mid, p0: float, energy: float, sig_m: float, r_max: float, node_count: int):
    """Rescaled tables from the shooting trajectory and the continued tail.

    Returns (u, psi, s_m, ∫_{s_m}^∞ sU² ds).
    """
    root_e = math.sqrt(energy)
    radii = np.linspace(0.0, r_max, node_count)
    s_m = sig_m * root_e
    inner = radii <= s_m
    outer = ~inner

    u = np.empty_like(radii)
    psi = np.empty_like(radii)
    sig = radii[inner] / root_e
    y = mid.sol(np.maximum(sig, S_START))
    # quadratic series below the start radius
    tiny = sig < S_START
    y[0, tiny] = 1.0 - p0 * sig[tiny] ** 2 / 6.0
    y[2, tiny] = p0 - sig[tiny] ** 2 / 12.0
    if np.any(y[0] <= 0):
        raise GroundStateError("u became negative before the matching radius")
    u[inner] = y[0] / energy
    psi[inner] = (y[2] + energy) / energy

    u_m, up_m, p_m, pp_m = mid.sol(sig_m)
    charge = -(sig_m**2) * pp_m / root_e
    U_m = u_m / energy
    dU_m = up_m / energy / root_e

    s_out = np.concatenate(([s_m], radii[outer], [r_max + 12.0]))
    s_out = np.unique(s_out)
    fine = np.linspace(s_m, r_max + 12.0, 20 * (s_out.size + 50))
    s_all = np.unique(np.concatenate((s_out, fine)))
    # the exterior mass changes the charge by O(U(s_m)²), negligible here
    g, gp = _tail_factor(s_all, charge, r_max + 25.0)
    w = np.exp(-s_all) * g
    scale = U_m * s_m / w[0]
    u_all = scale * w / s_all
    dw = np.exp(-s_all[0]) * (gp[0] - g[0])
    dU_tail = scale * (dw / s_m - w[0] / s_m**2)
    seam = abs(dU_tail - dU_m) / abs(dU_m)
    if seam > 1e-6:
        raise GroundStateError(f"tail continuation mismatch {seam:.3g} at s = {s_m:.3f}")

    # exterior Ψ from the radial Newton formula on the continued profile
    u2 = u_all**2
    enc = charge + 0.5 * cumulative_simpson(s_all**2 * u2, x=s_all, initial=0.0)
    mom = cumulative_simpson(s_all * u2, x=s_all, initial=0.0)
    ext = mom[-1] - mom
    psi_all = enc / s_all + 0.5 * ext
    if np.any(outer):
        idx = np.searchsorted(s_all, radii[outer])
        u[outer] = u_all[idx]
        psi[outer] = psi_all[idx]
    return u, psi, s_m, float(mom[-1])


def solve_ground_state(tolerance: float = 1e-10, r_max: float = 30.0,
                       node_count: int = 6000) -> GroundState:
    """Shoot for the positive decaying radial solution and tabulate it.

    Returns profiles on ``node_count`` uniform nodes of [0, r_max] for the
    E = 1 problem.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    if r_max < 20:
        raise ValueError("r_max must be at least 20")
    if node_count < 2000:
        raise ValueError("node_count must be at least 2000")

    s_end = 60.0
    lo, hi = _bisect(s_end, tolerance)
    residual = hi - lo
    if residual > tolerance:
        raise GroundStateError(f"bisection residual {residual:.3g} above tolerance")
    lo_sol = _trajectory(lo, s_end)
    hi_sol = _trajectory(hi, s_end)
    sig_m = _matching_radius(lo_sol, hi_sol)
    mid = _trajectory(0.5 * (lo + hi), sig_m + 1.0)

    p0 = 0.5 * (lo + hi)
    u_m, up_m, p_m, pp_m = mid.sol(sig_m)
    # beyond the matching radius ψ = -E + C/σ + (1/2)∫_σ^∞ τu², so the
    # plateau estimate -(ψ + σψ') misses the exterior mass term; iterate it
    tail_mass = 0.0
    for _ in range(4):
        energy = -(p_m + sig_m * pp_m) + tail_mass
        if not energy > 0:
            raise GroundStateError("no negative plateau of psi: not on the ground-state branch")
        u, psi, s_m, ext = _assemble(mid, p0, energy, sig_m, r_max, node_count)
        new_mass = 0.5 * energy * ext
        if abs(new_mass - tail_mass) <= 1e-15 * energy:
            break
        tail_mass = new_mass
    radii = np.linspace(0.0, r_max, node_count)
    if np.any(u <= 0):
        raise GroundStateError("negative u excursion before r_max")

    return GroundState(radii=radii, u_values=u, psi_values=psi, r_max=float(r_max),
                       shoot_residual=float(residual),
                       energy_shift_pre_rescale=float(energy))


# --------------------------------------------------------------------------
# evaluation


def evaluate_profile(gs: GroundState, radius, which: Literal["u", "psi"] = "u"):
    """U or Ψ at ``radius`` (scalar or array).

    Cubic interpolation inside the table.  Beyond r_max, Ψ = Q/s and
    U = U(R)(R/s)^(1-κ) e^{-(s-R)} with κ = Q/2, which is the leading term
    of the decaying solution of the tail equation and is continuous at R.
    """
    s = np.abs(np.asarray(radius, dtype=float))
    R = gs.r_max
    inside = s <= R
    if which == "u":
        out = np.where(inside, gs._u_spline(np.minimum(s, R)), 0.0)
        if not np.all(inside):
            so = np.where(inside, R, s)
            tail = gs.u_values[-1] * (R / so) ** (1.0 - gs.tail_power) * np.exp(-(so - R))
            out = np.where(inside, out, tail)
    elif which == "psi":
        out = np.where(inside, gs._psi_spline(np.minimum(s, R)), 0.0)
        if not np.all(inside):
            so = np.where(inside, R, s)
            out = np.where(inside, out, gs.tail_charge / so)
    else:
        raise ValueError(f"unknown profile selector {which!r}")
    return float(out) if np.ndim(out) == 0 else out


def profile_derivative(gs: GroundState, radius, which: Literal["u", "psi"] = "u"):
    """Radial derivative of the interpolated profile, consistent with evaluate_profile."""
    s = np.abs(np.asarray(radius, dtype=float))
    R = gs.r_max
    inside = s <= R
    spline = gs._u_spline if which == "u" else gs._psi_spline
    out = spline(np.minimum(s, R), 1)
    if not np.all(inside):
        so = np.where(inside, R, s)
        if which == "u":
            k = gs.tail_power
            val = gs.u_values[-1] * (R / so) ** (1.0 - k) * np.exp(-(so - R))
            tail = val * (-1.0 + (k - 1.0) / so)
        else:
            tail = -gs.tail_charge / so**2
        out = np.where(inside, out, tail)
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# diagnostics


def newton_psi(gs: GroundState) -> np.ndarray:
    """(1/2)[(1/s)∫₀^s σ²U² + ∫_s^∞ σU²] at every node, by cumulative quadrature."""
    s = gs.radii
    u2 = gs.u_values**2
    inner = cumulative_simpson(s**2 * u2, x=s, initial=0.0)
    outer_cum = cumulative_simpson(s * u2, x=s, initial=0.0)
    outer = outer_cum[-1] - outer_cum + _tail_moment(gs, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        first = np.where(s > 0, inner / np.where(s > 0, s, 1.0), 0.0)
    return 0.5 * (first + outer)


def _tail_moment(gs: GroundState, n: int) -> float:
    """∫_R^∞ s^n U² ds for the extrapolated tail."""
    R = gs.r_max
    k = gs.tail_power
    # U² = U(R)² R^(2-2k) s^(2k-2) e^{-2(s-R)}
    a = 2.0 * k - 2.0 + n
    c = gs.u_values[-1] ** 2 * R ** (2.0 - 2.0 * k) * math.exp(2.0 * R)
    # ∫_R^∞ s^a e^{-2s} ds = 2^{-(a+1)} Γ(a+1, 2R)
    return float(c * 2.0 ** (-(a + 1.0)) * gamma(a + 1.0) * gammaincc(a + 1.0, 2.0 * R))


def ode_residual(gs: GroundState) -> np.ndarray:
    """U'' + (2/s)U' - U + ΨU at interior nodes, fourth-order differences."""
    s, u, p = gs.radii, gs.u_values, gs.psi_values
    h = s[1] - s[0]
    d1 = (-u[4:] + 8 * u[3:-1] - 8 * u[1:-3] + u[:-4]) / (12 * h)
    d2 = (-u[4:] + 16 * u[3:-1] - 30 * u[2:-2] + 16 * u[1:-3] - u[:-4]) / (12 * h * h)
    sc = s[2:-2]
    return d2 + 2.0 * d1 / sc - u[2:-2] + p[2:-2] * u[2:-2]


def nehari_terms(gs: GroundState) -> tuple[float, float]:
    """(∫|∇U|² + U², ∫Ψ U²) over R³."""
    s = gs.radii
    du = profile_derivative(gs, s)
    lhs = 4 * math.pi * simpson(s**2 * (du**2 + gs.u_values**2), x=s)
    rhs = 4 * math.pi * simpson(s**2 * gs.psi_values * gs.u_values**2, x=s)
    return float(lhs), float(rhs)


def tail_rate_fit(gs: GroundState, window: tuple[float, float] | None = None,
                  with_power: bool = True) -> dict:
    """Least-squares fit of log(s U) on a window.

    With ``with_power`` the model is a + β log s - κ s, so -κ is the
    exponential rate (returned as "rate") with the algebraic prefactor
    fitted separately; without it the model is a - κ s.
    """
    lo, hi = window if window is not None else (gs.r_max - 10.0, gs.r_max)
    sel = (gs.radii >= lo) & (gs.radii <= hi)
    s = gs.radii[sel]
    y = np.log(s * gs.u_values[sel])
    cols = [np.ones_like(s), -s]
    if with_power:
        cols.append(np.log(s))
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return {"rate": -float(coef[1]),
            "power": float(coef[2]) if with_power else 0.0,
            "rms": float(np.sqrt(np.mean(resid**2)))}


def extract_constants(gs: GroundState, window_u: tuple[float, float] | None = None,
                      window_psi: tuple[float, float] | None = None) -> AsymptoticConstants:
    """A1, A2 by quadrature plus tail closed forms; λ2, λ3 by constant fits."""
    R = gs.r_max
    window_u = window_u or (0.6 * R, 0.9 * R)
    window_psi = window_psi or (0.6 * R, 0.9 * R)
    for lo, hi in (window_u, window_psi):
        if hi > R * (1 + 1e-12) or lo > hi or lo < 0:
            raise ValueError(f"fit window {(lo, hi)} not inside [0, r_max={R}]")
    s, u, p = gs.radii, gs.u_values, gs.psi_values
    A1 = 4 * math.pi * (simpson(s**2 * u**2, x=s) + _tail_moment(gs, 2))
    # Ψ = Q/s in the tail
    A2 = 8 * math.pi * 4 * math.pi * (simpson(s**2 * p * u**2, x=s)
                                      + gs.tail_charge * _tail_moment(gs, 1))

    def window_fit(vals, lo, hi):
        sel = (s >= lo - 1e-12) & (s <= hi + 1e-12)
        if not np.any(sel):
            sel = np.zeros_like(s, dtype=bool)
            sel[np.argmin(np.abs(s - hi))] = True
        v = vals[sel]
        lam = float(np.mean(v))
        return lam, float(np.sqrt(np.mean((v - lam) ** 2)) / lam), sel

    lam2, res2, sel_u = window_fit(s * np.exp(s) * u, *window_u)
    lam3, res3, _ = window_fit(s * p, *window_psi)
    power = 0.0
    if np.count_nonzero(sel_u) >= 3:
        power = tail_rate_fit(gs, window_u)["power"]
    return AsymptoticConstants(A1=float(A1), A2=float(A2), lambda2=lam2, lambda3=lam3,
                               fit_windows=(tuple(window_u), tuple(window_psi)),
                               fit_residuals=(res2, res3), u_tail_power=power)


# --------------------------------------------------------------------------
# table I/O


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def save_table(gs: GroundState, constants: AsymptoticConstants, path: str | os.PathLike,
               extra: dict[str, str] | None = None) -> None:
    """Write the versioned text table; ``extra`` adds provenance metadata lines."""
    (wu, wp) = constants.fit_windows
    meta = [
        ("r_max", _fmt(gs.r_max)),
        ("node_count", str(gs.node_count)),
        ("shoot_residual", _fmt(gs.shoot_residual)),
        ("energy_shift_pre_rescale", _fmt(gs.energy_shift_pre_rescale)),
        ("A1", _fmt(constants.A1)),
        ("A2", _fmt(constants.A2)),
        ("lambda2", _fmt(constants.lambda2)),
        ("lambda3", _fmt(constants.lambda3)),
        ("fit_window_u", f"{_fmt(wu[0])},{_fmt(wu[1])}"),
        ("fit_window_psi", f"{_fmt(wp[0])},{_fmt(wp[1])}"),
        ("fit_residual_u", _fmt(constants.fit_residuals[0])),
        ("fit_residual_psi", _fmt(constants.fit_residuals[1])),
        ("u_tail_power", _fmt(constants.u_tail_power)),
    ]
    lines = [f"{TABLE_MAGIC} v{TABLE_VERSION}"]
    lines += [f"{k} = {v}" for k, v in meta]
    lines += [f"{k} = {v}" for k, v in (extra or {}).items()]
    lines.append("s,u,psi")
    for a, b, c in zip(gs.radii, gs.u_values, gs.psi_values):
        lines.append(f"{_fmt(a)},{_fmt(b)},{_fmt(c)}")
    lines.append("END")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _pair(text: str) -> tuple[float, float]:
    a, b = text.split(",")
    return float(a), float(b)


def load_table(path: str | os.PathLike) -> tuple[GroundState, AsymptoticConstants]:
    with open(path, encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines:
        raise TableFormatError("empty table file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != TABLE_MAGIC or not head[1].startswith("v"):
        raise TableFormatError(f"malformed header {lines[0]!r}")
    if head[1][1:] != TABLE_VERSION:
        raise TableFormatError(f"table version {head[1][1:]} unsupported (expected {TABLE_VERSION})")
    meta: dict[str, str] = {}
    i = 1
    while i < len(lines) and " = " in lines[i]:
        k, v = lines[i].split(" = ", 1)
        meta[k.strip()] = v.strip()
        i += 1
    if i >= len(lines) or lines[i] != "s,u,psi":
        raise TableFormatError("missing column header s,u,psi")
    try:
        end = lines.index("END", i)
    except ValueError:
        raise TableFormatError("missing END marker") from None
    try:
        data = np.array([[float(x) for x in ln.split(",")] for ln in lines[i + 1:end]])
        n = int(meta["node_count"])
        gs_kwargs = dict(r_max=float(meta["r_max"]),
                         shoot_residual=float(meta["shoot_residual"]),
                         energy_shift_pre_rescale=float(meta["energy_shift_pre_rescale"]))
        constants = AsymptoticConstants(
            A1=float(meta["A1"]), A2=float(meta["A2"]),
            lambda2=float(meta["lambda2"]), lambda3=float(meta["lambda3"]),
            fit_windows=(_pair(meta["fit_window_u"]), _pair(meta["fit_window_psi"])),
            fit_residuals=(float(meta["fit_residual_u"]), float(meta["fit_residual_psi"])),
            u_tail_power=float(meta.get("u_tail_power", "0")))
    except (KeyError, ValueError) as exc:
        raise TableFormatError(f"bad table contents: {exc}") from None
    if data.ndim != 2 or data.shape != (n, 3):
        raise TableFormatError(f"expected {n} rows of 3 columns")
    if np.any(np.diff(data[:, 0]) <= 0):
        raise GroundStateError("radii in table are not strictly increasing")
    gs = GroundState(radii=data[:, 0], u_values=data[:, 1], psi_values=data[:, 2], **gs_kwargs)
    return gs, constants
