"""Closed-form reduced energy F̄₁(r, t) and its critical point."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .ansatz import ParameterBox

FIXED_POINT_CAP = 200
NEWTON_CAP = 100
HALVING_CAP = 30


class CriticalPointError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReducedModel:
    m: int
    q: float
    b: float
    A1: float
    A2: float
    # multiply the A1/r^q term by b
    b_corrected: bool = False

    def __post_init__(self):
        if self.m < 3:
            raise ValueError("m must be at least 3")
        if not 0.5 <= self.q < 1:
            raise ValueError("q must lie in [1/2, 1)")
        if not (self.A1 > 0 and self.A2 > 0):
            raise ValueError("A1 and A2 must be positive")

    @property
    def coupling(self) -> float:
        """A1²/(16π²), the common factor of both interaction terms."""
        return self.A1**2 / (16.0 * math.pi**2)

    @property
    def potential_coef(self) -> float:
        return self.b * self.A1 if self.b_corrected else self.A1


@dataclass(frozen=True, eq=False)
class CriticalPoint:
    r_star: float
    t_star: float
    gradient_norm: float
    hessian: np.ndarray
    classification: str
    iterations: int
    in_box: bool

    @property
    def sign_pattern(self) -> dict[str, int]:
        h = self.hessian
        det = h[0, 0] * h[1, 1] - h[0, 1] ** 2
        return {"F_rr": int(np.sign(h[0, 0])), "F_tt": int(np.sign(h[1, 1])),
                "F_rt": int(np.sign(h[0, 1])), "det": int(np.sign(det))}


@dataclass(frozen=True, eq=False)
class ReducedEnergySurface:
    model: ReducedModel
    r_values: np.ndarray
    t_values: np.ndarray
    F1: np.ndarray          # (nr, nt)
    grad: np.ndarray        # (nr, nt, 2)
    hess: np.ndarray        # (nr, nt, 3): rr, rt, tt

    def rows(self) -> Iterable[tuple]:
        for i, r in enumerate(self.r_values):
            for j, t in enumerate(self.t_values):
                yield (r, t, self.F1[i, j], self.grad[i, j, 0], self.grad[i, j, 1],
                       self.hess[i, j, 0], self.hess[i, j, 1], self.hess[i, j, 2])


def _check_t(t) -> None:
    if np.any(np.asarray(t) <= 0) or np.any(np.asarray(t) >= 1):
        raise ValueError("t must lie in (0, 1)")


def _g(model: ReducedModel, t):
    """g(t) = (ln m + ln(π/t))/√(1-t²) and its first two derivatives."""
    L = math.log(model.m) + np.log(math.pi / t)
    w = 1.0 - t * t
    c = w**-0.5
    c1 = t * w**-1.5
    c2 = w**-1.5 + 3.0 * t * t * w**-2.5
    g = L * c
    g1 = -c / t + L * c1
    g2 = c / (t * t) - 2.0 * c1 / t + L * c2
    return g, g1, g2


def F1(model: ReducedModel, r, t):
    """A2/(16π) + A1/r^q - K m ln m/(r√(1-t²)) - K m ln(π/t)/(r√(1-t²)), K = A1²/(16π²)."""
    _check_t(t)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    K = model.coupling
    m = model.m
    w = np.sqrt(1.0 - np.asarray(t) ** 2)
    val = (model.A2 / (16.0 * math.pi) + model.potential_coef / r**model.q
           - K * m * math.log(m) / (r * w) - K * m * np.log(math.pi / t) / (r * w))
    return float(val) if np.ndim(val) == 0 else val


def grad_hessian_F1(model: ReducedModel, r: float, t: float):
    """((F_r, F_t), [[F_rr, F_rt], [F_rt, F_tt]]) in closed form."""
    _check_t(t)
    if not r > 0:
        raise ValueError("r must be positive")
    K, m, q, a = model.coupling, model.m, model.q, model.potential_coef
    g, g1, g2 = _g(model, t)
    Fr = -a * q / r ** (q + 1.0) + K * m * g / r**2
    Ft = -K * m * g1 / r
    Frr = a * q * (q + 1.0) / r ** (q + 2.0) - 2.0 * K * m * g / r**3
    Frt = K * m * g1 / r**2
    Ftt = -K * m * g2 / r
    return np.array([Fr, Ft]), np.array([[Frr, Frt], [Frt, Ftt]])


def critical_system_lhs(model: ReducedModel, r: float, t: float) -> tuple[float, float]:
    """The two equations of the critical system term by term.

    The first equals F_r; the second is written without the common factor
    A1²/(16π²), so F_t = coupling · second.
    """
    a, q, m = model.potential_coef, model.q, model.m
    K = model.coupling
    w = 1.0 - t * t
    lm = math.log(m)
    eq_r = (-a * q / r ** (q + 1.0) + K * m * lm / (math.sqrt(w) * r**2)
            + K * m / (math.sqrt(w) * r**2) * math.log(math.pi / t))
    eq_t = (-t * m * lm / (r * w**1.5) - m * t / (r * w**1.5) * math.log(math.pi / t)
            + m / (t * r * math.sqrt(w)))
    return eq_r, eq_t


def classify(hessian: np.ndarray, r: float = 1.0, rel_tol: float = 1e-12) -> str:
    """Sign pattern of the eigenvalues, computed in (r/r*, t) coordinates.

    The congruence diag(r, 1) keeps the inertia and removes the scale
    mismatch between the two directions.
    """
    d = np.array([r, 1.0])
    ev = np.linalg.eigvalsh(hessian * np.outer(d, d))
    if np.min(np.abs(ev)) <= rel_tol * np.max(np.abs(ev)):
        return "degenerate"
    if np.all(ev < 0):
        return "max"
    if np.all(ev > 0):
        return "min"
    return "saddle"


@dataclass(frozen=True)
class FixedPointResult:
    t_star: float
    iterations: int
    gaps: tuple[float, ...]

    @property
    def contraction(self) -> float:
        """Largest observed ratio of successive iterate gaps."""
        g = [x for x in self.gaps if x > 0]
        ratios = [b / a for a, b in zip(g[:-1], g[1:]) if a > 1e-14]
        return max(ratios) if ratios else 0.0


def a_map(model: ReducedModel, t: float) -> float:
    return math.sqrt(1.0 - t * t) / math.sqrt(math.log(model.m) + math.log(math.pi) - math.log(t))


def fixed_point_t(model: ReducedModel, tol: float = 1e-13) -> FixedPointResult:
    """Iterate t ← √(1-t²)/√(ln m + ln π - ln t) from (ln m)^{-1/2}."""
    if model.m < 10:
        raise ValueError("fixed-point map needs m >= 10")
    t = math.log(model.m) ** -0.5
    gaps = []
    for k in range(1, FIXED_POINT_CAP + 1):
        nxt = a_map(model, t)
        gaps.append(abs(nxt - t))
        t = nxt
        if gaps[-1] < tol:
            return FixedPointResult(t_star=t, iterations=k, gaps=tuple(gaps))
    raise CriticalPointError(f"fixed-point iteration exceeded {FIXED_POINT_CAP} steps")


def fixed_point_residual(model: ReducedModel, t: float) -> float:
    w = 1.0 - t * t
    return 1.0 / t**2 - math.log(model.m) / w - math.log(math.pi / t) / w


def simplified_critical(model: ReducedModel) -> tuple[float, float]:
    """Exact root of the truncated system that keeps ln m but drops ln(π/t).

    t² = 1/(1 + ln m) and r^{1-q} = A1 m ln m/(16π² q √(1-t²)) (times 1/b
    when b multiplies the potential term).
    """
    lm = math.log(model.m)
    t = (1.0 + lm) ** -0.5
    coef = model.coupling * model.m * lm / (model.potential_coef * model.q * math.sqrt(1 - t * t))
    return coef ** (1.0 / (1.0 - model.q)), t


def _scales(model: ReducedModel, r: float, t: float) -> tuple[float, float]:
    """Magnitude of the largest term in each gradient component."""
    K, m = model.coupling, model.m
    L = math.log(m) + math.log(math.pi / t)
    w = 1.0 - t * t
    sr = max(model.potential_coef * model.q / r ** (model.q + 1.0),
             K * m * L / (math.sqrt(w) * r**2))
    st = K * m / r * max(L * t / w**1.5, 1.0 / (t * math.sqrt(w)))
    return sr, st


def _scaled_grad(model, r, t):
    g, H = grad_hessian_F1(model, r, t)
    sr, st = _scales(model, r, t)
    return g, H, math.hypot(g[0] / sr, g[1] / st)


def solve_critical(model: ReducedModel, box: ParameterBox | None = None,
                   start: tuple[float, float] | None = None,
                   tol: float = 1e-12) -> CriticalPoint:
    """Damped Newton on grad F̄₁ = 0, started from the simplified root.

    Newton works in (log r, t); steps are halved until the scaled gradient
    norm decreases.
    """
    if model.m < 10:
        raise ValueError("solve_critical needs m >= 10")
    r, t = start if start is not None else simplified_critical(model)
    r0 = r
    span_r = abs(box.r_hi - box.r_lo) if box is not None else r0
    g, H, norm = _scaled_grad(model, r, t)
    it = 0
    while norm > tol:
        if it >= NEWTON_CAP:
            raise CriticalPointError("Newton iteration cap reached")
        it += 1
        # chain rule for x = log r: dF/dx = r F_r, d²F/dx² = r² F_rr + r F_r
        J = np.array([[r * r * H[0, 0] + r * g[0], r * H[0, 1]],
                      [r * H[0, 1], H[1, 1]]])
        rhs = -np.array([r * g[0], g[1]])
        try:
            if abs(np.linalg.det(J)) <= 1e-300 or np.linalg.cond(J) > 1e14:
                raise np.linalg.LinAlgError
            step = np.linalg.solve(J, rhs)
        except np.linalg.LinAlgError:
            raise CriticalPointError(f"singular Hessian at r={r:.6g}, t={t:.6g}") from None
        lam = 1.0
        for _ in range(HALVING_CAP + 1):
            r_new = r * math.exp(lam * step[0])
            t_new = t + lam * step[1]
            if 0 < t_new < 1:
                g_new, H_new, n_new = _scaled_grad(model, r_new, t_new)
                if n_new < norm:
                    break
            lam *= 0.5
        else:
            raise CriticalPointError("damped Newton step failed to reduce the gradient")
        if abs(r_new - r0) > 10 * span_r:
            raise CriticalPointError("Newton iterate left the parameter box by more than 10x")
        r, t, g, H, norm = r_new, t_new, g_new, H_new, n_new
    return CriticalPoint(r_star=r, t_star=t, gradient_norm=norm, hessian=H,
                         classification=classify(H, r), iterations=it,
                         in_box=bool(box.contains(r, t)) if box is not None else False)


def sweep(model: ReducedModel, box: ParameterBox, nr: int, nt: int) -> ReducedEnergySurface:
    """F̄₁ with gradient and Hessian on an nr × nt tensor grid over the box."""
    if nr < 1 or nt < 1:
        raise ValueError("nr and nt must be positive")
    if not (box.r_lo <= box.r_hi and 0 < box.t_lo <= box.t_hi < 1 and box.r_lo > 0):
        raise ValueError("invalid parameter box")
    rs = np.linspace(box.r_lo, box.r_hi, nr) if nr > 1 else np.array([box.r_center])
    ts = np.linspace(box.t_lo, box.t_hi, nt) if nt > 1 else np.array([box.t_center])
    return sweep_points(model, rs, ts)


def sweep_points(model: ReducedModel, rs: np.ndarray, ts: np.ndarray) -> ReducedEnergySurface:
    """Tensor-grid evaluation at explicit abscissae."""
    rs = np.asarray(rs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    F = np.empty((rs.size, ts.size))
    G = np.empty((rs.size, ts.size, 2))
    Hs = np.empty((rs.size, ts.size, 3))
    for i, r in enumerate(rs):
        for j, t in enumerate(ts):
            F[i, j] = F1(model, r, t)
            g, H = grad_hessian_F1(model, r, t)
            G[i, j] = g
            Hs[i, j] = (H[0, 0], H[0, 1], H[1, 1])
    return ReducedEnergySurface(model=model, r_values=rs, t_values=ts, F1=F, grad=G, hess=Hs)
