"""Double-ring bump configurations and the approximate solution W_{r,t}."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .groundstate import GroundState, evaluate_profile


@dataclass(frozen=True, eq=False)
class BumpConfig:
    """2m bump centers on two horizontal m-gons at heights ±rt.

    All points lie on the sphere of radius r.
    """

    m: int
    r: float
    t: float
    upper_points: np.ndarray
    lower_points: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return np.vstack([self.upper_points, self.lower_points])


@dataclass(frozen=True)
class ParameterBox:
    r_lo: float
    r_hi: float
    t_lo: float
    t_hi: float
    m: int
    q: float
    b: float
    alpha0: float
    beta0: float

    def contains(self, r: float, t: float) -> bool:
        return self.r_lo <= r <= self.r_hi and self.t_lo <= t <= self.t_hi

    @property
    def r_center(self) -> float:
        return 0.5 * (self.r_lo + self.r_hi)

    @property
    def t_center(self) -> float:
        return 0.5 * (self.t_lo + self.t_hi)


@dataclass(frozen=True)
class Separations:
    ring_gap: float
    layer_gap: float
    # distances from x̄₁ to x̄_i (i ≥ 2) and to x̲_i (i ≥ 1), ascending
    same_ring: tuple[float, ...]
    cross_ring: tuple[float, ...]

    @property
    def minimum(self) -> float:
        vals = list(self.same_ring) + [d for d in self.cross_ring if d > 0]
        return min(vals) if vals else math.inf


def make_config(m: int, r: float, t: float) -> BumpConfig:
    if int(m) != m or m < 2:
        raise ValueError("m must be an integer >= 2")
    if not r > 0:
        raise ValueError("r must be positive")
    if not 0 <= t < 1:
        raise ValueError("t must lie in [0, 1)")
    m = int(m)
    ang = 2.0 * np.pi * np.arange(m) / m
    c = math.sqrt(1.0 - t * t)
    upper = np.column_stack([r * c * np.cos(ang), r * c * np.sin(ang), np.full(m, r * t)])
    lower = upper * np.array([1.0, 1.0, -1.0])
    upper.setflags(write=False)
    lower.setflags(write=False)
    return BumpConfig(m=m, r=float(r), t=float(t), upper_points=upper, lower_points=lower)


def box_centers(m: int, q: float, A1: float, b: float = 1.0,
                b_corrected: bool = False) -> tuple[float, float]:
    """Asymptotic (r, t) centers: r ~ (A1/(16qπ²) m ln m)^{1/(1-q)}, t = (ln m)^{-1/2}.

    With ``b_corrected`` the potential coefficient b multiplies q in the
    r-center, which is what balancing b·A1/r^q against the ring
    interaction gives.
    """
    if not 0.5 <= q < 1:
        raise ValueError("q must lie in [1/2, 1)")
    lm = math.log(m)
    coef = A1 / (16.0 * q * math.pi**2 * (b if b_corrected else 1.0))
    r_c = (coef * m * lm) ** (1.0 / (1.0 - q))
    return r_c, lm ** -0.5


def admissible_box(m: int, q: float, b: float, A1: float, alpha0: float = 0.1,
                   beta0: float = 0.1, b_corrected: bool = False) -> ParameterBox:
    """The admissible (r, t) box around the asymptotic centers."""
    if not 0.5 <= q < 1:
        raise ValueError("q must lie in [1/2, 1)")
    if m < 3:
        raise ValueError("m must be at least 3")
    if alpha0 < 0 or beta0 < 0:
        raise ValueError("box half-widths must be nonnegative")
    lm = math.log(m)
    scale = (m * lm) ** (1.0 / (1.0 - q))
    r_c, t_c = box_centers(m, q, A1, b, b_corrected)
    coef = r_c / scale
    return ParameterBox(r_lo=(coef - beta0) * scale, r_hi=(coef + beta0) * scale,
                        t_lo=(1.0 - alpha0) * t_c, t_hi=(1.0 + alpha0) * t_c,
                        m=int(m), q=float(q), b=float(b),
                        alpha0=float(alpha0), beta0=float(beta0))


def evaluate_W(config: BumpConfig, gs: GroundState, point) -> np.ndarray | float:
    """Sum of the 2m bumps at ``point`` (shape (3,) or (..., 3))."""
    p = np.asarray(point, dtype=float)
    total = np.zeros(p.shape[:-1])
    for c in config.points:
        total = total + evaluate_profile(gs, np.linalg.norm(p - c, axis=-1), "u")
    return float(total) if total.ndim == 0 else total


def separations(config: BumpConfig) -> Separations:
    m, r, t = config.m, config.r, config.t
    c2 = 1.0 - t * t
    i = np.arange(m)
    sn = np.sin(i * np.pi / m)
    same = 2.0 * r * math.sqrt(c2) * sn[1:]
    cross = 2.0 * r * np.sqrt(c2 * sn**2 + t * t)
    return Separations(ring_gap=2.0 * r * math.sqrt(c2) * math.sin(math.pi / m),
                       layer_gap=2.0 * r * t,
                       same_ring=tuple(np.sort(same)), cross_ring=tuple(np.sort(cross)))
