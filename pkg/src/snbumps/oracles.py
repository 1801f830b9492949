"""Independent reference computations for cross-checking the main solvers."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_bvp
from scipy.special import erf


def relaxation_ground_state(R: float = 40.0, nodes: int = 4001, tol: float = 1e-9):
    """Collocation solve of the E = 1 radial problem in v = log U.

    v'' + v'² + (2/s)v' - 1 + Ψ = 0,  Ψ'' + (2/s)Ψ' = -e^{2v}/2,
    regular at s = 0, WKB-matched decay and a harmonic Ψ at s = R.
    Returns (s, U, Ψ).
    """
    s = np.linspace(0.0, R, nodes)
    S = np.diag([0.0, -2.0, 0.0, -2.0])

    def f(x, y):
        v, vp, p, pp = y
        return np.vstack([vp, -vp**2 + 1.0 - p, pp, -0.5 * np.exp(2 * v)])

    def bc(ya, yb):
        q = 1.0 - yb[2]
        dq = yb[2] / R
        wlog = -math.sqrt(q) - dq / (4 * q) if q > 0 else -1.0
        return np.array([ya[1], ya[3], yb[1] - (wlog - 1.0 / R), yb[3] + yb[2] / R])

    v0 = math.log(1.4) - s + np.log1p(s)
    guess = np.vstack([v0, -s / (1 + s), 3.5 / np.sqrt(s**2 + 3.3),
                       -3.5 * s / (s**2 + 3.3) ** 1.5])
    sol = solve_bvp(f, bc, s, guess, S=S, tol=tol, max_nodes=200000)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol


def double_quadrature_A2(s: np.ndarray, u: np.ndarray) -> float:
    """∫∫U²(x)U²(y)/|x-y| by the shell theorem, as a 2D radial sum.

    With shell masses μ_i = 4πs_i²U_i²w_i the double sum Σ_ij μ_iμ_j/max(s_i, s_j)
    is accumulated in O(n) with a running prefix sum.  ``s`` must be uniform
    with an odd node count (Simpson weights).
    """
    if s.size % 2 == 0:
        raise ValueError("Simpson weights need an odd node count")
    w = np.full_like(s, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    w *= (s[1] - s[0]) / 3.0
    mu = 4 * math.pi * s**2 * u**2 * w
    below = np.concatenate([[0.0], np.cumsum(mu)[:-1]])
    pos = s > 0
    return float(np.sum(mu[pos] * (2.0 * below[pos] + mu[pos]) / s[pos]))


def gaussian_potential(radius, mass: float, sigma: float):
    """(1/8π)∫f²(y)/|x-y|dy when f² is a normalized Gaussian of total mass M and width σ."""
    r = np.asarray(radius, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(r > 0, mass * erf(r / (math.sqrt(2.0) * sigma)) / (8 * math.pi * np.where(r > 0, r, 1.0)),
                       mass / (8 * math.pi) * math.sqrt(2.0 / math.pi) / sigma)
    return float(val) if np.ndim(val) == 0 else val
