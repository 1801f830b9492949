"""Grid evaluation of the Newtonian potential, energy and residual.

Fields live on uniform Cartesian grids and are taken to vanish outside
the box.  The Newtonian potential Ψ_u = (1/8π)∫u²(y)/|x-y|dy is a
free-space convolution done with zero padding (Hockney's method).  The
kinetic term uses forward differences on cell faces, which makes it the
exact discrete adjoint of the 7-point Laplacian used in the residual.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import fft

# ∫ over the unit cube centered at 0 of 1/|x|
CUBE_INV_R = 3.0 * math.log(2.0 + math.sqrt(3.0)) - 0.5 * math.pi
DECAY_TOL = 1e-10


class FieldError(ValueError):
    pass


@dataclass(frozen=True)
class VParams:
    """External potential V(x) = V1 + b/|x|^q + perturbation(|x|)."""

    b: float = 1.0
    q: float = 0.5
    V1: float = 1.0
    perturbation: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not 0.5 <= self.q < 1:
            raise ValueError("q must lie in [1/2, 1)")
        if self.b < 0 or not self.V1 > 0:
            raise ValueError("need b >= 0 and V1 > 0")

    def V(self, radius):
        """V at ``radius``; zero radius is singular for the literal law."""
        r = np.asarray(radius, dtype=float)
        if self.b != 0 and np.any(r <= 0):
            raise FieldError("V is singular at radius 0; regularize the evaluation point")
        with np.errstate(divide="ignore"):
            val = self.V1 + (self.b * r ** -self.q if self.b != 0 else 0.0)
        if self.perturbation is not None:
            val = val + self.perturbation(r)
        return float(val) if np.ndim(val) == 0 else val


def potential_V(radius, b: float = 1.0, q: float = 0.5, V1: float = 1.0):
    return VParams(b=b, q=q, V1=V1).V(radius)


UNIT_V = VParams(b=0.0, q=0.5, V1=1.0)


@dataclass(frozen=True, eq=False)
class SampledField:
    """Node values on origin + spacing·(i, j, k)."""

    origin: tuple[float, float, float]
    spacing: float
    dims: tuple[int, int, int]
    values: np.ndarray

    def __post_init__(self):
        if not self.spacing > 0:
            raise FieldError("spacing must be positive")
        dims = tuple(int(n) for n in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise FieldError("dims must be three positive integers")
        vals = np.asarray(self.values, dtype=float)
        if vals.size != math.prod(dims):
            raise FieldError("value count does not match dims")
        vals = vals.reshape(dims)
        if not np.all(np.isfinite(vals)):
            raise FieldError("non-finite field values")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        object.__setattr__(self, "values", vals)

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(o + self.spacing * np.arange(n) for o, n in zip(self.origin, self.dims))

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def radius(self) -> np.ndarray:
        x, y, z = self.axes()
        return np.sqrt(x[:, None, None] ** 2 + y[None, :, None] ** 2 + z[None, None, :] ** 2)

    def with_values(self, values: np.ndarray) -> "SampledField":
        return SampledField(self.origin, self.spacing, self.dims, values)

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @classmethod
    def from_function(cls, fn: Callable, origin, spacing: float, dims) -> "SampledField":
        f = cls(origin, spacing, dims, np.zeros(dims))
        x, y, z = f.axes()
        pts = np.stack(np.meshgrid(x, y, z, indexing="ij"), axis=-1)
        return f.with_values(fn(pts))

    @classmethod
    def centered(cls, half_widths, spacing: float) -> "SampledField":
        """Zero field on a grid symmetric about the origin with no node at 0.

        Node counts are even in every direction, so nodes sit at
        ±(k + 1/2)·spacing.
        """
        dims = tuple(2 * int(math.ceil(hw / spacing - 0.5)) + 2 for hw in half_widths)
        origin = tuple(-0.5 * (n - 1) * spacing for n in dims)
        return cls(origin, spacing, dims, np.zeros(dims))


@dataclass(frozen=True)
class EnergyBreakdown:
    I1: float
    I2: float
    I3: float
    total: float

    @classmethod
    def from_terms(cls, I1: float, I2: float, I3: float) -> "EnergyBreakdown":
        return cls(float(I1), float(I2), float(I3), float(I1) + float(I2) - float(I3))


# --------------------------------------------------------------------------
# convolution


@lru_cache(maxsize=4)
def _kernel_hat(dims: tuple[int, int, int], spacing: float):
    """Real FFT of the padded 1/(4π|x|) kernel for a box of ``dims`` nodes."""
    padded = tuple(fft.next_fast_len(2 * n - 1, real=True) for n in dims)
    axes = []
    for n, p in zip(dims, padded):
        k = np.arange(p)
        k = np.where(k < p - k, k, k - p).astype(float)
        axes.append(k * spacing)
    r = np.sqrt(axes[0][:, None, None] ** 2 + axes[1][None, :, None] ** 2
                + axes[2][None, None, :] ** 2)
    with np.errstate(divide="ignore"):
        g = 1.0 / (4.0 * math.pi * r)
    g[0, 0, 0] = CUBE_INV_R / (4.0 * math.pi * spacing)
    g *= spacing**3
    return padded, fft.rfftn(g, workers=-1)


def coulomb(density: np.ndarray, spacing: float) -> np.ndarray:
    """∫ρ(y)/(4π|x-y|)dy on the nodes of ``density`` (free space)."""
    dims = tuple(density.shape)
    padded, khat = _kernel_hat(dims, float(spacing))
    rho_hat = fft.rfftn(density, s=padded, workers=-1)
    out = fft.irfftn(rho_hat * khat, s=padded, workers=-1)
    return np.ascontiguousarray(out[: dims[0], : dims[1], : dims[2]])


def boundary_max(values: np.ndarray) -> float:
    v = np.abs(values)
    return float(max(v[0].max(), v[-1].max(), v[:, 0].max(), v[:, -1].max(),
                     v[:, :, 0].max(), v[:, :, -1].max()))


def check_decay(field: SampledField, tol: float = DECAY_TOL) -> None:
    top = float(np.max(np.abs(field.values)))
    if top == 0:
        return
    edge = boundary_max(field.values)
    if edge > tol * top:
        raise FieldError(f"field not decayed at the boundary: {edge / top:.3g} of max > {tol:.1g}")


def newtonian_potential(field: SampledField, decay_tol: float = DECAY_TOL) -> SampledField:
    """Ψ = (1/8π)∫field²(y)/|x-y|dy on the field's grid."""
    check_decay(field, decay_tol)
    return field.with_values(0.5 * coulomb(field.values**2, field.spacing))


# --------------------------------------------------------------------------
# stencils


def laplacian(values: np.ndarray, spacing: float) -> np.ndarray:
    """7-point Laplacian with zero values outside the box."""
    u = values
    lap = -6.0 * u
    lap[1:] += u[:-1]
    lap[:-1] += u[1:]
    lap[:, 1:] += u[:, :-1]
    lap[:, :-1] += u[:, 1:]
    lap[:, :, 1:] += u[:, :, :-1]
    lap[:, :, :-1] += u[:, :, 1:]
    return lap / spacing**2


def gradient_form(v: np.ndarray, w: np.ndarray, spacing: float) -> float:
    """Σ over faces of D⁺v·D⁺w times the cell volume, zero extension outside."""
    total = 0.0
    for ax in range(3):
        pad = [(0, 0)] * 3
        pad[ax] = (1, 1)
        dv = np.diff(np.pad(v, pad), axis=ax)
        dw = dv if w is v else np.diff(np.pad(w, pad), axis=ax)
        total += float(np.sum(dv * dw))
    return total * spacing


def node_radius(field: SampledField) -> np.ndarray:
    """Distance of each node from the origin; a node exactly at 0 gets h/2."""
    r = field.radius()
    return np.where(r > 0, r, 0.5 * field.spacing)


def energy_total(field: SampledField, vp: VParams = UNIT_V,
                 decay_tol: float = DECAY_TOL) -> EnergyBreakdown:
    """I(u) = ½∫(|∇u|² + Vu²) - (1/32π)∫∫u²u²/|x-y|, split as I1 + I2 - I3."""
    u = field.values
    h = field.spacing
    if not np.any(u):
        return EnergyBreakdown.from_terms(0.0, 0.0, 0.0)
    psi = newtonian_potential(field, decay_tol).values
    dv = field.cell_volume
    I1 = 0.5 * gradient_form(u, u, h) + 0.5 * float(np.sum(u * u)) * dv
    I2 = 0.5 * float(np.sum((vp.V(node_radius(field)) - 1.0) * u * u)) * dv
    I3 = 0.25 * float(np.sum(psi * u * u)) * dv
    return EnergyBreakdown.from_terms(I1, I2, I3)


def interior(values: np.ndarray) -> np.ndarray:
    return values[1:-1, 1:-1, 1:-1]


def pde_residual(field: SampledField, vp: VParams = UNIT_V,
                 decay_tol: float = DECAY_TOL) -> tuple[SampledField, tuple[float, float]]:
    """-Δu + Vu - Ψ_u u with its interior (L², max) norms."""
    u = field.values
    if not np.any(u):
        return field.with_values(np.zeros(field.dims)), (0.0, 0.0)
    psi = newtonian_potential(field, decay_tol).values
    res = -laplacian(u, field.spacing) + vp.V(node_radius(field)) * u - psi * u
    inner = interior(res)
    l2 = math.sqrt(float(np.sum(inner**2)) * field.cell_volume)
    return field.with_values(res), (l2, float(np.max(np.abs(inner))))


def dump_csv(field: SampledField, path: str | os.PathLike) -> None:
    """Flat x,y,z,value dump for debugging."""
    x, y, z = field.coordinates()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z", "value"])
        for row in zip(x.ravel(), y.ravel(), z.ravel(), field.values.ravel()):
            w.writerow([f"{v:.17g}" for v in row])
