"""Fractional Sobolev norms on periodic grids.

Fourier-multiplier norms use the convention xi_k = 2*pi*k/L for
k in Z^d intersected with [-M/2, M/2)^d, with Parseval normalization
sum |c_k|^2 = ||f||_{L^2}^2, so single-mode data have closed-form norms.
Negative orders exclude the zero mode and require zero mean; a field with
mass at the zero mode gets the distinguished value +inf rather than an
exception.

For 0 < s < 1 the Gagliardo double sum over grid pairs (minimum-image
distance, diagonal skipped) provides an independent evaluation route that
never touches the FFT; it is O(M^{2d}) and meant for small grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fields import Cube, Grid, ScalarField, VectorField

__all__ = [
    "UnsupportedIndexError",
    "SobolevIndex",
    "NormValue",
    "sphere_surface_area",
    "grid_lp_norm",
    "hs_norm",
    "wsp_norm",
    "gagliardo_seminorm",
    "rescaled_norm",
    "interpolation_bound",
    "orthogonality_lower_bound",
]

# mass at the zero mode below this fraction of ||f||_L2 counts as zero mean
ZERO_MEAN_TOL = 1e-10


class UnsupportedIndexError(ValueError):
    """Sobolev index outside the range the operation supports."""


@dataclass(frozen=True)
class SobolevIndex:
    """Order s and integrability p (p = 2 for the Hilbert-scale norms)."""

    s: float
    p: float = 2.0

    def __post_init__(self):
        if not (1.0 < self.p < math.inf):
            raise UnsupportedIndexError(f"integrability must lie in (1, inf), got {self.p}")


@dataclass(frozen=True)
class NormValue:
    """A nonnegative norm value tagged with its index and evaluation method."""

    value: float
    index: SobolevIndex
    method: str  # multiplier | gagliardo

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("norms are nonnegative")


def sphere_surface_area(d: int) -> float:
    """Surface area of the unit (d-1)-sphere: 2*pi^(d/2)/Gamma(d/2)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def _normalized_coefficients(field: ScalarField) -> np.ndarray:
    """Fourier coefficients c_k with sum |c_k|^2 = ||f||_{L^2}^2."""
    g = field.grid
    scale = g.length ** (g.dimension / 2.0) / g.points**g.dimension
    return np.fft.fftn(field.values) * scale


def grid_lp_norm(values: np.ndarray, grid: Grid, p: float) -> float:
    """(h^d * sum |v|^p)^(1/p) on the grid nodes."""
    h = grid.spacing
    return float((h**grid.dimension * np.sum(np.abs(values) ** p)) ** (1.0 / p))


def _zero_mode_mass_ok(c0: complex, l2: float) -> bool:
    return abs(c0) <= ZERO_MEAN_TOL * max(l2, 1e-300)


def hs_norm(field: ScalarField, s: float) -> NormValue:
    """Homogeneous L2-Sobolev norm of order s via the |xi|^s multiplier.

    s = 0 reduces exactly to the L2 norm (zero mode included); s < 0 with
    nonzero mean returns the distinguished value +inf.
    """
    idx = SobolevIndex(s, 2.0)
    c = _normalized_coefficients(field)
    zero = (0,) * field.grid.dimension
    l2 = math.sqrt(float(np.sum(np.abs(c) ** 2)))
    if s == 0.0:
        return NormValue(l2, idx, "multiplier")
    if s < 0 and not _zero_mode_mass_ok(c[zero], l2):
        return NormValue(math.inf, idx, "multiplier")
    xi = field.grid.xi_magnitude()
    mask = xi > 0
    total = float(np.sum(xi[mask] ** (2.0 * s) * np.abs(c[mask]) ** 2))
    return NormValue(math.sqrt(total), idx, "multiplier")


def _multiplier_transform(values: np.ndarray, grid: Grid, s: float) -> np.ndarray:
    """Inverse transform of |xi|^s * fhat, zero mode excluded for s != 0."""
    fhat = np.fft.fftn(values)
    if s == 0.0:
        mult = np.ones(grid.shape)
    else:
        xi = grid.xi_magnitude()
        mult = np.zeros(grid.shape)
        mask = xi > 0
        mult[mask] = xi[mask] ** s
    return np.fft.ifftn(mult * fhat).real


def wsp_norm(field: ScalarField | VectorField, s: float, p: float) -> NormValue:
    """Homogeneous Sobolev norm of order s in L^p via the Fourier multiplier.

    p must lie in (1, inf); p = 2 agrees with hs_norm.  Vector fields take
    the l2 combination of the component norms.
    """
    idx = SobolevIndex(s, p)
    if isinstance(field, VectorField):
        total = 0.0
        for comp in field.components:
            g = _multiplier_transform(comp, field.grid, s)
            total += grid_lp_norm(g, field.grid, p) ** 2
        return NormValue(math.sqrt(total), idx, "multiplier")
    if s < 0:
        c = _normalized_coefficients(field)
        zero = (0,) * field.grid.dimension
        l2 = math.sqrt(float(np.sum(np.abs(c) ** 2)))
        if not _zero_mode_mass_ok(c[zero], l2):
            return NormValue(math.inf, idx, "multiplier")
    g = _multiplier_transform(field.values, field.grid, s)
    return NormValue(grid_lp_norm(g, field.grid, p), idx, "multiplier")


def gagliardo_seminorm(field: ScalarField, s: float, within: Cube | None = None) -> NormValue:
    """Double-sum Gagliardo seminorm over grid pairs, 0 < s < 1.

    Direct summation of |f(x)-f(y)|^2 / dist(x,y)^(d+2s) * h^(2d) over all
    node pairs with minimum-image distance, skipping the diagonal.  With
    ``within`` both points are restricted to that cube, which localizes the
    double integral.  Cost is O(M^{2d}): use small grids.
    """
    if not 0.0 < s < 1.0:
        raise UnsupportedIndexError(f"Gagliardo order must lie in (0, 1), got {s}")
    g = field.grid
    d = g.dimension
    h = g.spacing
    v = field.values
    mask = None
    if within is not None:
        coords = g.coordinates()
        mask = np.ones(g.shape, dtype=bool)
        for i in range(d):
            delta = g.min_image(coords[i] - within.center[i])
            mask &= np.abs(delta) <= within.half + 1e-12
        mask = mask.astype(float)
    exponent = -(d + 2.0 * s)
    total = 0.0
    axes = tuple(range(d))
    for shift in np.ndindex(g.shape):
        if all(c == 0 for c in shift):
            continue
        dist2 = 0.0
        for c in shift:
            dc = min(c, g.points - c) * h
            dist2 += dc * dc
        w = dist2 ** (0.5 * exponent)
        rolled = np.roll(v, shift, axis=axes)
        diff2 = (v - rolled) ** 2
        if mask is not None:
            diff2 = diff2 * mask * np.roll(mask, shift, axis=axes)
        total += w * float(diff2.sum())
    value = math.sqrt(total * h ** (2 * d))
    return NormValue(value, SobolevIndex(s, 2.0), "gagliardo")


def rescaled_norm(base: NormValue, lam: float, d: int) -> NormValue:
    """Norm of x -> f(x/lam) from the norm of f: multiply by lam^(d/p - s)."""
    if not lam > 0:
        raise ValueError(f"rescaling factor must be positive, got {lam}")
    factor = lam ** (d / base.index.p - base.index.s)
    return NormValue(base.value * factor, base.index, base.method)


def interpolation_bound(n1: NormValue, n2: NormValue, s: float) -> float:
    """Convexity bound ||f||_s <= ||f||_{s1}^theta * ||f||_{s2}^(1-theta).

    theta solves s = theta*s1 + (1-theta)*s2 and s must lie strictly
    between the two input orders.
    """
    s1, s2 = n1.index.s, n2.index.s
    if not s1 < s < s2:
        raise ValueError(f"order {s} must lie strictly between {s1} and {s2}")
    theta = (s2 - s) / (s2 - s1)
    return n1.value**theta * n2.value ** (1.0 - theta)


def orthogonality_lower_bound(
    pieces: Sequence[tuple[float, float, float]], s: float, d: int
) -> float:
    """Lower bound for || sum f_n ||_{H^s}^2 over disjointly supported pieces.

    Each piece supplies (hs_sq, l2_sq, lam): its squared order-s norm, its
    squared L2 norm, and the distance lam from its support to the
    complement of its private region.  The bound is

        sum_n [ hs_sq_n - (C_d / s) * lam_n^(-2s) * l2_sq_n ],

    with C_d the surface area of the unit (d-1)-sphere; terms may be
    negative and the empty sum is 0.
    """
    if not 0.0 < s < 1.0:
        raise UnsupportedIndexError(f"order must lie in (0, 1), got {s}")
    c_d = sphere_surface_area(d)
    total = 0.0
    for hs_sq, l2_sq, lam in pieces:
        if not lam > 0:
            raise ValueError(f"separation must be positive, got {lam}")
        total += hs_sq - (c_d / s) * lam ** (-2.0 * s) * l2_sq
    return total
