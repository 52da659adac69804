"""Periodic grids, compactly supported scalar data, and cube geometry.

All sampled objects live on a uniform grid over the fundamental cell
[0, L)^d with periodic identification of opposite faces.  Supports are kept
strictly interior to the cell so that spectral quantities of the sampled
data coincide with their whole-space values, up to periodic-image terms
that the test-suite quantifies empirically.

Grid sizes are powers of two for FFT efficiency.  Distances and
containment tests use the minimum-image convention throughout.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GeometryError",
    "Grid",
    "Box",
    "Cube",
    "ScalarField",
    "VectorField",
    "smooth_bridge",
    "radial_cutoff",
    "make_bump",
    "demean",
    "cube_distance_to_complement",
    "extend_to_dimension",
    "save_field",
    "load_field",
    "field_to_csv",
]

SUPPORT_TOL = 1e-12
DIVERGENCE_TOL = 1e-10


class GeometryError(ValueError):
    """Invalid geometric configuration (radii, containment, dimensions)."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [0, length)^dimension with points^dimension nodes."""

    dimension: int
    points: int
    length: float = 1.0

    def __post_init__(self):
        if self.dimension < 1:
            raise GeometryError(f"dimension must be >= 1, got {self.dimension}")
        if self.points < 4 or self.points & (self.points - 1):
            raise GeometryError(f"points per side must be a power of two >= 4, got {self.points}")
        if not self.length > 0:
            raise GeometryError(f"side length must be positive, got {self.length}")

    @property
    def spacing(self) -> float:
        return self.length / self.points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dimension

    def axis(self) -> np.ndarray:
        """Node coordinates along one axis: 0, h, ..., L-h."""
        return np.arange(self.points) * self.spacing

    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape (dimension, points, ..., points)."""
        axes = np.meshgrid(*([self.axis()] * self.dimension), indexing="ij")
        return np.stack(axes)

    def wavenumbers(self) -> np.ndarray:
        """Integer frequencies per axis (fftfreq layout), shape (dimension, ...)."""
        k1 = np.fft.fftfreq(self.points, d=1.0 / self.points)
        axes = np.meshgrid(*([k1] * self.dimension), indexing="ij")
        return np.stack(axes)

    def xi_magnitude(self) -> np.ndarray:
        """|xi| with xi_k = 2*pi*k/L on the fftfreq layout."""
        k = self.wavenumbers()
        return (2.0 * math.pi / self.length) * np.sqrt(np.sum(k * k, axis=0))

    def min_image(self, delta: np.ndarray) -> np.ndarray:
        """Wrap coordinate differences into [-L/2, L/2)."""
        half = 0.5 * self.length
        return np.mod(delta + half, self.length) - half


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by center and per-axis half-widths (periodic)."""

    center: tuple[float, ...]
    half_widths: tuple[float, ...]

    def __post_init__(self):
        if len(self.center) != len(self.half_widths):
            raise GeometryError("center and half_widths must have equal length")
        if any(h < 0 for h in self.half_widths):
            raise GeometryError("half widths must be nonnegative")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "half_widths", tuple(float(h) for h in self.half_widths))

    @classmethod
    def whole(cls, grid: Grid) -> "Box":
        c = (0.5 * grid.length,) * grid.dimension
        return cls(c, (0.5 * grid.length,) * grid.dimension)

    def covers_cell(self, grid: Grid) -> bool:
        return all(h >= 0.5 * grid.length - 1e-15 for h in self.half_widths)

    def contains(self, points: np.ndarray, grid: Grid, slack: float = 1e-12) -> np.ndarray:
        """Boolean mask of points inside the box, minimum-image metric."""
        inside = np.ones(points.shape[1:], dtype=bool)
        for i, (c, h) in enumerate(zip(self.center, self.half_widths)):
            d = grid.min_image(points[i] - c)
            inside &= np.abs(d) <= h + slack
        return inside


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube in R^d (plain coordinates, no periodic wrap)."""

    center: tuple[float, ...]
    side: float

    def __post_init__(self):
        if not self.side > 0:
            raise GeometryError(f"cube side must be positive, got {self.side}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "side", float(self.side))

    @property
    def half(self) -> float:
        return 0.5 * self.side

    def distance_to(self, other: "Cube") -> float:
        """Euclidean gap between the two closed cubes (0 if they touch)."""
        gap2 = 0.0
        for a, b in zip(self.center, other.center):
            g = abs(a - b) - self.half - other.half
            if g > 0:
                gap2 += g * g
        return math.sqrt(gap2)


def _readonly(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Samples of a real function on a periodic grid with support metadata.

    Values are copied and frozen; the grid mean is recorded at construction.
    Construction verifies that samples vanish outside the declared support
    box (absolute tolerance 1e-12).
    """

    grid: Grid
    values: np.ndarray
    support: Box
    mean: float = field(init=False)

    def __post_init__(self):
        vals = _readonly(self.values)
        if vals.shape != self.grid.shape:
            raise GeometryError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "mean", float(vals.mean()))
        if not self.support.covers_cell(self.grid):
            outside = ~self.support.contains(self.grid.coordinates(), self.grid)
            worst = np.abs(vals[outside]).max() if outside.any() else 0.0
            if worst >= SUPPORT_TOL:
                raise GeometryError(
                    f"values reach {worst:.3e} outside the declared support box"
                )

    def shifted(self, offsets: tuple[int, ...]) -> "ScalarField":
        """Field translated by whole grid cells (periodic roll)."""
        vals = np.roll(self.values, offsets, axis=tuple(range(self.grid.dimension)))
        shift = tuple(o * self.grid.spacing for o in offsets)
        c = tuple(
            (ci + si) % self.grid.length for ci, si in zip(self.support.center, shift)
        )
        return ScalarField(self.grid, vals, Box(c, self.support.half_widths))


@dataclass(frozen=True, eq=False)
class VectorField:
    """d component arrays on a shared grid; divergence checked spectrally."""

    grid: Grid
    components: tuple[np.ndarray, ...]
    divergence_free: bool = False

    def __post_init__(self):
        if len(self.components) != self.grid.dimension:
            raise GeometryError("one component per dimension required")
        comps = tuple(_readonly(c) for c in self.components)
        for c in comps:
            if c.shape != self.grid.shape:
                raise GeometryError("component shape does not match grid")
        object.__setattr__(self, "components", comps)
        if self.divergence_free:
            rel = self.spectral_divergence()
            if rel >= DIVERGENCE_TOL:
                raise GeometryError(f"relative spectral divergence {rel:.3e} exceeds tolerance")

    def spectral_divergence(self) -> float:
        """L2 magnitude of the spectral divergence relative to |xi|_max * ||u||_L2."""
        k = self.grid.wavenumbers()
        div_hat = np.zeros(self.grid.shape, dtype=complex)
        energy = 0.0
        for i, comp in enumerate(self.components):
            chat = np.fft.fftn(comp)
            div_hat += 1j * (2.0 * math.pi / self.grid.length) * k[i] * chat
            energy += float(np.sum(np.abs(chat) ** 2))
        if energy == 0.0:
            return 0.0
        scale = math.sqrt(energy) * float(self.grid.xi_magnitude().max())
        return math.sqrt(float(np.sum(np.abs(div_hat) ** 2))) / scale


def smooth_bridge(t: np.ndarray | float) -> np.ndarray | float:
    """C-infinity monotone bridge: 0 for t <= 0, 1 for t >= 1."""
    t_arr = np.asarray(t, dtype=float)
    g = np.zeros_like(t_arr)
    np.exp(np.divide(-1.0, t_arr, out=np.full_like(t_arr, -np.inf), where=t_arr > 0), out=g)
    gm = np.zeros_like(t_arr)
    om = 1.0 - t_arr
    np.exp(np.divide(-1.0, om, out=np.full_like(t_arr, -np.inf), where=om > 0), out=gm)
    with np.errstate(invalid="ignore"):
        out = g / (g + gm)
    out = np.where(t_arr <= 0.0, 0.0, out)
    out = np.where(t_arr >= 1.0, 1.0, out)
    return out if out.shape else float(out)


def radial_cutoff(r: np.ndarray, inner: float, outer: float) -> np.ndarray:
    """Smooth cutoff of radius: 1 for r <= inner, 0 for r >= outer."""
    return smooth_bridge((outer - np.asarray(r, dtype=float)) / (outer - inner))


def make_bump(grid: Grid, center: tuple[float, ...], radius: float, amplitude: float) -> ScalarField:
    """Standard mollifier bump sampled exactly at the grid nodes.

    Profile amplitude * exp(1 - 1/(1 - |x-center|^2/radius^2)) inside the
    ball of the given radius, zero outside, so the value at the center is
    exactly the amplitude.
    """
    if len(center) != grid.dimension:
        raise GeometryError("center dimension does not match grid")
    if not 0 < radius < 0.5 * grid.length:
        raise GeometryError(f"radius must lie in (0, L/2), got {radius}")
    coords = grid.coordinates()
    r2 = np.zeros(grid.shape)
    for i, c in enumerate(center):
        d = grid.min_image(coords[i] - c)
        r2 += d * d
    t = r2 / (radius * radius)
    vals = np.zeros(grid.shape)
    inside = t < 1.0
    vals[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - t[inside]))
    support = Box(tuple(c % grid.length for c in center), (radius,) * grid.dimension)
    return ScalarField(grid, vals, support)


def cube_distance_to_complement(support: Cube, container: Cube) -> float:
    """Distance from the support cube to the complement of the container.

    For concentric cubes with sides a <= b this is (b - a)/2.
    """
    if len(support.center) != len(container.center):
        raise GeometryError("cube dimensions differ")
    margins = []
    for cs, cc in zip(support.center, container.center):
        m = container.half - support.half - abs(cs - cc)
        if m < -1e-15:
            raise GeometryError("support cube is not contained in the container")
        margins.append(max(m, 0.0))
    return min(margins)


def extend_to_dimension(
    field2d: ScalarField, cutoff_inner: float, cutoff_outer: float, d: int
) -> ScalarField:
    """Tensor the planar field with a smooth radial cutoff in the extra axes.

    The result equals the planar field times eta(x_3, ..., x_d) where eta is
    1 on the ball of radius cutoff_inner around 0 and supported in the ball
    of radius cutoff_outer.  The extra coordinates are centered at 0 (the
    periodic cell wraps the ball around the origin).
    """
    if d < 3:
        raise GeometryError(f"target dimension must be >= 3, got {d}")
    if field2d.grid.dimension != 2:
        raise GeometryError("input field must be planar")
    if not (0 < cutoff_inner < cutoff_outer <= 0.5 * field2d.grid.length):
        raise GeometryError("cutoff radii must satisfy 0 < inner < outer <= L/2")
    grid = Grid(d, field2d.grid.points, field2d.grid.length)
    coords_extra = np.meshgrid(*([grid.axis()] * (d - 2)), indexing="ij")
    r2 = np.zeros_like(coords_extra[0])
    for x in coords_extra:
        dx = grid.min_image(x - 0.0)
        r2 += dx * dx
    eta = radial_cutoff(np.sqrt(r2), cutoff_inner, cutoff_outer)
    planar = field2d.values
    vals = planar.reshape(planar.shape + (1,) * (d - 2)) * eta.reshape((1, 1) + eta.shape)
    center = field2d.support.center + (0.0,) * (d - 2)
    halves = field2d.support.half_widths + (cutoff_outer,) * (d - 2)
    return ScalarField(grid, vals, Box(center, halves))


def demean(field_: ScalarField) -> ScalarField:
    """Subtract the grid mean (support widens to the whole cell)."""
    return ScalarField(field_.grid, field_.values - field_.mean, Box.whole(field_.grid))


_HEADER = struct.Struct("<qqd")


def save_field(field_: ScalarField, path) -> None:
    """Flat binary container: header (d, M, L, support box) then row-major values."""
    g = field_.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(g.dimension, g.points, g.length))
        fh.write(np.asarray(field_.support.center, dtype="<f8").tobytes())
        fh.write(np.asarray(field_.support.half_widths, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(field_.values, dtype="<f8").tobytes())


def load_field(path) -> ScalarField:
    with open(path, "rb") as fh:
        d, m, length = _HEADER.unpack(fh.read(_HEADER.size))
        center = np.frombuffer(fh.read(8 * d), dtype="<f8")
        halves = np.frombuffer(fh.read(8 * d), dtype="<f8")
        grid = Grid(d, m, length)
        count = m**d
        vals = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(grid.shape)
    return ScalarField(grid, vals, Box(tuple(center), tuple(halves)))


def field_to_csv(field_: ScalarField, path) -> None:
    """CSV rows (index tuple, value); intended for small grids."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"i{k}" for k in range(field_.grid.dimension)] + ["value"])
        for idx in np.ndindex(field_.grid.shape):
            writer.writerow(list(idx) + [format(field_.values[idx], ".17g")])
