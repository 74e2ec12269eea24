"""Rectangular lattice scaffolding: grids, fields, test densities.

A grid is a uniform square mesh of vertices ``z = origin + i*dx + 1j*j*dx``
(column i, row j).  ``half_plane_window`` grids keep their lower edge on the
real axis and stand in for the upper half plane; all window effects are the
caller's responsibility (experiments report window-doubling sensitivity).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional, Tuple

import numpy as np

from . import kernels


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    dx: float
    origin: complex = 0j
    domain_kind: str = "half_plane_window"

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise GridError("grid too small: need nx, ny >= 2")
        if not (self.dx > 0):
            raise GridError("dx must be positive")
        if self.domain_kind not in ("half_plane_window", "rectangle"):
            raise GridError(f"unknown domain_kind {self.domain_kind!r}")
        if self.domain_kind == "half_plane_window" and abs(self.origin.imag) > 1e-12 * self.dx:
            raise GridError("half_plane_window grids must have their lower edge on the real axis")

    @classmethod
    def half_plane(cls, half_width: float, height: float, dx: float) -> "Grid":
        """Symmetric window [-half_width, half_width] x [0, height], origin vertex at 0."""
        m = int(round(half_width / dx))
        ny = int(round(height / dx)) + 1
        return cls(nx=2 * m + 1, ny=ny, dx=dx, origin=complex(-m * dx, 0.0))

    @property
    def xs(self) -> np.ndarray:
        return self.origin.real + self.dx * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.origin.imag + self.dx * np.arange(self.ny)

    @property
    def x_range(self) -> Tuple[float, float]:
        return self.origin.real, self.origin.real + (self.nx - 1) * self.dx

    @property
    def y_range(self) -> Tuple[float, float]:
        return self.origin.imag, self.origin.imag + (self.ny - 1) * self.dx

    def contains(self, z: np.ndarray, margin: float = 0.0) -> np.ndarray:
        x0, x1 = self.x_range
        y0, y1 = self.y_range
        z = np.asarray(z, dtype=complex)
        return (
            (z.real >= x0 + margin)
            & (z.real <= x1 - margin)
            & (z.imag >= y0 + margin)
            & (z.imag <= y1 - margin)
        )

    def vertex_index(self, z: complex) -> Tuple[int, int]:
        """(j, i) row/column of the nearest vertex; raises if off-grid."""
        i = int(round((z.real - self.origin.real) / self.dx))
        j = int(round((z.imag - self.origin.imag) / self.dx))
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise GridError(f"point {z} outside grid window")
        return j, i


BOUNDARY_KINDS = ("zero", "free", "mixed")


@dataclass
class Field:
    """Scalar field sampled on grid vertices.

    ``values`` has shape (ny, nx).  Zero-boundary fields vanish on the window
    edge; free fields are defined modulo an additive constant until a pinning
    rule is applied (then ``modulo_constant`` is False and ``pinning`` records
    the rule).  ``mixed`` means free on the real-axis edge, zero elsewhere.
    """

    grid: Grid
    values: np.ndarray
    boundary: str = "free"
    modulo_constant: bool = False
    pinning: Optional[tuple] = None
    seed: Optional[int] = None
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.ny, self.grid.nx):
            raise GridError("values shape does not match grid")
        if self.boundary not in BOUNDARY_KINDS:
            raise GridError(f"unknown boundary kind {self.boundary!r}")

    def copy_with(self, values: np.ndarray, **kw) -> "Field":
        d = dict(
            grid=self.grid,
            values=values,
            boundary=self.boundary,
            modulo_constant=self.modulo_constant,
            pinning=self.pinning,
            seed=self.seed,
            meta=dict(self.meta),
        )
        d.update(kw)
        return Field(**d)

    def interp(self, z) -> np.ndarray:
        """Bilinear interpolation at complex points (NaN outside the window)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        g = self.grid
        out = kernels.bilinear_gather(
            self.values, g.origin.real, g.origin.imag, g.dx, z.real.copy(), z.imag.copy()
        )
        return out

    def __add__(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise GridError("grid mismatch")
            return self.copy_with(self.values + other.values)
        return self.copy_with(self.values + float(other))

    def __sub__(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise GridError("grid mismatch")
            return self.copy_with(self.values - other.values)
        return self.copy_with(self.values - float(other))


def constant_field(grid: Grid, c: float, boundary: str = "free") -> Field:
    return Field(grid, np.full((grid.ny, grid.nx), float(c)), boundary=boundary)


def function_field(grid: Grid, fn, boundary: str = "free") -> Field:
    """Field from a callable fn(x, y) evaluated on the vertex mesh."""
    X, Y = np.meshgrid(grid.xs, grid.ys)
    return Field(grid, np.asarray(fn(X, Y), dtype=float), boundary=boundary)


@dataclass
class TestDensity:
    """Signed measure with finite atom support, used for (h, rho) functionals.

    Atoms stand in for a smooth density; point-mass-like usage is guarded by
    the minimum-separation rule (4*dx) enforced where a grid is in play.
    """

    points: np.ndarray  # complex atoms
    weights: np.ndarray  # real weights (measure of each atom)

    def __post_init__(self):
        self.points = np.atleast_1d(np.asarray(self.points, dtype=complex))
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if self.points.shape != self.weights.shape:
            raise ValueError("points and weights must have the same length")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")
        if not np.all(np.isfinite(self.points.real) & np.isfinite(self.points.imag)):
            raise ValueError("points must be finite")

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def is_mean_free(self, tol: float = 1e-10) -> bool:
        scale = np.abs(self.weights).sum() or 1.0
        return abs(self.total_mass) <= tol * scale

    def min_separation(self) -> float:
        p = self.points
        if len(p) < 2:
            return np.inf
        d = np.abs(p[:, None] - p[None, :])
        np.fill_diagonal(d, np.inf)
        return float(d.min())

    def require_separation(self, dx: float) -> None:
        if self.min_separation() < 4.0 * dx - 1e-12:
            raise ValueError(
                f"test density atoms closer than 4*dx = {4 * dx:g}; "
                "use a coarser atom sublattice"
            )


def disc_density(center: complex, radius: float, spacing: float, mass: float = 1.0) -> TestDensity:
    """Uniform small-disc density realized as atoms on a square sublattice."""
    n = max(1, int(np.floor(radius / spacing)))
    ax = spacing * np.arange(-n, n + 1)
    X, Y = np.meshgrid(ax, ax)
    keep = X**2 + Y**2 <= radius**2 + 1e-15
    pts = center + (X[keep] + 1j * Y[keep])
    w = np.full(pts.shape, mass / keep.sum())
    return TestDensity(pts, w)


def gaussian_bump_difference(
    c_plus: complex,
    c_minus: complex,
    sigma: float,
    spacing: float,
    cutoff: float = 2.5,
) -> TestDensity:
    """Mean-zero density: gaussian bump at c_plus minus one at c_minus.

    Each bump carries unit mass; atoms on a square sublattice of the given
    spacing, truncated at cutoff*sigma.
    """
    n = max(1, int(np.floor(cutoff * sigma / spacing)))
    ax = spacing * np.arange(-n, n + 1)
    X, Y = np.meshgrid(ax, ax)
    R2 = X**2 + Y**2
    keep = R2 <= (cutoff * sigma) ** 2 + 1e-15
    w0 = np.exp(-R2[keep] / (2 * sigma**2))
    w0 = w0 / w0.sum()
    pts = np.concatenate([c_plus + (X[keep] + 1j * Y[keep]), c_minus + (X[keep] + 1j * Y[keep])])
    w = np.concatenate([w0, -w0])
    return TestDensity(pts, w)
