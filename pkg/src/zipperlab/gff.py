"""Discrete Gaussian free fields on square-lattice windows.

Normalization: the Dirichlet inner product carries the 1/(2pi) factor, so the
zero-boundary field has covariance 2*pi*(inverse discrete graph Laplacian),
which converges to the continuum half-plane Green's function
G(x,y) = log|x - conj(y)| - log|x - y| under mesh refinement.  Free-boundary
fields use the Neumann graph Laplacian pseudo-inverse and are defined modulo
an additive constant until pinned.

Samplers are exact: dense factorization on small grids, sine/cosine spectral
synthesis on larger rectangles (the lattice eigenbasis, so the two methods
draw from the same law).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.fft
import scipy.linalg

from . import kernels
from .grids import Field, Grid, GridError, TestDensity

TWO_PI = 2.0 * math.pi

DENSE_LIMIT = 64  # max grid side for dense factorization samplers


# ---------------------------------------------------------------------------
# continuum Green's functions


def green_continuum(kind: str, x: complex, y: complex) -> float:
    """Closed-form Green's function values on the half plane / whole plane."""
    x = complex(x)
    y = complex(y)
    if x == y:
        raise ValueError("coincident points")
    if kind == "zero_half_plane":
        if x.imag < 0 or y.imag < 0:
            raise ValueError("points must lie in the closed upper half plane")
        return math.log(abs(x - y.conjugate())) - math.log(abs(x - y))
    if kind == "free_half_plane":
        if x.imag < 0 or y.imag < 0:
            raise ValueError("points must lie in the closed upper half plane")
        return -math.log(abs(x - y.conjugate())) - math.log(abs(x - y))
    if kind == "whole_plane":
        return -math.log(abs(x - y))
    raise ValueError(f"unknown Green's function kind {kind!r}")


# ---------------------------------------------------------------------------
# graph Laplacians and dense Green's functions (oracles and small samplers)


def _interior_mask(grid: Grid) -> np.ndarray:
    m = np.zeros((grid.ny, grid.nx), dtype=bool)
    m[1:-1, 1:-1] = True
    return m


def dirichlet_laplacian(grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """Dense graph Laplacian on interior vertices (zero boundary).

    Returns (L, index_map) with index_map[j, i] the interior row index or -1.
    """
    mask = _interior_mask(grid)
    idx = -np.ones((grid.ny, grid.nx), dtype=np.int64)
    idx[mask] = np.arange(mask.sum())
    n = int(mask.sum())
    L = np.zeros((n, n))
    for j in range(1, grid.ny - 1):
        for i in range(1, grid.nx - 1):
            r = idx[j, i]
            L[r, r] = 4.0
            for dj, di in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                s = idx[j + dj, i + di]
                if s >= 0:
                    L[r, s] = -1.0
    return L, idx


def neumann_laplacian(grid: Grid) -> np.ndarray:
    """Dense graph Laplacian with natural (reflecting) boundary, all vertices."""
    ny, nx = grid.ny, grid.nx
    n = ny * nx
    L = np.zeros((n, n))
    for j in range(ny):
        for i in range(nx):
            r = j * nx + i
            deg = 0
            for dj, di in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                jj, ii = j + dj, i + di
                if 0 <= jj < ny and 0 <= ii < nx:
                    deg += 1
                    L[r, jj * nx + ii] = -1.0
            L[r, r] = deg
    return L


def zero_green_dense(grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """2*pi*(inverse Dirichlet Laplacian): covariance of the zero-boundary DGFF."""
    L, idx = dirichlet_laplacian(grid)
    return TWO_PI * np.linalg.inv(L), idx


def free_green_pseudo_dense(grid: Grid) -> np.ndarray:
    """2*pi*(pseudo-inverse Neumann Laplacian) on all vertices.

    Valid as a covariance only against mean-zero load vectors.
    """
    L = neumann_laplacian(grid)
    return TWO_PI * np.linalg.pinv(L, rcond=1e-10)


# ---------------------------------------------------------------------------
# samplers


def _zero_sample_values(grid: Grid, rng: np.random.Generator, method: str) -> np.ndarray:
    mx, my = grid.nx - 2, grid.ny - 2
    if mx < 1 or my < 1:
        raise GridError("grid too small for a zero-boundary field")
    if method == "auto":
        method = "dense" if max(grid.nx, grid.ny) <= DENSE_LIMIT else "fft"
    vals = np.zeros((grid.ny, grid.nx))
    if method == "dense":
        L, idx = dirichlet_laplacian(grid)
        U = scipy.linalg.cholesky(L, lower=False)
        xi = rng.standard_normal(L.shape[0])
        h = math.sqrt(TWO_PI) * scipy.linalg.solve_triangular(U, xi, lower=False)
        vals[idx >= 0] = h
        return vals
    if method == "fft":
        xi = rng.standard_normal((my, mx))
        ky = 2.0 - 2.0 * np.cos(np.pi * np.arange(1, my + 1) / (my + 1))
        kx = 2.0 - 2.0 * np.cos(np.pi * np.arange(1, mx + 1) / (mx + 1))
        lam = ky[:, None] + kx[None, :]
        coef = xi * np.sqrt(TWO_PI / lam)
        interior = scipy.fft.idstn(coef, type=1, norm="ortho")
        vals[1:-1, 1:-1] = interior
        return vals
    raise ValueError(f"unknown sampling method {method!r}")


def sample_zero_dgff(grid: Grid, seed: int, method: str = "auto") -> Field:
    """Zero-boundary DGFF with covariance 2*pi*(inverse graph Laplacian)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    vals = _zero_sample_values(grid, rng, method)
    return Field(grid, vals, boundary="zero", modulo_constant=False, seed=seed)


def _free_sample_values(grid: Grid, rng: np.random.Generator, method: str) -> np.ndarray:
    nx, ny = grid.nx, grid.ny
    if method == "auto":
        method = "dense" if max(nx, ny) <= DENSE_LIMIT else "fft"
    if method == "fft":
        xi = rng.standard_normal((ny, nx))
        ky = 2.0 - 2.0 * np.cos(np.pi * np.arange(ny) / ny)
        kx = 2.0 - 2.0 * np.cos(np.pi * np.arange(nx) / nx)
        lam = ky[:, None] + kx[None, :]
        lam[0, 0] = 1.0
        coef = xi * np.sqrt(TWO_PI / lam)
        coef[0, 0] = 0.0  # constant mode carries no mass (modulo-constant field)
        return scipy.fft.idctn(coef, type=2, norm="ortho")
    if method == "dense":
        # the Neumann Laplacian is singular, so Cholesky is replaced by an
        # eigendecomposition with the constant mode dropped
        L = neumann_laplacian(grid)
        lam, V = np.linalg.eigh(L)
        xi = rng.standard_normal(L.shape[0] - 1)
        h = V[:, 1:] @ (np.sqrt(TWO_PI / lam[1:]) * xi)
        return h.reshape(ny, nx)
    raise ValueError(f"unknown sampling method {method!r}")


def apply_pinning(field: Field, pinning: tuple) -> Field:
    """Fix the additive constant of a free field by the declared rule."""
    kind = pinning[0]
    if kind == "mean_zero_on_circle":
        r = float(pinning[1])
        c = circle_average(field, 0j, r)
    elif kind == "value_at":
        z = complex(pinning[1])
        c = float(field.interp(z)[0])
        if math.isnan(c):
            raise GridError("pinning vertex outside grid")
    else:
        raise ValueError(f"unknown pinning rule {pinning!r}")
    return field.copy_with(field.values - c, modulo_constant=False, pinning=pinning)


def sample_free_dgff(
    grid: Grid,
    pinning: Optional[tuple] = ("mean_zero_on_circle", 1.0),
    seed: int = 0,
    method: str = "auto",
) -> Field:
    """Free-boundary (Neumann) DGFF, additive constant fixed by the pinning rule.

    pinning=None leaves the field modulo additive constant (values carry the
    zero-spatial-mean representative).
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    vals = _free_sample_values(grid, rng, method)
    f = Field(grid, vals, boundary="free", modulo_constant=True, seed=seed)
    if pinning is None:
        return f
    return apply_pinning(f, pinning)


def sample_mixed_dgff(grid: Grid, seed: int) -> Field:
    """DGFF free on the real-axis edge, zero on the other three edges.

    Dense factorization only; meant for small comparison grids.
    """
    if grid.domain_kind != "half_plane_window":
        raise GridError("mixed boundary requires a half-plane window")
    ny, nx = grid.ny, grid.nx
    mask = np.zeros((ny, nx), dtype=bool)
    mask[0:-1, 1:-1] = True  # bottom row free, top/left/right pinned
    idx = -np.ones((ny, nx), dtype=np.int64)
    idx[mask] = np.arange(mask.sum())
    n = int(mask.sum())
    L = np.zeros((n, n))
    for j in range(ny):
        for i in range(nx):
            r = idx[j, i]
            if r < 0:
                continue
            deg = 0
            for dj, di in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                jj, ii = j + dj, i + di
                if jj < 0:
                    continue  # no neighbor below the free edge
                if 0 <= jj < ny and 0 <= ii < nx:
                    deg += 1
                    s = idx[jj, ii]
                    if s >= 0:
                        L[r, s] = -1.0
            L[r, r] = deg
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    U = scipy.linalg.cholesky(L, lower=False)
    h = math.sqrt(TWO_PI) * scipy.linalg.solve_triangular(
        U, rng.standard_normal(n), lower=False
    )
    vals = np.zeros((ny, nx))
    vals[mask] = h
    return Field(grid, vals, boundary="mixed", modulo_constant=False, seed=seed)


# ---------------------------------------------------------------------------
# circle averages


def spec_n_angular(eps: float, dx: float) -> int:
    return 64 * max(8, int(math.ceil(TWO_PI * eps / dx)))


def circle_average(field: Field, z: complex, eps: float, n_angular: Optional[int] = None):
    """Mean of the field over the circle of radius eps about z.

    On half-plane windows the circle is intersected with the domain; boundary
    points give semicircle means.  Raises when the arc exits the grid window.
    """
    z = complex(z)
    g = field.grid
    if n_angular is None:
        n_angular = spec_n_angular(eps, g.dx)
    out = kernels.circle_averages(
        field.values,
        g.origin.real,
        g.origin.imag,
        g.dx,
        np.array([z.real]),
        np.array([z.imag]),
        np.array([float(eps)]),
        np.array([n_angular], dtype=np.int64),
        g.domain_kind == "half_plane_window",
    )
    v = float(out[0])
    if math.isnan(v):
        raise GridError(f"circle of radius {eps:g} at {z} exits the grid window")
    return v


def circle_average_batch(
    field: Field,
    centers: np.ndarray,
    eps,
    n_angular: Optional[int] = None,
) -> np.ndarray:
    """Vectorized circle averages (NaN entries where the arc leaves the grid)."""
    g = field.grid
    centers = np.atleast_1d(np.asarray(centers, dtype=complex))
    radii = np.broadcast_to(np.asarray(eps, dtype=float), centers.shape).astype(float)
    if n_angular is None:
        na = np.array([spec_n_angular(r, g.dx) for r in radii], dtype=np.int64)
    else:
        na = np.full(centers.shape, int(n_angular), dtype=np.int64)
    return kernels.circle_averages(
        field.values,
        g.origin.real,
        g.origin.imag,
        g.dx,
        centers.real.copy(),
        centers.imag.copy(),
        radii.copy(),
        na,
        g.domain_kind == "half_plane_window",
    )


def circle_average_load(grid: Grid, z: complex, eps: float, n_angular: Optional[int] = None) -> np.ndarray:
    """Vertex load vector of the circle-average functional.

    Spreads the angular quadrature weights through the bilinear interpolation
    stencil, so that load . values == circle_average exactly.  Used by the
    exact discrete covariance oracles.
    """
    z = complex(z)
    if n_angular is None:
        n_angular = spec_n_angular(eps, grid.dx)
    half_plane = grid.domain_kind == "half_plane_window"
    cy = z.imag
    if half_plane and cy < eps:
        a = math.asin(min(max(cy / eps, 0.0), 1.0))
        th = np.linspace(-a, math.pi + a, n_angular)
        w = np.ones(n_angular)
        w[0] = w[-1] = 0.5
    else:
        th = 2.0 * math.pi * np.arange(n_angular) / n_angular
        w = np.ones(n_angular)
    w = w / w.sum()
    px = z.real + eps * np.cos(th)
    py = np.maximum(cy + eps * np.sin(th), 0.0)
    u = (px - grid.origin.real) / grid.dx
    v = (py - grid.origin.imag) / grid.dx
    if (u < 0).any() or (v < 0).any() or (u > grid.nx - 1).any() or (v > grid.ny - 1).any():
        raise GridError("circle exits grid window")
    i0 = np.clip(u.astype(np.int64), 0, grid.nx - 2)
    j0 = np.clip(v.astype(np.int64), 0, grid.ny - 2)
    fu = u - i0
    fv = v - j0
    load = np.zeros((grid.ny, grid.nx))
    np.add.at(load, (j0, i0), w * (1 - fu) * (1 - fv))
    np.add.at(load, (j0, i0 + 1), w * fu * (1 - fv))
    np.add.at(load, (j0 + 1, i0), w * (1 - fu) * fv)
    np.add.at(load, (j0 + 1, i0 + 1), w * fu * fv)
    return load


def free_covariance_of_loads(grid: Grid, load1: np.ndarray, load2: np.ndarray) -> float:
    """Exact Cov((h, load1), (h, load2)) for the free (Neumann) DGFF.

    Spectral form of 2*pi*(pseudo-inverse Laplacian); loads must be mean-zero
    (the constant mode is projected out, which is exact for such loads).
    """
    ny, nx = grid.ny, grid.nx
    c1 = scipy.fft.dctn(load1, type=2, norm="ortho")
    c2 = scipy.fft.dctn(load2, type=2, norm="ortho")
    ky = 2.0 - 2.0 * np.cos(np.pi * np.arange(ny) / ny)
    kx = 2.0 - 2.0 * np.cos(np.pi * np.arange(nx) / nx)
    lam = ky[:, None] + kx[None, :]
    lam[0, 0] = np.inf
    return float(TWO_PI * (c1 * c2 / lam).sum())


def zero_covariance_of_loads(grid: Grid, load1: np.ndarray, load2: np.ndarray) -> float:
    """Exact Cov for the zero-boundary DGFF; loads supported on the interior."""
    my, mx = grid.ny - 2, grid.nx - 2
    c1 = scipy.fft.dstn(load1[1:-1, 1:-1], type=1, norm="ortho")
    c2 = scipy.fft.dstn(load2[1:-1, 1:-1], type=1, norm="ortho")
    ky = 2.0 - 2.0 * np.cos(np.pi * np.arange(1, my + 1) / (my + 1))
    kx = 2.0 - 2.0 * np.cos(np.pi * np.arange(1, mx + 1) / (mx + 1))
    lam = ky[:, None] + kx[None, :]
    return float(TWO_PI * (c1 * c2 / lam).sum())


# ---------------------------------------------------------------------------
# inner products and functionals


def dirichlet_inner(f: Field, g: Field) -> float:
    """(f, g)_grad = (2 pi)^-1 * sum over lattice edges of difference products."""
    if f.grid != g.grid:
        raise GridError("grid mismatch")
    a, b = f.values, g.values
    sx = ((a[:, 1:] - a[:, :-1]) * (b[:, 1:] - b[:, :-1])).sum()
    sy = ((a[1:, :] - a[:-1, :]) * (b[1:, :] - b[:-1, :])).sum()
    return float((sx + sy) / TWO_PI)


def pair_field_density(field: Field, rho: TestDensity) -> float:
    """(h, rho) = sum of weights times bilinearly interpolated field values."""
    if field.boundary == "free" and not rho.is_mean_free() and field.modulo_constant:
        raise ValueError("free field modulo constant paired with non-mean-free density")
    vals = field.interp(rho.points)
    if np.isnan(vals).any():
        raise GridError("density support leaves the grid window")
    return float(vals @ rho.weights)


def laplacian_solve(grid: Grid, rho_values: np.ndarray) -> np.ndarray:
    """-2*pi*(discrete Laplacian)^-1 applied to a vertex density (zero BC).

    The density is interpreted per unit area (multiplied by dx^2 internally),
    so that dirichlet_inner(f, laplacian_solve(rho)) == sum f*rho*dx^2.
    """
    L, idx = dirichlet_laplacian(grid)
    rhs = TWO_PI * rho_values[idx >= 0] * grid.dx**2
    sol = np.linalg.solve(L, rhs)
    out = np.zeros((grid.ny, grid.nx))
    out[idx >= 0] = sol
    return out


# ---------------------------------------------------------------------------
# radial / lateral decomposition


@dataclass
class RadialProfile:
    """Circle averages about the origin on an increasing s = -log(r) grid."""

    s: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if np.any(np.diff(self.s) <= 0):
            raise ValueError("s grid must be strictly increasing")
        if self.s.shape != self.values.shape:
            raise ValueError("shape mismatch")

    def at_s(self, s) -> np.ndarray:
        """Linear interpolation in s, clamped at the ends."""
        return np.interp(s, self.s, self.values)

    def at_radius(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.at_s(-np.log(np.maximum(r, 1e-300)))


def radial_lateral_decompose(
    field: Field,
    r_min: Optional[float] = None,
    r_max: Optional[float] = None,
    n_per_octave: int = 8,
    n_angular: Optional[int] = None,
) -> Tuple[RadialProfile, Field]:
    """Split a free half-plane field into radial profile about 0 plus lateral rest.

    The profile holds semicircle averages on a dyadic log-radius grid refined
    to n_per_octave points per octave; the lateral remainder interpolates the
    profile in s = -log r (clamped outside the sampled annulus) and has
    vanishing circle averages at the sampled radii by construction.
    """
    g = field.grid
    if g.domain_kind != "half_plane_window":
        raise GridError("decomposition needs a half-plane window about 0")
    x0, x1 = g.x_range
    if not (x0 < 0.0 < x1):
        raise GridError("window must contain 0 on its lower edge")
    lim = min(-x0, x1, g.y_range[1])
    if r_max is None:
        r_max = 0.98 * lim
    if r_min is None:
        r_min = 4.0 * g.dx
    if r_max > lim + 1e-12:
        raise GridError("window too small for requested radius range")
    if r_min >= r_max:
        raise GridError("empty radius range")
    n = int(math.floor(n_per_octave * math.log2(r_max / r_min))) + 1
    s = -math.log(r_max) + (math.log(2.0) / n_per_octave) * np.arange(n)
    radii = np.exp(-s)
    X = circle_average_batch(field, np.zeros(n, dtype=complex), radii, n_angular=n_angular)
    if np.isnan(X).any():
        raise GridError("window too small for requested radius range")
    profile = RadialProfile(s, X)
    Xg, Yg = np.meshgrid(g.xs, g.ys)
    R = np.hypot(Xg, Yg)
    radial_vals = profile.at_s(-np.log(np.maximum(R, 1e-300)))
    lateral = field.copy_with(field.values - radial_vals, pinning=None, modulo_constant=False)
    lateral.meta["lateral_of"] = field.seed
    return profile, lateral
