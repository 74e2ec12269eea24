"""Forward and reverse Loewner flows, SLE driving samplers, welding.

The flows compose exact vertical-slit elementary maps over piecewise-constant
driving (capacity and conformality are exact per step).  Forward steps shift
after the slit map, reverse steps shift before it; this pairing makes the
reverse flow of W the exact inverse of the forward flow of the time-reversed
driving t -> W(T-t) - W(T), so the time-reversal duality holds per discrete
path, not just in law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import kernels


class Absorbed(NamedTuple):
    """Return variant of the forward flow: the point was swallowed at `time`."""

    time: float


@dataclass
class DrivingPath:
    """Uniformly sampled driving function W on [0, T], W[0] = 0."""

    dt: float
    samples: np.ndarray
    direction: str = "forward"
    kappa: Optional[float] = None
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or len(self.samples) < 1:
            raise ValueError("samples must be a 1-d array")
        if abs(self.samples[0]) > 0:
            raise ValueError("driving must start at W_0 = 0")
        if self.direction not in ("forward", "reverse"):
            raise ValueError("direction must be forward or reverse")
        if not (self.dt > 0):
            raise ValueError("dt must be positive")

    @property
    def n_steps(self) -> int:
        return len(self.samples) - 1

    @property
    def T(self) -> float:
        return self.n_steps * self.dt

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.samples)

    def reversed_dual(self) -> "DrivingPath":
        """The driving t -> W(T-t) - W(T) with the opposite direction label."""
        w = self.samples[::-1] - self.samples[-1]
        other = "reverse" if self.direction == "forward" else "forward"
        return DrivingPath(self.dt, np.ascontiguousarray(w), other, self.kappa)

    def restricted(self, t: float) -> "DrivingPath":
        k = int(round(t / self.dt))
        if not (0 <= k <= self.n_steps):
            raise ValueError("time outside the path")
        return DrivingPath(self.dt, self.samples[: k + 1].copy(), self.direction, self.kappa)


@dataclass
class CurveTrace:
    """Curve in the closed upper half plane, capacity-parameterized."""

    points: np.ndarray
    times: np.ndarray
    parameterization: str = "capacity"

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex)
        self.times = np.asarray(self.times, dtype=float)
        if self.points.shape != self.times.shape:
            raise ValueError("points/times shape mismatch")
        if (self.points.imag < -1e-12).any():
            raise ValueError("trace leaves the closed upper half plane")


@dataclass
class WeldingMap:
    """Monotone pairing x_k < 0 < y_k of boundary points welded together.

    Pairs are ordered by increasing |x| (simultaneous-arrival time order);
    `times` optionally records the reverse-flow arrival times.
    """

    x: np.ndarray
    y: np.ndarray
    times: Optional[np.ndarray] = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape:
            raise ValueError("x/y shape mismatch")
        if (self.x >= 0).any() or (self.y <= 0).any():
            raise ValueError("need x < 0 < y")
        if (np.diff(-self.x) <= 0).any() or (np.diff(self.y) <= 0).any():
            raise ValueError("welding map must be strictly monotone")
        if self.times is not None:
            self.times = np.asarray(self.times, dtype=float)

    def __len__(self) -> int:
        return len(self.x)

    def right_of(self, x: float) -> float:
        """Monotone interpolation y = R(x) for x in the sampled range."""
        return float(np.interp(-x, -self.x[::-1], self.y[::-1]))


# ---------------------------------------------------------------------------
# flows


def forward_flow(driving: DrivingPath, z):
    """Terminal forward-flow position f_T(z), or Absorbed(t*) if swallowed."""
    f, _, tau = kernels.forward_flow_points(
        np.atleast_1d(np.asarray(z, dtype=complex)), driving.increments, driving.dt
    )
    if np.isscalar(z) or np.asarray(z).ndim == 0:
        if math.isfinite(tau[0]):
            return Absorbed(float(tau[0]))
        return complex(f[0])
    return [Absorbed(float(t)) if math.isfinite(t) else complex(v) for v, t in zip(f, tau)]


def forward_flow_many(driving: DrivingPath, zs) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vector forward flow: (f_T, log f_T', absorption times)."""
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    return kernels.forward_flow_points(zs, driving.increments, driving.dt)


def reverse_flow(driving: DrivingPath, z):
    """Terminal reverse-flow position f_T(z); Im f_t is nondecreasing in t."""
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    if (zs == 0).any():
        raise ValueError("reverse flow undefined at z = 0")
    f, _ = kernels.reverse_flow_points(zs, driving.increments, driving.dt)
    if np.isscalar(z) or np.asarray(z).ndim == 0:
        return complex(f[0])
    return f


def reverse_flow_many(driving: DrivingPath, zs) -> Tuple[np.ndarray, np.ndarray]:
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    return kernels.reverse_flow_points(zs, driving.increments, driving.dt)


# ---------------------------------------------------------------------------
# driving samplers


def sample_sle_driving(
    kappa: float, T: float, dt: float, seed: int, direction: str = "forward"
) -> DrivingPath:
    """W = sqrt(kappa) * Gaussian random walk with step variance dt."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    m = int(round(T / dt))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    db = rng.standard_normal(m) * math.sqrt(dt)
    w = np.concatenate([[0.0], np.cumsum(math.sqrt(kappa) * db)])
    return DrivingPath(dt, w, direction, kappa)


def sample_reverse_sle_kappa_rho(
    kappa: float,
    force_points: Sequence[Tuple[complex, float]],
    T: float,
    dt: float,
    seed: int,
) -> Tuple[DrivingPath, float]:
    """Reverse kappa-rho driving via Euler-Maruyama on the force-point drift.

    dW = sum_i Re(-rho_i / f_t(y_i)) dt + sqrt(kappa) dB, with the force
    points evolved concurrently by the reverse flow.  The run truncates at
    the first time a (boundary) force point reaches 0; returns the possibly
    shortened path and the actual stop time.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    ys = np.array([complex(y) for y, _ in force_points], dtype=complex)
    rhos = np.array([float(r) for _, r in force_points], dtype=float)
    if (ys == 0).any():
        raise ValueError("force point at the origin")
    m = int(round(T / dt))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    dB = (rng.standard_normal(m) * math.sqrt(dt))[None, :]
    W, nsteps = kernels.reverse_sle_driving(ys, rhos, dB, math.sqrt(kappa), dt)
    k = int(nsteps[0])
    path = DrivingPath(dt, W[0, : k + 1].copy(), "reverse", kappa)
    path.meta["force_points"] = [(complex(y), float(r)) for y, r in force_points]
    return path, k * dt


# ---------------------------------------------------------------------------
# curve extraction and welding


def extract_curve(driving: DrivingPath, n_points: int) -> CurveTrace:
    """Trace eta(t_k) as preimages of the driving point under the flow."""
    if driving.direction != "forward":
        raise ValueError("extract_curve expects a forward driving path")
    m = driving.n_steps
    if n_points > m + 1:
        raise ValueError("requested resolution finer than the driving step")
    ks = np.unique(np.round(np.linspace(0, m, n_points)).astype(np.int64))
    pts = kernels.extract_curve_points(driving.increments, driving.dt, ks)
    return CurveTrace(pts, ks * driving.dt)


def time_to_zero(driving: DrivingPath, x: float) -> float:
    """Reverse-flow arrival time of the real point x at the origin (inf if > T)."""
    if driving.direction != "reverse":
        raise ValueError("time_to_zero expects a reverse driving path")
    return float(kernels.time_to_zero(float(x), driving.increments, driving.dt))


def curve_welding(
    driving: DrivingPath,
    n_pairs: int = 64,
    times=None,
    n_iter: int = 60,
    spacing: str = "left-length",
) -> WeldingMap:
    """Welding homeomorphism of a reverse flow: pairs arriving at 0 together.

    Bisection on each half-axis against the monotone time-to-zero functional.
    The intermediate-time ladder is either uniform in time (spacing="time")
    or derived from equally spaced left-boundary points (spacing =
    "left-length", the default), which balances the welded increments and is
    what the discrete zipper reconstruction wants.
    """
    if driving.direction != "reverse":
        raise ValueError("curve_welding expects a reverse driving path")
    if driving.kappa is not None and driving.kappa >= 4:
        raise ValueError("welding requires kappa < 4 (simple trace)")
    dW = driving.increments
    probe = 2.0 * math.sqrt(max(driving.T, driving.dt)) + np.abs(driving.samples).max() + 1.0
    tmax = driving.T if times is None else float(np.max(times))
    for _ in range(60):
        if kernels.time_to_zero(probe, dW, driving.dt) > tmax and (
            kernels.time_to_zero(-probe, dW, driving.dt) > tmax
        ):
            break
        probe *= 2.0
    if times is None:
        if spacing == "time":
            times = driving.T * np.arange(1, n_pairs + 1) / n_pairs
        elif spacing == "left-length":
            # left endpoint x_T with tau(x_T) = T, then a uniform x ladder
            lo_, hi_ = 0.0, -probe
            for _ in range(n_iter):
                mid = 0.5 * (lo_ + hi_)
                if kernels.time_to_zero(mid, dW, driving.dt) <= driving.T:
                    lo_ = mid
                else:
                    hi_ = mid
            x_edge = lo_
            xs_ladder = x_edge * np.arange(1, n_pairs + 1) / n_pairs
            times = np.array(
                [kernels.time_to_zero(float(x), dW, driving.dt) for x in xs_ladder]
            )
            times = np.clip(times, driving.dt * 1e-6, driving.T)
            times = np.maximum.accumulate(times)
        else:
            raise ValueError("spacing must be 'time' or 'left-length'")
    times = np.asarray(times, dtype=float)
    if (times <= 0).any() or (times > driving.T + 1e-12).any():
        raise ValueError("welding times must lie in (0, T]")
    xs, ys = kernels.welding_pairs(dW, driving.dt, times, probe, n_iter)
    if np.isnan(xs).any() or np.isnan(ys).any():
        raise RuntimeError("failed to bracket a welding pair")
    xs, ys, times = _validate_weld_pairs(driving, xs, ys, times)
    # the discrete time-to-zero functional jumps at scale dt, so adjacent
    # requested times can collide on a flat spot; drop ties to keep the
    # output a strict homeomorphism sample
    keep = [0]
    for i in range(1, len(times)):
        j = keep[-1]
        if xs[i] < xs[j] - 1e-12 and ys[i] > ys[j] + 1e-12:
            keep.append(i)
    keep = np.asarray(keep)
    return WeldingMap(xs[keep], ys[keep], times[keep])


def _validate_weld_pairs(driving, xs, ys, times):
    """Enforce the map-level pairing f_T(x) = f_T(y).

    Arrival-time matching equals the terminal-map identification except near
    driving jumps that carry a real point across the slit base; such pairs
    are repaired by re-matching y against x's terminal image, or dropped.
    """
    dW = driving.increments
    dt = driving.dt
    Rx, _ = kernels.reverse_flow_points(xs.astype(complex), dW, dt)
    Ry, _ = kernels.reverse_flow_points(ys.astype(complex), dW, dt)
    scale = max(np.abs(Rx).max(), np.abs(Ry).max(), math.sqrt(driving.T))
    bad = np.abs(Rx - Ry) > 1e-6 * scale
    if not bad.any():
        return xs, ys, times
    # fine probe grid on the welded part of the right axis
    y_hi = ys.max() * 1.000001
    grid = y_hi * (np.arange(1, 4097) / 4096.0)
    Rg, _ = kernels.reverse_flow_points(grid.astype(complex), dW, dt)
    ok = np.ones(len(xs), dtype=bool)
    for k in np.nonzero(bad)[0]:
        target = Rx[k]
        j = int(np.abs(Rg - target).argmin())
        lo_ = grid[max(j - 1, 0)]
        hi_ = grid[min(j + 1, len(grid) - 1)]
        for _ in range(50):
            m1 = lo_ + (hi_ - lo_) / 3.0
            m2 = hi_ - (hi_ - lo_) / 3.0
            f1, _ = kernels.reverse_flow_points(np.array([m1], complex), dW, dt)
            f2, _ = kernels.reverse_flow_points(np.array([m2], complex), dW, dt)
            if abs(f1[0] - target) < abs(f2[0] - target):
                hi_ = m2
            else:
                lo_ = m1
        y_new = 0.5 * (lo_ + hi_)
        fy, _ = kernels.reverse_flow_points(np.array([y_new], complex), dW, dt)
        if abs(fy[0] - target) <= 1e-4 * scale:
            ys[k] = y_new
        else:
            ok[k] = False
    return xs[ok], ys[ok], times[ok]


def weld_curve_from_map(wmap: WeldingMap, steps: Optional[int] = None) -> CurveTrace:
    """Discrete zipper: rebuild the interface curve from the welding pairs.

    Pairs are consumed innermost first; each step is the tilted-slit map
    fitted to the current pair (equal harmonic increments on both sides).
    `steps` restricts to the first (innermost) pairs, giving a curve prefix
    in the welded surface's own coordinates.
    """
    k = len(wmap)
    if steps is not None:
        k = min(k, int(steps))
        if k < 1:
            raise ValueError("need at least one pair")
    pts, caps = kernels.weld_trace(wmap.x[:k].copy(), wmap.y[:k].copy())
    # trace comes tip-first; capacity accumulates from the base upward
    pts = pts[::-1].copy()
    times = np.concatenate([[0.0], np.cumsum(caps[::-1])])
    return CurveTrace(pts, times)


def reverse_hull_trace(driving: DrivingPath, n_pairs: int = 256) -> CurveTrace:
    """Terminal reverse-flow hull boundary as images of welded axis points."""
    wmap = curve_welding(driving, n_pairs=n_pairs)
    pts_x, _ = kernels.reverse_flow_points(
        wmap.x.astype(complex), driving.increments, driving.dt
    )
    tip, _ = kernels.reverse_flow_points(
        np.array([0j]), driving.increments, driving.dt
    )
    pts = np.concatenate([[0.0 + 0j], pts_x[::-1], tip])
    times = np.concatenate([[0.0], (driving.T - wmap.times)[::-1], [driving.T]])
    return CurveTrace(pts, times)


# ---------------------------------------------------------------------------
# Bessel dimensions


def bessel_dimension(kappa: float, rho1: float, flow: str = "reverse") -> float:
    """Dimension of the Bessel process driving a single boundary force point.

    reverse: delta = 1 + 2(rho1 - 2)/kappa; forward: delta' = 1 + 2(rho1 + 2)/kappa.
    The two are linked by delta(rho1) = 4 - delta'(kappa - rho1).
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if flow == "reverse":
        return 1.0 + 2.0 * (rho1 - 2.0) / kappa
    if flow == "forward":
        return 1.0 + 2.0 * (rho1 + 2.0) / kappa
    raise ValueError("flow must be forward or reverse")


# ---------------------------------------------------------------------------
# geometry helpers


def densify_polyline(points, max_seg: float) -> np.ndarray:
    """Insert intermediate points so no segment exceeds max_seg."""
    points = np.atleast_1d(np.asarray(points, dtype=complex))
    if len(points) < 2:
        return points
    out = [points[:1]]
    for a, b in zip(points[:-1], points[1:]):
        n = max(1, int(math.ceil(abs(b - a) / max_seg)))
        out.append(a + (b - a) * (np.arange(1, n + 1) / n))
    return np.concatenate(out)


def hausdorff_distance(a, b, densify: Optional[float] = None) -> float:
    """Hausdorff distance between two point sets / polylines in the plane.

    With `densify`, inputs are treated as polylines and refined so the metric
    measures curve-to-curve distance rather than sample spacing.
    """
    a = np.atleast_1d(np.asarray(a, dtype=complex))
    b = np.atleast_1d(np.asarray(b, dtype=complex))
    if densify is not None:
        a = densify_polyline(a, densify)
        b = densify_polyline(b, densify)
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))
