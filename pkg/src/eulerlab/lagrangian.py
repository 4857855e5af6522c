"""Flow maps, winding diagnostics, and passive-scalar mixing tools.

Particles carry both wrapped positions and lifts to the universal cover;
winding numbers, shear-stability metrics, and Jacobian checks all operate
on the lifts so that wrapping never introduces jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from dataclasses import field as dc_field

import numpy as np
from scipy import ndimage

from .fields import SpectralField2, VectorField2, l2_inner, to_values
from .grids import TWO_PI, Grid2
from .operators import dealias, transport_coeffs

# direct trigonometric summation is exact but quadratic in mode count;
# above this many modes velocities are sampled from a refined grid instead
_DIRECT_MODE_LIMIT = 64 * 64


class VelocitySampler:
    """Evaluate a velocity field at arbitrary points.

    Small grids use direct mode summation (exact); larger ones are
    oversampled by zero-padding onto a doubled grid and interpolated with
    periodic cubic splines.  The chosen method is exposed for metadata.
    """

    def __init__(self, grid: Grid2, u1_coeffs: np.ndarray, u2_coeffs: np.ndarray):
        self.grid = grid
        if grid.nx * grid.ny <= _DIRECT_MODE_LIMIT:
            self.method = "spectral"
            self._c1 = u1_coeffs
            self._c2 = u2_coeffs
        else:
            self.method = "bicubic"
            fine = (2 * grid.nx, 2 * grid.ny)
            self._v1 = _pad_values(u1_coeffs, fine)
            self._v2 = _pad_values(u2_coeffs, fine)
            self._scale = (fine[0] / grid.lx, fine[1] / grid.ly)

    @classmethod
    def from_field(cls, u: VectorField2) -> "VelocitySampler":
        return cls(u.grid, u.u1.coeffs, u.u2.coeffs)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        if self.method == "spectral":
            g = self.grid
            f1 = SpectralField2(g, self._c1, False)
            f2 = SpectralField2(g, self._c2, False)
            return np.stack([f1.eval_at(points), f2.eval_at(points)], axis=1)
        coords = np.stack([points[:, 0] * self._scale[0],
                           points[:, 1] * self._scale[1]])
        out = np.empty((points.shape[0], 2))
        out[:, 0] = ndimage.map_coordinates(self._v1, coords, order=3, mode="grid-wrap")
        out[:, 1] = ndimage.map_coordinates(self._v2, coords, order=3, mode="grid-wrap")
        return out


def _pad_values(coeffs: np.ndarray, fine: tuple[int, int]) -> np.ndarray:
    nx, ny = coeffs.shape
    out = np.zeros(fine, dtype=complex)
    hx, hy = nx // 2, ny // 2
    out[:hx, :hy] = coeffs[:hx, :hy]
    out[:hx, -hy:] = coeffs[:hx, -hy:]
    out[-hx:, :hy] = coeffs[-hx:, :hy]
    out[-hx:, -hy:] = coeffs[-hx:, -hy:]
    return to_values(out)


@dataclass
class ParticleSet:
    """Marker positions with their unwrapped lifts (and the t=0 lifts)."""

    positions: np.ndarray
    lifts: np.ndarray
    lifts0: np.ndarray
    t: float
    lx: float = TWO_PI
    ly: float = TWO_PI

    def __post_init__(self) -> None:
        if self.positions.shape[0] < 4:
            raise ValueError("at least 4 particles are required")

    @classmethod
    def lattice(cls, m: int, lx: float = TWO_PI, ly: float = TWO_PI) -> "ParticleSet":
        """Uniform m-by-m marker lattice over the fundamental domain."""
        if m < 2:
            raise ValueError("lattice needs m >= 2 per direction")
        x = np.arange(m) * (lx / m)
        y = np.arange(m) * (ly / m)
        xx, yy = np.meshgrid(x, y, indexing="ij")
        pos = np.column_stack([xx.ravel(), yy.ravel()])
        return cls(pos, pos.copy(), pos.copy(), 0.0, lx, ly)

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    def wrapped(self, lifts: np.ndarray) -> np.ndarray:
        out = lifts.copy()
        out[:, 0] %= self.lx
        out[:, 1] %= self.ly
        return out


@dataclass
class FlowMapSnapshot:
    """A lattice ParticleSet frozen at one time, with its initial spacing."""

    particles: ParticleSet
    h: float
    lattice_shape: tuple[int, int]

    @property
    def t(self) -> float:
        return self.particles.t


@dataclass
class WindingRecord:
    """Real-valued winding numbers (lift displacement over the x-period).

    Integer winding is the floor of the real value; both views are kept
    because smooth diagnostics want the real number while topological
    counts want the integer.
    """

    t: float
    numbers: np.ndarray
    spread: float

    @property
    def integer_numbers(self) -> np.ndarray:
        return np.floor(self.numbers).astype(int)


def _as_sampler(velocity_source, t: float):
    if isinstance(velocity_source, VectorField2):
        sampler = VelocitySampler.from_field(velocity_source)
        return lambda _t, pts: sampler(pts)
    if isinstance(velocity_source, VelocitySampler):
        return lambda _t, pts: velocity_source(pts)
    if callable(velocity_source):
        return velocity_source
    raise TypeError("velocity_source must be a VectorField2, sampler, or callable")


def advect(particles: ParticleSet, velocity_source, dt: float,
           n_steps: int = 1) -> ParticleSet:
    """March particle lifts with RK4; positions are re-wrapped afterwards.

    ``velocity_source`` is a steady VectorField2, a VelocitySampler, or a
    callable (t, points) -> velocities for time-dependent flows.
    """
    vel = _as_sampler(velocity_source, particles.t)
    lifts = particles.lifts.copy()
    t = particles.t
    for _ in range(n_steps):
        k1 = vel(t, lifts)
        k2 = vel(t + 0.5 * dt, lifts + 0.5 * dt * k1)
        k3 = vel(t + 0.5 * dt, lifts + 0.5 * dt * k2)
        k4 = vel(t + dt, lifts + dt * k3)
        lifts = lifts + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
    out = ParticleSet(particles.wrapped(lifts), lifts, particles.lifts0.copy(),
                      t, particles.lx, particles.ly)
    return out


# -- lattice differential diagnostics -----------------------------------------


def _central_diff(d: np.ndarray, h: float, axis: int, order: int) -> np.ndarray:
    if order == 2:
        return (np.roll(d, -1, axis=axis) - np.roll(d, 1, axis=axis)) / (2 * h)
    if order == 4:
        return (-np.roll(d, -2, axis=axis) + 8 * np.roll(d, -1, axis=axis)
                - 8 * np.roll(d, 1, axis=axis) + np.roll(d, 2, axis=axis)) / (12 * h)
    if order == 6:
        return (45.0 * (np.roll(d, -1, axis=axis) - np.roll(d, 1, axis=axis))
                - 9.0 * (np.roll(d, -2, axis=axis) - np.roll(d, 2, axis=axis))
                + (np.roll(d, -3, axis=axis) - np.roll(d, 3, axis=axis))) / (60 * h)
    raise ValueError("central differences of order 2, 4, or 6 only")


def _lattice_gradient(flowmap: FlowMapSnapshot, order: int = 2) -> np.ndarray:
    """Gradient of the flow map by wrap-aware central differences.

    Differencing the lift displacement d = lift - lift0 (periodic over the
    lattice) and adding the identity avoids jumps at the wrap seam.
    Returns an array of shape (mx, my, 2, 2) whose [..., i, j] entry is
    dPhi_i/dx_j.
    """
    p = flowmap.particles
    mx, my = flowmap.lattice_shape
    disp = (p.lifts - p.lifts0).reshape(mx, my, 2)
    hx = p.lx / mx
    hy = p.ly / my
    grad = np.empty((mx, my, 2, 2))
    for i in range(2):
        d = disp[:, :, i]
        grad[:, :, i, 0] = _central_diff(d, hx, 0, order)
        grad[:, :, i, 1] = _central_diff(d, hy, 1, order)
    grad[:, :, 0, 0] += 1.0
    grad[:, :, 1, 1] += 1.0
    return grad


def jacobian_det(flowmap: FlowMapSnapshot) -> dict:
    """Check incompressibility of the lattice flow map.

    Returns max |det grad Phi - 1| and the sup of the gradient magnitude.
    A non-positive determinant anywhere means the lattice has folded over
    (spacing too coarse for the flow) and is reported as an error.
    """
    grad = _lattice_gradient(flowmap)
    det = grad[:, :, 0, 0] * grad[:, :, 1, 1] - grad[:, :, 0, 1] * grad[:, :, 1, 0]
    if np.any(det <= 0.0):
        raise ValueError("lattice folding: refine the marker lattice")
    lam = float(np.max(np.abs(grad)))
    return {"max_abs_dev_from_1": float(np.max(np.abs(det - 1.0))),
            "grad_norm_inf": lam}


# -- winding and twisting ------------------------------------------------------


def winding(particles: ParticleSet) -> WindingRecord:
    """Real-valued winding numbers (x-lift displacement over the x-period)."""
    n = (particles.lifts[:, 0] - particles.lifts0[:, 0]) / particles.lx
    return WindingRecord(t=particles.t, numbers=n,
                         spread=float(np.max(n) - np.min(n)))


def twisting_series(source) -> tuple[np.ndarray, np.ndarray]:
    """Winding spread over time, from a run result or a snapshot list."""
    snapshots = getattr(source, "marker_snapshots", source)
    if not snapshots:
        raise ValueError("no marker snapshots available for winding")
    recs = [winding(s.particles if isinstance(s, FlowMapSnapshot) else s)
            for s in snapshots]
    return (np.array([r.t for r in recs]),
            np.array([r.spread for r in recs]))


def lagrangian_stability_metrics(source, u_star) -> dict:
    """Shear-relative drift metrics along a marker trajectory series.

    ``u_star`` maps y to the reference horizontal shear speed.  m1 measures
    how far particles have moved across shear lines (profile speed at the
    current wrapped height vs the initial one); m2 compares the x-lift
    against the straight-line drift t*u_star evaluated at the y-lift.
    Marker norms are lattice-averaged L2.
    """
    snapshots = getattr(source, "marker_snapshots", source)
    ts, m1, m2 = [], [], []
    for snap in snapshots:
        p = snap.particles if isinstance(snap, FlowMapSnapshot) else snap
        w = math.sqrt(1.0 / p.count)
        ustar_now = u_star(p.positions[:, 1])
        ustar_init = u_star(p.lifts0[:, 1] % p.ly)
        drift = p.lifts[:, 0] - p.t * u_star(p.lifts[:, 1]) - p.lifts0[:, 0]
        ts.append(p.t)
        m1.append(w * float(np.linalg.norm(ustar_now - ustar_init)))
        m2.append(w * float(np.linalg.norm(drift)))
    return {"t": np.array(ts), "m1": np.array(m1), "m2": np.array(m2)}


# -- passive scalars -----------------------------------------------------------


@dataclass
class MixingResult:
    times: np.ndarray
    pairings: np.ndarray  # shape (len(test_functions), len(times))
    final: SpectralField2
    fields: list = dc_field(default_factory=list)


def _scalar_cfl_dt(u1v: np.ndarray, u2v: np.ndarray, grid: Grid2, cfl: float) -> float:
    lim = math.inf
    s1 = float(np.max(np.abs(u1v)))
    s2 = float(np.max(np.abs(u2v)))
    if s1 > 0.0:
        lim = min(lim, grid.dx / s1)
    if s2 > 0.0:
        lim = min(lim, grid.dy / s2)
    if not math.isfinite(lim):
        return math.inf
    return cfl * lim


def passive_scalar_evolve(u: VectorField2, f0: SpectralField2, t_end: float,
                          test_functions: list | None = None,
                          cfl: float = 0.4, diag_every: float = 0.5,
                          store_fields: bool = False) -> MixingResult:
    """Transport f0 by a steady divergence-free velocity.

    The advective pairing series (u . grad f, phi) is recorded for each
    test function phi at the diagnostic cadence; its decay (or failure to
    decay) is the mixing diagnostic.
    """
    if u.grid != f0.grid:
        raise ValueError("velocity and scalar live on different grids")
    grid = f0.grid
    phis = test_functions or []
    u1v = u.u1.values
    u2v = u.u2.values
    dt_cfl = _scalar_cfl_dt(u1v, u2v, grid, cfl)
    if not math.isfinite(dt_cfl):
        dt_cfl = t_end

    c = dealias(f0).coeffs.copy()
    t = 0.0

    def rhs(fc: np.ndarray) -> np.ndarray:
        return transport_coeffs(fc, u1v, u2v, grid)

    def pairing_row(fc: np.ndarray) -> list[float]:
        adv = SpectralField2(grid, -rhs(fc), True)  # u . grad f
        return [l2_inner(adv, phi) for phi in phis]

    times = [0.0]
    rows = [pairing_row(c)]
    fields = [SpectralField2.from_coeffs(grid, c, check=False)] if store_fields else []
    next_diag = diag_every

    while t < t_end - 1e-12:
        dt = min(dt_cfl, next_diag - t, t_end - t)
        k1 = rhs(c)
        k2 = rhs(c + 0.5 * dt * k1)
        k3 = rhs(c + 0.5 * dt * k2)
        k4 = rhs(c + dt * k3)
        c = c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
        if t >= next_diag - 1e-12 or t >= t_end - 1e-12:
            times.append(t)
            rows.append(pairing_row(c))
            if store_fields:
                fields.append(SpectralField2.from_coeffs(grid, c, check=False))
            if t >= next_diag - 1e-12:
                next_diag += diag_every

    final = SpectralField2.from_coeffs(grid, c, check=False)
    pair = np.array(rows).T if phis else np.zeros((0, len(times)))
    return MixingResult(times=np.array(times), pairings=pair,
                        final=final, fields=fields)


def period_function(u, seeds, dt: float = 1e-3,
                    t_max: float = 200.0, tol: float = 1e-3) -> list[float]:
    """First-return times of trajectories seeded on closed orbits.

    ``u`` is a VectorField2, a sampler, or a callable (t, points).  A seed
    must first leave its neighborhood (10x tol) and then come back within
    ``tol`` in the torus metric; the return time is sharpened by a
    parabolic fit of the squared distance.  Seeds that never return within
    ``t_max`` (e.g. stagnation points) yield ``inf``.
    """
    vel = _as_sampler(u, 0.0)
    if isinstance(u, (VectorField2, VelocitySampler)):
        lx, ly = u.grid.lx, u.grid.ly
    else:
        lx = ly = TWO_PI
    out = []
    for seed in seeds:
        seed = np.asarray(seed, dtype=np.float64)
        p = seed.copy()
        t = 0.0
        left = False
        d_hist = []
        period = math.inf
        while t < t_max:
            k1 = vel(t, p[None, :])[0]
            k2 = vel(t + 0.5 * dt, (p + 0.5 * dt * k1)[None, :])[0]
            k3 = vel(t + 0.5 * dt, (p + 0.5 * dt * k2)[None, :])[0]
            k4 = vel(t + dt, (p + dt * k3)[None, :])[0]
            p = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += dt
            dx = (p[0] - seed[0] + lx / 2) % lx - lx / 2
            dy = (p[1] - seed[1] + ly / 2) % ly - ly / 2
            d = math.hypot(dx, dy)
            d_hist.append((t, d))
            if not left:
                left = d > 10.0 * tol
                continue
            if d < tol and len(d_hist) >= 3:
                (t0, d0), (t1, d1), (t2, d2) = d_hist[-3:]
                denom = d0 * d0 - 2 * d1 * d1 + d2 * d2
                if denom > 0:
                    period = t1 + 0.5 * dt * (d0 * d0 - d2 * d2) / denom
                else:
                    period = t1
                break
        out.append(float(period))
    return out


def gradient_growth(result, fit_window: tuple[float, float] | None = None) -> dict:
    """Sup-gradient growth of the scalars carried by an Euler run.

    Returns the recorded series for each transported scalar and, per
    scalar, the least-squares exponential rate of the series over
    ``fit_window`` (default: the whole run).
    """
    series = getattr(result, "scalar_gradients", None)
    if not series:
        raise ValueError("run carried no transported scalars")
    ts = np.array([rec.t for rec in result.diagnostics])
    out = {"t": ts, "series": {}, "rates": {}}
    for name, vals in series.items():
        vals = np.asarray(vals)
        out["series"][name] = vals
        lo, hi = fit_window if fit_window else (ts[0], ts[-1])
        m = (ts >= lo) & (ts <= hi) & (vals > 0)
        if np.count_nonzero(m) >= 2:
            slope, _ = np.polyfit(ts[m], np.log(vals[m]), 1)
            out["rates"][name] = float(slope)
        else:
            out["rates"][name] = 0.0
    return out
