"""2D incompressible Euler in vorticity form, plus steady-state tooling.

The solver advances the dealiased pseudo-spectral vorticity equation with
RK4 under a CFL-limited adaptive step.  Runs can co-transport passive
scalars and a marker lattice (advanced with the same RK4 stage velocities,
so the coupled system stays 4th-order), and emit conservation/BKM
diagnostics at a fixed cadence.

Steady-state tooling covers the stream-function formulation: the Poisson
bracket residual, an inexact-Newton solver for the semilinear balance
``laplacian(psi) = F(psi)`` on mean-free fields, a convexity-based
stability certificate with a perturbation experiment, and a dense probe
for kernels of the linearized operator.

Stream-level H2 distances used by the certificate are computed spectrally:
``sqrt(lx*ly * sum((1+|k|^2)^2 |psi1_hat - psi2_hat|^2))``.

On the torus the boundary condition of the classical stability theorem is
replaced by a mean-free constraint on psi; the certificate is that torus
adaptation, not a verbatim transcription.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.sparse.linalg import LinearOperator, minres

from .fields import SpectralField2, VectorField2, to_coeffs, to_values
from .grids import Grid2
from .lagrangian import FlowMapSnapshot, ParticleSet, VelocitySampler, _lattice_gradient
from .operators import advection_coeffs, biot_savart, dealias, leray_project, transport_coeffs
from .snapshots import write_snapshot

MAX_CFL = 0.5


@dataclass
class EulerState:
    """Mean-free vorticity field at a given time."""

    omega: SpectralField2
    t: float

    def __post_init__(self) -> None:
        if not self.omega.mean_free:
            raise ValueError("vorticity must be mean-free")

    def velocity(self) -> VectorField2:
        return biot_savart(self.omega)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    energy: float
    enstrophy: float
    casimirs: dict
    omega_max: float
    bkm_integral: float
    palinstrophy: float


@dataclass
class EulerRunResult:
    final: EulerState
    diagnostics: list
    marker_snapshots: list = dc_field(default_factory=list)
    scalars: dict = dc_field(default_factory=dict)
    scalar_gradients: dict = dc_field(default_factory=dict)
    snapshot_paths: list = dc_field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([rec.t for rec in self.diagnostics])


def euler_rhs(state: EulerState) -> SpectralField2:
    """Vorticity tendency -u.grad(omega), dealiased and mean-free."""
    c = advection_coeffs(state.omega.coeffs, state.omega.grid)
    return SpectralField2(state.omega.grid, c, True)


def _cfl_dt(grid: Grid2, sup_u1: float, sup_u2: float, cfl: float) -> float:
    lim = math.inf
    if sup_u1 > 0.0:
        lim = grid.dx / sup_u1
    if sup_u2 > 0.0:
        lim = min(lim, grid.dy / sup_u2)
    return cfl * lim


def step_rk4(state: EulerState, dt: float, cfl: float = MAX_CFL) -> EulerState:
    """One RK4 step; dt must respect the per-direction CFL bound."""
    if not 0.0 < cfl <= MAX_CFL:
        raise ValueError(f"cfl must lie in (0, {MAX_CFL}]")
    grid = state.omega.grid
    u = state.velocity()
    limit = _cfl_dt(grid, u.u1.norm_inf(), u.u2.norm_inf(), cfl)
    if dt > limit:
        raise ValueError(f"dt={dt:g} exceeds the CFL bound {limit:g}")
    c = state.omega.coeffs
    k1 = advection_coeffs(c, grid)
    k2 = advection_coeffs(c + 0.5 * dt * k1, grid)
    k3 = advection_coeffs(c + 0.5 * dt * k2, grid)
    k4 = advection_coeffs(c + dt * k3, grid)
    cn = c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return EulerState(SpectralField2.from_coeffs(grid, cn, check=False), state.t + dt)


def _casimir_entries(casimirs, symbol: str = "omega") -> list:
    """Normalize the casimir spec to (name, callable) pairs.

    Integer entries p mean the moment integral of the field raised to p;
    callables are used as-is with their __name__.
    """
    out = []
    for entry in casimirs or ():
        if isinstance(entry, int):
            p = entry
            out.append((f"{symbol}^{p}", lambda w, p=p: w**p))
        elif isinstance(entry, tuple):
            out.append(entry)
        elif callable(entry):
            out.append((getattr(entry, "__name__", "casimir"), entry))
        else:
            raise TypeError("casimirs entries must be ints or callables")
    return out


def _diagnostics(grid: Grid2, c: np.ndarray, t: float, bkm: float, entries) -> DiagnosticsRecord:
    area = grid.lx * grid.ly
    p2 = np.abs(c) ** 2
    energy = 0.5 * area * float(np.sum(np.divide(p2, grid.k2, out=np.zeros_like(p2),
                                                 where=grid.k2 > 0)))
    enstrophy = area * float(np.sum(p2))
    palinstrophy = area * float(np.sum(grid.k2 * p2))
    vals = to_values(c)
    cas = {name: grid.cell_area * float(np.sum(fn(vals))) for name, fn in entries}
    return DiagnosticsRecord(t=t, energy=energy, enstrophy=enstrophy, casimirs=cas,
                             omega_max=float(np.max(np.abs(vals))),
                             bkm_integral=bkm, palinstrophy=palinstrophy)


def _check_finite(rec: DiagnosticsRecord) -> bool:
    vals = [rec.energy, rec.enstrophy, rec.omega_max, rec.palinstrophy]
    vals.extend(rec.casimirs.values())
    return all(math.isfinite(v) for v in vals)


class _StageEval:
    """Shared per-stage work: velocity synthesis plus the vorticity tendency."""

    def __init__(self, grid: Grid2, need_sampler: bool):
        self.grid = grid
        self.need_sampler = need_sampler

    def __call__(self, c: np.ndarray):
        g = self.grid
        mask = g.dealias_mask
        wc = c * mask
        psi = g.inv_minus_k2 * wc
        ikx = (1j * g.kx)[:, None]
        iky = (1j * g.ky)[None, :]
        u1c = -iky * psi
        u2c = ikx * psi
        u1v = to_values(u1c)
        u2v = to_values(u2c)
        adv = to_coeffs(u1v * to_values(ikx * wc) + u2v * to_values(iky * wc))
        adv *= mask
        adv[0, 0] = 0.0
        sampler = VelocitySampler(g, u1c, u2c) if self.need_sampler else None
        return -adv, u1v, u2v, sampler


def run(omega0: SpectralField2, t_end: float, cfl: float = 0.4,
        diag_every: float = 0.5, casimirs=(4,), marker_lattice: int | None = None,
        scalars: dict | None = None, snapshot_dir: str | None = None,
        snapshot_every: float | None = None, observer=None) -> EulerRunResult:
    """Advance 2D Euler to t_end with diagnostics at a fixed cadence.

    Optional extras ride along inside the same RK4 stages: a marker
    lattice (``marker_lattice`` markers per direction) whose snapshots are
    stored at the diagnostic cadence, and named passive scalar fields whose
    sup-gradient history is recorded.  ``observer(state)`` is called at
    every diagnostic time.  Blow-up (non-finite diagnostics) aborts with a
    checkpoint of the last finite state.
    """
    if not 0.0 < cfl <= MAX_CFL:
        raise ValueError(f"cfl must lie in (0, {MAX_CFL}]")
    if t_end < 0.0:
        raise ValueError("t_end must be nonnegative")
    grid = omega0.grid
    if not omega0.mean_free:
        raise ValueError("vorticity must be mean-free")
    c = dealias(omega0).coeffs.copy()
    scalars = dict(scalars or {})
    scalar_c = {name: dealias(f).coeffs.copy() for name, f in scalars.items()}
    stage = _StageEval(grid, need_sampler=marker_lattice is not None)

    markers = ParticleSet.lattice(marker_lattice, grid.lx, grid.ly) if marker_lattice else None
    lifts = markers.lifts.copy() if markers is not None else None

    entries = _casimir_entries(casimirs)
    t = 0.0
    bkm = 0.0
    sup_prev = float(np.max(np.abs(to_values(c))))
    result = EulerRunResult(final=EulerState(omega0, 0.0), diagnostics=[])
    result.scalar_gradients = {name: [] for name in scalar_c}

    snap_next = snapshot_every if (snapshot_dir and snapshot_every) else math.inf
    snap_idx = 0

    def grad_sup(fc: np.ndarray) -> float:
        gx = to_values((1j * grid.kx)[:, None] * fc)
        gy = to_values((1j * grid.ky)[None, :] * fc)
        return float(np.max(np.hypot(gx, gy)))

    def current_state() -> EulerState:
        return EulerState(SpectralField2.from_coeffs(grid, c, check=False), t)

    def emit() -> bool:
        rec = _diagnostics(grid, c, t, bkm, entries)
        result.diagnostics.append(rec)
        for name, fc in scalar_c.items():
            result.scalar_gradients[name].append(grad_sup(fc))
        if markers is not None:
            frozen = ParticleSet(markers.wrapped(lifts), lifts.copy(),
                                 markers.lifts0.copy(), t, grid.lx, grid.ly)
            m = int(round(math.sqrt(frozen.count)))
            result.marker_snapshots.append(
                FlowMapSnapshot(frozen, grid.lx / m, (m, m)))
        if observer is not None:
            observer(current_state())
        return _check_finite(rec)

    def checkpoint(tag: str) -> None:
        if snapshot_dir:
            path = os.path.join(snapshot_dir, tag)
            write_snapshot(path, [to_values(c)], t)
            result.snapshot_paths.append(path)

    if not emit():
        checkpoint("checkpoint_abort.eulb")
        raise RuntimeError("numerical blow-up detected at t=0")

    next_diag = diag_every
    while t < t_end - 1e-12:
        k1, u1v, u2v, s1 = stage(c)
        dt_cfl = _cfl_dt(grid, float(np.max(np.abs(u1v))),
                         float(np.max(np.abs(u2v))), cfl)
        dt = min(dt_cfl, next_diag - t, snap_next - t, t_end - t)
        if not math.isfinite(dt) or dt <= 0.0:
            dt = min(next_diag - t, t_end - t)

        sk1 = {n: transport_coeffs(fc, u1v, u2v, grid) for n, fc in scalar_c.items()}
        mk1 = s1(lifts) if s1 is not None else None

        c2 = c + 0.5 * dt * k1
        k2, u1v, u2v, s2 = stage(c2)
        sk2 = {n: transport_coeffs(scalar_c[n] + 0.5 * dt * sk1[n], u1v, u2v, grid)
               for n in sk1}
        mk2 = s2(lifts + 0.5 * dt * mk1) if s2 is not None else None

        c3 = c + 0.5 * dt * k2
        k3, u1v, u2v, s3 = stage(c3)
        sk3 = {n: transport_coeffs(scalar_c[n] + 0.5 * dt * sk2[n], u1v, u2v, grid)
               for n in sk2}
        mk3 = s3(lifts + 0.5 * dt * mk2) if s3 is not None else None

        c4 = c + dt * k3
        k4, u1v, u2v, s4 = stage(c4)
        sk4 = {n: transport_coeffs(scalar_c[n] + dt * sk3[n], u1v, u2v, grid)
               for n in sk3}
        mk4 = s4(lifts + dt * mk3) if s4 is not None else None

        c = c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        for n in scalar_c:
            scalar_c[n] = scalar_c[n] + (dt / 6.0) * (sk1[n] + 2 * sk2[n] + 2 * sk3[n] + sk4[n])
        if lifts is not None:
            lifts = lifts + (dt / 6.0) * (mk1 + 2.0 * mk2 + 2.0 * mk3 + mk4)
        t += dt

        sup_new = float(np.max(np.abs(to_values(c))))
        bkm += 0.5 * dt * (sup_prev + sup_new)
        sup_prev = sup_new

        if t >= snap_next - 1e-12:
            checkpoint(f"snap_{snap_idx:05d}.eulb")
            snap_idx += 1
            snap_next += snapshot_every
        if t >= next_diag - 1e-12 or t >= t_end - 1e-12:
            if not emit():
                checkpoint("checkpoint_abort.eulb")
                raise RuntimeError(f"numerical blow-up detected at t={t:.6g}")
            while next_diag <= t + 1e-12:
                next_diag += diag_every

    result.final = current_state()
    result.scalars = {n: SpectralField2.from_coeffs(grid, fc, check=False)
                      for n, fc in scalar_c.items()}
    return result


# -- Weber formula check -------------------------------------------------------


def weber_residual(state: EulerState, flowmap: FlowMapSnapshot,
                   u0: VectorField2) -> float:
    """L2 defect of the projected pull-back of u(t) against u(0).

    The flow map gradient comes from 6th-order wrap-aware central
    differences of the marker lifts; the pulled-back covelocity is
    assembled on the marker lattice, Leray-projected there, and compared
    with the initial velocity restricted to the same lattice.
    """
    if abs(flowmap.t - state.t) > 1e-9:
        raise ValueError(f"flowmap time {flowmap.t:g} does not match state time {state.t:g}")
    p = flowmap.particles
    mx, my = flowmap.lattice_shape
    grad = _lattice_gradient(flowmap, order=6)

    sampler = VelocitySampler.from_field(state.velocity())
    u_phi = sampler(p.positions)
    u_phi = u_phi.reshape(mx, my, 2)
    # (grad Phi)^T (u o Phi)
    v1 = grad[:, :, 0, 0] * u_phi[:, :, 0] + grad[:, :, 1, 0] * u_phi[:, :, 1]
    v2 = grad[:, :, 0, 1] * u_phi[:, :, 0] + grad[:, :, 1, 1] * u_phi[:, :, 1]

    lattice_grid = Grid2(mx, my, p.lx, p.ly)
    v = VectorField2.from_values(lattice_grid, v1, v2)
    pv = leray_project(VectorField2(v.u1.project_mean_free(), v.u2.project_mean_free()))

    u0s = VelocitySampler.from_field(u0)
    u0_lattice = u0s(p.lifts0).reshape(mx, my, 2)
    w = VectorField2.from_values(lattice_grid, u0_lattice[:, :, 0], u0_lattice[:, :, 1])
    w = VectorField2(w.u1.project_mean_free(), w.u2.project_mean_free())
    return (pv - w).norm_l2()


# -- linearized Couette, exact symbol ------------------------------------------


def couette_linear_evolve(modes, ts) -> dict:
    """Free-transport evolution of vorticity modes around a linear shear.

    Each mode is (kx, eta0, amplitude) on a continuous vertical frequency
    axis; at time t its vertical frequency is eta0 + kx*t and the velocity
    follows from the stream-function relation.  Returns the L2 norms of
    both velocity components and the H1 norm of the vorticity.  Horizontal
    means (kx = 0) are undamped; their constant contribution to u1 is
    reported separately as ``shear_u1_l2`` and excluded from ``u1_l2``.
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
    u1sq = np.zeros_like(ts)
    u2sq = np.zeros_like(ts)
    h1sq = np.zeros_like(ts)
    shear_sq = 0.0
    for kx, eta0, amp in modes:
        a2 = float(amp) ** 2
        if kx == 0:
            if eta0 == 0:
                raise ValueError("mode (0, 0) has no velocity representation")
            shear_sq += a2 / eta0**2
            h1sq += a2 * (1.0 + eta0**2)
            continue
        eta = eta0 + kx * ts
        denom = kx**2 + eta**2
        u1sq += a2 * eta**2 / denom**2
        u2sq += a2 * kx**2 / denom**2
        h1sq += a2 * (1.0 + denom)
    return {"t": ts, "u1_l2": np.sqrt(u1sq), "u2_l2": np.sqrt(u2sq),
            "omega_h1": np.sqrt(h1sq), "shear_u1_l2": math.sqrt(shear_sq)}


# -- steady states --------------------------------------------------------------


def steady_residual(psi: SpectralField2) -> float:
    """L2 norm of the stream-function/vorticity Poisson bracket, dealiased."""
    g = psi.grid
    mask = g.dealias_mask
    pc = psi.coeffs * mask
    ikx = (1j * g.kx)[:, None]
    iky = (1j * g.ky)[None, :]
    lap = -g.k2 * pc
    bracket = to_values(ikx * pc) * to_values(iky * lap) \
        - to_values(iky * pc) * to_values(ikx * lap)
    bc = to_coeffs(bracket) * mask
    return float(math.sqrt(g.lx * g.ly * np.sum(np.abs(bc) ** 2)))


@dataclass
class SteadyState:
    """Converged solution of the semilinear balance laplacian(psi) = F(psi)."""

    psi: SpectralField2
    F: object
    F_prime: object
    residual: float            # Poisson-bracket residual of psi
    equation_residual: float   # L2 norm of laplacian(psi) - F(psi)
    converged: bool
    iterations: int


def _coeff_l2(grid: Grid2, c: np.ndarray) -> float:
    return float(math.sqrt(grid.lx * grid.ly * np.sum(np.abs(c) ** 2)))


def _equation_residual_coeffs(psi_c: np.ndarray, F, grid: Grid2) -> np.ndarray:
    mask = grid.dealias_mask
    rc = -grid.k2 * psi_c - to_coeffs(F(to_values(psi_c))) * mask
    rc[0, 0] = 0.0
    return rc


def _near_null_basis(grid: Grid2, fp_mean: float, width: float = 0.3) -> np.ndarray | None:
    """Value-space basis of Fourier modes where the linearization symbol
    -|k|^2 - mean(F') nearly vanishes (candidate kernel directions)."""
    cols = []
    X, Y = grid.meshgrid()
    for i, mx in enumerate(grid.mx):
        for j, my in enumerate(grid.my):
            if (mx == 0 and my == 0) or mx < 0 or (mx == 0 and my < 0):
                continue
            if abs(mx) * 2 == grid.nx or abs(my) * 2 == grid.ny:
                continue
            if abs(grid.k2[i, j] + fp_mean) > width:
                continue
            phase = grid.kx[i] * X + grid.ky[j] * Y
            for v in (np.cos(phase), np.sin(phase)):
                v = v.ravel()
                cols.append(v / np.linalg.norm(v))
    if not cols:
        return None
    return np.column_stack(cols)


def _linearized_step(grid: Grid2, fp_vals: np.ndarray, rc: np.ndarray,
                     rtol: float) -> tuple[np.ndarray, float]:
    """Solve the Newton correction (laplacian - F' mult) delta = -residual.

    MINRES with inverse-Laplacian preconditioning; near-null Fourier modes
    of the diagonal symbol are shifted out and restored with the Woodbury
    identity so steps stay accurate next to a singular linearization.
    Returns the correction (coefficients) and the relative defect of the
    linear solve.
    """
    n = grid.nx * grid.ny
    mask = grid.dealias_mask

    def mv(vec: np.ndarray) -> np.ndarray:
        vc = to_coeffs(vec.reshape(grid.shape))
        vc[0, 0] = 0.0
        w = to_values(vc)
        out = to_coeffs(fp_vals * w) * mask
        out = -grid.k2 * vc - out
        out[0, 0] = 0.0
        return to_values(out).ravel()

    def precond(vec: np.ndarray) -> np.ndarray:
        # inverse Laplacian on mean-free content; identity on the mean so
        # the preconditioner stays positive definite
        vc = to_coeffs(vec.reshape(grid.shape))
        pc = np.divide(vc, grid.k2, out=vc.copy(), where=grid.k2 > 0)
        return to_values(pc).ravel()

    pre = LinearOperator((n, n), matvec=precond)
    b = -to_values(rc).ravel()
    bnorm = np.linalg.norm(b)
    V = _near_null_basis(grid, float(np.mean(fp_vals)))

    if V is None:
        op = LinearOperator((n, n), matvec=mv)
        delta, _ = minres(op, b, M=pre, rtol=rtol, maxiter=1500)
    else:
        sigma = max(1.0, abs(float(np.mean(fp_vals))))

        def mv_shifted(vec: np.ndarray) -> np.ndarray:
            return mv(vec) + sigma * (V @ (V.T @ vec))

        op_s = LinearOperator((n, n), matvec=mv_shifted)
        tight = min(rtol, 1e-10)
        z_b, _ = minres(op_s, b, M=pre, rtol=tight, maxiter=4000)
        Z = np.column_stack([minres(op_s, V[:, j], M=pre, rtol=tight,
                                    maxiter=4000)[0] for j in range(V.shape[1])])
        small = np.eye(V.shape[1]) / sigma - V.T @ Z
        rhs_small = V.T @ z_b
        y, *_ = np.linalg.lstsq(small, rhs_small, rcond=1e-12)
        delta = z_b + Z @ y

    lin_def = float(np.linalg.norm(mv(delta) - b) / bnorm) if bnorm > 0 else 0.0
    dc = to_coeffs(delta.reshape(grid.shape)) * mask
    dc[0, 0] = 0.0
    return dc, lin_def


def semilinear_solve(F, F_prime, guess: SpectralField2, tol: float = 1e-10,
                     max_iter: int = 60, linear_rtol: float = 1e-3) -> SteadyState:
    """Damped inexact Newton for laplacian(psi) = F(psi) on mean-free fields.

    Newton corrections come from MINRES with an inverse-Laplacian
    preconditioner (plus low-rank deflation of near-singular symbol modes);
    steps are damped until the residual decreases.  An unsolvable
    linearization raises ``degenerate linearization``; running out of
    iterations or stalling raises a convergence error.
    """
    grid = guess.grid
    mask = grid.dealias_mask
    psi_c = dealias(guess).coeffs.copy()
    psi_c[0, 0] = 0.0

    rnorm = math.inf
    for iterations in range(max_iter + 1):
        rc = _equation_residual_coeffs(psi_c, F, grid)
        rnorm = _coeff_l2(grid, rc)
        if rnorm < tol:
            psi = SpectralField2.from_coeffs(grid, psi_c, check=False)
            return SteadyState(psi=psi, F=F, F_prime=F_prime,
                               residual=steady_residual(psi),
                               equation_residual=rnorm,
                               converged=True, iterations=iterations)
        if iterations == max_iter:
            break
        fp_vals = F_prime(to_values(psi_c))
        dc, lin_def = _linearized_step(grid, fp_vals, rc, linear_rtol)
        if lin_def > 0.1:
            raise ValueError("degenerate linearization: the linearized operator "
                             "is singular or nearly so at the current iterate")
        for damp in (1.0, 0.5, 0.25, 0.125):
            trial = psi_c + damp * dc
            tr = _coeff_l2(grid, _equation_residual_coeffs(trial, F, grid))
            if tr < rnorm * (1.0 - 1e-4 * damp):
                psi_c = trial
                break
        else:
            raise RuntimeError("semilinear solve stalled: no damping of the "
                               f"Newton step reduces the residual ({rnorm:.3e})")

    raise RuntimeError(f"semilinear solve did not converge in {max_iter} iterations "
                       f"(residual {rnorm:.3e})")


def stream_h2_distance(omega1: SpectralField2, omega2: SpectralField2) -> float:
    """Spectral H2 distance between the stream functions of two vorticities."""
    if omega1.grid != omega2.grid:
        raise ValueError("fields live on different grids")
    g = omega1.grid
    dpsi = g.inv_minus_k2 * (omega1.coeffs - omega2.coeffs)
    w = (1.0 + g.k2) ** 2
    return float(math.sqrt(g.lx * g.ly * np.sum(w * np.abs(dpsi) ** 2)))


def _stream_h2_norm_of_psi(psi: SpectralField2) -> float:
    g = psi.grid
    w = (1.0 + g.k2) ** 2
    return float(math.sqrt(g.lx * g.ly * np.sum(w * np.abs(psi.coeffs) ** 2)))


def arnold_certificate(steady: SteadyState, epsilon: float = 1e-3,
                       t_end: float = 20.0, seed: int = 0,
                       cfl: float = 0.4, diag_every: float = 0.5) -> dict:
    """Convexity certificate for a steady state, plus a perturbation run.

    Certified when F' stays positive over the attained range of psi.  The
    experiment evolves the steady vorticity plus a random band-limited
    perturbation of stream-level H2 size epsilon and records the largest
    H2 distance from the steady stream function over [0, t_end].
    """
    if not steady.converged:
        raise ValueError("certificate requires a converged steady state")
    grid = steady.psi.grid
    pv = steady.psi.values
    lo, hi = float(np.min(pv)), float(np.max(pv))
    samples = np.linspace(lo, hi, 401)
    min_fprime = float(np.min(steady.F_prime(samples)))
    certified = min_fprime > 0.0

    omega_star = SpectralField2.from_coeffs(grid, -grid.k2 * steady.psi.coeffs, check=False)

    rng = np.random.default_rng(seed)
    pc = to_coeffs(rng.normal(size=grid.shape))
    band = (np.abs(grid.mx)[:, None] <= 3) & (np.abs(grid.my)[None, :] <= 3)
    pc *= band
    eta_psi = SpectralField2.from_coeffs(grid, pc, check=False).project_mean_free()
    eta_psi = eta_psi * (1.0 / _stream_h2_norm_of_psi(eta_psi))
    eta_omega = SpectralField2.from_coeffs(grid, -grid.k2 * eta_psi.coeffs, check=False)

    omega_pert = omega_star + epsilon * eta_omega
    distances = []

    def observer(state: EulerState) -> None:
        distances.append(stream_h2_distance(state.omega, omega_star))

    run(omega_pert.project_mean_free(), t_end, cfl=cfl, diag_every=diag_every,
        casimirs=(), observer=observer)
    return {"certified": certified, "min_Fprime": min_fprime,
            "h2_initial": distances[0], "h2_max": float(np.max(distances)),
            "h2_series": np.array(distances)}


def kernel_probe(steady: SteadyState, n_values: int = 6,
                 kernel_rtol: float = 1e-8) -> dict:
    """Smallest singular values of the linearized steady operator.

    Assembles laplacian minus multiplication by F'(psi) densely on
    mean-free collocation fields (the constant mode is shifted out of the
    way) and reports the ``n_values`` smallest singular values, flagging a
    kernel when sigma_min < kernel_rtol * sigma_max.  Dense assembly is
    O(N^2) memory, so probe on modest grids.
    """
    if not steady.converged:
        raise ValueError("kernel probe requires a converged steady state")
    grid = steady.psi.grid
    n = grid.nx * grid.ny
    if n > 64 * 64:
        raise ValueError("kernel probe grid too large for dense assembly")
    fp = steady.F_prime(steady.psi.values).ravel()

    eye = np.eye(n)
    mat = np.empty((n, n))
    shift = float(np.max(grid.k2) + np.max(np.abs(fp)) + 1.0)
    for j in range(n):
        v = eye[j].reshape(grid.shape)
        vc = to_coeffs(v)
        vc[0, 0] = 0.0
        w = to_values(vc)
        col = to_values(-grid.k2 * vc) - fp.reshape(grid.shape) * w
        colc = to_coeffs(col)
        colc[0, 0] = 0.0
        mat[:, j] = to_values(colc).ravel()
    mat = 0.5 * (mat + mat.T)
    mat += (shift / n) * np.ones((n, n))  # move the constant mode off zero
    eigs = np.linalg.eigvalsh(mat)
    sigma = np.sort(np.abs(eigs))
    sigma_max = float(sigma[-1])
    smallest = [float(s) for s in sigma[:n_values]]
    return {"smallest_singular_values": smallest,
            "sigma_max": sigma_max,
            "kernel": smallest[0] < kernel_rtol * sigma_max}
