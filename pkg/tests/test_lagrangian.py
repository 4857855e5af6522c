"""Tests for particle advection, flow-map diagnostics, and scalar transport."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eulerlab import euler2d as e2, lagrangian as lag
from eulerlab.fields import SpectralField2, VectorField2, to_coeffs
from eulerlab.grids import Grid2

TWO_PI = 2.0 * np.pi


def field(g, fn):
    X, Y = g.meshgrid()
    return SpectralField2.from_values(g, fn(X, Y)).project_mean_free()


def random_band(g, seed, kmax, rms):
    rng = np.random.default_rng(seed)
    c = to_coeffs(rng.normal(size=g.shape))
    band = (np.abs(g.mx)[:, None] <= kmax) & (np.abs(g.my)[None, :] <= kmax)
    c *= band
    c[0, 0] = 0.0
    f = SpectralField2.from_coeffs(g, c, check=False)
    return f * (rms / math.sqrt(np.sum(np.abs(f.coeffs) ** 2)))


def cell_velocity(t, pts):
    x, y = pts[..., 0], pts[..., 1]
    return np.stack([np.cos(x) * np.sin(y), -np.sin(x) * np.cos(y)], axis=-1)


class TestVelocitySampler:
    def test_direct_summation_is_spectrally_exact(self):
        g = Grid2(32, 32)
        w = field(g, lambda X, Y: -2 * np.cos(X) * np.cos(Y))
        sampler = lag.VelocitySampler.from_field(e2.EulerState(w, 0.0).velocity())
        rng = np.random.default_rng(0)
        pts = rng.uniform(0.0, TWO_PI, size=(200, 2))
        got = sampler(pts)
        want = np.stack([np.cos(pts[:, 0]) * np.sin(pts[:, 1]),
                         -np.sin(pts[:, 0]) * np.cos(pts[:, 1])], axis=-1)
        assert np.max(np.abs(got - want)) < 1e-12

    def test_interpolation_mode_stays_accurate(self):
        g = Grid2(128, 128)
        w = field(g, lambda X, Y: -2 * np.cos(X) * np.cos(Y))
        sampler = lag.VelocitySampler.from_field(e2.EulerState(w, 0.0).velocity())
        rng = np.random.default_rng(1)
        pts = rng.uniform(0.0, TWO_PI, size=(400, 2))
        got = sampler(pts)
        want = np.stack([np.cos(pts[:, 0]) * np.sin(pts[:, 1]),
                         -np.sin(pts[:, 0]) * np.cos(pts[:, 1])], axis=-1)
        assert np.max(np.abs(got - want)) < 1e-4

    def test_points_outside_fundamental_cell_wrap(self):
        g = Grid2(32, 32)
        w = field(g, lambda X, Y: -2 * np.cos(X) * np.cos(Y))
        sampler = lag.VelocitySampler.from_field(e2.EulerState(w, 0.0).velocity())
        pts = np.array([[0.3, 0.8]])
        shifted = pts + np.array([[6 * np.pi, -4 * np.pi]])
        assert np.allclose(sampler(pts), sampler(shifted), atol=1e-12)


class TestAdvection:
    @given(a=st.floats(-2, 2), b=st.floats(-2, 2), steps=st.integers(1, 7))
    @settings(max_examples=15, deadline=None)
    def test_constant_velocity_translates_exactly(self, a, b, steps):
        p = lag.ParticleSet.lattice(8)

        def u(t, pts):
            return np.broadcast_to(np.array([a, b]), pts.shape).copy()

        q = lag.advect(p, u, 0.37, n_steps=steps)
        want = p.lifts0 + 0.37 * steps * np.array([a, b])
        assert np.max(np.abs(q.lifts - want)) < 1e-12
        assert q.t == pytest.approx(0.37 * steps)

    def test_positions_stay_wrapped(self):
        p = lag.ParticleSet.lattice(8)

        def u(t, pts):
            return np.broadcast_to(np.array([5.0, -3.0]), pts.shape).copy()

        q = lag.advect(p, u, 1.0, n_steps=13)
        assert np.all(q.positions >= 0.0) and np.all(q.positions < TWO_PI)

    def test_time_dependent_callable_sees_stage_times(self):
        # dx/dt = t has exact solution x0 + T^2/2 under RK4 (polynomial degree < 4)
        p = lag.ParticleSet.lattice(4)

        def u(t, pts):
            out = np.zeros(pts.shape)
            out[..., 0] = t
            return out

        q = lag.advect(p, u, 0.5, n_steps=8)
        assert np.max(np.abs(q.lifts[:, 0] - p.lifts0[:, 0] - 0.5 * 4.0 ** 2)) < 1e-12

    def test_rejects_unusable_velocity_source(self):
        p = lag.ParticleSet.lattice(4)
        with pytest.raises(TypeError, match="velocity_source"):
            lag.advect(p, object(), 0.1)


class TestTransportIdentity:
    def test_vorticity_rides_the_flow_map(self):
        g = Grid2(128, 128)
        w0 = random_band(g, 7, 4, 0.2)
        res = e2.run(w0, 3.0, cfl=0.4, diag_every=1.0, casimirs=(), marker_lattice=64)
        snap = res.marker_snapshots[-1]
        err = np.max(np.abs(res.final.omega.eval_at(snap.particles.positions)
                            - w0.eval_at(snap.particles.lifts0)))
        assert err < 2e-6


class TestFlowMapJacobian:
    def test_cellular_flow_stays_volume_preserving(self):
        devs = {}
        for m in (128, 256):
            p = lag.ParticleSet.lattice(m)
            q = lag.advect(p, cell_velocity, 0.01, n_steps=100)
            snap = lag.FlowMapSnapshot(q, TWO_PI / m, (m, m))
            jd = lag.jacobian_det(snap)
            devs[m] = jd["max_abs_dev_from_1"]
        assert devs[128] < 5e-3
        assert devs[128] / devs[256] > 3.0  # second-order lattice differences

    def test_deformation_magnitude_is_reported(self):
        p = lag.ParticleSet.lattice(128)
        q = lag.advect(p, cell_velocity, 0.01, n_steps=100)
        jd = lag.jacobian_det(lag.FlowMapSnapshot(q, TWO_PI / 128, (128, 128)))
        assert jd["grad_norm_inf"] == pytest.approx(2.715, abs=0.05)

    def test_folded_lattice_is_rejected(self):
        m = 16
        p = lag.ParticleSet.lattice(m)
        lifts = p.lifts0.copy()
        grid_idx = np.arange(m * m).reshape(m, m)
        # swap two columns one apart: the centered stencil between them sees
        # a reversed orientation, so the determinant check must fail loudly
        # (adjacent swaps cancel out of central differences entirely)
        lifts[grid_idx[:, 3]], lifts[grid_idx[:, 5]] = (
            p.lifts0[grid_idx[:, 5]], p.lifts0[grid_idx[:, 3]])
        folded = lag.ParticleSet(p.wrapped(lifts), lifts, p.lifts0.copy(),
                                 1.0, TWO_PI, TWO_PI)
        with pytest.raises(ValueError, match="folding"):
            lag.jacobian_det(lag.FlowMapSnapshot(folded, TWO_PI / m, (m, m)))


class TestWinding:
    def test_linear_shear_winding_is_exact(self):
        def u(t, pts):
            y = pts[..., 1]
            return np.stack([y, np.zeros_like(y)], axis=-1)

        m = 32
        T = 100.0 * np.pi
        p = lag.advect(lag.ParticleSet.lattice(m), u, T / 64, n_steps=64)
        rec = lag.winding(p)
        # lattice heights are 2*pi*j/m, so the spread of y is 2*pi*(m-1)/m
        target = T * (m - 1) / m
        assert abs(rec.spread - target) / target < 1e-12
        assert np.max(np.abs(rec.numbers - p.lifts0[:, 1] * T / TWO_PI)) < 1e-9

    def test_rigid_translation_has_no_spread(self):
        def u(t, pts):
            return np.stack([np.full(pts.shape[:-1], 0.7),
                             np.zeros(pts.shape[:-1])], axis=-1)

        p = lag.advect(lag.ParticleSet.lattice(8), u, 1.0, n_steps=50)
        rec = lag.winding(p)
        assert rec.spread < 1e-12
        assert np.max(np.abs(rec.numbers - 0.7 * 50.0 / TWO_PI)) < 1e-12
        assert np.all(rec.integer_numbers == 5)

    def test_twisting_series_from_run(self):
        g = Grid2(64, 64)
        w = field(g, lambda X, Y: np.cos(Y))
        res = e2.run(w, 2.0, diag_every=0.5, casimirs=(), marker_lattice=16)
        ts, spreads = lag.twisting_series(res)
        assert np.allclose(ts, [0.0, 0.5, 1.0, 1.5, 2.0], atol=1e-9)
        assert spreads[0] == 0.0
        assert np.all(np.diff(spreads) > 0)
        with pytest.raises(ValueError, match="snapshot"):
            lag.twisting_series([])


class TestStabilityMetrics:
    def test_unperturbed_shear_has_zero_drift(self):
        g = Grid2(64, 64)
        w = field(g, lambda X, Y: np.cos(Y))
        res = e2.run(w, 2.0, diag_every=0.5, casimirs=(), marker_lattice=32)
        # vorticity cos y integrates to the drift profile u1 = -sin y
        met = lag.lagrangian_stability_metrics(res, lambda y: -np.sin(y))
        assert np.max(met["m1"]) < 1e-12
        assert np.max(met["m2"]) < 1e-12


def envelope_exponent(ts, p, lo=10.0, hi=80.0, nbin=7):
    """log-log slope of per-bin maxima of |p|: the oscillation-proof decay fit."""
    edges = np.linspace(lo, hi, nbin + 1)
    mids, tops = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        m = (ts >= a) & (ts <= b)
        if m.any():
            mids.append(0.5 * (a + b))
            tops.append(np.max(np.abs(p[m])))
    return np.polyfit(np.log(mids), np.log(tops), 1)[0]


class TestMixing:
    def setup_method(self):
        self.g = Grid2(16, 512)
        X, Y = self.g.meshgrid()
        self.u_shear = VectorField2.from_values(self.g, np.sin(Y), np.zeros_like(Y))
        self.u_const = VectorField2.from_values(self.g, np.ones_like(Y), np.zeros_like(Y))
        self.f0 = SpectralField2.from_values(self.g, np.cos(X))
        # amplitude vanishing to second order at the shear's turning points:
        # the pairing has the closed form 2*pi^2*(J1(t)+J3(t))
        self.phi = SpectralField2.from_values(
            self.g, 2.0 * (1.0 + np.cos(2 * Y)) * np.cos(X))

    def test_shear_pairing_matches_bessel_series(self):
        from scipy.special import jv

        res = lag.passive_scalar_evolve(self.u_shear, self.f0, 80.0,
                                        test_functions=[self.phi],
                                        cfl=0.4, diag_every=1.0)
        pex = 2 * np.pi ** 2 * (jv(1, res.times) + jv(3, res.times))
        assert np.max(np.abs(res.pairings[0] - pex)) < 5e-4

    def test_shear_pairing_envelope_decays(self):
        res = lag.passive_scalar_evolve(self.u_shear, self.f0, 80.0,
                                        test_functions=[self.phi],
                                        cfl=0.4, diag_every=1.0)
        assert envelope_exponent(res.times, res.pairings[0]) <= -0.8

    def test_uniform_flow_pairing_never_decays(self):
        res = lag.passive_scalar_evolve(self.u_const, self.f0, 80.0,
                                        test_functions=[self.phi],
                                        cfl=0.4, diag_every=1.0)
        p = res.pairings[0]
        pex = 4 * np.pi ** 2 * np.sin(res.times)
        assert np.max(np.abs(p - pex)) < 0.05
        assert abs(envelope_exponent(res.times, p)) < 0.1
        late = np.max(np.abs(p[res.times >= 70.0]))
        early = np.max(np.abs(p[res.times <= 10.0]))
        assert late > 0.5 * early

    def test_grid_mismatch_rejected(self):
        other = SpectralField2.zeros(Grid2(16, 16))
        with pytest.raises(ValueError, match="grids"):
            lag.passive_scalar_evolve(self.u_shear, other, 1.0)


def vortex_velocity(t, pts):
    # stream function sin(x)sin(y): a center sits at (pi/2, pi/2)
    x, y = pts[..., 0], pts[..., 1]
    return np.stack([-np.sin(x) * np.cos(y), np.cos(x) * np.sin(y)], axis=-1)


class TestPeriodFunction:
    def test_shear_orbits_have_reciprocal_speed_periods(self):
        def u(t, pts):
            y = pts[..., 1]
            return np.stack([np.sin(y), np.zeros_like(y)], axis=-1)

        seeds = np.array([[0.0, 0.7], [0.0, 1.2], [0.0, np.pi / 2]])
        per = np.asarray(lag.period_function(u, seeds, dt=1e-3))
        exact = TWO_PI / np.abs(np.sin(seeds[:, 1]))
        assert np.max(np.abs(per - exact)) < 1e-10

    def test_cellular_orbit_periods_match_ode_oracle(self):
        from scipy.integrate import solve_ivp

        svals = np.linspace(0.1, 1.0, 10)
        seeds = np.stack([np.pi / 2 + svals, np.full(10, np.pi / 2)], axis=1)
        per = np.asarray(lag.period_function(vortex_velocity, seeds, dt=1e-3))

        def rhs(t, z):
            return [-np.sin(z[0]) * np.cos(z[1]), np.cos(z[0]) * np.sin(z[1])]

        def section(t, z):
            return z[1] - np.pi / 2
        section.direction = -1.0

        oracle = []
        for s in svals:
            sol = solve_ivp(rhs, (0.0, 40.0), [np.pi / 2 + s, np.pi / 2],
                            rtol=1e-11, atol=1e-12, events=section)
            oracle.append([t for t in sol.t_events[0] if t > 1.0][0])
        assert np.max(np.abs(per - np.asarray(oracle))) < 1e-5
        # the period is nowhere locally constant: strictly monotone in orbit size,
        # approaching the harmonic value 2*pi at the cell center
        assert np.all(np.diff(per) > 0)
        assert 1.0 < per[0] / TWO_PI < 1.01

    def test_stagnation_points_never_return(self):
        seeds = np.array([[0.0, 0.0], [np.pi / 2, np.pi / 2]])
        per = lag.period_function(vortex_velocity, seeds, dt=1e-3, t_max=5.0)
        assert all(math.isinf(p) for p in per)


class TestGradientGrowth:
    def test_shear_gradient_grows_like_its_closed_form(self):
        g = Grid2(16, 512)
        X, Y = g.meshgrid()
        w = SpectralField2.from_values(g, np.cos(Y)).project_mean_free()
        f0 = SpectralField2.from_values(g, np.cos(X))
        res = e2.run(w, 80.0, cfl=0.4, diag_every=2.0, casimirs=(),
                     scalars={"dye": f0})
        gr = lag.gradient_growth(res, fit_window=(10.0, 80.0))
        exact = np.sqrt(1.0 + gr["t"] ** 2)
        assert np.max(np.abs(gr["series"]["dye"] - exact)) < 1e-10

    def test_quiescent_flow_freezes_the_gradient(self):
        g = Grid2(32, 32)
        X, _ = g.meshgrid()
        res = e2.run(SpectralField2.zeros(g), 20.0, diag_every=2.0, casimirs=(),
                     scalars={"dye": SpectralField2.from_values(g, np.cos(X))})
        gr = lag.gradient_growth(res, fit_window=(2.0, 20.0))
        assert abs(gr["rates"]["dye"]) < 1e-15
        assert np.ptp(gr["series"]["dye"]) < 1e-12

    def test_cellular_perturbed_flow_stretches_the_dye(self):
        g = Grid2(64, 64)
        X, Y = g.meshgrid()
        w = SpectralField2.from_values(
            g, -2 * np.cos(X) * np.cos(Y) + 0.3 * np.cos(2 * X) * np.cos(Y)
        ).project_mean_free()
        f0 = SpectralField2.from_values(g, np.cos(X))
        res = e2.run(w, 10.0, diag_every=1.0, casimirs=(), scalars={"dye": f0})
        gr = lag.gradient_growth(res, fit_window=(1.0, 10.0))
        assert gr["rates"]["dye"] > 0.05
        assert gr["series"]["dye"][-1] / gr["series"]["dye"][0] > 5.0

    def test_run_without_scalars_is_rejected(self):
        g = Grid2(32, 32)
        _, Y = g.meshgrid()
        res = e2.run(SpectralField2.from_values(g, np.cos(Y)).project_mean_free(),
                     1.0, diag_every=0.5, casimirs=())
        with pytest.raises(ValueError, match="scalar"):
            lag.gradient_growth(res)
