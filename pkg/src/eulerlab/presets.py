"""Named initial data shared by the CLI and the test suite.

Every preset is a deterministic function of (name, params, seed): calling
it twice with the same arguments yields bit-identical fields, which is
what makes rerun checksum tests meaningful.
"""

from __future__ import annotations

import math

import numpy as np

from .fields import SpectralField1, SpectralField2, VectorField2, to_coeffs
from .grids import Grid1, Grid2


def taylor_green(grid: Grid2) -> SpectralField2:
    """Cellular vorticity -2 cos x cos y (a steady state of 2D Euler)."""
    X, Y = grid.meshgrid()
    return SpectralField2.from_values(grid, -2.0 * np.cos(X) * np.cos(Y)).project_mean_free()


def couette_modes() -> list[tuple[int, float, float]]:
    """Default shear-frame band for linearized-shear runs: one ky=1 mode."""
    return [(1, 0.0, 1.0)]


def clm_cosine(grid: Grid1, amplitude: float = 1.0) -> SpectralField1:
    """Cosine datum for the 1D models; closed-form evolution known."""
    return SpectralField1.from_values(grid, amplitude * np.cos(grid.x))


def random_bandlimited(grid: Grid2, seed: int, kmax: int = 4,
                       rms: float = 0.2) -> SpectralField2:
    """Mean-free band-limited noise with coefficient-l2 size ``rms``."""
    if kmax < 1 or kmax > min(grid.nx, grid.ny) // 3:
        raise ValueError("kmax must lie inside the dealiased band")
    rng = np.random.default_rng(seed)
    c = to_coeffs(rng.normal(size=grid.shape))
    band = (np.abs(grid.mx)[:, None] <= kmax) & (np.abs(grid.my)[None, :] <= kmax)
    c *= band
    c[0, 0] = 0.0
    f = SpectralField2.from_coeffs(grid, c, check=False)
    scale = math.sqrt(float(np.sum(np.abs(f.coeffs) ** 2)))
    if scale == 0.0:
        raise ValueError("empty band")
    return f * (rms / scale)


def taylor_green_perturbed(grid: Grid2, eps: float = 0.3) -> SpectralField2:
    """Cellular steady state plus an eps cos 2x cos y defect.

    The defect breaks stationarity, so markers transported by the run
    see a genuinely time-dependent flow map (the Lagrangian invariant
    checks need that).
    """
    X, Y = grid.meshgrid()
    w = -2.0 * np.cos(X) * np.cos(Y) + eps * np.cos(2.0 * X) * np.cos(Y)
    return SpectralField2.from_values(grid, w).project_mean_free()


def shear_plus_band(grid: Grid2, seed: int, kmax: int = 3,
                    rms: float = 0.02) -> SpectralField2:
    """Sinusoidal shear vorticity cos y plus seeded band noise.

    The periodic stand-in for an eps-perturbed linear shear: the shear
    sets the winding rates, the band is the perturbation.
    """
    _, Y = grid.meshgrid()
    base = SpectralField2.from_values(grid, np.cos(Y))
    return (base + random_bandlimited(grid, seed, kmax=kmax, rms=rms)).project_mean_free()


def _interface_bump(Y: np.ndarray) -> np.ndarray:
    # horizontal perturbation envelope peaked at y = pi, ~3e-4 at y = 0:
    # localizing the seed is what makes the heavy/light contrast a real
    # experiment (a y-uniform seed hits both layers of any periodic
    # stratification equally, and the two runs become y-translates)
    return np.exp(-4.0 * (np.cos(Y) + 1.0))


def heavy_over_light(grid: Grid2, eps: float = 1e-2) -> SpectralField2:
    """Stratified density with the heavy layer above the y = pi interface."""
    X, Y = grid.meshgrid()
    rho = -np.sin(Y) + eps * np.cos(X) * _interface_bump(Y)
    return SpectralField2.from_values(grid, rho)


def light_over_heavy(grid: Grid2, eps: float = 1e-2) -> SpectralField2:
    """The stable orientation, seeded at the same interface."""
    X, Y = grid.meshgrid()
    rho = np.sin(Y) + eps * np.cos(X) * _interface_bump(Y)
    return SpectralField2.from_values(grid, rho)


def stratified_rest(grid: Grid2) -> SpectralField2:
    """Pure y-stratification: the induced velocity vanishes identically."""
    _, Y = grid.meshgrid()
    return SpectralField2.from_values(grid, -np.sin(Y))


def shear_sin(grid: Grid2) -> VectorField2:
    """Steady shear (sin y, 0) for mixing runs."""
    _, Y = grid.meshgrid()
    return VectorField2.from_values(grid, np.sin(Y), np.zeros_like(Y))


def uniform_flow(grid: Grid2) -> VectorField2:
    """Constant (1, 0): every orbit has the same period (no mixing)."""
    _, Y = grid.meshgrid()
    return VectorField2.from_values(grid, np.ones_like(Y), np.zeros_like(Y))


def cos_x_scalar(grid: Grid2) -> SpectralField2:
    X, _ = grid.meshgrid()
    return SpectralField2.from_values(grid, np.cos(X))


def bessel_pair_test_function(grid: Grid2) -> SpectralField2:
    """Pairing weight 2 (1 + cos 2y) cos x.

    Against the (sin y, 0) shear and the cos x scalar the pairing series
    has the closed form 2 pi^2 (J1(t) + J3(t)): the weight vanishes to
    second order at the shear's turning points, which is what buys a
    decay faster than the bare stationary-phase t^(-1/2).
    """
    X, Y = grid.meshgrid()
    return SpectralField2.from_values(grid, 2.0 * (1.0 + np.cos(2.0 * Y)) * np.cos(X))


PRESETS = {
    "taylor_green": "euler2d: cellular steady vorticity -2 cos x cos y",
    "taylor_green_perturbed": "euler2d: cellular state plus eps cos 2x cos y defect",
    "shear_plus_band": "euler2d: cos y shear plus seeded band noise (seed, kmax, rms)",
    "random_bandlimited": "euler2d: seeded mean-free band noise (seed, kmax, rms)",
    "couette": "couette_linear: default single ky=1 shear-frame band",
    "clm_cosine": "clm/degregorio: amplitude * cos x datum",
    "heavy_over_light": "ipm: unstable stratification, seeded interface at y=pi",
    "light_over_heavy": "ipm: stable orientation, same seeded interface",
    "stratified_rest": "ipm: pure y-stratification (exact rest state)",
    "shear_sin": "passive_scalar velocity: (sin y, 0)",
    "uniform": "passive_scalar velocity: (1, 0) constant",
    "bessel_pair": "passive_scalar test function with closed-form pairing",
}


def init_library(name: str, grid=None, **params):
    """Build a named preset; unknown names raise ValueError."""
    builders = {
        "taylor_green": lambda: taylor_green(grid),
        "taylor_green_perturbed": lambda: taylor_green_perturbed(
            grid, params.get("eps", 0.3)),
        "shear_plus_band": lambda: shear_plus_band(
            grid, seed=params.get("seed", 0), kmax=params.get("kmax", 3),
            rms=params.get("rms", 0.02)),
        "random_bandlimited": lambda: random_bandlimited(
            grid, seed=params.get("seed", 0), kmax=params.get("kmax", 4),
            rms=params.get("rms", 0.2)),
        "couette": lambda: couette_modes(),
        "clm_cosine": lambda: clm_cosine(grid, params.get("amplitude", 1.0)),
        "heavy_over_light": lambda: heavy_over_light(grid, params.get("eps", 1e-2)),
        "light_over_heavy": lambda: light_over_heavy(grid, params.get("eps", 1e-2)),
        "stratified_rest": lambda: stratified_rest(grid),
        "shear_sin": lambda: shear_sin(grid),
        "uniform": lambda: uniform_flow(grid),
        "bessel_pair": lambda: bessel_pair_test_function(grid),
    }
    if name not in builders:
        raise ValueError(f"unknown preset {name!r}; known: {', '.join(sorted(builders))}")
    return builders[name]()
