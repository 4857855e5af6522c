"""Real periodic scalar/vector fields stored as complex Fourier coefficients.

Transforms use numpy's ``norm="forward"`` convention, so ``coeffs[0, 0]``
is the mean of the field and Parseval reads

    integral of f^2 over the cell  ==  lx * ly * sum(|coeffs|^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import Grid1, Grid2

#: relative threshold below which a mean coefficient counts as zero
MEAN_TOL = 1e-13

_EVAL_CHUNK = 4096


def to_coeffs(values: np.ndarray) -> np.ndarray:
    """Physical samples -> Fourier coefficients (any dimensionality)."""
    return np.fft.fftn(values, norm="forward")


def to_values(coeffs: np.ndarray) -> np.ndarray:
    """Fourier coefficients of a real field -> physical samples."""
    return np.fft.ifftn(coeffs, norm="forward").real


def hermitian_defect(coeffs: np.ndarray) -> float:
    """Max deviation from coeff(-k) == conj(coeff(k)); zero for real fields."""
    flipped = coeffs
    for axis in range(coeffs.ndim):
        n = coeffs.shape[axis]
        idx = (-np.arange(n)) % n
        flipped = np.take(flipped, idx, axis=axis)
    return float(np.max(np.abs(coeffs - np.conj(flipped))))


def _normalize(coeffs: np.ndarray) -> tuple[np.ndarray, bool]:
    """Cast to complex128 and snap a round-off-level mean to exactly zero."""
    c = np.ascontiguousarray(coeffs, dtype=np.complex128).copy()
    flat0 = (0,) * c.ndim
    scale = float(np.max(np.abs(c)))
    mean_free = bool(abs(c[flat0]) <= MEAN_TOL * scale)
    if mean_free:
        c[flat0] = 0.0
    return c, mean_free


def _check_hermitian(coeffs: np.ndarray) -> None:
    scale = float(np.max(np.abs(coeffs)))
    if scale > 0.0 and hermitian_defect(coeffs) > 1e-10 * scale:
        raise ValueError("coefficients are not Hermitian-symmetric (field would not be real)")


@dataclass(frozen=True)
class SpectralField2:
    """
    Real scalar field on a :class:`Grid2`, held as complex coefficients
    indexed ``[mx, my]`` in FFT ordering.

    Instances are immutable; operations return new fields.
    """

    grid: Grid2
    coeffs: np.ndarray
    mean_free: bool

    def __post_init__(self) -> None:
        if self.coeffs.shape != self.grid.shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match grid {self.grid.shape}"
            )

    # -- constructors ---------------------------------------------------

    @classmethod
    def from_values(cls, grid: Grid2, values: np.ndarray) -> "SpectralField2":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != grid.shape:
            raise ValueError(f"value shape {values.shape} does not match grid {grid.shape}")
        coeffs, mean_free = _normalize(to_coeffs(values))
        return cls(grid, coeffs, mean_free)

    @classmethod
    def from_coeffs(cls, grid: Grid2, coeffs: np.ndarray, check: bool = True) -> "SpectralField2":
        coeffs = np.asarray(coeffs)
        if coeffs.shape != grid.shape:
            raise ValueError(f"coefficient shape {coeffs.shape} does not match grid {grid.shape}")
        if check:
            _check_hermitian(coeffs)
        c, mean_free = _normalize(coeffs)
        return cls(grid, c, mean_free)

    @classmethod
    def zeros(cls, grid: Grid2) -> "SpectralField2":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128), True)

    # -- views and reductions -------------------------------------------

    @property
    def values(self) -> np.ndarray:
        """Physical samples on the collocation grid, shape (nx, ny)."""
        return to_values(self.coeffs)

    @property
    def mean(self) -> float:
        return float(self.coeffs[0, 0].real)

    def norm_l2(self) -> float:
        """Domain-integral L2 norm, sqrt(integral f^2)."""
        g = self.grid
        return float(np.sqrt(g.lx * g.ly * np.sum(np.abs(self.coeffs) ** 2)))

    def norm_inf(self) -> float:
        """Max |f| over collocation points (a lower bound for the true sup)."""
        return float(np.max(np.abs(self.values)))

    def project_mean_free(self) -> "SpectralField2":
        c = self.coeffs.copy()
        c[0, 0] = 0.0
        return SpectralField2(self.grid, c, True)

    # -- arithmetic ------------------------------------------------------

    def _binary(self, other: "SpectralField2", sign: float) -> "SpectralField2":
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
        c = self.coeffs + sign * other.coeffs
        return SpectralField2(self.grid, c, bool(abs(c[0, 0]) == 0.0))

    def __add__(self, other: "SpectralField2") -> "SpectralField2":
        return self._binary(other, 1.0)

    def __sub__(self, other: "SpectralField2") -> "SpectralField2":
        return self._binary(other, -1.0)

    def __mul__(self, scalar: float) -> "SpectralField2":
        return SpectralField2(self.grid, self.coeffs * float(scalar), self.mean_free)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField2":
        return self * -1.0

    # -- point evaluation -------------------------------------------------

    def eval_at(self, points: np.ndarray) -> np.ndarray:
        """
        Evaluate the trigonometric interpolant at arbitrary points.

        Parameters
        ----------
        points : (p, 2) array
            Locations; periodicity makes wrapping unnecessary.
        """
        return _eval_modes_2d(self.coeffs, self.grid, np.asarray(points, dtype=np.float64))


def _eval_modes_2d(coeffs: np.ndarray, grid: Grid2, points: np.ndarray) -> np.ndarray:
    out = np.empty(points.shape[0])
    kx, ky = grid.kx, grid.ky
    for start in range(0, points.shape[0], _EVAL_CHUNK):
        sl = slice(start, start + _EVAL_CHUNK)
        ex = np.exp(1j * np.outer(points[sl, 0], kx))
        ey = np.exp(1j * np.outer(points[sl, 1], ky))
        out[sl] = np.einsum("pk,kl,pl->p", ex, coeffs, ey).real
    return out


@dataclass(frozen=True)
class SpectralField1:
    """Real scalar field on the circle (:class:`Grid1`), complex coefficients."""

    grid: Grid1
    coeffs: np.ndarray
    mean_free: bool

    def __post_init__(self) -> None:
        if self.coeffs.shape != (self.grid.n,):
            raise ValueError("coefficient length does not match grid")

    @classmethod
    def from_values(cls, grid: Grid1, values: np.ndarray) -> "SpectralField1":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (grid.n,):
            raise ValueError("value length does not match grid")
        coeffs, mean_free = _normalize(to_coeffs(values))
        return cls(grid, coeffs, mean_free)

    @classmethod
    def from_coeffs(cls, grid: Grid1, coeffs: np.ndarray, check: bool = True) -> "SpectralField1":
        coeffs = np.asarray(coeffs)
        if coeffs.shape != (grid.n,):
            raise ValueError("coefficient length does not match grid")
        if check:
            _check_hermitian(coeffs)
        c, mean_free = _normalize(coeffs)
        return cls(grid, c, mean_free)

    @classmethod
    def zeros(cls, grid: Grid1) -> "SpectralField1":
        return cls(grid, np.zeros(grid.n, dtype=np.complex128), True)

    @property
    def values(self) -> np.ndarray:
        return to_values(self.coeffs)

    @property
    def mean(self) -> float:
        return float(self.coeffs[0].real)

    def norm_l2(self) -> float:
        return float(np.sqrt(self.grid.length * np.sum(np.abs(self.coeffs) ** 2)))

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.values)))

    def eval_at(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_1d(np.asarray(points, dtype=np.float64))
        nz = np.flatnonzero(self.coeffs)  # dealiased fields are 1/3 zeros
        k, cz = self.grid.k[nz], self.coeffs[nz]
        out = np.empty(points.shape[0])
        for start in range(0, points.shape[0], _EVAL_CHUNK):
            sl = slice(start, start + _EVAL_CHUNK)
            ex = np.exp(1j * np.outer(points[sl], k))
            out[sl] = (ex @ cz).real
        return out

    def __add__(self, other: "SpectralField1") -> "SpectralField1":
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
        c = self.coeffs + other.coeffs
        return SpectralField1(self.grid, c, bool(abs(c[0]) == 0.0))

    def __sub__(self, other: "SpectralField1") -> "SpectralField1":
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
        c = self.coeffs - other.coeffs
        return SpectralField1(self.grid, c, bool(abs(c[0]) == 0.0))

    def __mul__(self, scalar: float) -> "SpectralField1":
        return SpectralField1(self.grid, self.coeffs * float(scalar), self.mean_free)

    __rmul__ = __mul__


@dataclass(frozen=True)
class VectorField2:
    """Velocity-like pair of scalar fields (u1, u2) on a shared grid."""

    u1: SpectralField2
    u2: SpectralField2

    def __post_init__(self) -> None:
        if self.u1.grid != self.u2.grid:
            raise ValueError("vector components live on different grids")

    @classmethod
    def from_values(cls, grid: Grid2, v1: np.ndarray, v2: np.ndarray) -> "VectorField2":
        return cls(SpectralField2.from_values(grid, v1), SpectralField2.from_values(grid, v2))

    @classmethod
    def zeros(cls, grid: Grid2) -> "VectorField2":
        return cls(SpectralField2.zeros(grid), SpectralField2.zeros(grid))

    @property
    def grid(self) -> Grid2:
        return self.u1.grid

    @property
    def values(self) -> tuple[np.ndarray, np.ndarray]:
        return self.u1.values, self.u2.values

    def eval_at(self, points: np.ndarray) -> np.ndarray:
        """Evaluate both components at (p, 2) points; returns (p, 2)."""
        pts = np.asarray(points, dtype=np.float64)
        return np.stack([self.u1.eval_at(pts), self.u2.eval_at(pts)], axis=1)

    def norm_l2(self) -> float:
        return float(np.hypot(self.u1.norm_l2(), self.u2.norm_l2()))

    def norm_inf(self) -> float:
        """Max of componentwise sup norms on the collocation grid."""
        return max(self.u1.norm_inf(), self.u2.norm_inf())

    def __add__(self, other: "VectorField2") -> "VectorField2":
        return VectorField2(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "VectorField2") -> "VectorField2":
        return VectorField2(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, scalar: float) -> "VectorField2":
        return VectorField2(self.u1 * scalar, self.u2 * scalar)

    __rmul__ = __mul__


def l2_inner(f: SpectralField2, g: SpectralField2) -> float:
    """Domain-integral L2 inner product of two real fields."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    return float(f.grid.lx * f.grid.ly * np.sum(np.conj(f.coeffs) * g.coeffs).real)


def _resample_axis(coeffs: np.ndarray, n_dst: int, axis: int) -> np.ndarray:
    """Band-limited resampling (zero padding / truncation) along one axis."""
    n_src = coeffs.shape[axis]
    if n_src == n_dst:
        return coeffs
    shape = list(coeffs.shape)
    shape[axis] = n_dst
    out = np.zeros(shape, dtype=np.complex128)

    def take(arr: np.ndarray, idx: int) -> np.ndarray:
        return np.take(arr, idx % arr.shape[axis], axis=axis)

    def put(idx: int, val: np.ndarray) -> None:
        sl: list = [slice(None)] * out.ndim
        sl[axis] = idx % n_dst
        out[tuple(sl)] = val

    h = min(n_src, n_dst) // 2
    # modes 0 .. h-1 and -1 .. -(h-1)
    src_lo = [slice(None)] * coeffs.ndim
    src_lo[axis] = slice(0, h)
    dst_lo = [slice(None)] * out.ndim
    dst_lo[axis] = slice(0, h)
    out[tuple(dst_lo)] = coeffs[tuple(src_lo)]
    if h > 1:
        src_hi = [slice(None)] * coeffs.ndim
        src_hi[axis] = slice(n_src - (h - 1), n_src)
        dst_hi = [slice(None)] * out.ndim
        dst_hi[axis] = slice(n_dst - (h - 1), n_dst)
        out[tuple(dst_hi)] = coeffs[tuple(src_hi)]
    # shared Nyquist mode m = -h: split on upsampling, fold on downsampling
    # (the half/half split preserves Hermitian symmetry because the source
    # Nyquist slab is itself conjugate-symmetric along the other axes)
    if n_dst > n_src:
        nyq = take(coeffs, -h)
        put(-h, 0.5 * nyq)
        put(h, 0.5 * nyq)
    else:
        put(-h, take(coeffs, -h) + take(coeffs, h))
    return out


def resample(field: SpectralField2, nx: int, ny: int) -> SpectralField2:
    """
    Re-express a field on an (nx, ny) grid over the same domain by spectral
    zero padding (upsampling) or mode truncation (downsampling).
    """
    g = field.grid
    new_grid = Grid2(nx, ny, g.lx, g.ly)
    c = _resample_axis(field.coeffs, nx, axis=0)
    c = _resample_axis(c, ny, axis=1)
    return SpectralField2.from_coeffs(new_grid, c, check=False)
