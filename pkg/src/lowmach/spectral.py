"""Spectral core for the periodic torus [0, 2pi)^n, n in {1, 2}.

Fields live on uniform collocation grids; coefficients are Fourier series
coefficients, so the constant field 1 has coefficient 1 at k = 0 and
cos(x) has coefficient 1/2 at k = +-1.  The integer wavevector lattice is
{-N/2+1, ..., N/2} per axis.  With this convention Parseval reads

    ||f||_{L2}^2 = (2pi)^n * sum_k |c_k|^2

and the Sobolev norm of order s carries the same volume factor, so the
order-0 Sobolev norm coincides with the quadrature L2 norm to round-off.

The Nyquist column k = N/2 is zeroed in every differentiation multiplier;
products are kept alias-free with the standard 2/3-rule mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import GridMismatchError

_TWO_PI = 2.0 * np.pi


def _int_wavenumbers(resolution: int) -> np.ndarray:
    # layout matches numpy's FFT ordering, with +N/2 (not -N/2) at Nyquist
    k = np.arange(resolution, dtype=np.int64)
    k[k > resolution // 2] -= resolution
    return k


@dataclass(frozen=True)
class TorusGrid:
    """Uniform collocation grid with cached spectral machinery.

    Instances are immutable and cheap to compare; the cached arrays are
    read-only and safe to share between threads or worker processes.
    """

    dimension: int
    resolution: int
    dealias_fraction: Fraction = Fraction(2, 3)
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.resolution < 8 or self.resolution % 2:
            raise ValueError(
                f"resolution must be even and >= 8, got {self.resolution}")
        if not isinstance(self.dealias_fraction, Fraction):
            object.__setattr__(self, "dealias_fraction",
                               Fraction(self.dealias_fraction).limit_denominator(64))
        if not 0 < self.dealias_fraction <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")
        self._build()

    def _build(self):
        n, N = self.dimension, self.resolution
        shape = (N,) * n
        x1 = np.arange(N) * (_TWO_PI / N)
        coords = np.meshgrid(*([x1] * n), indexing="ij")
        k1 = _int_wavenumbers(N)
        kgrids = np.meshgrid(*([k1] * n), indexing="ij")
        k_int = np.stack(kgrids).astype(np.int64)
        k2_int = np.sum(k_int * k_int, axis=0)
        absk = np.sqrt(k2_int.astype(np.float64))
        khat = np.zeros((n,) + shape)
        nonzero = k2_int > 0
        for j in range(n):
            khat[j][nonzero] = k_int[j][nonzero] / absk[nonzero]
        # derivative multiplier ik with the Nyquist column zeroed per axis
        ik = 1j * k_int.astype(np.float64)
        for j in range(n):
            ik[j][np.abs(k_int[j]) == N // 2] = 0.0
        inv_k2 = np.zeros(shape)
        inv_k2[nonzero] = 1.0 / k2_int[nonzero]
        # exact rational cutoff: |k|_inf strictly above frac*N/2 is zeroed
        cutoff = (self.dealias_fraction * N) / 2
        kmax_band = int(cutoff)  # floor for positive rationals
        keep = np.max(np.abs(k_int), axis=0) <= kmax_band
        cache = self._cache
        cache["shape"] = shape
        cache["coords"] = np.stack(coords)
        cache["k_int"] = k_int
        cache["k2_int"] = k2_int
        cache["absk"] = absk
        cache["khat"] = khat
        cache["ik"] = ik
        cache["inv_k2"] = inv_k2
        cache["dealias_mask"] = keep
        cache["band_limit"] = kmax_band
        for arr in cache.values():
            if isinstance(arr, np.ndarray):
                arr.setflags(write=False)

    # cached views -------------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self._cache["shape"]

    @property
    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape (dimension, N, ...)."""
        return self._cache["coords"]

    @property
    def wavevectors(self) -> np.ndarray:
        """Integer wavevectors in FFT layout, shape (dimension, N, ...)."""
        return self._cache["k_int"]

    @property
    def wavenumber_sq(self) -> np.ndarray:
        return self._cache["k2_int"]

    @property
    def wavenumber(self) -> np.ndarray:
        return self._cache["absk"]

    @property
    def unit_wavevectors(self) -> np.ndarray:
        """k/|k| with the zero mode mapped to 0."""
        return self._cache["khat"]

    @property
    def derivative_multiplier(self) -> np.ndarray:
        return self._cache["ik"]

    @property
    def inverse_wavenumber_sq(self) -> np.ndarray:
        return self._cache["inv_k2"]

    @property
    def dealias_mask(self) -> np.ndarray:
        return self._cache["dealias_mask"]

    @property
    def band_limit(self) -> int:
        """Largest retained |k|_inf after dealiasing."""
        return self._cache["band_limit"]

    @property
    def cell_volume(self) -> float:
        return (_TWO_PI / self.resolution) ** self.dimension

    @property
    def volume(self) -> float:
        return _TWO_PI ** self.dimension

    def axes(self) -> tuple:
        return tuple(range(-self.dimension, 0))


# field containers -------------------------------------------------------


@dataclass
class ScalarField:
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(
                f"scalar values shape {self.values.shape} does not match "
                f"grid shape {self.grid.shape}")

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def mean(self):
        return self.values.mean()


@dataclass
class VectorField:
    grid: TorusGrid
    values: np.ndarray  # shape (dimension, N, ...)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        expected = (self.grid.dimension,) + self.grid.shape
        if self.values.shape != expected:
            raise GridMismatchError(
                f"vector values shape {self.values.shape} does not match "
                f"expected {expected}")

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def mean(self) -> np.ndarray:
        return self.values.mean(axis=self.grid.axes())


@dataclass
class SpectralCoefficients:
    """Fourier series coefficients of a scalar (arity 0) or vector field."""

    grid: TorusGrid
    coeffs: np.ndarray
    arity: int = 0
    hermitian: bool = False  # input field was real-valued

    def __post_init__(self):
        expected = self.grid.shape if self.arity == 0 \
            else (self.grid.dimension,) + self.grid.shape
        if self.coeffs.shape != expected:
            raise GridMismatchError(
                f"coefficient shape {self.coeffs.shape} does not match "
                f"expected {expected}")


def same_grid(*objs):
    grids = {o.grid for o in objs}
    if len(grids) > 1:
        raise GridMismatchError("fields live on different grids")


# raw-array transform helpers (shared by the heavier modules) ------------


def fft_forward(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """Series coefficients of grid samples; leading axes pass through."""
    return np.fft.fftn(values, axes=grid.axes()) / grid.resolution ** grid.dimension


def fft_inverse(grid: TorusGrid, coeffs: np.ndarray, real: bool = False) -> np.ndarray:
    out = np.fft.ifftn(coeffs * grid.resolution ** grid.dimension, axes=grid.axes())
    return out.real if real else out


def grad_hat(grid: TorusGrid, fhat: np.ndarray) -> np.ndarray:
    return grid.derivative_multiplier * fhat[np.newaxis]


def div_hat(grid: TorusGrid, vhat: np.ndarray) -> np.ndarray:
    return np.sum(grid.derivative_multiplier * vhat, axis=0)


# public spectral calculus ----------------------------------------------


def transform(f) -> SpectralCoefficients:
    """Forward transform of a ScalarField or VectorField."""
    arity = 0 if isinstance(f, ScalarField) else f.grid.dimension
    return SpectralCoefficients(
        grid=f.grid,
        coeffs=fft_forward(f.grid, f.values),
        arity=arity,
        hermitian=not f.is_complex,
    )


def inverse_transform(c: SpectralCoefficients):
    values = fft_inverse(c.grid, c.coeffs, real=c.hermitian)
    if c.arity == 0:
        return ScalarField(c.grid, values)
    return VectorField(c.grid, values)


def gradient(f: ScalarField) -> VectorField:
    fhat = fft_forward(f.grid, f.values)
    return VectorField(f.grid, fft_inverse(
        f.grid, grad_hat(f.grid, fhat), real=not f.is_complex))


def divergence(v: VectorField) -> ScalarField:
    vhat = fft_forward(v.grid, v.values)
    return ScalarField(v.grid, fft_inverse(
        v.grid, div_hat(v.grid, vhat), real=not v.is_complex))


def laplacian(f: ScalarField) -> ScalarField:
    """div(grad(f)); built from the same multipliers so the identity is exact."""
    fhat = fft_forward(f.grid, f.values)
    lap = div_hat(f.grid, grad_hat(f.grid, fhat))
    return ScalarField(f.grid, fft_inverse(f.grid, lap, real=not f.is_complex))


def solve_poisson(f: ScalarField) -> ScalarField:
    """Mean-zero solution of laplacian(u) = f; the k = 0 row of f is dropped."""
    fhat = fft_forward(f.grid, f.values)
    uhat = -fhat * f.grid.inverse_wavenumber_sq
    return ScalarField(f.grid, fft_inverse(f.grid, uhat, real=not f.is_complex))


def dealias(f):
    """Zero every coefficient with |k|_inf above the retained band."""
    fhat = fft_forward(f.grid, f.values)
    fhat = fhat * f.grid.dealias_mask
    values = fft_inverse(f.grid, fhat, real=not f.is_complex)
    return type(f)(f.grid, values)


def leray_decompose(u: VectorField):
    """Split u into (P u, Q u): divergence-free part and mean-free gradient part.

    The k = 0 mode (spatial mean) is assigned to the divergence-free part.
    """
    grid = u.grid
    vhat = fft_forward(grid, u.values)
    khat = grid.unit_wavevectors
    amp = np.sum(khat * vhat, axis=0)          # component along k/|k|
    qhat = khat * amp[np.newaxis]              # zero at k = 0 automatically
    phat = vhat - qhat
    real = not u.is_complex
    return (VectorField(grid, fft_inverse(grid, phat, real=real)),
            VectorField(grid, fft_inverse(grid, qhat, real=real)))


def sobolev_norm(f, s: float) -> float:
    """Spectral H^s norm, any real s; reduces to the L2 norm at s = 0."""
    grid = f.grid
    fhat = fft_forward(grid, f.values)
    weight = (1.0 + grid.wavenumber_sq) ** s
    total = np.sum(weight * np.abs(fhat) ** 2)
    return float(np.sqrt(grid.volume * total))


def lebesgue_norm(f, p: float) -> float:
    """Grid-quadrature L^p norm, p >= 1 or inf; vectors use the pointwise
    Euclidean magnitude."""
    if p != np.inf and p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    vals = f.values
    if isinstance(f, VectorField):
        mag = np.sqrt(np.sum(np.abs(vals) ** 2, axis=0))
    else:
        mag = np.abs(vals)
    if p == np.inf:
        return float(mag.max())
    return float((f.grid.cell_volume * np.sum(mag ** p)) ** (1.0 / p))


def norm(f, kind: str, *, s: float = 0.0, p: float = 2.0) -> float:
    """Dispatch to the Sobolev ('sobolev') or Lebesgue ('lebesgue') norm."""
    if kind == "sobolev":
        return sobolev_norm(f, s)
    if kind == "lebesgue":
        return lebesgue_norm(f, p)
    raise ValueError(f"unknown norm kind {kind!r}")


def random_band_field(grid: TorusGrid, rng: np.random.Generator,
                      decay: float = 2.0, kmax: int | None = None,
                      amplitude: float = 1.0) -> ScalarField:
    """Seeded random real mean-zero scalar with |c_k| ~ (1+|k|^2)^(-decay/2).

    Used by presets and property tests; kmax defaults to the dealiased band.
    """
    if kmax is None:
        kmax = grid.band_limit
    shape = grid.shape
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    raw = fft_forward(grid, re + 1j * im)
    keep = (np.max(np.abs(grid.wavevectors), axis=0) <= kmax) & (grid.wavenumber_sq > 0)
    raw = raw * keep * (1.0 + grid.wavenumber_sq) ** (-decay / 2.0)
    values = fft_inverse(grid, raw).real
    peak = np.abs(values).max()
    if peak > 0:
        values *= amplitude / peak
    return ScalarField(grid, values)
