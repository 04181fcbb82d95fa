"""Grid and spectral representations of periodic vector fields on T^n.

Conventions used throughout the package:

* coordinates live in [0, 1) per axis, period 1;
* a displacement field u represents the map f(x) = x + u(x) mod 1;
* Fourier series f(x) = sum_k  c_k exp(2 pi i k.x), so the coefficient
  array is fft(values) / N^n and Hermitian symmetry c_{-k} = conj(c_k)
  holds for real fields.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

__all__ = [
    "GridSpec",
    "DisplacementField",
    "SpectralField",
    "wrap_half",
    "to_spectral",
    "from_spectral",
]


def wrap_half(x):
    """Reduce mod 1 to the representative of smallest absolute value."""
    x = np.asarray(x, dtype=float)
    return x - np.round(x)


@dataclass(frozen=True)
class GridSpec:
    """Uniform N^n sampling of the n-torus, n in {1, 2}, N a power of two."""

    n: int
    N: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise InputError(f"dimension must be 1 or 2, got {self.n}")
        if self.N < 16 or (self.N & (self.N - 1)) != 0:
            raise InputError(f"N must be a power of two >= 16, got {self.N}")

    @property
    def shape(self):
        return (self.N,) * self.n

    @property
    def field_shape(self):
        return (self.n,) + self.shape

    def axis_points(self):
        return np.arange(self.N) / self.N

    def nodes(self):
        """Node coordinates, shape (n,) + (N,)*n."""
        x = self.axis_points()
        if self.n == 1:
            return x[None, :]
        xx, yy = np.meshgrid(x, x, indexing="ij")
        return np.stack([xx, yy])

    def freqs(self):
        """Integer frequencies along one axis in FFT order."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N).astype(int)

    def deriv_freqs(self):
        """Frequencies used for spectral differentiation (Nyquist zeroed)."""
        k = self.freqs().astype(float)
        k[self.N // 2] = 0.0
        return k


def _as_field_array(grid, u):
    u = np.asarray(u, dtype=float)
    if u.shape != grid.field_shape:
        raise InputError(
            f"field shape {u.shape} does not match grid {grid.field_shape}"
        )
    return u


@dataclass(frozen=True)
class DisplacementField:
    """Real n-vector of periodic samples per node; units are fractions of
    the period, so the represented map is x -> x + u(x) mod 1."""

    grid: GridSpec
    u: np.ndarray

    def __post_init__(self):
        arr = _as_field_array(self.grid, self.u)
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "u", arr)

    @classmethod
    def zero(cls, grid):
        return cls(grid, np.zeros(grid.field_shape))

    @classmethod
    def constant(cls, grid, vec):
        vec = np.atleast_1d(np.asarray(vec, dtype=float))
        if vec.shape != (grid.n,):
            raise InputError(f"constant must have {grid.n} components")
        u = np.zeros(grid.field_shape)
        for i in range(grid.n):
            u[i] = vec[i]
        return cls(grid, u)

    @classmethod
    def from_callable(cls, grid, fn):
        """Sample u = fn(x) with x the (n, ...) node array."""
        vals = np.asarray(fn(grid.nodes()), dtype=float)
        return cls(grid, vals.reshape(grid.field_shape))

    def is_zero(self):
        return not np.any(self.u)

    def max_norm(self):
        if self.grid.n == 1:
            return float(np.max(np.abs(self.u)))
        return float(np.sqrt(np.max(self.u[0] ** 2 + self.u[1] ** 2)))


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients of a periodic real n-vector field.

    ``coef`` has shape (n,) + (N,)*n in numpy FFT ordering; entry k holds
    the coefficient of exp(2 pi i k.x).  Hermitian symmetry is the
    invariant that makes the represented field real.
    """

    grid: GridSpec
    coef: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coef, dtype=complex)
        if c.shape != self.grid.field_shape:
            raise InputError(
                f"coefficient shape {c.shape} does not match {self.grid.field_shape}"
            )
        c = np.ascontiguousarray(c)
        c.flags.writeable = False
        object.__setattr__(self, "coef", c)

    def mode(self, k):
        """Coefficient vector at integer frequency k (tuple or int)."""
        if self.grid.n == 1:
            idx = int(k) % self.grid.N
            return self.coef[:, idx].copy()
        k0, k1 = (int(k[0]) % self.grid.N, int(k[1]) % self.grid.N)
        return self.coef[:, k0, k1].copy()

    def mean_vector(self):
        if self.grid.n == 1:
            return self.coef[:, 0].real.copy()
        return self.coef[:, 0, 0].real.copy()

    def hermitian_defect(self):
        flipped = _conj_flip(self.coef)
        return float(np.max(np.abs(self.coef - flipped)))


def _conj_flip(coef):
    """conj of the coefficient at -k, aligned with the entry at k."""
    out = np.conj(coef)
    for ax in range(1, coef.ndim):
        idx = (-np.arange(coef.shape[ax])) % coef.shape[ax]
        out = np.take(out, idx, axis=ax)
    return out


def to_spectral(dfield):
    """Forward transform with Hermitian symmetry enforced by averaging."""
    grid = dfield.grid
    axes = tuple(range(1, grid.n + 1))
    coef = np.fft.fftn(dfield.u, axes=axes) / (grid.N ** grid.n)
    coef = 0.5 * (coef + _conj_flip(coef))
    return SpectralField(grid, coef)


def from_spectral(sfield, grid=None):
    """Sample a spectral field on a grid (default: its own grid).

    Resampling onto a finer grid zero-pads; onto a coarser grid, modes
    beyond the target Nyquist are dropped and the dropped mass is
    reported by the companion helper ``resample_dropped_mass``.
    """
    src = sfield.grid
    grid = grid or src
    if grid.n != src.n:
        raise InputError("cannot resample between different dimensions")
    if grid.N == src.N:
        coef = sfield.coef
    else:
        coef = _resize_coef(sfield.coef, src.N, grid.N)
    axes = tuple(range(1, grid.n + 1))
    vals = np.fft.ifftn(coef * (grid.N ** grid.n), axes=axes).real
    return DisplacementField(grid, vals)


def resample_dropped_mass(sfield, grid):
    """Max modulus among coefficients lost when resampling to ``grid``."""
    if grid.N >= sfield.grid.N:
        return 0.0
    keep = grid.N // 2
    k = sfield.grid.freqs()
    if sfield.grid.n == 1:
        mask = np.abs(k) > keep
        lost = sfield.coef[:, mask]
    else:
        m0 = np.abs(k)[:, None] > keep
        m1 = np.abs(k)[None, :] > keep
        lost = sfield.coef[:, m0 | m1]
    return float(np.max(np.abs(lost))) if lost.size else 0.0


def _resize_axis(coef, axis, n_dst):
    """Spectrally resize one FFT axis, splitting/merging Nyquist bins so
    that real fields stay real."""
    n_src = coef.shape[axis]
    if n_src == n_dst:
        return coef
    moved = np.moveaxis(coef, axis, -1)
    out = np.zeros(moved.shape[:-1] + (n_dst,), dtype=complex)
    if n_dst > n_src:
        h = n_src // 2
        out[..., :h] = moved[..., :h]
        out[..., n_dst - h + 1 :] = moved[..., h + 1 :]
        out[..., h] = 0.5 * moved[..., h]
        out[..., n_dst - h] = 0.5 * moved[..., h]
    else:
        h = n_dst // 2
        out[..., :h] = moved[..., :h]
        out[..., h + 1 :] = moved[..., n_src - h + 1 :]
        out[..., h] = moved[..., h] + moved[..., n_src - h]
    return np.moveaxis(out, -1, axis)


def _resize_coef(coef, n_src, n_dst):
    out = np.asarray(coef, dtype=complex)
    for axis in range(1, coef.ndim):
        out = _resize_axis(out, axis, n_dst)
    return out
