"""Diophantine rotation vectors and the small-divisor twisted-difference
equation solved in Fourier space.

The equation is  Y = lambda + X o R_{-gamma} - X  with X of zero mean:
mode by mode  Y_k = X_k (exp(-2 pi i k.gamma) - 1)  for k != 0 and
Y_0 = lambda.  The divisors  |1 - exp(2 pi i k.gamma)|  are bounded
below empirically by brute-force certification over a scan window, in
place of a number-theoretic lower bound.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DiophantineError, SmallDivisorBreach
from .grid import GridSpec, SpectralField, _conj_flip

__all__ = [
    "GOLDEN_MEAN",
    "SQRT2_MINUS_1",
    "DiophantineVector",
    "CohomologySolution",
    "certify_diophantine",
    "solve_cohomological",
    "twisted_difference",
]

GOLDEN_MEAN = (math.sqrt(5.0) - 1.0) / 2.0
SQRT2_MINUS_1 = math.sqrt(2.0) - 1.0

DEFAULT_C_FLOOR = 1e-6


@dataclass(frozen=True)
class DiophantineVector:
    """Rotation vector with an empirically certified divisor bound:
    |1 - e^{2 pi i k.gamma}| >= C_emp / |k|_inf^tau for 1 <= |k|_inf <= K_scan."""

    gamma: tuple
    tau: float
    C_emp: float
    K_scan: int
    worst_k: tuple

    @property
    def n(self):
        return len(self.gamma)

    def gamma_array(self):
        return np.asarray(self.gamma, dtype=float)

    def divisor_floor(self, k_inf):
        return self.C_emp / float(k_inf) ** self.tau

    def to_json_dict(self):
        return {
            "gamma": list(self.gamma),
            "tau": self.tau,
            "C_emp": self.C_emp,
            "K_scan": self.K_scan,
            "worst_k": list(self.worst_k),
        }


def _divisor_scan_1d(gamma, tau, k_max):
    k = np.arange(1, k_max + 1, dtype=float)
    div = 2.0 * np.abs(np.sin(np.pi * k * gamma))
    weighted = div * k**tau
    i = int(np.argmin(weighted))
    return float(weighted[i]), (int(k[i]),)

def _divisor_scan_2d(gamma, tau, k_max, chunk=256):
    best = np.inf
    best_k = (0, 0)
    k1_all = np.arange(-k_max, k_max + 1)
    k2 = np.arange(-k_max, k_max + 1, dtype=float)
    for lo in range(0, k1_all.size, chunk):
        k1 = k1_all[lo : lo + chunk].astype(float)
        phase = np.add.outer(k1 * gamma[0], k2 * gamma[1])
        div = 2.0 * np.abs(np.sin(np.pi * phase))
        kinf = np.maximum.outer(np.abs(k1), np.abs(k2))
        weighted = div * kinf**tau
        weighted[kinf == 0] = np.inf  # excludes k = 0
        j = int(np.argmin(weighted))
        if weighted.flat[j] < best:
            best = float(weighted.flat[j])
            a, b = np.unravel_index(j, weighted.shape)
            best_k = (int(k1[a]), int(k2[b]))
    return best, best_k


def certify_diophantine(gamma, tau=2.0, k_scan=10_000, c_floor=DEFAULT_C_FLOOR):
    """Brute-force the largest constant valid over the scan window.

    Scans every integer frequency with 1 <= |k|_inf <= k_scan, records the
    minimizing frequency, and rejects vectors whose constant falls below
    ``c_floor`` (rationals produce an exactly vanishing divisor).
    """
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float)) % 1.0
    if gamma.ndim != 1 or gamma.size not in (1, 2):
        raise DiophantineError("gamma must have one or two components")
    if k_scan < 1000:
        raise DiophantineError("scan radius must be at least 10^3")
    if gamma.size == 1:
        c_emp, worst = _divisor_scan_1d(float(gamma[0]), tau, k_scan)
    else:
        c_emp, worst = _divisor_scan_2d(gamma, tau, k_scan)
    if c_emp < c_floor:
        raise DiophantineError(
            f"gamma={tuple(gamma)} fails certification: C_emp={c_emp:.3e} "
            f"< floor {c_floor:.1e} at k={worst}"
        )
    return DiophantineVector(tuple(gamma), float(tau), c_emp, int(k_scan), worst)


def golden_vector(n=1, tau=None, k_scan=10_000, scale=1.0):
    """The default rotation vector: classical constant-type irrationals
    per axis, optionally scaled down (the scaled vector is certified on
    its own)."""
    base = (GOLDEN_MEAN, SQRT2_MINUS_1)[:n]
    gamma = tuple((g * scale) % 1.0 for g in base)
    if tau is None:
        tau = 2.0 if n == 1 else 3.0
    return certify_diophantine(gamma, tau=tau, k_scan=k_scan)


@dataclass(frozen=True)
class CohomologySolution:
    """Mean part and zero-mean spectral solution, with the a-posteriori
    sup-norm residual of the reconstructed equation on the grid."""

    lam: np.ndarray
    X: SpectralField
    residual: float


def _phase_grid(grid, gamma):
    """exp(-2 pi i k.gamma) on the full FFT frequency grid."""
    k = grid.freqs().astype(float)
    if grid.n == 1:
        dot = k * gamma[0]
    else:
        dot = np.add.outer(k * gamma[0], k * gamma[1])
    return np.exp(-2j * np.pi * dot)


def _kinf_grid(grid):
    k = np.abs(grid.freqs())
    if grid.n == 1:
        return k.astype(float)
    return np.maximum.outer(k, k).astype(float)


def solve_cohomological(Y, gamma_cert, hermitian_tol=1e-10):
    """Invert the twisted difference: returns (lambda, X) with X of zero
    mean, plus the residual of lambda + X o R_{-gamma} - X against Y
    evaluated on the grid.

    Aborts if any divisor falls under half its certified floor, which
    would mean the certificate does not cover the requested grid.
    """
    grid = Y.grid
    if gamma_cert.n != grid.n:
        raise DiophantineError("rotation vector dimension does not match the field")
    if Y.hermitian_defect() > hermitian_tol:
        raise SmallDivisorBreach(
            f"input spectrum is not Hermitian (defect {Y.hermitian_defect():.2e})"
        )
    gamma = gamma_cert.gamma_array()
    phase = _phase_grid(grid, gamma)
    divisor = phase - 1.0
    kinf = _kinf_grid(grid)
    mask = kinf > 0
    floor = gamma_cert.C_emp / np.maximum(kinf, 1.0) ** gamma_cert.tau
    bad = mask & (np.abs(divisor) < 0.5 * floor)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise SmallDivisorBreach(
            f"divisor below certified floor at frequency index {tuple(idx)}; "
            f"re-certify gamma with a larger scan radius"
        )
    lam = Y.mean_vector()
    coef = np.zeros_like(Y.coef)
    np.divide(Y.coef, divisor[None], out=coef, where=mask[None])
    # exact zero mean, exact Hermitian symmetry
    coef = 0.5 * (coef + _conj_flip(coef))
    if grid.n == 1:
        coef[:, 0] = 0.0
    else:
        coef[:, 0, 0] = 0.0
    X = SpectralField(grid, coef)
    recon = twisted_difference(X, lam, gamma_cert)
    axes = tuple(range(1, grid.n + 1))
    diff = np.fft.ifftn((recon.coef - Y.coef) * grid.N**grid.n, axes=axes).real
    residual = float(np.max(np.abs(diff)))
    return CohomologySolution(lam=lam, X=X, residual=residual)


def twisted_difference(X, lam, gamma_cert):
    """Forward map lambda + X o R_{-gamma} - X, exact in Fourier space."""
    grid = X.grid
    gamma = (
        gamma_cert.gamma_array()
        if isinstance(gamma_cert, DiophantineVector)
        else np.atleast_1d(np.asarray(gamma_cert, dtype=float))
    )
    phase = _phase_grid(grid, gamma)
    coef = X.coef * (phase - 1.0)[None]
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if grid.n == 1:
        coef[:, 0] += lam
    else:
        coef[:, 0, 0] += lam
    return SpectralField(grid, coef)
