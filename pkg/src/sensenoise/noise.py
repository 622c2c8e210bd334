"""Inter-coil correlated, spatially white, circular complex Gaussian noise.

All variances are per component: a coil covariance ``sigma`` means the real
parts of the L-vector of coil samples at any pixel are ``N(0, sigma)`` and
so are the imaginary parts, independently. The complex covariance
``E[n n^H]`` is therefore ``2 * sigma``.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite
from .grid import ComplexImage, Domain, check_dims
from .linalg import batched_cholesky, symmetrize


class Scale(enum.Enum):
    """Where a covariance matrix lives (which samples it describes)."""

    KSPACE_FULL = "kspace-full"
    XSPACE_FULL = "xspace-full"
    XSPACE_SUBSAMPLED = "xspace-subsampled"


@dataclass(frozen=True, eq=False)
class CoilCovariance:
    """L x L Hermitian positive-definite per-component noise covariance.

    ``r`` is only meaningful for ``Scale.XSPACE_SUBSAMPLED``.
    """

    sigma: np.ndarray
    scale: Scale = Scale.XSPACE_FULL
    r: int = 1

    def __post_init__(self):
        sigma = symmetrize(np.atleast_2d(np.asarray(self.sigma, dtype=complex)))
        diag = np.diagonal(sigma)
        if np.any(diag.real <= 0):
            raise NotPositiveDefinite("covariance diagonal must be positive")
        t, bad = batched_cholesky(sigma)
        if bad:
            raise NotPositiveDefinite("covariance is not positive definite")
        if not np.any(sigma.imag):
            sigma = sigma.real.astype(complex)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "_factor", t)
        if self.scale is not Scale.XSPACE_SUBSAMPLED:
            object.__setattr__(self, "r", 1)

    @classmethod
    def uniform(cls, n_coils, variance=1.0, rho=0.0, scale=Scale.XSPACE_FULL, r=1):
        """``variance * ((1 - rho) I + rho J)``: equal variances, one shared correlation."""
        sigma = variance * ((1.0 - rho) * np.eye(n_coils) + rho * np.ones((n_coils, n_coils)))
        return cls(sigma, scale, r)

    @property
    def n_coils(self):
        return self.sigma.shape[0]

    @property
    def factor(self):
        """Lower Cholesky factor ``T`` with ``T T^H == sigma``."""
        return self._factor

    @property
    def is_real(self):
        return not np.any(self.sigma.imag)

    def scaled(self, factor, scale, r=1):
        return CoilCovariance(self.sigma * factor, scale, r)


def make_rng(seed, stream=0):
    """Counter-based generator for realization ``stream`` of run ``seed``.

    Each (seed, stream) pair gets its own Philox key, so realizations can be
    produced in any order or on any worker and still come out identical.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def _draw(factor, n_coils, mx, my, rng):
    z = rng.standard_normal((2, n_coils, my * mx))
    w = z[0] + 1j * z[1]
    return (factor @ w).reshape(n_coils, my, mx)


def sample_coil_noise(cov, dims, seed, stream=0):
    """One noise realization: a coil stack ``[L, M_y, M_x]``.

    Each pixel's coil vector is ``T @ (z_re + i z_im)`` with ``T`` the
    Cholesky factor of ``cov.sigma`` and ``z`` i.i.d. standard normal. The
    returned image is tagged k-space when ``cov`` describes k-space noise.
    """
    mx, my = check_dims(dims)
    data = _draw(cov.factor, cov.n_coils, mx, my, make_rng(seed, stream))
    domain = Domain.KSPACE if cov.scale is Scale.KSPACE_FULL else Domain.XSPACE
    return ComplexImage(data, domain)


def sample_noise_batch(cov, dims, seed, start, count):
    """Realizations ``start .. start+count-1`` stacked as ``[count, L, M_y, M_x]``.

    Bit-identical to calling :func:`sample_coil_noise` once per stream.
    """
    mx, my = check_dims(dims)
    out = np.empty((count, cov.n_coils, my, mx), dtype=complex)
    for i in range(count):
        out[i] = _draw(cov.factor, cov.n_coils, mx, my, make_rng(seed, start + i))
    return out
