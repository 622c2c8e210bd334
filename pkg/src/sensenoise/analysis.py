"""Closed-form noise characterization of SENSE reconstructions.

The reconstructed value of line ``i`` of a pixel group is ``W_i @ s`` with
``s`` the vector of subsampled coil samples, so it is complex Gaussian with
per-component variance ``W_i S W_i^H`` and covariance ``W_i S W_j^H`` with
the other ``r - 1`` lines unfolded from the same samples. Lines from
different groups share no samples and are uncorrelated.

Pixel groups whose unmixing system is singular are flagged in
``singular_mask`` and carry NaN in every map.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadTag, DimensionMismatch, EmptyInput
from .linalg import back_substitute_adjoint, forward_substitute, hermitian, solve_hpd
from .noise import CoilCovariance, Scale
from .sense import SINGULAR_RTOL, aliased_columns, unmixing_maps


def scale_covariance(cov, omega, r):
    """Carry a full-grid covariance to the subsampled x-space grid.

    k-space covariances are multiplied by ``r / omega`` (``omega`` = number
    of points of the full grid), x-space ones by ``r``.
    """
    if cov.scale is Scale.KSPACE_FULL:
        factor = r / omega
    elif cov.scale is Scale.XSPACE_FULL:
        factor = r
    else:
        raise BadTag(f"cannot rescale a {cov.scale.value} covariance")
    return CoilCovariance(cov.sigma * factor, Scale.XSPACE_SUBSAMPLED, r)


def _check_tag(cov, r):
    ok = (cov.scale is Scale.XSPACE_SUBSAMPLED and cov.r == r) or (
        r == 1 and cov.scale is Scale.XSPACE_FULL
    )
    if not ok:
        raise BadTag(
            f"covariance tagged {cov.scale.value} (r={cov.r}) does not describe data "
            f"subsampled by r = {r}; use scale_covariance first"
        )


def _unfold_full(per_line):
    """``[M_y/r, M_x, r]`` per-line values -> full ``[M_y, M_x]`` grid."""
    rows, mx, r = per_line.shape
    return per_line.transpose(2, 0, 1).reshape(r * rows, mx)


def line_covariance(sens, cov, r, unmixing=None):
    """Covariances ``W_i S W_j^H`` of co-reconstructed lines, ``[M_y/r, M_x, r, r]``.

    ``unmixing`` defaults to the noise-weighted unmixing built from ``cov``.
    Singular groups are NaN.
    """
    _check_tag(cov, r)
    if unmixing is None:
        unmixing = unmixing_maps(sens, r, cov)
    w = unmixing.w
    c = np.einsum("yxil,lm,yxjm->yxij", w, cov.sigma, np.conj(w))
    c[unmixing.singular] = np.nan
    return c


def variance_map(sens, cov, r, unmixing=None):
    """Per-pixel per-component noise variance of the reconstruction, ``[M_y, M_x]``."""
    c = line_covariance(sens, cov, r, unmixing)
    return _unfold_full(np.real(np.diagonal(c, axis1=-2, axis2=-1)))


def correlation_from_covariance(c):
    d = np.sqrt(np.real(np.diagonal(c, axis1=-2, axis2=-1)))
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = c / (d[..., :, None] * d[..., None, :])
    r = c.shape[-1]
    idx = np.arange(r)
    finite = np.all(np.isfinite(d), axis=-1)
    rho[..., idx, idx] = np.where(finite[..., None], 1.0, np.nan)
    return rho


def correlation_map(sens, cov, r, unmixing=None):
    """Complex correlation coefficients among co-reconstructed lines, ``[M_y/r, M_x, r, r]``.

    Entry ``[y, x, i, j]`` relates full-grid pixels ``(x, y + i*M_y/r)`` and
    ``(x, y + j*M_y/r)``.
    """
    return correlation_from_covariance(line_covariance(sens, cov, r, unmixing))


def gfactor_map(sens, cov, r):
    """g-factor ``sqrt([(C^H S^-1 C)^-1]_ii [C^H S^-1 C]_ii)`` on the full grid.

    Any positive scaling of ``cov`` gives the same map, so its scale tag is
    not checked.
    """
    c_sub = aliased_columns(sens, r)
    t = cov.factor
    weighted = back_substitute_adjoint(t, forward_substitute(t, c_sub))
    gram = hermitian(c_sub) @ weighted
    eye = np.broadcast_to(np.eye(r, dtype=complex), gram.shape)
    inv, bad = solve_hpd(gram, eye, rel_tol=SINGULAR_RTOL)
    g2 = np.real(np.diagonal(inv, axis1=-2, axis2=-1)) * np.real(np.diagonal(gram, axis1=-2, axis2=-1))
    g = np.sqrt(np.clip(g2, 0.0, None))
    g[bad] = np.nan
    return _unfold_full(g)


@dataclass(frozen=True, eq=False)
class NoiseMaps:
    variance: np.ndarray
    line_corr: np.ndarray
    gmap: np.ndarray
    singular_mask: np.ndarray
    r: int


def noise_maps(sens, cov, r, unmixing=None):
    """All closed-form maps for data subsampled by ``r`` with covariance ``cov``."""
    if unmixing is None:
        unmixing = unmixing_maps(sens, r, cov)
    c = line_covariance(sens, cov, r, unmixing)
    return NoiseMaps(
        variance=_unfold_full(np.real(np.diagonal(c, axis1=-2, axis2=-1))),
        line_corr=correlation_from_covariance(c),
        gmap=gfactor_map(sens, cov, r),
        singular_mask=unmixing.full_mask(),
        r=r,
    )


def rayleigh_sigma_estimate(mag_samples, axis=0):
    """Per-component variance from magnitudes: ``mean(M^2) / 2`` along ``axis``."""
    m = np.asarray(mag_samples, dtype=float)
    if m.size == 0 or (m.ndim and m.shape[axis] == 0):
        raise EmptyInput("no magnitude samples")
    if np.any(m < 0):
        raise ValueError("magnitudes must be non-negative")
    if m.ndim == 0:
        return 0.5 * float(m) ** 2
    return 0.5 * np.mean(m**2, axis=axis)


def ca_denoise(second_moment, variance):
    """Conventional-approach bias removal ``sqrt(max(0, E{M^2} - 2 sigma^2))``.

    ``variance`` may be a per-pixel map or a scalar.
    """
    m2 = np.asarray(second_moment, dtype=float)
    var = np.asarray(variance, dtype=float)
    if var.ndim and var.shape != m2.shape:
        raise DimensionMismatch(f"second moment {m2.shape} vs variance {var.shape}")
    if np.any(m2 < 0) or np.any(var < 0):
        raise ValueError("inputs must be non-negative")
    return np.sqrt(np.maximum(0.0, m2 - 2.0 * var))
