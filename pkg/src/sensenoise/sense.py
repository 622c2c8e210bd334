"""Coil weighting, SENSE unfolding and sum-of-squares combination.

Aliasing convention: subsampled row ``y`` (``0 <= y < M_y/r``) mixes the
full-grid rows ``y_i = y + i * M_y / r`` for ``i = 0 .. r-1``, the same
replica order produced by :func:`sensenoise.dft.alias_oracle`.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotDivisible, SingularSystem
from .grid import ComplexImage, Domain
from .linalg import back_substitute_adjoint, forward_substitute, hermitian, solve_hpd

log = logging.getLogger(__name__)

SINGULAR_RTOL = 1e-12


def apply_sensitivity(phantom, sens):
    """Coil images ``S_l = C_l * S_0``."""
    phantom.require(Domain.XSPACE)
    if phantom.data.shape != sens.maps.shape[1:]:
        raise DimensionMismatch(f"phantom {phantom.data.shape} vs maps {sens.maps.shape[1:]}")
    return ComplexImage(sens.maps * phantom.data[None], Domain.XSPACE)


def sos_combine(stack):
    """Sum-of-squares magnitude ``sqrt(sum_l |S_l|^2)`` as a real array."""
    data = stack.data if isinstance(stack, ComplexImage) else np.asarray(stack)
    if data.ndim == 2:
        return np.abs(data)
    return np.sqrt(np.sum(np.abs(data) ** 2, axis=0))


def _unmix(c_sub, sigma_factor=None):
    """Batched unmixing matrices for ``c_sub[..., L, r]``; returns ``(w, bad)``."""
    if sigma_factor is None:
        weighted = c_sub
    else:
        # sigma^-1 C through the coil covariance's Cholesky factor
        weighted = back_substitute_adjoint(sigma_factor, forward_substitute(sigma_factor, c_sub))
    gram = hermitian(c_sub) @ weighted
    return solve_hpd(gram, hermitian(weighted), rel_tol=SINGULAR_RTOL)


def build_unmixing(c_sub, cov=None):
    """Unmixing matrix ``W`` (r x L) for one aliased pixel group.

    ``W = (C^H C)^-1 C^H`` without a covariance, otherwise
    ``W = (C^H S^-1 C)^-1 C^H S^-1``. Satisfies ``W @ c_sub == I``.

    Raises:
        SingularSystem: ``C^H S^-1 C`` has a pivot below 1e-12 of its
            largest diagonal entry (or r > L).
    """
    c_sub = np.asarray(c_sub, dtype=complex)
    if c_sub.ndim != 2:
        raise DimensionMismatch(f"c_sub must be L x r, got shape {c_sub.shape}")
    n_coils, r = c_sub.shape
    if not np.all(np.isfinite(c_sub)):
        raise ValueError("c_sub has non-finite entries")
    if cov is not None and cov.n_coils != n_coils:
        raise DimensionMismatch(f"covariance has {cov.n_coils} coils, c_sub has {n_coils}")
    if r > n_coils:
        raise SingularSystem(f"r = {r} aliases cannot be separated with {n_coils} coils")
    w, bad = _unmix(c_sub, None if cov is None else cov.factor)
    if bad:
        raise SingularSystem("aliased sensitivity columns are (nearly) linearly dependent")
    return w


def aliased_columns(sens, r):
    """Sensitivity submatrices of every pixel group, ``[M_y/r, M_x, L, r]``."""
    n_coils, my, mx = sens.maps.shape
    if r < 1 or my % r:
        raise NotDivisible(f"M_y = {my} is not divisible by r = {r}")
    return sens.maps.reshape(n_coils, r, my // r, mx).transpose(2, 3, 0, 1)


@dataclass(frozen=True, eq=False)
class UnmixingMaps:
    """Unmixing matrices of every pixel group.

    ``w`` is ``[M_y/r, M_x, r, L]``; ``singular`` marks groups whose system
    could not be solved (their ``w`` is zero).
    """

    w: np.ndarray
    singular: np.ndarray
    r: int

    @property
    def singular_pixels(self):
        ys, xs = np.nonzero(self.singular)
        return list(zip(xs.tolist(), ys.tolist()))

    def full_mask(self):
        """Singular mask expanded to the full ``[M_y, M_x]`` grid."""
        return np.tile(self.singular, (self.r, 1))

    def check(self):
        if np.any(self.singular):
            pix = self.singular_pixels
            raise SingularSystem(
                f"{len(pix)} singular pixel group(s), first at (x, y) = {pix[0]}", pix
            )
        return self


def unmixing_maps(sens, r, cov=None):
    """Precompute ``W`` for every pixel group (never raises on singularity)."""
    if cov is not None and cov.n_coils != sens.n_coils:
        raise DimensionMismatch(f"covariance has {cov.n_coils} coils, maps have {sens.n_coils}")
    c_sub = aliased_columns(sens, r)
    if r > sens.n_coils:
        shape = c_sub.shape[:2]
        return UnmixingMaps(np.zeros(shape + (r, sens.n_coils), complex), np.ones(shape, bool), r)
    w, bad = _unmix(c_sub, None if cov is None else cov.factor)
    return UnmixingMaps(w, bad, r)


def unfold_array(w, sub):
    """Apply unmixing ``w[M_y/r, M_x, r, L]`` to coil data ``[..., L, M_y/r, M_x]``."""
    r = w.shape[2]
    out = np.einsum("yxil,...lyx->...iyx", w, sub)
    return out.reshape(out.shape[:-3] + (r * out.shape[-2], out.shape[-1]))


def sense_unfold(sub, sens, r, cov=None, strict=True, unmixing=None):
    """Unfold a subsampled x-space coil stack onto the full grid.

    Args:
        sub: coil stack of height ``M_y / r``.
        sens: sensitivity maps of height ``M_y``.
        r: acceleration factor.
        cov: coil covariance for the noise-weighted unmixing, or ``None``.
        strict: raise on singular pixel groups; otherwise leave them at 0.
        unmixing: precomputed :class:`UnmixingMaps` to reuse.

    Raises:
        SingularSystem: (strict only) with the offending pixel coordinates.
        DimensionMismatch: stacks and maps disagree.
    """
    sub.require(Domain.XSPACE)
    n_coils, my, mx = sens.maps.shape
    if my % r:
        raise NotDivisible(f"M_y = {my} is not divisible by r = {r}")
    if sub.data.shape[-3:] != (n_coils, my // r, mx):
        raise DimensionMismatch(
            f"subsampled stack {sub.data.shape} does not match maps {sens.maps.shape} at r = {r}"
        )
    if unmixing is None:
        unmixing = unmixing_maps(sens, r, cov)
    if strict:
        unmixing.check()
    elif np.any(unmixing.singular):
        log.warning("%d singular pixel group(s) left at zero", int(unmixing.singular.sum()))
    return ComplexImage(unfold_array(unmixing.w, sub.data), Domain.XSPACE)
