"""2-D DFT pair, phase-encode subsampling and the replica-sum aliasing model.

Normalization: the forward transform is unscaled and the inverse is scaled
by ``1/N`` with ``N`` the number of points of *its input*. With this choice
white k-space noise of per-component variance ``s2`` maps to x-space
variance ``s2 / N``, and inverting a k-space subsampled by ``r`` yields the
plain sum of the ``r`` spatial replicas, with no ``1/r`` factor.
"""

import numpy as np
import scipy.fft

from .errors import NotDivisible
from .grid import ComplexImage, Domain


def dft2(img):
    """Unnormalized forward DFT over the last two axes (x-space -> k-space)."""
    img.require(Domain.XSPACE)
    return ComplexImage(scipy.fft.fft2(img.data, axes=(-2, -1), norm="backward"), Domain.KSPACE)


def idft2(ksp):
    """Inverse DFT scaled by ``1/N`` (k-space -> x-space)."""
    ksp.require(Domain.KSPACE)
    return ComplexImage(scipy.fft.ifft2(ksp.data, axes=(-2, -1), norm="backward"), Domain.XSPACE)


def _check_factor(height, r):
    if int(r) != r or r < 1:
        raise NotDivisible(f"subsampling factor must be a positive integer, got {r!r}")
    if height % r:
        raise NotDivisible(f"M_y = {height} is not divisible by r = {r}")
    return int(r)


def subsample_phase_encode(ksp, r):
    """Keep phase-encode rows ``0, r, 2r, ...`` of a k-space image."""
    ksp.require(Domain.KSPACE)
    r = _check_factor(ksp.height, r)
    return ComplexImage(ksp.data[..., ::r, :].copy(), Domain.KSPACE)


def alias_oracle(img, r):
    """Fold an x-space image onto ``M_y / r`` rows by summing its replicas.

    ``out[y] = sum_i img[y + i * M_y / r]``. This is what inverting an
    ``r``-fold subsampled k-space produces under the normalization used
    here; it is computed purely by index arithmetic so it can serve as an
    independent check of the FFT path.
    """
    img.require(Domain.XSPACE)
    r = _check_factor(img.height, r)
    folded = img.height // r
    shape = img.data.shape[:-2] + (r, folded, img.width)
    return ComplexImage(img.data.reshape(shape).sum(axis=-3), Domain.XSPACE)


def subsampled_image(img, r):
    """x-space image -> k-space -> keep every r-th line -> x-space."""
    return idft2(subsample_phase_encode(dft2(img), r))
