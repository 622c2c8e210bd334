"""Noise-free objects and coil sensitivity maps.

Synthetic maps are normalized pointwise so that ``sum_l |C_l(x)|^2 == 1``.
Two generators are provided:

* ``gaussian-lobes``: L smooth Gaussian lobes on a ring around the field of
  view, each with its own constant phase. Aliased sensitivity columns are
  generally not orthogonal, so SENSE noise is spatially varying.
* ``orthogonal-phase``: lobes made periodic along y with period ``M_y/r``
  and per-coil linear phase ramps, so the ``r`` aliased sensitivity columns
  are orthonormal at every pixel. Needs ``L`` divisible by ``r``.
"""

import enum
import os
from dataclasses import dataclass

import numpy as np

from .errors import BadDims, DimensionMismatch, ParseError
from .grid import ComplexImage, Domain, check_dims

NORMALIZED_ATOL = 1e-10
SMAP_MAGIC = "SMAP"


class Profile(enum.Enum):
    GAUSSIAN_LOBES = "gaussian-lobes"
    ORTHOGONAL_PHASE = "orthogonal-phase"


class PhantomKind(enum.Enum):
    ZERO = "zero"
    DISK = "disk"
    SHEPP_LOGAN = "shepp-logan"


@dataclass(frozen=True, eq=False)
class SensitivityMap:
    """Complex coil sensitivities, ``maps`` shaped ``[L, M_y, M_x]``."""

    maps: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        maps = np.asarray(self.maps, dtype=complex)
        if maps.ndim != 3:
            raise BadDims(f"sensitivity maps must be [L, M_y, M_x], got shape {maps.shape}")
        object.__setattr__(self, "maps", maps)

    @property
    def n_coils(self):
        return self.maps.shape[0]

    @property
    def dims(self):
        return self.maps.shape[2], self.maps.shape[1]

    def sos_error(self):
        """Largest deviation of ``sum_l |C_l|^2`` from 1."""
        return float(np.max(np.abs(np.sum(np.abs(self.maps) ** 2, axis=0) - 1.0)))


def _coords(mx, my):
    # pixel centres on [-0.5, 0.5)
    y = (np.arange(my) + 0.5) / my - 0.5
    x = (np.arange(mx) + 0.5) / mx - 0.5
    return np.meshgrid(y, x, indexing="ij")


def _ring(n_coils, radius=0.55, phase=np.pi / 2):
    ang = phase + 2 * np.pi * np.arange(n_coils) / n_coils
    return radius * np.sin(ang), radius * np.cos(ang)


def synth_sensitivity(n_coils, dims, profile=Profile.GAUSSIAN_LOBES, seed=0, r=2, width=0.3):
    """Synthetic SoS-normalized sensitivity maps.

    Args:
        n_coils: number of coils ``L``.
        dims: ``(M_x, M_y)``.
        profile: :class:`Profile` or its string value.
        seed: drives the per-coil constant phases.
        r: acceleration the ``orthogonal-phase`` profile is built for.
        width: lobe standard deviation as a fraction of the field of view.
    """
    profile = Profile(profile)
    mx, my = check_dims(dims)
    if n_coils < 1:
        raise BadDims(f"need at least one coil, got {n_coils}")
    phases = np.random.default_rng(seed).uniform(-np.pi, np.pi, n_coils)
    cy, cx = _ring(n_coils)
    yy, xx = _coords(mx, my)

    if profile is Profile.GAUSSIAN_LOBES:
        d2 = (yy[None] - cy[:, None, None]) ** 2 + (xx[None] - cx[:, None, None]) ** 2
        mag = np.exp(-d2 / (2 * width**2))
        mag /= np.sqrt(np.sum(mag**2, axis=0))
        maps = mag * np.exp(1j * phases)[:, None, None]
        return SensitivityMap(maps, normalized=True)

    if r < 1 or my % r or n_coils % r:
        raise BadDims(f"orthogonal-phase needs r | M_y and r | L (r={r}, M_y={my}, L={n_coils})")
    period = 1.0 / r
    # y-distance wrapped so every lobe repeats exactly every M_y/r rows
    row = (np.arange(my) % (my // r) + 0.5) / my - 0.5
    yy = np.broadcast_to(row[:, None], (my, mx))
    dy = np.mod(yy[None] - cy[:, None, None] + period / 2, period) - period / 2
    d2 = dy**2 + (xx[None] - cx[:, None, None]) ** 2
    mag = np.exp(-d2 / (2 * width**2))
    group = np.arange(n_coils) % r
    for k in range(r):
        members = group == k
        mag[members] /= np.sqrt(r * np.sum(mag[members] ** 2, axis=0))
    ramp = 2 * np.pi * group[:, None] * np.arange(my)[None, :] / my
    maps = mag * np.exp(1j * (phases[:, None, None] + ramp[:, :, None]))
    return SensitivityMap(maps, normalized=True)


# (centre y, centre x, semi-axis y, semi-axis x, rotation, intensity) on [-0.5, 0.5)
_SHEPP_LOGAN = [
    (0.0, 0.0, 0.46, 0.345, 0.0, 1.0),
    (-0.0092, 0.0, 0.437, 0.331, 0.0, -0.8),
    (0.0, 0.11, 0.205, 0.055, -0.314, -0.2),
    (0.0, -0.11, 0.28, 0.08, 0.314, -0.2),
    (0.175, 0.0, 0.125, 0.105, 0.0, 0.1),
    (0.05, 0.0, 0.023, 0.023, 0.0, 0.1),
    (-0.05, 0.0, 0.023, 0.023, 0.0, 0.1),
    (-0.3025, -0.04, 0.0115, 0.023, 0.0, 0.1),
    (-0.3025, 0.0, 0.0115, 0.0115, 0.0, 0.1),
    (-0.3025, 0.03, 0.0115, 0.023, 0.0, 0.1),
]


def synth_phantom(dims, kind=PhantomKind.ZERO, radius=0.35, value=1.0):
    """Noise-free object ``S_0`` as an x-space image.

    ``radius`` is in field-of-view units (the FOV spans [-0.5, 0.5) on both
    axes); a disk of radius >= 0.71 covers every pixel.
    """
    kind = PhantomKind(kind)
    mx, my = check_dims(dims)
    yy, xx = _coords(mx, my)
    if kind is PhantomKind.ZERO:
        img = np.zeros((my, mx))
    elif kind is PhantomKind.DISK:
        img = np.where(yy**2 + xx**2 < radius**2, float(value), 0.0)
    else:
        img = np.zeros((my, mx))
        for y0, x0, ay, ax, rot, val in _SHEPP_LOGAN:
            c, s = np.cos(rot), np.sin(rot)
            u = (xx - x0) * c + (yy - y0) * s
            v = -(xx - x0) * s + (yy - y0) * c
            img[(u / ax) ** 2 + (v / ay) ** 2 <= 1.0] += val
        img = value * np.clip(img, 0.0, None)
    return ComplexImage(img.astype(complex), Domain.XSPACE)


def save_sensitivity(path, sens):
    """Write an SMAP v1 file: ASCII header then little-endian float64 (re, im) pairs."""
    n_coils, my, mx = sens.maps.shape
    with open(path, "wb") as f:
        f.write(f"{SMAP_MAGIC} 1 {n_coils} {mx} {my}\n".encode("ascii"))
        f.write(np.ascontiguousarray(sens.maps, dtype="<c16").tobytes())


def load_sensitivity(path, expect_dims=None, expect_coils=None):
    """Read an SMAP v1 file.

    The normalized flag is set only if the pointwise sum-of-squares check
    passes within 1e-10.

    Raises:
        ParseError: malformed header or payload of the wrong length.
        DimensionMismatch: header disagrees with ``expect_dims``/``expect_coils``.
    """
    with open(os.fspath(path), "rb") as f:
        header = f.readline(256)
        payload = f.read()
    try:
        magic, version, n_coils, mx, my = header.decode("ascii").split()
        n_coils, mx, my = int(n_coils), int(mx), int(my)
    except (UnicodeDecodeError, ValueError):
        raise ParseError(f"{path}: bad SMAP header {header[:64]!r}") from None
    if magic != SMAP_MAGIC or version != "1" or not header.endswith(b"\n"):
        raise ParseError(f"{path}: not an SMAP v1 file")
    if min(n_coils, mx, my) <= 0:
        raise ParseError(f"{path}: non-positive sizes in header")
    expected = n_coils * mx * my * 16
    if len(payload) != expected:
        raise ParseError(f"{path}: payload has {len(payload)} bytes, header implies {expected}")
    if expect_dims is not None and tuple(expect_dims) != (mx, my):
        raise DimensionMismatch(f"{path}: dims {(mx, my)} != expected {tuple(expect_dims)}")
    if expect_coils is not None and expect_coils != n_coils:
        raise DimensionMismatch(f"{path}: {n_coils} coils != expected {expect_coils}")
    maps = np.frombuffer(payload, dtype="<c16").reshape(n_coils, my, mx).astype(complex)
    sens = SensitivityMap(maps)
    return SensitivityMap(maps, normalized=sens.sos_error() < NORMALIZED_ATOL)
