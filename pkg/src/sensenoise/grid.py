"""Image containers.

Arrays are indexed ``[..., y, x]``: ``y`` is the phase-encode (row) axis
with ``M_y`` rows and ``x`` the readout axis with ``M_x`` columns. A coil
stack is simply an image whose data carries a leading coil axis.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import BadDims, WrongDomain


class Domain(enum.Enum):
    KSPACE = "k"
    XSPACE = "x"


@dataclass(frozen=True)
class ComplexImage:
    data: np.ndarray
    domain: Domain = Domain.XSPACE

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim < 2:
            raise BadDims(f"image needs at least 2 axes, got shape {data.shape}")
        if not np.iscomplexobj(data):
            data = data.astype(complex)
        object.__setattr__(self, "data", data)

    @property
    def width(self):
        return self.data.shape[-1]

    @property
    def height(self):
        return self.data.shape[-2]

    @property
    def dims(self):
        """``(M_x, M_y)``."""
        return self.width, self.height

    @property
    def n_coils(self):
        return self.data.shape[0] if self.data.ndim == 3 else 1

    def require(self, domain):
        if self.domain is not domain:
            raise WrongDomain(f"expected {domain.name} data, got {self.domain.name}")
        return self


# a stack of L coil images, data shaped [L, M_y, M_x]
CoilStack = ComplexImage


def check_dims(dims):
    """Validate a ``(M_x, M_y)`` pair and return it as ints."""
    try:
        mx, my = (int(d) for d in dims)
    except (TypeError, ValueError):
        raise BadDims(f"dims must be a (width, height) pair, got {dims!r}") from None
    if mx <= 0 or my <= 0:
        raise BadDims(f"dims must be positive, got {dims!r}")
    return mx, my
