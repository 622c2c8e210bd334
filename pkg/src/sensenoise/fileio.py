"""Map and covariance file formats.

Real-valued maps can be written as

* CSV: one grid row per line, ``%.17g`` so values survive a round trip;
* FMAP v1: ASCII header ``FMAP 1 <M_x> <M_y>\\n`` then little-endian float64,
  row-major;
* PGM: 16-bit binary grayscale (``P5``, maxval 65535) with a ``.txt`` sidecar
  recording the min/max used for quantization. Optionally log-scaled as
  ``log10(1 + map)`` first. NaN pixels are written as 0.

Coil covariances are CSV files of L rows of L values; a complex covariance
is given as a pair of files (real part, imaginary part).
"""

import os
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, ParseError
from .noise import CoilCovariance, Scale

FMAP_MAGIC = "FMAP"
FORMATS = ("csv", "fmap", "pgm")


def write_csv_grid(path, grid):
    np.savetxt(path, np.asarray(grid, dtype=float), delimiter=",", fmt="%.17g")


def read_csv_grid(path):
    try:
        grid = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return grid


def write_fmap(path, grid):
    grid = np.asarray(grid, dtype=float)
    my, mx = grid.shape
    with open(path, "wb") as f:
        f.write(f"{FMAP_MAGIC} 1 {mx} {my}\n".encode("ascii"))
        f.write(np.ascontiguousarray(grid, dtype="<f8").tobytes())


def read_fmap(path):
    with open(os.fspath(path), "rb") as f:
        header = f.readline(256)
        payload = f.read()
    try:
        magic, version, mx, my = header.decode("ascii").split()
        mx, my = int(mx), int(my)
    except (UnicodeDecodeError, ValueError):
        raise ParseError(f"{path}: bad FMAP header {header[:64]!r}") from None
    if magic != FMAP_MAGIC or version != "1" or min(mx, my) <= 0:
        raise ParseError(f"{path}: not an FMAP v1 file")
    if len(payload) != mx * my * 8:
        raise ParseError(f"{path}: payload has {len(payload)} bytes, header implies {mx * my * 8}")
    return np.frombuffer(payload, dtype="<f8").reshape(my, mx).copy()


def _sidecar(path):
    return Path(path).with_suffix(".txt")


def write_pgm(path, grid, log_scale=False):
    """16-bit PGM plus ``<name>.txt`` sidecar with the quantization range."""
    grid = np.asarray(grid, dtype=float)
    if log_scale:
        grid = np.log10(1.0 + np.clip(grid, 0.0, None))
    finite = np.isfinite(grid)
    lo = float(grid[finite].min()) if finite.any() else 0.0
    hi = float(grid[finite].max()) if finite.any() else 0.0
    span = hi - lo
    q = np.zeros(grid.shape, dtype=">u2")
    if span > 0:
        q[finite] = np.rint((grid[finite] - lo) / span * 65535).astype(np.uint16)
    my, mx = grid.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{mx} {my}\n65535\n".encode("ascii"))
        f.write(q.tobytes())
    _sidecar(path).write_text(f"min {lo!r}\nmax {hi!r}\nlog_scale {int(bool(log_scale))}\n")


def read_pgm(path):
    """Decode a 16-bit PGM written by :func:`write_pgm` back to map units.

    Returns ``(grid, log_scale)``; values are the quantized ones and, when
    ``log_scale`` is set, still in ``log10(1 + map)`` units.
    """
    with open(os.fspath(path), "rb") as f:
        magic, size, maxval = f.readline(16), f.readline(64), f.readline(16)
        raw = f.read()
    try:
        mx, my = (int(v) for v in size.split())
    except ValueError:
        raise ParseError(f"{path}: bad PGM size line {size!r}") from None
    if magic.strip() != b"P5" or maxval.strip() != b"65535":
        raise ParseError(f"{path}: not a 16-bit binary PGM")
    if len(raw) != mx * my * 2:
        raise ParseError(f"{path}: pixel payload has {len(raw)} bytes, expected {mx * my * 2}")
    q = np.frombuffer(raw, dtype=">u2").reshape(my, mx).astype(float)
    meta = dict(line.split(None, 1) for line in _sidecar(path).read_text().splitlines() if line.strip())
    lo, hi = float(meta["min"]), float(meta["max"])
    return lo + q / 65535 * (hi - lo), bool(int(meta.get("log_scale", "0")))


def write_map(stem, grid, formats=FORMATS, log_scale=False):
    """Write ``grid`` as ``<stem>.<fmt>`` for each requested format; returns the paths."""
    paths = []
    for fmt in formats:
        path = Path(f"{stem}.{fmt}")
        if fmt == "csv":
            write_csv_grid(path, grid)
        elif fmt == "fmap":
            write_fmap(path, grid)
        elif fmt == "pgm":
            write_pgm(path, grid, log_scale)
        else:
            raise ValueError(f"unknown map format {fmt!r}")
        paths.append(path)
    return paths


def read_map(path):
    """Read a CSV or FMAP map, chosen by extension."""
    suffix = Path(path).suffix.lower()
    if suffix == ".fmap":
        return read_fmap(path)
    if suffix == ".csv":
        return read_csv_grid(path)
    raise ParseError(f"{path}: unsupported map extension {suffix!r} (use .fmap or .csv)")


def load_covariance_csv(path, imag_path=None, scale=Scale.XSPACE_FULL, r=1):
    """Coil covariance from an L x L CSV (plus an optional imaginary-part CSV)."""
    real = read_csv_grid(path)
    sigma = real.astype(complex)
    if imag_path is not None:
        imag = read_csv_grid(imag_path)
        if imag.shape != real.shape:
            raise DimensionMismatch(f"real part {real.shape} vs imaginary part {imag.shape}")
        sigma = sigma + 1j * imag
    if sigma.shape[0] != sigma.shape[1]:
        raise ParseError(f"{path}: covariance must be square, got {sigma.shape}")
    return CoilCovariance(sigma, scale, r)


def save_covariance_csv(path, cov, imag_path=None):
    write_csv_grid(path, cov.sigma.real)
    if imag_path is not None:
        write_csv_grid(imag_path, cov.sigma.imag)
    elif not cov.is_real:
        raise ValueError("complex covariance needs imag_path")
