"""Hilbert curve of level k in d dimensions: encode, decode, snapping and projection.

Cells of level k are the 2^k equal slices per axis of [0, 1]^d, addressed by
integer coordinates in {0, ..., 2^k - 1}. The index of a cell is its position
on the curve, an unsigned integer of d*k bits.

Orientation: the transpose/Gray-code construction (Skilling). The curve
starts in the origin cell; within every level the most significant index
bit comes from the first axis. At level 1 in 2D the traversal is
(0,0) -> (0,1) -> (1,1) -> (1,0). In 1D the curve is the segment itself and
the index equals the cell coordinate.
"""

from dataclasses import dataclass
import math
from typing import Tuple

import numpy as np

from .errors import DimensionMismatchError, DomainError, UnsupportedPrecisionError
from .helpers import check_in_cube

MAX_INDEX_BITS = 64
MAX_EMBED_BITS = 52

_U = np.uint64
_ONE = _U(1)


@dataclass(frozen=True)
class CellCoord:
    """A level-k cell of the d-dimensional lattice."""

    dims: int
    level: int
    coords: Tuple[int, ...]

    def __post_init__(self):
        """Validate the cell."""
        _check_width(self.dims, self.level)
        if len(self.coords) != self.dims:
            raise DimensionMismatchError(
                f"cell has {len(self.coords)} coordinates, expected {self.dims}"
            )
        side = 1 << self.level
        if any(c < 0 or c >= side for c in self.coords):
            raise DomainError(f"cell coordinates must lie in [0, {side - 1}]")


@dataclass(frozen=True)
class HilbertIndex:
    """Position of a cell along the curve."""

    value: int
    dims: int
    level: int

    def __post_init__(self):
        """Validate the index."""
        _check_width(self.dims, self.level)
        if not 0 <= self.value < 1 << (self.dims * self.level):
            raise DomainError(
                f"index {self.value} outside [0, 2^{self.dims * self.level})"
            )


def _check_width(d: int, k: int):
    if d < 1 or k < 1:
        raise DomainError(f"dimension and level must be positive, got d={d}, k={k}")
    if d * k > MAX_INDEX_BITS:
        raise UnsupportedPrecisionError(
            f"d*k = {d * k} exceeds the supported index width of {MAX_INDEX_BITS} bits"
        )


def _exchange(X, i: int, Q, P):
    """Skilling's invert-or-exchange step on column i, vectorised over rows."""
    hit = (X[:, i] & Q) != 0
    if i == 0:
        X[:, 0] = np.where(hit, X[:, 0] ^ P, X[:, 0])
        return
    t = (X[:, 0] ^ X[:, i]) & P
    new_first = np.where(hit, X[:, 0] ^ P, X[:, 0] ^ t)
    X[:, i] = np.where(hit, X[:, i], X[:, i] ^ t)
    X[:, 0] = new_first


def _axes_to_transpose(X, k: int):
    d = X.shape[1]
    Q = _ONE << _U(k - 1)
    while Q > _ONE:
        P = Q - _ONE
        for i in range(d):
            _exchange(X, i, Q, P)
        Q >>= _ONE
    for i in range(1, d):
        X[:, i] ^= X[:, i - 1]
    t = np.zeros(X.shape[0], dtype=_U)
    Q = _ONE << _U(k - 1)
    while Q > _ONE:
        t = np.where((X[:, d - 1] & Q) != 0, t ^ (Q - _ONE), t)
        Q >>= _ONE
    X ^= t[:, None]
    return X


def _transpose_to_axes(X, k: int):
    d = X.shape[1]
    t = X[:, d - 1] >> _ONE
    for i in range(d - 1, 0, -1):
        X[:, i] ^= X[:, i - 1]
    X[:, 0] ^= t
    for bit in range(1, k):
        Q = _ONE << _U(bit)
        P = Q - _ONE
        for i in range(d - 1, -1, -1):
            _exchange(X, i, Q, P)
    return X


def _interleave(X, k: int):
    d = X.shape[1]
    h = np.zeros(X.shape[0], dtype=_U)
    for bit in range(k - 1, -1, -1):
        for i in range(d):
            h = (h << _ONE) | ((X[:, i] >> _U(bit)) & _ONE)
    return h


def _deinterleave(h, d: int, k: int):
    X = np.zeros((h.shape[0], d), dtype=_U)
    position = d * k - 1
    for bit in range(k - 1, -1, -1):
        for i in range(d):
            X[:, i] |= ((h >> _U(position)) & _ONE) << _U(bit)
            position -= 1
    return X


def encode_array(cells, k: int) -> np.ndarray:
    """Hilbert indices of an (M, d) array of level-k cells, as uint64."""
    cells = np.asarray(cells)
    if cells.ndim != 2:
        raise DimensionMismatchError("cells must be an (M, d) array")
    d = cells.shape[1]
    _check_width(d, k)
    if cells.size and (int(cells.min()) < 0 or int(cells.max()) >= 1 << k):
        raise DomainError(f"cell coordinates must lie in [0, {(1 << k) - 1}]")
    X = cells.astype(_U)
    if d == 1:
        return X[:, 0].copy()
    return _interleave(_axes_to_transpose(X, k), k)


def decode_array(indices, d: int, k: int) -> np.ndarray:
    """Cells of an array of Hilbert indices, as an (M, d) uint64 array."""
    _check_width(d, k)
    h = np.asarray(indices, dtype=_U).reshape(-1)
    if d * k < MAX_INDEX_BITS and h.size and int(h.max()) >= 1 << (d * k):
        raise DomainError(f"indices must lie in [0, 2^{d * k})")
    if d == 1:
        return h.reshape(-1, 1).copy()
    return _transpose_to_axes(_deinterleave(h, d, k), k)


def encode(cell: CellCoord) -> HilbertIndex:
    """Position of a cell on the curve."""
    value = int(encode_array(np.array([cell.coords], dtype=_U), cell.level)[0])
    return HilbertIndex(value=value, dims=cell.dims, level=cell.level)


def decode(index: HilbertIndex) -> CellCoord:
    """Cell at a position on the curve; the inverse of encode."""
    coords = decode_array(np.array([index.value], dtype=_U), index.dims, index.level)
    return CellCoord(
        dims=index.dims, level=index.level, coords=tuple(int(c) for c in coords[0])
    )


def snap_cells(points, k: int):
    """Cells containing points of [0, 1]^d and their centres, vectorised.

    The boundary value 1 belongs to the top cell.
    """
    points = np.asarray(points, dtype=np.float64)
    check_in_cube(points, 0.0, 1.0)
    side = 1 << k
    cells = np.minimum(np.floor(points * side), side - 1).astype(np.int64)
    centers = (cells + 0.5) / side
    return cells, centers


def snap_point(x, k: int):
    """Index of the cell containing x in [0, 1]^d, and the cell centre.

    The centre lies within sqrt(d) / 2^(k+1) of x.
    """
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    d = x.shape[1]
    _check_width(d, k)
    cells, centers = snap_cells(x, k)
    value = int(encode_array(cells, k)[0])
    return HilbertIndex(value=value, dims=d, level=k), centers[0]


def locality_bound(d: int, k: int) -> float:
    """Largest distance between a point of [0, 1]^d and its snapped centre."""
    return math.sqrt(d) / 2 ** (k + 1)


def _check_embedding(d: int, k: int):
    _check_width(d, k)
    if d * k > MAX_EMBED_BITS:
        raise UnsupportedPrecisionError(
            f"d*k = {d * k} exceeds the {MAX_EMBED_BITS} bits a float coordinate holds exactly"
        )


def project_coords(x, d: int, k: int) -> np.ndarray:
    """Collapse the first d coordinates of points in I^n onto one Hilbert coordinate.

    The first d coordinates are mapped affinely to [0, 1]^d and snapped to
    their level-k cell. The cell index h is embedded as the centre
    (h + 1/2) / 2^(dk) of its slot in [0, 1] and mapped back to [-1, 1], so
    for d = 1 the coordinate is quantized to its cell centre. Accepts a
    single point or an (M, n) array and returns points of I^(n-d+1).
    """
    points = np.asarray(x, dtype=np.float64)
    single = points.ndim == 1
    points = points.reshape(1, -1) if single else points
    n = points.shape[1]
    if not 1 <= d <= n:
        raise DimensionMismatchError(f"cannot collapse {d} of {n} coordinates")
    _check_embedding(d, k)
    check_in_cube(points)
    cells, _ = snap_cells((points[:, :d] + 1.0) / 2.0, k)
    scalar = (encode_array(cells, k).astype(np.float64) + 0.5) / float(1 << (d * k))
    projected = np.concatenate([(2.0 * scalar - 1.0)[:, None], points[:, d:]], axis=1)
    return projected[0] if single else projected


def lift_coords(z, d: int, k: int, n: int) -> np.ndarray:
    """Map reduced points back to I^n through the centre of their Hilbert cell.

    Scalars that are not exactly on the embedding lattice go to the nearest
    index. A right inverse of project_coords on its image.
    """
    points = np.asarray(z, dtype=np.float64)
    single = points.ndim == 1
    points = points.reshape(1, -1) if single else points
    if points.shape[1] != n - d + 1:
        raise DimensionMismatchError(
            f"reduced points need {n - d + 1} coordinates, got {points.shape[1]}"
        )
    _check_embedding(d, k)
    check_in_cube(points)
    slots = float(1 << (d * k))
    # exact for d*k <= MAX_EMBED_BITS; clipped before the unsigned cast
    index = np.clip(np.floor((points[:, 0] + 1.0) / 2.0 * slots), 0.0, slots - 1.0)
    cells = decode_array(index.astype(_U), d, k).astype(np.float64)
    centers = 2.0 * (cells + 0.5) / (1 << k) - 1.0
    lifted = np.concatenate([centers, points[:, 1:]], axis=1)
    return lifted[0] if single else lifted
