"""Coordinate-format storage for incomplete third-order nonnegative tensors.

A dynamic QoS dataset is a user x service x time tensor that is almost
entirely unobserved. Only the observed entries are stored, together with
three precomputed per-mode indexes so that all entries touching a given
user, service, or time slice can be enumerated without scanning.

Tensors are immutable after construction and safe for concurrent reads.
"""

from typing import Iterable, NamedTuple, Sequence, Tuple

import numpy as np

from .errors import (
    DuplicateCoordinateError,
    IndexOutOfRangeError,
    InvalidConfigError,
    NegativeValueError,
)

MODES = ("user", "service", "time")


class Entry(NamedTuple):
    """One observed measurement: user i invoked service j at time k."""

    i: int
    j: int
    k: int
    value: float


def _bucketize(idx: np.ndarray, dim: int) -> list:
    """Group entry positions by their coordinate along one mode.

    Returns a list of position arrays, one per index 0..dim-1, each sorted
    ascending. Sorting is stable so positions appear in entry order.
    """
    order = np.argsort(idx, kind="stable")
    sorted_idx = idx[order]
    boundaries = np.searchsorted(sorted_idx, np.arange(dim + 1))
    return [order[boundaries[v]:boundaries[v + 1]] for v in range(dim)]


class ObservedTensor:
    """Incomplete third-order tensor with per-mode slice access.

    Entries are validated once at construction (bounds, nonnegativity,
    duplicate coordinates) and stored as parallel coordinate arrays.
    """

    def __init__(self, dims: Tuple[int, int, int], entries: Iterable[Entry]):
        rows = list(entries)
        n = len(rows)
        ii = np.empty(n, dtype=np.int64)
        jj = np.empty(n, dtype=np.int64)
        kk = np.empty(n, dtype=np.int64)
        values = np.empty(n, dtype=np.float64)
        for p, (i, j, k, v) in enumerate(rows):
            ii[p], jj[p], kk[p], values[p] = i, j, k, v
        self._init_arrays(dims, ii, jj, kk, values)

    @classmethod
    def from_arrays(cls, dims, ii, jj, kk, values) -> "ObservedTensor":
        """Construct from parallel coordinate arrays (same validation)."""
        obj = cls.__new__(cls)
        obj._init_arrays(
            dims,
            np.ascontiguousarray(ii, dtype=np.int64),
            np.ascontiguousarray(jj, dtype=np.int64),
            np.ascontiguousarray(kk, dtype=np.int64),
            np.ascontiguousarray(values, dtype=np.float64),
        )
        return obj

    def _init_arrays(self, dims, ii, jj, kk, values) -> None:
        dims = tuple(int(x) for x in dims)
        if len(dims) != 3 or any(x <= 0 for x in dims):
            raise InvalidConfigError(f"dims must be three positive integers, got {dims}")
        self.dims = dims

        for axis, idx in enumerate((ii, jj, kk)):
            bad = np.flatnonzero((idx < 0) | (idx >= dims[axis]))
            if bad.size:
                p = bad[0]
                raise IndexOutOfRangeError(
                    f"entry {p} has {MODES[axis]} index {idx[p]} outside [0, {dims[axis]})"
                )
        bad = np.flatnonzero(~np.isfinite(values) | (values < 0))
        if bad.size:
            p = bad[0]
            raise NegativeValueError(
                f"entry {p} at ({ii[p]}, {jj[p]}, {kk[p]}) has value {values[p]}; "
                "values must be nonnegative and finite"
            )

        linear = (ii * dims[1] + jj) * dims[2] + kk
        uniq, counts = np.unique(linear, return_counts=True)
        if np.any(counts > 1):
            lin = int(uniq[np.argmax(counts > 1)])
            k = lin % dims[2]
            j = (lin // dims[2]) % dims[1]
            i = lin // (dims[1] * dims[2])
            raise DuplicateCoordinateError(f"coordinate ({i}, {j}, {k}) appears more than once")

        self.ii = ii
        self.jj = jj
        self.kk = kk
        self.values = values
        self._slices = (
            _bucketize(ii, dims[0]),
            _bucketize(jj, dims[1]),
            _bucketize(kk, dims[2]),
        )

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n_entries(self) -> int:
        return self.values.shape[0]

    def density(self) -> float:
        """Fraction of cells observed: |entries| / (|I| * |J| * |K|)."""
        total = self.dims[0] * self.dims[1] * self.dims[2]
        return self.n_entries / total

    def mode_slice(self, mode: str, index: int) -> np.ndarray:
        """Positions of all entries whose coordinate along `mode` equals `index`."""
        axis = MODES.index(mode)
        dim = self.dims[axis]
        if not 0 <= index < dim:
            raise IndexOutOfRangeError(f"{mode} index {index} outside [0, {dim})")
        return self._slices[axis][index]

    def gather(self, positions: Sequence[int]) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Coordinate and value arrays for a subset of entry positions."""
        pos = np.asarray(positions, dtype=np.int64)
        return self.ii[pos], self.jj[pos], self.kk[pos], self.values[pos]

    def entry(self, position: int) -> Entry:
        return Entry(
            int(self.ii[position]),
            int(self.jj[position]),
            int(self.kk[position]),
            float(self.values[position]),
        )

    def __repr__(self) -> str:
        return (
            f"ObservedTensor(dims={self.dims}, entries={self.n_entries}, "
            f"density={self.density():.4g})"
        )


def build(dims: Tuple[int, int, int], raw: Iterable[Entry]) -> ObservedTensor:
    """Construct an ObservedTensor, validating every entry against `dims`."""
    return ObservedTensor(dims, raw)
