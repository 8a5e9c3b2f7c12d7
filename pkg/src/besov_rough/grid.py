"""Uniform dyadic grids, sampled paths, and two-parameter fields.

Everything downstream (norms, sewing, rough paths) consumes the three types
defined here.  Grids are dyadic only: n = 2**level + 1 nodes on [0, T], with
node times exactly i*T/2**level.  Values are float64 throughout; all types are
immutable after construction and every operation is a pure function.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "UniformGrid",
    "GridPath",
    "TwoParamField",
    "delta",
    "delta2",
    "load_path_csv",
    "save_path_csv",
    "load_germ_csv",
    "save_field_csv",
    "GridFormatError",
]

# Dense storage is mandatory below this level (see TwoParamField.auto_mode);
# lazily evaluated germ closures take over on finer grids to avoid O(n^2)
# memory.
EAGER_LEVEL_LIMIT = 12


class GridFormatError(ValueError):
    """Malformed path/germ input (non-dyadic times, bad shape, bad header)."""


@dataclass(frozen=True)
class UniformGrid:
    """Dyadic grid on [0, horizon] with 2**level + 1 nodes."""

    horizon: float
    level: int

    def __post_init__(self):
        if not (self.horizon > 0):
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.level < 0 or self.level != int(self.level):
            raise ValueError(f"level must be a nonnegative integer, got {self.level}")

    @property
    def n(self) -> int:
        return (1 << self.level) + 1

    @property
    def n_cells(self) -> int:
        return 1 << self.level

    @property
    def mesh(self) -> float:
        return self.horizon / (1 << self.level)

    def times(self) -> np.ndarray:
        return np.arange(self.n) * (self.horizon / (1 << self.level))

    def time(self, i: int) -> float:
        return i * self.horizon / (1 << self.level)

    def refine(self, k: int) -> "UniformGrid":
        """Grid with level + k; contains every node of this grid."""
        if k < 0:
            raise ValueError("refine expects k >= 0")
        return UniformGrid(self.horizon, self.level + k)

    def coarsen(self, k: int) -> "UniformGrid":
        if k < 0 or k > self.level:
            raise ValueError(f"cannot coarsen level {self.level} grid by {k}")
        return UniformGrid(self.horizon, self.level - k)


class GridPath:
    """A path sampled on a uniform dyadic grid, values in R^m.

    ``values`` has shape (grid.n, m); it is copied and frozen at construction.
    """

    def __init__(self, grid: UniformGrid, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] != grid.n:
            raise ValueError(
                f"values must have shape ({grid.n}, m), got {values.shape}"
            )
        values = values.copy()
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def component(self, j: int) -> "GridPath":
        return GridPath(self.grid, self.values[:, j])

    def subsample(self, k: int) -> "GridPath":
        """Pointwise evaluation on the k-times-coarser grid."""
        if k == 0:
            return self
        return GridPath(self.grid.coarsen(k), self.values[:: 1 << k])

    def restrict(self, i0: int, i1: int) -> "GridPath":
        """Restriction to nodes [i0, i1]; i1 - i0 must be a power of two."""
        span = i1 - i0
        if span <= 0 or span & (span - 1):
            raise ValueError(f"restriction span {span} is not a power of two")
        sub = UniformGrid(span * self.grid.mesh, span.bit_length() - 1)
        return GridPath(sub, self.values[i0 : i1 + 1])

    def __add__(self, other: "GridPath") -> "GridPath":
        _check_same(self, other)
        return GridPath(self.grid, self.values + other.values)

    def __sub__(self, other: "GridPath") -> "GridPath":
        _check_same(self, other)
        return GridPath(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "GridPath":
        return GridPath(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __repr__(self):
        return f"GridPath(level={self.grid.level}, T={self.grid.horizon}, m={self.dim})"


def _check_same(a, b):
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


class TwoParamField:
    """Two-parameter array A[i][j] in R^m on grid pairs i <= j.

    Two storage modes that agree entrywise:

    * eager -- a dense (n, n, m) array (entries below the diagonal ignored),
    * lazy  -- a vectorized germ closure ``germ(ii, jj) -> (len, m)`` evaluated
      on demand, which keeps O(n) memory for fine grids.

    ``auto`` mode materializes eagerly below level 12 and stays lazy above.
    Band access (all entries A[i, i+k]) is the workhorse for every norm.
    """

    def __init__(
        self,
        grid: UniformGrid,
        dim: int,
        dense: Optional[np.ndarray] = None,
        germ: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
    ):
        if (dense is None) == (germ is None):
            raise ValueError("exactly one of dense/germ must be given")
        self.grid = grid
        self.dim = dim
        self._germ = germ
        if dense is not None:
            dense = np.asarray(dense, dtype=np.float64)
            if dense.ndim == 2:
                dense = dense[:, :, None]
            if dense.shape != (grid.n, grid.n, dim):
                raise ValueError(
                    f"dense must have shape ({grid.n}, {grid.n}, {dim}),"
                    f" got {dense.shape}"
                )
        self._dense = dense

    # -- constructors ------------------------------------------------------
    @classmethod
    def from_dense(cls, grid: UniformGrid, dense: np.ndarray) -> "TwoParamField":
        dense = np.asarray(dense, dtype=np.float64)
        m = 1 if dense.ndim == 2 else dense.shape[2]
        return cls(grid, m, dense=dense)

    @classmethod
    def from_germ(
        cls,
        grid: UniformGrid,
        dim: int,
        germ: Callable[[np.ndarray, np.ndarray], np.ndarray],
        mode: str = "auto",
    ) -> "TwoParamField":
        field = cls(grid, dim, germ=germ)
        if mode == "eager" or (mode == "auto" and grid.level < EAGER_LEVEL_LIMIT):
            return field.materialize()
        if mode not in ("auto", "lazy"):
            raise ValueError(f"unknown mode {mode!r}")
        return field

    @property
    def is_lazy(self) -> bool:
        return self._dense is None

    def materialize(self) -> "TwoParamField":
        """Eager copy; agrees entrywise with the lazy evaluator."""
        if self._dense is not None:
            return self
        n = self.grid.n
        dense = np.zeros((n, n, self.dim))
        for k in range(1, n):
            idx = np.arange(n - k)
            dense[idx, idx + k] = self._germ(idx, idx + k)
        return TwoParamField(self.grid, self.dim, dense=dense)

    # -- access ------------------------------------------------------------
    def band(self, k: int) -> np.ndarray:
        """All entries A[i, i+k] for i = 0..n-1-k, shape (n-k, m).

        The zero band is the stored diagonal in dense mode and zero for
        germ-backed fields (increment-type germs vanish on the diagonal).
        """
        n = self.grid.n
        if not 0 <= k < n:
            raise IndexError(f"band offset {k} out of range for n={n}")
        if k == 0 and self._dense is None:
            return np.zeros((n, self.dim))
        if self._dense is not None:
            idx = np.arange(n - k)
            return self._dense[idx, idx + k]
        idx = np.arange(n - k)
        return np.asarray(self._germ(idx, idx + k), dtype=np.float64).reshape(
            n - k, self.dim
        )

    def pairs(self, ii: np.ndarray, jj: np.ndarray) -> np.ndarray:
        """Entries A[ii, jj] for index arrays with ii <= jj, shape (len, m)."""
        ii = np.asarray(ii, dtype=np.intp)
        jj = np.asarray(jj, dtype=np.intp)
        if np.any(ii > jj):
            raise IndexError("pairs requires ii <= jj")
        if self._dense is not None:
            return self._dense[ii, jj]
        out = np.asarray(self._germ(ii, jj), dtype=np.float64).reshape(
            len(ii), self.dim
        )
        if np.any(ii == jj):
            out = out.copy()
            out[ii == jj] = 0.0
        return out

    def at(self, i: int, j: int) -> np.ndarray:
        return self.pairs(np.array([i]), np.array([j]))[0]

    def delta2(self, i: int, u: int, j: int) -> np.ndarray:
        """A[i][j] - A[i][u] - A[u][j] for i <= u <= j."""
        if not i <= u <= j:
            raise IndexError(f"delta2 needs i <= u <= j, got {(i, u, j)}")
        ii = np.array([i, i, u])
        jj = np.array([j, u, j])
        v = self.pairs(ii, jj)
        return v[0] - v[1] - v[2]

    def delta2_bands(self, u_off: int, k: int) -> np.ndarray:
        """delta2(i, i+u_off, i+k) for all i, vectorized over the band."""
        if not 0 <= u_off <= k:
            raise IndexError("delta2_bands needs 0 <= u_off <= k")
        n = self.grid.n
        top = self.band(k)
        left = self.band(u_off)[: n - k]
        right = self.band(k - u_off)[u_off : u_off + n - k]
        return top - left - right

    def to_dense(self) -> np.ndarray:
        return self.materialize()._dense

    def restrict(self, i0: int, i1: int) -> "TwoParamField":
        span = i1 - i0
        if span <= 0 or span & (span - 1):
            raise ValueError(f"restriction span {span} is not a power of two")
        sub = UniformGrid(span * self.grid.mesh, span.bit_length() - 1)
        if self._dense is not None:
            return TwoParamField(
                sub, self.dim, dense=self._dense[i0 : i1 + 1, i0 : i1 + 1]
            )
        germ = self._germ
        return TwoParamField(
            sub, self.dim, germ=lambda ii, jj: germ(ii + i0, jj + i0)
        )

    # -- linear structure ----------------------------------------------------
    def _combine(self, other, f):
        if isinstance(other, TwoParamField):
            if other.grid != self.grid or other.dim != self.dim:
                raise ValueError("field mismatch")
            if self._dense is not None and other._dense is not None:
                return TwoParamField(
                    self.grid, self.dim, dense=f(self._dense, other._dense)
                )
            a, b = self, other
            return TwoParamField(
                self.grid,
                self.dim,
                germ=lambda ii, jj: f(a.pairs(ii, jj), b.pairs(ii, jj)),
            )
        raise TypeError(f"cannot combine TwoParamField with {type(other)}")

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __mul__(self, scalar):
        c = float(scalar)
        if self._dense is not None:
            return TwoParamField(self.grid, self.dim, dense=self._dense * c)
        germ = self._germ
        return TwoParamField(self.grid, self.dim, germ=lambda ii, jj: c * germ(ii, jj))

    __rmul__ = __mul__

    def __repr__(self):
        mode = "lazy" if self.is_lazy else "eager"
        return (
            f"TwoParamField(level={self.grid.level}, m={self.dim}, {mode})"
        )


def delta(path: GridPath, mode: str = "auto") -> TwoParamField:
    """Increment field of a path: result[i][j] = f_j - f_i."""
    values = path.values
    return TwoParamField.from_germ(
        path.grid, path.dim, lambda ii, jj: values[jj] - values[ii], mode=mode
    )


def delta2(field: TwoParamField, i: int, u: int, j: int) -> np.ndarray:
    """Second difference A[i][j] - A[i][u] - A[u][j]; zero iff A is additive."""
    return field.delta2(i, u, j)


# -- CSV interchange ---------------------------------------------------------

def load_path_csv(path, tol: float = 1e-12) -> GridPath:
    """Read a path from CSV with header ``t,v0,...,v{m-1}``.

    Times must be strictly increasing and dyadic to within tol*T.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise GridFormatError(f"{path}: empty file")
        if not header or header[0].strip() != "t":
            raise GridFormatError(f"{path}: header must start with 't'")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise GridFormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise GridFormatError(f"{path}: no data rows")
    data = np.asarray(rows)
    if data.shape[1] != len(header):
        raise GridFormatError(f"{path}: ragged rows")
    times, values = data[:, 0], data[:, 1:]
    n = len(times)
    level = (n - 1).bit_length() - 1
    if n != (1 << level) + 1:
        raise GridFormatError(f"{path}: {n} rows; need 2^L + 1 nodes")
    horizon = float(times[-1])
    if horizon <= 0:
        raise GridFormatError(f"{path}: final time must be positive")
    grid = UniformGrid(horizon, level)
    if np.any(np.diff(times) <= 0):
        raise GridFormatError(f"{path}: times not strictly increasing")
    if np.max(np.abs(times - grid.times())) > tol * horizon:
        raise GridFormatError(f"{path}: times not dyadic within {tol:g}*T")
    return GridPath(grid, values)


def save_path_csv(path, grid_path: GridPath) -> None:
    m = grid_path.dim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"v{j}" for j in range(m)])
        for t, row in zip(grid_path.grid.times(), grid_path.values):
            writer.writerow([repr(float(t))] + [repr(float(x)) for x in row])


def load_germ_csv(path, horizon: float = 1.0) -> TwoParamField:
    """Read an upper-triangular germ from CSV rows ``i,j,v0,...``.

    Missing pairs default to zero; the node count is inferred from the largest
    index and must be 2^L + 1.
    """
    entries = []
    max_idx = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or row[0].strip().startswith("i"):
                continue
            try:
                i, j = int(row[0]), int(row[1])
                vals = [float(x) for x in row[2:]]
            except ValueError as exc:
                raise GridFormatError(f"{path}:{lineno}: {exc}") from None
            if i > j or i < 0:
                raise GridFormatError(f"{path}:{lineno}: need 0 <= i <= j")
            if not vals:
                raise GridFormatError(f"{path}:{lineno}: missing values")
            entries.append((i, j, vals))
            max_idx = max(max_idx, j)
    if not entries:
        raise GridFormatError(f"{path}: no germ rows")
    level = max_idx.bit_length() - 1
    if max_idx != 1 << level:
        raise GridFormatError(f"{path}: max index {max_idx} is not a power of two")
    m = len(entries[0][2])
    grid = UniformGrid(horizon, level)
    dense = np.zeros((grid.n, grid.n, m))
    for i, j, vals in entries:
        if len(vals) != m:
            raise GridFormatError(f"{path}: inconsistent value dimension")
        dense[i, j] = vals
    return TwoParamField(grid, m, dense=dense)


def save_field_csv(path, field: TwoParamField) -> None:
    n = field.grid.n
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j"] + [f"c{j}" for j in range(field.dim)])
        for k in range(1, n):
            band = field.band(k)
            for i in range(n - k):
                writer.writerow([i, i + k] + [repr(float(x)) for x in band[i]])
