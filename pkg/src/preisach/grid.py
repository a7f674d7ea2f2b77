"""Half-plane threshold grid and triangular measures with 2D prefix sums.

Grid nodes sit at ``origin + i * delta`` for i = 1..L; a cell (i, j) with
i >= j holds the relay with alpha = node i, beta = node j.  The measure is
stored sparsely; the dense prefix table is built lazily and embeds the
triangle in a square with zeros above the diagonal so cumulative sums are
branch free.  Float grids use numpy; exact grids keep Python numbers
(int/Fraction) end to end.
"""

from __future__ import annotations

import bisect
import csv
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np


class HalfPlaneGrid:
    """Discretised threshold half-plane: L nodes spaced delta above origin."""

    def __init__(self, size: int, delta, origin=0.0):
        if size < 1:
            raise ValueError("grid size must be >= 1")
        if not delta > 0:
            raise ValueError("grid spacing must be > 0")
        self.size = int(size)
        self.delta = delta
        self.origin = origin
        self.exact = isinstance(delta, (int, Fraction)) and isinstance(origin, (int, Fraction))
        self.nodes: List = [origin + i * delta for i in range(1, self.size + 1)]
        self._np_nodes = None if self.exact else np.asarray(self.nodes, dtype=float)

    def node(self, i: int):
        """Value of node i (1-based)."""
        if not 1 <= i <= self.size:
            raise IndexError(f"node index {i} outside 1..{self.size}")
        return self.nodes[i - 1]

    def count_le(self, x) -> int:
        """Number of nodes <= x."""
        return bisect.bisect_right(self.nodes, x)

    def count_lt(self, x) -> int:
        """Number of nodes < x."""
        return bisect.bisect_left(self.nodes, x)

    def exact_index(self, x) -> Optional[int]:
        """1-based node index if x lies exactly on the lattice, else None."""
        k = bisect.bisect_right(self.nodes, x)
        if k and self.nodes[k - 1] == x:
            return k
        return None

    def cell_count(self) -> int:
        return self.size * (self.size + 1) // 2

    def iter_cells(self) -> Iterable[Tuple[int, int]]:
        for i in range(1, self.size + 1):
            for j in range(1, i + 1):
                yield i, j

    def __eq__(self, other):
        return (isinstance(other, HalfPlaneGrid)
                and (self.size, self.delta, self.origin) == (other.size, other.delta, other.origin))

    def __repr__(self):
        return f"HalfPlaneGrid(size={self.size}, delta={self.delta!r}, origin={self.origin!r})"


class TriangularMeasure:
    """Signed weights on the grid cells i >= j, with lazy prefix sums.

    Immutable once a prefix table exists; evaluation paths only read.
    Summation order for float totals is row-major over cells, which the
    dense paths share, so documented determinism holds.
    """

    def __init__(self, grid: HalfPlaneGrid, cells: Optional[Dict[Tuple[int, int], object]] = None):
        self.grid = grid
        self.cells: Dict[Tuple[int, int], object] = {}
        self._prefix = None
        self._dense = None
        if cells:
            for (i, j), w in cells.items():
                self.set_cell(i, j, w)

    @property
    def exact(self) -> bool:
        if self.grid.exact:
            return True
        return any(isinstance(w, (Fraction,)) for w in self.cells.values())

    def set_cell(self, i: int, j: int, w) -> None:
        if self._prefix is not None:
            raise ValueError("measure is frozen once evaluated")
        if not (1 <= j <= i <= self.grid.size):
            raise ValueError(f"cell ({i},{j}) outside the half-plane triangle")
        if w == 0:
            self.cells.pop((i, j), None)
        else:
            self.cells[(i, j)] = w

    def add_cell(self, i: int, j: int, w) -> None:
        cur = self.cells.get((i, j), 0)
        self.set_cell(i, j, cur + w)

    def weight(self, i: int, j: int):
        return self.cells.get((i, j), 0)

    def total(self):
        return sum(self.cells.values()) if self.cells else 0.0

    # -- algebra (linearity in the measure) -----------------------------------

    def scaled(self, a) -> "TriangularMeasure":
        return TriangularMeasure(self.grid, {k: a * w for k, w in self.cells.items()})

    def plus(self, other: "TriangularMeasure") -> "TriangularMeasure":
        if other.grid != self.grid:
            raise ValueError("measures on different grids")
        out = dict(self.cells)
        for k, w in other.cells.items():
            out[k] = out.get(k, 0) + w
        return TriangularMeasure(self.grid, out)

    # -- dense / prefix layouts ------------------------------------------------

    def dense(self):
        """(L+1)x(L+1) array, [i][j] 1-based, zeros above the diagonal."""
        if self._dense is None:
            L = self.grid.size
            if self.exact:
                d = [[0] * (L + 1) for _ in range(L + 1)]
                for (i, j), w in self.cells.items():
                    d[i][j] = w
            else:
                d = np.zeros((L + 1, L + 1))
                for (i, j), w in self.cells.items():
                    d[i, j] = w
            self._dense = d
        return self._dense

    def prefix(self):
        """Cumulative table PS with PS[i][j] = sum of cells (<=i, <=j)."""
        if self._prefix is None:
            L = self.grid.size
            d = self.dense()
            if self.exact:
                ps = [[0] * (L + 1) for _ in range(L + 1)]
                for i in range(1, L + 1):
                    row = ps[i]
                    prev = ps[i - 1]
                    di = d[i]
                    acc = 0
                    for j in range(1, L + 1):
                        acc += di[j]
                        row[j] = prev[j] + acc
                self._prefix = ps
            else:
                ps = np.zeros((L + 1, L + 1))
                ps[1:, 1:] = np.cumsum(np.cumsum(d[1:, 1:], axis=0), axis=1)
                self._prefix = ps
        return self._prefix

    def rect_sum(self, ia: int, ib: int, ja: int, jb: int):
        """Sum of weights over cells with ia < i <= ib and ja < j <= jb (0-based counts)."""
        if ib <= ia or jb <= ja:
            return 0
        ps = self.prefix()
        if self.exact:
            return ps[ib][jb] - ps[ia][jb] - ps[ib][ja] + ps[ia][ja]
        return ps[ib, jb] - ps[ia, jb] - ps[ib, ja] + ps[ia, ja]

    # -- CSV interface -----------------------------------------------------------

    @classmethod
    def from_csv(cls, path, grid: HalfPlaneGrid) -> "TriangularMeasure":
        m = cls(grid)
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["i", "j", "mu"]:
                raise MeasureFormatError(f"{path}: expected header i,j,mu")
            seen = set()
            for row_no, row in enumerate(reader, start=2):
                try:
                    i = int(row["i"])
                    j = int(row["j"])
                    w = float(row["mu"])
                except (TypeError, ValueError) as exc:
                    raise MeasureFormatError(f"{path}:{row_no}: bad row {row!r}") from exc
                if j > i:
                    raise MeasureFormatError(f"{path}:{row_no}: cell ({i},{j}) has i < j")
                if (i, j) in seen:
                    raise MeasureFormatError(f"{path}:{row_no}: duplicate cell ({i},{j})")
                seen.add((i, j))
                try:
                    m.set_cell(i, j, w)
                except ValueError as exc:
                    raise MeasureFormatError(f"{path}:{row_no}: {exc}") from exc
        return m

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "mu"])
            for (i, j) in sorted(self.cells):
                writer.writerow([i, j, repr(float(self.cells[(i, j)]))
                                 if not self.exact else str(self.cells[(i, j)])])

    def __repr__(self):
        return f"TriangularMeasure({self.grid!r}, {len(self.cells)} cells)"


class MeasureFormatError(ValueError):
    """Raised for malformed measure files."""
