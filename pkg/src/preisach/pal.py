"""Measure evaluation over the relay grid: naive, staircase, and incremental.

The three paths are interchangeable: ``pal_eval_naive`` reads every stored
cell's relay, ``pal_eval_staircase`` integrates the measure over the ON
region delimited by the corner staircase with 2D prefix sums (O(depth) per
query), and ``PalAccumulator`` maintains the value across updates touching
only cells whose relay flipped.  Equality is exact for exact (rational)
measures; float mode agrees to summation-order rounding.

Grid-diagonal point cells (alpha == beta == node) follow the relay's ON
priority, so they are ON exactly when the current input is at or above the
node; the staircase and incremental paths carry explicit corrections for
the one cell the band decomposition cannot see.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .grid import HalfPlaneGrid, TriangularMeasure
from .hysteresis import FALLING, NO_DIRECTION, RISING, ReducedMemory


def _zero(measure: TriangularMeasure):
    return 0 if measure.exact else 0.0


def pal_eval_naive(measure: TriangularMeasure, rm: ReducedMemory):
    """Sum mu_ij * relay(alpha_i, beta_j) over the stored cells."""
    nodes = measure.grid.nodes
    total = _zero(measure)
    for (i, j), w in measure.cells.items():
        total += w * rm.relay(nodes[i - 1], nodes[j - 1])
    return total


def pal_eval_naive_grid(measure: TriangularMeasure, rm: ReducedMemory) -> float:
    """Vectorized full-grid naive evaluation (float mode).

    Same per-cell read semantics as pal_eval_naive, used where the O(L^2)
    per-step path must run at benchmark scale.
    """
    if measure.exact:
        raise ValueError("vectorized naive path is float-only")
    grid = measure.grid
    nodes = np.asarray(grid.nodes, dtype=float)
    alphas = nodes[:, None]
    betas = nodes[None, :]
    states = rm.relay_grid(alphas, betas)  # (L, L); cells above diagonal unused
    dense = measure.dense()[1:, 1:]
    return float(np.sum(dense * states))


def _band_rect(measure: TriangularMeasure, x_lo, x_hi, ja: int, jb: int):
    grid = measure.grid
    ia = 0 if x_lo is None else grid.count_le(x_lo)
    ib = grid.count_le(x_hi)
    return measure.rect_sum(ia, ib, ja, jb)


def _diag_weight(measure: TriangularMeasure, x):
    """Weight of the diagonal cell at the exact lattice value x, else 0."""
    k = measure.grid.exact_index(x)
    if k is None:
        return _zero(measure)
    return measure.weight(k, k)


def pal_eval_staircase(measure: TriangularMeasure, rm: ReducedMemory):
    """Integrate the measure over the ON region via prefix sums, O(depth)."""
    if rm.is_empty:
        return _zero(measure)
    grid = measure.grid
    total = _zero(measure)
    for extent, row_lo, row_hi in rm.staircase_bands():
        ja = 0 if row_lo is None else grid.count_lt(row_lo)
        jb = grid.size if row_hi is None else grid.count_lt(row_hi)
        total += _band_rect(measure, None, extent, ja, jb)
    if rm.direction == FALLING:
        total += _diag_weight(measure, rm.corners[-1])
    return total


class PalAccumulator:
    """Incremental evaluator: owns a memory and keeps the PAL value current.

    Each update applies rectangle deltas for the row bands whose ON extent
    changed (monotone growth, excursion wipes, peak/trough extension) plus
    the diagonal point-cell corrections.  Equals pal_eval_staircase after
    every push; exact in rational mode.
    """

    def __init__(self, measure: TriangularMeasure, rm: Optional[ReducedMemory] = None,
                 value=None):
        self.measure = measure
        self.rm = rm if rm is not None else ReducedMemory()
        self.value = pal_eval_staircase(measure, self.rm) if value is None else value
        self._journal: list = []

    def _rect_rows(self, x_lo, x_hi, row_lo, row_hi, hi_inclusive: bool):
        grid = self.measure.grid
        ja = 0 if row_lo is None else grid.count_lt(row_lo)
        if row_hi is None:
            jb = grid.size
        elif hi_inclusive:
            jb = grid.count_le(row_hi)
        else:
            jb = grid.count_lt(row_hi)
        ia = 0 if x_lo is None else grid.count_le(x_lo)
        ib = grid.count_le(x_hi)
        return self.measure.rect_sum(ia, ib, ja, jb)

    def push(self, u):
        rm = self.rm
        r_pre = rm.depth
        if r_pre:
            a_pre = rm.corners[-1]
            dir_pre = rm.direction
            peak0 = rm.peak
            trough0 = rm.trough
        journal = self._journal
        journal.clear()
        rm.update(u, journal)
        if not journal:
            return self.value  # plateau
        delta = _zero(self.measure)
        rising = r_pre == 0 or u > a_pre
        for rec in journal:
            kind = rec[0]
            if kind == "set":
                delta += self._rect_rows(None, u, None, None, False)
            elif kind == "replace":
                _, d, a, _u, c2, c3 = rec
                if d == RISING:
                    delta += self._rect_rows(a, u, c2, u, True)
                else:
                    row_lo = u
                    if c3 is not None and c3 > row_lo:
                        row_lo = c3
                    if trough0 > row_lo:
                        row_lo = trough0
                    delta -= self._rect_rows(None, c2, row_lo, a, False)
            elif kind == "append":
                _, d, a, _u, c2 = rec
                if d == RISING:
                    if r_pre == 1:
                        delta += self._rect_rows(a, u, None, u, True)
                    else:
                        delta += self._rect_rows(None, u, a, u, True)
                else:
                    if r_pre == 1:
                        delta -= self._rect_rows(None, a, u, a, True)
                    else:
                        row_lo = u
                        if c2 is not None and c2 > row_lo:
                            row_lo = c2
                        if trough0 > row_lo:
                            row_lo = trough0
                        delta -= self._rect_rows(None, a, row_lo, a, True)
            else:  # wipe
                _, d, X, Y, P, m2 = rec
                if d == RISING:
                    delta += self._rect_rows(X, u, P, Y, False)
                else:
                    row_lo = u
                    if m2 is not None and m2 > row_lo:
                        row_lo = m2
                    if trough0 > row_lo:
                        row_lo = trough0
                    delta -= self._rect_rows(None, P, row_lo, X, False)
        if r_pre >= 2:
            if rising and u > peak0:
                delta += self._rect_rows(peak0, u, None, trough0, False)
            elif not rising and u < trough0:
                delta -= self._rect_rows(None, peak0, u, trough0, False)
        # diagonal point cells: ON exactly when the current input reaches them
        if r_pre >= 1:
            if rising:
                if dir_pre == FALLING:
                    delta -= _diag_weight(self.measure, a_pre)
            else:
                delta += _diag_weight(self.measure, u)
                if dir_pre == FALLING:
                    delta -= _diag_weight(self.measure, a_pre)
        self.value = self.value + delta
        return self.value


def pal_eval_incremental(measure: TriangularMeasure, rm_before: ReducedMemory,
                         u_next, cached):
    """PAL value after feeding ``u_next``, updated from the cached value.

    ``cached`` must equal pal_eval_staircase(measure, rm_before); debug
    builds cross-check and reject stale caches.
    """
    if __debug__:
        want = pal_eval_staircase(measure, rm_before)
        if measure.exact:
            ok = want == cached
        else:
            ok = abs(want - cached) <= 1e-9 * max(1.0, abs(want), abs(cached))
        if not ok:
            raise ValueError(f"stale cache: have {cached!r}, staircase says {want!r}")
    acc = PalAccumulator(measure, rm_before.copy(), value=cached)
    return acc.push(u_next)


# -- multi-head evaluation ------------------------------------------------------


@dataclass
class HeadConfig:
    """One head: scalar input projection, output projection, and a measure."""

    in_proj: np.ndarray
    out_proj: np.ndarray
    measure: TriangularMeasure

    def __post_init__(self):
        self.in_proj = np.asarray(self.in_proj, dtype=float)
        self.out_proj = np.asarray(self.out_proj, dtype=float)
        if self.in_proj.ndim != 1 or self.out_proj.ndim != 1:
            raise ValueError("head projections must be vectors")
        if self.in_proj.shape != self.out_proj.shape:
            raise ValueError("head projection dimensions disagree")


def mpal_forward(heads: Sequence[HeadConfig], xs) -> np.ndarray:
    """Multi-head output at the final position: sum_h W_O^h * PAL_h(W_I^h x).

    Heads evaluate independently, each over its own reduced memory; the sum
    runs in ascending head order.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2:
        raise ValueError("expected a (steps, dim) sequence")
    d = xs.shape[1]
    out = np.zeros(d)
    for h in heads:
        if h.in_proj.shape[0] != d:
            raise ValueError("head dimension mismatch with input")
        signal = xs @ h.in_proj
        rm = ReducedMemory.from_sequence(signal)
        out += h.out_proj * pal_eval_staircase(h.measure, rm)
    return out


def mpal_forward_seq(heads: Sequence[HeadConfig], xs) -> np.ndarray:
    """Per-position multi-head outputs over the growing prefix, shape (n, d)."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2:
        raise ValueError("expected a (steps, dim) sequence")
    n, d = xs.shape
    out = np.zeros((n, d))
    accs = []
    for h in heads:
        if h.in_proj.shape[0] != d:
            raise ValueError("head dimension mismatch with input")
        accs.append(PalAccumulator(h.measure))
    for t in range(n):
        for h, acc in zip(heads, accs):
            v = acc.push(float(xs[t] @ h.in_proj))
            out[t] += h.out_proj * v
    return out


# -- binary band decoding --------------------------------------------------------


def bit_decode_measures(codes: Sequence[float], grid: HalfPlaneGrid) -> List[TriangularMeasure]:
    """One band measure per bit of the code index.

    Band relays at the code levels activate as a downward-closed prefix
    (every band at or below the current level is ON), so each bit measure
    carries telescoped +/-1 weights on the near-diagonal band cells: the
    active prefix sums to the h-th bit of the highest active code, the
    stack top.  Exact reads need the codes on the lattice (or spaced
    >= 2*delta).
    """
    K = len(codes)
    if K < 2:
        raise ValueError("need at least two code values")
    if len(set(codes)) != K:
        raise ValueError("code values must be distinct")
    order = sorted(range(K), key=lambda idx: codes[idx])
    for lo, hi in zip(order, order[1:]):
        if codes[hi] - codes[lo] < grid.delta:
            raise ValueError(
                f"codes {codes[lo]!r} and {codes[hi]!r} closer than the grid spacing")
    bands = []
    for c in codes:
        i = grid.count_le(c)
        if i < 2:
            raise ValueError(f"code {c!r} has no band cell on this grid")
        bands.append(i)
    if len(set(bands)) != K:
        raise ValueError("codes collide on the same grid band")
    one = 1 if grid.exact else 1.0
    n_heads = max(1, math.ceil(math.log2(K)))
    measures = []
    for h in range(n_heads):
        cells = {}
        below = 0
        for idx in order:
            bit = (idx >> h) & 1
            w = (bit - below) * one
            if w:
                cells[(bands[idx], bands[idx] - 1)] = w
            below = bit
        measures.append(TriangularMeasure(grid, cells))
    return measures


def decode_top(outputs: Sequence[float]) -> int:
    """Binary decode of the per-head band outputs, LSB first."""
    idx = 0
    for h, v in enumerate(outputs):
        b = round(float(v))
        if b not in (0, 1) or abs(float(v) - b) > 1e-9:
            raise ValueError(f"head output {v!r} is not a clean bit")
        idx |= b << h
    return idx
