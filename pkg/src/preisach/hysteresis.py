"""Exact binary relays and the reduced extremum memory they induce.

A relay is a two-threshold switch: ON at or above ``alpha``, OFF at or
below ``beta``, unchanged inside the dead band.  The reduced memory keeps
the alternating turning points of the input that remain observable, with
return-point deletion: an excursion is erased once it is dominated on both
sides (at or beyond its own extremes), so a return to an exact previous
extremum closes the minor loop.  The historical global maximum and minimum
always survive as corners.

All relays start OFF (negative saturation); the first sample is processed
as a normal input.  Comparisons are exact in both the float and the
rational instantiation; there are no epsilon comparisons in this module.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

RISING = 1
FALLING = -1
NO_DIRECTION = 0


@dataclass(frozen=True)
class RelayThresholds:
    """Activation/deactivation threshold pair on the half-plane alpha >= beta."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not self.alpha >= self.beta:
            raise ValueError(
                f"relay thresholds need alpha >= beta, got alpha={self.alpha!r}, "
                f"beta={self.beta!r}"
            )


def relay_step(prev: int, u, th: RelayThresholds) -> int:
    """One step of the exact relay. ON wins when alpha == beta == u."""
    if u >= th.alpha:
        return 1
    if u <= th.beta:
        return 0
    return prev


def relay_replay(samples: Sequence, th: RelayThresholds, initial: int = 0) -> int:
    """Fold the relay over a full sample sequence. Ground truth for all fast reads."""
    state = initial
    a, b = th.alpha, th.beta
    if not a >= b:
        raise ValueError("relay thresholds need alpha >= beta")
    for u in samples:
        if u >= a:
            state = 1
        elif u <= b:
            state = 0
    return state


def relay_replay_grid(samples: Sequence, alphas, betas, initial: int = 0) -> np.ndarray:
    """Vectorized replay oracle over many (alpha, beta) pairs at once.

    ``alphas`` and ``betas`` are broadcastable float arrays; returns an int8
    array of final states.  Semantically identical to relay_replay per cell.
    """
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    state = np.broadcast_to(np.int8(initial), np.broadcast_shapes(alphas.shape, betas.shape)).copy()
    for u in samples:
        state = np.where(u >= alphas, np.int8(1), np.where(u <= betas, np.int8(0), state))
    return state


class _TailView:
    """Read caches derived from a corner list.

    ``max_vals``/``max_pos``: maxima from the global peak corner onward,
    values strictly decreasing, positions increasing.  ``min_vals``/``min_pos``
    mirror this from the global trough.  Relay state is decided by comparing
    the position of the last activating maximum with the position of the last
    deactivating minimum.
    """

    __slots__ = (
        "max_vals", "max_pos", "min_vals", "min_pos",
        "max_neg", "peak", "trough",
        "_np_max_neg", "_np_max_pos", "_np_min_vals", "_np_min_pos",
    )

    def __init__(self, corners: List, direction: int):
        r = len(corners)
        if r == 0:
            raise ValueError("empty memory has no tail view")
        if r == 1:
            c = corners[0]
            self.max_vals = [c]
            self.max_pos = [0]
            self.min_vals = [c]
            self.min_pos = [0]
        else:
            # Corner type alternates backward from the last corner, whose
            # type is given by the current direction.
            last_is_max = direction == RISING

            def is_max(pos: int) -> bool:
                same = (r - 1 - pos) % 2 == 0
                return last_is_max if same else not last_is_max

            peak_pos = -1
            peak_val = None
            trough_pos = -1
            trough_val = None
            for p, v in enumerate(corners):
                if is_max(p):
                    if peak_val is None or v >= peak_val:
                        peak_val, peak_pos = v, p
                else:
                    if trough_val is None or v <= trough_val:
                        trough_val, trough_pos = v, p
            self.max_vals = [corners[p] for p in range(peak_pos, r, 2)]
            self.max_pos = list(range(peak_pos, r, 2))
            self.min_vals = [corners[p] for p in range(trough_pos, r, 2)]
            self.min_pos = list(range(trough_pos, r, 2))
        self.peak = self.max_vals[0]
        self.trough = self.min_vals[0]
        # Ascending key for bisect over the descending maxima tail.
        self.max_neg = [-v for v in self.max_vals]
        self._np_max_neg = None
        self._np_max_pos = None
        self._np_min_vals = None
        self._np_min_pos = None

    def last_on_pos(self, alpha) -> int:
        """Position of the last maximum >= alpha, or -1."""
        cnt = bisect.bisect_right(self.max_neg, -alpha)
        return self.max_pos[cnt - 1] if cnt else -1

    def last_off_pos(self, beta) -> int:
        """Position of the last minimum <= beta, or -1."""
        cnt = bisect.bisect_right(self.min_vals, beta)
        return self.min_pos[cnt - 1] if cnt else -1

    def np_arrays(self):
        if self._np_max_neg is None:
            self._np_max_neg = np.asarray(self.max_neg, dtype=float)
            self._np_max_pos = np.asarray(self.max_pos, dtype=np.int64)
            self._np_min_vals = np.asarray(self.min_vals, dtype=float)
            self._np_min_pos = np.asarray(self.min_pos, dtype=np.int64)
        return self._np_max_neg, self._np_max_pos, self._np_min_vals, self._np_min_pos


class ReducedMemory:
    """Alternating dominant-extrema corner list with return-point deletion.

    Value type with a single writer; reads are pure.  ``corners`` is the
    turning-point residue of the input history, last element = current input.
    ``pushes``/``pops`` tally structural operations for the amortised bound
    pushes + pops <= 2 * updates, asserted on every update.
    """

    __slots__ = ("corners", "direction", "pushes", "pops", "updates",
                 "domain", "_version", "_view_cache", "_view_version")

    def __init__(self, domain: Optional[Tuple] = None):
        self.corners: List = []
        self.direction = NO_DIRECTION
        self.pushes = 0
        self.pops = 0
        self.updates = 0
        self.domain = domain
        self._version = 0
        self._view_cache = None
        self._view_version = -1

    # -- construction helpers -------------------------------------------------

    def copy(self) -> "ReducedMemory":
        rm = ReducedMemory(domain=self.domain)
        rm.corners = list(self.corners)
        rm.direction = self.direction
        rm.pushes = self.pushes
        rm.pops = self.pops
        rm.updates = self.updates
        return rm

    @classmethod
    def from_sequence(cls, samples: Sequence, domain: Optional[Tuple] = None) -> "ReducedMemory":
        rm = cls(domain=domain)
        for u in samples:
            rm.update(u)
        return rm

    # -- the update rule ------------------------------------------------------

    def update(self, u, journal: Optional[list] = None) -> None:
        """Process one input sample.

        Rules: empty -> [u]; plateau -> no-op; same direction -> replace the
        last corner; reversal -> append.  Then return-point deletion: while
        the pair (third-from-last, second-from-last) is dominated on both
        sides (with >=/<= closure, so exact returns erase the minor loop),
        delete it.  Deletion needs four corners, which is what keeps the
        historical global extremes in the list.
        """
        if self.domain is not None:
            lo, hi = self.domain
            if not (lo <= u <= hi):
                raise ValueError(f"sample {u!r} outside domain [{lo!r}, {hi!r}]")
        self.updates += 1
        c = self.corners
        if not c:
            c.append(u)
            self.pushes += 1
            if journal is not None:
                journal.append(("set", u))
            self._version += 1
            return
        a = c[-1]
        if u == a:
            return
        d = RISING if u > a else FALLING
        if d == self.direction:
            if journal is not None:
                journal.append(("replace", d, a, u,
                                c[-2] if len(c) >= 2 else None,
                                c[-3] if len(c) >= 3 else None))
            c[-1] = u
            self.pops += 1
            self.pushes += 1
        else:
            if journal is not None:
                journal.append(("append", d, a, u,
                                c[-2] if len(c) >= 2 else None))
            c.append(u)
            self.pushes += 1
            self.direction = d
        if d == RISING:
            while len(c) >= 4 and u >= c[-3] and c[-4] <= c[-2]:
                if journal is not None:
                    journal.append(("wipe", d, c[-3], c[-2], c[-4], None))
                del c[-3:-1]
                self.pops += 2
        else:
            while len(c) >= 4 and u <= c[-3] and c[-4] >= c[-2]:
                if journal is not None:
                    journal.append(("wipe", d, c[-3], c[-2], c[-4],
                                    c[-5] if len(c) >= 5 else None))
                del c[-3:-1]
                self.pops += 2
        self._version += 1
        assert self.pushes + self.pops <= 2 * self.updates, "amortised bound violated"

    # -- pure reads -----------------------------------------------------------

    def _view(self) -> _TailView:
        if self._view_version != self._version:
            self._view_cache = _TailView(self.corners, self.direction)
            self._view_version = self._version
        return self._view_cache

    @property
    def depth(self) -> int:
        return len(self.corners)

    @property
    def is_empty(self) -> bool:
        return not self.corners

    @property
    def peak(self):
        return self._view().peak if self.corners else None

    @property
    def trough(self):
        return self._view().trough if self.corners else None

    def relay(self, alpha, beta) -> int:
        """Relay state read from the corners; equals relay_replay(corners).

        The current input decides outright when it reaches a threshold (ON
        wins at alpha == beta == u); otherwise binary search over the nested
        maxima/minima tails decides by last-setter position, O(log depth).
        """
        if not alpha >= beta:
            raise ValueError("relay thresholds need alpha >= beta")
        if not self.corners:
            return 0
        last = self.corners[-1]
        if last >= alpha:
            return 1
        if last <= beta:
            return 0
        v = self._view()
        on = v.last_on_pos(alpha)
        if on < 0:
            return 0
        off = v.last_off_pos(beta)
        return 1 if on > off else 0

    def relay_grid(self, alphas: np.ndarray, betas: np.ndarray) -> np.ndarray:
        """Vectorized relay read over arrays of thresholds (float mode only)."""
        alphas = np.asarray(alphas, dtype=float)
        betas = np.asarray(betas, dtype=float)
        if not self.corners:
            return np.zeros(np.broadcast_shapes(alphas.shape, betas.shape), dtype=np.int8)
        last = self.corners[-1]
        max_neg, max_pos, min_vals, min_pos = self._view().np_arrays()
        cnt_on = np.searchsorted(max_neg, -alphas, side="right")
        cnt_off = np.searchsorted(min_vals, betas, side="right")
        on_pos = np.where(cnt_on > 0, max_pos[np.maximum(cnt_on - 1, 0)], -1)
        off_pos = np.where(cnt_off > 0, min_pos[np.maximum(cnt_off - 1, 0)], -1)
        interior = (on_pos >= 0) & (on_pos > off_pos)
        return np.where(last >= alphas, np.int8(1),
                        np.where(last <= betas, np.int8(0),
                                 interior.astype(np.int8)))

    def range(self):
        """Historical max(u) - min(u); O(1) from the retained extremes."""
        if not self.corners:
            raise ValueError("range of empty memory")
        v = self._view()
        return v.peak - v.trough

    def staircase_bands(self):
        """ON-region row bands: list of (alpha_extent, row_lo, row_hi_exclusive).

        row_lo None means the grid bottom, row_hi None means unbounded (the
        triangle clips it).  Rows below the trough are ON up to the peak; rows
        in [m_j, m_{j+1}) are ON up to the first maximum after m_j.
        """
        if not self.corners:
            return []
        if len(self.corners) == 1:
            c = self.corners[0]
            return [(c, None, None)]
        v = self._view()
        bands = [(v.peak, None, v.trough)]
        k = len(v.min_vals)
        for idx in range(k):
            p = v.min_pos[idx]
            j = bisect.bisect_right(v.max_pos, p)
            if j >= len(v.max_pos):
                break  # deepest minimum is the current input: rows above are OFF
            extent = v.max_vals[j]
            row_hi = v.min_vals[idx + 1] if idx + 1 < k else None
            bands.append((extent, v.min_vals[idx], row_hi))
        return bands

    # -- debug checks ---------------------------------------------------------

    def check_invariants(self) -> None:
        """Raise AssertionError if structural invariants are broken (test hook)."""
        c = self.corners
        r = len(c)
        assert self.pushes + self.pops <= 2 * self.updates
        if r <= 1:
            return
        for i in range(r - 1):
            assert c[i] != c[i + 1], "plateau corner"
        for i in range(r - 2):
            assert (c[i + 1] - c[i] > 0) != (c[i + 2] - c[i + 1] > 0), "alternation broken"
        v = self._view()
        for i in range(len(v.max_vals) - 1):
            assert v.max_vals[i] > v.max_vals[i + 1], "maxima tail not decreasing"
        for i in range(len(v.min_vals) - 1):
            assert v.min_vals[i] < v.min_vals[i + 1], "minima tail not increasing"
        # nesting holds on the read-relevant tail: within it every maximum
        # strictly exceeds every later minimum (the diverging head is exempt)
        tail_start = min(v.max_pos[0], v.min_pos[0])
        for i, p in enumerate(v.max_pos):
            if p < tail_start:
                continue
            for q, mval in zip(v.min_pos, v.min_vals):
                if q > p:
                    assert c[p] > mval, "tail max does not exceed later tail min"

    def __repr__(self) -> str:
        return f"ReducedMemory(corners={self.corners!r}, direction={self.direction})"


def rm_update(rm: ReducedMemory, u) -> ReducedMemory:
    """Pure update: returns a new memory with ``u`` processed."""
    out = rm.copy()
    out.update(u)
    return out


def rm_relay_read(rm: ReducedMemory, th: RelayThresholds) -> int:
    return rm.relay(th.alpha, th.beta)


def rm_range(rm: ReducedMemory):
    return rm.range()
