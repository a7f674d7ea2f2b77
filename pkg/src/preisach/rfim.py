"""Mean-field zero-temperature random-field Ising sweeps and cross-checks.

At T=0 a spin points up exactly when its local field J*m + h_i + H is
positive, so any synchronous update lands on a cut of the sorted random
fields; a sweep is a walk of that integer cut, O(log N) per relaxation
step after one O(N log N) sort.  The relay-ensemble view of the same
physics (thresholds moving with the self-consistent magnetization) is the
identical cut map, so the empirical cross-check agrees exactly; the
population cross-check replaces the empirical field distribution with the
Gaussian CDF and deviates by sampling error O(1/sqrt(N)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .efo import extremal_positions
from .hysteresis import ReducedMemory


class FixedPointError(RuntimeError):
    def __init__(self, residual: float):
        super().__init__(f"self-consistency iteration did not converge, residual {residual:g}")
        self.residual = residual


@dataclass
class RfimConfig:
    n_spins: int
    coupling: float
    disorder_std: float
    h_grid: np.ndarray
    seed: int = 0

    def __post_init__(self):
        if self.n_spins < 1:
            raise ValueError("need at least one spin")
        if self.coupling <= 0:
            raise ValueError("coupling must be positive")
        if self.disorder_std <= 0:
            raise ValueError("disorder must be positive")
        self.h_grid = np.asarray(self.h_grid, dtype=float)
        if self.h_grid.ndim != 1 or len(self.h_grid) < 1:
            raise ValueError("field schedule must be a nonempty 1-D array")

    def fields(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.normal(0.0, self.disorder_std, size=self.n_spins)

    @classmethod
    def from_dict(cls, doc: Dict) -> "RfimConfig":
        h = doc.get("h_grid")
        if h is None:
            h = half_loop(float(doc["h_max"]), int(doc.get("h_steps", 1201)),
                          closed=bool(doc.get("closed_loop", True)))
        return cls(n_spins=int(doc["n_spins"]), coupling=float(doc["coupling"]),
                   disorder_std=float(doc["disorder_std"]), h_grid=np.asarray(h, float),
                   seed=int(doc.get("seed", 0)))


def half_loop(h_max: float, steps: int, closed: bool = True) -> np.ndarray:
    up = np.linspace(-h_max, h_max, steps)
    if not closed:
        return up
    return np.concatenate([up, up[::-1][1:]])


def _relax_cut(h_sorted: np.ndarray, coupling: float, ext_field: float, cut: int,
               max_iter: Optional[int] = None) -> int:
    """Walk the cut (number of down spins) to its fixed point.

    The map is monotone on the integer lattice, so iterates are monotone
    after the first step; failure to settle within N+2 steps is a bug.
    """
    n = len(h_sorted)
    limit = (n + 2) if max_iter is None else max_iter
    for _ in range(limit):
        m = (n - 2 * cut) / n
        theta = -(coupling * m + ext_field)
        nxt = int(np.searchsorted(h_sorted, theta, side="right"))
        if nxt == cut:
            return cut
        cut = nxt
    raise RuntimeError("cut relaxation failed to converge; monotone dynamics broken")


@dataclass
class SweepResult:
    fields_axis: np.ndarray        # external field per step
    magnetization: np.ndarray
    branch: np.ndarray             # +1 ascending, -1 descending
    avalanche: np.ndarray          # spins flipped at each step
    cuts: np.ndarray               # down-spin count per step
    h_sorted: np.ndarray
    unsort: np.ndarray             # positions of original spins in the sorted order

    def spins(self, step: int) -> np.ndarray:
        """Spin configuration (+-1 int8) in the original spin order."""
        up_sorted = np.arange(len(self.h_sorted)) >= self.cuts[step]
        return np.where(up_sorted[self.unsort], 1, -1).astype(np.int8)

    def max_jump(self) -> float:
        if len(self.magnetization) < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.magnetization))))


def rfim_sweep(cfg: RfimConfig) -> SweepResult:
    h = cfg.fields()
    order = np.argsort(h, kind="stable")
    h_sorted = h[order]
    unsort = np.empty_like(order)
    unsort[order] = np.arange(len(order))
    n = cfg.n_spins
    cut = n  # start from negative saturation
    mags = np.empty(len(cfg.h_grid))
    cuts = np.empty(len(cfg.h_grid), dtype=np.int64)
    avalanche = np.empty(len(cfg.h_grid), dtype=np.int64)
    branch = np.empty(len(cfg.h_grid), dtype=np.int8)
    prev_h = None
    for t, ext in enumerate(cfg.h_grid):
        new_cut = _relax_cut(h_sorted, cfg.coupling, float(ext), cut)
        avalanche[t] = abs(new_cut - cut)
        cut = new_cut
        cuts[t] = cut
        mags[t] = (n - 2 * cut) / n
        branch[t] = 1 if prev_h is None or ext >= prev_h else -1
        prev_h = ext
    if len(branch) > 1:
        branch[0] = branch[1]
    return SweepResult(np.asarray(cfg.h_grid, float), mags, branch, avalanche,
                       cuts, h_sorted, unsort)


# -- Preisach-equivalence cross-checks -------------------------------------------------


@dataclass
class EquivalenceReport:
    fields_axis: np.ndarray
    m_spin: np.ndarray
    m_relay_empirical: np.ndarray
    m_relay_population: np.ndarray
    deviation_empirical: float
    deviation_population: float


def _phi(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _population_fixed_point(coupling: float, std: float, ext: float, m0: float,
                            damping: float = 0.5, tol: float = 1e-10,
                            max_iter: int = 10000) -> float:
    """Damped self-consistency m = 1 - 2*Phi(-(J m + H)/std)."""
    m = m0
    for _ in range(max_iter):
        target = 1.0 - 2.0 * _phi(-(coupling * m + ext) / std)
        nxt = (1.0 - damping) * m + damping * target
        if abs(nxt - m) < tol:
            return nxt
        m = nxt
    raise FixedPointError(abs(nxt - m))


def preisach_equiv_check(cfg: RfimConfig) -> EquivalenceReport:
    """Spin dynamics vs the relay-ensemble pictures of the same sweep.

    The empirical ensemble shares the drawn fields (thresholds at
    -h_i -+ J m with the self-consistent m) and collapses to the same cut
    map, so it must agree exactly, decoupled or not.  The population
    ensemble integrates the Gaussian field law instead of the sample and
    deviates by O(1/sqrt(N)).
    """
    sweep = rfim_sweep(cfg)
    n = cfg.n_spins
    m_emp = np.empty(len(cfg.h_grid))
    m_pop = np.empty(len(cfg.h_grid))
    cut = n
    m_prev = -1.0
    for t, ext in enumerate(cfg.h_grid):
        cut = _relax_cut(sweep.h_sorted, cfg.coupling, float(ext), cut)
        m_emp[t] = (n - 2 * cut) / n
        m_prev = _population_fixed_point(cfg.coupling, cfg.disorder_std, float(ext), m_prev)
        m_pop[t] = m_prev
    return EquivalenceReport(
        fields_axis=sweep.fields_axis,
        m_spin=sweep.magnetization,
        m_relay_empirical=m_emp,
        m_relay_population=m_pop,
        deviation_empirical=float(np.max(np.abs(m_emp - sweep.magnetization))),
        deviation_population=float(np.max(np.abs(m_pop - sweep.magnetization))),
    )


def critical_disorder(coupling: float) -> float:
    """Gaussian mean-field threshold: J * max density = 1/2 slope condition."""
    return math.sqrt(2.0 / math.pi) * coupling


def criticality_scan(coupling: float, disorders: Sequence[float], n_spins: int,
                     seed: int = 0, h_steps: int = 1201,
                     h_max: Optional[float] = None) -> List[Tuple[float, float]]:
    """Largest single-step magnetization jump per disorder on the ascending branch."""
    out = []
    for std in disorders:
        span = h_max if h_max is not None else 2.0 * coupling + 4.0 * std
        cfg = RfimConfig(n_spins=n_spins, coupling=coupling, disorder_std=std,
                         h_grid=half_loop(span, h_steps, closed=False), seed=seed)
        out.append((float(std), rfim_sweep(cfg).max_jump()))
    return out


# -- streaming dominance sum -------------------------------------------------------------


def streaming_non_dominated_sum(stream: Sequence[float]) -> List[float]:
    """Running sum of the values with no strictly greater later value.

    Maintained with a non-increasing dominance stack (a new value evicts
    smaller predecessors); rate-independent memory cannot play this role
    because it erases monotone-run interiors, which all survive here.
    """
    stack: List[float] = []
    total = 0.0
    out: List[float] = []
    for x in stream:
        while stack and stack[-1] < x:
            total -= stack.pop()
        stack.append(x)
        total += x
        out.append(total)
    return out


def brute_non_dominated_sum(stream: Sequence[float]) -> List[float]:
    """O(n^2) suffix-scan oracle."""
    out = []
    for t in range(len(stream)):
        prefix = stream[: t + 1]
        out.append(sum(x for i, x in enumerate(prefix)
                       if not any(y > x for y in prefix[i + 1:])))
    return out


# -- hysteretic associative memory ----------------------------------------------------------


class PatternLookupError(KeyError):
    """Query strength matched no surviving band."""


@dataclass
class PatternStore:
    strengths: List[float]                 # survivor strengths, ascending
    patterns: List[np.ndarray]             # aligned with strengths
    memory: ReducedMemory                  # reduced memory over the strength stream
    band_halfwidth: float

    @property
    def capacity(self) -> int:
        return len(self.strengths)


def hopfield_store(patterns: Sequence[np.ndarray],
                   strengths: Optional[Sequence[float]] = None) -> PatternStore:
    """Keep exactly the patterns whose strength is a local extremum of the stream."""
    patterns = [np.asarray(p, dtype=float) for p in patterns]
    if not patterns:
        raise ValueError("no patterns to store")
    if strengths is None:
        strengths = [float(np.linalg.norm(p)) for p in patterns]
    else:
        strengths = [float(s) for s in strengths]
        if len(strengths) != len(patterns):
            raise ValueError("one strength per pattern required")
    if len(set(strengths)) != len(strengths):
        raise ValueError("strengths must be distinct (perturb ties before storing)")
    survivors = extremal_positions(strengths)
    keep = sorted(survivors, key=lambda t: strengths[t])
    kept_strengths = [strengths[t] for t in keep]
    kept_patterns = [patterns[t] for t in keep]
    if len(kept_strengths) > 1:
        gaps = [b - a for a, b in zip(kept_strengths, kept_strengths[1:])]
        halfwidth = min(gaps) / 2.0
    else:
        halfwidth = math.inf
    return PatternStore(
        strengths=kept_strengths,
        patterns=kept_patterns,
        memory=ReducedMemory.from_sequence(strengths),
        band_halfwidth=halfwidth,
    )


def hopfield_retrieve(store: PatternStore, strength_query: float,
                      band_halfwidth: Optional[float] = None) -> np.ndarray:
    """Binary search for the band containing the query, O(log capacity)."""
    hw = store.band_halfwidth if band_halfwidth is None else band_halfwidth
    import bisect

    k = bisect.bisect_left(store.strengths, strength_query)
    best = None
    for cand in (k - 1, k):
        if 0 <= cand < len(store.strengths):
            d = abs(store.strengths[cand] - strength_query)
            if best is None or d < best[0]:
                best = (d, cand)
    if best is None or best[0] > hw:
        raise PatternLookupError(f"no stored band within {hw!r} of {strength_query!r}")
    return store.patterns[best[1]]
