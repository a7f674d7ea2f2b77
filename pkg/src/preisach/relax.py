"""Smooth relay relaxation: stateful sigmoid recurrence with exact gradients.

The binary relay is discontinuous, so a differentiable stand-in iterates
s' = s * (1 - sig((beta - u)/tau)) + (1 - s) * sig((u - alpha)/tau)
with the logistic sigmoid.  As tau -> 0 the trace converges to the exact
relay wherever inputs keep a positive distance from both thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from .hysteresis import RelayThresholds, relay_replay


@dataclass(frozen=True)
class SmoothRelayParams:
    alpha: float
    beta: float
    tau: float

    def __post_init__(self):
        if not self.alpha >= self.beta:
            raise ValueError("smooth relay needs alpha >= beta")
        if not self.tau > 0:
            raise ValueError("temperature tau must be > 0")

    def thresholds(self) -> RelayThresholds:
        return RelayThresholds(self.alpha, self.beta)


def _sigmoid(x: float) -> float:
    # stable on both sides
    if x >= 0:
        z = math.exp(-x)
        return 1.0 / (1.0 + z)
    z = math.exp(x)
    return z / (1.0 + z)


@dataclass
class SmoothTrace:
    """States s_0..s_n (s_0 is the initial state, one more entry than inputs)."""

    states: List[float]

    @property
    def final(self) -> float:
        return self.states[-1]


def smooth_unroll(u: Sequence[float], p: SmoothRelayParams, s0: float = 0.0) -> SmoothTrace:
    if not 0.0 <= s0 <= 1.0:
        raise ValueError("initial state must lie in [0, 1]")
    s = s0
    states = [s0]
    inv_tau = 1.0 / p.tau
    for x in u:
        a = _sigmoid((x - p.alpha) * inv_tau)   # activation drive
        b = _sigmoid((p.beta - x) * inv_tau)    # deactivation drive
        s = s * (1.0 - b) + (1.0 - s) * a
        states.append(s)
    return SmoothTrace(states=states)


@dataclass
class SmoothGradients:
    """Partials of the final state w.r.t. parameters, inputs, and s0."""

    value: float
    d_alpha: float
    d_beta: float
    d_tau: float
    d_inputs: List[float]
    d_s0: float


def smooth_grad(u: Sequence[float], p: SmoothRelayParams, s0: float = 0.0) -> SmoothGradients:
    """Reverse accumulation through the closed-form recurrence; exact partials."""
    if not 0.0 <= s0 <= 1.0:
        raise ValueError("initial state must lie in [0, 1]")
    inv_tau = 1.0 / p.tau
    n = len(u)
    states = [s0]
    acts = []
    deacts = []
    s = s0
    for x in u:
        a = _sigmoid((x - p.alpha) * inv_tau)
        b = _sigmoid((p.beta - x) * inv_tau)
        acts.append(a)
        deacts.append(b)
        s = s * (1.0 - b) + (1.0 - s) * a
        states.append(s)

    d_alpha = 0.0
    d_beta = 0.0
    d_tau = 0.0
    d_inputs = [0.0] * n
    lam = 1.0  # d(final)/d(s_{t+1}), walked backward
    for t in range(n - 1, -1, -1):
        s_prev = states[t]
        a = acts[t]
        b = deacts[t]
        da = a * (1.0 - a)
        db = b * (1.0 - b)
        # s_{t+1} = s_t (1 - b) + (1 - s_t) a
        xa = (u[t] - p.alpha) * inv_tau
        xb = (p.beta - u[t]) * inv_tau
        d_da = (1.0 - s_prev) * lam
        d_db = -s_prev * lam
        d_alpha += d_da * da * (-inv_tau)
        d_beta += d_db * db * inv_tau
        d_tau += d_da * da * (-xa * inv_tau) + d_db * db * (-xb * inv_tau)
        d_inputs[t] += d_da * da * inv_tau + d_db * db * (-inv_tau)
        lam *= (1.0 - b - a)
    return SmoothGradients(
        value=states[-1],
        d_alpha=d_alpha,
        d_beta=d_beta,
        d_tau=d_tau,
        d_inputs=d_inputs,
        d_s0=lam,
    )


@dataclass
class AnnealReport:
    """Deviations from the binary relay along a descending tau schedule."""

    ok: bool
    separation: float
    taus: List[float]
    deviations: List[float]
    violations: List[int] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        return all(b <= a + 1e-15 for a, b in zip(self.deviations, self.deviations[1:]))


def threshold_separation(u: Sequence[float], p: SmoothRelayParams) -> float:
    return min(min(abs(x - p.alpha) for x in u), min(abs(x - p.beta) for x in u))


def anneal_check(u: Sequence[float], p: SmoothRelayParams,
                 taus: Sequence[float], min_separation: Optional[float] = None) -> AnnealReport:
    """Track |smooth - binary| along descending taus.

    Inputs closer than ``min_separation`` to a threshold are reported (with
    their indices) and the sweep is skipped; the binary relay is ill-posed
    arbitrarily near its thresholds.
    """
    taus = list(taus)
    if any(t <= 0 for t in taus):
        raise ValueError("taus must be positive")
    if any(b >= a for a, b in zip(taus, taus[1:])) and taus != sorted(taus, reverse=True):
        raise ValueError("tau schedule must be descending")
    sep = threshold_separation(u, p)
    if min_separation is None:
        min_separation = 0.0
    violations = [t for t, x in enumerate(u)
                  if abs(x - p.alpha) < min_separation or abs(x - p.beta) < min_separation]
    if violations or sep <= 0:
        return AnnealReport(ok=False, separation=sep, taus=taus, deviations=[],
                            violations=violations or list(range(len(u))))
    target = relay_replay(u, p.thresholds())
    deviations = []
    for tau in taus:
        trace = smooth_unroll(u, SmoothRelayParams(p.alpha, p.beta, tau))
        deviations.append(abs(trace.final - target))
    return AnnealReport(ok=True, separation=sep, taus=taus, deviations=deviations)
