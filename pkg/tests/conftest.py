import numpy as np
import pytest

from preisach.hysteresis import ReducedMemory


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def feed(samples, domain=None):
    return ReducedMemory.from_sequence(samples, domain=domain)


def random_sequence(rng, n=None, lo=-8.0, hi=8.0, max_len=60):
    if n is None:
        n = int(rng.integers(1, max_len))
    return rng.uniform(lo, hi, size=n)


def random_walk(rng, n, lo=-8.0, hi=8.0, step=0.6):
    u = np.empty(n)
    x = rng.uniform(lo / 2, hi / 2)
    for i in range(n):
        x = min(hi, max(lo, x + step * rng.standard_normal()))
        u[i] = x
    return u


def threshold_grid(lo=-8.0, hi=8.0, n=9):
    """Small (alpha, beta) grid covering the domain, alpha >= beta."""
    vals = np.linspace(lo, hi, n)
    return [(a, b) for a in vals for b in vals if a >= b]
