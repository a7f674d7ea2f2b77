"""Layer assembly tests, including the stack-top bit-injectivity survey."""

import itertools

import numpy as np
import pytest

from preisach.grid import HalfPlaneGrid, TriangularMeasure
from preisach.layer import (
    LayerNormParams,
    MlpParams,
    PalTransformerLayer,
    range_readout_layer,
    sinusoidal_pe,
)
from preisach.pal import HeadConfig, bit_decode_measures, decode_top, pal_eval_staircase

from conftest import feed


def zero_layer(dim=3, grid=None):
    grid = grid or HalfPlaneGrid(4, 1.0)
    head = HeadConfig(np.zeros(dim), np.zeros(dim), TriangularMeasure(grid))
    return PalTransformerLayer(heads=[head], mlp=MlpParams.zero(dim),
                               ln1=LayerNormParams.identity(dim),
                               ln2=LayerNormParams.identity(dim))


def test_zero_weights_reduce_to_double_layernorm(rng):
    layer = zero_layer()
    xs = rng.normal(size=(6, 3))
    pe = sinusoidal_pe(6, 3)
    got = layer.forward(xs)
    for t in range(6):
        z0 = xs[t] + pe[t]
        want = layer.ln2.apply(layer.ln1.apply(z0))
        assert np.allclose(got[t], want, atol=1e-12)


def test_layernorm_zero_variance_guard():
    ln = LayerNormParams(gain=np.ones(4), bias=np.full(4, 0.25))
    out = ln.apply(np.full(4, 3.0))
    assert np.allclose(out, 0.25)  # constant vector normalises to the bias


def test_pe_is_kept_out_of_head_signals():
    """Two inputs equal in the head coordinate but at shifted positions give
    identical head values: position encoding never reaches the memories."""
    grid = HalfPlaneGrid(6, 1.0)
    m = TriangularMeasure(grid, {(3, 1): 1.0})
    dim = 2
    head = HeadConfig(np.array([1.0, 0.0]), np.array([0.0, 1.0]), m)
    layer = PalTransformerLayer([head], MlpParams.zero(dim),
                                LayerNormParams.identity(dim), LayerNormParams.identity(dim))
    xs = np.zeros((5, dim))
    xs[:, 0] = [0.0, 4.0, 1.0, 4.0, 1.0]
    # reconstruct the head value stream two ways: via the layer internals is
    # intentionally impossible, so probe with an identical signal shifted in time
    long = np.zeros((7, dim))
    long[2:, 0] = xs[:, 0]
    v1 = pal_eval_staircase(m, feed(xs[:, 0]))
    v2 = pal_eval_staircase(m, feed(long[:, 0]))
    assert v1 == v2  # plateau prefix = time reparameterisation


def test_range_configuration_matches_memory_oracle(rng):
    grid = HalfPlaneGrid(16, 0.5, origin=0.0)  # nodes 0.5 .. 8.0, mid column at node 4.0
    layer = range_readout_layer(grid, dim=2, signal_coord=0, out_coord=1)
    mid_node = grid.node(grid.size // 2)
    for _ in range(50):
        n = int(rng.integers(2, 12))
        peak = grid.node(int(rng.integers(grid.size // 2, grid.size + 1)))
        rest = [grid.node(int(rng.integers(2, grid.size // 2)))
                for _ in range(n - 1)]
        sig = [peak] + rest
        assert all(x < mid_node for x in rest) and peak >= mid_node
        rm = feed(sig)
        head = layer.heads[0]
        got = pal_eval_staircase(head.measure, rm)
        assert got == pytest.approx(rm.range(), abs=1e-12)
        # and through the full forward pass, against the same oracle value
        xs = np.zeros((n, 2))
        xs[:, 0] = sig
        out = layer.forward(xs)
        pe = sinusoidal_pe(n, 2)
        z0 = xs[-1] + pe[-1]
        want = layer.ln2.apply(layer.ln1.apply(z0 + np.array([0.0, rm.range()])))
        assert np.allclose(out[-1], want, atol=1e-9)


def test_layer_json_round_trip(rng):
    grid = HalfPlaneGrid(5, 0.5, origin=-1.0)
    m = TriangularMeasure(grid, {(3, 2): 1.5, (5, 1): -0.25})
    head = HeadConfig(rng.normal(size=3), rng.normal(size=3), m)
    layer = PalTransformerLayer(
        [head],
        MlpParams(rng.normal(size=(4, 3)), rng.normal(size=4),
                  rng.normal(size=(3, 4)), rng.normal(size=3)),
        LayerNormParams(rng.normal(size=3), rng.normal(size=3)),
        LayerNormParams.identity(3))
    again = PalTransformerLayer.from_json(layer.to_json())
    xs = rng.normal(size=(8, 3))
    assert np.allclose(layer.forward(xs), again.forward(xs), atol=1e-12)
    with pytest.raises(ValueError):
        PalTransformerLayer.from_json("{\"version\": 99}")


# -- bit-decode injectivity survey ------------------------------------------------------

def test_bit_decode_injectivity_survey(capsys):
    """Enumerate descending code chains (depth <= 3, K <= 16) and test the
    injectivity of the H-bit readout map on them.  The survey reports either
    a pass or a concrete counterexample; sharing a top collides by
    construction, so a counterexample is the expected outcome and the
    round-trip to the top stays exact either way."""
    K = 16
    grid = HalfPlaneGrid(2 * K + 4, 0.5)
    codes = [grid.node(2 * (K - idx) + 2) for idx in range(K)]  # descending in idx
    measures = bit_decode_measures(codes, grid)

    def phi(chain):
        rm = feed([codes[i] for i in chain])
        return tuple(round(float(pal_eval_staircase(m, rm)), 9) for m in measures)

    chains = []
    for depth in (1, 2, 3):
        for chain in itertools.combinations(range(K), depth):
            chains.append(chain)  # ascending indices = descending code values

    seen = {}
    counterexample = None
    for chain in chains:
        out = phi(chain)
        assert decode_top(out) == chain[-1]  # top read stays exact
        if out in seen and seen[out] != chain:
            counterexample = (seen[out], chain, out)
            break
        seen.setdefault(out, chain)

    if counterexample:
        a, b, out = counterexample
        print(f"bit-decode injectivity counterexample: chains {a} and {b} "
              f"both map to {out}")
    else:
        print("bit-decode injectivity: pass on all surveyed configurations")
    # stacks sharing a top collapse to the same readout: expected collision
    assert counterexample is not None
    assert counterexample[0][-1] == counterexample[1][-1]
