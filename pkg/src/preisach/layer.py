"""Fixed-weight layer assembly around the multi-head measure evaluation.

The token stream feeds the heads raw; sinusoidal position encoding joins
only the residual stream, so positional information reaches the MLP but
never the hysteretic memories.  Both normalisations guard zero variance
with a floor, normalising a constant vector to the bias.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .grid import HalfPlaneGrid, TriangularMeasure
from .pal import HeadConfig, PalAccumulator

LN_VAR_FLOOR = 1e-12
SCHEMA_VERSION = 1


@dataclass
class LayerNormParams:
    gain: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.gain = np.asarray(self.gain, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.gain.shape != self.bias.shape or self.gain.ndim != 1:
            raise ValueError("layer norm gain/bias must be equal-length vectors")

    def apply(self, x: np.ndarray) -> np.ndarray:
        mu = x.mean()
        var = x.var()
        return self.gain * (x - mu) / np.sqrt(var + LN_VAR_FLOOR) + self.bias

    @classmethod
    def identity(cls, dim: int) -> "LayerNormParams":
        return cls(np.ones(dim), np.zeros(dim))


@dataclass
class MlpParams:
    w1: np.ndarray  # (hidden, d)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (d, hidden)
    b2: np.ndarray  # (d,)

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=float)
        self.b1 = np.asarray(self.b1, dtype=float)
        self.w2 = np.asarray(self.w2, dtype=float)
        self.b2 = np.asarray(self.b2, dtype=float)
        if self.w1.ndim != 2 or self.w2.ndim != 2:
            raise ValueError("mlp weights must be matrices")
        hidden, d = self.w1.shape
        if self.b1.shape != (hidden,) or self.w2.shape != (d, hidden) or self.b2.shape != (d,):
            raise ValueError("mlp shapes disagree")

    def apply(self, x: np.ndarray) -> np.ndarray:
        h = np.maximum(self.w1 @ x + self.b1, 0.0)
        return self.w2 @ h + self.b2

    @classmethod
    def zero(cls, dim: int, hidden: int = 4) -> "MlpParams":
        return cls(np.zeros((hidden, dim)), np.zeros(hidden),
                   np.zeros((dim, hidden)), np.zeros(dim))


def sinusoidal_pe(n: int, dim: int, base: float = 10000.0) -> np.ndarray:
    """Standard interleaved sin/cos table, shape (n, dim)."""
    pe = np.zeros((n, dim))
    pos = np.arange(n)[:, None]
    idx = np.arange(0, dim, 2)[None, :]
    angles = pos / np.power(base, idx / dim)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles[:, : pe[:, 1::2].shape[1]])
    return pe


@dataclass
class PalTransformerLayer:
    heads: List[HeadConfig]
    mlp: MlpParams
    ln1: LayerNormParams
    ln2: LayerNormParams
    pe_base: float = 10000.0

    @property
    def dim(self) -> int:
        return len(self.ln1.gain)

    def forward(self, xs: np.ndarray) -> np.ndarray:
        """Causal per-position forward pass, shape (n, d) -> (n, d).

        z0 = x + PE joins the residual stream; the heads consume the raw
        token coordinates position by position over the growing prefix.
        """
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.dim:
            raise ValueError(f"expected (steps, {self.dim}) input")
        n, d = xs.shape
        pe = sinusoidal_pe(n, d, self.pe_base)
        accs = [PalAccumulator(h.measure) for h in self.heads]
        out = np.empty_like(xs)
        for t in range(n):
            mpal_t = np.zeros(d)
            for h, acc in zip(self.heads, accs):
                v = acc.push(float(xs[t] @ h.in_proj))
                mpal_t += h.out_proj * v
            z0 = xs[t] + pe[t]
            z1 = self.ln1.apply(z0 + mpal_t)
            z2 = self.ln2.apply(z1 + self.mlp.apply(z1))
            out[t] = z2
        return out

    # -- JSON config --------------------------------------------------------------

    def to_json(self) -> str:
        def grid_doc(grid: HalfPlaneGrid):
            return {"size": grid.size, "delta": float(grid.delta), "origin": float(grid.origin)}

        doc = {
            "version": SCHEMA_VERSION,
            "heads": [
                {
                    "in_proj": h.in_proj.tolist(),
                    "out_proj": h.out_proj.tolist(),
                    "grid": grid_doc(h.measure.grid),
                    "cells": [[i, j, float(w)] for (i, j), w in sorted(h.measure.cells.items())],
                }
                for h in self.heads
            ],
            "mlp": {"w1": self.mlp.w1.tolist(), "b1": self.mlp.b1.tolist(),
                    "w2": self.mlp.w2.tolist(), "b2": self.mlp.b2.tolist()},
            "ln": {"ln1": {"gain": self.ln1.gain.tolist(), "bias": self.ln1.bias.tolist()},
                   "ln2": {"gain": self.ln2.gain.tolist(), "bias": self.ln2.bias.tolist()}},
            "pe": {"base": self.pe_base},
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PalTransformerLayer":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"bad layer config JSON: {exc}") from exc
        if doc.get("version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported layer config version {doc.get('version')!r}")
        try:
            heads = []
            for h in doc["heads"]:
                g = h["grid"]
                grid = HalfPlaneGrid(int(g["size"]), float(g["delta"]), float(g["origin"]))
                cells = {(int(i), int(j)): float(w) for i, j, w in h["cells"]}
                heads.append(HeadConfig(np.asarray(h["in_proj"], float),
                                        np.asarray(h["out_proj"], float),
                                        TriangularMeasure(grid, cells)))
            mlp = MlpParams(doc["mlp"]["w1"], doc["mlp"]["b1"], doc["mlp"]["w2"], doc["mlp"]["b2"])
            ln1 = LayerNormParams(doc["ln"]["ln1"]["gain"], doc["ln"]["ln1"]["bias"])
            ln2 = LayerNormParams(doc["ln"]["ln2"]["gain"], doc["ln"]["ln2"]["bias"])
            return cls(heads=heads, mlp=mlp, ln1=ln1, ln2=ln2,
                       pe_base=float(doc.get("pe", {}).get("base", 10000.0)))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"bad layer config: {exc!r}") from exc


def range_readout_layer(grid: HalfPlaneGrid, dim: int = 2,
                        signal_coord: int = 0, out_coord: int = 1) -> PalTransformerLayer:
    """Single-head configuration reading the historical range of a
    peak-first signal into one output coordinate.

    The bottom grid row integrates to (peak - first node); a column just
    below the grid's midpoint integrates to -(running minimum after the
    peak - first node).  When the first sample is the signal's maximum the
    two sums add to exactly max - min for lattice-aligned signals above
    the midpoint column; see the module tests.
    """
    L = grid.size
    mid = L // 2
    step = float(grid.delta)
    cells = {}
    for i in range(2, L + 1):
        cells[(i, 1)] = step                    # bottom row: peak readout
    cells[(mid, 1)] = 0.0                       # shared corner cancels
    for j in range(2, mid):
        cells[(mid, j)] = -step                 # column: min-after-peak readout
    cells = {k: w for k, w in cells.items() if w}
    measure = TriangularMeasure(grid, cells)
    in_proj = np.zeros(dim)
    in_proj[signal_coord] = 1.0
    out_proj = np.zeros(dim)
    out_proj[out_coord] = 1.0
    head = HeadConfig(in_proj, out_proj, measure)
    return PalTransformerLayer(heads=[head], mlp=MlpParams.zero(dim),
                               ln1=LayerNormParams.identity(dim),
                               ln2=LayerNormParams.identity(dim))
