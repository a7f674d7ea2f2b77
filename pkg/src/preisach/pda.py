"""Two-stack PDA simulation on hysteresis channels with exact rationals.

Stack contents live in the extremum memory as nested interval corner pairs:
pushing symbol i onto a stack whose top pair brackets [lo, hi] emits the
child slot boundaries hi' then lo', where the parent splits into 2k+1 equal
parts and symbol i occupies part 2i (odd parts are margins).  Popping emits
half a margin above the top pair, which wipes exactly that pair, then the
enclosing lo, which closes the transient loop by the equality rule and
restores the previous state bit for bit.  All arithmetic is Fraction exact;
denominators grow as (2k+1)^depth.

Channels always carry the bottom marker as depth 1; popping it is an error
(standard machines never pop the bottom marker).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .hysteresis import ReducedMemory

PUSH = "push"
POP = "pop"

Op = Tuple  # ("push", symbol) or ("pop",)


class ChannelError(ValueError):
    """Raised for protocol violations on a stack channel."""


class PdaFormatError(ValueError):
    """Raised for malformed machine descriptions."""


class NestedIntervalCoder:
    """Exact slot arithmetic: symbol i of a parent [lo, hi] occupies
    [lo + (2i-1)w, lo + 2iw] with w = (hi - lo) / (2k + 1)."""

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("alphabet size must be >= 1")
        self.k = k
        self.parts = 2 * k + 1

    def child(self, lo: Fraction, hi: Fraction, i: int) -> Tuple[Fraction, Fraction]:
        if not 1 <= i <= self.k:
            raise ChannelError(f"symbol index {i} outside 1..{self.k}")
        w = (hi - lo) / self.parts
        return lo + (2 * i - 1) * w, lo + 2 * i * w

    def slot_width(self, lo: Fraction, hi: Fraction) -> Fraction:
        return (hi - lo) / self.parts

    def decode_child(self, lo: Fraction, hi: Fraction,
                     child_lo: Fraction, child_hi: Fraction) -> int:
        """Inverse of child(); raises on off-lattice corners."""
        w = self.slot_width(lo, hi)
        q = (child_hi - lo) / w
        if q.denominator != 1 or q % 2 != 0:
            raise ChannelError(f"corner {child_hi!r} is off the coder lattice")
        i = int(q) // 2
        if not 1 <= i <= self.k:
            raise ChannelError(f"decoded symbol index {i} outside 1..{self.k}")
        want_lo, want_hi = self.child(lo, hi, i)
        if (child_lo, child_hi) != (want_lo, want_hi):
            raise ChannelError("corner pair does not match any slot")
        return i


ROOT = (Fraction(0), Fraction(1))


class Channel:
    """One stack carried by one reduced memory over exact rationals."""

    def __init__(self, alphabet: Sequence[str], bottom: str, depth_limit: int = 66):
        if bottom not in alphabet:
            raise ValueError("bottom marker must belong to the stack alphabet")
        self.alphabet = list(alphabet)
        self.index = {s: i + 1 for i, s in enumerate(self.alphabet)}
        self.coder = NestedIntervalCoder(len(self.alphabet))
        self.depth_limit = depth_limit
        self.rm = ReducedMemory(domain=(Fraction(0), Fraction(1)))
        self.bottom = bottom
        self.push(bottom)

    @property
    def depth(self) -> int:
        return len(self.rm.corners) // 2

    def _top_interval(self) -> Tuple[Fraction, Fraction]:
        c = self.rm.corners
        if not c:
            return ROOT
        return c[-1], c[-2]

    def _parent_interval(self) -> Tuple[Fraction, Fraction]:
        c = self.rm.corners
        if len(c) < 4:
            return ROOT
        return c[-3], c[-4]

    def plan_push(self, symbol: str) -> List[Fraction]:
        if self.depth >= self.depth_limit:
            raise ChannelError(f"push would exceed depth bound {self.depth_limit}")
        lo, hi = self._top_interval()
        child_lo, child_hi = self.coder.child(lo, hi, self.index[symbol])
        return [child_hi, child_lo]

    def plan_pop(self) -> List[Fraction]:
        if self.depth <= 1:
            raise ChannelError("pop on empty stack (bottom marker is not poppable)")
        c = self.rm.corners
        top_hi = c[-2]
        parent_lo, parent_hi = self._parent_interval()
        margin = self.coder.slot_width(parent_lo, parent_hi)
        return [top_hi + margin / 2, c[-3]]

    def feed(self, signals: Sequence[Fraction]) -> None:
        for s in signals:
            self.rm.update(s)

    def push(self, symbol: str) -> List[Fraction]:
        signals = self.plan_push(symbol)
        self.feed(signals)
        return signals

    def pop(self) -> List[Fraction]:
        signals = self.plan_pop()
        self.feed(signals)
        return signals

    def apply(self, op: Op) -> List[Fraction]:
        if op[0] == PUSH:
            return self.push(op[1])
        if op[0] == POP:
            return self.pop()
        raise ChannelError(f"unknown stack op {op!r}")

    def decode_stack(self) -> List[str]:
        """Walk the corner pairs from the bottom; exact inverse of the slots."""
        c = self.rm.corners
        if len(c) % 2 != 0:
            raise ChannelError("corner list is mid-transient, cannot decode")
        lo, hi = ROOT
        out = []
        for d in range(len(c) // 2):
            child_hi, child_lo = c[2 * d], c[2 * d + 1]
            i = self.coder.decode_child(lo, hi, child_lo, child_hi)
            out.append(self.alphabet[i - 1])
            lo, hi = child_lo, child_hi
        return out

    def top_decode(self) -> Tuple[str, int]:
        stack = self.decode_stack()
        if not stack:
            raise ChannelError("empty channel")
        return stack[-1], len(stack)


# -- machine description ------------------------------------------------------------


@dataclass
class PdaSpec:
    """Deterministic two-stack machine as a transition table.

    delta maps (state, input symbol or None for an epsilon move, top1, top2)
    to (next state, ops1, ops2); an epsilon rule for a context excludes
    consuming rules for the same context.
    """

    states: List[str]
    input_alphabet: List[str]
    stack_alphabet: List[str]
    delta: Dict[Tuple[str, Optional[str], str, str], Tuple[str, Tuple[Op, ...], Tuple[Op, ...]]]
    q0: str
    z0: str
    accept: List[str]

    def __post_init__(self):
        if self.q0 not in self.states:
            raise PdaFormatError("q0 not in states")
        if self.z0 not in self.stack_alphabet:
            raise PdaFormatError("z0 not in stack alphabet")
        for q in self.accept:
            if q not in self.states:
                raise PdaFormatError(f"accepting state {q!r} not in states")
        eps_contexts = set()
        consuming = set()
        for (q, a, t1, t2), (q2, ops1, ops2) in self.delta.items():
            if q not in self.states or q2 not in self.states:
                raise PdaFormatError(f"unknown state in rule {(q, a, t1, t2)!r}")
            if a is not None and a not in self.input_alphabet:
                raise PdaFormatError(f"unknown input symbol {a!r}")
            if t1 not in self.stack_alphabet or t2 not in self.stack_alphabet:
                raise PdaFormatError(f"unknown stack symbol in rule {(q, a, t1, t2)!r}")
            for ops in (ops1, ops2):
                for op in ops:
                    if op[0] == PUSH:
                        if op[1] not in self.stack_alphabet:
                            raise PdaFormatError(f"push of unknown symbol {op[1]!r}")
                    elif op[0] != POP:
                        raise PdaFormatError(f"unknown op {op!r}")
            ctx = (q, t1, t2)
            if a is None:
                eps_contexts.add(ctx)
            else:
                consuming.add(ctx)
        overlap = eps_contexts & consuming
        if overlap:
            raise PdaFormatError(f"nondeterministic contexts (epsilon vs consuming): {sorted(overlap)}")

    def rule(self, q: str, a: Optional[str], t1: str, t2: str):
        return self.delta.get((q, a, t1, t2))

    # -- JSON wire format -------------------------------------------------------

    @classmethod
    def from_json(cls, text: str) -> "PdaSpec":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise PdaFormatError(f"bad JSON: {exc}") from exc
        try:
            delta = {}
            for rec in doc["delta"]:
                key = (rec["state"], rec.get("input"), rec["top1"], rec["top2"])
                if key in delta:
                    raise PdaFormatError(f"duplicate rule for {key!r}")
                ops1 = tuple(tuple(op) for op in rec.get("ops1", []))
                ops2 = tuple(tuple(op) for op in rec.get("ops2", []))
                delta[key] = (rec["next"], ops1, ops2)
            return cls(
                states=list(doc["states"]),
                input_alphabet=list(doc["input_alphabet"]),
                stack_alphabet=list(doc["stack_alphabet"]),
                delta=delta,
                q0=doc["q0"],
                z0=doc["z0"],
                accept=list(doc["accept"]),
            )
        except (KeyError, TypeError) as exc:
            raise PdaFormatError(f"bad machine description: {exc!r}") from exc

    def to_json(self) -> str:
        rules = []
        for (q, a, t1, t2), (q2, ops1, ops2) in sorted(
                self.delta.items(), key=lambda kv: (kv[0][0], kv[0][1] or "", kv[0][2], kv[0][3])):
            rules.append({"state": q, "input": a, "top1": t1, "top2": t2,
                          "next": q2, "ops1": [list(op) for op in ops1],
                          "ops2": [list(op) for op in ops2]})
        return json.dumps({
            "states": self.states, "input_alphabet": self.input_alphabet,
            "stack_alphabet": self.stack_alphabet, "q0": self.q0, "z0": self.z0,
            "accept": self.accept, "delta": rules,
        }, indent=2)


# -- reference interpreter (the oracle) ------------------------------------------------


@dataclass
class RefConfig:
    state: str
    stack1: List[str]
    stack2: List[str]
    pos: int


def pda_step_reference(spec: PdaSpec, cfg: RefConfig, word: str) -> Optional[RefConfig]:
    """One small step; None when no transition applies (halt)."""
    if not cfg.stack1 or not cfg.stack2:
        return None
    t1, t2 = cfg.stack1[-1], cfg.stack2[-1]
    rule = spec.rule(cfg.state, None, t1, t2)
    consumed = None
    if rule is None and cfg.pos < len(word):
        consumed = word[cfg.pos]
        if consumed not in spec.input_alphabet:
            raise PdaFormatError(f"input symbol {consumed!r} outside the alphabet")
        rule = spec.rule(cfg.state, consumed, t1, t2)
        if rule is None:
            consumed = None
    if rule is None:
        return None
    q2, ops1, ops2 = rule
    s1, s2 = list(cfg.stack1), list(cfg.stack2)
    for stack, ops in ((s1, ops1), (s2, ops2)):
        for op in ops:
            if op[0] == PUSH:
                stack.append(op[1])
            else:
                if not stack:
                    return None
                stack.pop()
    return RefConfig(q2, s1, s2, cfg.pos + (consumed is not None))


def reference_run(spec: PdaSpec, word: str, max_steps: int = 10000):
    """Full run; returns (accept, [per-step (state, stack1, stack2, consumed)])."""
    cfg = RefConfig(spec.q0, [spec.z0], [spec.z0], 0)
    steps = []
    for _ in range(max_steps):
        nxt = pda_step_reference(spec, cfg, word)
        if nxt is None:
            break
        consumed = word[cfg.pos] if nxt.pos > cfg.pos else None
        cfg = nxt
        steps.append((cfg.state, list(cfg.stack1), list(cfg.stack2), consumed))
    else:
        raise RuntimeError(f"no halt within {max_steps} steps")
    accept = (cfg.pos == len(word) and cfg.state in spec.accept
              and cfg.stack1 == [spec.z0] and cfg.stack2 == [spec.z0])
    return accept, steps


# -- channel-backed runs ----------------------------------------------------------------


@dataclass
class SimStep:
    step: int
    state: str
    stack1: List[str]
    stack2: List[str]
    consumed: Optional[str]
    signals1: List[Fraction] = field(default_factory=list)
    signals2: List[Fraction] = field(default_factory=list)


@dataclass
class SimTrace:
    accept: bool
    steps: List[SimStep]

    def summary(self) -> List[Tuple[str, List[str], List[str], Optional[str]]]:
        return [(s.state, s.stack1, s.stack2, s.consumed) for s in self.steps]


class _StateChannel:
    """Machine-state scalar channel: one rational code per state."""

    def __init__(self, states: Sequence[str], q0: str):
        self.states = list(states)
        self.code = {q: Fraction(i + 1) for i, q in enumerate(self.states)}
        self.rm = ReducedMemory()
        self.rm.update(self.code[q0])

    def read(self) -> str:
        return self.states[int(self.rm.corners[-1]) - 1]

    def write(self, q: str) -> None:
        self.rm.update(self.code[q])


def _drive(spec: PdaSpec, word: str, apply_ops, read_tops, decode_stacks,
           max_steps: int) -> SimTrace:
    """Shared closed-loop driver: read state and tops, look the rule up in
    the exact table, emit stack signals, write the next state."""
    state_ch = _StateChannel(spec.states, spec.q0)
    pos = 0
    steps: List[SimStep] = []
    for n in range(max_steps):
        q = state_ch.read()
        t1, t2 = read_tops()
        rule = spec.rule(q, None, t1, t2)
        consumed = None
        if rule is None and pos < len(word):
            a = word[pos]
            if a not in spec.input_alphabet:
                raise PdaFormatError(f"input symbol {a!r} outside the alphabet")
            rule = spec.rule(q, a, t1, t2)
            if rule is not None:
                consumed = a
        if rule is None:
            break
        q2, ops1, ops2 = rule
        sig1, sig2 = apply_ops(ops1, ops2)
        state_ch.write(q2)
        if consumed is not None:
            pos += 1
        s1, s2 = decode_stacks()
        steps.append(SimStep(n, q2, s1, s2, consumed, sig1, sig2))
    else:
        raise RuntimeError(f"no halt within {max_steps} steps")
    q = state_ch.read()
    s1, s2 = decode_stacks()
    accept = (pos == len(word) and q in spec.accept
              and s1 == [spec.z0] and s2 == [spec.z0])
    return SimTrace(accept, steps)


def autoregressive_run(spec: PdaSpec, word: str, depth_limit: int = 66,
                       max_steps: int = 10000) -> SimTrace:
    """Closed-loop simulation with one scalar channel per stack."""
    ch1 = Channel(spec.stack_alphabet, spec.z0, depth_limit)
    ch2 = Channel(spec.stack_alphabet, spec.z0, depth_limit)

    def apply_ops(ops1, ops2):
        sig1: List[Fraction] = []
        sig2: List[Fraction] = []
        for op in ops1:
            sig1.extend(ch1.apply(op))
        for op in ops2:
            sig2.extend(ch2.apply(op))
        return sig1, sig2

    return _drive(spec, word,
                  apply_ops,
                  lambda: (ch1.top_decode()[0], ch2.top_decode()[0]),
                  lambda: (ch1.decode_stack(), ch2.decode_stack()),
                  max_steps)


class Vec2Head:
    """Single head over a two-dimensional signal: one reduced memory per
    coordinate, both advanced together every micro step."""

    def __init__(self, spec: PdaSpec, depth_limit: int):
        self.ch_x = Channel(spec.stack_alphabet, spec.z0, depth_limit)
        self.ch_y = Channel(spec.stack_alphabet, spec.z0, depth_limit)

    def step(self, ops1, ops2):
        sig_x: List[Fraction] = []
        for op in ops1:
            s = self.ch_x.plan_push(op[1]) if op[0] == PUSH else self.ch_x.plan_pop()
            self.ch_x.feed(s)  # later ops in the same step see the applied state
            sig_x.extend(s)
        sig_y: List[Fraction] = []
        for op in ops2:
            s = self.ch_y.plan_push(op[1]) if op[0] == PUSH else self.ch_y.plan_pop()
            self.ch_y.feed(s)
            sig_y.extend(s)
        # both coordinates advance through the same number of micro steps;
        # the idle one holds its value, and a hold is a plateau no-op
        for _ in range(len(sig_x), len(sig_y)):
            self.ch_x.rm.update(self.ch_x.rm.corners[-1])
        for _ in range(len(sig_y), len(sig_x)):
            self.ch_y.rm.update(self.ch_y.rm.corners[-1])
        return sig_x, sig_y


def vpal_run(spec: PdaSpec, word: str, depth_limit: int = 66,
             max_steps: int = 10000) -> SimTrace:
    """Cor-2 style run: both stacks in the two coordinates of a single head."""
    head = Vec2Head(spec, depth_limit)
    return _drive(spec, word,
                  head.step,
                  lambda: (head.ch_x.top_decode()[0], head.ch_y.top_decode()[0]),
                  lambda: (head.ch_x.decode_stack(), head.ch_y.decode_stack()),
                  max_steps)


# -- example machines ----------------------------------------------------------------


def bracket_machine() -> PdaSpec:
    """Balanced parentheses over {(, )} using stack 1 only."""
    q = "q"
    delta = {
        (q, "(", "Z", "Z"): (q, (("push", "A"),), ()),
        (q, "(", "A", "Z"): (q, (("push", "A"),), ()),
        (q, ")", "A", "Z"): (q, (("pop",),), ()),
    }
    return PdaSpec(states=[q], input_alphabet=["(", ")"], stack_alphabet=["Z", "A"],
                   delta=delta, q0=q, z0="Z", accept=[q])


def abc_machine() -> PdaSpec:
    """a^n b^n c^n: stack 1 counts a against b, stack 2 counts b against c."""
    delta = {
        ("qa", "a", "Z", "Z"): ("qa", (("push", "A"),), ()),
        ("qa", "a", "A", "Z"): ("qa", (("push", "A"),), ()),
        ("qa", "b", "A", "Z"): ("qb", (("pop",),), (("push", "B"),)),
        ("qb", "b", "A", "B"): ("qb", (("pop",),), (("push", "B"),)),
        ("qb", "c", "Z", "B"): ("qc", (), (("pop",),)),
        ("qc", "c", "Z", "B"): ("qc", (), (("pop",),)),
    }
    return PdaSpec(states=["qa", "qb", "qc"], input_alphabet=["a", "b", "c"],
                   stack_alphabet=["Z", "A", "B"], delta=delta,
                   q0="qa", z0="Z", accept=["qa", "qc"])
