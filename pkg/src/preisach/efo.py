"""Extremum first-order logic: parser, evaluator, and the depth-1 compiler.

Quantifiers range over the extremal positions of the signal: interior
strict extrema plus the endpoints, a plateau contributing its first index
only.  ExtAgg sums an affine function of the sample over the extremal
positions satisfying a guard.  The ordering atom ``i <ext j`` is strict
positional order (irreflexive).

Concrete syntax::

    true | false
    u[i] >= c        u[i] <= c
    i <ext j
    phi & psi        phi | psi        ! phi
    exists^ext i . phi
    forall^ext i . phi
    extagg i [ a * u[i] + b ] where phi

Quantifier and extagg bodies extend to the end of the enclosing group.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

from .grid import HalfPlaneGrid, TriangularMeasure
from .hysteresis import ReducedMemory


class EfoSyntaxError(ValueError):
    """Lexical/syntax/scope error with a line:column position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class EfoTypeError(TypeError):
    """Boolean term used as a number or vice versa."""


# -- AST ------------------------------------------------------------------------------


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class FalseF:
    pass


@dataclass(frozen=True)
class Cmp:
    var: str
    op: str  # ">=" or "<="
    const: float


@dataclass(frozen=True)
class OrderAtom:
    left: str
    right: str


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class ExistsExt:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class ForallExt:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class ExtAgg:
    """Sum of coef * u[var] + offset over extremal positions where the guard holds."""

    var: str
    coef: float
    offset: float
    where: "Formula"


Formula = Union[TrueF, FalseF, Cmp, OrderAtom, And, Or, Not, ExistsExt, ForallExt, ExtAgg]


# -- lexer / parser --------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>-?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?)
  | (?P<lext><ext\b)
  | (?P<ge>>=)
  | (?P<le><=)
  | (?P<kw>exists\^ext|forall\^ext|extagg|where|true|false|u\b)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<punct>[()\[\].&|!*+-])
""", re.VERBOSE)


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str) -> List[_Token]:
    tokens = []
    line = 1
    line_start = 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise EfoSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok = m.group()
        if kind == "ws":
            line += tok.count("\n")
            if "\n" in tok:
                line_start = pos + tok.rindex("\n") + 1
        else:
            col = pos - line_start + 1
            if kind == "kw":
                tokens.append(_Token(tok, tok, line, col))
            elif kind == "punct":
                tokens.append(_Token(tok, tok, line, col))
            else:
                tokens.append(_Token(kind, tok, line, col))
        pos = m.end()
    tokens.append(_Token("eof", "", line, len(text) - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: List[_Token]):
        self.toks = tokens
        self.i = 0

    def peek(self) -> _Token:
        return self.toks[self.i]

    def take(self, kind: Optional[str] = None) -> _Token:
        tok = self.toks[self.i]
        if kind is not None and tok.kind != kind:
            raise EfoSyntaxError(f"expected {kind!r}, found {tok.text!r}", tok.line, tok.col)
        self.i += 1
        return tok

    def fail(self, msg: str):
        tok = self.peek()
        raise EfoSyntaxError(msg, tok.line, tok.col)

    # precedence: | lowest, then &, then !, atoms; quantifier bodies maximal
    def formula(self, bound) -> Formula:
        node = self.conjunct(bound)
        while self.peek().kind == "|":
            self.take()
            node = Or(node, self.conjunct(bound))
        return node

    def conjunct(self, bound) -> Formula:
        node = self.unary(bound)
        while self.peek().kind == "&":
            self.take()
            node = And(node, self.unary(bound))
        return node

    def unary(self, bound) -> Formula:
        tok = self.peek()
        if tok.kind == "!":
            self.take()
            return Not(self.unary(bound))
        if tok.kind in ("exists^ext", "forall^ext"):
            self.take()
            var = self.take("ident").text
            self.take(".")
            body = self.formula(bound | {var})
            return ExistsExt(var, body) if tok.kind == "exists^ext" else ForallExt(var, body)
        if tok.kind == "extagg":
            return self.extagg(bound)
        return self.atom(bound)

    def extagg(self, bound) -> ExtAgg:
        self.take("extagg")
        var = self.take("ident").text
        self.take("[")
        coef, offset = self.affine_term(var, bound)
        self.take("]")
        self.take("where")
        where = self.formula(bound | {var})
        return ExtAgg(var, coef, offset, where)

    def affine_term(self, var: str, bound) -> Tuple[float, float]:
        """a * u[var] + b as (a, b); addends are numbers, u[var], or n * u[var]."""
        coef = 0.0
        offset = 0.0
        sign = 1.0
        while True:
            tok = self.peek()
            if tok.kind == "number":
                value = float(self.take().text)
                if self.peek().kind == "*":
                    self.take()
                    self.match_sample_ref(var)
                    coef += sign * value
                else:
                    offset += sign * value
            elif tok.kind == "u":
                self.match_sample_ref(var)
                coef += sign
            elif tok.kind == "-":
                self.take()
                sign = -sign
                continue
            else:
                self.fail("expected an affine term in the aggregated variable")
            nxt = self.peek()
            if nxt.kind == "+":
                self.take()
                sign = 1.0
            elif nxt.kind == "-":
                self.take()
                sign = -1.0
            else:
                return coef, offset

    def match_sample_ref(self, var: str) -> None:
        tok = self.take("u")
        self.take("[")
        name = self.take("ident")
        if name.text != var:
            raise EfoSyntaxError(
                f"aggregate term may only reference {var!r}, found {name.text!r}",
                name.line, name.col)
        self.take("]")

    def atom(self, bound) -> Formula:
        tok = self.peek()
        if tok.kind == "true":
            self.take()
            return TrueF()
        if tok.kind == "false":
            self.take()
            return FalseF()
        if tok.kind == "(":
            self.take()
            node = self.formula(bound)
            self.take(")")
            return node
        if tok.kind == "u":
            self.take()
            self.take("[")
            name = self.take("ident")
            if name.text not in bound:
                raise EfoSyntaxError(f"unbound variable {name.text!r}", name.line, name.col)
            self.take("]")
            op = self.peek()
            if op.kind not in ("ge", "le"):
                self.fail("expected >= or <= after a sample reference")
            self.take()
            num = self.take("number")
            return Cmp(name.text, ">=" if op.kind == "ge" else "<=", float(num.text))
        if tok.kind == "ident":
            left = self.take()
            if left.text not in bound:
                raise EfoSyntaxError(f"unbound variable {left.text!r}", left.line, left.col)
            self.take("lext")
            right = self.take("ident")
            if right.text not in bound:
                raise EfoSyntaxError(f"unbound variable {right.text!r}", right.line, right.col)
            return OrderAtom(left.text, right.text)
        self.fail(f"unexpected token {tok.text!r}")


def parse_efo(text: str) -> Formula:
    parser = _Parser(_lex(text))
    node = parser.formula(frozenset())
    tok = parser.peek()
    if tok.kind != "eof":
        raise EfoSyntaxError(f"trailing input {tok.text!r}", tok.line, tok.col)
    return node


# -- extremal positions ------------------------------------------------------------------


def extremal_positions(u: Sequence[float]) -> List[int]:
    """Interior strict extrema plus endpoints; plateaus count once, at their
    first index (a constant signal therefore has the single position 0)."""
    if len(u) == 0:
        raise ValueError("empty signal has no extremal positions")
    runs: List[int] = [0]
    for t in range(1, len(u)):
        if u[t] != u[runs[-1]]:
            runs.append(t)
    if len(runs) == 1:
        return [0]
    out = [runs[0]]
    for k in range(1, len(runs) - 1):
        a, b, c = u[runs[k - 1]], u[runs[k]], u[runs[k + 1]]
        if (b > a and b > c) or (b < a and b < c):
            out.append(runs[k])
    out.append(runs[-1])
    return out


# -- evaluation ----------------------------------------------------------------------------


def eval_efo(node: Formula, u: Sequence[float], _env=None):
    """Standard semantics over the extremal positions; Boolean for formulas,
    a float for a top-level aggregate."""
    env = {} if _env is None else _env
    ext = extremal_positions(u)

    def ev(n, env) -> bool:
        if isinstance(n, TrueF):
            return True
        if isinstance(n, FalseF):
            return False
        if isinstance(n, Cmp):
            x = u[env[n.var]]
            return x >= n.const if n.op == ">=" else x <= n.const
        if isinstance(n, OrderAtom):
            return env[n.left] < env[n.right]
        if isinstance(n, And):
            return ev(n.left, env) and ev(n.right, env)
        if isinstance(n, Or):
            return ev(n.left, env) or ev(n.right, env)
        if isinstance(n, Not):
            return not ev(n.body, env)
        if isinstance(n, ExistsExt):
            return any(ev(n.body, {**env, n.var: t}) for t in ext)
        if isinstance(n, ForallExt):
            return all(ev(n.body, {**env, n.var: t}) for t in ext)
        if isinstance(n, ExtAgg):
            raise EfoTypeError("aggregate used where a Boolean formula is expected")
        raise TypeError(f"not a formula node: {n!r}")

    if isinstance(node, ExtAgg):
        total = 0.0
        for t in ext:
            if ev(node.where, {**env, node.var: t}):
                total += node.coef * u[t] + node.offset
        return total
    return ev(node, env)


def exists_via_threshold(node: ExistsExt, u: Sequence[float]) -> bool:
    """Existential as a counting aggregate: ExtAgg[1, phi] > 0."""
    if not isinstance(node, ExistsExt):
        raise EfoTypeError("expected an existential formula")
    count = eval_efo(ExtAgg(node.var, 0.0, 1.0, node.body), u)
    return count > 0


def relay_as_efo(alpha: float, beta: float) -> ExistsExt:
    """The relay as a formula: some extremal activation with no later
    extremal deactivation (u > beta encoded as !(u <= beta))."""
    if not alpha >= beta:
        raise ValueError("relay thresholds need alpha >= beta")
    t_star, t = "t_star", "t"
    survives = ForallExt(t, Or(Not(OrderAtom(t_star, t)), Not(Cmp(t, "<=", beta))))
    return ExistsExt(t_star, And(Cmp(t_star, ">=", alpha), survives))


# -- depth-1 compilation --------------------------------------------------------------------


class CompileError(ValueError):
    """Unsupported formula shape for the measure compiler."""


def _guard_thresholds(node: Formula, var: str):
    """Flatten a conjunction of threshold atoms on ``var`` to (lo, hi)."""
    if isinstance(node, TrueF):
        return (None, None)
    if isinstance(node, Cmp):
        if node.var != var:
            raise CompileError("guard may only constrain the aggregated variable")
        return (node.const, None) if node.op == ">=" else (None, node.const)
    if isinstance(node, And):
        lo1, hi1 = _guard_thresholds(node.left, var)
        lo2, hi2 = _guard_thresholds(node.right, var)
        lo = lo1 if lo2 is None else (lo2 if lo1 is None else max(lo1, lo2))
        hi = hi1 if hi2 is None else (hi2 if hi1 is None else min(hi1, hi2))
        return lo, hi
    raise CompileError(f"unsupported guard shape: {type(node).__name__}")


def compile_extagg(node: ExtAgg, grid: HalfPlaneGrid) -> TriangularMeasure:
    """Measure whose PAL value matches the aggregate on falling runs.

    Scope (documented): the guard is a conjunction of thresholds on the
    aggregated variable, the term is affine, and the approximation target
    is a strictly decreasing signal of at least two samples inside
    (node_2, node_L) whose endpoints are more than one grid step apart; its
    extremal positions are exactly the two endpoints.  The ON region of
    such a history is {alpha <= u_0} x {beta < u_n}, so with F = guarded
    affine term: the bottom row telescopes to F(u_0) (baselines for the two
    always-ON corner cells included) and the near-diagonal band telescopes
    to F(u_n), giving PAL = F(u_0) + F(u_n) up to one grid step per
    endpoint; halving the spacing halves the bound.  Rising runs are out of
    reach for any measure: from an all-OFF start they are
    relay-indistinguishable from their final sample alone.
    """
    if not isinstance(node, ExtAgg):
        raise CompileError("only aggregates are compilable")
    lo, hi = _guard_thresholds(node.where, node.var)

    def f_of(x: float) -> float:
        if lo is not None and not x >= lo:
            return 0.0
        if hi is not None and not x <= hi:
            return 0.0
        return node.coef * x + node.offset

    measure = TriangularMeasure(grid)
    if node.coef == 0.0 and node.offset == 0.0:
        return measure
    if grid.size < 3:
        raise CompileError("grid too small for the two-chain layout")
    f1 = f_of(grid.node(1))
    f2 = f_of(grid.node(2))
    if f1:
        measure.add_cell(1, 1, f1)
    if f2:
        measure.add_cell(2, 1, f2)
    for i in range(3, grid.size + 1):
        w_row = f_of(grid.node(i)) - f_of(grid.node(i - 1))
        if w_row:
            measure.add_cell(i, 1, w_row)          # alpha chain: F(node_i) steps
        w_band = f_of(grid.node(i - 1)) - f_of(grid.node(i - 2))
        if w_band:
            measure.add_cell(i, i - 1, w_band)     # beta chain: F(node_{i-1}) steps
    return measure
