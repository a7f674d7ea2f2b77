"""Extremum-logic tests. Brute enumeration and relay_replay are the oracles."""

import numpy as np
import pytest

from preisach.efo import (
    And,
    Cmp,
    CompileError,
    EfoSyntaxError,
    EfoTypeError,
    ExistsExt,
    ExtAgg,
    ForallExt,
    Not,
    Or,
    OrderAtom,
    TrueF,
    compile_extagg,
    eval_efo,
    exists_via_threshold,
    extremal_positions,
    parse_efo,
    relay_as_efo,
)
from preisach.grid import HalfPlaneGrid
from preisach.hysteresis import RelayThresholds, relay_replay
from preisach.pal import pal_eval_staircase

from conftest import feed, random_sequence


# -- parser ------------------------------------------------------------------------

def test_parse_exists():
    node = parse_efo("exists^ext i . u[i] >= 0.5")
    assert isinstance(node, ExistsExt)
    assert node.body == Cmp("i", ">=", 0.5)


def test_parse_extagg():
    node = parse_efo("extagg i [u[i]] where (u[i] >= 0.0)")
    assert isinstance(node, ExtAgg)
    assert node.coef == 1.0 and node.offset == 0.0
    assert node.where == Cmp("i", ">=", 0.0)


def test_parse_affine_terms():
    node = parse_efo("extagg i [2.5 * u[i] + 1] where true")
    assert (node.coef, node.offset) == (2.5, 1.0)
    node = parse_efo("extagg i [-u[i] - 0.5] where true")
    assert (node.coef, node.offset) == (-1.0, -0.5)
    node = parse_efo("extagg i [1] where true")
    assert (node.coef, node.offset) == (0.0, 1.0)


def test_parse_unbound_variable():
    with pytest.raises(EfoSyntaxError) as err:
        parse_efo("exists^ext i . u[j] >= 0")
    assert "unbound" in str(err.value)


def test_parse_error_carries_position():
    with pytest.raises(EfoSyntaxError) as err:
        parse_efo("exists^ext i .\n u[i] >= @")
    assert str(err.value).startswith("2:")


def test_parse_precedence_and_grouping():
    node = parse_efo("exists^ext i . u[i] >= 1 & ! u[i] <= 0 | false")
    # quantifier body extends to the end: exists(i, or(and(ge, not(le)), false))
    assert isinstance(node, ExistsExt)
    assert isinstance(node.body, Or)
    assert isinstance(node.body.left, And)
    assert isinstance(node.body.left.right, Not)


def test_parse_order_atom_and_trailing_garbage():
    node = parse_efo("forall^ext i . forall^ext j . i <ext j")
    assert isinstance(node.body.body, OrderAtom)
    with pytest.raises(EfoSyntaxError):
        parse_efo("true true")


# -- extremal positions ---------------------------------------------------------------

def test_extremal_positions_examples():
    assert extremal_positions([0, 3, 1, 2, 0.5, 4]) == [0, 1, 2, 3, 4, 5]
    assert extremal_positions([0, 1, 2, 3]) == [0, 3]
    assert extremal_positions([5, 5, 5]) == [0]
    assert extremal_positions([7]) == [0]


def test_extremal_positions_plateau_first_index():
    assert extremal_positions([0, 2, 2, 1]) == [0, 1, 3]
    assert extremal_positions([0, 2, 2, 3]) == [0, 3]
    assert extremal_positions([0, 2, 2]) == [0, 1]


def brute_extrema(u):
    """Independent neighbour-comparison oracle on the plateau-compressed signal."""
    comp = [0]
    for t in range(1, len(u)):
        if u[t] != u[comp[-1]]:
            comp.append(t)
    if len(comp) == 1:
        return [0]
    out = [comp[0]]
    for k in range(1, len(comp) - 1):
        a, b, c = u[comp[k - 1]], u[comp[k]], u[comp[k + 1]]
        if b > max(a, c) or b < min(a, c):
            out.append(comp[k])
    return out + [comp[-1]]


def test_extremal_positions_random_vs_oracle(rng):
    for _ in range(200):
        u = list(rng.integers(0, 5, size=int(rng.integers(1, 25))).astype(float))
        assert extremal_positions(u) == brute_extrema(u)


# -- evaluation -------------------------------------------------------------------------

U6 = [0, 3, 1, 2, 0.5, 4]


def test_eval_exists_threshold():
    assert eval_efo(parse_efo("exists^ext i . u[i] >= 3.9"), U6) is True
    assert eval_efo(parse_efo("exists^ext i . u[i] >= 4.1"), U6) is False


def test_eval_count_on_monotone():
    assert eval_efo(parse_efo("extagg i [1] where true"), [0, 1, 2, 3]) == 2.0


def test_eval_range_formula_matches_memory():
    rng = np.random.default_rng(3)
    for _ in range(100):
        u = list(np.round(rng.uniform(-5, 5, size=int(rng.integers(2, 30))), 3))
        if len(set(u)) != len(u):
            continue  # distinct values keep the arg-extrema unique
        c_max, c_min = max(u), min(u)
        top = ExtAgg("i", 1.0, 0.0, Cmp("i", ">=", c_max))
        bot = ExtAgg("i", 1.0, 0.0, Cmp("i", "<=", c_min))
        got = eval_efo(top, u) - eval_efo(bot, u)
        assert got == pytest.approx(feed(u).range(), abs=1e-12)


def test_eval_type_error_on_aggregate_in_formula():
    bad = And(TrueF(), ExtAgg("i", 1.0, 0.0, TrueF()))
    with pytest.raises(EfoTypeError):
        eval_efo(bad, [0.0, 1.0])


def test_order_atom_irreflexive():
    node = parse_efo("exists^ext i . i <ext i")
    assert eval_efo(node, [0, 2, 1]) is False


# -- relay equivalence ---------------------------------------------------------------------

def test_relay_as_efo_examples():
    assert eval_efo(relay_as_efo(1.0, -1.0), [0, 2, 0]) is True
    assert eval_efo(relay_as_efo(1.0, -1.0), [0, 2, -2]) is False
    assert eval_efo(relay_as_efo(-10.0, -11.0), [0.5]) is True  # alpha below all samples


def test_relay_as_efo_random_equivalence(rng):
    for _ in range(1000):
        u = list(random_sequence(rng, lo=-4.0, hi=4.0, max_len=30))
        alpha = float(rng.uniform(-4.5, 4.5))
        beta = alpha - float(rng.uniform(0.0, 4.0))
        want = relay_replay(u, RelayThresholds(alpha, beta))
        got = eval_efo(relay_as_efo(alpha, beta), u)
        assert got is bool(want), (u, alpha, beta)


def test_de_morgan_duality(rng):
    for _ in range(200):
        u = list(random_sequence(rng, lo=-3.0, hi=3.0, max_len=15))
        c = float(rng.uniform(-3, 3))
        body = Cmp("i", ">=", c)
        forall = ForallExt("i", body)
        dual = Not(ExistsExt("i", Not(body)))
        assert eval_efo(forall, u) == eval_efo(dual, u)


def test_exists_via_threshold_matches_direct(rng):
    node = parse_efo("exists^ext i . u[i] >= 1.5")
    assert exists_via_threshold(node, [0, 2, 0.5]) is True
    assert exists_via_threshold(node, [0, 1, 0.5]) is False
    tautology = ExistsExt("i", TrueF())
    assert exists_via_threshold(tautology, [0.5]) is True
    for _ in range(100):
        u = list(random_sequence(rng, lo=-3.0, hi=3.0, max_len=12))
        c = float(rng.uniform(-3, 3))
        node = ExistsExt("i", Cmp("i", ">=", c))
        assert exists_via_threshold(node, u) == eval_efo(node, u)


# -- Boolean rectifier identities (two-layer network forms) ----------------------------------

def relu(x):
    return max(0.0, x)


@pytest.mark.parametrize("r1", [0.0, 1.0])
@pytest.mark.parametrize("r2", [0.0, 1.0])
def test_boolean_rectifier_identities(r1, r2):
    assert relu(r1 + r2 - 1.0) == float(bool(r1) and bool(r2))
    assert relu(r1 + r2) - relu(r1 + r2 - 1.0) == float(bool(r1) or bool(r2))
    assert 1.0 - r1 == float(not bool(r1))


# -- compilation ------------------------------------------------------------------------------

def falling_run(rng, grid, n=None, margin=2):
    """Strictly decreasing signal inside the grid with > 2*delta endpoint gap."""
    lo = grid.node(3)
    hi = grid.node(grid.size - 1)
    while True:
        n = n or int(rng.integers(2, 10))
        vals = np.sort(rng.uniform(lo, hi, size=n))[::-1]
        if vals[0] - vals[-1] > margin * grid.delta:
            return list(vals)


def compile_error(formula, grid, signal):
    m = compile_extagg(formula, grid)
    got = pal_eval_staircase(m, feed(signal))
    want = eval_efo(formula, signal)
    return abs(got - want)


def test_compile_zero_term_gives_zero_measure():
    grid = HalfPlaneGrid(16, 0.5)
    m = compile_extagg(ExtAgg("i", 0.0, 0.0, TrueF()), grid)
    assert m.cells == {}


def test_compile_count_above_threshold(rng):
    grid = HalfPlaneGrid(32, 0.25, origin=0.0)
    c = 3.1
    formula = ExtAgg("i", 0.0, 1.0, Cmp("i", ">=", c))
    for _ in range(100):
        sig = falling_run(rng, grid)
        if any(abs(x - c) <= grid.delta for x in sig):
            continue
        assert compile_error(formula, grid, sig) <= 1e-9


def test_compile_affine_within_grid_resolution(rng):
    grid = HalfPlaneGrid(32, 0.25, origin=0.0)
    formula = ExtAgg("i", 2.0, -0.5, And(Cmp("i", ">=", 1.9), Cmp("i", "<=", 7.2)))
    lip = 2.0
    for _ in range(100):
        sig = falling_run(rng, grid)
        if any(abs(x - t) <= grid.delta for x in sig for t in (1.9, 7.2)):
            continue
        assert compile_error(formula, grid, sig) <= 2 * lip * grid.delta + 1e-9


def test_compile_refinement_shrinks_error(rng):
    formula = ExtAgg("i", 1.0, 0.0, Cmp("i", ">=", 2.05))
    coarse = HalfPlaneGrid(32, 0.25, origin=0.0)
    fine = HalfPlaneGrid(64, 0.125, origin=0.0)
    suite = [falling_run(rng, coarse) for _ in range(60)]
    suite = [s for s in suite if all(abs(x - 2.05) > 0.3 for x in s)]
    err_c = [compile_error(formula, coarse, s) for s in suite]
    err_f = [compile_error(formula, fine, s) for s in suite]
    assert max(err_f) <= max(err_c) + 1e-12
    assert sum(err_f) <= sum(err_c) + 1e-12


def test_compile_rejects_unsupported_guards():
    grid = HalfPlaneGrid(16, 0.5)
    with pytest.raises(CompileError):
        compile_extagg(ExtAgg("i", 1.0, 0.0, Or(TrueF(), TrueF())), grid)
    with pytest.raises(CompileError):
        compile_extagg(ExtAgg("i", 1.0, 0.0, OrderAtom("i", "i")), grid)
