import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from martlab import (
    INF,
    Atom,
    CountableSpace,
    Const,
    ExampleDescriptor,
    HitAbove,
    HitAbsAbove,
    HitAbsBelow,
    Max,
    Min,
    NearLiminf,
    PathProcess,
    PiecewiseConstantPath,
    ReciprocalU,
    SpecError,
    TwoPoint,
    ValueEvent,
    adaptedness_check,
    build,
    evaluate,
    extend_with_uniform,
    finiteness_check,
)
from martlab.errors import MissingUniform
from martlab.stopping import ObservationTable, default_grid, spec_from_json, spec_to_json, stopped_value


def _one(path):
    space = CountableSpace.finite([(Atom("w", {"block": 1}), 1)])
    return PathProcess(space, lambda a: path), space.finite_view(1)[0][0]


def test_hitting_rules_on_a_path():
    proc, a = _one(PiecewiseConstantPath(0, [(1, 2), (3, -4), (5, 0)]))
    assert evaluate(HitAbove(1), proc, a) == 1
    assert evaluate(HitAbove(2, strict=True), proc, a) == INF
    assert evaluate(HitAbsAbove(4), proc, a) == 3
    assert evaluate(HitAbsBelow(0, Fraction(1, 2)), proc, a) == Fraction(1, 2)
    assert evaluate(HitAbsBelow(0, 2), proc, a) == 5
    assert evaluate(Min(HitAbsAbove(4), Const(2)), proc, a) == 2
    assert evaluate(Max(HitAbsAbove(4), Const(2)), proc, a) == 3
    assert stopped_value(proc, HitAbsAbove(4), a) == -4
    assert stopped_value(proc, HitAbove(9), a) == 0  # never stops: the limit


def test_two_point_rule():
    proc, a = _one(PiecewiseConstantPath(0, [(2, 1)]))
    assert evaluate(TwoPoint(ValueEvent(1, frozenset({0})), 1, 4), proc, a) == 4
    assert evaluate(TwoPoint(ValueEvent(2, frozenset({0})), 2, 4), proc, a) == 2
    with pytest.raises(SpecError):
        TwoPoint(ValueEvent(1, frozenset({0})), 3, 3)


def test_cherny_hit_times():
    proc = build(ExampleDescriptor("cherny")).process
    for n in (1, 4, 9):
        (plus, _), (minus, _) = list(proc.space.block(n))
        assert evaluate(HitAbove(1), proc, plus) == n
        assert evaluate(HitAbove(1), proc, minus) == INF
        assert evaluate(HitAbsAbove(1), proc, minus) == n


_leaf = st.one_of(
    st.builds(Const, st.fractions(0, 20, max_denominator=4)),
    st.builds(HitAbove, st.fractions(-5, 5, max_denominator=3), st.booleans()),
    st.builds(HitAbsAbove, st.fractions(0, 5, max_denominator=3)),
    st.builds(HitAbsBelow, st.fractions(0, 5, max_denominator=3), st.fractions(0, 6, max_denominator=2)),
)
_tree = st.recursive(_leaf, lambda kids: st.one_of(st.builds(Min, kids, kids), st.builds(Max, kids, kids)),
                     max_leaves=6)


@given(_tree)
def test_spec_json_round_trip(spec):
    assert spec_from_json(json.loads(json.dumps(spec_to_json(spec)))) == spec


def test_spec_json_errors():
    with pytest.raises(SpecError):
        spec_from_json({"op": "nope"})
    with pytest.raises(SpecError):
        spec_from_json({"op": "min", "args": [{"op": "const", "t": "1"}]})
    with pytest.raises(SpecError):
        spec_from_json({"op": "hit_above"})


def _random_finite(data):
    n = data.draw(st.integers(2, 5))
    paths, atoms = {}, []
    for i in range(n):
        k = data.draw(st.integers(0, 3))
        ts = sorted(data.draw(st.sets(st.integers(1, 6), min_size=k, max_size=k)))
        vs = data.draw(st.lists(st.integers(-2, 2), min_size=k, max_size=k))
        paths[i] = PiecewiseConstantPath(data.draw(st.integers(-1, 1)), list(zip(ts, vs)))
        atoms.append((Atom(i, {"block": 1}), Fraction(1, n)))
    return PathProcess(CountableSpace.finite(atoms), lambda a: paths[a.id])


def _brute_adapted(proc, taus, atoms, grid):
    for t in grid:
        for i, a in enumerate(atoms):
            for j, b in enumerate(atoms):
                if proc.observation(a, t) == proc.observation(b, t) and (taus[i] <= t) != (taus[j] <= t):
                    return False
    return True


@settings(max_examples=80, deadline=None)
@given(st.data())
def test_observation_table_matches_brute_force(data):
    proc = _random_finite(data)
    atoms = [a for a, _ in proc.space.finite_view(1)]
    # arbitrary (often non-adapted) stopping values
    taus = [data.draw(st.sampled_from([0, Fraction(1, 2), 1, 2, Fraction(7, 2), 5, INF])) for _ in atoms]
    grid = default_grid(None, proc, atoms, taus)
    table = ObservationTable(proc, atoms, grid)
    hit = table.first_violation(taus)
    assert (hit is None) == _brute_adapted(proc, taus, atoms, grid)


@settings(max_examples=40, deadline=None)
@given(st.data(), _tree)
def test_hitting_trees_are_adapted(data, spec):
    proc = _random_finite(data)
    assert adaptedness_check(spec, proc).adapted


def test_non_adapted_witness_and_replay():
    two = build(ExampleDescriptor("two_atom_nonadapted")).process
    rep = adaptedness_check(NearLiminf(Fraction(1, 3)), two)
    assert rep.verdict == "not_adapted"
    a, b, t = rep.witness
    assert t == 0 and {a.id, b.id} == {"a", "b"}
    assert rep.replay(NearLiminf(Fraction(1, 3)), two)
    assert "witness" in rep.to_json()


def test_finiteness_levels_on_cherny():
    proc = build(ExampleDescriptor("cherny")).process
    assert finiteness_check(Min(HitAbsAbove(1), Const(7)), proc).level == "bounded"
    cert = finiteness_check(HitAbsAbove(1), proc)
    assert cert.level == "exact_not_finite"
    lo, hi = cert.mass_at_infinity
    assert lo <= 1 - 3.141592653589793**2 / 12 <= hi
    exact = finiteness_check(Min(HitAbsBelow(1, 3), HitAbove(1)), proc)
    # (2,-1) and (3,-1) jump to |X| >= 4 before or at time 3 and never come back
    assert exact.level == "exact_not_finite" and exact.mass_at_infinity[0] == Fraction(1, 16) + Fraction(1, 36)


def test_finiteness_on_finite_space():
    two = build(ExampleDescriptor("two_atom_nonadapted")).process
    assert finiteness_check(HitAbove(5), two).level == "exact_not_finite"
    assert finiteness_check(Max(HitAbove(0), Const(3)), two).bound == 3


def test_uniform_extension():
    proc = build(ExampleDescriptor("cherny")).process
    ext = extend_with_uniform(proc.space, 0, 4)
    lifted = ext.lift(proc)
    atoms = [a for a, _ in ext.space.finite_view(1)]
    assert sorted({a.payload["u"] for a in atoms}) == [Fraction(1, 8), Fraction(3, 8), Fraction(5, 8), Fraction(7, 8)]
    assert sum(w for _, w in ext.space.finite_view(3)) == 1
    a = atoms[0]
    assert evaluate(ReciprocalU(), lifted, a) == 1 / a.payload["u"]
    assert adaptedness_check(ReciprocalU(), lifted, depth=2).adapted
    late = extend_with_uniform(proc.space, 9, 4).lift(proc)
    assert not adaptedness_check(ReciprocalU(), late, depth=2).adapted
    with pytest.raises(MissingUniform):
        evaluate(ReciprocalU(), proc, a.payload["base"])
    assert finiteness_check(ReciprocalU(), lifted).bound == 8
