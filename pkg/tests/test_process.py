import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from martlab import (
    INF,
    Atom,
    CountableSpace,
    Const,
    ExampleDescriptor,
    HorizonExceeded,
    NotTerminating,
    PathProcess,
    PiecewiseConstantPath,
    SpecError,
    build,
    marginal_means,
    simple_random_walk,
    stop,
)
from martlab.process import process_from_json, process_to_json, value_rv
from martlab.measure import expectation


def test_path_right_continuity_and_terminal():
    p = PiecewiseConstantPath(0, [(1, 3), (Fraction(5, 2), -1)])
    assert p.value_at(0) == 0 and p.value_at(Fraction(99, 100)) == 0
    assert p.value_at(1) == 3 and p.value_at(Fraction(5, 2)) == -1
    assert p.terminal == -1
    assert p.segments() == [(0, 1, 0), (1, Fraction(5, 2), 3), (Fraction(5, 2), INF, -1)]
    assert p.sup_before(1) == 0 and p.sup_before(2) == 3


def test_path_normalization():
    assert PiecewiseConstantPath(1, [(2, 1), (3, 4)]) == PiecewiseConstantPath(1, [(3, 4)])
    assert PiecewiseConstantPath(1, [(0, 7)]).initial == 7
    with pytest.raises(SpecError):
        PiecewiseConstantPath(0, [(2, 1), (1, 0)])
    with pytest.raises(SpecError):
        PiecewiseConstantPath(0, [(-1, 1)])


def test_path_stopped_and_prefix():
    p = PiecewiseConstantPath(0, [(1, 1), (2, 4)])
    q = p.stopped(Fraction(3, 2))
    assert q.terminal == 1 and q.value_at(10) == 1
    assert p.stopped(INF) == p
    assert p.prefix(1) == (0, (1,), (1,))
    assert p.prefix(Fraction(1, 2)) == (0, (), ())


def _finite_process(data):
    n = data.draw(st.integers(1, 5))
    ws = data.draw(st.lists(st.integers(1, 6), min_size=n, max_size=n))
    total = sum(ws)
    paths = {}
    atoms = []
    for i, w in enumerate(ws):
        k = data.draw(st.integers(0, 4))
        ts = sorted(data.draw(st.sets(st.integers(1, 12).map(lambda x: Fraction(x, 2)), min_size=k, max_size=k)))
        vs = data.draw(st.lists(st.integers(-5, 5), min_size=k, max_size=k))
        paths[i] = PiecewiseConstantPath(data.draw(st.integers(-3, 3)), list(zip(ts, vs)))
        atoms.append((Atom(i, {"block": 1}), Fraction(w, total)))
    return PathProcess(CountableSpace.finite(atoms), lambda a: paths[a.id]), paths, ws


@settings(max_examples=60)
@given(st.data())
def test_marginal_means_match_brute_force(data):
    proc, paths, ws = _finite_process(data)
    times = [Fraction(k, 4) for k in range(0, 30)]
    got = marginal_means(proc, times)
    total = sum(ws)
    for t in times:
        brute = sum(Fraction(w, total) * paths[i].value_at(t) for i, w in enumerate(ws))
        assert got[t].value == brute


def test_cherny_marginals():
    proc = build(ExampleDescriptor("cherny")).process
    times = [0, Fraction(1, 2), 1, 3, Fraction(17, 2), 40]
    means = marginal_means(proc, times)
    assert all(means[t].value == 0 for t in times)
    absm = marginal_means(proc.abs(), times)
    # |X_t| = n^2 on the two atoms (n, +-1) with n <= t: E|X_t| = floor(t)/2
    for t in times:
        assert absm[t].value == Fraction(int(t), 2)
    assert expectation(proc.space, value_rv(proc, 10).abs()).value == 5


def test_cherny_paths_and_limits():
    proc = build(ExampleDescriptor("cherny")).process
    a = proc.space.block(3)
    (plus, _), (minus, _) = list(a)
    assert proc.value_at(plus, Fraction(29, 10)) == 0 and proc.value_at(plus, 3) == 9
    assert proc.limit_at_infinity(minus) == -9
    rep = proc.space.tail_classes[0][0]
    assert proc.limit_at_infinity(rep) == 0 and proc.path(rep) == PiecewiseConstantPath(0)


def test_stop_builds_stopped_process():
    proc = build(ExampleDescriptor("two_atom_nonadapted")).process
    s = stop(proc, Const(Fraction(1, 2)))
    for a, _ in proc.space.finite_view(1):
        assert s.limit_at_infinity(a) == 0


def test_generative_walk_reproducible_and_bounded():
    w = simple_random_walk(50)
    p1, p2 = w.sample_path(7, 3), w.sample_path(7, 3)
    assert p1 == p2
    assert p1 != w.sample_path(7, 4) or p1 != w.sample_path(8, 3)
    steps = np.diff([p1.value_at(k) for k in range(51)])
    assert set(np.abs(steps)) == {1}


def test_walk_enumeration_and_horizon():
    w = simple_random_walk(4).as_path_process()
    assert len(w.space.finite_view(1)) == 16
    with pytest.raises(HorizonExceeded):
        w.value_at(w.space.finite_view(1)[0][0], 5)
    with pytest.raises(NotTerminating):
        w.limit_at_infinity(w.space.finite_view(1)[0][0])
    with pytest.raises(SpecError):
        simple_random_walk(40).as_path_process()


def test_process_json_round_trip():
    proc = build(ExampleDescriptor("two_atom_nonadapted")).process
    doc = process_to_json(proc, depth=1)
    again = process_from_json(json.loads(json.dumps(doc)))
    for (a, w), (b, v) in zip(proc.space.finite_view(1), again.space.finite_view(1)):
        assert w == v and proc.path(a) == again.path(b)
    ex = process_from_json(process_to_json(build(ExampleDescriptor("cherny", depth=30)).process))
    assert ex.descriptor["depth"] == 30
    walk = process_from_json(process_to_json(simple_random_walk(9)))
    assert walk.horizon == 9
    with pytest.raises(SpecError):
        process_from_json({"schema": "other/2", "kind": "terminating", "atoms": []})
