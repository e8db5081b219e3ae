import math
from fractions import Fraction

import numpy as np
import pytest

from martlab import (
    Atom,
    CountableSpace,
    Const,
    ExampleDescriptor,
    HitAbove,
    RandomVariable,
    ReciprocalU,
    SpecError,
    build,
    estimate_expectation,
    estimate_stopped,
    sample_atom,
)
from martlab.montecarlo import Sampler
from martlab.process import value_rv


@pytest.fixture(scope="module")
def cherny():
    return build(ExampleDescriptor("cherny")).process


def test_single_atom_space_always_returns_it():
    space = CountableSpace.finite([(Atom("only"), 1)])
    assert {sample_atom(space, 5, i).id for i in range(50)} == {"only"}


def test_sampler_frequencies(cherny):
    sampler = Sampler(cherny.space, 10_000)
    idx = sampler.draw(2024, 0, 10**6)
    first = sampler.atoms.index(next(a for a, _ in cherny.space.block(1) if a.id == (1, 1)))
    freq = np.mean(idx == first)
    assert abs(freq - 0.25) <= 0.002
    tail = np.mean(idx >= len(sampler.atoms) - sampler.n_tail)
    p = float(sampler.residual)
    assert abs(tail - p) <= 3 * math.sqrt(p * (1 - p) / 10**6)


def test_sample_atom_matches_batch_draw(cherny):
    sampler = Sampler(cherny.space, 10_000)
    idx = sampler.draw(11, 0, 20)
    for i in range(20):
        assert sample_atom(cherny.space, 11, i) == sampler.atoms[idx[i]]


def test_expectation_estimates(cherny):
    e = estimate_expectation(cherny.space, value_rv(cherny, 10), 10**5, 1)
    assert e.contains(0)
    a = estimate_expectation(cherny.space, value_rv(cherny, 10).abs(), 10**5, 2)
    assert a.contains(5)
    c = estimate_expectation(cherny.space, RandomVariable(lambda _: Fraction(7, 2)), 1000, 3)
    assert c.mean == 3.5 and c.half_width == 0.0


def test_half_width_is_three_standard_errors():
    space = CountableSpace.finite([(Atom(i), Fraction(1, 4)) for i in range(4)])
    e = estimate_expectation(space, RandomVariable(lambda a: a.id), 400, 9)
    sampler = Sampler(space)
    vals = np.array([sampler.atoms[i].id for i in sampler.draw(9, 0, 400)], dtype=float)
    assert e.mean == pytest.approx(vals.mean(), abs=1e-12)
    assert e.half_width == pytest.approx(3 * vals.std(ddof=1) / 20, abs=1e-12)


def test_determinism(cherny):
    rv = value_rv(cherny, 20)
    a = estimate_expectation(cherny.space, rv, 5000, 42)
    b = estimate_expectation(cherny.space, rv, 5000, 42)
    c = estimate_expectation(cherny.space, rv, 5000, 43)
    assert a == b and a.to_json() == b.to_json()
    assert a != c


def test_walk_hit_one():
    walk = build(ExampleDescriptor("random_walk", horizon=1000)).process
    e = estimate_stopped(walk, HitAbove(1), 10**5, seed=5)
    assert e.extras["stop_rate"] >= 0.97
    assert e.extras["stopped_mean"] == 1.0
    assert e.contains(0)  # E[X_(tau^H)] = 0 by optional sampling at a bounded time
    assert e.extras["tau_beyond_horizon"] == pytest.approx(1 - e.extras["stop_rate"])


def test_walk_generic_path_loop_agrees_in_distribution():
    walk = build(ExampleDescriptor("random_walk", horizon=30)).process
    from martlab import Min

    e = estimate_stopped(walk, Min(HitAbove(2), Const(30)), 4000, seed=6)
    assert e.engine.endswith("(path loop)")
    assert e.contains(0)


def test_cherny_const_five(cherny):
    assert estimate_stopped(cherny, Const(5), 10**5, seed=8).contains(0)


def test_randomized_reciprocal_u():
    proc = build(ExampleDescriptor("cherny_randomized", levels=100)).process
    e = estimate_stopped(proc, ReciprocalU(), 10**5, horizon=10**4, seed=10, transform=abs)
    assert e.mean >= 3.5
    assert "U continuous" in e.engine
    with pytest.raises(SpecError):
        estimate_stopped(proc, ReciprocalU(), 10, seed=1)
