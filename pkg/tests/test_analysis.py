import math
from fractions import Fraction

import pytest

from martlab import (
    HOLDS,
    UNDECIDABLE,
    VIOLATED,
    Atom,
    CountableSpace,
    ExampleDescriptor,
    NotApplicable,
    NotTerminating,
    PathProcess,
    PiecewiseConstantPath,
    PreconditionFailed,
    SpecError,
    StatementVerdict,
    StoppingFamilyGenerator,
    build,
    check_liminf_integrability,
    check_statement_V,
    check_ui,
    extend_with_uniform,
    falsify_statement_IV,
    hierarchy_consistent,
    martingale_check,
    randomized_blowup_curve,
    simple_random_walk,
    witness_gap,
)
from martlab.analysis import reciprocal_u_abs_rv
from martlab.measure import Partition, Policy


@pytest.fixture(scope="module")
def cherny():
    return build(ExampleDescriptor("cherny")).process


@pytest.fixture(scope="module")
def two_atom():
    return build(ExampleDescriptor("two_atom_nonadapted")).process


def _finite(paths, weights):
    atoms = [(Atom(k, {"block": 1}), Fraction(w)) for k, w in zip(paths, weights)]
    return PathProcess(CountableSpace.finite(atoms), lambda a: paths[a.id])


def test_v_violation_and_replay(two_atom):
    v = check_statement_V(two_atom)
    assert v.verdict == VIOLATED and v.witness["time"]["exact"] == "1/1"
    assert v.replay()


def test_martingale_check(cherny, two_atom):
    assert martingale_check(cherny).verdict == HOLDS
    assert martingale_check(cherny, pairs=[(0, 7), (Fraction(5, 2), 40)]).verdict == HOLDS
    bad = martingale_check(two_atom)
    assert bad.verdict == VIOLATED and bad.replay()
    part = Partition.trivial(cherny.space, 3)
    with pytest.raises(SpecError):
        martingale_check(cherny, pairs=[(0, 10, part)])
    with pytest.raises(SpecError):
        martingale_check(cherny, pairs=[(3, 1)])


def test_ui_diagnostic_oracle(cherny):
    ui = check_ui(cherny, k_schedule=(1, 10, 100), depth=300)
    # brute force: E[|X_t| 1{|X_t| > K}] = #{n <= t : n^2 > K} / 2, largest at t = 300
    for k, t, r in ui.results:
        brute = Fraction(sum(1 for n in range(1, 301) if n * n > k), 2)
        assert t == 300 and r.value == brute
    assert ui.verdict == "not_ui_certified" and not ui.ui
    ctrl = build(ExampleDescriptor("nonnegative_control")).process
    assert check_ui(ctrl).ui
    with pytest.raises(NotTerminating):
        check_ui(simple_random_walk(5))


def test_liminf_integrability(cherny):
    res = check_liminf_integrability(cherny, Policy(divergence_threshold=10))
    assert res.kind == "divergence" and res.depth == 21
    ctrl = build(ExampleDescriptor("nonnegative_control")).process
    assert check_liminf_integrability(ctrl).value == 1


def test_generator_sizes():
    gen = StoppingFamilyGenerator()
    assert len(gen.leaves()) == 27
    depths = [t.depth() for t in gen.trees()]
    # depth 2: unordered leaf pairs under Min and Max; depth 3: each depth-2 tree against each leaf
    assert (depths.count(1), depths.count(2), depths.count(3)) == (27, 2 * (27 * 26 // 2), 2 * 702 * 27)
    assert len(list(StoppingFamilyGenerator(max_rules=10).trees())) == 10
    with pytest.raises(SpecError):
        StoppingFamilyGenerator(max_depth=0)


def test_iv_on_finite_processes(two_atom):
    small = StoppingFamilyGenerator(max_depth=2, levels=(1,), grid_max=4)
    v = falsify_statement_IV(two_atom, small)
    assert v.verdict == VIOLATED and v.replay()
    walk8 = simple_random_walk(8).as_path_process()
    w = falsify_statement_IV(walk8, StoppingFamilyGenerator(max_depth=2, levels=(1, 2), grid_max=8))
    # on a finite horizon every bounded rule keeps the mean; hitting rules are not finite there
    assert w.verdict == HOLDS and w.suite["rejected_not_finite"] > 0


def test_iv_on_walk_is_horizon_limited():
    v = falsify_statement_IV(simple_random_walk(1000))
    assert v.verdict == VIOLATED and v.witness["horizon_limited"] and v.witness["X_tau_floor"] == 1
    short = falsify_statement_IV(simple_random_walk(20), StoppingFamilyGenerator(max_depth=1, grid_max=20))
    # P(tau <= 20) is about 0.82: below the stop threshold, so nothing is certified
    assert short.verdict == HOLDS and short.suite["inconclusive"] > 0


def test_reciprocal_u_integral_per_atom(cherny):
    rv = reciprocal_u_abs_rv(cherny)
    for n in (1, 2, 7):
        for a, _ in cherny.space.block(n):
            # |X_(1/u)| = n^2 iff 1/u >= n, i.e. u <= 1/n
            assert rv(a) == n


def _blowup_brute(process, m):
    """Walk the extended space itself: every (atom, level) pair with its own weight."""
    ext = extend_with_uniform(process.space, 0, m)
    lifted = ext.lift(process)
    d = 2 * m  # atoms beyond never jump before time 2m >= 1/u
    total = Fraction(0)
    for a, w in ext.space.finite_view(d):
        total += w * abs(lifted.value_at(a, 1 / a.payload["u"]))
    return total


def test_blowup_matches_extension_brute_force(cherny):
    ms = [1, 2, 3, 5, 8]
    curve = randomized_blowup_curve(cherny, 0, ms)
    for m, r in curve.points:
        assert r.value == _blowup_brute(cherny, m)
        assert r.value == Fraction(sum((2 * m) // (2 * k - 1) for k in range(1, m + 1)), 2 * m)
    assert curve.slope is not None
    with pytest.raises(SpecError):
        randomized_blowup_curve(cherny, 2, [10])
    with pytest.raises(NotTerminating):
        randomized_blowup_curve(simple_random_walk(4), 0, [10])


def test_randomized_iv_certificate():
    proc = build(ExampleDescriptor("cherny_randomized", levels=100)).process
    gen = StoppingFamilyGenerator(max_depth=1, include_randomized=True, randomized_threshold=2)
    v = falsify_statement_IV(proc, gen)
    assert v.verdict == VIOLATED and v.witness["rule"] == {"op": "reciprocal_u"}
    # harmonic partial sums: first N with sum_{n<=N} 1/(2n) > 2 is 31
    assert v.witness["E|X_tau|"]["depth"] == 31
    assert v.replay()


def test_gap_on_a_finite_martingale():
    paths = {"up": PiecewiseConstantPath(0, [(1, 1), (3, 0)]), "down": PiecewiseConstantPath(0, [(1, -1), (3, 0)])}
    proc = _finite(paths, ["1/2", "1/2"])
    rep = witness_gap(proc, Fraction(2, 5))
    assert rep.e_tau == Fraction(1, 2) and rep.e_sigma2 == 0 and rep.success
    assert rep.excursion_probability == Fraction(1, 2)


def test_gap_failures(cherny):
    zero = _finite({"w": PiecewiseConstantPath(0)}, [1])
    with pytest.raises(PreconditionFailed):
        witness_gap(zero, Fraction(2, 5))
    with pytest.raises(NotApplicable):
        witness_gap(cherny, Fraction(2, 5))
    with pytest.raises(NotApplicable):
        witness_gap(simple_random_walk(30), Fraction(2, 5), slack=Fraction(1, 100))
    with pytest.raises(SpecError):
        witness_gap(zero, 0)


def test_walk_gap_exact_small_horizon():
    rep = witness_gap(simple_random_walk(400), Fraction(2, 5), slack=Fraction(1, 10))
    assert isinstance(rep.e_tau, Fraction) and rep.success
    assert rep.e_tau_clipped == 0 and rep.e_sigma2_clipped == 0


def test_hierarchy_consistency_detector():
    ok = {"I": StatementVerdict("I", VIOLATED, {"x": 1}), "V": StatementVerdict("V", HOLDS)}
    assert hierarchy_consistent(ok) == (True, [])
    bad = {"II": StatementVerdict("II", HOLDS), "IV": StatementVerdict("IV", VIOLATED, {"x": 1}),
           "V": StatementVerdict("V", UNDECIDABLE)}
    assert hierarchy_consistent(bad) == (False, [("II", "IV")])
    with pytest.raises(SpecError):
        StatementVerdict("IV", VIOLATED)
    with pytest.raises(SpecError):
        StatementVerdict("VI", HOLDS)
