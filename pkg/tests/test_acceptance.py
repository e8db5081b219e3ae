"""The nine acceptance criteria, each printing one PASS/FAIL line at the stated tolerance."""

import math
import time
from fractions import Fraction

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from martlab import (
    HOLDS,
    INF,
    VIOLATED,
    Atom,
    CountableSpace,
    Exact,
    ExampleDescriptor,
    HitAbove,
    HitAbsAbove,
    NearLiminf,
    PathProcess,
    PiecewiseConstantPath,
    StoppingFamilyGenerator,
    adaptedness_check,
    build,
    check_statement_V,
    check_ui,
    falsify_statement_IV,
    hierarchy_consistent,
    marginal_means,
    partial_sums,
    randomized_blowup_curve,
    run_hierarchy,
    stopped_law,
    verify_certificate,
    witness_gap,
)
from martlab._fallback import floor_sum
from martlab.examples import NAMES
from martlab.measure import Policy, expectation
from martlab.montecarlo import calibration_queries
from martlab.process import liminf_abs_rv


def _cherny():
    return build(ExampleDescriptor("cherny", depth=2000)).process


def test_c1_martingale_identity_on_event_grid(criterion):
    t0 = time.perf_counter()
    proc = _cherny()
    times = proc.event_times(2000, upto=2000)
    means = marginal_means(proc, times)
    verdict = check_statement_V(proc, depth=2000)
    elapsed = time.perf_counter() - t0
    ok = (
        len(times) == 2001
        and all(isinstance(r, Exact) and r.value == 0 for r in means.values())
        and verdict.verdict == HOLDS
        and elapsed < 5
    )
    criterion(1, ok, f"E[X_t] = 0 exactly at {len(times)} event times t <= 2000, V {verdict.verdict}, {elapsed:.2f}s")
    assert ok


def test_c2_limit_not_integrable(criterion):
    t0 = time.perf_counter()
    proc = _cherny()
    rv = liminf_abs_rv(proc)
    sums = dict(partial_sums(proc.space, rv, [10**2, 10**4, 10**6]))
    cert = expectation(proc.space, rv, Policy(divergence_threshold=1000))
    elapsed = time.perf_counter() - t0
    ok = (
        all(sums[n] == Fraction(n, 2) for n in (10**2, 10**4, 10**6))
        and cert.kind == "divergence"
        and cert.depth == 2001
        and cert.partial_sum == Fraction(2001, 2)
        and verify_certificate(proc.space, rv, cert)
        and elapsed < 5
    )
    criterion(2, ok, f"S_N = N/2 for N in 1e2,1e4,1e6; certificate N={cert.depth}, "
                     f"S={float(cert.partial_sum)}; {elapsed:.2f}s")
    assert ok


def test_c3_iv_holds_on_suite_but_not_ui(criterion):
    proc = _cherny()
    gen = StoppingFamilyGenerator(max_depth=3, levels=(Fraction(1, 2), 1, 4, 9), grid_max=50,
                                  include_randomized=False)
    iv = falsify_statement_IV(proc, gen)
    ui = check_ui(proc)
    s = iv.suite
    ok = iv.verdict == HOLDS and s["finite"] > 0 and s["undecided"] == 0 and ui.verdict == "not_ui_certified"
    criterion(3, ok, f"IV {iv.verdict} over {s['trees']} trees ({s['distinct_rules']} distinct, "
                     f"{s['finite']} finite adapted, all E[X_tau] = 0); UI: {ui.verdict}")
    assert ok


def test_c4_randomized_blowup(criterion):
    t0 = time.perf_counter()
    proc = build(ExampleDescriptor("cherny_randomized", levels=1000)).process
    ms = [10**3, 10**4, 10**5]
    curve = randomized_blowup_curve(proc, 0, ms)
    elapsed = time.perf_counter() - t0
    values = {m: r.value for m, r in curve.points}
    oracle = all(values[m] == Fraction(floor_sum(m), 2 * m) for m in ms)
    ok = (
        all(values[m] >= 0.4 * math.log(m) for m in ms)
        and 0.35 <= curve.slope <= 0.65
        and oracle
        and elapsed < 30
    )
    vals = ", ".join(f"m={m}: {float(v):.4f}" for m, v in values.items())
    criterion(4, ok, f"{vals}; slope {curve.slope:.4f}; floor-sum oracle {'agrees' if oracle else 'DISAGREES'}; "
                     f"{elapsed:.1f}s")
    assert ok


def test_c5_v_without_iv_on_walk(criterion):
    walk = build(ExampleDescriptor("random_walk", horizon=1000)).process
    clipped = {h: stopped_law(walk, HitAbove(1), horizon=h, exact=True) for h in (10, 100, 1000)}
    law = clipped[1000]
    iv = falsify_statement_IV(walk)
    ok = (
        all(lw.e_clipped == 0 for lw in clipped.values())
        and law.p_stop >= Fraction(97, 100)
        and law.stopped_range() == (1, 1)
        and iv.verdict == VIOLATED
        and iv.replay()
    )
    criterion(5, ok, f"E[X_(tau^H)] = 0 exactly for H = 10, 100, 1000; P(tau <= 1000) = {float(law.p_stop):.5f}; "
                     f"X_tau = 1 on stopping; IV {iv.verdict}")
    assert ok


def test_c6_witness_gap_on_walk(criterion):
    walk = build(ExampleDescriptor("random_walk", horizon=10_000)).process
    rep = witness_gap(walk, Fraction(2, 5), horizon=10_000)
    correction = rep.unresolved_sigma2
    ok = (
        rep.e_tau >= 0.45
        and abs(rep.e_sigma2) <= 0.1 + correction
        and rep.gap >= Fraction(3, 4) * Fraction(2, 5) ** 2
        and rep.success
    )
    criterion(6, ok, f"E[M_tau; tau<=H] = {rep.e_tau:.6f}, |E[M_sigma2; sigma2<=H]| = {abs(rep.e_sigma2):.2e} "
                     f"(correction {correction:.4f}), gap {rep.gap:.4f} >= 0.12")
    assert ok


def test_c7_adaptedness(criterion):
    two = build(ExampleDescriptor("two_atom_nonadapted")).process
    bad = adaptedness_check(NearLiminf(Fraction(1, 3)), two)
    good = adaptedness_check(HitAbsAbove(1), _cherny())
    a, b, t = bad.witness if bad.witness else (None, None, None)
    ok = (
        not bad.adapted
        and t == 0
        and bad.replay(NearLiminf(Fraction(1, 3)), two)
        and good.adapted
    )
    criterion(7, ok, f"two-atom rule: {bad.verdict} at t={t} (replay ok); HitAbsAbove(1) on cherny: {good.verdict}")
    assert ok


def test_c8_monte_carlo_calibration(criterion):
    t0 = time.perf_counter()
    queries = calibration_queries(n=100_000)
    elapsed = time.perf_counter() - t0
    inside = sum(est.contains(exact) for _, exact, est in queries)
    ok = len(queries) == 10 and inside >= 9 and elapsed < 10
    criterion(8, ok, f"{inside}/10 exact values inside 3-sigma intervals at n = 1e5; {elapsed:.2f}s")
    assert ok


def _small_process(data):
    n_atoms = data.draw(st.integers(1, 4))
    weights = data.draw(st.lists(st.integers(1, 5), min_size=n_atoms, max_size=n_atoms))
    total = sum(weights)
    atoms, paths = [], {}
    for i, w in enumerate(weights):
        x0 = data.draw(st.integers(-2, 2))
        k = data.draw(st.integers(0, 3))
        times = sorted(data.draw(st.sets(st.integers(1, 6), min_size=k, max_size=k)))
        vals = data.draw(st.lists(st.integers(-3, 3), min_size=k, max_size=k))
        paths[i] = PiecewiseConstantPath(x0, list(zip(times, vals)))
        atoms.append((Atom(i, {"block": 1}), Fraction(w, total)))
    space = CountableSpace.finite(atoms)
    return PathProcess(space, lambda a: paths[a.id])


_SMALL_GEN = StoppingFamilyGenerator(max_depth=2, levels=(1, 2), grid_max=8, include_two_point=True)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.data())
def test_c9_hierarchy_property_on_random_processes(data):
    proc = _small_process(data)
    verdicts = run_hierarchy(proc, gen=_SMALL_GEN, policy=Policy(divergence_threshold=100))
    ok, bad = hierarchy_consistent(verdicts)
    assert ok, bad


def test_c9_hierarchy_consistency_on_examples(criterion):
    results = {}
    for name in NAMES:
        built = build(ExampleDescriptor(name, levels=1000, horizon=1000))
        gen = StoppingFamilyGenerator(include_randomized=name == "cherny_randomized")
        verdicts = run_hierarchy(built.process, gen=gen, policy=Policy(divergence_threshold=1000))
        results[name] = (hierarchy_consistent(verdicts)[0], "".join(
            {"holds_on_suite": "+", "violated": "-", "undecidable": "?"}[verdicts[s].verdict] for s in verdicts))
    ok = all(c for c, _ in results.values())
    detail = ", ".join(f"{n} I..V={sig}" for n, (_, sig) in results.items())
    criterion(9, ok, f"no upstream pass with a downstream violation on {len(results)} examples "
                     f"and 40 random processes; {detail}")
    assert ok
