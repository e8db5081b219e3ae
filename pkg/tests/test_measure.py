import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from martlab import (
    Atom,
    CountableSpace,
    DivergenceCertificate,
    Exact,
    ExampleDescriptor,
    IndeterminateTail,
    Partition,
    Policy,
    RandomVariable,
    SpecError,
    Truncated,
    ZeroMassBlock,
    build,
    conditional_expectation,
    enumerate_atoms,
    expectation,
    partial_sums,
    verify_certificate,
)
from martlab.measure import RationalSum, UniformBlock, as_rational, fmt_rational, rational_json


def _finite(weights):
    total = sum(weights)
    return CountableSpace.finite([(Atom(i, {"block": 1}), Fraction(w, total)) for i, w in enumerate(weights)])


def _geometric():
    # block n holds one atom of weight 2^-n; infinite, no tail classes
    return CountableSpace(lambda n: [(Atom(n, {"block": n}), Fraction(1, 2**n))],
                          block_mass=lambda n: Fraction(1, 2**n), name="geom")


def test_fmt_and_json():
    assert fmt_rational(3) == "3/1"
    assert fmt_rational(Fraction(-2, 4)) == "-1/2"
    assert fmt_rational(math.inf) == "inf"
    assert rational_json(Fraction(1, 4)) == {"exact": "1/4", "decimal": 0.25}
    assert as_rational("3/6") == Fraction(1, 2)
    with pytest.raises(SpecError):
        as_rational("abc")


def test_fmt_handles_very_long_integers():
    big = Fraction(10**5000 + 7, 3)
    text = fmt_rational(big)
    num, den = text.split("/")
    assert den == "3" and len(num) == 5001 and num.endswith("7") and num.startswith("1")


@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(1, 60)), max_size=40))
def test_rational_sum_matches_fraction_sum(terms):
    acc = RationalSum()
    for p, q in terms:
        acc.add(p, q)
    assert acc.value() == sum((Fraction(p, q) for p, q in terms), Fraction(0))


def test_uniform_block_weights():
    blk = UniformBlock((Atom("a"), Atom("b")), 1, 8)
    assert len(blk) == 2
    assert [w for _, w in blk] == [Fraction(1, 8)] * 2


def test_finite_space_rejects_bad_mass():
    with pytest.raises(SpecError):
        CountableSpace.finite([(Atom(0), Fraction(1, 3))])


def test_cherny_residual_matches_direct_sum():
    space = build(ExampleDescriptor("cherny")).space
    for depth in (1, 5, 37):
        direct = 1 - sum(Fraction(1, 2 * n * n) for n in range(1, depth + 1))
        assert space.residual(depth) == direct
        atoms, resid = enumerate_atoms(space, depth)
        assert resid == direct and len(atoms) == 2 * depth
    # the never-jumping mass is 1 - pi^2/12, inside the certified bracket
    lo = space.tail_mass_lower(200)
    assert lo <= 1 - math.pi**2 / 12 <= space.residual(200)


def test_finite_view_has_total_mass_one():
    space = build(ExampleDescriptor("cherny")).space
    assert sum(w for _, w in space.finite_view(12)) == 1


def test_expectation_finite_and_linearity():
    space = _finite([1, 2, 3])
    x = RandomVariable(lambda a: a.id * 2)
    assert expectation(space, x) == Exact(Fraction(2 * 2 + 4 * 3, 6))
    y = 3 * x + 1
    assert expectation(space, y).value == 3 * expectation(space, x).value + 1


@settings(max_examples=60)
@given(st.lists(st.integers(1, 9), min_size=1, max_size=8), st.lists(st.integers(-20, 20), min_size=8, max_size=8))
def test_expectation_equals_weighted_sum(weights, values):
    space = _finite(weights)
    total = sum(weights)
    rv = RandomVariable(lambda a: values[a.id])
    brute = sum(Fraction(w * values[i], total) for i, w in enumerate(weights))
    assert expectation(space, rv).value == brute


def test_settled_expectation_on_infinite_space():
    space = _geometric()
    rv = RandomVariable(lambda a: 1 if a.id <= 3 else 0, settle_depth=3)
    assert expectation(space, rv) == Exact(Fraction(7, 8))


def test_truncated_with_tail_bound():
    space = _geometric()
    rv = RandomVariable(lambda a: 1, tail_bound=lambda n: Fraction(1, 2**n))
    res = expectation(space, rv, Policy(max_depth=20))
    assert isinstance(res, Truncated)
    assert res.value == 1 - Fraction(1, 2**20) and res.tail_bound == Fraction(1, 2**20)


def test_sign_indefinite_without_bound_is_indeterminate():
    space = _geometric()
    with pytest.raises(IndeterminateTail):
        expectation(space, RandomVariable(lambda a: (-1) ** a.id))


def test_divergence_certificate_and_replay():
    space = _geometric()
    rv = RandomVariable(lambda a: 2**a.id, nonnegative=True)  # each block adds exactly 1
    cert = expectation(space, rv, Policy(divergence_threshold=50))
    assert isinstance(cert, DivergenceCertificate)
    assert cert.depth == 51 and cert.partial_sum == 51
    assert [n for n, _ in cert.growth_samples] == [1, 10, 51]
    assert verify_certificate(space, rv, cert)
    forged = DivergenceCertificate(cert.threshold, cert.depth, cert.partial_sum + 1, cert.growth_samples)
    assert not verify_certificate(space, rv, forged)


def test_convergent_nonnegative_series_is_not_certified():
    space = _geometric()
    rv = RandomVariable(lambda a: 1, nonnegative=True)
    with pytest.raises(IndeterminateTail):
        expectation(space, rv, Policy(max_depth=200, divergence_threshold=2))


def test_partial_sums_cherny_oracle():
    proc = build(ExampleDescriptor("cherny")).process
    from martlab.process import liminf_abs_rv

    got = partial_sums(proc.space, liminf_abs_rv(proc), [1, 7, 100])
    # brute force: block n holds two atoms of weight 1/(4n^2) and |value| n^2
    brute = {N: sum(2 * Fraction(n * n, 4 * n * n) for n in range(1, N + 1)) for N in (1, 7, 100)}
    assert dict(got) == brute


def test_partition_and_conditional_expectation():
    space = _finite([1, 1, 2])
    part = Partition.from_key(space, 1, lambda a: a.id < 2)
    masses = part.validate(space)
    assert sorted(masses.values()) == [Fraction(1, 2), Fraction(1, 2)]
    x = RandomVariable(lambda a: a.id)
    ce = conditional_expectation(space, x, part)
    assert ce(Atom(0)) == Fraction(1, 2) and ce(Atom(2)) == 2
    # tower property
    assert expectation(space, ce).value == expectation(space, x).value


def test_partition_validation_errors():
    space = _finite([1, 1])
    empty = Partition((frozenset({0, 1}), frozenset()), ("all", "none"), 1)
    with pytest.raises(ZeroMassBlock):
        empty.validate(space)
    with pytest.raises(SpecError):
        Partition((frozenset({0}),), ("x",), 1).validate(space)
    with pytest.raises(SpecError):
        Partition((frozenset({0, 1}), frozenset({1})), ("x", "y"), 1).validate(space)
