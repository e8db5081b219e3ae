"""Exact probability engine over countable spaces.

A :class:`CountableSpace` is enumerated block by block.  Block ``n`` is a
finite list of ``(atom, weight)`` pairs with exact rational weights; whatever
has not been enumerated at depth ``N`` is the *residual*, an exact rational
mass that is split between a few *tail classes*.  Each tail class has a
representative atom which stands in for every unenumerated atom of the class
whenever a random variable has *settled* at that depth.

Expectations come back as one of three result types:

* :class:`Exact` -- bit-exact rational, only when the tail is provably handled,
* :class:`Truncated` -- a partial sum plus an explicit bound on the tail,
* :class:`DivergenceCertificate` -- monotone partial sums of a nonnegative
  integrand that crossed a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping, Sequence

from .errors import IndeterminateTail, SpecError, ZeroMassBlock

INF = math.inf

ZERO = Fraction(0)
ONE = Fraction(1)


# ---------------------------------------------------------------------------
# rational helpers
# ---------------------------------------------------------------------------

def as_rational(x: Any) -> Fraction | float:
    """Coerce ints, Fractions and ``"p/q"`` strings to Fraction; ``"inf"`` to INF."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, float):
        if math.isinf(x) and x > 0:
            return INF
        raise SpecError(f"floats are not exact rationals: {x!r}")
    if isinstance(x, str):
        s = x.strip()
        if s in ("inf", "+inf", "infinity", "oo"):
            return INF
        try:
            return Fraction(s)
        except ValueError as exc:
            raise SpecError(f"not a rational: {x!r}") from exc
    raise SpecError(f"not a rational: {x!r}")


_STR_CHUNK = 10**3000


def _int_str(n: int) -> str:
    # str() refuses very long ints by default; split by a power of ten instead
    if -_STR_CHUNK < n < _STR_CHUNK:
        return str(n)
    if n < 0:
        return "-" + _int_str(-n)
    k = (n.bit_length() * 3 // 10) // 2
    hi, lo = divmod(n, 10**k)
    return _int_str(hi) + _int_str(lo).zfill(k)


def fmt_rational(x: Any) -> str:
    """Render as ``"p/q"`` (always with a denominator) or ``"inf"``."""
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    q = Fraction(x)
    return f"{_int_str(q.numerator)}/{_int_str(q.denominator)}"


def rational_json(x: Any) -> dict:
    """Dual rendering: exact string plus a decimal approximation."""
    if isinstance(x, float) and math.isinf(x):
        return {"exact": fmt_rational(x), "decimal": x}
    return {"exact": fmt_rational(x), "decimal": float(x)}


class RationalSum:
    """Running exact sum of rationals ``p/q``.

    The denominator is kept equal to the lcm of the denominators seen so far,
    so adding a term with a small denominator costs a single small gcd.
    """

    __slots__ = ("num", "den")

    def __init__(self) -> None:
        self.num = 0
        self.den = 1

    def add(self, p: int, q: int) -> None:
        den = self.den
        if q == den:
            self.num += p
            return
        g = math.gcd(den, q)
        if g == q:
            self.num += p * (den // q)
        else:
            qg = q // g
            self.num = self.num * qg + p * (den // g)
            self.den = den * qg

    def add_fraction(self, x: Fraction) -> None:
        self.add(x.numerator, x.denominator)

    def exceeds(self, t: Fraction) -> bool:
        return self.num * t.denominator > t.numerator * self.den

    def value(self) -> Fraction:
        return Fraction(self.num, self.den)


# ---------------------------------------------------------------------------
# atoms and spaces
# ---------------------------------------------------------------------------

class Atom:
    """An outcome.  Identity (hash, equality) is the ``id`` alone.

    ``payload`` holds structured outcome data and is treated as read-only.
    """

    __slots__ = ("id", "payload")

    def __init__(self, id: Hashable, payload: Mapping[str, Any] | None = None):
        self.id = id
        self.payload = payload if payload is not None else {}

    def __hash__(self) -> int:
        return hash(self.id)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Atom) and other.id == self.id

    def __repr__(self) -> str:
        return f"Atom({self.id!r})"

    def __getitem__(self, key: str) -> Any:
        return self.payload[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.payload.get(key, default)

    @property
    def is_tail(self) -> bool:
        return bool(self.payload.get("tail", False))


class UniformBlock:
    """A block of equally likely atoms, each of weight ``num/den``.

    Iterates as ``(atom, weight)`` pairs like a plain block; summation code
    can instead add the values first and multiply by the weight once.
    """

    __slots__ = ("atoms", "num", "den", "_w")

    def __init__(self, atoms: Sequence[Atom], num: int, den: int):
        self.atoms = atoms
        self.num = num
        self.den = den
        self._w = None

    @property
    def weight(self) -> Fraction:
        if self._w is None:
            self._w = Fraction(self.num, self.den)
        return self._w

    def __iter__(self):
        w = self.weight
        return ((a, w) for a in self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)


Block = Sequence[tuple[Atom, Fraction]] | UniformBlock


class CountableSpace:
    """Countable probability space enumerated block by block.

    Parameters
    ----------
    block_fn
        ``n -> [(atom, weight), ...]`` for blocks ``n = 1, 2, ...``.
    n_blocks
        Number of blocks for a finite space, ``None`` for an infinite one.
    block_mass
        Optional fast ``n -> total weight of block n``.
    tail_classes
        ``[(representative, share), ...]``; shares are exact and sum to one.
        Class ``i`` receives ``share_i * residual(N)`` of the mass at depth ``N``.
    tail_mass_lower
        Optional ``N -> [(representative, lower bound)]``: a lower bound on the
        part of class ``i``'s mass carried by the representative's own
        observational behaviour (e.g. the never-jumping atoms of an example).
    """

    def __init__(
        self,
        block_fn: Callable[[int], Block],
        *,
        n_blocks: int | None = None,
        block_mass: Callable[[int], Fraction] | None = None,
        tail_classes: Sequence[tuple[Atom, Fraction]] = (),
        tail_mass_lower: Callable[[int], Fraction] | None = None,
        name: str = "space",
    ):
        if n_blocks is not None and n_blocks < 1:
            raise SpecError("a finite space needs at least one block")
        if tail_classes and sum(s for _, s in tail_classes) != 1:
            raise SpecError("tail class shares must sum to 1")
        self._block_fn = block_fn
        self.n_blocks = n_blocks
        self._block_mass = block_mass
        self.tail_classes = tuple(tail_classes)
        self.tail_mass_lower = tail_mass_lower
        self.name = name
        # (depth, RationalSum) of the most recent residual query; a cache only
        self._mass_cache: tuple[int, int, int] = (0, 0, 1)

    # -- construction helpers ------------------------------------------------

    @classmethod
    def finite(cls, atoms: Iterable[tuple[Atom, Any]], name: str = "finite") -> "CountableSpace":
        items = tuple((a, Fraction(as_rational(w))) for a, w in atoms)
        if not items:
            raise SpecError("empty space")
        if any(w <= 0 for _, w in items):
            raise SpecError("atom weights must be positive")
        if sum(w for _, w in items) != 1:
            raise SpecError("atom weights must sum to 1")
        ids = [a.id for a, _ in items]
        if len(set(ids)) != len(ids):
            raise SpecError("duplicate atom ids")
        return cls(lambda n: items, n_blocks=1, name=name)

    # -- queries ---------------------------------------------------------------

    @property
    def is_finite(self) -> bool:
        return self.n_blocks is not None

    def clip(self, depth: int) -> int:
        return depth if self.n_blocks is None else min(depth, self.n_blocks)

    def block(self, n: int) -> Block:
        return self._block_fn(n)

    def iter_blocks(self, depth: int, start: int = 1) -> Iterator[tuple[int, Block]]:
        for n in range(start, self.clip(depth) + 1):
            yield n, self._block_fn(n)

    def mass_of_block(self, n: int) -> Fraction:
        if self._block_mass is not None:
            return self._block_mass(n)
        blk = self._block_fn(n)
        if isinstance(blk, UniformBlock):
            return Fraction(blk.num * len(blk), blk.den)
        return sum((w for _, w in blk), ZERO)

    def enumerated_mass(self, depth: int) -> Fraction:
        depth = self.clip(depth)
        d0, num, den = self._mass_cache
        acc = RationalSum()
        if d0 <= depth:
            acc.num, acc.den, start = num, den, d0 + 1
        else:
            start = 1
        for n in range(start, depth + 1):
            acc.add_fraction(self.mass_of_block(n))
        self._mass_cache = (depth, acc.num, acc.den)
        return acc.value()

    def residual(self, depth: int) -> Fraction:
        if self.n_blocks is not None and depth >= self.n_blocks:
            return ZERO
        if depth <= 0:
            return ONE
        return ONE - self.enumerated_mass(depth)

    def tail(self, depth: int) -> list[tuple[Atom, Fraction]]:
        """Tail representatives with their exact class masses at ``depth``."""
        if not self.tail_classes:
            return []
        r = self.residual(depth)
        if r == 0:
            return []
        return [(a, s * r) for a, s in self.tail_classes]

    def finite_view(self, depth: int) -> list[tuple[Atom, Fraction]]:
        """Enumerated atoms plus tail representatives; total mass is exactly 1."""
        out = [aw for _, blk in self.iter_blocks(depth) for aw in blk]
        out.extend(self.tail(depth))
        return out

    def atoms(self, depth: int, with_tail: bool = True) -> list[Atom]:
        view = self.finite_view(depth) if with_tail else enumerate_atoms(self, depth)[0]
        return [a for a, _ in view]

    def depth_of(self, atom: Atom) -> int | None:
        """Block index recorded in the payload, ``None`` for tail representatives."""
        return atom.payload.get("block")

    def __repr__(self) -> str:
        kind = f"{self.n_blocks} blocks" if self.n_blocks is not None else "infinite"
        return f"CountableSpace({self.name!r}, {kind})"


def enumerate_atoms(space: CountableSpace, depth: int) -> tuple[list[tuple[Atom, Fraction]], Fraction]:
    """Atoms of blocks ``1..depth`` with exact weights, and the residual mass."""
    if depth < 1:
        raise SpecError("depth must be >= 1")
    atoms = [aw for _, blk in space.iter_blocks(depth) for aw in blk]
    return atoms, space.residual(depth)


# ---------------------------------------------------------------------------
# random variables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RandomVariable:
    """An evaluable ``atom -> extended real``.

    ``settle_depth = d`` promises that every atom outside blocks ``1..d`` takes
    the value of its tail-class representative, which makes expectations exact.
    ``tail_bound(N)`` bounds ``sum |value| * mass`` over the unenumerated tail.
    """

    fn: Callable[[Atom], Any]
    nonnegative: bool = False
    settle_depth: int | None = None
    tail_bound: Callable[[int], Fraction] | None = None
    name: str = "rv"

    def __call__(self, atom: Atom) -> Any:
        return self.fn(atom)

    def _combine(self, other: "RandomVariable", fn, name, nonneg=False) -> "RandomVariable":
        sd = None
        if self.settle_depth is not None and other.settle_depth is not None:
            sd = max(self.settle_depth, other.settle_depth)
        return RandomVariable(fn, nonnegative=nonneg, settle_depth=sd, name=name)

    def __add__(self, other: Any) -> "RandomVariable":
        if not isinstance(other, RandomVariable):
            other = constant(other)
        f, g = self.fn, other.fn
        return self._combine(other, lambda a: f(a) + g(a), f"({self.name}+{other.name})",
                             self.nonnegative and other.nonnegative)

    __radd__ = __add__

    def __sub__(self, other: Any) -> "RandomVariable":
        return self + (-1) * (other if isinstance(other, RandomVariable) else constant(other))

    def __mul__(self, other: Any) -> "RandomVariable":
        if isinstance(other, RandomVariable):
            f, g = self.fn, other.fn
            return self._combine(other, lambda a: f(a) * g(a), f"({self.name}*{other.name})",
                                 self.nonnegative and other.nonnegative)
        c = Fraction(as_rational(other))
        f = self.fn
        tb = self.tail_bound
        return RandomVariable(
            lambda a: c * f(a),
            nonnegative=self.nonnegative and c >= 0,
            settle_depth=self.settle_depth,
            tail_bound=(lambda n: abs(c) * tb(n)) if tb is not None else None,
            name=f"{c}*{self.name}",
        )

    __rmul__ = __mul__

    def __neg__(self) -> "RandomVariable":
        return self * -1

    def abs(self) -> "RandomVariable":
        f = self.fn
        return RandomVariable(lambda a: abs(f(a)), nonnegative=True, settle_depth=self.settle_depth,
                              tail_bound=self.tail_bound, name=f"|{self.name}|")

    def map(self, g: Callable[[Any], Any], name: str | None = None, nonnegative: bool = False) -> "RandomVariable":
        f = self.fn
        return RandomVariable(lambda a: g(f(a)), nonnegative=nonnegative,
                              settle_depth=self.settle_depth, name=name or f"g({self.name})")


def constant(c: Any) -> RandomVariable:
    c = Fraction(as_rational(c))
    return RandomVariable(lambda a: c, nonnegative=c >= 0, settle_depth=0, name=str(c))


def indicator(pred: Callable[[Atom], bool], settle_depth: int | None = None, name: str = "1_A") -> RandomVariable:
    return RandomVariable(lambda a: ONE if pred(a) else ZERO, nonnegative=True,
                          settle_depth=settle_depth, name=name)


# ---------------------------------------------------------------------------
# expectation results
# ---------------------------------------------------------------------------

class ExpectationResult:
    """Common base of the three result variants."""

    kind = "abstract"
    is_finite = True

    def to_json(self) -> dict:  # pragma: no cover - overridden
        raise NotImplementedError


@dataclass(frozen=True)
class Exact(ExpectationResult):
    value: Fraction
    kind = "exact"

    def to_json(self) -> dict:
        return {"kind": self.kind, "value": rational_json(self.value)}


@dataclass(frozen=True)
class Truncated(ExpectationResult):
    value: Fraction
    tail_bound: Fraction
    depth: int
    kind = "truncated"

    def to_json(self) -> dict:
        return {"kind": self.kind, "value": rational_json(self.value),
                "tail_bound": rational_json(self.tail_bound), "depth": self.depth}


@dataclass(frozen=True)
class DivergenceCertificate(ExpectationResult):
    threshold: Fraction
    depth: int
    partial_sum: Fraction
    growth_samples: tuple[tuple[int, Fraction], ...] = field(default=())
    kind = "divergence"
    is_finite = False

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "threshold": rational_json(self.threshold),
            "depth": self.depth,
            "partial_sum": rational_json(self.partial_sum),
            "growth_samples": [{"N": n, "S": rational_json(s)} for n, s in self.growth_samples],
        }


@dataclass(frozen=True)
class Policy:
    max_depth: int = 10_000_000
    divergence_threshold: Fraction = Fraction(10**6)

    def __post_init__(self):
        if self.max_depth < 1:
            raise SpecError("max_depth must be >= 1")
        object.__setattr__(self, "divergence_threshold", Fraction(as_rational(self.divergence_threshold)))


def _is_sample_point(n: int) -> bool:
    # powers of ten
    while n % 10 == 0 and n > 1:
        n //= 10
    return n == 1


def _add_block(acc: RationalSum, fn, block: Block, check_nonneg: bool = False) -> None:
    add = acc.add
    gcd = math.gcd
    if isinstance(block, UniformBlock):
        total = 0
        for atom in block.atoms:
            v = fn(atom)
            if not v:
                continue
            if check_nonneg and v < 0:
                raise IndeterminateTail(f"integrand negative on {atom!r}")
            if isinstance(v, float):
                raise IndeterminateTail(f"non-finite value {v} on {atom!r}")
            total += v
        if total:
            if type(total) is int:
                p, q = total * block.num, block.den
            else:
                p, q = total.numerator * block.num, total.denominator * block.den
            g = gcd(p, q)
            add(p // g, q // g)
        return
    for atom, w in block:
        v = fn(atom)
        if not v:
            continue
        if check_nonneg and v < 0:
            raise IndeterminateTail(f"integrand negative on {atom!r}")
        if type(v) is int:
            p, q = v * w.numerator, w.denominator
        elif isinstance(v, float):
            raise IndeterminateTail(f"non-finite value {v} on {atom!r}")
        else:
            p, q = v.numerator * w.numerator, v.denominator * w.denominator
        g = gcd(p, q)
        add(p // g, q // g)


def _settled_sum(space: CountableSpace, rv: RandomVariable, depth: int) -> Fraction:
    acc = RationalSum()
    fn = rv.fn
    for _, blk in space.iter_blocks(depth):
        _add_block(acc, fn, blk)
    if space.tail_classes and not (space.is_finite and depth >= space.n_blocks):
        reps = [(a, s, fn(a)) for a, s in space.tail_classes]
        if any(v for _, _, v in reps):
            r = space.residual(depth)
            if r:
                for _, s, v in reps:
                    if isinstance(v, float):
                        raise IndeterminateTail("non-finite value on a tail representative with positive mass")
                    acc.add_fraction(Fraction(v) * s * r)
    return acc.value()


def expectation(space: CountableSpace, rv: RandomVariable, policy: Policy | None = None) -> ExpectationResult:
    """Expectation of ``rv`` under the tail-handling rules described above."""
    policy = policy or Policy()
    if space.is_finite:
        return Exact(_settled_sum(space, rv, space.n_blocks))
    if rv.settle_depth is not None:
        return Exact(_settled_sum(space, rv, rv.settle_depth))
    if rv.tail_bound is not None:
        n = policy.max_depth
        acc = RationalSum()
        for _, blk in space.iter_blocks(n):
            _add_block(acc, rv.fn, blk)
        return Truncated(acc.value(), Fraction(rv.tail_bound(n)), n)
    if rv.nonnegative:
        return _divergence_search(space, rv, policy)
    raise IndeterminateTail(f"{rv.name}: sign-indefinite on an unbounded tail with no tail bound")


def _divergence_search(space: CountableSpace, rv: RandomVariable, policy: Policy) -> DivergenceCertificate:
    t = policy.divergence_threshold
    acc = RationalSum()
    samples: list[tuple[int, Fraction]] = []
    fn = rv.fn
    for n, blk in space.iter_blocks(policy.max_depth):
        _add_block(acc, fn, blk, check_nonneg=True)
        if _is_sample_point(n):
            samples.append((n, acc.value()))
        if acc.exceeds(t):
            s = acc.value()
            if not samples or samples[-1][0] != n:
                samples.append((n, s))
            return DivergenceCertificate(t, n, s, tuple(samples))
    raise IndeterminateTail(
        f"{rv.name}: nonnegative partial sums stayed below {t} up to depth {policy.max_depth}")


def partial_sums(space: CountableSpace, rv: RandomVariable, depths: Iterable[int]) -> list[tuple[int, Fraction]]:
    """Exact sums over blocks ``1..N`` (tail excluded) for each requested ``N``."""
    wanted = sorted(set(depths))
    if not wanted:
        return []
    acc = RationalSum()
    out = []
    i = 0
    fn = rv.fn
    for n, blk in space.iter_blocks(wanted[-1]):
        _add_block(acc, fn, blk)
        while i < len(wanted) and wanted[i] == n:
            out.append((n, acc.value()))
            i += 1
    while i < len(wanted):  # finite space exhausted
        out.append((wanted[i], acc.value()))
        i += 1
    return out


def verify_certificate(space: CountableSpace, rv: RandomVariable, cert: DivergenceCertificate) -> bool:
    """Replay a certificate: nonnegative terms, monotone sums, samples and threshold match."""
    acc = RationalSum()
    prev = ZERO
    samples = dict(cert.growth_samples)
    for n, blk in space.iter_blocks(cert.depth):
        for atom, w in blk:
            v = rv.fn(atom)
            if v < 0:
                return False
            acc.add_fraction(Fraction(v) * w)
        s = acc.value() if (n in samples or n == cert.depth) else None
        if s is not None:
            if s < prev or (n in samples and samples[n] != s):
                return False
            prev = s
    final = acc.value()
    return final == cert.partial_sum and final > cert.threshold


# ---------------------------------------------------------------------------
# partitions and conditional expectation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Partition:
    """Labelled blocks of atom ids covering the finite view at ``depth``."""

    blocks: tuple[frozenset, ...]
    labels: tuple[Hashable, ...]
    depth: int

    @classmethod
    def from_key(cls, space: CountableSpace, depth: int, key: Callable[[Atom], Hashable]) -> "Partition":
        groups: dict[Hashable, set] = {}
        for a, _ in space.finite_view(depth):
            groups.setdefault(key(a), set()).add(a.id)
        labels = tuple(groups)
        return cls(tuple(frozenset(groups[k]) for k in labels), labels, depth)

    @classmethod
    def trivial(cls, space: CountableSpace, depth: int) -> "Partition":
        return cls.from_key(space, depth, lambda a: "omega")

    @classmethod
    def finest(cls, space: CountableSpace, depth: int) -> "Partition":
        return cls.from_key(space, depth, lambda a: a.id)

    def block_of(self, atom_id: Hashable) -> int:
        for i, b in enumerate(self.blocks):
            if atom_id in b:
                return i
        raise KeyError(atom_id)

    def validate(self, space: CountableSpace) -> dict[int, Fraction]:
        """Check cover/disjointness over the finite view; return block masses."""
        view = space.finite_view(self.depth)
        index: dict[Hashable, int] = {}
        for i, b in enumerate(self.blocks):
            for aid in b:
                if aid in index:
                    raise SpecError(f"atom {aid!r} in two blocks")
                index[aid] = i
        masses = {i: ZERO for i in range(len(self.blocks))}
        seen = set()
        for a, w in view:
            if a.id not in index:
                raise SpecError(f"atom {a.id!r} not covered")
            masses[index[a.id]] += w
            seen.add(a.id)
        if seen != set(index):
            raise SpecError("partition mentions atoms outside the finite view")
        for i, m in masses.items():
            if m <= 0:
                raise ZeroMassBlock(f"block {self.labels[i]!r} has zero mass")
        return masses


def conditional_expectation(space: CountableSpace, rv: RandomVariable, partition: Partition) -> RandomVariable:
    """Block-wise conditional mean, as a random variable constant on blocks."""
    if not space.is_finite and (rv.settle_depth is None or rv.settle_depth > partition.depth):
        raise IndeterminateTail(f"{rv.name} has not settled at partition depth {partition.depth}")
    masses = partition.validate(space)
    sums = {i: RationalSum() for i in masses}
    index = {aid: i for i, b in enumerate(partition.blocks) for aid in b}
    for a, w in space.finite_view(partition.depth):
        v = rv.fn(a)
        if isinstance(v, float):
            raise IndeterminateTail(f"non-finite value on {a!r}")
        sums[index[a.id]].add_fraction(Fraction(v) * w)
    means = {i: sums[i].value() / masses[i] for i in masses}
    by_atom = {aid: means[i] for aid, i in index.items()}
    return RandomVariable(
        lambda a: by_atom[a.id],
        nonnegative=all(m >= 0 for m in means.values()),
        settle_depth=partition.depth,
        name=f"E[{rv.name}|P]",
    )
