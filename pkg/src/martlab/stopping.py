"""Declarative stopping times: evaluation, adaptedness, finiteness, randomization.

A stopping rule is a small expression tree (:class:`Const`, :class:`HitAbove`,
:class:`Min`, ...) evaluated atom by atom against a :class:`PathProcess`.
Adaptedness is checked against the natural filtration of the observed
signals: the path itself and, on a uniformly extended space, the auxiliary
level ``U`` from its reveal time on.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import MissingUniform, NotTerminating, SpecError
from .measure import (
    INF,
    ZERO,
    Atom,
    CountableSpace,
    RandomVariable,
    as_rational,
    fmt_rational,
    rational_json,
)
from .process import PathProcess, PiecewiseConstantPath


# ---------------------------------------------------------------------------
# events for two-point times
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValueEvent:
    """``{X_time in values}``; measurable at ``time`` by construction."""

    time: Fraction
    values: frozenset

    def contains(self, process: PathProcess, atom: Atom) -> bool:
        return process.value_at(atom, self.time) in self.values

    def to_json(self) -> dict:
        return {"kind": "value", "time": fmt_rational(self.time),
                "values": sorted(fmt_rational(v) for v in self.values)}


@dataclass(frozen=True)
class AtomEvent:
    """An explicit set of atom ids; measurability is whatever the check says."""

    ids: frozenset

    def contains(self, process: PathProcess, atom: Atom) -> bool:
        return atom.id in self.ids

    def to_json(self) -> dict:
        return {"kind": "atoms", "ids": sorted(map(repr, self.ids))}


# ---------------------------------------------------------------------------
# expression tree
# ---------------------------------------------------------------------------

class StoppingSpec:
    """Base class of stopping-rule nodes."""

    def children(self) -> tuple["StoppingSpec", ...]:
        return ()

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children()), default=0)

    def leaves(self) -> list["StoppingSpec"]:
        kids = self.children()
        if not kids:
            return [self]
        out: list[StoppingSpec] = []
        for c in kids:
            for leaf in c.leaves():
                if leaf not in out:
                    out.append(leaf)
        return out

    def times(self) -> set:
        """Deterministic instants mentioned by the rule (for grids)."""
        out: set = set()
        for c in self.children():
            out |= c.times()
        return out

    def uses_uniform(self) -> bool:
        return any(c.uses_uniform() for c in self.children())


@dataclass(frozen=True)
class Const(StoppingSpec):
    t: Any

    def times(self) -> set:
        return {self.t} if self.t != INF else set()

    def __str__(self) -> str:
        return f"{self.t}"


@dataclass(frozen=True)
class HitAbove(StoppingSpec):
    """First ``t`` with ``X_t >= level`` (``> level`` when strict)."""

    level: Fraction
    strict: bool = False

    def __str__(self) -> str:
        return f"hit({'>' if self.strict else '>='}{self.level})"


@dataclass(frozen=True)
class HitAbsAbove(StoppingSpec):
    """First ``t`` with ``|X_t| >= level``."""

    level: Fraction

    def __str__(self) -> str:
        return f"hit(|X|>={self.level})"


@dataclass(frozen=True)
class HitAbsBelow(StoppingSpec):
    """First ``t >= after`` with ``|X_t| <= level``."""

    level: Fraction
    after: Fraction = ZERO

    def times(self) -> set:
        return {self.after}

    def __str__(self) -> str:
        return f"hit(|X|<={self.level}, t>={self.after})"


@dataclass(frozen=True)
class TwoPoint(StoppingSpec):
    """``s`` off the event, ``t`` on it."""

    event: Any
    s: Fraction
    t: Fraction

    def __post_init__(self):
        if not self.s < self.t:
            raise SpecError("two-point time needs s < t")

    def times(self) -> set:
        out = {self.s, self.t}
        if isinstance(self.event, ValueEvent):
            out.add(self.event.time)
        return out

    def __str__(self) -> str:
        return f"twopoint({self.s},{self.t})"


@dataclass(frozen=True)
class Min(StoppingSpec):
    a: StoppingSpec
    b: StoppingSpec

    def children(self):
        return (self.a, self.b)

    def __str__(self) -> str:
        return f"min({self.a},{self.b})"


@dataclass(frozen=True)
class Max(StoppingSpec):
    a: StoppingSpec
    b: StoppingSpec

    def children(self):
        return (self.a, self.b)

    def __str__(self) -> str:
        return f"max({self.a},{self.b})"


@dataclass(frozen=True)
class ReciprocalU(StoppingSpec):
    """``1/U`` on a uniformly extended space."""

    def uses_uniform(self) -> bool:
        return True

    def __str__(self) -> str:
        return "1/U"


@dataclass(frozen=True)
class NearLiminf(StoppingSpec):
    """First ``t`` with ``||X_t| - liminf |X|| <= tol``.

    Looks at the terminal value, so it is generally *not* a stopping time;
    it exists to produce non-adapted witnesses.
    """

    tol: Fraction

    def __str__(self) -> str:
        return f"near_liminf({self.tol})"


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _first(path: PiecewiseConstantPath, pred, after: Any = 0) -> Any:
    starts = (0,) + path.times
    vals = (path.initial,) + path.values
    n = len(starts)
    for i in range(n):
        end = starts[i + 1] if i + 1 < n else INF
        if end <= after:
            continue
        if pred(vals[i]):
            s = starts[i]
            return s if s >= after else after
    return INF


def _eval(spec: StoppingSpec, process: PathProcess, atom: Atom, path: PiecewiseConstantPath) -> Any:
    if isinstance(spec, Const):
        return spec.t
    if isinstance(spec, HitAbove):
        lv = spec.level
        return _first(path, (lambda v: v > lv) if spec.strict else (lambda v: v >= lv))
    if isinstance(spec, HitAbsAbove):
        lv = spec.level
        return _first(path, lambda v: abs(v) >= lv)
    if isinstance(spec, HitAbsBelow):
        lv = spec.level
        return _first(path, lambda v: abs(v) <= lv, spec.after)
    if isinstance(spec, Min):
        return min(_eval(spec.a, process, atom, path), _eval(spec.b, process, atom, path))
    if isinstance(spec, Max):
        return max(_eval(spec.a, process, atom, path), _eval(spec.b, process, atom, path))
    if isinstance(spec, TwoPoint):
        return spec.t if spec.event.contains(process, atom) else spec.s
    if isinstance(spec, ReciprocalU):
        u = atom.payload.get("u")
        if u is None:
            raise MissingUniform("1/U needs a uniformly extended space")
        return 1 / u
    if isinstance(spec, NearLiminf):
        if not process.terminating:
            raise NotTerminating("liminf of a generative process")
        lim = abs(path.terminal)
        tol = spec.tol
        return _first(path, lambda v: abs(abs(v) - lim) <= tol)
    raise SpecError(f"unknown stopping node {spec!r}")


def evaluate(spec: StoppingSpec, process: PathProcess, atom: Atom) -> Any:
    """``tau(atom)`` as an extended nonnegative rational (``INF`` allowed)."""
    return _eval(spec, process, atom, process.path(atom))


def evaluate_many(spec: StoppingSpec, process: PathProcess, atoms: Sequence[Atom],
                  cache: dict | None = None) -> list:
    """Evaluate on many atoms, memoizing every subtree in ``cache``."""
    if cache is None:
        cache = {}
    hit = cache.get(spec)
    if hit is not None:
        return hit
    if isinstance(spec, (Min, Max)):
        xs = evaluate_many(spec.a, process, atoms, cache)
        ys = evaluate_many(spec.b, process, atoms, cache)
        op = min if isinstance(spec, Min) else max
        out = [op(x, y) for x, y in zip(xs, ys)]
    else:
        out = [evaluate(spec, process, a) for a in atoms]
    cache[spec] = out
    return out


def stopped_value(process: PathProcess, spec: StoppingSpec, atom: Atom) -> Any:
    """``X_tau``; uses the limit when ``tau`` is infinite."""
    tau = evaluate(spec, process, atom)
    if tau == INF:
        return process.limit_at_infinity(atom)
    return process.value_at(atom, tau)


def stopped_rv(process: PathProcess, spec: StoppingSpec, settle_depth: int | None = None,
               nonnegative: bool = False) -> RandomVariable:
    return RandomVariable(lambda a: stopped_value(process, spec, a), nonnegative=nonnegative,
                          settle_depth=settle_depth, name=f"{process.name}_[{spec}]")


# ---------------------------------------------------------------------------
# adaptedness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdaptednessReport:
    verdict: str  # "adapted" | "not_adapted"
    witness: tuple[Atom, Atom, Any] | None = None
    grid_size: int = 0
    n_atoms: int = 0

    @property
    def adapted(self) -> bool:
        return self.verdict == "adapted"

    def replay(self, spec: StoppingSpec, process: PathProcess) -> bool:
        """True when the witness still shows two indistinguishable atoms stopped differently."""
        if self.witness is None:
            return False
        a, b, t = self.witness
        same = process.observation(a, t) == process.observation(b, t)
        return same and ((evaluate(spec, process, a) <= t) != (evaluate(spec, process, b) <= t))

    def to_json(self) -> dict:
        out = {"verdict": self.verdict, "grid_size": self.grid_size, "atoms": self.n_atoms}
        if self.witness is not None:
            a, b, t = self.witness
            out["witness"] = {"atoms": [repr(a.id), repr(b.id)], "time": rational_json(t)}
        return out


def default_grid(spec: StoppingSpec | None, process: PathProcess, atoms: Sequence[Atom],
                 taus: Iterable[Any] = ()) -> list:
    """``{0}`` + jump epochs + rule instants + finite tau values, with midpoints."""
    pts = {Fraction(0)}
    for a in atoms:
        pts.update(process.path(a).times)
    if spec is not None:
        pts.update(t for t in spec.times() if t != INF)
    pts.update(t for t in taus if t != INF)
    if process.horizon is not None:
        pts = {p for p in pts if p <= process.horizon}
    xs = sorted(pts)
    mids = [(x + y) / 2 for x, y in zip(xs, xs[1:])]
    tail = [xs[-1] + 1] if process.horizon is None else []
    return sorted(set(xs) | set(mids) | set(tail))


def working_atoms(process: PathProcess, depth: int | None = None) -> list[Atom]:
    space = process.space
    if space.is_finite:
        return space.atoms(space.n_blocks)
    return space.atoms(depth if depth is not None else 20)


class ObservationTable:
    """Observational classes of ``atoms`` at every grid time, precomputed.

    Checking a rule then costs one vectorized pass: at each grid time every
    class must agree on the indicator ``{tau <= t}``.  Times are compared
    through exact ranks, so no rounding enters.
    """

    def __init__(self, process: PathProcess, atoms: Sequence[Atom], grid: Sequence[Any]):
        self.process = process
        self.atoms = list(atoms)
        self.grid = sorted(set(grid))
        n = len(self.atoms)
        self._ranks: dict[Any, int] = {}
        rows_order, starts, owners = [], [], []
        for r, t in enumerate(self.grid):
            ids: dict[Hashable, int] = {}
            g = np.fromiter((ids.setdefault(process.observation(a, t), len(ids)) for a in self.atoms),
                            dtype=np.int64, count=n)
            order = np.argsort(g, kind="stable")
            gs = g[order]
            bounds = np.flatnonzero(np.r_[True, gs[1:] != gs[:-1]])
            rows_order.append(order + r * n)
            starts.append(bounds + r * n)
            owners.append(np.full(len(bounds), r))
        self._flat_order = np.concatenate(rows_order) if rows_order else np.zeros(0, dtype=np.int64)
        self._starts = np.concatenate(starts) if starts else np.zeros(0, dtype=np.int64)
        self._row_of_start = np.concatenate(owners) if owners else np.zeros(0, dtype=np.int64)
        self._grid_rank = np.array([self._rank(t) for t in self.grid], dtype=np.int64)

    def _rank(self, x: Any) -> int:
        # grid time i has rank 2i; a value strictly between grid times i-1 and i has rank 2i-1
        r = self._ranks.get(x)
        if r is None:
            i = bisect_left(self.grid, x)
            on_grid = i < len(self.grid) and self.grid[i] == x
            r = self._ranks[x] = 2 * i if on_grid else 2 * i - 1
        return r

    def first_violation(self, taus: Sequence[Any]) -> tuple[int, int, Any] | None:
        """``(i, j, t)``: atoms ``i`` and ``j`` look alike at ``t`` but stop differently."""
        if not self.grid:
            return None
        tr = np.fromiter((self._rank(x) for x in taus), dtype=np.int64, count=len(taus))
        ind = (tr[None, :] <= self._grid_rank[:, None]).ravel()
        flat = ind[self._flat_order].astype(np.int8)
        lo = np.minimum.reduceat(flat, self._starts)
        hi = np.maximum.reduceat(flat, self._starts)
        bad = np.flatnonzero(lo != hi)
        if bad.size == 0:
            return None
        k = bad[0]
        row = int(self._row_of_start[k])
        end = self._starts[k + 1] if k + 1 < len(self._starts) else len(self._flat_order)
        members = self._flat_order[self._starts[k]:end] - row * len(self.atoms)
        t = self.grid[row]
        first = int(members[0])
        want = taus[first] <= t
        other = next(int(m) for m in members if (taus[int(m)] <= t) != want)
        return first, other, t


def adaptedness_check(spec: StoppingSpec, process: PathProcess, grid: Sequence[Any] | None = None,
                      depth: int | None = None, atoms: Sequence[Atom] | None = None,
                      taus: Sequence[Any] | None = None,
                      table: ObservationTable | None = None) -> AdaptednessReport:
    """Equal observations at ``t`` must give equal ``{tau <= t}`` indicators.

    Runs over the working atoms (or the atoms of ``table``) and every grid time.
    """
    if table is not None:
        atoms = table.atoms
    atoms = list(atoms) if atoms is not None else working_atoms(process, depth)
    if taus is None:
        taus = evaluate_many(spec, process, atoms)
    if table is None:
        if grid is None:
            grid = default_grid(spec, process, atoms, taus)
        table = ObservationTable(process, atoms, grid)
    hit = table.first_violation(taus)
    if hit is None:
        return AdaptednessReport("adapted", None, len(table.grid), len(atoms))
    i, j, t = hit
    return AdaptednessReport("not_adapted", (atoms[i], atoms[j], t), len(table.grid), len(atoms))


# ---------------------------------------------------------------------------
# finiteness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FinitenessCertificate:
    level: str  # bounded | exact_finite | exact_not_finite | horizon_limited
    bound: Any = None
    mass_at_infinity: tuple[Fraction, Fraction] | None = None
    stop_probability: Any = None
    horizon: int | None = None
    depth: int | None = None

    @property
    def finite(self) -> bool:
        return self.level in ("bounded", "exact_finite")

    def to_json(self) -> dict:
        out: dict[str, Any] = {"level": self.level}
        if self.bound is not None:
            out["bound"] = rational_json(self.bound)
        if self.mass_at_infinity is not None:
            out["mass_at_infinity"] = [rational_json(x) for x in self.mass_at_infinity]
        if self.stop_probability is not None:
            out["stop_probability"] = rational_json(self.stop_probability)
            out["horizon"] = self.horizon
        if self.depth is not None:
            out["depth"] = self.depth
        return out


def static_bound(spec: StoppingSpec, process: Any = None) -> Any:
    """Bound derivable from the syntax alone (``None`` if none).

    ``1/U`` is bounded by the reciprocal of the smallest uniform level when
    the process lives on an extended space.
    """
    if isinstance(spec, Const):
        return spec.t if spec.t != INF else None
    if isinstance(spec, TwoPoint):
        return spec.t
    if isinstance(spec, ReciprocalU):
        ext = getattr(process, "extension", None)
        return 1 / ext.levels[0] if ext is not None else None
    if isinstance(spec, Min):
        xs = [b for b in (static_bound(spec.a, process), static_bound(spec.b, process)) if b is not None]
        return min(xs) if xs else None
    if isinstance(spec, Max):
        x, y = static_bound(spec.a, process), static_bound(spec.b, process)
        return max(x, y) if x is not None and y is not None else None
    return None


def finiteness_check(spec: StoppingSpec, process: Any, depth: int | None = None,
                     max_depth: int = 100_000, adapted: bool | None = None,
                     horizon: int | None = None) -> FinitenessCertificate:
    """Tightest certifiable finiteness level.

    On an infinite space the unenumerated atoms are handled by the tail
    argument: once the working depth exceeds the quiet depth of ``u`` (the
    largest value of ``tau`` on the tail representatives), every unenumerated
    atom is indistinguishable from its representative up to ``u`` and, ``tau``
    being adapted, stops at the same time.
    """
    from .process import GenerativeProcess

    if isinstance(process, GenerativeProcess):
        from .lattice import stopped_law

        law = stopped_law(process, spec, horizon=horizon, exact=True)
        return FinitenessCertificate("horizon_limited", stop_probability=law.p_stop,
                                     horizon=law.horizon)

    static = static_bound(spec, process)
    space = process.space
    if space.is_finite:
        view = space.finite_view(space.n_blocks)
        taus = [evaluate(spec, process, a) for a, _ in view]
        inf_mass = sum((w for (a, w), t in zip(view, taus) if t == INF), ZERO)
        if inf_mass:
            return FinitenessCertificate("exact_not_finite", mass_at_infinity=(inf_mass, inf_mass),
                                         depth=space.n_blocks)
        return FinitenessCertificate("bounded", bound=max(taus), depth=space.n_blocks)

    if static is not None:
        return FinitenessCertificate("bounded", bound=static, depth=depth)

    d = depth if depth is not None else 20
    rep_taus = [evaluate(spec, process, a) for a, _ in space.tail_classes]
    if rep_taus and all(t != INF for t in rep_taus):
        q = process.quiet_depth(max(rep_taus))
        if q is not None and d < q <= max_depth:
            d = q

    enum, _ = _enum_with_weights(space, d)
    enum_atoms = [a for a, _ in enum]
    reps = [a for a, _ in space.tail_classes]
    taus = evaluate_many(spec, process, enum_atoms + reps)
    if adapted is None:
        adapted = adaptedness_check(spec, process, atoms=enum_atoms + reps, taus=taus).adapted
    return certify_finiteness(process, enum, taus[:len(enum)], taus[len(enum):], d, adapted)


def certify_finiteness(process: PathProcess, enum: Sequence[tuple[Atom, Fraction]], taus: Sequence[Any],
                       rep_taus: Sequence[Any], depth: int, adapted: bool) -> FinitenessCertificate:
    """Certificate from stopping times already evaluated on blocks ``1..depth`` and the tail representatives."""
    space = process.space
    enum_inf = sum((w for (a, w), t in zip(enum, taus) if t == INF), ZERO)
    if any(t == INF for t in rep_taus):
        resid = space.residual(depth)
        lo = enum_inf
        if space.tail_mass_lower is not None:
            pure = space.tail_mass_lower(depth)
            lo += sum((s * pure for (a, s), t in zip(space.tail_classes, rep_taus) if t == INF), ZERO)
        return FinitenessCertificate("exact_not_finite", mass_at_infinity=(lo, enum_inf + resid), depth=depth)

    u = max(rep_taus, default=ZERO)
    q = process.quiet_depth(u)
    tail_ok = adapted and q is not None and q <= depth
    if enum_inf:
        if tail_ok:
            return FinitenessCertificate("exact_not_finite", mass_at_infinity=(enum_inf, enum_inf), depth=depth)
        return FinitenessCertificate("exact_not_finite",
                                     mass_at_infinity=(enum_inf, enum_inf + space.residual(depth)), depth=depth)
    if tail_ok:
        return FinitenessCertificate("bounded", bound=max(list(taus) + list(rep_taus)), depth=depth)
    return FinitenessCertificate("exact_finite", depth=depth)


def _enum_with_weights(space: CountableSpace, depth: int):
    from .measure import enumerate_atoms

    return enumerate_atoms(space, max(depth, 1))


# ---------------------------------------------------------------------------
# uniform extension
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniformExtension:
    """Product of a base space with ``m`` equally likely mid-quantile levels of ``U``.

    ``U`` becomes observable at ``eta`` (a constant or a stopping rule of the
    base filtration).
    """

    base: CountableSpace
    eta: Any
    m: int
    space: CountableSpace = field(compare=False)
    levels: tuple = field(compare=False)

    def reveal_time(self, process: PathProcess, atom: Atom) -> Any:
        if isinstance(self.eta, StoppingSpec):
            return evaluate(self.eta, process, atom)
        return self.eta

    def revealed_level(self, process: PathProcess, atom: Atom, t: Any) -> Any:
        return atom.payload["u"] if self.reveal_time(process, atom) <= t else None

    def lift(self, process: PathProcess) -> PathProcess:
        """Same paths, now living on the extended space."""
        if process.space is not self.base:
            raise SpecError("process does not live on the base space")
        base_path = process._path_of
        vf, tf = process._value_fn, process._terminal_fn
        return PathProcess(self.space, lambda a: base_path(a.payload["base"]), process.kind,
                           quiet_depth=process._quiet_depth, horizon=process.horizon,
                           extension=self, name=process.name,
                           value_fn=(lambda a, t: vf(a.payload["base"], t)) if vf else None,
                           terminal_fn=(lambda a: tf(a.payload["base"])) if tf else None,
                           base=process)


def _lift_atom(a: Atom, k: int, u: Fraction) -> Atom:
    payload = dict(a.payload)
    payload.update(u=u, u_index=k, base=a)
    return Atom((a.id, k), payload)


def extend_with_uniform(space: CountableSpace, eta: Any = ZERO, m: int = 1) -> UniformExtension:
    if m < 1:
        raise SpecError("need at least one uniform level")
    if not isinstance(eta, StoppingSpec):
        eta = as_rational(eta)
    levels = tuple(Fraction(2 * k - 1, 2 * m) for k in range(1, m + 1))
    share = Fraction(1, m)

    def block(n: int):
        return [(_lift_atom(a, k, u), w * share)
                for a, w in space.block(n) for k, u in enumerate(levels, 1)]

    def mass(n: int):
        return space.mass_of_block(n)

    tails = [(_lift_atom(a, k, u), s * share) for a, s in space.tail_classes
             for k, u in enumerate(levels, 1)]
    ext = CountableSpace(block, n_blocks=space.n_blocks, block_mass=mass, tail_classes=tails,
                         tail_mass_lower=space.tail_mass_lower, name=f"{space.name}xU{m}")
    return UniformExtension(space, eta, m, ext, levels)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def spec_to_json(spec: StoppingSpec) -> dict:
    if isinstance(spec, Const):
        return {"op": "const", "t": fmt_rational(spec.t)}
    if isinstance(spec, HitAbove):
        return {"op": "hit_above", "level": fmt_rational(spec.level), "strict": spec.strict}
    if isinstance(spec, HitAbsAbove):
        return {"op": "hit_abs_above", "level": fmt_rational(spec.level)}
    if isinstance(spec, HitAbsBelow):
        return {"op": "hit_abs_below", "level": fmt_rational(spec.level), "after": fmt_rational(spec.after)}
    if isinstance(spec, (Min, Max)):
        return {"op": "min" if isinstance(spec, Min) else "max",
                "args": [spec_to_json(spec.a), spec_to_json(spec.b)]}
    if isinstance(spec, TwoPoint):
        return {"op": "two_point", "s": fmt_rational(spec.s), "t": fmt_rational(spec.t),
                "event": spec.event.to_json()}
    if isinstance(spec, ReciprocalU):
        return {"op": "reciprocal_u"}
    if isinstance(spec, NearLiminf):
        return {"op": "near_liminf", "tol": fmt_rational(spec.tol)}
    raise SpecError(f"unknown stopping node {spec!r}")


def _event_from_json(obj: Mapping[str, Any]) -> Any:
    kind = obj.get("kind")
    if kind == "value":
        return ValueEvent(as_rational(obj["time"]), frozenset(as_rational(v) for v in obj["values"]))
    if kind == "atoms":
        return AtomEvent(frozenset(obj["ids"]))
    raise SpecError(f"unknown event kind {kind!r}")


def spec_from_json(obj: Mapping[str, Any]) -> StoppingSpec:
    try:
        op = obj["op"]
        if op == "const":
            return Const(as_rational(obj["t"]))
        if op == "hit_above":
            return HitAbove(as_rational(obj["level"]), bool(obj.get("strict", False)))
        if op == "hit_abs_above":
            return HitAbsAbove(as_rational(obj["level"]))
        if op == "hit_abs_below":
            return HitAbsBelow(as_rational(obj["level"]), as_rational(obj.get("after", "0")))
        if op in ("min", "max"):
            args = [spec_from_json(x) for x in obj["args"]]
            if len(args) < 2:
                raise SpecError(f"{op} needs at least two arguments")
            node = args[0]
            for x in args[1:]:
                node = Min(node, x) if op == "min" else Max(node, x)
            return node
        if op == "two_point":
            return TwoPoint(_event_from_json(obj["event"]), as_rational(obj["s"]), as_rational(obj["t"]))
        if op == "reciprocal_u":
            return ReciprocalU()
        if op == "near_liminf":
            return NearLiminf(as_rational(obj["tol"]))
    except (KeyError, TypeError) as exc:
        raise SpecError(f"malformed stopping spec: {obj!r}") from exc
    raise SpecError(f"unknown stopping op {op!r}")
