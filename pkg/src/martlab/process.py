"""Right-continuous piecewise-constant paths and the processes built from them."""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Any, Callable, Iterable, Mapping, Sequence

from .errors import HorizonExceeded, IndeterminateTail, NotTerminating, SpecError
from .measure import (
    INF,
    Atom,
    CountableSpace,
    Exact,
    RandomVariable,
    RationalSum,
    as_rational,
    fmt_rational,
)

TERMINATING = "terminating"
GENERATIVE = "generative"


class PiecewiseConstantPath:
    """Path ``t -> value`` that starts at ``initial`` and jumps at finitely many times.

    Jumps that do not change the value are dropped, so two paths describe the
    same function exactly when they compare equal.  A jump at time 0 is folded
    into the initial value.
    """

    __slots__ = ("initial", "times", "values")

    def __init__(self, initial: Any, jumps: Iterable[tuple[Any, Any]] = ()):
        times: list = []
        values: list = []
        cur = initial
        last = -1
        for t, v in jumps:
            if not t >= 0 or t == INF:
                raise SpecError(f"jump time must be finite and nonnegative, got {t!r}")
            if t <= last:
                raise SpecError("jump times must be strictly increasing")
            last = t
            if t == 0:
                initial = cur = v
                continue
            if v != cur:
                times.append(t)
                values.append(v)
                cur = v
        self.initial = initial
        self.times = tuple(times)
        self.values = tuple(values)

    @classmethod
    def _raw(cls, initial, times, values) -> "PiecewiseConstantPath":
        p = cls.__new__(cls)
        p.initial, p.times, p.values = initial, times, values
        return p

    def value_at(self, t: Any) -> Any:
        i = bisect_right(self.times, t)
        return self.values[i - 1] if i else self.initial

    @property
    def terminal(self) -> Any:
        return self.values[-1] if self.values else self.initial

    @property
    def jumps(self) -> tuple:
        return tuple(zip(self.times, self.values))

    def segments(self) -> list[tuple[Any, Any, Any]]:
        """``[(start, end, value), ...]`` with the last segment ending at INF."""
        starts = (0,) + self.times
        vals = (self.initial,) + self.values
        ends = self.times + (INF,)
        return list(zip(starts, ends, vals))

    def prefix(self, t: Any) -> tuple:
        """Hashable description of the path on ``[0, t]``."""
        k = bisect_right(self.times, t)
        return (self.initial, self.times[:k], self.values[:k])

    def stopped(self, tau: Any) -> "PiecewiseConstantPath":
        if tau == INF:
            return self
        k = bisect_right(self.times, tau)
        return self._raw(self.initial, self.times[:k], self.values[:k])

    def map(self, f: Callable[[Any], Any]) -> "PiecewiseConstantPath":
        return PiecewiseConstantPath(f(self.initial), [(t, f(v)) for t, v in self.jumps])

    def sup_before(self, t: Any) -> Any:
        """Supremum of the path over ``[0, t)``."""
        best = self.initial
        for s, v in zip(self.times, self.values):
            if s >= t:
                break
            if v > best:
                best = v
        return best

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, PiecewiseConstantPath) and self.initial == other.initial
                and self.times == other.times and self.values == other.values)

    def __hash__(self) -> int:
        return hash((self.initial, self.times, self.values))

    def __repr__(self) -> str:
        return f"PiecewiseConstantPath({self.initial!r}, {list(self.jumps)!r})"


def _all_int(xs) -> bool:
    return all(isinstance(x, int) for x in xs)


class PathProcess:
    """A process on a countable space, one path per atom.

    ``quiet_depth(t)`` (infinite spaces only) returns a depth beyond which
    every atom follows its tail representative's path on ``[0, t]``; it is what
    makes time-``t`` expectations exact.  ``extension`` is set when the space
    carries an auxiliary uniform (see :mod:`martlab.stopping`).
    """

    def __init__(
        self,
        space: CountableSpace,
        path_of: Callable[[Atom], PiecewiseConstantPath],
        kind: str = TERMINATING,
        *,
        quiet_depth: Callable[[Any], int] | None = None,
        horizon: int | None = None,
        extension: Any = None,
        name: str = "X",
        descriptor: Mapping[str, Any] | None = None,
        value_fn: Callable[[Atom, Any], Any] | None = None,
        terminal_fn: Callable[[Atom], Any] | None = None,
        base: "PathProcess | None" = None,
    ):
        if kind not in (TERMINATING, GENERATIVE):
            raise SpecError(f"unknown process kind {kind!r}")
        if kind == GENERATIVE and horizon is None:
            raise SpecError("generative processes need a horizon")
        self.space = space
        self._path_of = path_of
        self.kind = kind
        self._quiet_depth = quiet_depth
        self.horizon = horizon
        self.extension = extension
        self.name = name
        self.descriptor = dict(descriptor) if descriptor else None
        # closed forms, used instead of building the path when available
        self._value_fn = value_fn
        self._terminal_fn = terminal_fn
        self.base = base

    @property
    def terminating(self) -> bool:
        return self.kind == TERMINATING

    def path(self, atom: Atom) -> PiecewiseConstantPath:
        return self._path_of(atom)

    def quiet_depth(self, t: Any) -> int | None:
        if self.space.is_finite:
            return self.space.n_blocks
        if self._quiet_depth is None or t == INF:
            return None
        return self._quiet_depth(t)

    def value_at(self, atom: Atom, t: Any) -> Any:
        if self.horizon is not None and t > self.horizon:
            raise HorizonExceeded(f"t={t} beyond horizon {self.horizon}")
        if self._value_fn is not None:
            return self._value_fn(atom, t)
        return self.path(atom).value_at(t)

    def limit_at_infinity(self, atom: Atom) -> Any:
        if not self.terminating:
            raise NotTerminating(f"{self.name} is generative (horizon {self.horizon})")
        if self._terminal_fn is not None:
            return self._terminal_fn(atom)
        return self.path(atom).terminal

    def liminf_abs(self, atom: Atom) -> Any:
        return abs(self.limit_at_infinity(atom))

    def observation(self, atom: Atom, t: Any) -> tuple:
        """What an observer of the natural filtration knows about ``atom`` at ``t``."""
        obs = self.path(atom).prefix(t)
        if self.extension is not None:
            return obs + (self.extension.revealed_level(self, atom, t),)
        return obs

    def map_values(self, f: Callable[[Any], Any], name: str | None = None) -> "PathProcess":
        po = self._path_of
        return PathProcess(self.space, lambda a: po(a).map(f), self.kind,
                           quiet_depth=self._quiet_depth, horizon=self.horizon,
                           extension=self.extension, name=name or f"f({self.name})")

    def abs(self) -> "PathProcess":
        return self.map_values(abs, name=f"|{self.name}|")

    def event_times(self, depth: int | None = None, upto: Any = INF) -> list:
        """Sorted jump epochs (plus 0) over the finite view at ``depth``."""
        depth = self.space.n_blocks if depth is None else depth
        ts = {0}
        for a, _ in self.space.finite_view(depth):
            for s in self.path(a).times:
                if s <= upto:
                    ts.add(s)
        return sorted(ts)

    def __repr__(self) -> str:
        return f"PathProcess({self.name!r}, {self.kind}, {self.space!r})"


# -- module-level operations ------------------------------------------------------

def value_at(process: PathProcess, atom: Atom, t: Any) -> Any:
    return process.value_at(atom, t)


def limit_at_infinity(process: PathProcess, atom: Atom) -> Any:
    return process.limit_at_infinity(atom)


def liminf_abs(process: PathProcess, atom: Atom) -> Any:
    return process.liminf_abs(atom)


def stop(process: PathProcess, spec: Any) -> PathProcess:
    """The stopped process ``t -> X_{tau ^ t}``."""
    from .stopping import evaluate

    po = process._path_of

    def path_of(a: Atom) -> PiecewiseConstantPath:
        return po(a).stopped(evaluate(spec, process, a))

    kind = process.kind
    if kind == GENERATIVE and process.space.is_finite:
        if all(evaluate(spec, process, a) != INF for a in process.space.atoms(1)):
            kind = TERMINATING
    return PathProcess(process.space, path_of, kind, quiet_depth=process._quiet_depth,
                       horizon=process.horizon if kind == GENERATIVE else None,
                       extension=process.extension, name=f"{process.name}^tau")


def value_rv(process: PathProcess, t: Any) -> RandomVariable:
    """``X_t`` as a random variable that settles at the quiet depth of ``t``."""
    return RandomVariable(lambda a: process.value_at(a, t), settle_depth=process.quiet_depth(t),
                          name=f"{process.name}_{t}")


def limit_rv(process: PathProcess) -> RandomVariable:
    sd = process.space.n_blocks if process.space.is_finite else None
    if not process.terminating:
        raise NotTerminating(f"{process.name} is generative (horizon {process.horizon})")
    fn = process._terminal_fn or process.limit_at_infinity
    return RandomVariable(fn, settle_depth=sd, name=f"{process.name}_inf")


def liminf_abs_rv(process: PathProcess) -> RandomVariable:
    sd = process.space.n_blocks if process.space.is_finite else None
    lim = limit_rv(process).fn
    return RandomVariable(lambda a: abs(lim(a)), nonnegative=True, settle_depth=sd,
                          name=f"liminf|{process.name}|")


def marginal_means(process: PathProcess, times: Sequence[Any]) -> dict[Any, Exact]:
    """Exact ``E[X_t]`` for every ``t`` in ``times`` from one sweep over jump events."""
    if not times:
        return {}
    ts = sorted(set(times))
    tmax = ts[-1]
    if process.horizon is not None and tmax > process.horizon:
        raise HorizonExceeded(f"t={tmax} beyond horizon {process.horizon}")
    space = process.space
    depth = process.quiet_depth(tmax)
    if depth is None:
        raise IndeterminateTail(f"{process.name}: no quiet depth for t={tmax}")

    base = RationalSum()
    events: dict[Any, RationalSum] = {}

    def feed(path: PiecewiseConstantPath, w: Fraction) -> None:
        wn, wd = w.numerator, w.denominator
        prev = path.initial
        if prev:
            base.add(prev.numerator * wn, prev.denominator * wd)
        for s, v in zip(path.times, path.values):
            if s > tmax:
                break
            d = v - prev
            prev = v
            acc = events.get(s)
            if acc is None:
                acc = events[s] = RationalSum()
            acc.add(d.numerator * wn, d.denominator * wd)

    for _, blk in space.iter_blocks(depth):
        for a, w in blk:
            feed(process.path(a), w)
    # tail representatives only matter when their paths are nonzero before tmax
    reps = [(a, s) for a, s in space.tail_classes]
    if reps and not (space.is_finite and depth >= space.n_blocks):
        rep_paths = [(process.path(a), s) for a, s in reps]
        if any(p.initial or any(s <= tmax for s in p.times) for p, _ in rep_paths):
            r = space.residual(depth)
            for p, s in rep_paths:
                feed(p, s * r)

    out: dict[Any, Exact] = {}
    run = RationalSum()
    run.add(base.num, base.den)
    ev = sorted(events)
    j = 0
    for t in ts:
        while j < len(ev) and ev[j] <= t:
            e = events[ev[j]]
            run.add(e.num, e.den)
            j += 1
        out[t] = Exact(run.value())
    return out


# -- generative processes -----------------------------------------------------

def _srw_step(state: int, k: int, u: float, params: Mapping[str, Any]) -> int:
    return state + (1 if u < 0.5 else -1)


KERNELS: dict[str, Callable[[int, int, float, Mapping[str, Any]], int]] = {
    "simple_random_walk": _srw_step,
}


@dataclass(frozen=True)
class GenerativeProcess:
    """Discrete-state process generated step by step up to a hard horizon.

    Steps happen at integer times ``1..horizon``; paths are constant in between.
    """

    kernel: str
    horizon: int
    initial: int = 0
    params: Mapping[str, Any] = field(default_factory=dict)
    name: str = "W"

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise SpecError(f"unknown kernel {self.kernel!r}")
        if self.horizon < 1:
            raise SpecError("horizon must be positive")

    @property
    def kind(self) -> str:
        return GENERATIVE

    def step(self, state: int, k: int, u: float) -> int:
        return KERNELS[self.kernel](state, k, u, self.params)

    def path_from_uniforms(self, us: Sequence[float]) -> PiecewiseConstantPath:
        x = self.initial
        jumps = []
        for k, u in enumerate(us[: self.horizon]):
            x = self.step(x, k, u)
            jumps.append((k + 1, x))
        return PiecewiseConstantPath(self.initial, jumps)

    def sample_path(self, seed: int, index: int) -> PiecewiseConstantPath:
        from .montecarlo import step_uniforms

        return self.path_from_uniforms(step_uniforms(seed, index, self.horizon))

    def as_path_process(self, max_horizon: int = 16) -> PathProcess:
        """Enumerate every step sequence as an equally weighted atom (symmetric walk only)."""
        if self.kernel != "simple_random_walk":
            raise SpecError("only the simple random walk can be enumerated")
        h = self.horizon
        if h > max_horizon:
            raise SpecError(f"horizon {h} too large to enumerate (limit {max_horizon})")
        w = Fraction(1, 2**h)
        atoms = []
        paths = {}
        for steps in product((-1, 1), repeat=h):
            a = Atom(steps, {"steps": steps, "block": 1})
            x = self.initial
            jumps = []
            for k, s in enumerate(steps):
                x += s
                jumps.append((k + 1, x))
            paths[steps] = PiecewiseConstantPath(self.initial, jumps)
            atoms.append((a, w))
        space = CountableSpace.finite(atoms, name=f"walk-{h}")
        return PathProcess(space, lambda a: paths[a.id], GENERATIVE, horizon=h, name=self.name,
                           descriptor={"kernel": self.kernel, "horizon": h})


def simple_random_walk(horizon: int, initial: int = 0) -> GenerativeProcess:
    return GenerativeProcess("simple_random_walk", horizon, initial)


# -- JSON process specs ------------------------------------------------------------

SCHEMA = "mart-lab/1"


def path_to_json(p: PiecewiseConstantPath) -> dict:
    return {"initial": fmt_rational(p.initial),
            "jumps": [[fmt_rational(t), fmt_rational(v)] for t, v in p.jumps]}


def _id_json(x: Any) -> Any:
    if isinstance(x, tuple):
        return [_id_json(y) for y in x]
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, Fraction):
        return fmt_rational(x)
    return x


def _id_from_json(x: Any) -> Any:
    if isinstance(x, list):
        return tuple(_id_from_json(y) for y in x)
    return x


def process_to_json(process: PathProcess | GenerativeProcess, depth: int | None = None) -> dict:
    """Serialize a process.

    Generative processes and example-built processes (when ``depth`` is None)
    serialize to their declarative form; otherwise the finite view at
    ``depth`` is written out atom by atom.
    """
    if isinstance(process, GenerativeProcess):
        return {"schema": SCHEMA, "kind": GENERATIVE, "kernel": process.kernel,
                "params": dict(process.params), "horizon": process.horizon,
                "initial": process.initial}
    if depth is None and process.descriptor and "example" in process.descriptor:
        return {"schema": SCHEMA, "kind": "example", **process.descriptor}
    if depth is None:
        if not process.space.is_finite:
            raise SpecError("infinite space: give a depth to serialize its finite view")
        depth = process.space.n_blocks
    atoms = []
    for a, w in process.space.finite_view(depth):
        atoms.append({"id": _id_json(a.id), "weight": fmt_rational(w), **path_to_json(process.path(a))})
    kind = process.kind if process.space.is_finite else TERMINATING
    out = {"schema": SCHEMA, "kind": kind, "atoms": atoms}
    if process.horizon is not None:
        out["horizon"] = process.horizon
    return out


def process_from_json(obj: Mapping[str, Any]) -> PathProcess | GenerativeProcess:
    if obj.get("schema", SCHEMA) != SCHEMA:
        raise SpecError(f"unsupported schema {obj.get('schema')!r}")
    kind = obj.get("kind")
    if kind == "example":
        from .examples import ExampleDescriptor, build

        params = {k: v for k, v in obj.items() if k not in ("schema", "kind", "example")}
        return build(ExampleDescriptor(obj["example"], **params)).process
    if kind == GENERATIVE and "kernel" in obj:
        return GenerativeProcess(obj["kernel"], int(obj["horizon"]), int(obj.get("initial", 0)),
                                 dict(obj.get("params", {})))
    if kind not in (TERMINATING, GENERATIVE):
        raise SpecError(f"unknown process kind {kind!r}")
    try:
        entries = obj["atoms"]
    except KeyError as exc:
        raise SpecError("process spec needs 'atoms'") from exc
    atoms = []
    paths = {}
    for e in entries:
        aid = _id_from_json(e["id"])
        a = Atom(aid, {"block": 1})
        jumps = [(as_rational(t), as_rational(v)) for t, v in e.get("jumps", [])]
        paths[aid] = PiecewiseConstantPath(as_rational(e.get("initial", "0")), jumps)
        atoms.append((a, e["weight"]))
    space = CountableSpace.finite(atoms, name=obj.get("name", "spec"))
    horizon = obj.get("horizon") if kind == GENERATIVE else None
    return PathProcess(space, lambda a: paths[a.id], kind, horizon=horizon, name=obj.get("name", "X"))
