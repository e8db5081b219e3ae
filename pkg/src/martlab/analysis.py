"""Checkers for the five optional-sampling statements and the diagnostics behind them.

Statements, strongest first:

``I``    the process is a uniformly integrable martingale;
``II``   ``X_inf`` exists, and ``X_tau`` is integrable with ``E[X_tau] = E[X_0]`` for
         every stopping time (infinite ones included);
``III``  ``IV`` together with ``E[liminf |X_t|] < inf``;
``IV``   ``X_tau`` is integrable with ``E[X_tau] = E[X_0]`` for every finite stopping time;
``V``    ``E[X_t] = E[X_0]`` for every deterministic ``t``.

Each verdict is ``holds_on_suite`` (nothing found on an explicitly described,
finite suite), ``violated`` (with a witness that can be replayed) or
``undecidable``.  A universal claim is never made.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .errors import IndeterminateTail, NotApplicable, NotTerminating, PreconditionFailed, SpecError
from .measure import (
    INF,
    ZERO,
    DivergenceCertificate,
    Exact,
    ExpectationResult,
    Partition,
    Policy,
    RandomVariable,
    RationalSum,
    Truncated,
    as_rational,
    enumerate_atoms,
    expectation,
    fmt_rational,
    rational_json,
)
from .process import (
    GenerativeProcess,
    PathProcess,
    PiecewiseConstantPath,
    liminf_abs_rv,
    marginal_means,
)
from .stopping import (
    Const,
    HitAbove,
    HitAbsAbove,
    HitAbsBelow,
    Max,
    Min,
    ObservationTable,
    ReciprocalU,
    StoppingSpec,
    TwoPoint,
    ValueEvent,
    adaptedness_check,
    certify_finiteness,
    default_grid,
    evaluate,
    spec_to_json,
    stopped_value,
)

STATEMENTS = ("I", "II", "III", "IV", "V")
HOLDS, VIOLATED, UNDECIDABLE = "holds_on_suite", "violated", "undecidable"

DEFAULT_DEPTH = 2000
DEFAULT_K = (1, 10, 100, 1000)


def _num_json(x: Any) -> Any:
    if isinstance(x, float):
        return {"decimal": x}
    return rational_json(x)


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StatementVerdict:
    statement: str
    verdict: str
    witness: dict | None = None
    suite: dict = field(default_factory=dict)
    evidence: dict = field(default_factory=dict)
    replay_fn: Callable[[], bool] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.statement not in STATEMENTS:
            raise SpecError(f"unknown statement {self.statement!r}")
        if self.verdict not in (HOLDS, VIOLATED, UNDECIDABLE):
            raise SpecError(f"unknown verdict {self.verdict!r}")
        if self.verdict == VIOLATED and self.witness is None:
            raise SpecError("a violation needs a witness")

    def replay(self) -> bool:
        """Recompute the witness from scratch; True when the violation reproduces."""
        if self.verdict != VIOLATED or self.replay_fn is None:
            return False
        return bool(self.replay_fn())

    def to_json(self) -> dict:
        out = {"statement": self.statement, "verdict": self.verdict, "suite": self.suite}
        if self.witness is not None:
            out["witness"] = self.witness
        if self.evidence:
            out["evidence"] = self.evidence
        return out


def _base(process):
    """Process on the base space when ``process`` lives on a uniform extension.

    Paths do not depend on the uniform, so marginal laws, limits and
    martingale identities can be computed on the base.
    """
    if isinstance(process, PathProcess) and process.base is not None:
        return process.base
    return process


def _working_depth(process: PathProcess, depth: int | None) -> int:
    if process.space.is_finite:
        return process.space.n_blocks
    if depth is not None:
        return depth
    desc = process.descriptor or {}
    return int(desc.get("depth", DEFAULT_DEPTH))


# ---------------------------------------------------------------------------
# statement V
# ---------------------------------------------------------------------------

def check_statement_V(process, grid: Sequence[Any] | None = None, depth: int | None = None) -> StatementVerdict:
    """``E[X_t] = E[X_0]`` at every grid time and every jump epoch (exact)."""
    if isinstance(process, GenerativeProcess):
        from .lattice import walk_marginal_means

        times = sorted(set(as_rational(t) for t in grid)) if grid is not None else list(range(process.horizon + 1))
        means = walk_marginal_means(process, [0] + list(times))
        engine = "binomial counts"
        suite = {"times": len(set(times) | {0}), "max_time": fmt_rational(max(times, default=0)),
                 "horizon": process.horizon}
    else:
        base = _base(process)
        d = _working_depth(base, depth)
        times = set(base.event_times(d, upto=d if not base.space.is_finite else INF))
        if grid is not None:
            times |= {as_rational(t) for t in grid}
        times = sorted(times)
        means = marginal_means(base, times)
        engine = "exact sweep"
        suite = {"times": len(times), "max_time": fmt_rational(times[-1]), "depth": d}
        if base is not process:
            suite["evaluated_on"] = "base space"
    e0 = means[0].value
    suite["engine"] = engine
    for t in sorted(means):
        v = means[t].value
        if v != e0:
            def replay(t=t, v=v):
                return check_statement_V(process, grid=[t], depth=depth).witness is not None
            return StatementVerdict("V", VIOLATED, {"time": rational_json(t), "E[X_t]": rational_json(v),
                                                    "E[X_0]": rational_json(e0)}, suite, replay_fn=replay)
    return StatementVerdict("V", HOLDS, None, suite, {"E[X_0]": rational_json(e0)})


# ---------------------------------------------------------------------------
# stopping families
# ---------------------------------------------------------------------------

def _default_times(grid_max: Fraction) -> list[Fraction]:
    pts = {Fraction(0), Fraction(1, 2)}
    a, b = 1, 2
    while a <= grid_max:
        pts.add(Fraction(a))
        a, b = b, a + b
    pts.add(Fraction(grid_max))
    return sorted(p for p in pts if p <= grid_max)


@dataclass(frozen=True)
class StoppingFamilyGenerator:
    """Stopping rules built from hitting, constant and two-point leaves.

    Trees of depth ``d`` are ``Min``/``Max`` of a tree of depth ``d - 1`` and a
    leaf.  ``times`` defaults to ``0, 1/2`` and the Fibonacci numbers up to
    ``grid_max``.
    """

    max_depth: int = 3
    levels: tuple = (Fraction(1, 2), Fraction(1), Fraction(4), Fraction(9))
    grid_max: Fraction = Fraction(50)
    times: tuple | None = None
    after_times: tuple | None = None
    include_two_point: bool = False
    include_randomized: bool = False
    max_rules: int | None = None
    randomized_threshold: Fraction = Fraction(5)

    def __post_init__(self):
        if self.max_depth < 1:
            raise SpecError("max_depth must be >= 1")
        object.__setattr__(self, "levels", tuple(Fraction(as_rational(x)) for x in self.levels))
        object.__setattr__(self, "grid_max", Fraction(as_rational(self.grid_max)))

    def time_grid(self) -> list[Fraction]:
        if self.times is not None:
            return sorted({Fraction(as_rational(t)) for t in self.times})
        return _default_times(self.grid_max)

    def leaves(self, randomized: bool = False) -> list[StoppingSpec]:
        ts = self.time_grid()
        out: list[StoppingSpec] = []
        out += [HitAbove(lv) for lv in self.levels]
        out += [HitAbsAbove(lv) for lv in self.levels]
        out += [Const(t) for t in ts]
        afters = self.after_times
        if afters is None:
            afters = [t for t in (Fraction(1), Fraction(5)) if t <= self.grid_max]
        out += [HitAbsBelow(lv, Fraction(as_rational(a))) for lv in self.levels for a in afters]
        if self.include_two_point:
            for s, t in zip(ts, ts[1:]):
                out.append(TwoPoint(ValueEvent(s, frozenset({0})), s, t))
        if randomized and self.include_randomized:
            out.append(ReciprocalU())
        return out

    def trees(self, randomized: bool = False) -> Iterable[StoppingSpec]:
        """Leaves, then depth-2 trees, and so on; ``Min``/``Max`` arguments are unordered."""
        leaves = self.leaves(randomized)
        layer = leaves
        count = 0
        for spec in layer:
            yield spec
            count += 1
            if self.max_rules is not None and count >= self.max_rules:
                return
        for _ in range(1, self.max_depth):
            nxt = []
            seen = set()
            if layer is leaves:
                pairs = combinations(leaves, 2)
            else:
                pairs = ((a, b) for a in layer for b in leaves)
            for a, b in pairs:
                for op in (Min, Max):
                    spec = op(a, b)
                    key = (op, id(a), id(b))
                    if key in seen:
                        continue
                    seen.add(key)
                    nxt.append(spec)
                    yield spec
                    count += 1
                    if self.max_rules is not None and count >= self.max_rules:
                        return
            layer = nxt

    def describe(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "levels": [fmt_rational(x) for x in self.levels],
            "times": [fmt_rational(t) for t in self.time_grid()],
            "include_two_point": self.include_two_point,
            "include_randomized": self.include_randomized,
        }


# ---------------------------------------------------------------------------
# statement IV
# ---------------------------------------------------------------------------

def _value_floor(spec: StoppingSpec) -> int | None:
    """A lower bound on ``X_tau`` on ``{tau < inf}`` implied by the rule on an integer walk."""
    if isinstance(spec, HitAbove):
        return math.floor(spec.level) + 1 if spec.strict else math.ceil(spec.level)
    if isinstance(spec, Min):
        a, b = _value_floor(spec.a), _value_floor(spec.b)
        return min(a, b) if a is not None and b is not None else None
    return None


def _generative_iv(walk: GenerativeProcess, gen: StoppingFamilyGenerator, stop_threshold: Fraction,
                   exact: bool | None) -> StatementVerdict:
    from .lattice import stopped_law

    exact = walk.horizon <= 2000 if exact is None else exact
    e0 = walk.initial
    spot = walk.__class__(walk.kernel, min(walk.horizon, 8), walk.initial, walk.params).as_path_process()
    tried = bounded_ok = inconclusive = rejected = 0
    for spec in gen.trees():
        if spec.uses_uniform():
            continue
        if not adaptedness_check(spec, spot).adapted:
            rejected += 1
            continue
        tried += 1
        law = stopped_law(walk, spec, exact=exact)
        if law.p_stop == 1:
            if law.e_stopped != e0:
                wit = {"rule": spec_to_json(spec), "E[X_tau]": _num_json(law.e_stopped), "E[X_0]": e0}
                return StatementVerdict("IV", VIOLATED, wit, {"rules_tried": tried},
                                        replay_fn=lambda s=spec: stopped_law(walk, s, exact=exact).e_stopped != e0)
            bounded_ok += 1
            continue
        floor = _value_floor(spec)
        rng = law.stopped_range()
        if (floor is not None and floor > e0 and rng is not None and rng[0] >= floor
                and law.p_stop >= stop_threshold):
            wit = {
                "rule": spec_to_json(spec),
                "horizon_limited": True,
                "horizon": walk.horizon,
                "P(tau<=H)": _num_json(law.p_stop),
                "X_tau_floor": floor,
                "E[X_tau;tau<=H]": _num_json(law.e_stopped),
                "E[X_(tau^H)]": _num_json(law.e_clipped),
                "E[X_0]": e0,
                "engine": "lattice DP" + (" (exact)" if exact else " (float)"),
            }

            def replay(s=spec, floor=floor):
                lw = stopped_law(walk, s, exact=exact)
                r = lw.stopped_range()
                return r is not None and r[0] >= floor > e0 and lw.p_stop >= stop_threshold

            suite = {"generator": gen.describe(), "rules_tried": tried, "filtration": "natural",
                     "horizon": walk.horizon}
            return StatementVerdict("IV", VIOLATED, wit, suite, replay_fn=replay)
        inconclusive += 1
    suite = {"generator": gen.describe(), "rules_tried": tried, "bounded_ok": bounded_ok,
             "inconclusive": inconclusive, "rejected_not_adapted": rejected, "horizon": walk.horizon}
    return StatementVerdict("IV", HOLDS, None, suite)


class _RuleSuite:
    """Distinct stopping rules of a generator, as exact-rank vectors over the working atoms."""

    def __init__(self, process: PathProcess, gen: StoppingFamilyGenerator, depth: int | None):
        space = process.space
        leaves = gen.leaves(False)
        times = [t for t in gen.time_grid()]
        if space.is_finite:
            d = space.n_blocks
        else:
            horizon_t = max(times + [lv.after for lv in leaves if isinstance(lv, HitAbsBelow)])
            d = max(process.quiet_depth(horizon_t) or 1, depth or 1, 1)
        self.depth = d
        self.enum, _ = enumerate_atoms(space, d)
        self.reps = [a for a, _ in space.tail_classes] if not space.is_finite else []
        self.atoms = [a for a, _ in self.enum] + self.reps
        self.n_enum = len(self.enum)
        leaf_taus = {lf: [evaluate(lf, process, a) for a in self.atoms] for lf in leaves}
        values = sorted({v for vs in leaf_taus.values() for v in vs})
        self.values = values
        rank = {v: i for i, v in enumerate(values)}
        self.leaf_vec = {lf: np.array([rank[v] for v in vs], dtype=np.int64) for lf, vs in leaf_taus.items()}
        grid = default_grid(None, process, self.atoms, [v for v in values if v != INF])
        grid = sorted(set(grid) | {t for lf in leaves for t in lf.times()})
        self.table = ObservationTable(process, self.atoms, grid)
        self.n_trees = 0
        self.rules: dict[bytes, tuple[StoppingSpec, np.ndarray]] = {}
        self._gen = gen
        self._leaves = leaves

    def build(self) -> None:
        vec_of: dict[int, np.ndarray] = {}
        for spec in self._gen.trees(False):
            if isinstance(spec, (Min, Max)):
                a, b = vec_of[id(spec.a)], vec_of[id(spec.b)]
                v = np.minimum(a, b) if isinstance(spec, Min) else np.maximum(a, b)
            else:
                v = self.leaf_vec[spec]
            vec_of[id(spec)] = v
            self.n_trees += 1
            key = v.tobytes()
            if key not in self.rules:
                self.rules[key] = (spec, v)

    def taus(self, vec: np.ndarray) -> list:
        vals = self.values
        return [vals[i] for i in vec]


def _stopped_mean(process: PathProcess, enum, reps, taus: Sequence[Any], depth: int) -> Fraction:
    """Exact ``E[X_tau]`` when every unenumerated atom stops like its representative."""
    acc = RationalSum()
    n = len(enum)
    for (a, w), t in zip(enum, taus[:n]):
        v = process.limit_at_infinity(a) if t == INF else process.value_at(a, t)
        if v:
            acc.add_fraction(Fraction(v) * w)
    space = process.space
    if reps:
        vals = [(s, process.limit_at_infinity(a) if t == INF else process.value_at(a, t))
                for (a, s), t in zip(space.tail_classes, taus[n:])]
        if any(v for _, v in vals):
            r = space.residual(depth)
            for s, v in vals:
                acc.add_fraction(Fraction(v) * s * r)
    return acc.value()


def _exact_mean_at(process: PathProcess, t: Any) -> Fraction:
    return marginal_means(process, [t])[t].value


def reciprocal_u_abs_rv(process: PathProcess) -> RandomVariable:
    """``atom -> integral over u in (0,1] of |X_{1/u}|``: ``|X_tau|`` for ``tau = 1/U`` with U continuous,
    integrated over ``U`` given the atom."""

    def fn(a):
        acc = ZERO
        for s, e, v in process.path(a).segments():
            if not v:
                continue
            hi = Fraction(1) if s <= 1 else 1 / Fraction(s)
            lo = ZERO if e == INF else (1 / Fraction(e) if e >= 1 else Fraction(1))
            if hi > lo:
                acc += abs(v) * (hi - lo)
        return acc

    return RandomVariable(fn, nonnegative=True, name=f"int|{process.name}_(1/u)|du")


def falsify_statement_IV(process, gen: StoppingFamilyGenerator | None = None, depth: int | None = None,
                         stop_threshold: Fraction = Fraction(97, 100), exact: bool | None = None,
                         policy: Policy | None = None) -> StatementVerdict:
    """Search the generated finite stopping times for ``E[X_tau] != E[X_0]`` or ``X_tau`` not integrable.

    Generative walks are run through the lattice DP; there a violation is
    horizon-limited: ``X_tau`` is bounded below on ``{tau <= H}`` and that event
    has probability at least ``stop_threshold``.
    """
    gen = gen or StoppingFamilyGenerator()
    if isinstance(process, GenerativeProcess):
        return _generative_iv(process, gen, Fraction(stop_threshold), exact)

    base = _base(process)
    suite = _RuleSuite(base, gen, depth)
    suite.build()
    e0 = _exact_mean_at(base, 0)
    n_adapted = n_finite = 0
    rejected_adapt = rejected_finite = undecided = 0
    checked: list[dict] = []
    for key in sorted(suite.rules):
        spec, vec = suite.rules[key]
        taus = suite.taus(vec)
        hit = suite.table.first_violation(taus)
        if hit is not None:
            rejected_adapt += 1
            continue
        n_adapted += 1
        cert = certify_finiteness(base, suite.enum, taus[:suite.n_enum], taus[suite.n_enum:], suite.depth, True)
        if base.space.is_finite and cert.level == "exact_not_finite":
            rejected_finite += 1
            continue
        if cert.level == "bounded":
            n_finite += 1
            m = _stopped_mean(base, suite.enum, suite.reps, taus, suite.depth)
            if m != e0:
                wit = {"rule": spec_to_json(spec), "finiteness": cert.to_json(),
                       "E[X_tau]": rational_json(m), "E[X_0]": rational_json(e0)}

                def replay(s=spec, d=suite.depth):
                    enum, _ = enumerate_atoms(base.space, d)
                    reps = [a for a, _ in base.space.tail_classes] if not base.space.is_finite else []
                    ts = [evaluate(s, base, a) for a, _ in enum] + [evaluate(s, base, a) for a in reps]
                    return _stopped_mean(base, enum, reps, ts, d) != e0

                return StatementVerdict("IV", VIOLATED, wit, _suite_json(gen, suite, n_adapted, n_finite),
                                        replay_fn=replay)
            checked.append({"rule": str(spec), "E[X_tau]": fmt_rational(m)})
        elif cert.level == "exact_finite":
            n_finite += 1
            undecided += 1
        else:
            rejected_finite += 1

    described = _suite_json(gen, suite, n_adapted, n_finite)
    described.update(rejected_not_adapted=rejected_adapt, rejected_not_finite=rejected_finite,
                     undecided=undecided)
    if base is not process:
        described["evaluated_on"] = "base space for rules that ignore U"

    if gen.include_randomized and process.extension is not None:
        rv = reciprocal_u_abs_rv(base)
        pol = policy or Policy(divergence_threshold=gen.randomized_threshold)
        res = expectation(base.space, rv, pol)
        if isinstance(res, DivergenceCertificate):
            curve = randomized_blowup_curve(base, process.extension.eta, [process.extension.m])
            wit = {
                "rule": spec_to_json(ReciprocalU()),
                "engine": "exact, U continuous (integrated atom by atom)",
                "E|X_tau|": res.to_json(),
                "discretized": curve.to_json(),
            }

            def replay(res=res):
                from .measure import verify_certificate

                return verify_certificate(base.space, rv, res)

            described["randomized"] = True
            return StatementVerdict("IV", VIOLATED, wit, described, replay_fn=replay)
        described["randomized"] = {"E|X_(1/U)|": res.to_json()}

    if undecided and not n_finite - undecided:
        return StatementVerdict("IV", UNDECIDABLE, None, described)
    return StatementVerdict("IV", HOLDS, None, described, {"E[X_0]": rational_json(e0),
                                                          "bounded_rules_checked": len(checked)})


def _suite_json(gen, suite: _RuleSuite, n_adapted: int, n_finite: int) -> dict:
    return {
        "generator": gen.describe(),
        "filtration": "natural",
        "trees": suite.n_trees,
        "distinct_rules": len(suite.rules),
        "adapted": n_adapted,
        "finite": n_finite,
        "working_depth": suite.depth,
        "grid_size": len(suite.table.grid),
    }


# ---------------------------------------------------------------------------
# liminf, limits, UI
# ---------------------------------------------------------------------------

def check_liminf_integrability(process, policy: Policy | None = None) -> ExpectationResult:
    """``E[liminf |X_t|]`` with certificate semantics."""
    if isinstance(process, GenerativeProcess):
        raise NotTerminating("liminf of a generative process is not available")
    base = _base(process)
    return expectation(base.space, liminf_abs_rv(base), policy)


def limit_existence_check(process) -> StatementVerdict:
    """Every path is eventually constant on a terminating process; nothing can be said at a horizon."""
    if isinstance(process, GenerativeProcess) or not process.terminating:
        h = process.horizon
        return StatementVerdict("II", UNDECIDABLE, None, {"check": "limit_existence", "horizon": h})
    return StatementVerdict("II", HOLDS, None, {"check": "limit_existence", "paths": "finitely many jumps"})


@dataclass(frozen=True)
class UIDiagnostic:
    k_schedule: tuple
    results: tuple  # (K, argmax time, Exact sup)
    verdict: str  # uniformly_integrable_on_grid | not_ui_certified
    grid_size: int
    floor: Fraction

    @property
    def ui(self) -> bool:
        return self.verdict == "uniformly_integrable_on_grid"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "grid_size": self.grid_size,
            "floor": rational_json(self.floor),
            "per_K": [{"K": rational_json(k), "argmax_t": rational_json(t), "sup": r.to_json()}
                      for k, t, r in self.results],
        }


def check_ui(process, k_schedule: Sequence[Any] = DEFAULT_K, grid: Sequence[Any] | None = None,
             depth: int | None = None, floor: Any = 1) -> UIDiagnostic:
    """``sup_t E[|X_t| 1{|X_t| > K}]`` over the event grid for each ``K``.

    Not UI is certified when the smallest of these sups (a lower bound uniform
    over the schedule) is at least ``floor``.
    """
    if isinstance(process, GenerativeProcess):
        raise NotTerminating("uniform integrability needs a terminating process")
    base = _base(process)
    d = _working_depth(base, depth)
    times = set(base.event_times(d, upto=d if not base.space.is_finite else INF))
    if grid is not None:
        times |= {as_rational(t) for t in grid}
    times = sorted(times)
    floor = Fraction(as_rational(floor))
    ks = tuple(Fraction(as_rational(k)) for k in k_schedule)
    results = []
    for k in ks:
        trunc = base.map_values(lambda v, k=k: abs(v) if abs(v) > k else 0, name=f"|X|1(|X|>{k})")
        means = marginal_means(trunc, times)
        t_best = max(times, key=lambda t: (means[t].value, -t))
        results.append((k, t_best, means[t_best]))
    low = min((r.value for _, _, r in results), default=ZERO)
    verdict = "not_ui_certified" if ks and low >= floor and low > 0 else "uniformly_integrable_on_grid"
    return UIDiagnostic(ks, tuple(results), verdict, len(times), floor)


def _observation_partition(process: PathProcess, s: Any, depth: int) -> Partition:
    return Partition.from_key(process.space, depth, lambda a: process.observation(a, s))


def martingale_check(process, pairs: Sequence[tuple] | None = None, depth: int | None = None,
                     max_time: Any = 10) -> StatementVerdict:
    """``E[X_t 1_A] = E[X_s 1_A]`` for every block ``A`` of the partition at ``s``.

    ``pairs`` holds ``(s, t)`` or ``(s, t, partition)``; by default consecutive
    event times up to ``max_time``, each with the observational partition at ``s``.
    """
    if isinstance(process, GenerativeProcess):
        raise NotTerminating("martingale check needs an enumerable process")
    base = _base(process)
    space = base.space
    if pairs is None:
        d0 = _working_depth(base, depth)
        ts = [t for t in base.event_times(min(d0, base.quiet_depth(max_time) or d0), upto=max_time)]
        ts = sorted(set(ts) | {Fraction(as_rational(max_time))})
        pairs = list(zip(ts, ts[1:]))
    checked = 0
    for pr in pairs:
        s, t = Fraction(as_rational(pr[0])), Fraction(as_rational(pr[1]))
        if not s <= t:
            raise SpecError("martingale pairs need s <= t")
        if space.is_finite:
            d = space.n_blocks
        else:
            d = max(base.quiet_depth(t), 1)
        part = pr[2] if len(pr) > 2 else _observation_partition(base, s, d)
        if not space.is_finite and part.depth < d:
            raise SpecError(f"partition depth {part.depth} is below the quiet depth {d} of t={t}")
        part.validate(space)
        index = {aid: i for i, b in enumerate(part.blocks) for aid in b}
        at_t = [RationalSum() for _ in part.blocks]
        at_s = [RationalSum() for _ in part.blocks]
        for a, w in space.finite_view(part.depth):
            i = index[a.id]
            vt, vs = base.value_at(a, t), base.value_at(a, s)
            if vt:
                at_t[i].add_fraction(Fraction(vt) * w)
            if vs:
                at_s[i].add_fraction(Fraction(vs) * w)
        for i, lbl in enumerate(part.labels):
            x, y = at_t[i].value(), at_s[i].value()
            checked += 1
            if x != y:
                wit = {"s": rational_json(s), "t": rational_json(t), "block": repr(lbl),
                       "E[X_t 1_A]": rational_json(x), "E[X_s 1_A]": rational_json(y)}
                return StatementVerdict("I", VIOLATED, wit, {"check": "martingale", "pairs": len(pairs)},
                                        replay_fn=lambda s=s, t=t: martingale_check(process, [(s, t)]).verdict == VIOLATED)
    return StatementVerdict("I", HOLDS, None, {"check": "martingale", "pairs": len(pairs), "blocks": checked})


# ---------------------------------------------------------------------------
# the gap construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GapReport:
    eps: Fraction
    horizon: int | None
    sigma1: StoppingSpec
    sigma2: StoppingSpec
    tau: StoppingSpec
    e_tau: Any
    e_sigma2: Any
    e_tau_clipped: Any
    e_sigma2_clipped: Any
    unresolved_tau: Any
    unresolved_sigma2: Any
    excursion_probability: Any
    liminf_evidence: dict
    tolerance: Fraction
    engine: str

    @property
    def gap(self):
        return self.e_tau - self.e_sigma2

    @property
    def success(self) -> bool:
        e2 = self.eps * self.eps
        tol = self.tolerance
        return (self.e_tau >= 3 * e2 / 4 - tol and abs(self.e_sigma2) <= e2 / 4 + tol
                and self.gap >= e2 / 2 - tol)

    def to_json(self) -> dict:
        return {
            "epsilon": rational_json(self.eps),
            "horizon": self.horizon,
            "engine": self.engine,
            "sigma1": spec_to_json(self.sigma1),
            "sigma2": spec_to_json(self.sigma2),
            "tau": spec_to_json(self.tau),
            "E[M_tau;tau<=H]": _num_json(self.e_tau),
            "E[M_sigma2;sigma2<=H]": _num_json(self.e_sigma2),
            "E[M_(tau^H)]": _num_json(self.e_tau_clipped),
            "E[M_(sigma2^H)]": _num_json(self.e_sigma2_clipped),
            "P(tau>H)": _num_json(self.unresolved_tau),
            "P(sigma2>H)": _num_json(self.unresolved_sigma2),
            "gap": _num_json(self.gap),
            "bound_3eps2/4": rational_json(3 * self.eps**2 / 4),
            "bound_eps2/4": rational_json(self.eps**2 / 4),
            "P(sup_[0,1/eps) M > eps)": _num_json(self.excursion_probability),
            "liminf": self.liminf_evidence,
            "tolerance": rational_json(self.tolerance),
            "success": self.success,
        }


def gap_rules(eps: Fraction) -> tuple[StoppingSpec, StoppingSpec, StoppingSpec]:
    s1 = HitAbove(eps)
    s2 = HitAbsBelow(eps * eps / 4, 1 / eps)
    return s1, s2, Min(s1, s2)


def witness_gap(process, eps: Any, horizon: int | None = None, slack: Any = Fraction(1, 20),
                tolerance: Any = Fraction(1, 10**9), exact: bool | None = None) -> GapReport:
    """Build ``sigma1 = hit(>= eps)``, ``sigma2 = hit(|M| <= eps^2/4 after 1/eps)`` and ``tau = sigma1 ^ sigma2``.

    On a walk, the liminf-zero precondition is replaced by the horizon proxy
    ``P(sigma2 <= H) >= 1 - slack``.
    """
    eps = Fraction(as_rational(eps))
    if eps <= 0:
        raise SpecError("epsilon must be positive")
    tol = Fraction(as_rational(tolerance))
    s1, s2, tau = gap_rules(eps)
    if isinstance(process, GenerativeProcess):
        return _walk_gap(process, eps, horizon, Fraction(as_rational(slack)), tol, exact, s1, s2, tau)
    return _exact_gap(_base(process), eps, tol, s1, s2, tau)


def _walk_gap(walk, eps, horizon, slack, tol, exact, s1, s2, tau) -> GapReport:
    from .lattice import stopped_law

    h = walk.horizon if horizon is None else int(horizon)
    walk = walk.__class__(walk.kernel, h, walk.initial, walk.params)
    exact = h <= 2000 if exact is None else exact
    if walk.initial != 0:
        raise PreconditionFailed("the construction needs M_0 = 0")
    k_end = math.ceil(1 / eps)  # intervals [k, k+1) meeting [0, 1/eps)
    exc = stopped_law(walk, HitAbove(eps, strict=True), horizon=max(h, k_end), exact=exact).p_stop_before(k_end)
    if not exc > eps:
        raise PreconditionFailed(f"P(sup M > eps before 1/eps) = {float(exc):.6g} is not above eps")
    law2 = stopped_law(walk, s2, exact=exact)
    if not law2.p_stop >= 1 - slack:
        raise NotApplicable(f"liminf proxy failed: P(sigma2 <= H) = {float(law2.p_stop):.6g} < 1 - {slack}")
    law = stopped_law(walk, tau, exact=exact)
    one = Fraction(1) if exact else 1.0
    return GapReport(eps, h, s1, s2, tau, law.e_stopped, law2.e_stopped, law.e_clipped, law2.e_clipped,
                     one - law.p_stop, one - law2.p_stop, exc,
                     {"proxy": "P(sigma2 <= H)", "value": _num_json(law2.p_stop), "slack": rational_json(slack)},
                     tol, "lattice DP" + (" (exact)" if exact else " (float)"))


def _exact_gap(process: PathProcess, eps, tol, s1, s2, tau) -> GapReport:
    space = process.space
    d = space.n_blocks if space.is_finite else max(process.quiet_depth(1 / eps) or 1, 1)
    view = space.finite_view(d)
    for a, _ in view:
        if process.liminf_abs(a) != 0:
            raise NotApplicable(f"liminf |M| = {process.liminf_abs(a)} on atom {a.id!r}")
    for a, _ in view:
        if process.value_at(a, 0) != 0:
            raise PreconditionFailed("the construction needs M_0 = 0")
    exc = sum((w for a, w in view if process.path(a).sup_before(1 / eps) > eps), ZERO)
    if not exc > eps:
        raise PreconditionFailed(f"P(sup M > eps before 1/eps) = {exc} is not above eps")
    if not space.is_finite:
        raise IndeterminateTail("the exact gap construction needs a finite space")
    e_tau = sum((Fraction(stopped_value(process, tau, a)) * w for a, w in view), ZERO)
    e_s2 = sum((Fraction(stopped_value(process, s2, a)) * w for a, w in view), ZERO)
    return GapReport(eps, None, s1, s2, tau, e_tau, e_s2, e_tau, e_s2, ZERO, ZERO, exc,
                     {"exact": "liminf |M| = 0 on every atom"}, tol, "exact")


# ---------------------------------------------------------------------------
# randomized blow-up
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlowupCurve:
    points: tuple  # (m, Exact)
    slope: float | None
    intercept: float | None

    def to_json(self) -> dict:
        return {"points": [{"m": m, "E|X_(1/U)|": r.to_json(), "ln_m": math.log(m)} for m, r in self.points],
                "slope_vs_ln_m": self.slope, "intercept": self.intercept}

    def rows(self) -> list[dict]:
        return [{"m": m, "value": fmt_rational(r.value), "decimal": float(r.value), "ln_m": math.log(m),
                 "slope": self.slope} for m, r in self.points]


def _levels_from(s: Any, m: int) -> int:
    """How many of the times ``2m/(2k-1)``, ``k = 1..m``, are ``>= s``."""
    if s == INF:
        return 0
    if s <= 1:
        return m
    q = Fraction(s)
    # 2m/(2k-1) >= s  <=>  k <= (2m/s + 1)/2
    return min(m, (2 * m * q.denominator + q.numerator) // (2 * q.numerator))


def _level_sum(path: PiecewiseConstantPath, m: int) -> Fraction:
    """``sum_k |path(2m/(2k-1))|``: each segment counts the levels whose time it covers."""
    acc = ZERO
    for s, e, v in path.segments():
        if v:
            acc += abs(v) * (_levels_from(s, m) - _levels_from(e, m))
    return acc


def randomized_blowup_curve(process, eta: Any = 0, m_list: Sequence[int] = (1000, 10_000, 100_000)) -> BlowupCurve:
    """Exact ``E[|X_{1/U}|]`` with ``U`` on ``m`` mid-quantile levels, for each ``m``.

    ``U`` is independent of the paths, so the value is ``E[sum_k |X_{t_k}|] / m``
    with ``t_k = 2m/(2k-1)``; atoms beyond the quiet depth of ``2m`` follow
    their tail representative on ``[0, 2m]``.
    """
    base = _base(process)
    if isinstance(base, GenerativeProcess) or not base.terminating:
        raise NotTerminating("the blow-up curve needs a terminating process")
    if isinstance(eta, StoppingSpec) or Fraction(as_rational(eta)) > 1:
        raise SpecError("1/U >= 1 is a stopping time only when U is revealed by time 1")
    ms = sorted(set(int(m) for m in m_list))
    if not ms or ms[0] < 1:
        raise SpecError("levels must be positive")
    space = base.space
    pts = []
    for m in ms:
        d = base.quiet_depth(2 * m)
        if d is None:
            raise IndeterminateTail(f"{base.name}: no quiet depth for t={2 * m}")
        acc = RationalSum()
        for _, blk in space.iter_blocks(d):
            for a, w in blk:
                c = _level_sum(base.path(a), m)
                if c:
                    acc.add_fraction(c * w)
        if not space.is_finite or d < space.n_blocks:
            reps = [(_level_sum(base.path(a), m), share) for a, share in space.tail_classes]
            if any(c for c, _ in reps):  # the residual is costly at large depth
                r = space.residual(d)
                for c, share in reps:
                    acc.add_fraction(c * share * r)
        pts.append((m, Exact(acc.value() / m)))
    slope = intercept = None
    if len(pts) >= 2:
        x = np.array([math.log(m) for m, _ in pts])
        y = np.array([float(r.value) for _, r in pts])
        slope, intercept = (float(c) for c in np.polyfit(x, y, 1))
    return BlowupCurve(tuple(pts), slope, intercept)


# ---------------------------------------------------------------------------
# the hierarchy
# ---------------------------------------------------------------------------

def check_statement_III(process, iv: StatementVerdict | None = None, policy: Policy | None = None,
                        liminf: ExpectationResult | None = None) -> StatementVerdict:
    if isinstance(process, GenerativeProcess):
        return StatementVerdict("III", UNDECIDABLE, None, {"reason": "no liminf at a horizon"})
    iv = iv or falsify_statement_IV(process)
    if iv.verdict == VIOLATED:
        return StatementVerdict("III", VIOLATED, {"via": "IV", **iv.witness}, iv.suite, replay_fn=iv.replay)
    try:
        res = liminf if liminf is not None else check_liminf_integrability(process, policy)
    except IndeterminateTail as exc:
        return StatementVerdict("III", UNDECIDABLE, None, {"reason": str(exc)})
    if isinstance(res, DivergenceCertificate):
        base = _base(process)
        return StatementVerdict("III", VIOLATED, {"E[liminf|X|]": res.to_json()}, iv.suite,
                                replay_fn=lambda: _replay_cert(base, liminf_abs_rv(base), res))
    if iv.verdict == UNDECIDABLE:
        return StatementVerdict("III", UNDECIDABLE, None, iv.suite, {"E[liminf|X|]": res.to_json()})
    return StatementVerdict("III", HOLDS, None, iv.suite, {"E[liminf|X|]": res.to_json()})


def _replay_cert(process: PathProcess, rv: RandomVariable, cert: DivergenceCertificate) -> bool:
    from .measure import verify_certificate

    return verify_certificate(process.space, rv, cert)


def check_statement_II(process, iv: StatementVerdict | None = None, policy: Policy | None = None,
                       abs_limit: ExpectationResult | None = None) -> StatementVerdict:
    lim = limit_existence_check(process)
    if lim.verdict != HOLDS:
        return lim
    base = _base(process)
    iv = iv or falsify_statement_IV(process)
    if iv.verdict == VIOLATED:
        return StatementVerdict("II", VIOLATED, {"via": "IV", **iv.witness}, iv.suite, replay_fn=iv.replay)
    infinite = Const(INF)
    try:
        res = abs_limit if abs_limit is not None else expectation(base.space, liminf_abs_rv(base), policy)
    except IndeterminateTail as exc:
        return StatementVerdict("II", UNDECIDABLE, None, {"reason": str(exc)})
    if isinstance(res, DivergenceCertificate):
        wit = {"rule": spec_to_json(infinite), "E|X_tau|": res.to_json()}
        return StatementVerdict("II", VIOLATED, wit, iv.suite,
                                replay_fn=lambda: _replay_cert(base, liminf_abs_rv(base), res))
    from .process import limit_rv

    try:
        e_inf = expectation(base.space, limit_rv(base), policy)
    except IndeterminateTail as exc:
        return StatementVerdict("II", UNDECIDABLE, None, {"reason": str(exc)})
    e0 = _exact_mean_at(base, 0)
    if isinstance(e_inf, Exact) and e_inf.value != e0:
        wit = {"rule": spec_to_json(infinite), "E[X_inf]": e_inf.to_json(), "E[X_0]": rational_json(e0)}
        return StatementVerdict("II", VIOLATED, wit, iv.suite,
                                replay_fn=lambda: expectation(base.space, limit_rv(base), policy).value != e0)
    if not isinstance(e_inf, Exact) or iv.verdict != HOLDS:
        return StatementVerdict("II", UNDECIDABLE, None, iv.suite, {"E[X_inf]": e_inf.to_json()})
    return StatementVerdict("II", HOLDS, None, iv.suite, {"E[X_inf]": e_inf.to_json(), "E|X_inf|": res.to_json()})


def check_statement_I(process, ui: UIDiagnostic | None = None, mart: StatementVerdict | None = None,
                      **ui_kwargs) -> StatementVerdict:
    if isinstance(process, GenerativeProcess):
        return StatementVerdict("I", UNDECIDABLE, None, {"reason": "generative process"})
    mart = mart or martingale_check(process)
    if mart.verdict == VIOLATED:
        return mart
    ui = ui or check_ui(process, **ui_kwargs)
    if not ui.ui:
        return StatementVerdict("I", VIOLATED, {"ui": ui.to_json()}, {"check": "uniform integrability"},
                                replay_fn=lambda: not check_ui(process, **ui_kwargs).ui)
    return StatementVerdict("I", HOLDS, None, {"martingale": mart.suite, "ui_grid": ui.grid_size},
                            {"ui": ui.to_json()})


def run_hierarchy(process, statements: Sequence[str] = STATEMENTS, gen: StoppingFamilyGenerator | None = None,
                  policy: Policy | None = None, depth: int | None = None,
                  k_schedule: Sequence[Any] = DEFAULT_K) -> dict[str, StatementVerdict]:
    """Verdicts for the requested statements, sharing the work between them."""
    want = set(statements)
    out: dict[str, StatementVerdict] = {}
    if "V" in want:
        out["V"] = check_statement_V(process, depth=depth)
    iv = None
    if want & {"IV", "III", "II"}:
        iv = falsify_statement_IV(process, gen, depth=None, policy=None)
        if "IV" in want:
            out["IV"] = iv
    abs_lim = None
    if want & {"III", "II"} and not isinstance(process, GenerativeProcess) and process.terminating:
        if iv is not None and iv.verdict != VIOLATED:
            try:
                abs_lim = check_liminf_integrability(process, policy)
            except IndeterminateTail:
                abs_lim = None
    if "III" in want:
        out["III"] = check_statement_III(process, iv, policy, abs_lim)
    if "II" in want:
        out["II"] = check_statement_II(process, iv, policy, abs_lim)
    if "I" in want:
        out["I"] = check_statement_I(process, k_schedule=k_schedule, depth=depth)
    return {s: out[s] for s in STATEMENTS if s in out}


def hierarchy_consistent(verdicts: dict[str, StatementVerdict]) -> tuple[bool, list[tuple[str, str]]]:
    """No statement may hold on the suite while a weaker one is violated."""
    bad = []
    order = list(STATEMENTS)
    for i, up in enumerate(order):
        for down in order[i + 1:]:
            if up in verdicts and down in verdicts:
                if verdicts[up].verdict == HOLDS and verdicts[down].verdict == VIOLATED:
                    bad.append((up, down))
    return not bad, bad
