"""Sampling estimates, used to cross-check exact values and for walks at long horizons.

Every random number comes from a counter-based generator keyed by
``(seed, stream)`` and indexed by replication, so an estimate depends only on
``(seed, n)`` and never on scheduling.  Streams: 0 picks atoms, 1 drives walk
steps, 2 draws the auxiliary uniform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Sequence

import numpy as np

from . import _core
from ._fallback import stream_key
from .errors import SpecError
from .measure import INF, Atom, CountableSpace, RandomVariable, enumerate_atoms
from .process import GenerativeProcess, PathProcess, marginal_means
from .stopping import HitAbove, ReciprocalU, StoppingSpec, evaluate

STREAM_ATOM, STREAM_STEP, STREAM_U = 0, 1, 2
DEFAULT_SAMPLE_DEPTH = 10_000


@dataclass(frozen=True)
class Estimate:
    mean: float
    half_width: float
    n: int
    seed: int
    engine: str = "monte carlo"
    extras: dict = field(default_factory=dict)

    @property
    def interval(self) -> tuple[float, float]:
        return self.mean - self.half_width, self.mean + self.half_width

    def contains(self, x: Any) -> bool:
        lo, hi = self.interval
        return lo <= float(x) <= hi

    def to_json(self) -> dict:
        out = {"kind": "estimate", "engine": self.engine, "mean": self.mean, "half_width": self.half_width,
               "n": self.n, "seed": self.seed}
        if self.extras:
            out["extras"] = self.extras
        return out


def _estimate(values: np.ndarray, seed: int, engine: str = "monte carlo", **extras) -> Estimate:
    n = int(values.size)
    if n == 0:
        raise SpecError("need at least one replication")
    values = np.ascontiguousarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise SpecError("sampled values must be finite")
    first = values[0]
    if np.all(values == first):
        return Estimate(float(first), 0.0, n, seed, engine, extras)
    mean = float(np.sum(values) / n)  # numpy's pairwise summation: fixed tree for fixed n
    sd = float(np.std(values, ddof=1)) if n > 1 else 0.0
    return Estimate(mean, 3.0 * sd / math.sqrt(n), n, seed, engine, extras)


# -- random numbers ---------------------------------------------------------------------

def step_uniforms(seed: int, index: int, n: int, backend: str | None = None) -> np.ndarray:
    """Uniforms driving steps ``0..n-1`` of walk replication ``index``."""
    return _core.get_backend(backend).uniforms(stream_key(seed, STREAM_STEP), index << 32, n)


def _uniforms(seed: int, stream: int, start: int, n: int, backend: str | None = None) -> np.ndarray:
    return _core.get_backend(backend).uniforms(stream_key(seed, stream), start, n)


# -- atoms ------------------------------------------------------------------------------------

class Sampler:
    """Inverse-CDF sampler over blocks ``1..depth`` plus one category per tail representative."""

    def __init__(self, space: CountableSpace, depth: int | None = None):
        if space.is_finite:
            depth = space.n_blocks
        depth = depth or DEFAULT_SAMPLE_DEPTH
        enum, resid = enumerate_atoms(space, depth)
        items = list(enum)
        if resid:
            items += [(a, s * resid) for a, s in space.tail_classes]
        self.space = space
        self.depth = depth
        self.atoms: list[Atom] = [a for a, _ in items]
        w = np.array([float(p) for _, p in items])
        cdf = np.cumsum(w)
        cdf /= cdf[-1]
        self.cdf = cdf
        self.n_tail = len(items) - len(enum)
        self.residual = resid

    def indices(self, us: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.cdf, us, side="right")
        return np.minimum(idx, len(self.atoms) - 1)

    def draw(self, seed: int, start: int, n: int) -> np.ndarray:
        return self.indices(_uniforms(seed, STREAM_ATOM, start, n))


@lru_cache(maxsize=16)
def _sampler(space: CountableSpace, depth: int | None) -> Sampler:
    return Sampler(space, depth)


def sample_atom(space: CountableSpace, seed: int, index: int, depth: int | None = None) -> Atom:
    """Atom for replication ``index``; atoms beyond ``depth`` come back as their tail representative."""
    s = _sampler(space, depth)
    return s.atoms[int(s.draw(seed, index, 1)[0])]


def _values_on(sampler: Sampler, idx: np.ndarray, fn: Callable[[Atom], Any]) -> np.ndarray:
    uniq, inv = np.unique(idx, return_inverse=True)
    vals = np.array([float(fn(sampler.atoms[i])) for i in uniq])
    return vals[inv]


def estimate_expectation(space: CountableSpace, rv: RandomVariable, n: int, seed: int,
                         depth: int | None = None) -> Estimate:
    """Sample mean of ``rv`` over ``n`` atoms drawn by weight."""
    d = depth or max(rv.settle_depth or 0, DEFAULT_SAMPLE_DEPTH if not space.is_finite else 1)
    sampler = _sampler(space, d)
    idx = sampler.draw(seed, 0, n)
    vals = _values_on(sampler, idx, rv.fn)
    extras = {}
    if not space.is_finite:
        extras["sample_depth"] = sampler.depth
        extras["tail_fraction"] = float(np.mean(idx >= len(sampler.atoms) - sampler.n_tail))
    return _estimate(vals, seed, **extras)


# -- stopped processes ------------------------------------------------------------------------

def _hit_level(spec: HitAbove) -> int:
    lv = Fraction(spec.level)
    return math.floor(lv) + 1 if spec.strict else math.ceil(lv)


def _walk_stopped(walk: GenerativeProcess, spec: StoppingSpec, n: int, horizon: int, seed: int,
                  f: Callable[[Any], Any]) -> Estimate:
    if walk.kernel == "simple_random_walk" and isinstance(spec, HitAbove):
        be = _core.get_backend()
        x, hit, _ = be.walk_hit_mc(stream_key(seed, STREAM_STEP), 0, n, horizon, _hit_level(spec), walk.initial)
        x = np.asarray(x)
        stopped = np.asarray(hit).astype(bool)
        engine = f"monte carlo ({_core.active()} kernel)"
    else:
        w = GenerativeProcess(walk.kernel, horizon, walk.initial, walk.params)
        space = CountableSpace.finite([(Atom(i, {"block": 1}), Fraction(1, n)) for i in range(n)], name="samples")
        proc = PathProcess(space, lambda a: w.sample_path(seed, a.id), "generative", horizon=horizon)
        xs, st = [], []
        for a, _ in space.finite_view(1):
            t = evaluate(spec, proc, a)
            st.append(t <= horizon)
            xs.append(proc.value_at(a, min(t, horizon)))
        x, stopped = np.array(xs, dtype=np.int64), np.array(st)
        engine = "monte carlo (path loop)"
    vals = np.array([float(f(v)) for v in x]) if f is not abs else np.abs(x).astype(np.float64)
    rate = float(np.mean(stopped))
    extras = {"horizon": horizon, "stop_rate": rate, "tau_beyond_horizon": 1.0 - rate,
              "stopped_mean": float(np.mean(x[stopped])) if stopped.any() else None}
    return _estimate(vals, seed, engine, **extras)


def _reciprocal_u(process: PathProcess, n: int, horizon: Any, seed: int, f: Callable[[Any], Any]) -> Estimate:
    """``E[f(X_{(1/U) ^ H})]`` with ``U`` continuous, integrating the paths exactly given ``U``."""
    if horizon is None or horizon == INF:
        raise SpecError("tau = 1/U needs a finite horizon for the sampling engine")
    base = process.base or process
    fbase = base.map_values(f, name=f"f({base.name})")
    h = Fraction(horizon)
    qd = fbase.quiet_depth(h)
    ev = fbase.event_times(qd if qd is not None else None, upto=h)
    means = marginal_means(fbase, ev)
    grid = np.array([float(t) for t in ev])
    table = np.array([float(means[t].value) for t in ev])
    us = _uniforms(seed, STREAM_U, 0, n)
    with np.errstate(divide="ignore"):
        ts = np.minimum(1.0 / us, float(h))
    vals = table[np.searchsorted(grid, ts, side="right") - 1]
    return _estimate(vals, seed, "monte carlo, U continuous, paths integrated exactly given U",
                     horizon=float(h), tau_beyond_horizon=float(np.mean(1.0 / us > float(h))))


def estimate_stopped(process, spec: StoppingSpec, n: int, horizon: Any = None, seed: int = 0,
                     transform: Callable[[Any], Any] | None = None) -> Estimate:
    """Estimate ``E[f(X_{tau ^ H})]`` (``f`` defaults to the identity).

    ``extras`` reports the fraction of replications with ``tau > H`` and, on
    walks, the mean of ``X_tau`` over the stopped ones.
    """
    f = transform or (lambda v: v)
    if n < 1:
        raise SpecError("n must be positive")
    if isinstance(process, GenerativeProcess):
        h = process.horizon if horizon is None else int(horizon)
        return _walk_stopped(process, spec, n, h, seed, f)
    if spec.uses_uniform():
        if not isinstance(spec, ReciprocalU):
            raise SpecError("the sampling engine handles 1/U only as a bare rule")
        return _reciprocal_u(process, n, horizon, seed, f)
    h = INF if horizon is None else Fraction(horizon)
    space = process.space
    d = None
    if not space.is_finite:
        q = process.quiet_depth(h) if h != INF else None
        d = max(q or 0, DEFAULT_SAMPLE_DEPTH)
    sampler = _sampler(space, d)
    idx = sampler.draw(seed, 0, n)
    beyond = []

    def stopped(a: Atom) -> Any:
        t = evaluate(spec, process, a)
        if t > h:
            beyond.append(a)
            t = h
        return f(process.limit_at_infinity(a) if t == INF else process.value_at(a, t))

    uniq, inv = np.unique(idx, return_inverse=True)
    vals = np.array([float(stopped(sampler.atoms[i])) for i in uniq])
    late = np.isin(uniq, [i for i in uniq if sampler.atoms[i] in beyond])
    return _estimate(vals[inv], seed, tau_beyond_horizon=float(np.mean(late[inv])),
                     sample_depth=sampler.depth)


# -- calibration ------------------------------------------------------------------------------

def calibration_queries(n: int = 100_000, base_seed: int = 20240) -> list[tuple[str, Any, Estimate]]:
    """Ten fixed-seed sampling queries with exactly known answers: ``(label, exact, estimate)``."""
    from .examples import ExampleDescriptor, build
    from .lattice import stopped_law
    from .process import value_rv

    cherny = build(ExampleDescriptor("cherny")).process
    walk = build(ExampleDescriptor("random_walk", horizon=100)).process
    out: list[tuple[str, Any, Estimate]] = []
    seed = base_seed
    for t in (5, 10, 20):
        rv = value_rv(cherny, t)
        out.append((f"cherny E[X_{t}]", Fraction(0), estimate_expectation(cherny.space, rv, n, seed)))
        seed += 1
    for t in (10, 50, 100):
        rv = value_rv(cherny, t).abs()
        out.append((f"cherny E|X_{t}|", Fraction(t, 2), estimate_expectation(cherny.space, rv, n, seed)))
        seed += 1
    for h in (10, 100, 1000):
        est = estimate_stopped(walk, HitAbove(1), n, horizon=h, seed=seed)
        out.append((f"walk E[X_(tau^{h})], tau = hit(1)", Fraction(0), est))
        seed += 1
    law = stopped_law(walk, HitAbove(1), horizon=100)
    est = estimate_stopped(walk, HitAbove(1), n, horizon=100, seed=seed)
    ind = np.array([est.extras["stop_rate"]])
    p = float(law.p_stop)
    # the stop indicator is Bernoulli(p_hat): rebuild its interval from the rate
    hw = 3.0 * math.sqrt(max(ind[0] * (1 - ind[0]), 0.0) * n / (n - 1)) / math.sqrt(n)
    out.append(("walk P(tau <= 100), tau = hit(1)", law.p_stop,
                Estimate(float(ind[0]), hw, n, seed, est.engine, {"exact_decimal": p})))
    return out
