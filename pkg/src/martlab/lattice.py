"""Dynamic programming for stopping rules on the simple symmetric random walk.

The walk jumps at integer times, so a stopping rule only has to be examined
once per unit interval ``[k, k+1)`` while the value is constant, plus once at
the horizon instant ``H``.  Each leaf of the rule carries a tiny state
(pending / fired, and "armed" for two-point leaves); the joint leaf state and
the current position form the DP state.  The root has fired exactly when the
min/max combination of the fired leaves has.

Exact mode propagates integer path counts (weight ``count / 2**k``); float
mode propagates probabilities and may run in the compiled kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from . import _core
from .errors import MissingUniform, SpecError
from .measure import Exact, INF, as_rational
from .process import GenerativeProcess
from .stopping import (
    Const,
    HitAbove,
    HitAbsAbove,
    HitAbsBelow,
    Max,
    Min,
    NearLiminf,
    ReciprocalU,
    StoppingSpec,
    TwoPoint,
    ValueEvent,
)

PENDING, FIRED, ARMED = 0, 1, 2

# leaf kinds shared with the compiled kernel
K_CONST, K_ABOVE, K_ABS_ABOVE, K_ABS_BELOW = 0, 1, 2, 3


@dataclass(frozen=True)
class StoppedLaw:
    """Law of the walk stopped at ``tau ^ H``.

    ``stopped[x]`` is ``P(tau <= H, X_tau = x)``; ``unstopped[x]`` is
    ``P(tau > H, X_H = x)``; ``by_interval[k]`` is the mass stopped while the
    walk sat on ``[k, k+1)`` (``k = H`` is the horizon instant).
    """

    horizon: int
    stopped: dict
    unstopped: dict
    by_interval: tuple
    exact: bool

    @property
    def p_stop(self):
        return sum(self.stopped.values(), Fraction(0) if self.exact else 0.0)

    @property
    def e_stopped(self):
        """``E[X_tau ; tau <= H]``."""
        return sum((x * p for x, p in self.stopped.items()), Fraction(0) if self.exact else 0.0)

    @property
    def e_unstopped(self):
        """``E[X_H ; tau > H]``."""
        return sum((x * p for x, p in self.unstopped.items()), Fraction(0) if self.exact else 0.0)

    @property
    def e_clipped(self):
        """``E[X_{tau ^ H}]``."""
        return self.e_stopped + self.e_unstopped

    def stopped_range(self) -> tuple[int, int] | None:
        xs = [x for x, p in self.stopped.items() if p]
        return (min(xs), max(xs)) if xs else None

    def p_stop_before(self, k: int):
        """Mass stopped on intervals ``0..k-1``."""
        return sum(self.by_interval[:k], Fraction(0) if self.exact else 0.0)


# ---------------------------------------------------------------------------
# rule compilation
# ---------------------------------------------------------------------------

def _floor(x) -> int:
    return math.floor(x)


class _Leaf:
    __slots__ = ("spec", "kind", "level", "kmin", "ok_h", "two_point")

    def __init__(self, spec: StoppingSpec, horizon: int):
        self.spec = spec
        self.two_point = None
        if isinstance(spec, Const):
            self.kind, self.level = K_CONST, 0
            self._time(spec.t, horizon)
        elif isinstance(spec, HitAbove):
            lv = spec.level
            self.kind = K_ABOVE
            self.level = _floor(lv) + 1 if spec.strict else math.ceil(lv)
            self._time(0, horizon)
        elif isinstance(spec, HitAbsAbove):
            self.kind, self.level = K_ABS_ABOVE, math.ceil(spec.level)
            self._time(0, horizon)
        elif isinstance(spec, HitAbsBelow):
            self.kind = K_ABS_BELOW
            self.level = _floor(spec.level)
            self._time(spec.after, horizon)
        elif isinstance(spec, TwoPoint):
            ev = spec.event
            if not isinstance(ev, ValueEvent) or ev.time != spec.s:
                raise SpecError("walk DP supports two-point times with a value event at s")
            self.kind, self.level = -1, 0
            self.two_point = (spec.s, spec.t, frozenset(ev.values))
            self._time(spec.s, horizon)
        elif isinstance(spec, ReciprocalU):
            raise MissingUniform("1/U needs a uniformly extended space")
        elif isinstance(spec, NearLiminf):
            raise SpecError("anticipating rules cannot be run forward on a generative process")
        else:
            raise SpecError(f"unsupported leaf {spec!r}")

    def _time(self, t, horizon: int) -> None:
        # interval [k, k+1) reaches t iff k >= floor(t); the horizon instant iff t <= H
        if t == INF:
            self.kmin, self.ok_h = horizon + 2, False
        else:
            self.kmin, self.ok_h = _floor(t), t <= horizon


def _root_fired(spec: StoppingSpec, fired: dict) -> bool:
    if isinstance(spec, Min):
        return _root_fired(spec.a, fired) or _root_fired(spec.b, fired)
    if isinstance(spec, Max):
        return _root_fired(spec.a, fired) and _root_fired(spec.b, fired)
    return fired[spec]


def _compile(spec: StoppingSpec, horizon: int):
    leaves = [_Leaf(s, horizon) for s in spec.leaves()]
    if len(leaves) > 10:
        raise SpecError("too many leaves for the walk DP")
    return leaves


def _root_table(spec: StoppingSpec, leaves) -> np.ndarray:
    n = len(leaves)
    table = np.zeros(1 << n, dtype=np.uint8)
    for mask in range(1 << n):
        fired = {lf.spec: bool(mask >> j & 1) for j, lf in enumerate(leaves)}
        table[mask] = _root_fired(spec, fired)
    return table


def _kernel_ok(leaves) -> bool:
    return all(lf.kind >= 0 for lf in leaves)


# ---------------------------------------------------------------------------
# numpy DP (exact or float)
# ---------------------------------------------------------------------------

def _leaf_step(lf: _Leaf, state: int, xs: np.ndarray, k: int, horizon: int):
    """New leaf state(s) over positions ``xs`` for interval ``k``; scalar or array."""
    if state == FIRED:
        return FIRED
    time_ok = lf.ok_h if k == horizon else k >= lf.kmin
    if lf.two_point is not None:
        s, t, vals = lf.two_point
        t_now = (t <= horizon) if k == horizon else (k >= _floor(t))
        if state == ARMED:
            return FIRED if t_now else ARMED
        if not time_ok:
            return PENDING
        inside = np.isin(xs, [int(v) for v in vals if Fraction(v).denominator == 1])
        # on A wait for t (possibly inside the same interval), off A stop at s
        return np.where(inside, FIRED if t_now else ARMED, FIRED)
    if lf.kind == K_CONST:
        return FIRED if time_ok else PENDING
    if not time_ok:
        return PENDING
    if lf.kind == K_ABOVE:
        f = xs >= lf.level
    elif lf.kind == K_ABS_ABOVE:
        f = np.abs(xs) >= lf.level
    else:
        f = np.abs(xs) <= lf.level
    return np.where(f, FIRED, PENDING)


def _groups(per_leaf: list) -> list[tuple[tuple, Any]]:
    """Split positions by joint leaf state; ``None`` selects everything."""
    arrays = [j for j, p in enumerate(per_leaf) if not isinstance(p, int)]
    if not arrays:
        return [(tuple(per_leaf), None)]
    out = []
    for combo in product(*[(PENDING, FIRED, ARMED)] * len(arrays)):
        sel = None
        for j, v in zip(arrays, combo):
            m = per_leaf[j] == v
            sel = m if sel is None else sel & m
        if sel.any():
            st = list(per_leaf)
            for j, v in zip(arrays, combo):
                st[j] = v
            out.append((tuple(st), sel))
    return out


def _dp_numpy(walk: GenerativeProcess, spec: StoppingSpec, horizon: int, exact: bool) -> StoppedLaw:
    leaves = _compile(spec, horizon)
    n = len(leaves)
    x0 = walk.initial
    width = 2 * horizon + 1
    xs_all = np.arange(x0 - horizon, x0 + horizon + 1, dtype=np.int64)
    dtype = object if exact else np.float64
    zero = 0 if exact else 0.0

    start = np.zeros(width, dtype=dtype)
    start[horizon] = 1 if exact else 1.0
    live: dict[tuple, np.ndarray] = {(PENDING,) * n: start}
    stopped = np.zeros(width, dtype=dtype)
    by_interval = []
    root_cache: dict[tuple, bool] = {}

    def root(states: tuple) -> bool:
        r = root_cache.get(states)
        if r is None:
            r = root_cache[states] = _root_fired(spec, {lf.spec: st == FIRED for lf, st in zip(leaves, states)})
        return r

    for k in range(horizon + 1):
        lo, hi = horizon - k, horizon + k + 1
        xs = xs_all[lo:hi]
        scale = (1 << (horizon - k)) if exact else 1.0
        nxt: dict[tuple, np.ndarray] = {}
        got = zero
        for states, arr in live.items():
            seg = arr[lo:hi]
            per_leaf = [_leaf_step(lf, st, xs, k, horizon) for lf, st in zip(leaves, states)]
            groups = _groups(per_leaf)
            for st, sel in groups:
                part = seg if sel is None else np.where(sel, seg, zero)
                if root(st):
                    contrib = part * scale if exact else part
                    stopped[lo:hi] += contrib
                    got += contrib.sum()
                else:
                    buf = nxt.get(st)
                    if buf is None:
                        buf = nxt[st] = np.zeros(width, dtype=dtype)
                    buf[lo:hi] += part
        by_interval.append(got)
        if k == horizon:
            live = nxt
            break
        live = {}
        for st, arr in nxt.items():
            moved = np.zeros(width, dtype=dtype)
            moved[lo + 1:hi + 1] += arr[lo:hi]
            moved[lo - 1:hi - 1] += arr[lo:hi]
            live[st] = moved if exact else moved * 0.5

    unstopped = np.zeros(width, dtype=dtype)
    for arr in live.values():
        unstopped += arr
    return _law(xs_all, stopped, unstopped, by_interval, horizon, exact)


def _law(xs, stopped, unstopped, by_interval, horizon, exact) -> StoppedLaw:
    if exact:
        den = 1 << horizon
        conv = lambda c: Fraction(int(c), den)
    else:
        conv = float
    st = {int(x): conv(p) for x, p in zip(xs, stopped) if p}
    un = {int(x): conv(p) for x, p in zip(xs, unstopped) if p}
    bi = tuple(conv(p) for p in by_interval)
    return StoppedLaw(horizon, st, un, bi, exact)


def _dp_kernel(walk: GenerativeProcess, spec: StoppingSpec, horizon: int, backend) -> StoppedLaw:
    leaves = _compile(spec, horizon)
    table = _root_table(spec, leaves)
    kind = np.array([lf.kind for lf in leaves], dtype=np.int64)
    level = np.array([lf.level for lf in leaves], dtype=np.int64)
    kmin = np.array([min(lf.kmin, horizon + 2) for lf in leaves], dtype=np.int64)
    ok_h = np.array([lf.ok_h for lf in leaves], dtype=np.uint8)
    stopped, unstopped, by_k = backend.lattice_dp(walk.initial, horizon, kind, level, kmin, ok_h, table)
    xs = np.arange(walk.initial - horizon, walk.initial + horizon + 1)
    return _law(xs, stopped, unstopped, list(by_k), horizon, exact=False)


def stopped_law(walk: GenerativeProcess, spec: StoppingSpec, horizon: int | None = None,
                exact: bool = True, backend: str | None = None) -> StoppedLaw:
    """Law of ``X_{tau ^ H}`` with the split into stopped / unstopped mass."""
    if walk.kernel != "simple_random_walk":
        raise SpecError("the lattice DP covers the simple random walk only")
    h = walk.horizon if horizon is None else int(horizon)
    if h < 0:
        raise SpecError("horizon must be nonnegative")
    if exact:
        return _dp_numpy(walk, spec, h, exact=True)
    leaves = _compile(spec, h)
    if _kernel_ok(leaves):
        return _dp_kernel(walk, spec, h, _core.get_backend(backend))
    return _dp_numpy(walk, spec, h, exact=False)


def walk_marginal_means(walk: GenerativeProcess, times: Sequence[Any]) -> dict[Any, Exact]:
    """Exact ``E[X_t]`` for ``t`` up to the horizon (binomial propagation of counts)."""
    ts = sorted(set(as_rational(t) for t in times))
    if ts and ts[-1] > walk.horizon:
        from .errors import HorizonExceeded

        raise HorizonExceeded(f"t={ts[-1]} beyond horizon {walk.horizon}")
    kmax = _floor(ts[-1]) if ts else 0
    counts = [1]  # counts[i] ~ position x0 - k + 2i
    means: dict[int, Fraction] = {}
    for k in range(kmax + 1):
        tot = sum((walk.initial - k + 2 * i) * c for i, c in enumerate(counts))
        means[k] = Fraction(tot, 1 << k)
        counts = [a + b for a, b in zip([0] + counts, counts + [0])]
    return {t: Exact(means[_floor(t)]) for t in ts}
