"""Pure-Python (numpy) implementations of the hot kernels.

Every function here has a twin in the compiled ``_kernels`` extension and
must return bit-identical results.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31 = np.uint64(30), np.uint64(27), np.uint64(31)
_S11, _S63, _S32 = np.uint64(11), np.uint64(63), np.uint64(32)
_MASK = (1 << 64) - 1


def mix64_int(z: int) -> int:
    """SplitMix64 finalizer on a Python int (mod 2**64)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def stream_key(seed: int, stream: int) -> int:
    return mix64_int(seed * 0xD1B54A32D192ED03 + stream * 0x8CB92BA72F3D8DD7 + 1)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _raw(key: int, counters: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return _mix(np.uint64(key) + (counters + np.uint64(1)) * GOLDEN)


def uniforms(key: int, start: int, n: int) -> np.ndarray:
    """Doubles in (0, 1) for counters ``start .. start+n-1``."""
    c = np.arange(start, start + n, dtype=np.uint64)
    z = _raw(key, c)
    return (z >> _S11).astype(np.float64) * 2.0**-53 + 2.0**-54


def walk_hit_mc(key: int, start: int, n: int, horizon: int, level: int, initial: int):
    """Simulate ``n`` walks (replications ``start..``) stopped on reaching ``level``.

    Returns ``(X_{tau^H}, stopped flag, tau^H)`` arrays.
    """
    idx = np.arange(start, start + n, dtype=np.uint64)
    x = np.full(n, initial, dtype=np.int64)
    tau = np.full(n, horizon, dtype=np.int64)
    active = x < level
    tau[~active] = 0
    base = idx << _S32
    for j in range(horizon):
        act = np.flatnonzero(active)
        if act.size == 0:
            break
        z = _raw(key, base[act] + np.uint64(j))
        up = (z >> _S63) == 0
        x[act] += np.where(up, 1, -1)
        hit = x[act] >= level
        tau[act[hit]] = j + 1
        active[act[hit]] = False
    return x, (x >= level).astype(np.uint8), tau


def lattice_dp(initial: int, horizon: int, kind, level, kmin, ok_h, root_table):
    """Float DP for pending/fired leaves (no two-point leaves)."""
    n_leaves = len(kind)
    width = 2 * horizon + 1
    xs = np.arange(initial - horizon, initial + horizon + 1, dtype=np.int64)
    n_masks = 1 << n_leaves
    live = np.zeros((n_masks, width))
    live[0, horizon] = 1.0
    active = np.zeros(n_masks, dtype=bool)
    active[0] = True
    stopped = np.zeros(width)
    by_k = np.zeros(horizon + 1)
    root = np.asarray(root_table, dtype=bool)
    for k in range(horizon + 1):
        lo, hi = horizon - k, horizon + k + 1
        seg_x = xs[lo:hi]
        nxt = np.zeros_like(live)
        nxt_active = np.zeros(n_masks, dtype=bool)
        for mask in np.flatnonzero(active):
            seg = live[mask, lo:hi]
            newmask = np.full(hi - lo, mask, dtype=np.int64)
            for j in range(n_leaves):
                if mask >> j & 1:
                    continue
                t_ok = ok_h[j] if k == horizon else k >= kmin[j]
                if not t_ok:
                    continue
                kd = kind[j]
                if kd == 0:
                    f = np.ones(hi - lo, dtype=bool)
                elif kd == 1:
                    f = seg_x >= level[j]
                elif kd == 2:
                    f = np.abs(seg_x) >= level[j]
                else:
                    f = np.abs(seg_x) <= level[j]
                newmask |= f.astype(np.int64) << j
            fired = root[newmask]
            stop_part = np.where(fired, seg, 0.0)
            stopped[lo:hi] += stop_part
            by_k[k] += stop_part.sum()
            keep = np.where(fired, 0.0, seg)
            for nm in np.unique(newmask[~fired]) if (~fired).any() else ():
                sel = newmask == nm
                nxt[nm, lo:hi] += np.where(sel, keep, 0.0)
                nxt_active[nm] = True
        if k == horizon:
            live, active = nxt, nxt_active
            break
        live = np.zeros_like(nxt)
        for mask in np.flatnonzero(nxt_active):
            live[mask, lo + 1:hi + 1] += 0.5 * nxt[mask, lo:hi]
            live[mask, lo - 1:hi - 1] += 0.5 * nxt[mask, lo:hi]
        active = nxt_active
    unstopped = live.sum(axis=0)
    return stopped, unstopped, by_k


def floor_sum(m: int) -> int:
    """``sum_{k=1..m} floor(2m / (2k-1))``."""
    return sum((2 * m) // (2 * k - 1) for k in range(1, m + 1))
