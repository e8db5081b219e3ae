"""Ready-made processes: the jump martingale, its randomized variant, the walk, and two small controls.

``cherny``
    Atoms ``(n, D)`` for ``n >= 1`` and ``D = +-1`` with weight ``1/(4 n^2)``;
    the path is 0 until time ``n`` and ``D n^2`` afterwards.  The remaining
    mass (the atoms that never jump) is irrational and is only ever handled as
    the space's residual, through two tail representatives ``(inf, +-1)``.
``cherny_randomized``
    The same process on the space extended by an independent uniform level
    revealed at time ``eta``.
``random_walk``
    Simple symmetric walk with unit steps at integer times up to a horizon.
``two_atom_nonadapted``
    Two equally likely atoms, both 0 on ``[0, 1)``, ending at 5 and 0.
``nonnegative_control``
    The constant 1 on a one-atom space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .errors import SpecError
from .measure import INF, ONE, Atom, CountableSpace, UniformBlock
from .process import GenerativeProcess, PathProcess, PiecewiseConstantPath, simple_random_walk
from .stopping import UniformExtension, extend_with_uniform

NAMES = ("cherny", "cherny_randomized", "random_walk", "two_atom_nonadapted", "nonnegative_control")

DEFAULTS = {"depth": 2000, "levels": 10_000, "horizon": 1000, "eta": 0}

# walks up to this horizon are also enumerated atom by atom
ENUMERABLE_HORIZON = 16


@dataclass(frozen=True)
class ExampleDescriptor:
    name: str
    depth: int | None = None
    levels: int | None = None
    horizon: int | None = None
    eta: Any = None

    def __post_init__(self):
        if self.name not in NAMES:
            raise SpecError(f"unknown example {self.name!r}; choose from {', '.join(NAMES)}")
        for key in ("depth", "levels", "horizon"):
            v = getattr(self, key)
            if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < 1):
                raise SpecError(f"{key} must be a positive integer, got {v!r}")

    def param(self, key: str) -> Any:
        v = getattr(self, key)
        return DEFAULTS[key] if v is None else v

    def to_json(self) -> dict:
        out: dict[str, Any] = {"example": self.name}
        for key in ("depth", "levels", "horizon", "eta"):
            v = getattr(self, key)
            if v is not None:
                out[key] = str(v) if isinstance(v, Fraction) else v
        return out


@dataclass
class BuiltExample:
    """What :func:`build` returns.

    ``process`` is a :class:`PathProcess` for the countable examples and a
    :class:`GenerativeProcess` for the walk; ``space`` is the countable space
    (for the walk, only when the horizon is small enough to enumerate).
    """

    descriptor: ExampleDescriptor
    space: CountableSpace | None
    process: PathProcess | GenerativeProcess
    metadata: dict = field(default_factory=dict)
    extension: UniformExtension | None = None
    paths: PathProcess | None = None

    @property
    def depth(self) -> int:
        return self.descriptor.param("depth")


# -- the jump martingale ---------------------------------------------------------------------

def _cherny_atom(n: Any, d: int) -> Atom:
    if n == INF:
        return Atom((INF, d), {"sigma": INF, "D": d, "tail": True})
    return Atom((n, d), {"sigma": n, "D": d, "block": n})


def cherny_space() -> CountableSpace:
    def block(n: int) -> UniformBlock:
        return UniformBlock((Atom((n, 1), {"sigma": n, "D": 1, "block": n}),
                             Atom((n, -1), {"sigma": n, "D": -1, "block": n})), 1, 4 * n * n)

    def tail_mass_lower(depth: int) -> Fraction:
        # never-jumping mass = residual - sum_{n>depth} 1/(2n^2) > residual - 1/(2 depth)
        return max(Fraction(0), space.residual(depth) - Fraction(1, 2 * depth))

    space = CountableSpace(
        block,
        block_mass=lambda n: Fraction(1, 2 * n * n),
        tail_classes=[(_cherny_atom(INF, 1), Fraction(1, 2)), (_cherny_atom(INF, -1), Fraction(1, 2))],
        tail_mass_lower=tail_mass_lower,
        name="cherny",
    )
    return space


def cherny_process(space: CountableSpace | None = None) -> PathProcess:
    space = space or cherny_space()

    def path_of(a: Atom) -> PiecewiseConstantPath:
        s = a.payload["sigma"]
        if s == INF:
            return PiecewiseConstantPath(0)
        return PiecewiseConstantPath(0, [(s, a.payload["D"] * s * s)])

    def value_fn(a: Atom, t: Any) -> int:
        s = a.payload["sigma"]
        return a.payload["D"] * s * s if s <= t else 0

    def terminal_fn(a: Atom) -> int:
        p = a.payload
        s = p["sigma"]
        return 0 if s == INF else p["D"] * s * s

    return PathProcess(space, path_of, quiet_depth=lambda t: math.floor(t), name="X",
                       value_fn=value_fn, terminal_fn=terminal_fn)


# -- builders ----------------------------------------------------------------------------------

def build(desc: ExampleDescriptor) -> BuiltExample:
    name = desc.name
    if name == "cherny":
        proc = cherny_process()
        proc.descriptor = desc.to_json()
        return BuiltExample(desc, proc.space, proc, {
            "atom_weight": "1/(4 n^2)",
            "never_jumping_mass": "irrational; kept in the residual",
        })
    if name == "cherny_randomized":
        base = cherny_process()
        eta = desc.param("eta")
        ext = extend_with_uniform(base.space, eta, desc.param("levels"))
        proc = ext.lift(base)
        proc.descriptor = desc.to_json()
        return BuiltExample(desc, ext.space, proc, {"levels": ext.m, "eta": str(ext.eta)}, extension=ext)
    if name == "random_walk":
        h = desc.param("horizon")
        walk = simple_random_walk(h)
        paths = walk.as_path_process() if h <= ENUMERABLE_HORIZON else None
        return BuiltExample(desc, paths.space if paths else None, walk, {"horizon": h}, paths=paths)
    if name == "two_atom_nonadapted":
        paths = {
            "a": PiecewiseConstantPath(0, [(1, 5)]),
            "b": PiecewiseConstantPath(0, [(1, 0)]),
        }
        space = CountableSpace.finite([(Atom("a", {"block": 1}), Fraction(1, 2)),
                                       (Atom("b", {"block": 1}), Fraction(1, 2))], name="two_atom")
        proc = PathProcess(space, lambda a: paths[a.id], name="X", descriptor=desc.to_json())
        return BuiltExample(desc, space, proc, {"terminal_values": {"a": 5, "b": 0}})
    # nonnegative_control
    space = CountableSpace.finite([(Atom("omega", {"block": 1}), ONE)], name="one_atom")
    path = PiecewiseConstantPath(1)
    proc = PathProcess(space, lambda a: path, name="X", descriptor=desc.to_json())
    return BuiltExample(desc, space, proc, {"value": 1})


HOLDS, VIOLATED, UNDECIDABLE = "holds_on_suite", "violated", "undecidable"


def expected_properties(desc: ExampleDescriptor) -> list[tuple[str, str]]:
    """Ground-truth verdicts, strongest statement last."""
    table = {
        "cherny": [("V", HOLDS), ("IV", HOLDS), ("III", VIOLATED), ("II", VIOLATED), ("I", VIOLATED)],
        "cherny_randomized": [("IV", VIOLATED)],
        "random_walk": [("V", HOLDS), ("IV", VIOLATED)],
        "two_atom_nonadapted": [("V", VIOLATED), ("IV", VIOLATED), ("I", VIOLATED)],
        "nonnegative_control": [("V", HOLDS), ("IV", HOLDS), ("III", HOLDS), ("II", HOLDS), ("I", HOLDS)],
    }
    return list(table[desc.name])
