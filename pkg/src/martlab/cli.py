"""``mart-lab``: build the examples, run the statement checks, write reports.

Exit codes: 0 pass, 1 usage or config error, 2 verdict mismatch,
3 indeterminate tail, 4 construction not applicable.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from fractions import Fraction
from typing import Any, Sequence

from . import _core, analysis
from .errors import IndeterminateTail, MartLabError, NotApplicable, PreconditionFailed, SpecError
from .examples import NAMES, ExampleDescriptor, build, expected_properties
from .measure import (
    DivergenceCertificate,
    Exact,
    Policy,
    Truncated,
    as_rational,
    expectation,
    fmt_rational,
)
from .process import SCHEMA, GenerativeProcess, limit_rv, liminf_abs_rv, process_from_json, value_rv
from .stopping import spec_from_json, static_bound, stopped_rv

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH, EXIT_INDETERMINATE, EXIT_INAPPLICABLE = 0, 1, 2, 3, 4

DEFAULTS: dict[str, Any] = {
    "depth": 2000,
    "levels": 10_000,
    "horizon": 1000,
    "epsilon": "2/5",
    "threshold": 1000,
    "grid": "50",
    "seed": 0,
    "reps": 0,
    "format": "json",
    "out": None,
    "k_schedule": "1,10,100,1000",
    "m": "1000,10000,100000",
}

QUANTITIES = ("mean_at", "abs_mean_at", "limit", "abs_limit", "liminf_abs", "stopped", "abs_stopped", "blowup")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors share the config-error exit code
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run parameters (flags > --config file > defaults)")
    g.add_argument("--config", help="JSON file with any of the options below")
    g.add_argument("--depth", type=int, help=f"enumeration depth for countable spaces (default {DEFAULTS['depth']})")
    g.add_argument("--levels", type=int, help=f"levels m of the discretized uniform (default {DEFAULTS['levels']})")
    g.add_argument("--horizon", type=int, help=f"walk horizon H (default {DEFAULTS['horizon']})")
    g.add_argument("--epsilon", help=f"gap construction epsilon, e.g. 2/5 (default {DEFAULTS['epsilon']})")
    g.add_argument("--threshold", help=f"divergence certificate threshold (default {DEFAULTS['threshold']})")
    g.add_argument("--grid", help="largest time of the stopping-rule grid, or a comma list of times "
                                  f"(default {DEFAULTS['grid']})")
    g.add_argument("--k-schedule", dest="k_schedule", help=f"truncation levels K (default {DEFAULTS['k_schedule']})")
    g.add_argument("--seed", type=int, help=f"Monte Carlo seed (default {DEFAULTS['seed']})")
    g.add_argument("--reps", type=int, help="Monte Carlo replications; 0 disables the sampling engine "
                                            f"(default {DEFAULTS['reps']})")
    g.add_argument("--format", choices=("json", "csv"), help="report format (default json)")
    g.add_argument("--out", help="report path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mart-lab", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ex = sub.add_parser("example", help="reproduce the expected verdicts of a built-in example")
    ex.add_argument("name", choices=NAMES)
    _common(ex)

    xp = sub.add_parser("expect", help="exact expectations, certificates and growth curves")
    xp.add_argument("specs", nargs="*", help="JSON files: {process, quantity, t?, rule?, m?}")
    xp.add_argument("--example", choices=NAMES, help="use a built-in example as the process")
    xp.add_argument("--quantity", choices=QUANTITIES, help="quantity for --example")
    xp.add_argument("--t", help="time for mean_at/abs_mean_at")
    xp.add_argument("--rule", help="stopping rule as inline JSON for stopped/abs_stopped")
    xp.add_argument("--m", help="comma list of levels for blowup (default 1000,10000,100000)")
    _common(xp)

    wt = sub.add_parser("witness", help="run the gap construction on a martingale")
    wt.add_argument("spec", nargs="?", help="process JSON file")
    wt.add_argument("--example", choices=NAMES, help="use a built-in example as the process")
    _common(wt)
    return p


# -- config -------------------------------------------------------------------------------------

def resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    """Merge flags over the config file over the defaults."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                filed = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(filed, dict):
            raise SpecError("config file must hold a JSON object")
        unknown = set(filed) - set(DEFAULTS)
        if unknown:
            raise SpecError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(filed)
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    for key in ("depth", "levels", "horizon"):
        if not isinstance(cfg[key], int) or cfg[key] < 1:
            raise SpecError(f"{key} must be a positive integer")
    if cfg["reps"] < 0:
        raise SpecError("reps must be >= 0")
    if cfg["format"] not in ("json", "csv"):
        raise SpecError("format must be json or csv")
    return cfg


def _rational_list(text: Any) -> list[Fraction]:
    if isinstance(text, (list, tuple)):
        return [Fraction(as_rational(x)) for x in text]
    return [Fraction(as_rational(x.strip())) for x in str(text).split(",") if x.strip()]


def _generator(cfg: dict, randomized: bool) -> analysis.StoppingFamilyGenerator:
    grid = _rational_list(cfg["grid"])
    if len(grid) == 1:
        return analysis.StoppingFamilyGenerator(grid_max=grid[0], include_randomized=randomized)
    return analysis.StoppingFamilyGenerator(grid_max=max(grid), times=tuple(grid), include_randomized=randomized)


def _policy(cfg: dict) -> Policy:
    return Policy(divergence_threshold=Fraction(as_rational(cfg["threshold"])))


def _descriptor(name: str, cfg: dict) -> ExampleDescriptor:
    return ExampleDescriptor(name, depth=cfg["depth"], levels=cfg["levels"], horizon=cfg["horizon"])


def _config_json(cfg: dict) -> dict:
    return {k: (str(v) if isinstance(v, Fraction) else v) for k, v in cfg.items() if k != "out"}


# -- output -------------------------------------------------------------------------------------

def _render(report: dict, rows: list[dict] | None, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        rows = rows or []
        fields: list[str] = []
        for r in rows:
            fields += [k for k in r if k not in fields]
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
        return buf.getvalue()
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def write_report(text: str, out: str | None) -> None:
    """Write atomically (temp file + rename), or to stdout."""
    if out is None:
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".mart-lab-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _result_rows(label: str, res: Any) -> list[dict]:
    if isinstance(res, DivergenceCertificate):
        return [{"quantity": label, "kind": "divergence", "N": n, "S_exact": fmt_rational(s), "S": float(s),
                 "threshold": fmt_rational(res.threshold)} for n, s in res.growth_samples]
    if isinstance(res, Truncated):
        return [{"quantity": label, "kind": "truncated", "exact": fmt_rational(res.value), "decimal": float(res.value),
                 "tail_bound": float(res.tail_bound), "N": res.depth}]
    if isinstance(res, Exact):
        return [{"quantity": label, "kind": "exact", "exact": fmt_rational(res.value), "decimal": float(res.value)}]
    if isinstance(res, analysis.BlowupCurve):
        return [{"quantity": label, **r} for r in res.rows()]
    return [{"quantity": label, "kind": "estimate", "mean": res.mean, "half_width": res.half_width,
             "n": res.n, "seed": res.seed}]


# -- commands -----------------------------------------------------------------------------------

def cmd_example(name: str, cfg: dict) -> tuple[int, dict, list[dict]]:
    desc = _descriptor(name, cfg)
    built = build(desc)
    expected = dict(expected_properties(desc))
    gen = _generator(cfg, randomized=name == "cherny_randomized")
    verdicts = analysis.run_hierarchy(built.process, statements=list(expected), gen=gen, policy=_policy(cfg),
                                      depth=cfg["depth"], k_schedule=_rational_list(cfg["k_schedule"]))
    consistent, bad = analysis.hierarchy_consistent(verdicts)
    mismatches = [s for s in expected if verdicts[s].verdict != expected[s]]
    report: dict[str, Any] = {
        "schema": SCHEMA,
        "command": "example",
        "config": _config_json(cfg),
        "example": desc.to_json(),
        "metadata": built.metadata,
        "expected": expected,
        "verdicts": {s: v.to_json() for s, v in verdicts.items()},
        "mismatches": mismatches,
        "hierarchy_consistent": consistent,
        "engine": "exact" if not isinstance(built.process, GenerativeProcess) else "lattice DP",
        "status": "pass" if not mismatches and consistent else "mismatch",
        "backend": _core.active(),
    }
    if cfg["reps"]:
        report["monte_carlo"] = _example_mc(built, cfg)
    rows = [{"statement": s, "expected": expected[s], "verdict": verdicts[s].verdict} for s in expected]
    return (EXIT_OK if report["status"] == "pass" else EXIT_MISMATCH), report, rows


def _example_mc(built, cfg: dict) -> dict:
    from . import montecarlo
    from .stopping import Const, HitAbove, ReciprocalU

    n, seed = cfg["reps"], cfg["seed"]
    name = built.descriptor.name
    if name == "random_walk":
        est = montecarlo.estimate_stopped(built.process, HitAbove(1), n, seed=seed)
        return {"quantity": "E[X_(tau^H)], tau = hit(1)", **est.to_json()}
    if name == "cherny_randomized":
        est = montecarlo.estimate_stopped(built.process, ReciprocalU(), n, horizon=cfg["levels"], seed=seed,
                                          transform=abs)
        return {"quantity": "E|X_(1/U ^ m)|", **est.to_json()}
    est = montecarlo.estimate_stopped(built.process, Const(5), n, seed=seed)
    return {"quantity": "E[X_5]", **est.to_json()}


def _quantity(process, q: dict, cfg: dict):
    kind = q.get("quantity")
    pol = _policy(cfg)
    if kind not in QUANTITIES:
        raise SpecError(f"unknown quantity {kind!r}; choose from {', '.join(QUANTITIES)}")
    if kind == "blowup":
        ms = [int(x) for x in _rational_list(q.get("m", cfg["m"]))]
        return analysis.randomized_blowup_curve(process, 0, ms)
    if isinstance(process, GenerativeProcess):
        raise SpecError("exact expectations need a countable process; use witness or the example suite for walks")
    base = process.base or process
    if kind in ("mean_at", "abs_mean_at"):
        if q.get("t") is None:
            raise SpecError(f"{kind} needs a time t")
        rv = value_rv(base, as_rational(q["t"]))
        rv = rv.abs() if kind == "abs_mean_at" else rv
    elif kind == "limit":
        rv = limit_rv(base)
    elif kind in ("abs_limit", "liminf_abs"):
        rv = liminf_abs_rv(base)
    else:
        if q.get("rule") is None:
            raise SpecError(f"{kind} needs a stopping rule")
        rule = q["rule"]
        rule = spec_from_json(json.loads(rule) if isinstance(rule, str) else rule)
        if rule.uses_uniform():
            raise SpecError("rules that read U go through the blowup quantity")
        bound = static_bound(rule, base)
        settle = base.quiet_depth(bound) if bound is not None else None
        rv = stopped_rv(base, rule, settle_depth=settle)
        rv = rv.abs() if kind == "abs_stopped" else rv
    return expectation(base.space, rv, pol)


def _label(q: dict) -> str:
    kind = q["quantity"]
    if kind in ("mean_at", "abs_mean_at"):
        return f"{kind}(t={q['t']})"
    if kind in ("stopped", "abs_stopped"):
        rule = q["rule"]
        return f"{kind}({json.dumps(json.loads(rule) if isinstance(rule, str) else rule, sort_keys=True)})"
    return kind


def _result_json(res: Any) -> dict:
    if hasattr(res, "to_json"):
        return res.to_json()
    raise TypeError(res)


def cmd_expect(args: argparse.Namespace, cfg: dict) -> tuple[int, dict, list[dict]]:
    jobs: list[tuple[Any, dict, str]] = []
    if args.example:
        if not args.quantity:
            raise SpecError("--example needs --quantity")
        q = {"quantity": args.quantity, "t": args.t, "rule": args.rule, "m": args.m or cfg["m"]}
        jobs.append((build(_descriptor(args.example, cfg)).process, q, args.example))
    for path in args.specs:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read {path}: {exc}") from exc
        if "process" not in doc:
            raise SpecError(f"{path}: missing 'process'")
        jobs.append((process_from_json(doc["process"]), doc, path))
    if not jobs:
        raise SpecError("nothing to compute: give spec files or --example with --quantity")
    results, rows = [], []
    for proc, q, source in jobs:
        label = _label(q)
        res = _quantity(proc, q, cfg)
        entry = {"source": source, "quantity": label, "engine": "exact", "result": _result_json(res)}
        if cfg["reps"] and q["quantity"] in ("mean_at", "abs_mean_at") and not isinstance(proc, GenerativeProcess):
            from . import montecarlo

            base = proc.base or proc
            rv = value_rv(base, as_rational(q["t"]))
            rv = rv.abs() if q["quantity"] == "abs_mean_at" else rv
            entry["monte_carlo"] = montecarlo.estimate_expectation(base.space, rv, cfg["reps"], cfg["seed"]).to_json()
        results.append(entry)
        rows += [{"source": source, **r} for r in _result_rows(label, res)]
    report = {"schema": SCHEMA, "command": "expect", "config": _config_json(cfg), "results": results}
    return EXIT_OK, report, rows


def cmd_witness(args: argparse.Namespace, cfg: dict) -> tuple[int, dict, list[dict]]:
    if args.example:
        process = build(_descriptor(args.example, cfg)).process
        source = args.example
    elif args.spec:
        try:
            with open(args.spec, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read {args.spec}: {exc}") from exc
        process = process_from_json(doc.get("process", doc))
        source = args.spec
    else:
        raise SpecError("witness needs a process file or --example")
    base = {"schema": SCHEMA, "command": "witness", "config": _config_json(cfg), "source": source}
    horizon = cfg["horizon"] if isinstance(process, GenerativeProcess) else None
    try:
        rep = analysis.witness_gap(process, cfg["epsilon"], horizon=horizon)
    except (PreconditionFailed, NotApplicable) as exc:
        report = {**base, "status": "inapplicable", "error": type(exc).__name__, "message": str(exc)}
        return EXIT_INAPPLICABLE, report, [{"status": "inapplicable", "error": type(exc).__name__}]
    report = {**base, "status": "success" if rep.success else "failed", "gap": rep.to_json()}
    row = {"status": report["status"], "epsilon": fmt_rational(rep.eps), "horizon": rep.horizon,
           "E_tau": float(rep.e_tau), "E_sigma2": float(rep.e_sigma2), "gap": float(rep.gap)}
    return (EXIT_OK if rep.success else EXIT_MISMATCH), report, [row]


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "example":
            code, report, rows = cmd_example(args.name, cfg)
        elif args.command == "expect":
            code, report, rows = cmd_expect(args, cfg)
        else:
            code, report, rows = cmd_witness(args, cfg)
    except IndeterminateTail as exc:
        print(f"mart-lab: indeterminate: {exc}", file=sys.stderr)
        return EXIT_INDETERMINATE
    except (SpecError, ValueError, MartLabError) as exc:
        print(f"mart-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    write_report(_render(report, rows, cfg["format"]), cfg["out"])
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
