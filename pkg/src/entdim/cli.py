"""`entdim` command line: schedule, build, entropy, verify, dims.

Exit codes: 0 ok, 1 usage or input error, 2 schedule degeneracy,
3 spacer pool overdrawn, 4 tower too shallow, 5 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .config import enumeration_budget, parse_fraction
from .entropy import entropy_profile
from .errors import (
    EntdimError,
    ScheduleDegeneracy,
    ShallowTower,
    SpacerPoolOverdrawn,
)
from .estimator import (
    EstimatorConfig,
    candidate_ft,
    candidate_seq,
    default_candidates,
    partition_dim_estimate,
)
from .partition import level_set_partition, random_union, symbol_partition, two_cell
from .schedule import (
    Schedule,
    ft_sequence,
    paper_schedule,
    schedule_from_json,
    toy_schedule,
    validate_conditions,
    with_xi,
)
from .seqdim import estimate_dims, parse_seq
from .tower import Ladder, all_names, build, ladder_index
from .verify import SUITES, SuiteOptions, run

EXIT_USAGE = 1
EXIT_DEGENERATE = 2
EXIT_OVERDRAWN = 3
EXIT_SHALLOW = 4
EXIT_VERIFY = 5


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fr(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


# schedule


def _parse_insertions(text: str | None):
    if text is None:
        return None
    out = []
    for item in filter(None, (x.strip() for x in text.split(","))):
        parts = item.split(":")
        if len(parts) not in (2, 3):
            raise UsageError(f"bad insertion {item!r}; use n:l or n:l:h_star")
        out.append(tuple(int(p) for p in parts))
    return out


def _parse_toy(tokens: list[str]) -> tuple[list[int], list[int]]:
    fields = {}
    for tok in " ".join(tokens).split():
        key, _, val = tok.partition("=")
        if key not in ("e", "r") or not val:
            raise UsageError(f"bad toy field {tok!r}; use e=..,.. r=..,..")
        fields[key] = [int(v) for v in val.split(",") if v]
    if set(fields) != {"e", "r"}:
        raise UsageError("toy schedules need both e=... and r=...")
    return fields["e"], fields["r"]


def cmd_schedule(args) -> int:
    ins = _parse_insertions(args.insertions)
    if args.toy:
        e, r = _parse_toy(args.toy)
        budget = None if args.no_budget else "default"
        s = toy_schedule(e, r, ins or (), budget=budget)
    else:
        if args.tau is None:
            raise UsageError("give --tau p/q or --toy e=.. r=..")
        tau = parse_fraction(args.tau)
        s = paper_schedule(tau, insertions=ins, depth=args.depth, xi_horizon=args.xi_horizon, C=args.C)
    d = s.as_dict()
    d["validation"] = [
        {
            "n": c.n,
            "condition3": c.condition3,
            "product_ratio_log2": None if math.isnan(c.product_ratio_log2) else c.product_ratio_log2,
            "e_at_least_two": c.e_at_least_two,
        }
        for c in validate_conditions(s)
    ]
    _write(_dump(d), args.out)
    if args.out not in (None, "-"):
        print(f"schedule {s.schedule_id()} depth {s.depth} C_tau={s.C} xi={_fr(s.xi)} -> {args.out}")
    return 0


# build


def _load_schedule(path: str) -> Schedule:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read schedule {path}: {exc}") from exc
    try:
        return schedule_from_json(text)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path} is not a schedule file: {exc}") from exc


def _upto(s: Schedule, depth: int | None, upto: str | None) -> int | None:
    if upto is not None:
        return ladder_index(upto)
    if depth is not None:
        return 2 * depth + 1
    return None


def cmd_build(args) -> int:
    s = _load_schedule(args.schedule)
    if args.xi is not None:
        s = _override_xi(s, parse_fraction(args.xi))
    ladder = build(s, _upto(s, args.depth, args.upto))
    budget = enumeration_budget()
    out = {
        "schema_version": 1,
        "schedule_id": s.schedule_id(),
        "ins_convention": "segment k starts with (i_{k+1} mod h*) spacers, i 1-based",
        "towers": [t.describe() for t in ladder.towers],
        "pool": {
            "total": _fr(ladder.pool.total),
            "consumed": _fr(ladder.pool.consumed),
            "remaining": _fr(ladder.pool.remaining),
        },
    }
    if args.dump_names:
        names, refused = {}, []
        for t in ladder.towers:
            if t.enumerable(budget):
                names[t.label] = all_names(t, budget)
            else:
                refused.append(t.label)
        out["names"] = names
        out["names_refused_over_budget"] = refused
        out["budget"] = budget
    _write(_dump(out), args.out)
    return 0


def _override_xi(s: Schedule, xi: Fraction) -> Schedule:
    """Replace the starting measure; a larger xi leaves less room for spacers."""
    if xi <= s.xi:
        return with_xi(s, xi)
    if xi > 1:
        raise UsageError("xi must lie in (0, 1]")
    factor = xi / s.xi
    stages = tuple(replace(st, xi=st.xi * factor) for st in s.stages)
    return replace(s, xi=xi, stages=stages)


# partitions and ladders for entropy / dims


def _ladder_for(s: Schedule, tower: str) -> Ladder:
    idx = ladder_index(tower)
    if idx > 2 * s.depth + 1:
        raise UsageError(f"{tower} is beyond the schedule depth {s.depth}")
    return build(s, idx)


def parse_partition(spec: str, ladder: Ladder):
    """symbols | levels:STAGE | cells:STAGE:c.l,c.l | random:STAGE:seed[:frac]"""
    head, _, rest = spec.partition(":")
    if head == "symbols" and not rest:
        return symbol_partition(ladder.towers[0])
    parts = rest.split(":")
    if head == "levels" and len(parts) == 1:
        return level_set_partition(ladder.get(parts[0]))
    if head == "cells" and len(parts) == 2:
        cells = []
        for item in filter(None, parts[1].split(",")):
            c, _, l = item.partition(".")
            cells.append((int(c), int(l)))
        if not cells:
            raise UsageError("cells partition needs at least one c.l cell")
        return two_cell(ladder.get(parts[0]), cells)
    if head == "random" and len(parts) in (2, 3):
        frac = parse_fraction(parts[2]) if len(parts) == 3 else Fraction(1, 2)
        return random_union(ladder.get(parts[0]), np.random.default_rng(int(parts[1])), frac)
    raise UsageError(f"bad partition spec {spec!r}")


def _resolver(schedule: Schedule | None, schedule_path: str | None):
    def resolve(ident: str, t: int):
        if ident == "sched":
            if schedule is None:
                raise UsageError("ft:sched:t needs --schedule")
            return ft_sequence(schedule, t)
        return ft_sequence(_load_schedule(ident), t)

    return resolve


def _offsets(spec: str, s: Schedule | None, path: str | None, n_max: int) -> list[int]:
    seq = parse_seq(spec, _resolver(s, path))
    if spec.startswith("ft:"):
        offs = [0]
    else:
        offs = []
    i = 1
    while len(offs) < n_max and seq.available(i):
        offs.append(seq.term(i))
        i += 1
    if len(offs) < n_max:
        raise UsageError(f"{spec} has only {len(offs)} offsets, need {n_max}")
    return offs


def cmd_entropy(args) -> int:
    s = _load_schedule(args.schedule)
    ladder = _ladder_for(s, args.tower)
    W = ladder.get(args.tower)
    alpha = parse_partition(args.partition, ladder)
    offs = _offsets(args.seq, s, args.schedule, args.nmax)
    mode = "sampled" if args.mode in ("sample", "sampled") else "exact"
    if mode == "sampled" and args.seed is None:
        raise UsageError("sampling needs --seed")
    prof = entropy_profile(
        W, alpha, offs, args.nmax, mode=mode, samples=args.samples, seed=args.seed or 0,
        workers=args.workers, estimator=args.estimator, method=args.method,
    )
    _write(prof.to_csv(), args.out)
    return 0


# verify


def cmd_verify(args) -> int:
    opts = SuiteOptions(seed=args.seed, samples=args.samples, workers=args.workers,
                        triples=args.triples, sampled=not args.no_sampled)
    report = run(args.suite, opts)
    _write(_dump(report), args.out)
    if not report["passed"]:
        for name, suite in report["suites"].items():
            for c in suite["checks"]:
                if not c["passed"]:
                    print(f"FAIL [{name}] {c['name']}: {json.dumps(c['detail'])}", file=sys.stderr)
        return EXIT_VERIFY
    return 0


# dims


def cmd_dims(args) -> int:
    if args.partition is None:
        if args.seq is None:
            raise UsageError("give --seq (sequence dimensions) or --partition (estimator)")
        s = _load_schedule(args.schedule) if args.schedule else None
        seq = parse_seq(args.seq, _resolver(s, args.schedule))
        n = args.nmax
        if seq.length is not None:
            n = min(n, seq.length)
        est = estimate_dims(seq, n, args.window)
        d = {"schema_version": 1, "seq": args.seq, **est.as_dict()}
        _write(_dump(d), args.out)
        return 0
    if args.schedule is None or args.tower is None:
        raise UsageError("--partition needs --schedule and --tower")
    if args.mode in ("sample", "sampled") and args.seed is None:
        raise UsageError("sampling needs --seed")
    s = _load_schedule(args.schedule)
    ladder = _ladder_for(s, args.tower)
    W = ladder.get(args.tower)
    alpha = parse_partition(args.partition, ladder)
    if args.seq:
        seq = parse_seq(args.seq, _resolver(s, args.schedule))
        if args.seq.startswith("ft:"):
            cands = [candidate_ft(s, int(args.seq.rsplit(":", 1)[1]), W)]
        else:
            cands = [candidate_seq(args.seq, seq, W, args.profile_n)]
    else:
        cands = default_candidates(s, W, args.profile_n)
    cfg = EstimatorConfig(
        mode="sampled" if args.mode in ("sample", "sampled") else "exact",
        samples=args.samples, seed=args.seed or 0, workers=args.workers,
        n_max=args.profile_n, egs_threshold=args.threshold, method=args.method,
    )
    report = partition_dim_estimate(W, alpha, cands, cfg).as_dict()
    report["schedule"] = s.schedule_id()
    report["tower"] = W.label
    report["partition"] = alpha.describe()
    _write(_dump(report), args.out)
    return 0


def make_parser() -> Parser:
    p = Parser(prog="entdim", description="Entropy dimension of cutting-and-stacking systems.")
    p.add_argument("--version", action="version", version=f"entdim {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    sp = sub.add_parser("schedule", help="generate and validate a parameter schedule")
    sp.add_argument("--tau", help="target dimension p/q")
    sp.add_argument("--depth", type=int, default=6)
    sp.add_argument("--insertions", help="n:l[:h_star],... (default rule n_t=3t, l_t=3t-1)")
    sp.add_argument("--xi-horizon", type=int, help="truncate the xi product at this stage")
    sp.add_argument("--C", type=int, help="override C_tau (experiments only)")
    sp.add_argument("--toy", nargs="+", metavar="FIELD", help="explicit schedule: e=.. r=..")
    sp.add_argument("--no-budget", action="store_true", help="toy: skip the enumeration budget check")
    sp.add_argument("--out", default="schedule.json")
    sp.set_defaults(func=cmd_schedule)

    bp = sub.add_parser("build", help="build the tower ladder")
    bp.add_argument("--schedule", required=True)
    bp.add_argument("--depth", type=int, help="build up to W~depth")
    bp.add_argument("--upto", help="last tower label, e.g. W3 or W~2")
    bp.add_argument("--xi", help="override the starting measure (p/q)")
    bp.add_argument("--dump-names", action="store_true")
    bp.add_argument("--out", default="-")
    bp.set_defaults(func=cmd_build)

    ep = sub.add_parser("entropy", help="entropy profile along a sequence")
    ep.add_argument("--schedule", required=True)
    ep.add_argument("--tower", required=True, help="tower label, e.g. W4")
    ep.add_argument("--partition", required=True,
                    help="symbols | levels:W1 | cells:W1:0.0,1.1 | random:W2:SEED[:FRAC]")
    ep.add_argument("--seq", required=True, help="squares | nat | pow2 | floorpow:x | arith:a,d | file:path | ft:sched:t")
    ep.add_argument("--nmax", type=int, required=True)
    ep.add_argument("--mode", choices=["exact", "sample", "sampled"], default="exact")
    ep.add_argument("--samples", type=int, default=100_000)
    ep.add_argument("--seed", type=int)
    ep.add_argument("--workers", type=int, default=1)
    ep.add_argument("--estimator", choices=["plugin", "miller-madow"], default="plugin")
    ep.add_argument("--method", choices=["auto", "table", "structural"], default="auto")
    ep.add_argument("--out", default="-")
    ep.set_defaults(func=cmd_entropy)

    vp = sub.add_parser("verify", help="run exact verification suites")
    vp.add_argument("--suite", choices=list(SUITES) + ["all"], default="all")
    vp.add_argument("--seed", type=int, default=0)
    vp.add_argument("--samples", type=int, default=10**6)
    vp.add_argument("--workers", type=int, default=1)
    vp.add_argument("--triples", type=int, default=50)
    vp.add_argument("--no-sampled", action="store_true", help="skip the sampled tau=1/2 W4 run")
    vp.add_argument("--out", default="-")
    vp.set_defaults(func=cmd_verify)

    dp = sub.add_parser("dims", help="dimension estimates")
    dp.add_argument("--seq")
    dp.add_argument("--nmax", type=int, default=10**5)
    dp.add_argument("--window", type=int)
    dp.add_argument("--schedule")
    dp.add_argument("--tower")
    dp.add_argument("--partition")
    dp.add_argument("--mode", choices=["exact", "sample", "sampled"], default="exact")
    dp.add_argument("--samples", type=int, default=100_000)
    dp.add_argument("--seed", type=int)
    dp.add_argument("--workers", type=int, default=1)
    dp.add_argument("--profile-n", type=int, default=24)
    dp.add_argument("--threshold", type=float, default=0.05)
    dp.add_argument("--method", choices=["auto", "table", "structural"], default="auto")
    dp.add_argument("--out", default="-")
    dp.set_defaults(func=cmd_dims)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScheduleDegeneracy as exc:
        print(f"entdim: schedule degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except SpacerPoolOverdrawn as exc:
        print(f"entdim: {exc}", file=sys.stderr)
        return EXIT_OVERDRAWN
    except ShallowTower as exc:
        print(f"entdim: tower too shallow: {exc}", file=sys.stderr)
        return EXIT_SHALLOW
    except (UsageError, EntdimError, ValueError, IndexError) as exc:
        print(f"entdim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
