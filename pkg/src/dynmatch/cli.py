"""Command line entry point: gen, run, audit, game, bench."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .engine import BudgetOverrun
from .games import (
    MAL_SCHEDULES,
    STRATEGIES,
    VARIANTS,
    BinsGame,
    ShuffleGame,
    bins_run,
    largest_safe_b,
    shuffle_run,
)
from .harness import MODELS, RunOptions, UpdateSequence, gen_sequence, run
from .offline_oracle import SequenceError
from .params import Config, ConfigError

SEED_ENV = "DYNMATCH_SEED"


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"{SEED_ENV} must be an integer, got {raw!r}")


def _load_config(args: argparse.Namespace, n: int) -> Config:
    data: Dict[str, object] = {"n": n}
    if getattr(args, "config", None):
        data.update(json.loads(Path(args.config).read_text()))
        if data["n"] != n:
            raise ConfigError(f"config n={data['n']} does not match sequence n={n}")
    if getattr(args, "mode", None):
        data["mode"] = args.mode
    if getattr(args, "epsilon", None) is not None:
        data["epsilon"] = args.epsilon
    if args.seed is not None:
        data["seed"] = args.seed
    elif "seed" not in data:
        data["seed"] = _default_seed()
    if getattr(args, "epoch", False):
        data["epoching"] = True
    return Config.from_dict(data)


def cmd_gen(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    seq = gen_sequence(
        args.model, args.n, args.length, seed, density=args.density, window=args.window, allow_long=args.long
    )
    if args.out == "-":
        sys.stdout.write(seq.to_text())
    else:
        seq.write(args.out)
    return 0


def _execute(args: argparse.Namespace, audit: str, full_every: int) -> int:
    seq = UpdateSequence.read(args.sequence)
    config = _load_config(args, seq.n)
    metrics_fh = None
    if args.metrics:
        metrics_fh = sys.stdout if args.metrics == "-" else open(args.metrics, "w")
    opts = RunOptions(
        audit=audit,
        full_audit_every=full_every,
        combine=getattr(args, "combine", False),
        approx_checkpoints=getattr(args, "checkpoints", 0),
        abort_on_violation=getattr(args, "fail_fast", False),
        metrics=metrics_fh,
    )
    try:
        result = run(seq, config, opts)
    finally:
        if metrics_fh not in (None, sys.stdout):
            metrics_fh.close()
    out = {"summary": result.summary, "violations": result.report.to_dict(), "digest": result.digest}
    if result.checkpoints:
        out["checkpoints"] = result.checkpoints
    text = json.dumps(out, indent=2, sort_keys=True, default=str)
    if args.metrics == "-":
        sys.stderr.write(text + "\n")
    else:
        print(text)
    if result.summary.get("overrun"):
        return 3
    return 0 if result.report.empty() else 1


def cmd_run(args: argparse.Namespace) -> int:
    return _execute(args, args.audit, 0)


def cmd_audit(args: argparse.Namespace) -> int:
    return _execute(args, "every", args.full_every)


def cmd_game(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    writer = csv.writer(sys.stdout if args.out == "-" else open(args.out, "w", newline=""))
    if args.kind == "bins":
        b = args.b if args.b is not None else largest_safe_b(args.N, args.k, args.k_prime)
        game = BinsGame(args.N, args.k, b, args.variant, args.k_prime, args.strategy, seed)
        res = bins_run(game, keep_trace=True)
        writer.writerow(["round", "bin_sizes"])
        for rnd, sizes in res.trace:
            writer.writerow([rnd, " ".join(map(str, sizes))])
        print(f"winner={res.winner} rounds={res.rounds} b={b} claim_violations={res.claim_violations}", file=sys.stderr)
        return 0 if res.claim_violations == 0 else 1
    game = ShuffleGame(
        Fraction(str(args.eps_hat)), args.ratio, args.schedule, args.variant_shuffle, not args.no_mal, seed=seed
    )
    res = shuffle_run(game, args.horizon, keep_trace=True)
    writer.writerow(["step", "bad_fraction"])
    for step, frac in res.trace:
        writer.writerow([step, f"{frac:.6f}"])
    print(f"max_fraction={float(res.max_fraction):.6f} bound={float(res.bound):.6f}", file=sys.stderr)
    return 0 if res.within_bound else 1


def cmd_bench(args: argparse.Namespace) -> int:
    matrix: List[Dict[str, object]] = json.loads(Path(args.matrix).read_text())
    fields = [
        "n", "model", "mode", "length", "seed", "updates", "max_tick_steps", "tick_ceiling",
        "violations", "hits_at_or_above_cut", "max_fallback_steps", "seconds", "status",
    ]
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    writer = csv.DictWriter(out, fieldnames=fields)
    writer.writeheader()
    failures = 0
    for entry in matrix:
        n = int(entry["n"])
        model = str(entry.get("model", "random"))
        length = int(entry.get("length", 1000))
        seed = int(entry.get("seed", _default_seed()))
        cfg_keys = {k: v for k, v in entry.items() if k not in ("model", "length", "density", "audit", "window")}
        cfg_keys.setdefault("seed", seed)
        config = Config.from_dict(cfg_keys)
        seq = gen_sequence(
            model, n, length, seed, density=float(entry.get("density", 0.5)),
            window=entry.get("window"), allow_long=config.epoching,
        )
        started = time.perf_counter()
        status = "ok"
        try:
            result = run(seq, config, RunOptions(audit=str(entry.get("audit", "none"))))
            summary = result.summary
            violations = result.report.total
            if summary.get("overrun"):
                status = "overrun"
            elif violations:
                status = "violations"
        except BudgetOverrun as exc:
            summary, violations, status = {"overrun": str(exc)}, 0, "overrun"
        if status != "ok":
            failures += 1
        writer.writerow({
            "n": n, "model": model, "mode": config.mode, "length": length, "seed": seed,
            "updates": summary.get("updates"), "max_tick_steps": summary.get("max_tick_steps"),
            "tick_ceiling": summary.get("tick_ceiling"), "violations": violations,
            "hits_at_or_above_cut": summary.get("hits_at_or_above_cut"),
            "max_fallback_steps": summary.get("max_fallback_steps"),
            "seconds": f"{time.perf_counter() - started:.2f}", "status": status,
        })
        out.flush()
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dynmatch", description="Worst-case dynamic matching simulator")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an update sequence")
    g.add_argument("--model", choices=MODELS, default="random")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--length", type=int, required=True)
    g.add_argument("--density", type=float, default=0.5)
    g.add_argument("--window", type=int, default=None, help="window for sliding-window")
    g.add_argument("--long", action="store_true", help="allow sequences longer than n^2 (for epoching runs)")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_gen)

    for name, helptext in (("run", "run the engine over a sequence"), ("audit", "replay with a per-tick audit")):
        r = sub.add_parser(name, help=helptext)
        r.add_argument("sequence")
        r.add_argument("--mode", choices=("offline", "oblivious"), default=None)
        r.add_argument("--seed", type=int, default=None)
        r.add_argument("--epsilon", type=float, default=None)
        r.add_argument("--config", default=None, help="JSON config file")
        r.add_argument("--epoch", action="store_true", help="enable epoching")
        r.add_argument("--metrics", default=None, help="write JSON metric lines here ('-' for stdout)")
        r.add_argument("--checkpoints", type=int, default=0, help="exact approximation checkpoints")
        r.add_argument("--fail-fast", action="store_true")
        r.add_argument("--combine", action="store_true", help="smooth output switches through the combiner")
        if name == "run":
            r.add_argument("--audit", default="none", help="'every', 'none' or a cadence k")
            r.set_defaults(func=cmd_run)
        else:
            r.add_argument("--full-every", type=int, default=0, help="full audit cadence on top of the incremental one")
            r.set_defaults(func=cmd_audit)

    gm = sub.add_parser("game", help="play a bins or shuffle game and emit a CSV trace")
    gm.add_argument("kind", choices=("bins", "shuffle"))
    gm.add_argument("--seed", type=int, default=None)
    gm.add_argument("--out", default="-")
    gm.add_argument("--N", type=int, default=64)
    gm.add_argument("--k", type=int, default=128)
    gm.add_argument("--b", type=int, default=None, help="defaults to the largest safe value")
    gm.add_argument("--k-prime", type=int, default=0)
    gm.add_argument("--variant", choices=VARIANTS, default="add-remove-largest")
    gm.add_argument("--strategy", choices=STRATEGIES, default="concentrate")
    gm.add_argument("--eps-hat", type=float, default=0.08)
    gm.add_argument("--ratio", type=int, default=2)
    gm.add_argument("--schedule", choices=MAL_SCHEDULES, default="eager")
    gm.add_argument("--variant-shuffle", choices=("deterministic", "randomized"), default="deterministic")
    gm.add_argument("--no-mal", action="store_true")
    gm.add_argument("--horizon", type=int, default=3000)
    gm.set_defaults(func=cmd_game)

    b = sub.add_parser("bench", help="run a matrix of configurations and write a CSV summary")
    b.add_argument("matrix", help="JSON list of entries with n, model, length, seed and config keys")
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args))
    except (SequenceError, ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
