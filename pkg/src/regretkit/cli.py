"""Command-line entry point.

Subcommands:

 * ``run``            one (algorithm, game) cell; CSV to stdout or --out
 * ``sweep``          cross product of step sizes and seeds on one game
 * ``counterexample`` emit an adversarial loss sequence and its replay
 * ``gen``            write random games / built-in trees as game files
 * ``rate``           log-log rate regression over a trace CSV

Games are referenced by file path, by built-in name (``hard3x3``,
``kuhn3`` .. ``kuhn6``, ``liars2``, ``liars3``), or by a seeded random
spec (``random-matrix:30x40``, ``random-nfg:3,3,3``) that draws one
instance per seed, which is how sweeps cover instance distributions.
Relative output paths are resolved against $REGRETKIT_OUTDIR when set.

Exit codes: 0 success, 2 configuration error (including unknown flags),
3 numerical failure (a non-finite iterate; the message names the round).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import efg
from .core import replay_exact, rm_plus_step, prm_plus_step, AggregateState
from .games import (
    hard_instance,
    instability_losses,
    load_game,
    random_matrix_game,
    random_nfg,
    save_game,
)
from .harness import (
    ALGORITHMS,
    NumericalDivergence,
    SolverConfig,
    read_trace_csv,
    run,
    slope_loglog,
)

_BUILTIN_TREES = {
    "kuhn3": lambda: efg.build_kuhn(2, 3),
    "kuhn4": lambda: efg.build_kuhn(2, 4),
    "kuhn5": lambda: efg.build_kuhn(2, 5),
    "kuhn6": lambda: efg.build_kuhn(2, 6),
    "liars2": lambda: efg.build_liars_dice(2, 2),
    "liars3": lambda: efg.build_liars_dice(3, 2),
}


def _resolve_out(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get("REGRETKIT_OUTDIR")
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _load_any_game(spec: str, seed: int = 0):
    if spec == "hard3x3":
        return hard_instance()
    if spec in _BUILTIN_TREES:
        return _BUILTIN_TREES[spec]()
    if spec.startswith("random-matrix:"):
        dims = spec.split(":", 1)[1].split("x")
        if len(dims) != 2:
            raise ValueError(f"bad random-matrix spec {spec!r}")
        return random_matrix_game(int(dims[0]), int(dims[1]), seed)
    if spec.startswith("random-nfg:"):
        dims = [int(d) for d in spec.split(":", 1)[1].split(",")]
        return random_nfg(dims, seed)
    path = Path(spec)
    if not path.exists():
        raise ValueError(f"game file not found: {spec}")
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().split()
    if first and first[0] == "efg":
        return efg.load_tree(path)
    return load_game(path)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--algo", required=True, choices=ALGORITHMS)
    parser.add_argument("--game", required=True,
                        help="game file, built-in name, or seeded spec "
                             "(random-matrix:D1xD2, random-nfg:D1,D2,..)")
    parser.add_argument("--eta", default="auto",
                        help="step size, or 'auto' for the prescribed value")
    parser.add_argument("--r0", type=float, default=1.0)
    parser.add_argument("--avg", choices=("uniform", "linear"), default="linear")
    alt = parser.add_mutually_exclusive_group()
    alt.add_argument("--alt", dest="alt", action="store_true", default=False)
    alt.add_argument("--no-alt", dest="alt", action="store_false")
    parser.add_argument("--iters", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--skip", type=int, default=0,
                        help="drop the first SKIP rounds from the report")
    parser.add_argument("--eps-schedule", default=None,
                        help="conceptual-rm+: '1/t^2' or a fixed tolerance")
    parser.add_argument("--kmax", type=int, default=100)


def _config_from(args, eta=None, seed=None) -> SolverConfig:
    eta_value: float | str = args.eta if eta is None else eta
    if eta_value != "auto":
        try:
            eta_value = float(eta_value)
        except ValueError:
            raise ValueError(f"bad eta {eta_value!r}") from None
    return SolverConfig(
        algorithm=args.algo,
        eta=eta_value,
        r0=args.r0,
        averaging=args.avg,
        alternation=args.alt,
        iters=args.iters,
        eps_schedule=args.eps_schedule,
        k_max=args.kmax,
        seed=args.seed if seed is None else seed,
        report_skip=args.skip,
    )


def _cmd_run(args) -> int:
    game = _load_any_game(args.game, args.seed)
    trace = run(_config_from(args), game)
    out = _resolve_out(args.out)
    if out is None:
        trace.write_csv(sys.stdout)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            trace.write_csv(fh)
    return 0


def _cmd_sweep(args) -> int:
    etas = [e.strip() for e in args.etas.split(",") if e.strip()]
    seeds = _parse_seeds(args.seeds)
    outdir = _resolve_out(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    summary_rows = []
    for eta in etas:
        for seed in seeds:
            # random-* specs draw one instance per seed; files are fixed
            game = _load_any_game(args.game, seed)
            trace = run(_config_from(args, eta=eta, seed=seed), game)
            name = f"{args.algo.replace('+', 'p')}_eta{eta}_seed{seed}.csv"
            with open(outdir / name, "w", encoding="utf-8") as fh:
                trace.write_csv(fh)
            summary_rows.append((
                eta, seed, trace.gap[-1] if trace.gap.size else float("nan"),
                float(np.max(trace.regret_max[-1])) if trace.t.size else float("nan"),
            ))
    with open(outdir / "summary.csv", "w", encoding="utf-8") as fh:
        fh.write(f"# algorithm={args.algo}\n# game={args.game}\n")
        fh.write("eta,seed,final_gap,final_regret_max\n")
        for eta, seed, gap, reg in summary_rows:
            fh.write(f"{eta},{seed},{gap:.17g},{reg:.17g}\n")
    return 0


def _parse_seeds(text: str) -> list[int]:
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi)))
    return [int(s) for s in text.split(",") if s.strip()]


def _cmd_counterexample(args) -> int:
    variant = {"rm+": "rm+", "prm+": "prm+"}.get(args.variant)
    if variant is None:
        raise ValueError(f"unknown variant {args.variant!r}")
    seq = instability_losses(args.iters, variant, scaled=args.scaled)
    lines = [f"# variant={variant}", f"# scaled={int(args.scaled)}",
             "t,loss_0,loss_1,x_0,x_1"]
    if args.rational:
        played = replay_exact(seq.fractions(), variant)
        for t, (loss, x) in enumerate(zip(seq.fractions(), played), start=1):
            lines.append(f"{t},{loss[0]},{loss[1]},{x[0]},{x[1]}")
    else:
        step = rm_plus_step if variant == "rm+" else prm_plus_step
        state = AggregateState.initial(2, 0.0)
        for t in range(1, args.iters + 1):
            state, x = step(state, seq.losses[t - 1])
            lines.append(f"{t},{seq.losses[t-1][0]:.17g},{seq.losses[t-1][1]:.17g},"
                         f"{x[0]:.17g},{x[1]:.17g}")
    text = "\n".join(lines) + "\n"
    out = _resolve_out(args.out)
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
    return 0


def _cmd_gen(args) -> int:
    out = _resolve_out(args.out)
    if args.type == "random-matrix":
        game = random_matrix_game(args.d1, args.d2, args.seed)
        save_game(game, out)
    elif args.type == "random-nfg":
        dims = tuple(int(d) for d in args.dims.split(","))
        save_game(random_nfg(dims, args.seed), out)
    elif args.type == "kuhn":
        efg.save_tree(efg.build_kuhn(2, args.ranks), out)
    elif args.type == "liars-dice":
        efg.save_tree(efg.build_liars_dice(args.players, args.faces), out)
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown type {args.type!r}")
    return 0


def _cmd_rate(args) -> int:
    _, ts, gaps = read_trace_csv(args.trace)
    slope = slope_loglog(ts, gaps, args.t_from, args.t_to)
    sys.stdout.write(f"{slope:.6f}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regretkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one solver on one game")
    _add_run_flags(p_run)
    p_run.add_argument("--out", default=None, help="CSV path (default stdout)")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="eta x seed sweep on one game")
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--etas", required=True,
                         help="comma list, e.g. 0.1,1,10 (or 'auto')")
    p_sweep.add_argument("--seeds", default="0",
                         help="comma list or lo:hi range")
    p_sweep.add_argument("--outdir", required=True)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_cx = sub.add_parser("counterexample",
                          help="emit an adversarial loss sequence and replay")
    p_cx.add_argument("--variant", required=True, choices=("rm+", "prm+"))
    p_cx.add_argument("--iters", type=int, default=20)
    p_cx.add_argument("--scaled", action="store_true")
    p_cx.add_argument("--rational", action="store_true",
                      help="exact fractions instead of floats")
    p_cx.add_argument("--out", default=None)
    p_cx.set_defaults(func=_cmd_counterexample)

    p_gen = sub.add_parser("gen", help="write a game file")
    p_gen.add_argument("--type", required=True,
                       choices=("random-matrix", "random-nfg", "kuhn",
                                "liars-dice"))
    p_gen.add_argument("--d1", type=int, default=30)
    p_gen.add_argument("--d2", type=int, default=40)
    p_gen.add_argument("--dims", default="3,3", help="random-nfg action counts")
    p_gen.add_argument("--ranks", type=int, default=3)
    p_gen.add_argument("--players", type=int, default=2)
    p_gen.add_argument("--faces", type=int, default=2)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_gen)

    p_rate = sub.add_parser("rate", help="log-log slope of a trace column")
    p_rate.add_argument("--trace", required=True)
    p_rate.add_argument("--from", dest="t_from", type=float, required=True)
    p_rate.add_argument("--to", dest="t_to", type=float, required=True)
    p_rate.set_defaults(func=_cmd_rate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalDivergence as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
