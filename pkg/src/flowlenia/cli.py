"""Command-line surface: evolve, simulate, complexity, plot."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import __version__, complexity, evolution, harness, sim


class UsageError(Exception):
    """Bad invocation (missing files, malformed config); exits with 2."""


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} {path!r} does not exist")
    return p


def cmd_evolve(args) -> int:
    path = _require_file(args.config, "config file")
    try:
        cfg = harness.load_config(path)
    except harness.ConfigError as exc:
        raise UsageError(str(exc)) from exc
    evo = cfg.evo
    if args.seed is not None:
        evo = dataclasses.replace(evo, seed=args.seed)
    out_dir = args.out if args.out is not None else cfg.out_dir
    cfg = harness.ExperimentConfig(evo=evo, out_dir=out_dir, dump_every=cfg.dump_every)
    run_dir = harness.run_experiment(cfg)
    print(run_dir)
    return 0


def cmd_simulate(args) -> int:
    path = _require_file(args.genome, "genome file")
    genes, _, wiring = evolution.load_genome(path)
    if int(wiring.max(initial=0)) >= args.channels:
        raise UsageError(
            f"genome wiring references channel {int(wiring.max())} "
            f"but --channels is {args.channels}"
        )
    rule = evolution.decode_genome(genes, wiring)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    state = sim.init_state(args.seed, args.size, args.size, args.channels, args.patch)
    comp = sim.CompiledRule(rule, (args.size, args.size))

    def dump_png(k: int, s) -> None:
        complexity.write_png(out / f"step{k:04d}.png", complexity.state_to_image(s))

    if args.dump_every:
        dump_png(0, state)
        for k in range(1, args.steps + 1):
            state = sim.run(rule, state, 1, comp)
            if k % args.dump_every == 0:
                dump_png(k, state)
    else:
        state = sim.run(rule, state, args.steps, comp)
    sim.save_state(out / "final.flst", state)
    complexity.write_png(out / "final.png", complexity.state_to_image(state))
    print(out)
    return 0


def cmd_complexity(args) -> int:
    path = _require_file(args.input, "input file")
    if path.suffix.lower() == ".png":
        from PIL import Image

        img = np.asarray(Image.open(path).convert("RGB"))
        profile = complexity.image_profile(img, args.scales, polar=args.polar)
    else:
        state = sim.load_state(path)
        profile = complexity.complexity_profile(state, args.scales, polar=args.polar)
    for s, ratio in enumerate(profile):
        print(f"{s},{float(ratio)!r}")
    if args.target is not None:
        print(f"fitness,{complexity.fitness(profile, args.target)!r}")
    return 0


def cmd_plot(args) -> int:
    run_dir = Path(args.run)
    if not run_dir.is_dir():
        raise UsageError(f"run directory {args.run!r} does not exist")
    for path in harness.emit_charts(run_dir):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowlenia",
        description="Flow Lenia rollouts, compression-complexity scoring, and rule evolution.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--version", action="version", version=f"flowlenia {__version__}")
        return p

    p = add_parser("evolve", help="run a full evolution experiment from a JSON config")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="override the output directory")
    p.set_defaults(func=cmd_evolve)

    p = add_parser("simulate", help="roll out a saved genome and dump states")
    p.add_argument("--genome", required=True, help="genome JSON file")
    p.add_argument("--steps", type=int, required=True, help="number of updates")
    p.add_argument("--dump-every", type=int, default=0, metavar="K", help="PNG dump cadence")
    p.add_argument("--out", default="sim-out", help="output directory")
    p.add_argument("--seed", type=int, default=0, help="initial-state seed")
    p.add_argument("--size", type=int, default=256, help="world side length")
    p.add_argument("--channels", type=int, default=3)
    p.add_argument("--patch", type=int, default=64, help="initial patch side")
    p.set_defaults(func=cmd_simulate)

    p = add_parser("complexity", help="print the complexity profile of a state or PNG")
    p.add_argument("--input", required=True, help="state .flst or .png image")
    p.add_argument("--scales", type=int, default=4, help="number of extra dyadic scales")
    p.add_argument("--target", type=float, default=None, help="also print fitness against T")
    p.add_argument(
        "--polar",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="re-rasterize in polar coordinates first",
    )
    p.set_defaults(func=cmd_complexity)

    p = add_parser("plot", help="render trend.svg and hist.svg for a run directory")
    p.add_argument("--run", required=True, help="run directory with stats.csv")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
