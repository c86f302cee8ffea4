"""Command-line entry point: ``dttp <subcommand>``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .dynamics import DynamicsConfig, generate_schedule, save_schedule
from .evolve import STATIC_COMBOS, EaConfig
from .harness import (
    InstanceSpec,
    composite_front,
    generate_instance,
    load_plan,
    rank_file,
    run_experiment,
    run_static,
)
from .instance import read_instance, write_instance


def _gen_instance(args):
    inst = generate_instance(InstanceSpec(args.tsp, args.type, args.seed))
    write_instance(inst, args.out)
    print(f"wrote {args.out}: {inst.n_cities} cities, {inst.n_items} items, W={inst.capacity:g}")


def _gen_schedule(args):
    inst = read_instance(args.instance)
    config = DynamicsConfig(args.kind, args.dn, args.cf, args.period, args.changes)
    schedule = generate_schedule(inst, config, args.seed)
    save_schedule(schedule, args.out)
    print(f"wrote {args.out}: {len(schedule.events)} {config.kind} events")


def _run(args):
    plan = load_plan(args.plan)
    out = run_experiment(plan, args.out)
    print(f"results in {out}")


def _run_static(args):
    inst = read_instance(args.instance)
    config = EaConfig(pop_size=args.pop_size, generations_static=args.generations)
    combos = STATIC_COMBOS if args.combo == "all" else (args.combo,)
    results = [run_static(inst, c, config, args.seed) for c in combos]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for r in results:
        (out / f"static_{r.combo}.csv").write_text(r.to_csv())
    if len(results) > 1:
        composite_front(results).to_csv(out / "composite_front.csv", index=False)
    print(f"results in {out}")


def _rank(args):
    table = rank_file(args.input, args.out)
    print(f"wrote {args.out}: {len(table)} rows")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dttp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-instance", help="generate an A/B/C instance over a coordinate source")
    p.add_argument("--tsp", required=True, help="coordinate file or built-in name (berlin52)")
    p.add_argument("--type", required=True, choices=["A", "B", "C"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_gen_instance)

    p = sub.add_parser("gen-schedule", help="generate a change schedule for an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--kind", required=True, choices=["loc", "ava", "val"])
    p.add_argument("--dn", type=float, default=None, help="cities (loc) or percent of items (ava/val)")
    p.add_argument("--cf", type=float, default=0.02)
    p.add_argument("--period", type=int, default=200)
    p.add_argument("--changes", type=int, default=5)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_gen_schedule)

    p = sub.add_parser("run", help="run an experiment plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--out", default=None, help="override the plan's output directory")
    p.set_defaults(func=_run)

    p = sub.add_parser("run-static", help="evolve a static initialisation combo")
    p.add_argument("--instance", required=True)
    p.add_argument("--combo", required=True, choices=[*STATIC_COMBOS, "all"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pop-size", type=int, default=60)
    p.add_argument("--generations", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_run_static)

    p = sub.add_parser("rank", help="median end-of-interval ranks from a snapshot table")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_rank)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print(f"dttp {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
