"""``pib-sched`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from ..baselines import PolicyKind
from ..infobottleneck import (
    check_bounds,
    instance_from_dict,
    load_instance_records,
    random_instances,
    save_instances,
)
from ..priority import (
    DEFAULT_EPS,
    DEFAULT_HIDDEN,
    DEFAULT_LR,
    PriorityNet,
    loss_and_grad,
    read_dataset_csv,
    save_net,
    train_l1,
)
from .acceptance import BOUND_TOL, run_acceptance
from .config import OUTPUT_DIR_ENV, load_config
from .sweeps import run, write_csv

log = logging.getLogger(__name__)


def _output_dir(default: str = "results") -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV) or default)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    cfg = cfg.with_overrides(policy=args.policy, output_dir=args.output_dir, jobs=args.jobs)
    for path in run(cfg):
        print(path)
    return 0


def cmd_verify_bounds(args) -> int:
    failures = 0
    rows = []
    if args.instances:
        records = load_instance_records(args.instances)
        pairs = []
        for rec in records:
            try:
                pairs.append((rec.get("id", len(pairs)), instance_from_dict(rec)))
            except (ValueError, KeyError) as exc:
                print(f"instance {rec.get('id', '?')}: {exc}", file=sys.stderr)
                failures += 1
    else:
        insts = random_instances(args.seed, args.n)
        if args.write_instances:
            save_instances(args.write_instances, insts)
        pairs = list(enumerate(insts))
    for i, inst in pairs:
        c = check_bounds(inst, i)
        rows.append([c.instance_id, c.exact_mi, c.lower_bound, c.weighted_ixz, c.upper_bound,
                     c.lower_slack, c.upper_slack, c.slack])
        if c.slack < -BOUND_TOL:
            failures += 1
    out = Path(args.out) if args.out else _output_dir() / "bounds.csv"
    write_csv(out, ["instance_id", "exact_mi_bits", "lower_bound_bits", "weighted_ixz_bits",
                    "upper_bound_bits", "lower_slack_bits", "upper_slack_bits", "slack_bits"], rows)
    worst = min((r[-1] for r in rows), default=float("nan"))
    print(f"{len(rows)} instances checked, min slack {worst:.6g} bits, {failures} failures -> {out}")
    return 0 if failures == 0 else 1


def cmd_train_priority(args) -> int:
    data, masks = read_dataset_csv(args.data)
    net = PriorityNet.init(np.random.default_rng(args.seed), hidden=args.hidden)
    before = loss_and_grad(net, data, args.eps, masks)[0]
    try:
        net = train_l1(net, data, lr=args.lr, epochs=args.epochs, eps=args.eps, masks=masks)
    except FloatingPointError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return 1
    after = loss_and_grad(net, data, args.eps, masks)[0]
    out = Path(args.out) if args.out else _output_dir() / "priority_net.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_net(net, out)
    print(f"L1 loss {before:.6g} -> {after:.6g} over {len(data)} frames -> {out}")
    return 0


def cmd_acceptance(args) -> int:
    report = run_acceptance(quick=args.quick, instances=args.instances, jobs=args.jobs, echo=print)
    n_ok = sum(r.passed for r in report.results)
    print(f"{n_ok}/{len(report.results)} checks passed")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pib-sched", description="Prioritized camera scheduling experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the experiment described by a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--policy", choices=[k.value for k in PolicyKind], help="override the config's policy")
    r.add_argument("--output-dir", help=f"override the output directory (and ${OUTPUT_DIR_ENV})")
    r.add_argument("--jobs", type=int, help="worker processes for sweep points")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify-bounds", help="check both information bounds and write a CSV")
    v.add_argument("--instances", help="JSON instance file; random instances when omitted")
    v.add_argument("--n", type=int, default=1000, help="number of random instances")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--write-instances", help="also save the random instances to this file")
    v.add_argument("--out", help="CSV path (default: <output dir>/bounds.csv)")
    v.set_defaults(func=cmd_verify_bounds)

    t = sub.add_parser("train-priority", help="train the priority scorer on a dataset CSV")
    t.add_argument("--data", required=True, help="CSV with d_norm, chi_norm, on_time[, frame]")
    t.add_argument("--out", help="net JSON path (default: <output dir>/priority_net.json)")
    t.add_argument("--epochs", type=int, default=500)
    t.add_argument("--lr", type=float, default=DEFAULT_LR)
    t.add_argument("--hidden", type=int, default=DEFAULT_HIDDEN)
    t.add_argument("--eps", type=float, default=DEFAULT_EPS)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train_priority)

    a = sub.add_parser("acceptance", help="run the acceptance suite")
    a.add_argument("--quick", action="store_true", help="fewer seeds and samples")
    a.add_argument("--instances", help="also validate this instance file")
    a.add_argument("--jobs", type=int, default=1)
    a.set_defaults(func=cmd_acceptance)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
