"""Command-line entry point: ``run``, ``sweep``, ``verify`` and ``datasets``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import yaml

from .harness.artifacts import dumps, write_outputs
from .harness.config import ConfigFileError, ExperimentConfig, load_config
from .harness.experiment import run_experiment, run_sweep
from .harness.instances import instance_from_spec
from .market import CostModel
from .oracle.datasets import BUILTIN, DatasetError, load_builtin
from .protocol.engine import AGENTS, SETTINGS
from .verifier import exhaustive_equilibrium, verify_instance

log = logging.getLogger("vflbargain")

# task/data feature counts after preprocessing
EXPECTED_COUNTS = {"titanic": (10, 19), "credit": (9, 21), "adult": (52, 36)}


def _config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed_base"] = args.seed
    for key in ("agent", "setting", "repetitions", "workers"):
        if getattr(args, key, None) is not None:
            over[key] = getattr(args, key)
    return replace(cfg, **over) if over else cfg


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _config(args)
    res = run_experiment(cfg)
    paths = write_outputs(res, Path(args.out), transcripts=not args.no_transcripts)
    s = res.summary
    print(f"runs={s['n_runs']} successes={s['successes']} failure_rate={s['failure_rate']:.3f} "
          f"mean_net_profit={s['final']['net_profit']['mean']}")
    for name, p in paths.items():
        print(f"{name}: {p}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config(args)
    labels = [c.strip() for c in args.costs.split(",") if c.strip()] if args.costs else list(cfg.cost_sweep)
    for label in labels:
        CostModel.parse(label)
    results = run_sweep(cfg, labels)
    out = Path(args.out)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("cost", "successes", "failure_rate", "delta_g_mean", "payment_mean", "net_profit_mean",
                "task_cost_mean", "rounds_mean"))
    for label, res in results.items():
        write_outputs(res, out / label.replace(":", "_"), transcripts=not args.no_transcripts)
        s, f = res.summary, res.summary["final"]
        w.writerow((label, s["successes"], repr(s["failure_rate"]), f["delta_g"]["mean"], f["payment"]["mean"],
                    f["net_profit"]["mean"], f["task_cost"]["mean"], s["rounds"]["mean"]))
    (out / "sweep.csv").write_text(buf.getvalue(), encoding="utf-8")
    sys.stdout.write(buf.getvalue())
    return 0


def _load_instance(path: str):
    text = Path(path).read_text(encoding="utf-8")
    spec = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    if not isinstance(spec, dict):
        raise ConfigFileError(f"instance file {path} must hold a mapping")
    return instance_from_spec(spec)


def cmd_verify(args: argparse.Namespace) -> int:
    inst = _load_instance(args.instance)
    reports = verify_instance(inst, seed=args.seed or 0)
    body = {name: r.to_dict() for name, r in reports.items()}
    if args.equilibrium:
        body["equilibrium"] = exhaustive_equilibrium(inst, args.target).to_dict()
    text = dumps(body)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    failed = [n for n, r in reports.items() if not r.passed]
    for n in failed:
        log.error("verification failed: %s", n)
    return 1 if failed else 0


def cmd_datasets(args: argparse.Namespace) -> int:
    unknown = set(args.names) - set(BUILTIN)
    if unknown:
        raise DatasetError(f"unknown datasets {sorted(unknown)}; choose from {BUILTIN}")
    bad = 0
    for name in args.names or BUILTIN:
        want = EXPECTED_COUNTS[name]
        try:
            ds = load_builtin(name, args.data_dir)
        except DatasetError as exc:
            print(f"{name}: MISSING ({exc})")
            bad += 1
            continue
        got = (ds.d_t, ds.d_d)
        status = "ok" if got == want else "MISMATCH"
        bad += got != want
        print(f"{name}: rows={ds.n_rows} task={got[0]} data={got[1]} expected={want[0]}/{want[1]} {status}")
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vflbargain", description="Feature-trading bargaining simulator.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def experiment_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="YAML experiment config (defaults to the S1 instance)")
        p.add_argument("--seed", type=int, help="seed base, overriding the config")
        p.add_argument("--agent", choices=AGENTS)
        p.add_argument("--setting", choices=SETTINGS)
        p.add_argument("--repetitions", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out", default="out")
        p.add_argument("--no-transcripts", action="store_true", help="skip per-run transcript files")

    p = sub.add_parser("run", help="run a batch of sessions and write artifacts")
    experiment_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run one batch per cost model")
    experiment_args(p)
    p.add_argument("--costs", help="comma-separated cost labels, e.g. none,linear:0.1,exp:1.1")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="brute-force check the pricing results on a small instance")
    p.add_argument("--instance", required=True, help='JSON/YAML instance, e.g. {"instance": "s1"}')
    p.add_argument("--seed", type=int)
    p.add_argument("--equilibrium", action="store_true", help="also report the exhaustive optimum")
    p.add_argument("--target", type=float, help="fixed target gain for the exhaustive search")
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("datasets", help="check preprocessing feature counts of the built-in datasets")
    p.add_argument("names", nargs="*", help=f"subset of {', '.join(BUILTIN)}")
    p.add_argument("--data-dir")
    p.set_defaults(func=cmd_datasets)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigFileError, DatasetError, ValueError, KeyError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
