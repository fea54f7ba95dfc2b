"""Batch execution of bargaining sessions and metric aggregation."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Optional

import numpy as np

from ..market import BundleCatalog, TaskEconomics
from ..oracle.datasets import load_builtin
from ..oracle.oracles import SyntheticOracle, VflOracle
from ..protocol.engine import SessionConfig, SessionTranscript, run
from .config import ExperimentConfig
from .instances import dataset_catalog, instance_from_spec

FAIL = "fail"  # marker standing in for the unbounded loss of a failed transaction
Z95 = 1.96


@dataclass(frozen=True)
class World:
    """Catalog and gain table shared by every repetition of an experiment."""

    catalog: BundleCatalog
    gains: dict[str, float]
    target: float


def build_world(cfg: ExperimentConfig) -> World:
    spec = cfg.oracle
    if spec["kind"] == "synthetic":
        if "weights" in spec:
            oracle = SyntheticOracle.parametric(spec["weights"], float(spec.get("gmax", 1.0)))
            inst_spec = {k: v for k, v in spec.items() if k not in ("kind", "weights", "gmax")}
            inst = instance_from_spec(inst_spec)
            gains = {e.id: oracle.gain(e.bundle) for e in inst.catalog}
        else:
            inst = instance_from_spec({k: v for k, v in spec.items() if k != "kind"})
            gains = dict(inst.gains)
        catalog = inst.catalog
    else:
        ds = load_builtin(spec["dataset"], spec.get("data_dir"))
        catalog = dataset_catalog(ds.data_sources, int(spec.get("K", 32)), float(spec.get("alpha", 2.0)),
                                  float(spec.get("beta", 0.25)), int(spec.get("catalog_seed", 0)),
                                  bool(spec.get("include_full", True)))
        # retraining with a fixed seed is deterministic, so one evaluation per bundle serves all runs
        vfl = VflOracle(ds, spec.get("learner", "forest"), float(spec.get("test_ratio", 0.2)),
                        int(spec.get("seed", 0)), spec.get("learner_params"))
        gains = {e.id: vfl.gain(e.bundle) for e in catalog}
    target = max(gains.values()) if cfg.target == "max" else float(cfg.target)
    return World(catalog, gains, target)


def session_config(cfg: ExperimentConfig, world: World, rep: int) -> SessionConfig:
    return SessionConfig(
        econ=TaskEconomics(cfg.u, cfg.B), catalog=world.catalog, oracle=SyntheticOracle.from_table(world.gains),
        target=world.target, setting=cfg.setting, agent=cfg.agent, max_rounds=cfg.max_rounds, N=cfg.N,
        tol=cfg.tolerances(), task_cost=cfg.task_cost, data_cost=cfg.data_cost, seed=cfg.seed_base + rep,
        sample_count=cfg.sample_count, p_range=cfg.p_range, P0_range=cfg.P0_range, gamma=cfg.gamma,
        estimator=cfg.estimator, transport=cfg.transport, explore_untried=cfg.explore_untried,
    )


def _run_one(args: tuple[ExperimentConfig, World, int]) -> SessionTranscript:
    cfg, world, rep = args
    return run(session_config(cfg, world, rep))


def run_transcripts(cfg: ExperimentConfig, world: Optional[World] = None) -> list[SessionTranscript]:
    world = world or build_world(cfg)
    jobs = [(cfg, world, i) for i in range(cfg.repetitions)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


def mean_ci(values) -> dict[str, Any]:
    x = np.asarray([v for v in values if v is not None and math.isfinite(v)], dtype=float)
    n = len(x)
    if n == 0:
        return {"n": 0, "mean": None, "std": None, "ci_low": None, "ci_high": None}
    mean = float(x.mean())
    std = float(x.std(ddof=1)) if n > 1 else 0.0
    half = Z95 * std / math.sqrt(n) if n > 1 else 0.0
    return {"n": n, "mean": mean, "std": std, "ci_low": mean - half, "ci_high": mean + half}


def summarize(cfg: ExperimentConfig, world: World, transcripts: list[SessionTranscript]) -> dict[str, Any]:
    outcomes = [t.outcome for t in transcripts]
    ok = [o for o in outcomes if o.success]
    runs = []
    for i, (t, o) in enumerate(zip(transcripts, outcomes)):
        runs.append({
            "rep": i, "seed": cfg.seed_base + i, "kind": o.kind, "case": o.case, "rounds": o.rounds,
            "bundle_id": o.bundle_id, "delta_g": o.delta_g if o.success else FAIL,
            "net_profit": o.net_profit if o.success else FAIL, "payment": o.payment if o.success else FAIL,
        })
    final = {}
    for key in ("p", "P0", "Ph"):
        idx = ("p", "P0", "Ph").index(key)
        final[key] = mean_ci([o.quote[idx] for o in ok if o.quote])
    for key in ("dp", "dP0", "delta_g", "net_profit", "payment", "task_cost", "data_cost"):
        final[key] = mean_ci([getattr(o, key) for o in ok])
    max_r = max((len(t.rounds) for t in transcripts), default=0)
    per_round = []
    for r in range(max_r):
        recs = [t.rounds[r] for t in transcripts if len(t.rounds) > r]
        per_round.append({
            "round": r + 1,
            "net_profit": mean_ci([x.net_profit for x in recs]),
            "payment": mean_ci([x.payment for x in recs]),
            "delta_g": mean_ci([x.delta_g for x in recs]),
        })
    cases: dict[str, int] = {}
    for o in outcomes:
        cases[f"{o.kind}:{o.case}"] = cases.get(f"{o.kind}:{o.case}", 0) + 1
    rounds = [o.rounds for o in outcomes]
    return {
        "config": cfg.to_dict(),
        "target": world.target,
        "n_runs": len(outcomes),
        "successes": len(ok),
        "failure_rate": 1.0 - len(ok) / len(outcomes) if outcomes else None,
        "outcome_cases": cases,
        "rounds": {**mean_ci(rounds), "histogram": {str(k): rounds.count(k) for k in sorted(set(rounds))}},
        "rounds_to_agreement": mean_ci([o.rounds for o in ok]),
        "final": final,
        "per_round": per_round,
        "runs": runs,
    }


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    world: World
    transcripts: list[SessionTranscript]
    summary: dict[str, Any]


def run_experiment(cfg: ExperimentConfig, world: Optional[World] = None) -> ExperimentResult:
    world = world or build_world(cfg)
    ts = run_transcripts(cfg, world)
    return ExperimentResult(cfg, world, ts, summarize(cfg, world, ts))


def run_sweep(cfg: ExperimentConfig, costs=None) -> dict[str, ExperimentResult]:
    """One experiment per cost label, all on the same catalog and seeds."""
    world = build_world(cfg)
    return {label: run_experiment(cfg.with_cost(label), world) for label in (costs or cfg.cost_sweep)}


def compare_agents(cfg: ExperimentConfig, agents=("strategic", "increase_price", "random_bundle")
                   ) -> dict[str, ExperimentResult]:
    world = build_world(cfg)
    return {a: run_experiment(replace(cfg, agent=a), world) for a in agents}
