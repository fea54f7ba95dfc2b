"""Experiment configuration read from YAML.

Example::

    agent: strategic            # strategic | increase_price | random_bundle
    setting: perfect            # perfect | imperfect
    repetitions: 100
    seed_base: 0
    target: 0.1                 # or "max" for the largest catalog gain
    economics: {u: 50, B: 10}
    tolerances: {eps_d: 1.0e-3, eps_t: 1.0e-3}
    cost: none                  # applied to both parties; or costs: {task: .., data: ..}
    cost_sweep: [none, linear:0.1, linear:1, exp:1.01, exp:1.1]
    initial: {p_range: [5, 15], P0_range: [0.5, 2]}
    explore_untried: false     # imperfect only: offer unobserved bundles first while exploring
    oracle:
      kind: synthetic           # synthetic | dataset
      instance: s1              # or bundles: [{id, gain, p_l, P_l, features}]
    # oracle: {kind: dataset, dataset: titanic, learner: forest, K: 32, alpha: 2, beta: 0.25}
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import yaml

from ..market import CostModel, Tolerances
from ..protocol.engine import AGENTS, SETTINGS, EstimatorConfig

# published defaults: tolerance per dataset, and the looser one for estimated gains
DATASET_TOLERANCE = {"titanic": 1e-3, "credit": 1e-5, "adult": 5e-4}
IMPERFECT_TOLERANCE = {"titanic": 5e-2}
DEFAULT_SWEEP = ("none", "linear:0.1", "linear:1", "exp:1.01", "exp:1.1")


class ConfigFileError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    agent: str = "strategic"
    setting: str = "perfect"
    repetitions: int = 100
    seed_base: int = 0
    target: Union[float, str] = 0.1
    u: float = 50.0
    B: float = 10.0
    tol: Optional[Tolerances] = None
    task_cost: CostModel = field(default_factory=CostModel.none)
    data_cost: CostModel = field(default_factory=CostModel.none)
    cost_sweep: tuple[str, ...] = DEFAULT_SWEEP
    max_rounds: int = 500
    N: int = 100
    sample_count: int = 64
    p_range: Optional[tuple[float, float]] = None
    P0_range: Optional[tuple[float, float]] = None
    gamma: float = 1.1
    oracle: dict[str, Any] = field(default_factory=lambda: {"kind": "synthetic", "instance": "s1"})
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    transport: str = "memory"
    explore_untried: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ConfigFileError("repetitions must be >= 1")
        if self.agent not in AGENTS:
            raise ConfigFileError(f"agent must be one of {AGENTS}")
        if self.setting not in SETTINGS:
            raise ConfigFileError(f"setting must be one of {SETTINGS}")
        if self.oracle.get("kind") not in ("synthetic", "dataset"):
            raise ConfigFileError("oracle.kind must be synthetic or dataset")
        if not (isinstance(self.target, (int, float)) or self.target == "max"):
            raise ConfigFileError("target must be a number or 'max'")

    @property
    def dataset(self) -> Optional[str]:
        return self.oracle.get("dataset") if self.oracle.get("kind") == "dataset" else None

    def tolerances(self) -> Tolerances:
        """Explicit tolerances, else the published default for the dataset and setting."""
        if self.tol is not None:
            return self.tol
        eps = 1e-3
        if self.dataset:
            eps = DATASET_TOLERANCE.get(self.dataset, eps)
            if self.setting == "imperfect":
                eps = IMPERFECT_TOLERANCE.get(self.dataset, eps)
        return Tolerances(eps_d=eps, eps_t=eps)

    def with_cost(self, label: str) -> "ExperimentConfig":
        m = CostModel.parse(label)
        return replace(self, task_cost=m, data_cost=m)

    def to_dict(self) -> dict[str, Any]:
        tol = self.tolerances()
        return {
            "agent": self.agent, "setting": self.setting, "repetitions": self.repetitions,
            "seed_base": self.seed_base, "target": self.target,
            "economics": {"u": self.u, "B": self.B},
            "tolerances": {"eps_d": tol.eps_d, "eps_t": tol.eps_t, "eps_dc": tol.eps_dc, "eps_tc": tol.eps_tc},
            "costs": {"task": self.task_cost.label(), "data": self.data_cost.label()},
            "cost_sweep": list(self.cost_sweep), "max_rounds": self.max_rounds, "N": self.N,
            "sample_count": self.sample_count,
            "initial": {"p_range": list(self.p_range) if self.p_range else None,
                        "P0_range": list(self.P0_range) if self.P0_range else None},
            "gamma": self.gamma, "oracle": dict(self.oracle),
            "estimator": {f.name: getattr(self.estimator, f.name) for f in fields(self.estimator)},
            "transport": self.transport, "explore_untried": self.explore_untried,
        }


def _pair(v) -> Optional[tuple[float, float]]:
    if v is None:
        return None
    if len(v) != 2:
        raise ConfigFileError(f"expected a [low, high] pair, got {v}")
    return (float(v[0]), float(v[1]))


def config_from_dict(d: Mapping[str, Any]) -> ExperimentConfig:
    d = dict(d or {})
    known = {"agent", "setting", "repetitions", "seed_base", "target", "economics", "u", "B", "tolerances",
             "cost", "costs", "cost_sweep", "max_rounds", "N", "sample_count", "initial", "gamma", "oracle",
             "estimator", "transport", "workers", "explore_untried"}
    unknown = set(d) - known
    if unknown:
        raise ConfigFileError(f"unknown config keys {sorted(unknown)}")
    econ = d.get("economics", {})
    kw: dict[str, Any] = {}
    for k in ("agent", "setting", "transport"):
        if k in d:
            kw[k] = str(d[k])
    for k in ("repetitions", "seed_base", "max_rounds", "N", "sample_count", "workers"):
        if k in d:
            kw[k] = int(d[k])
    if "explore_untried" in d:
        kw["explore_untried"] = bool(d["explore_untried"])
    if "gamma" in d:
        kw["gamma"] = float(d["gamma"])
    if "target" in d:
        kw["target"] = d["target"] if d["target"] == "max" else float(d["target"])
    kw["u"] = float(econ.get("u", d.get("u", 50.0)))
    kw["B"] = float(econ.get("B", d.get("B", 10.0)))
    if "tolerances" in d:
        t = d["tolerances"]
        if isinstance(t, (int, float)):
            kw["tol"] = Tolerances.uniform(float(t))
        else:
            kw["tol"] = Tolerances(**{k: float(v) for k, v in t.items()})
    if "cost" in d:
        m = CostModel.parse(str(d["cost"]))
        kw["task_cost"] = kw["data_cost"] = m
    if "costs" in d:
        c = d["costs"]
        kw["task_cost"] = CostModel.parse(str(c.get("task", "none")))
        kw["data_cost"] = CostModel.parse(str(c.get("data", "none")))
    if "cost_sweep" in d:
        kw["cost_sweep"] = tuple(str(x) for x in d["cost_sweep"])
    init = d.get("initial", {})
    kw["p_range"] = _pair(init.get("p_range"))
    kw["P0_range"] = _pair(init.get("P0_range"))
    if "oracle" in d:
        kw["oracle"] = dict(d["oracle"])
    if "estimator" in d:
        e = dict(d["estimator"])
        if "hidden" in e:
            e["hidden"] = tuple(int(h) for h in e["hidden"])
        kw["estimator"] = EstimatorConfig(**e)
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigFileError(str(exc)) from None


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigFileError(f"cannot read config {path}: {exc}") from None
    return config_from_dict(data or {})
