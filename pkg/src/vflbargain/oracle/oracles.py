"""Gain oracles: bundle -> relative performance improvement over the task-only model."""

from __future__ import annotations

import math
from typing import Iterable, Mapping, Optional, Protocol

import numpy as np

from ..market import FeatureBundle
from .datasets import Dataset
from .learners import accuracy, make_learner


class OracleError(ValueError):
    pass


class GainOracle(Protocol):
    @property
    def universe(self) -> frozenset[str]: ...

    def gain(self, bundle: FeatureBundle) -> float: ...


def relative_gain(M: float, M0: float) -> float:
    if M0 <= 0:
        raise OracleError(f"baseline performance must be positive, got {M0}")
    return (M - M0) / M0


class SyntheticOracle:
    """Gains from a lookup table (by bundle id) or from a saturating coverage rule.

    The rule is ``gmax * (1 - exp(-sum of member weights))``.
    """

    def __init__(self, table: Optional[Mapping[str, float]] = None,
                 weights: Optional[Mapping[str, float]] = None, gmax: float = 1.0) -> None:
        if (table is None) == (weights is None):
            raise OracleError("give exactly one of table or weights")
        self.table = dict(table) if table is not None else None
        self.weights = dict(weights) if weights is not None else None
        self.gmax = gmax
        if self.weights is not None and any(w < 0 or not math.isfinite(w) for w in self.weights.values()):
            raise OracleError("weights must be finite and non-negative")
        if self.table is not None and any(not math.isfinite(g) for g in self.table.values()):
            raise OracleError("table gains must be finite")

    @classmethod
    def from_table(cls, table: Mapping[str, float]) -> "SyntheticOracle":
        return cls(table=table)

    @classmethod
    def parametric(cls, weights: Mapping[str, float], gmax: float = 1.0) -> "SyntheticOracle":
        return cls(weights=weights, gmax=gmax)

    @property
    def universe(self) -> frozenset[str]:
        return frozenset(self.weights) if self.weights is not None else frozenset()

    def gain(self, bundle: FeatureBundle) -> float:
        if self.table is not None:
            try:
                return float(self.table[bundle.id])
            except KeyError:
                raise KeyError(f"no stored gain for bundle {bundle.id!r}") from None
        assert self.weights is not None
        unknown = bundle.features - self.weights.keys()
        if unknown:
            raise KeyError(f"unknown feature ids {sorted(unknown)}")
        total = math.fsum(self.weights[f] for f in sorted(bundle.features))
        return self.gmax * (1.0 - math.exp(-total))


class VflOracle:
    """Trains a learner on task features plus a bundle's columns and reports held-out gain.

    The task-only baseline is trained once; bundle gains are memoized by
    feature set, which matches seeded re-initialization every round.
    """

    def __init__(self, dataset: Dataset, learner_kind: str = "forest", test_ratio: float = 0.2,
                 seed: int = 0, learner_params: Optional[Mapping] = None) -> None:
        if not 0 < test_ratio < 1:
            raise OracleError("test_ratio must lie in (0, 1)")
        self.dataset = dataset
        self.learner_kind = learner_kind
        self.seed = seed
        self.learner_params = dict(learner_params or {})
        n = dataset.n_rows
        perm = np.random.default_rng(seed).permutation(n)
        n_test = max(1, int(round(test_ratio * n)))
        if n_test >= n:
            raise OracleError("dataset too small for a train/test split")
        self.test_idx, self.train_idx = np.sort(perm[:n_test]), np.sort(perm[n_test:])
        self._m0: Optional[float] = None
        self._cache: dict[frozenset[str], float] = {}
        self.train_calls = 0

    @property
    def universe(self) -> frozenset[str]:
        return frozenset(self.dataset.data_sources)

    def _fit_score(self, X: np.ndarray) -> float:
        y = self.dataset.labels
        self.train_calls += 1
        try:
            model = make_learner(self.learner_kind, seed=self.seed, **self.learner_params)
            model.fit(X[self.train_idx], y[self.train_idx])
            return accuracy(y[self.test_idx], model.predict(X[self.test_idx]))
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            raise OracleError(f"training failed: {exc}") from exc

    def baseline(self) -> float:
        if self._m0 is None:
            self._m0 = self._fit_score(self.dataset.task_features)
        return self._m0

    def performance(self, features: Iterable[str]) -> float:
        cols = self.dataset.data_columns(features)
        return self._fit_score(np.concatenate([self.dataset.task_features, cols], axis=1))

    def gain(self, bundle: FeatureBundle) -> float:
        key = bundle.features
        if key not in self._cache:
            unknown = key - self.universe
            if unknown:
                raise KeyError(f"unknown feature ids {sorted(unknown)}")
            self._cache[key] = relative_gain(self.performance(key), self.baseline())
        return self._cache[key]
