"""Online gain regressors used when gains are not known in advance.

``PriceGainEstimator`` (task side) maps a quote to a predicted gain and
``BundleGainEstimator`` (data side) maps a bundle to a predicted gain via
the mean of per-feature embeddings. Both are small tanh MLPs trained by
plain SGD on squared error with global-norm gradient clipping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .market import FeatureBundle, QuotedPrice


@dataclass(frozen=True)
class TrainingSample:
    input: Union[QuotedPrice, FeatureBundle, frozenset]
    target: float
    round: int = 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.target):
            raise ValueError(f"training target must be finite, got {self.target}")


class MLP:
    """Fully connected tanh network with a linear, zero-initialized output."""

    def __init__(self, n_in: int, hidden: Sequence[int] = (64, 32, 16), seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        sizes = [n_in, *hidden, 1]
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == len(sizes) - 2
            w = np.zeros((a, b)) if last else rng.normal(0.0, 1.0 / math.sqrt(a), size=(a, b))
            self.weights.append(w)
            self.biases.append(np.zeros(b))

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Outputs of shape (batch,) and the per-layer activations."""
        acts = [x]
        h = x
        n = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if i == n - 1 else np.tanh(z)
            acts.append(h)
        return h[:, 0], acts

    def backward(self, acts: list[np.ndarray], dy: np.ndarray
                 ) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
        """Gradients of sum(dy * y) w.r.t. weights, biases and the input."""
        n = len(self.weights)
        gw: list[np.ndarray] = [np.empty(0)] * n
        gb: list[np.ndarray] = [np.empty(0)] * n
        delta = dy[:, None]
        for i in range(n - 1, -1, -1):
            gw[i] = acts[i].T @ delta
            gb[i] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
            if i > 0:
                delta = delta * (1.0 - acts[i] ** 2)
        return gw, gb, delta

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.params()])

    def set_flat(self, v: np.ndarray) -> None:
        i = 0
        for a in self.params():
            a[...] = v[i:i + a.size].reshape(a.shape)
            i += a.size
        if i != v.size:
            raise ValueError(f"parameter vector has {v.size} entries, expected {i}")


def _clip(grads: list[np.ndarray], max_norm: float) -> list[np.ndarray]:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if not math.isfinite(norm):
        return [np.zeros_like(g) for g in grads]
    if norm > max_norm:
        scale = max_norm / norm
        return [g * scale for g in grads]
    return grads


class _OnlineRegressor:
    """Shared replay buffer and training schedule."""

    def __init__(self, lr: float, clip_norm: float, updates_per_round: int, seed: int) -> None:
        if lr <= 0 or clip_norm <= 0 or updates_per_round < 1:
            raise ValueError("lr, clip_norm and updates_per_round must be positive")
        self.lr = lr
        self.clip_norm = clip_norm
        self.updates_per_round = updates_per_round
        self.buffer: list[TrainingSample] = []
        self._rng = np.random.default_rng([seed, 7])

    def update(self, sample: TrainingSample) -> float:
        raise NotImplementedError

    def predict_sample(self, sample: TrainingSample) -> float:
        raise NotImplementedError

    def observe(self, sample: TrainingSample) -> float:
        """Store ``sample`` and run the per-round resampled updates; return the mean pre-step loss."""
        self.buffer.append(sample)
        idx = self._rng.integers(0, len(self.buffer), size=self.updates_per_round)
        losses = [self.update(self.buffer[i]) for i in idx.tolist()]
        return float(np.mean(losses))

    def buffer_mse(self) -> float:
        if not self.buffer:
            return float("nan")
        errs = [(self.predict_sample(s) - s.target) ** 2 for s in self.buffer]
        return float(np.mean(errs))


class PriceGainEstimator(_OnlineRegressor):
    """Task-side f: (p, P0, Ph) -> predicted gain, inputs scaled by (u, B, B)."""

    def __init__(self, u: float, B: float, hidden: Sequence[int] = (64, 32, 16), lr: float = 1e-2,
                 clip_norm: float = 1.0, updates_per_round: int = 10, seed: int = 0) -> None:
        super().__init__(lr, clip_norm, updates_per_round, seed)
        self.scale = np.array([u, B, B], dtype=float)
        self.net = MLP(3, hidden, seed)

    def _x(self, qs: Iterable[QuotedPrice]) -> np.ndarray:
        return np.array([q.as_tuple() for q in qs], dtype=float).reshape(-1, 3) / self.scale

    def predict(self, q: QuotedPrice) -> float:
        return float(self.net.forward(self._x([q]))[0][0])

    def predict_many(self, qs: Sequence[QuotedPrice]) -> np.ndarray:
        if len(qs) == 0:
            return np.zeros(0)
        return self.net.forward(self._x(qs))[0]

    def predict_sample(self, sample: TrainingSample) -> float:
        return self.predict(sample.input)  # type: ignore[arg-type]

    def loss_and_grads(self, sample: TrainingSample):
        y, acts = self.net.forward(self._x([sample.input]))  # type: ignore[list-item]
        err = y - sample.target
        gw, gb, _ = self.net.backward(acts, 2.0 * err)
        return float(err[0] ** 2), gw, gb

    def update(self, sample: TrainingSample) -> float:
        loss, gw, gb = self.loss_and_grads(sample)
        grads = _clip([*gw, *gb], self.clip_norm)
        for p, g in zip(self.net.params(), grads):
            p -= self.lr * g
        return loss

    def snapshot(self) -> np.ndarray:
        return self.net.flat().copy()

    def restore(self, v: np.ndarray) -> None:
        self.net.set_flat(np.asarray(v, dtype=float))


class BundleGainEstimator(_OnlineRegressor):
    """Data-side g: bundle -> predicted gain through mean feature embeddings."""

    def __init__(self, feature_ids: Iterable[str], dim: int = 16, hidden: Sequence[int] = (64, 32, 16),
                 lr: float = 1e-2, clip_norm: float = 1.0, updates_per_round: int = 10,
                 seed: int = 0, init_scale: float = 0.5) -> None:
        super().__init__(lr, clip_norm, updates_per_round, seed)
        self.feature_ids = sorted(set(feature_ids))
        if not self.feature_ids:
            raise ValueError("need at least one feature id")
        self.index = {f: i for i, f in enumerate(self.feature_ids)}
        rng = np.random.default_rng([seed, 1])
        self.embeddings = rng.normal(0.0, init_scale, size=(len(self.feature_ids), dim))
        self.net = MLP(dim, hidden, seed)

    def _rows(self, features: Iterable[str]) -> np.ndarray:
        try:
            rows = sorted({self.index[f] for f in features})
        except KeyError as exc:
            raise KeyError(f"unknown feature id {exc.args[0]!r}") from None
        if not rows:
            raise ValueError("empty bundle")
        return np.array(rows)

    @staticmethod
    def _features(x) -> Iterable[str]:
        return x.features if isinstance(x, FeatureBundle) else x

    def represent(self, bundle) -> np.ndarray:
        return self.embeddings[self._rows(self._features(bundle))].mean(axis=0)

    def predict(self, bundle) -> float:
        return float(self.net.forward(self.represent(bundle)[None, :])[0][0])

    def predict_sample(self, sample: TrainingSample) -> float:
        return self.predict(sample.input)

    def loss_and_grads(self, sample: TrainingSample):
        rows = self._rows(self._features(sample.input))
        x = self.embeddings[rows].mean(axis=0)[None, :]
        y, acts = self.net.forward(x)
        err = y - sample.target
        gw, gb, dx = self.net.backward(acts, 2.0 * err)
        # each member row receives an equal share of the input gradient
        ge = np.repeat(dx / len(rows), len(rows), axis=0)
        return float(err[0] ** 2), gw, gb, rows, ge

    def update(self, sample: TrainingSample) -> float:
        loss, gw, gb, rows, ge = self.loss_and_grads(sample)
        grads = _clip([*gw, *gb, ge], self.clip_norm)
        for p, g in zip(self.net.params(), grads):
            p -= self.lr * g
        self.embeddings[rows] -= self.lr * grads[-1]
        return loss

    def snapshot(self) -> np.ndarray:
        return np.concatenate([self.net.flat(), self.embeddings.ravel()])

    def restore(self, v: np.ndarray) -> None:
        v = np.asarray(v, dtype=float)
        n = self.net.flat().size
        self.net.set_flat(v[:n])
        if v.size - n != self.embeddings.size:
            raise ValueError("snapshot does not match the embedding table")
        self.embeddings[...] = v[n:].reshape(self.embeddings.shape)


def save_snapshot(est: Union[PriceGainEstimator, BundleGainEstimator], path: Union[str, Path]) -> None:
    """Write the flat parameter vector as text, one value per line."""
    np.savetxt(path, est.snapshot(), fmt="%.17g")


def load_snapshot(est: Union[PriceGainEstimator, BundleGainEstimator], path: Union[str, Path]) -> None:
    est.restore(np.loadtxt(path, ndmin=1))
