"""Non-strategic comparison agents.

Increase Price replaces the task party's requote with a fixed growth of all
three price components. Random Bundle replaces the data party's choice with a
uniform draw over the affordable bundles and never closes the deal itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market import BundleCatalog, QuotedPrice, TaskEconomics
from .strategy import (
    BreakdownFail,
    ContinueWithBundle,
    Decision,
    QuoteExhausted,
    TaskState,
    filter_affordable,
)


@dataclass(frozen=True)
class IncreasePriceState:
    gamma: float = 1.1

    def __post_init__(self) -> None:
        if not self.gamma > 1:
            raise ValueError(f"growth factor must exceed 1, got {self.gamma}")


def increase_price_requote(s: IncreasePriceState, q: QuotedPrice, econ: TaskEconomics) -> QuotedPrice:
    """Scale ``q`` by ``gamma`` and clip to (u, B, B)."""
    u, B = econ.u, econ.B
    if q.p >= u and q.P0 >= B and q.Ph >= B:
        raise QuoteExhausted(f"quote {q} already at the caps u={u}, B={B}")
    p = min(s.gamma * q.p, u)
    P0 = min(s.gamma * q.P0, B)
    Ph = max(min(s.gamma * q.Ph, B), P0)
    return QuotedPrice(p, P0, Ph)


def increase_price_requoter(s: IncreasePriceState):
    """Adapter with the requote signature used by the task decision."""
    def requote(task: TaskState, T: int) -> QuotedPrice:
        assert task.current_quote is not None
        return increase_price_requote(s, task.current_quote, task.econ)
    return requote


@dataclass(frozen=True)
class RandomBundleState:
    seed: int = 0


def random_bundle_offer(s: RandomBundleState, catalog: BundleCatalog, q: QuotedPrice,
                        T: int = 1) -> Decision:
    affordable = filter_affordable(catalog, q)
    if not affordable:
        return BreakdownFail("1", "no bundle affordable at the quoted price")
    rng = np.random.default_rng([s.seed, T, 1])
    return ContinueWithBundle(affordable[int(rng.integers(len(affordable)))].id)
