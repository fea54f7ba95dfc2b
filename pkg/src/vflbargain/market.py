"""Domain types and pricing arithmetic of the two-party feature market.

Money and gain are plain floats. Nothing in this module hides a tolerance:
every threshold comparison elsewhere in the package receives its epsilon
explicitly through :class:`Tolerances`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Sequence


class MarketError(ValueError):
    """Raised when a market value violates its invariants."""


@dataclass(frozen=True)
class QuotedPrice:
    """The task party's offer: payment rate, base payment, highest payment."""

    p: float
    P0: float
    Ph: float

    def __post_init__(self) -> None:
        for name in ("p", "P0", "Ph"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (math.isfinite(self.p) and math.isfinite(self.P0) and math.isfinite(self.Ph)):
            raise MarketError(f"non-finite quote {self}")
        if self.p <= 0:
            raise MarketError(f"payment rate must be positive, got {self.p}")
        if self.P0 < 0:
            raise MarketError(f"base payment must be non-negative, got {self.P0}")
        if self.Ph < self.P0:
            raise MarketError(f"highest payment {self.Ph} below base payment {self.P0}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p, self.P0, self.Ph)


@dataclass(frozen=True)
class ReservedPrice:
    p_l: float
    P_l: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "p_l", float(self.p_l))
        object.__setattr__(self, "P_l", float(self.P_l))
        for v in (self.p_l, self.P_l):
            if not math.isfinite(v) or v < 0:
                raise MarketError(f"reserved price components must be finite and >= 0: {self}")

    def admits(self, q: QuotedPrice) -> bool:
        """True when ``q`` pays at least this reserved rate and base."""
        return self.p_l <= q.p and self.P_l <= q.P0


@dataclass(frozen=True)
class FeatureBundle:
    id: str
    features: frozenset[str]

    def __init__(self, id: str, features: Iterable[str]) -> None:
        object.__setattr__(self, "id", str(id))
        object.__setattr__(self, "features", frozenset(features))
        if not self.features:
            raise MarketError(f"bundle {self.id!r} has no features")

    def __len__(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class CatalogEntry:
    bundle: FeatureBundle
    reserved: ReservedPrice

    @property
    def id(self) -> str:
        return self.bundle.id


class BundleCatalog(Sequence[CatalogEntry]):
    """Ordered, id-unique collection of sellable bundles."""

    def __init__(self, entries: Iterable[CatalogEntry | tuple[FeatureBundle, ReservedPrice]],
                 universe: Iterable[str] | None = None) -> None:
        items = [e if isinstance(e, CatalogEntry) else CatalogEntry(*e) for e in entries]
        if not items:
            raise MarketError("catalog needs at least one bundle")
        ids = [e.id for e in items]
        if len(set(ids)) != len(ids):
            raise MarketError(f"duplicate bundle ids in catalog: {ids}")
        if universe is not None:
            universe = frozenset(universe)
            for e in items:
                extra = e.bundle.features - universe
                if extra:
                    raise MarketError(f"bundle {e.id!r} uses unknown features {sorted(extra)}")
        self._entries = tuple(items)
        self._index = {e.id: e for e in items}

    def __getitem__(self, i):  # type: ignore[override]
        if isinstance(i, slice):
            return self._entries[i]
        return self._entries[i]

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[CatalogEntry]:
        return iter(self._entries)

    def __repr__(self) -> str:
        return f"BundleCatalog({[e.id for e in self._entries]})"

    def get(self, bundle_id: str) -> CatalogEntry:
        try:
            return self._index[bundle_id]
        except KeyError:
            raise KeyError(f"unknown bundle id {bundle_id!r}") from None

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self._entries]

    @property
    def features(self) -> frozenset[str]:
        out: set[str] = set()
        for e in self._entries:
            out |= e.bundle.features
        return frozenset(out)


@dataclass(frozen=True)
class TaskEconomics:
    """Utility per unit gain ``u`` and budget ``B`` of the task party."""

    u: float
    B: float

    def __post_init__(self) -> None:
        if not (self.u > 0 and math.isfinite(self.u)):
            raise MarketError(f"utility rate must be positive, got {self.u}")
        if not (self.B > 0 and math.isfinite(self.B)):
            raise MarketError(f"budget must be positive, got {self.B}")

    def admits(self, q: QuotedPrice) -> bool:
        return q.p < self.u and q.Ph <= self.B


class CostKind(str, Enum):
    NONE = "none"
    CONSTANT = "constant"
    LINEAR = "linear"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class CostModel:
    """Cumulative bargaining cost as a function of the round index.

    ``a`` is the constant value, linear slope, or exponential base depending
    on ``kind``. ``party_scale`` multiplies the evaluated cost.
    """

    kind: CostKind = CostKind.NONE
    a: float = 0.0
    party_scale: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", CostKind(self.kind))
        if self.party_scale <= 0:
            raise MarketError("party_scale must be positive")
        if self.kind in (CostKind.CONSTANT, CostKind.LINEAR) and self.a < 0:
            raise MarketError(f"{self.kind.value} cost needs a >= 0")
        if self.kind is CostKind.EXPONENTIAL and self.a < 1:
            # a^T must be non-decreasing in T
            raise MarketError("exponential cost needs base a >= 1")

    @classmethod
    def none(cls) -> "CostModel":
        return cls(CostKind.NONE)

    @classmethod
    def constant(cls, c: float, party_scale: float = 1.0) -> "CostModel":
        return cls(CostKind.CONSTANT, c, party_scale)

    @classmethod
    def linear(cls, a: float, party_scale: float = 1.0) -> "CostModel":
        return cls(CostKind.LINEAR, a, party_scale)

    @classmethod
    def exponential(cls, a: float, party_scale: float = 1.0) -> "CostModel":
        return cls(CostKind.EXPONENTIAL, a, party_scale)

    @property
    def active(self) -> bool:
        return self.kind is not CostKind.NONE

    def with_scale(self, party_scale: float) -> "CostModel":
        return CostModel(self.kind, self.a, party_scale)

    def label(self) -> str:
        if self.kind is CostKind.NONE:
            return "none"
        return f"{self.kind.value}:{self.a:g}"

    @classmethod
    def parse(cls, text: str, party_scale: float = 1.0) -> "CostModel":
        """Parse ``none``, ``constant:c``, ``linear:a`` or ``exp:a``."""
        text = text.strip().lower()
        if text in ("none", ""):
            return cls.none()
        kind, _, value = text.partition(":")
        kind = {"exp": "exponential", "lin": "linear", "const": "constant"}.get(kind, kind)
        try:
            return cls(CostKind(kind), float(value), party_scale)
        except ValueError as exc:
            raise MarketError(f"cannot parse cost model {text!r}: {exc}") from None


@dataclass(frozen=True)
class Tolerances:
    eps_d: float = 1e-3
    eps_t: float = 1e-3
    eps_dc: float = 0.0
    eps_tc: float = 0.0

    def __post_init__(self) -> None:
        for name in ("eps_d", "eps_t", "eps_dc", "eps_tc"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise MarketError(f"{name} must be finite and >= 0, got {v}")

    @classmethod
    def uniform(cls, eps: float, eps_c: float = 0.0) -> "Tolerances":
        return cls(eps, eps, eps_c, eps_c)


def payment(q: QuotedPrice, dg: float) -> float:
    """Payment received by the data party for realized gain ``dg``."""
    return min(max(q.P0, q.P0 + q.p * dg), q.Ph)


def task_net_profit(econ: TaskEconomics, q: QuotedPrice, dg: float) -> float:
    return econ.u * dg - payment(q, dg)


def data_objective_gap(q: QuotedPrice, dg: float) -> float:
    """Distance between the best attainable payment and what ``dg`` earns."""
    return abs(q.Ph - max(q.P0, q.P0 + q.p * dg))


def target_gain(q: QuotedPrice) -> float:
    """Gain at which the payment saturates at ``Ph``."""
    return (q.Ph - q.P0) / q.p


def breakeven_gain(econ: TaskEconomics, q: QuotedPrice) -> float:
    """Gain below which the task party's net profit is negative."""
    if econ.u <= q.p:
        raise MarketError(f"utility rate u={econ.u} must exceed payment rate p={q.p}")
    return q.P0 / (econ.u - q.p)


def quote_for_target(p: float, P0: float, dg_star: float) -> QuotedPrice:
    """Build ``(p, P0, Ph)`` whose target gain is ``dg_star``.

    ``Ph`` starts at ``P0 + p*dg_star`` and is moved by single ulps to the
    smallest value whose computed target gain is ``>= dg_star``. Exact
    equality holds whenever some float achieves it.
    """
    if dg_star < 0:
        raise MarketError(f"target gain must be non-negative, got {dg_star}")
    Ph = P0 + p * dg_star
    for _ in range(64):
        if (Ph - P0) / p >= dg_star:
            break
        Ph = math.nextafter(Ph, math.inf)
    for _ in range(64):
        lower = math.nextafter(Ph, -math.inf)
        if lower < P0 or (lower - P0) / p < dg_star:
            break
        Ph = lower
    return QuotedPrice(p, P0, Ph)


def eval_cost(m: CostModel, T: int) -> float:
    if T < 0:
        raise MarketError(f"round index must be >= 0, got {T}")
    if m.kind is CostKind.NONE:
        base = 0.0
    elif m.kind is CostKind.CONSTANT:
        base = m.a
    elif m.kind is CostKind.LINEAR:
        base = m.a * T
    else:
        base = m.a ** T
    return base * m.party_scale


def net_with_cost(role: str, base_revenue: float, m: CostModel, T: int) -> float:
    """Revenue of ``role`` ("task" or "data") after subtracting its cost at round T."""
    if role not in ("task", "data"):
        raise MarketError(f"role must be 'task' or 'data', got {role!r}")
    return base_revenue - eval_cost(m, T)
