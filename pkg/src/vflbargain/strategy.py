"""Decision logic of both parties.

Termination cases are numbered ``"1"``..``"6"`` for the perfect-information
game and ``"I"``..``"VII"`` for the estimated-gain game. Every function here
is pure: randomness comes from generators seeded by ``(rng_seed, round)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .market import (
    BundleCatalog,
    CatalogEntry,
    CostModel,
    MarketError,
    QuotedPrice,
    ReservedPrice,
    TaskEconomics,
    Tolerances,
    eval_cost,
    payment,
    quote_for_target,
    target_gain,
)


class QuoteExhausted(RuntimeError):
    """No admissible quote is left between the previous quote and the ceilings."""


class InfeasibleConfiguration(ValueError):
    """The task party's constraints admit no quote at all."""


@dataclass(frozen=True)
class ContinueWithQuote:
    quote: QuotedPrice


@dataclass(frozen=True)
class ContinueWithBundle:
    # None: nothing affordable, but exploration keeps the session alive
    bundle_id: Optional[str]


@dataclass(frozen=True)
class AcceptSuccess:
    # set when the data party closes the deal by offering this bundle
    bundle_id: Optional[str] = None
    case: str = ""


@dataclass(frozen=True)
class BreakdownFail:
    case: str
    reason: str


Decision = Union[ContinueWithQuote, ContinueWithBundle, AcceptSuccess, BreakdownFail]


@dataclass(frozen=True)
class TaskState:
    econ: TaskEconomics
    target: float
    current_quote: Optional[QuotedPrice] = None
    tol: Tolerances = field(default_factory=Tolerances)
    cost: CostModel = field(default_factory=CostModel.none)
    sample_count: int = 64
    rng_seed: int = 0
    p_range: Optional[tuple[float, float]] = None
    P0_range: Optional[tuple[float, float]] = None
    max_redraws: int = 1000
    # first quote of the session; imperfect-information candidates dominate it
    anchor: Optional[QuotedPrice] = None

    def __post_init__(self) -> None:
        if not self.target > 0:
            raise InfeasibleConfiguration(f"target gain must be positive, got {self.target}")
        if self.sample_count < 1:
            raise InfeasibleConfiguration("sample_count must be >= 1")

    def with_quote(self, q: QuotedPrice) -> "TaskState":
        return replace(self, current_quote=q, anchor=self.anchor or q)

    @property
    def initial_p_range(self) -> tuple[float, float]:
        return self.p_range or (0.1 * self.econ.u, 0.3 * self.econ.u)

    @property
    def initial_P0_range(self) -> tuple[float, float]:
        return self.P0_range or (0.05 * self.econ.B, 0.2 * self.econ.B)


@dataclass(frozen=True)
class DataState:
    catalog: BundleCatalog
    known_gains: Optional[Mapping[str, float]] = None
    tol: Tolerances = field(default_factory=Tolerances)
    cost: CostModel = field(default_factory=CostModel.none)

    def gain_of(self, bundle_id: str) -> float:
        if self.known_gains is None:
            raise MarketError("gains are not known in this setting")
        return self.known_gains[bundle_id]


def round_rng(seed: int, T: int) -> np.random.Generator:
    return np.random.default_rng([seed, T])


def filter_affordable(catalog: Sequence[CatalogEntry], q: QuotedPrice) -> list[CatalogEntry]:
    return [e for e in catalog if e.reserved.admits(q)]


def select_from_below(entries: Sequence[CatalogEntry], gains: Sequence[float],
                      t: float) -> Optional[int]:
    """Index of the entry whose gain is closest to ``t`` without exceeding it."""
    best = None
    for i, (e, g) in enumerate(zip(entries, gains)):
        gap = t - g
        if gap < 0:
            continue
        if best is None or (gap, e.id) < (t - gains[best], entries[best].id):
            best = i
    return best


def _argext(entries: Sequence[CatalogEntry], gains: Sequence[float], largest: bool) -> int:
    sign = -1.0 if largest else 1.0
    return min(range(len(entries)), key=lambda i: (sign * gains[i], entries[i].id))


def select_bundle_perfect(affordable: Sequence[CatalogEntry],
                          gains: Sequence[float], t: float) -> int:
    i = select_from_below(affordable, gains, t)
    if i is None:
        # every affordable bundle overshoots the target
        i = _argext(affordable, gains, largest=True)
    return i


def reference_bundle(s: DataState, q: QuotedPrice) -> tuple[float, ReservedPrice]:
    """Gain and reserved price of the catalog bundle closest to the target from below.

    Falls back to the target itself with a zero reserved price when every
    bundle overshoots.
    """
    t = target_gain(q)
    entries = list(s.catalog)
    gains = [s.gain_of(e.id) for e in entries]
    i = select_from_below(entries, gains, t)
    if i is None:
        return t, ReservedPrice(0.0, 0.0)
    return gains[i], entries[i].reserved


def data_accept_with_cost(s: DataState, q: QuotedPrice, selected_gain: float,
                          best_gain: float, T: int,
                          best_reserved: ReservedPrice = ReservedPrice(0.0, 0.0)) -> bool:
    """Whether taking the current round beats a conservative next-round payment."""
    lhs = q.P0 + q.p * selected_gain - eval_cost(s.cost, T)
    rhs = (max(best_reserved.P_l, q.P0) + max(best_reserved.p_l, q.p) * best_gain
           - eval_cost(s.cost, T + 1) - s.tol.eps_dc)
    return lhs >= rhs


def task_accept_with_cost(s: TaskState, q: QuotedPrice, realized: float, T: int) -> bool:
    u = s.econ.u
    lhs = u * realized - (q.P0 + q.p * realized) - eval_cost(s.cost, T)
    rhs = u * target_gain(q) - q.Ph - eval_cost(s.cost, T + 1) - s.tol.eps_tc
    return lhs >= rhs


def data_decide_perfect(s: DataState, q: QuotedPrice, T: int = 1) -> Decision:
    affordable = filter_affordable(s.catalog, q)
    if not affordable:
        return BreakdownFail("1", "no bundle affordable at the quoted price")
    gains = [s.gain_of(e.id) for e in affordable]
    t = target_gain(q)
    i = select_bundle_perfect(affordable, gains, t)
    chosen = affordable[i]
    if t - gains[i] <= s.tol.eps_d:
        return AcceptSuccess(chosen.id, "2")
    if s.cost.active:
        best_gain, best_reserved = reference_bundle(s, q)
        if data_accept_with_cost(s, q, gains[i], best_gain, T, best_reserved):
            return AcceptSuccess(chosen.id, "3c")
    return ContinueWithBundle(chosen.id)


def task_initial_quote(s: TaskState) -> QuotedPrice:
    u, B = s.econ.u, s.econ.B
    p_lo, p_hi = s.initial_p_range
    P_lo, P_hi = s.initial_P0_range
    if p_lo <= 0 or p_hi < p_lo or P_lo < 0 or P_hi < P_lo:
        raise InfeasibleConfiguration(f"bad initial ranges p={s.initial_p_range} P0={s.initial_P0_range}")
    rng = round_rng(s.rng_seed, 0)
    for _ in range(s.max_redraws):
        p0 = float(rng.uniform(p_lo, p_hi))
        P00 = float(rng.uniform(P_lo, P_hi))
        if not 0 < p0 < u:
            continue
        q = quote_for_target(p0, P00, s.target)
        if q.Ph <= B:
            return q
    raise InfeasibleConfiguration(
        f"no initial quote with p<{u} and Ph<={B} after {s.max_redraws} draws")


def task_requote(s: TaskState, T: int) -> QuotedPrice:
    """Cheapest admissible quote strictly above the previous one.

    Candidates draw ``p`` from (p_prev, u) and ``Ph`` from (Ph_prev, B]; the
    base payment follows from the target gain and may not fall below P0_prev.
    The candidate with the smallest ``Ph`` wins (ties: smaller ``p``).
    """
    prev = s.current_quote
    if prev is None:
        raise MarketError("requote needs a previous quote")
    u, B, dg = s.econ.u, s.econ.B, s.target
    if prev.p >= u or prev.Ph >= B:
        raise QuoteExhausted(f"previous quote {prev} is at the ceilings u={u}, B={B}")
    rng = round_rng(s.rng_seed, T)
    ps = rng.uniform(prev.p, u, size=s.sample_count)
    phs = rng.uniform(prev.Ph, B, size=s.sample_count)
    best: Optional[QuotedPrice] = None
    for p, ph in sorted(zip(ps.tolist(), phs.tolist()), key=lambda c: (c[1], c[0])):
        P0 = ph - p * dg
        if p <= prev.p or ph <= prev.Ph or P0 < prev.P0:
            continue
        q = quote_for_target(p, P0, dg)
        if q.Ph > B or q.Ph <= prev.Ph:
            continue
        best = q
        break
    if best is None:
        raise QuoteExhausted(f"no admissible candidate above {prev} among {s.sample_count} draws")
    return best


def _breakeven_or_inf(econ: TaskEconomics, q: QuotedPrice) -> float:
    if econ.u <= q.p:
        # every gain loses money when the rate reaches the utility
        return math.inf if q.P0 > 0 or econ.u < q.p else 0.0
    return q.P0 / (econ.u - q.p)


def task_decide_perfect(s: TaskState, realized: float, T: int = 1,
                        requote: Optional[Callable[[TaskState, int], QuotedPrice]] = None) -> Decision:
    """Cases 4-6 on the gain realized in round ``T``.

    ``requote`` defaults to :func:`task_requote`; baselines substitute their
    own. Exhaustion propagates as :class:`QuoteExhausted`.
    """
    q = s.current_quote
    assert q is not None
    if realized < _breakeven_or_inf(s.econ, q):
        return BreakdownFail("4", "gain below breakeven")
    if realized >= target_gain(q) - s.tol.eps_t:
        return AcceptSuccess(None, "5")
    if s.cost.active and task_accept_with_cost(s, q, realized, T):
        return AcceptSuccess(None, "6c")
    return ContinueWithQuote((requote or task_requote)(s, T + 1))


def data_decide_imperfect(s: DataState, g, q: QuotedPrice, T: int, N: int,
                          tried: Optional[frozenset[str]] = None) -> Decision:
    """Bundle choice on estimated gains; failures and acceptances wait out ``N`` rounds.

    When ``tried`` is given, exploration rounds first offer the smallest-id
    affordable bundle whose gain has never been observed, so the estimator
    sees every reachable bundle before it is trusted.
    """
    exploring = T < N
    affordable = filter_affordable(s.catalog, q)
    if not affordable:
        if exploring:
            return ContinueWithBundle(None)
        return BreakdownFail("I", "no bundle affordable at the quoted price")
    if exploring and tried is not None:
        fresh = [e.id for e in affordable if e.id not in tried]
        if fresh:
            return ContinueWithBundle(min(fresh))
    preds = [g.predict(e.bundle) for e in affordable]
    t = target_gain(q)
    below = select_from_below(affordable, preds, t)
    offer: Optional[int] = None
    if below is not None and t - preds[below] <= s.tol.eps_d:
        offer = below
    elif t > max(preds):
        offer = _argext(affordable, preds, largest=True)
    elif t < min(preds):
        offer = _argext(affordable, preds, largest=False)
    if offer is None:
        # Case III; some bundle lies below t since t >= min(preds)
        return ContinueWithBundle(affordable[below].id)
    if exploring:
        return ContinueWithBundle(affordable[offer].id)
    return AcceptSuccess(affordable[offer].id, "II")


def imperfect_candidates(s: TaskState, T: int) -> list[QuotedPrice]:
    """Target-conforming quotes that dominate the session's first quote."""
    base = s.anchor or s.current_quote
    if base is None:
        raise MarketError("imperfect quoting needs an anchor quote")
    u, B, dg = s.econ.u, s.econ.B, s.target
    rng = round_rng(s.rng_seed, T)
    ps = rng.uniform(base.p, u, size=s.sample_count)
    phs = rng.uniform(base.Ph, B, size=s.sample_count)
    out = []
    for p, ph in zip(ps.tolist(), phs.tolist()):
        P0 = ph - p * dg
        if P0 < base.P0 or p >= u:
            continue
        q = quote_for_target(p, P0, dg)
        if q.Ph <= B:
            out.append(q)
    return out


def task_quote_imperfect(s: TaskState, f, T: int) -> QuotedPrice:
    cands = imperfect_candidates(s, T)
    if not cands:
        raise InfeasibleConfiguration(f"no admissible candidate quote in round {T}")
    preds = np.asarray(f.predict_many(cands), dtype=float)
    u = s.econ.u
    scored = []
    for q, g in zip(cands, preds.tolist()):
        net = u * g - payment(q, g)
        keep = g >= target_gain(q) - s.tol.eps_t
        scored.append((keep, net, q))
    pool = [c for c in scored if c[0]] or scored
    return min(pool, key=lambda c: (-c[1], c[2].Ph, c[2].p))[2]


def task_decide_imperfect(s: TaskState, realized: float, T: int, N: int, f=None) -> Decision:
    """Cases IV-VI on the realized gain, all suppressed while ``T < N``."""
    q = s.current_quote
    assert q is not None

    def next_quote() -> ContinueWithQuote:
        if f is None:
            raise MarketError("continuing needs the price-gain estimator")
        return ContinueWithQuote(task_quote_imperfect(s, f, T + 1))

    if T < N:
        return next_quote()
    if realized < _breakeven_or_inf(s.econ, q):
        return BreakdownFail("IV", "gain below breakeven")
    if realized >= target_gain(q) - s.tol.eps_t:
        return AcceptSuccess(None, "V")
    if s.cost.active and task_accept_with_cost(s, q, realized, T):
        return AcceptSuccess(None, "6c")
    return next_quote()
