"""Brute-force checks of the perfect-information pricing results on small instances.

Quotes are enumerated on regular grids over ``p``, ``P0`` and the spread
``Ph - P0``; bundle selection is evaluated with numpy over the whole grid and
spot-checked against the scalar strategy functions.

Quotes whose selected bundle overshoots the target gain (every affordable
bundle lies above it) are reported as out of scope: the fallback pays ``Ph``
rather than ``P0 + p*dG``, so the canonical quote does not preserve revenue.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .market import (
    BundleCatalog,
    CatalogEntry,
    CostModel,
    FeatureBundle,
    QuotedPrice,
    ReservedPrice,
    TaskEconomics,
    Tolerances,
    payment,
    target_gain,
)
from .strategy import (
    DataState,
    TaskState,
    data_accept_with_cost,
    data_decide_perfect,
    filter_affordable,
    select_bundle_perfect,
    task_accept_with_cost,
)

REL_TOL = 1e-12


@dataclass(frozen=True)
class SmallInstance:
    catalog: BundleCatalog
    gains: Mapping[str, float]
    econ: TaskEconomics
    steps: int = 50
    tol: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self) -> None:
        if len(self.catalog) > 8:
            raise ValueError("small instances hold at most 8 bundles")
        if set(self.gains) != set(self.catalog.ids):
            raise ValueError("gains must cover exactly the catalog")

    def arrays(self) -> tuple[list[CatalogEntry], np.ndarray, np.ndarray, np.ndarray]:
        """Entries sorted by id with their reserved rates, bases and gains."""
        entries = sorted(self.catalog, key=lambda e: e.id)
        pl = np.array([e.reserved.p_l for e in entries])
        Pl = np.array([e.reserved.P_l for e in entries])
        g = np.array([self.gains[e.id] for e in entries])
        return entries, pl, Pl, g

    def data_state(self) -> DataState:
        return DataState(self.catalog, dict(self.gains), self.tol)

    def to_dict(self) -> dict[str, Any]:
        return {
            "u": self.econ.u, "B": self.econ.B, "steps": self.steps,
            "bundles": [{"id": e.id, "features": sorted(e.bundle.features), "gain": self.gains[e.id],
                         "p_l": e.reserved.p_l, "P_l": e.reserved.P_l} for e in self.catalog],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SmallInstance":
        entries, gains = [], {}
        for b in d["bundles"]:
            entries.append((FeatureBundle(b["id"], b.get("features") or [b["id"]]),
                            ReservedPrice(b["p_l"], b["P_l"])))
            gains[b["id"]] = float(b["gain"])
        return cls(BundleCatalog(entries), gains, TaskEconomics(d["u"], d["B"]), int(d.get("steps", 50)))


def random_small_instance(rng: np.random.Generator, n_bundles: Optional[int] = None,
                          u: float = 50.0, B: float = 10.0, steps: int = 50) -> SmallInstance:
    """Distinct gains in (0.01, 0.3); reserved prices well inside (u, B)."""
    n = int(n_bundles or rng.integers(1, 9))
    gains = np.sort(rng.choice(np.arange(1, 300), size=n, replace=False) / 1000.0 + rng.uniform(0, 1e-3, n))
    entries, table = [], {}
    for i, g in enumerate(gains.tolist()):
        bid = f"F{i + 1}"
        entries.append((FeatureBundle(bid, [f"x{i + 1}"]),
                        ReservedPrice(float(rng.uniform(0.05, 0.5) * u), float(rng.uniform(0.0, 0.3) * B))))
        table[bid] = g
    return SmallInstance(BundleCatalog(entries), table, TaskEconomics(u, B), steps)


@dataclass
class CheckReport:
    name: str
    passed: bool
    checked: int = 0
    out_of_scope: int = 0
    counterexamples: list[dict[str, Any]] = field(default_factory=list)
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def merge(self, other: "CheckReport", keep: int = 5) -> "CheckReport":
        return CheckReport(self.name, self.passed and other.passed, self.checked + other.checked,
                           self.out_of_scope + other.out_of_scope,
                           (self.counterexamples + other.counterexamples)[:keep], self.detail or other.detail)


def quote_grid(inst: SmallInstance) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flattened (p, P0, Ph) over ``steps``-point axes with Ph <= B."""
    n, u, B = inst.steps, inst.econ.u, inst.econ.B
    ps = u * (np.arange(n) + 0.5) / n
    base = B * np.arange(n) / max(n - 1, 1)
    p, P0, C = np.meshgrid(ps, base, base, indexing="ij")
    Ph = P0 + C
    keep = Ph <= B
    return p[keep], P0[keep], Ph[keep]


def select_grid(p: np.ndarray, P0: np.ndarray, t: np.ndarray, pl: np.ndarray, Pl: np.ndarray,
                g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized perfect-information selection.

    Returns the chosen bundle index (-1 when nothing is affordable) and a mask
    of quotes where the choice lies at or below the target.
    """
    A = (pl[None, :] <= p[:, None]) & (Pl[None, :] <= P0[:, None])
    gap = t[:, None] - g[None, :]
    below = A & (gap >= 0)
    i_below = np.argmin(np.where(below, gap, np.inf), axis=1)
    i_over = np.argmax(np.where(A, g[None, :], -np.inf), axis=1)
    has_below = below.any(axis=1)
    sel = np.where(has_below, i_below, i_over)
    sel[~A.any(axis=1)] = -1
    return sel, has_below


def canonical_ph(p: np.ndarray, P0: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Smallest Ph (ulp-adjusted) with (Ph - P0)/p >= dg, elementwise."""
    Ph = P0 + p * dg
    for _ in range(64):
        low = (Ph - P0) / p < dg
        if not low.any():
            break
        Ph = np.where(low, np.nextafter(Ph, np.inf), Ph)
    return Ph


def _close(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(a - b) <= REL_TOL * np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


def theorem1_grid(inst: SmallInstance, p: np.ndarray, P0: np.ndarray, Ph: np.ndarray,
                  max_examples: int = 5) -> CheckReport:
    entries, pl, Pl, g = inst.arrays()
    u = inst.econ.u
    t = (Ph - P0) / p
    sel, below = select_grid(p, P0, t, pl, Pl, g)
    scope = (sel >= 0) & below
    p, P0, Ph, t, sel = p[scope], P0[scope], Ph[scope], t[scope], sel[scope]
    dg = g[sel]
    R_d = np.minimum(np.maximum(P0, P0 + p * dg), Ph)
    R_t = u * dg - R_d
    Ph_s = canonical_ph(p, P0, dg)
    t_s = (Ph_s - P0) / p
    sel_s, _ = select_grid(p, P0, t_s, pl, Pl, g)
    dg_s = g[sel_s]
    R_d_s = np.minimum(np.maximum(P0, P0 + p * dg_s), Ph_s)
    R_t_s = u * dg_s - R_d_s
    ok = ((sel_s == sel) & (dg_s == dg) & _close(R_d_s, R_d) & _close(R_t_s, R_t)
          & _close(t_s, dg) & (Ph_s <= Ph * (1 + REL_TOL)))
    # the canonical quote should also be a fixed point
    Ph_ss = canonical_ph(p, P0, (Ph_s - P0) / p)
    ok &= _close(Ph_ss, Ph_s)
    bad = np.flatnonzero(~ok)
    examples = [{"quote": [float(p[i]), float(P0[i]), float(Ph[i])], "bundle": entries[sel[i]].id,
                 "canonical_Ph": float(Ph_s[i]),
                 "canonical_bundle": entries[sel_s[i]].id if sel_s[i] >= 0 else None}
                for i in bad[:max_examples].tolist()]
    return CheckReport("theorem1", len(bad) == 0, int(scope.sum()), int((~scope).sum()), examples)


def theorem1_check(inst: SmallInstance, q: Optional[QuotedPrice] = None) -> CheckReport:
    """Canonical-quote equivalence for ``q`` or, by default, the whole quote grid."""
    if q is None:
        rep = theorem1_grid(inst, *quote_grid(inst))
        return rep.merge(spot_check(inst))
    return theorem1_grid(inst, np.array([q.p]), np.array([q.P0]), np.array([q.Ph]))


def canonical_quote(inst: SmallInstance, q: QuotedPrice) -> tuple[str, QuotedPrice]:
    """Bundle chosen under ``q`` and the equivalent target-conforming quote."""
    affordable = filter_affordable(inst.catalog, q)
    if not affordable:
        raise ValueError(f"nothing affordable at {q}")
    gains = [inst.gains[e.id] for e in affordable]
    i = select_bundle_perfect(affordable, gains, target_gain(q))
    dg = gains[i]
    Ph = float(canonical_ph(np.array([q.p]), np.array([q.P0]), np.array([dg]))[0])
    return affordable[i].id, QuotedPrice(q.p, q.P0, Ph)


def spot_check(inst: SmallInstance, n: int = 200, seed: int = 0) -> CheckReport:
    """Compare the vectorized selection with the scalar strategy on random grid quotes."""
    entries, pl, Pl, g = inst.arrays()
    p, P0, Ph = quote_grid(inst)
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(p), size=min(n, len(p)), replace=False)
    t = (Ph[idx] - P0[idx]) / p[idx]
    sel, _ = select_grid(p[idx], P0[idx], t, pl, Pl, g)
    ds = inst.data_state()
    bad = []
    for k, i in enumerate(idx.tolist()):
        q = QuotedPrice(float(p[i]), float(P0[i]), float(Ph[i]))
        aff = filter_affordable(inst.catalog, q)
        got = None
        if aff:
            got = aff[select_bundle_perfect(aff, [inst.gains[e.id] for e in aff], target_gain(q))].id
            d = data_decide_perfect(ds, q)
            offered = getattr(d, "bundle_id", None)
            if offered != got:
                bad.append({"quote": list(q.as_tuple()), "decision": repr(d), "selected": got})
        want = entries[sel[k]].id if sel[k] >= 0 else None
        if want != got:
            bad.append({"quote": list(q.as_tuple()), "vectorized": want, "scalar": got})
    return CheckReport("selection_cross_check", not bad, len(idx), 0, bad[:5])


def lemma1_check(inst: SmallInstance, dg: float, p_grid: Optional[Sequence[float]] = None,
                 P0_grid: Optional[Sequence[float]] = None,
                 Ph_grid: Optional[Sequence[float]] = None) -> CheckReport:
    """Among grid quotes eliciting ``dg`` from below, the cheapest target-conforming quote dominates."""
    entries, pl, Pl, g = inst.arrays()
    u = inst.econ.u
    if p_grid is None:
        p, P0, Ph = quote_grid(inst)
    else:
        pp, PP0, PPh = np.meshgrid(np.asarray(p_grid, float), np.asarray(P0_grid, float),
                                   np.asarray(Ph_grid, float), indexing="ij")
        keep = PPh >= PP0
        p, P0, Ph = pp[keep], PP0[keep], PPh[keep]
    t = (Ph - P0) / p
    sel, below = select_grid(p, P0, t, pl, Pl, g)
    hit = (sel >= 0) & (g[np.maximum(sel, 0)] == dg)
    scope = hit & below
    if not scope.any():
        return CheckReport("lemma1", True, 0, int(hit.sum()), detail="no grid quote elicits this gain")
    p, P0, Ph = p[scope], P0[scope], Ph[scope]
    nets = u * dg - np.minimum(np.maximum(P0, P0 + p * dg), Ph)
    Ph_s = canonical_ph(p, P0, np.full_like(p, dg))
    k = int(np.argmin(Ph_s))
    q_star = QuotedPrice(float(p[k]), float(P0[k]), float(Ph_s[k]))
    star_net = u * dg - payment(q_star, dg)
    sel_star, _ = select_grid(p[k:k + 1], P0[k:k + 1], np.array([target_gain(q_star)]), pl, Pl, g)
    examples = []
    if g[sel_star[0]] != dg:
        examples.append({"canonical": list(q_star.as_tuple()), "elicits": float(g[sel_star[0]])})
    worse = np.flatnonzero(nets > star_net + REL_TOL * max(1.0, abs(star_net)))
    for i in worse[:5].tolist():
        examples.append({"quote": [float(p[i]), float(P0[i]), float(Ph[i])], "net": float(nets[i]),
                         "canonical": list(q_star.as_tuple()), "canonical_net": star_net})
    return CheckReport("lemma1", not examples, int(scope.sum()), int((hit & ~below).sum()), examples,
                       detail=f"canonical quote {q_star.as_tuple()} net {star_net:.6g}")


def lemma1_all(inst: SmallInstance) -> CheckReport:
    rep = CheckReport("lemma1", True)
    for dg in sorted(set(inst.gains.values())):
        rep = rep.merge(lemma1_check(inst, dg))
    return rep


def derived_eps_d(q: QuotedPrice, reserved: ReservedPrice, eps_dc: float) -> float:
    t = target_gain(q)
    return (eps_dc - (max(reserved.P_l, q.P0) + max(reserved.p_l, q.p) * t - q.Ph)) / q.p


def derived_eps_t(u: float, p: float, eps_tc: float) -> float:
    return eps_tc / (u - p)


def prop_check(which: int, inst: Optional[SmallInstance], cost: CostModel, eps_c: float,
               n: int = 1000, seed: int = 0, T: int = 1) -> CheckReport:
    """Decision-by-decision equivalence of the cost-aware rule and the derived threshold."""
    name = f"proposition{which}"
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    if cost.kind.value != "constant":
        return CheckReport(name, True, detail="not applicable: propositions cover constant cost only")
    econ = inst.econ if inst is not None else TaskEconomics(50.0, 10.0)
    u, B = econ.u, econ.B
    rng = np.random.default_rng([seed, which])
    bad = []
    for _ in range(n):
        p = float(rng.uniform(0.02, 0.98) * u)
        P0 = float(rng.uniform(0, 0.5) * B)
        Ph = float(P0 + rng.uniform(1e-3, 0.5) * B)
        q = QuotedPrice(p, P0, Ph)
        t = target_gain(q)
        if which == 1:
            reserved = ReservedPrice(float(rng.uniform(0, 1.2) * p), float(rng.uniform(0, 1.2) * P0))
            gi = float(t - rng.uniform(-0.2, 1.0) * t)
            ds = DataState(BundleCatalog([(FeatureBundle("j", ["j"]), reserved)]), {"j": t},
                           Tolerances(eps_dc=eps_c), cost)
            got = data_accept_with_cost(ds, q, gi, t, T, reserved)
            want = t - gi <= derived_eps_d(q, reserved, eps_c)
            state = {"quote": list(q.as_tuple()), "gain": gi, "reserved": [reserved.p_l, reserved.P_l]}
        else:
            dg = float(t * rng.uniform(0.0, 1.2))
            ts = TaskState(econ, t, q, Tolerances(eps_tc=eps_c), cost)
            got = task_accept_with_cost(ts, q, dg, T)
            want = dg >= t - derived_eps_t(u, p, eps_c)
            state = {"quote": list(q.as_tuple()), "gain": dg}
        if got != want:
            bad.append({**state, "cost_aware": got, "threshold": want})
    return CheckReport(name, not bad, n, 0, bad[:5])


@dataclass
class EquilibriumResult:
    found: bool
    quote: Optional[tuple[float, float, float]] = None
    bundle_id: Optional[str] = None
    delta_g: Optional[float] = None
    net_profit: Optional[float] = None
    payment: Optional[float] = None
    successes: int = 0
    resolution: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def exhaustive_equilibrium(inst: SmallInstance, target: Optional[float] = None,
                           include_overshoot: bool = False) -> EquilibriumResult:
    """Best single-round successful quote on the grid.

    With ``target`` the grid spans target-conforming quotes ``(p, P0, P0 + p*target)``;
    without it the target itself is a third grid axis. A quote succeeds when
    the data party accepts (gap <= eps_d) or the realized gain clears the
    task party's acceptance threshold, and the gain is not below breakeven.
    Overshooting outcomes are excluded unless ``include_overshoot``.
    """
    entries, pl, Pl, g = inst.arrays()
    u, B, n = inst.econ.u, inst.econ.B, inst.steps
    ps = u * (np.arange(n) + 0.5) / n
    P0s = B * np.arange(n) / max(n - 1, 1)
    if target is not None:
        p, P0 = (a.ravel() for a in np.meshgrid(ps, P0s, indexing="ij"))
        t = np.full_like(p, float(target))
        step_t = 0.0
    else:
        gmax = float(g.max())
        # equilibrium targets sit at bundle gains, which a regular axis would miss
        ts = np.union1d(1.5 * gmax * (np.arange(n) + 1) / n, g[g > 0])
        p, P0, t = (a.ravel() for a in np.meshgrid(ps, P0s, ts, indexing="ij"))
        step_t = 1.5 * gmax / n
    Ph = canonical_ph(p, P0, t)
    ok = Ph <= B
    p, P0, t, Ph = p[ok], P0[ok], t[ok], Ph[ok]
    sel, below = select_grid(p, P0, t, pl, Pl, g)
    valid = sel >= 0
    if not include_overshoot:
        valid &= below
    dg = g[np.maximum(sel, 0)]
    gap = t - dg
    accept = (gap <= inst.tol.eps_d) | (dg >= t - inst.tol.eps_t)
    breakeven = np.where(u > p, P0 / np.maximum(u - p, 1e-300), np.inf)
    success = valid & accept & (dg >= breakeven)
    res = (float(ps[1] - ps[0]) if n > 1 else 0.0, float(P0s[1] - P0s[0]) if n > 1 else 0.0, step_t)
    if not success.any():
        return EquilibriumResult(False, resolution=res)
    idx = np.flatnonzero(success)
    pay = np.minimum(np.maximum(P0[idx], P0[idx] + p[idx] * dg[idx]), Ph[idx])
    net = u * dg[idx] - pay
    # ties: smaller Ph, then smaller p
    order = np.lexsort((p[idx], Ph[idx], -net))
    k = idx[order[0]]
    return EquilibriumResult(True, (float(p[k]), float(P0[k]), float(Ph[k])), entries[sel[k]].id,
                             float(dg[k]), float(net[order[0]]), float(pay[order[0]]), int(len(idx)), res)


def verify_instance(inst: SmallInstance, cost_c: float = 0.5, eps_c: float = 0.4,
                    seed: int = 0) -> dict[str, CheckReport]:
    return {
        "theorem1": theorem1_check(inst),
        "lemma1": lemma1_all(inst),
        "proposition1": prop_check(1, inst, CostModel.constant(cost_c), eps_c, seed=seed),
        "proposition2": prop_check(2, inst, CostModel.constant(cost_c), eps_c, seed=seed),
    }
