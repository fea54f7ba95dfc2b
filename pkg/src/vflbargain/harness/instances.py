"""Synthetic bargaining instances and dataset-backed catalogs."""

from __future__ import annotations

import itertools
from typing import Optional

import numpy as np

from ..market import BundleCatalog, FeatureBundle, ReservedPrice, TaskEconomics
from ..verifier import SmallInstance

S1_GAINS = {"F1": 0.05, "F2": 0.10, "F3": 0.20}
S1_RESERVED = {"F1": (5.0, 0.5), "F2": (8.0, 1.0), "F3": (12.0, 2.0)}


def s1() -> SmallInstance:
    """Three bundles with reserved prices rising in gain; defaults u=50, B=10, target 0.1."""
    cat = BundleCatalog([(FeatureBundle(b, [f"x{b[1:]}"]), ReservedPrice(*S1_RESERVED[b])) for b in S1_GAINS])
    return SmallInstance(cat, dict(S1_GAINS), TaskEconomics(50.0, 10.0))


def monotone_instance(rng: np.random.Generator, n_bundles: Optional[int] = None, u: float = 50.0,
                      B: float = 10.0, gain_range: tuple[float, float] = (0.05, 0.3),
                      open_entry: bool = True) -> SmallInstance:
    """Random catalog whose reserved prices increase with gain.

    Larger bundles carry more features, gain more and cost more, which is
    the market shape the pricing results are about. With ``open_entry`` the
    cheapest bundle is priced below every default initial quote, so a
    session never breaks down before the first offer.
    """
    n = int(n_bundles or rng.integers(2, 9))
    lo, hi = gain_range
    gains = np.sort(rng.uniform(lo, hi, size=n))
    rates = np.sort(rng.uniform(0.05, 0.45, size=n)) * u
    bases = np.sort(rng.uniform(0.02, 0.3, size=n)) * B
    if open_entry:
        rates[0] = rng.uniform(0.0, 0.1) * u
        bases[0] = rng.uniform(0.0, 0.05) * B
    entries, table = [], {}
    for i in range(n):
        bid = f"F{i + 1}"
        entries.append((FeatureBundle(bid, [f"x{j + 1}" for j in range(i + 1)]),
                        ReservedPrice(float(rates[i]), float(bases[i]))))
        table[bid] = float(gains[i])
    return SmallInstance(BundleCatalog(entries), table, TaskEconomics(u, B))


def instance_from_spec(spec: dict) -> SmallInstance:
    """``{"instance": "s1"}`` or an explicit ``{"u", "B", "bundles": [...]}`` mapping."""
    if spec.get("instance") == "s1":
        base = s1()
        if "u" in spec or "B" in spec:
            econ = TaskEconomics(spec.get("u", base.econ.u), spec.get("B", base.econ.B))
            return SmallInstance(base.catalog, base.gains, econ)
        return base
    if "bundles" in spec:
        return SmallInstance.from_dict({"u": 50.0, "B": 10.0, **spec})
    raise ValueError(f"cannot build an instance from {sorted(spec)}")


def sample_bundles(sources: tuple[str, ...], K: int, rng: np.random.Generator,
                   include_full: bool = True) -> list[frozenset[str]]:
    """Up to ``K`` distinct bundles with sizes uniform in [1, len(sources)]."""
    d = len(sources)
    total = 2 ** d - 1
    if total <= K:
        subsets = [frozenset(c) for r in range(1, d + 1) for c in itertools.combinations(sources, r)]
        return subsets
    out: list[frozenset[str]] = [frozenset(sources)] if include_full else []
    seen = set(out)
    while len(out) < K:
        size = int(rng.integers(1, d + 1))
        pick = frozenset(rng.choice(sources, size=size, replace=False).tolist())
        if pick not in seen:
            seen.add(pick)
            out.append(pick)
    return out


def dataset_catalog(sources: tuple[str, ...], K: int = 32, alpha: float = 2.0, beta: float = 0.25,
                    seed: int = 0, include_full: bool = True) -> BundleCatalog:
    """Bundles priced at ``p_l = alpha*|F|`` and ``P_l = beta*|F|``."""
    rng = np.random.default_rng(seed)
    bundles = sample_bundles(tuple(sources), K, rng, include_full)
    bundles.sort(key=lambda b: (len(b), sorted(b)))
    entries = []
    for i, b in enumerate(bundles):
        entries.append((FeatureBundle(f"B{i + 1:02d}", b), ReservedPrice(alpha * len(b), beta * len(b))))
    return BundleCatalog(entries, universe=sources)
