import numpy as np
import pytest

from vflbargain.baselines import (
    IncreasePriceState,
    RandomBundleState,
    increase_price_requote,
    random_bundle_offer,
)
from vflbargain.market import QuotedPrice, TaskEconomics, target_gain
from vflbargain.protocol.engine import run
from vflbargain.strategy import BreakdownFail, ContinueWithBundle, QuoteExhausted


def test_increase_price_rule(econ):
    q = increase_price_requote(IncreasePriceState(1.1), QuotedPrice(10, 1, 2), econ)
    assert q.as_tuple() == pytest.approx((11, 1.1, 2.2))


def test_increase_price_caps_and_exhaustion(econ):
    s = IncreasePriceState(1.1)
    with pytest.raises(QuoteExhausted):
        increase_price_requote(s, QuotedPrice(50, 10, 10), econ)
    q = increase_price_requote(s, QuotedPrice(48, 9.5, 9.8), econ)
    assert q.as_tuple() == (50, 10, 10)
    with pytest.raises(ValueError):
        IncreasePriceState(1.0)


def test_increase_price_drifts_from_target():
    econ = TaskEconomics(50, 10)
    s = IncreasePriceState(1.1)
    q = QuotedPrice(10, 1.2, 2.2)
    targets = []
    for _ in range(40):
        try:
            q = increase_price_requote(s, q, econ)
        except QuoteExhausted:
            break
        targets.append(target_gain(q))
    assert any(abs(t - 0.1) > 1e-9 for t in targets)


def test_random_bundle_uniform(inst):
    q = QuotedPrice(10, 1.2, 2.2)
    n = 10_000
    picks = [random_bundle_offer(RandomBundleState(seed), inst.catalog, q).bundle_id for seed in range(n)]
    counts = np.array([picks.count("F1"), picks.count("F2")])
    assert counts.sum() == n
    chi2 = float(((counts - n / 2) ** 2 / (n / 2)).sum())
    # chi-square with one degree of freedom: mean 1, sd sqrt(2)
    assert chi2 < 1 + 3 * np.sqrt(2)


def test_random_bundle_edge_cases(inst):
    d = random_bundle_offer(RandomBundleState(0), inst.catalog, QuotedPrice(10, 0.4, 1.4))
    assert isinstance(d, BreakdownFail) and d.case == "1"
    only_f1 = QuotedPrice(6, 0.6, 1.2)
    for seed in range(20):
        assert random_bundle_offer(RandomBundleState(seed), inst.catalog, only_f1) == ContinueWithBundle("F1")


def test_random_bundle_case_four_occurs(session_cfg):
    cases = [run(session_cfg(agent="random_bundle", seed=s)).outcome.case for s in range(1000)]
    assert cases.count("4") > 0


def test_agents_share_initial_quote(session_cfg):
    for seed in range(10):
        first = {a: run(session_cfg(agent=a, seed=seed)).rounds[0] for a in
                 ("strategic", "increase_price", "random_bundle")}
        quotes = {(r.p, r.P0, r.Ph) for r in first.values()}
        assert len(quotes) == 1
