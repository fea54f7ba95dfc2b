"""Hypothesis property tests across the market math, strategies and wire format."""

import math

from hypothesis import given, settings
from hypothesis import strategies as st

from vflbargain.harness.instances import s1
from vflbargain.market import (CostModel, QuotedPrice, TaskEconomics, Tolerances, eval_cost, payment,
                               quote_for_target, target_gain, task_net_profit)
from vflbargain.protocol.messages import (Accept, Breakdown, BundleOffer, GainReport, QuoteOffer, decode,
                                          encode)
from vflbargain.strategy import DataState, TaskState, data_decide_perfect, task_initial_quote, task_requote
from vflbargain.verifier import prop_check

rate = st.floats(0.01, 49.0, allow_nan=False)
base = st.floats(0.0, 5.0, allow_nan=False)
width = st.floats(0.0, 5.0, allow_nan=False)
gain = st.floats(-1.0, 2.0, allow_nan=False)


@st.composite
def quotes(draw):
    p, P0 = draw(rate), draw(base)
    return QuotedPrice(p, P0, P0 + draw(width))


@given(quotes(), gain)
def test_payment_within_bounds(q, dg):
    assert q.P0 <= payment(q, dg) <= q.Ph


@given(quotes(), gain, gain)
def test_payment_monotone(q, a, b):
    lo, hi = sorted((a, b))
    assert payment(q, lo) <= payment(q, hi)


@given(quotes(), gain)
def test_surplus_conservation(q, dg):
    # what the task party keeps plus what it pays equals its utility
    u = 50.0
    econ = TaskEconomics(u, 10.0)
    assert math.isclose(task_net_profit(econ, q, dg) + payment(q, dg), u * dg, rel_tol=1e-12, abs_tol=1e-12)


@given(st.sampled_from(["none", "constant:0.5", "linear:0.1", "linear:1", "exp:1.01", "exp:1.1"]),
       st.integers(0, 200), st.integers(0, 200))
def test_eval_cost_monotone_in_round(label, a, b):
    m = CostModel.parse(label)
    lo, hi = sorted((a, b))
    assert 0 <= eval_cost(m, lo) <= eval_cost(m, hi)


@given(rate, base, st.floats(0.0, 1.0, allow_nan=False))
def test_quote_for_target_smallest_ph(p, P0, t):
    q = quote_for_target(p, P0, t)
    assert target_gain(q) >= t
    lower = math.nextafter(q.Ph, -math.inf)
    assert lower < P0 or (lower - P0) / p < t
    assert math.isclose(target_gain(q), t, rel_tol=1e-9, abs_tol=1e-12)


@given(quotes())
def test_data_decision_is_pure(q):
    inst = s1()
    s = DataState(inst.catalog, inst.gains, Tolerances())
    assert data_decide_perfect(s, q, 1) == data_decide_perfect(s, q, 1)


@given(st.integers(0, 2**31 - 1), st.integers(2, 50))
@settings(max_examples=30)
def test_requote_is_pure_and_monotone(seed, T):
    s = TaskState(s1().econ, 0.1, rng_seed=seed)
    q0 = task_initial_quote(s)
    s = s.with_quote(q0)
    a, b = task_requote(s, T), task_requote(s, T)
    assert a == b
    assert a.p > q0.p and a.Ph > q0.Ph and a.P0 >= q0.P0
    assert a.p < s.econ.u and a.Ph < s.econ.B


@given(st.integers(0, 10_000), st.floats(0.0, 2.0, allow_nan=False), st.sampled_from([1, 2]))
@settings(max_examples=25, deadline=None)
def test_cost_aware_rule_matches_threshold(seed, eps_c, which):
    rep = prop_check(which, None, CostModel.constant(0.5), eps_c, n=40, seed=seed)
    assert rep.passed, rep.counterexamples


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
rounds = st.integers(1, 10**6)
ident = st.from_regex(r"[A-Za-z0-9_.:-]{1,12}", fullmatch=True)
reason = st.from_regex(r"[A-Za-z0-9 ,.()=<>-]{0,40}", fullmatch=True).map(str.strip)

messages = st.one_of(
    st.builds(QuoteOffer, rounds, finite, finite, finite),
    st.builds(BundleOffer, rounds, st.one_of(st.none(), ident), st.booleans()),
    st.builds(GainReport, rounds, finite),
    st.builds(Accept, rounds, finite),
    st.builds(Breakdown, rounds, ident, reason),
)


@given(messages)
def test_message_roundtrip(msg):
    line = encode(msg)
    assert "\n" not in line
    assert decode(line) == msg
    assert encode(decode(line)) == line
