"""Session loop: quote, bundle response, VFL gain, termination check, repeat.

The task side drives the loop and hosts the gain oracle. The data side runs
as a :class:`DataAgent` behind a transport, so the same agent code serves
both in-process and socket sessions.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Optional

from ..baselines import IncreasePriceState, RandomBundleState, increase_price_requoter, random_bundle_offer
from ..estimator import BundleGainEstimator, PriceGainEstimator, TrainingSample
from ..market import (
    BundleCatalog,
    CostModel,
    QuotedPrice,
    TaskEconomics,
    Tolerances,
    eval_cost,
    payment,
)
from ..oracle.oracles import GainOracle
from ..strategy import (
    AcceptSuccess,
    BreakdownFail,
    ContinueWithBundle,
    ContinueWithQuote,
    DataState,
    InfeasibleConfiguration,
    QuoteExhausted,
    TaskState,
    data_decide_imperfect,
    data_decide_perfect,
    task_decide_imperfect,
    task_decide_perfect,
    task_initial_quote,
    task_quote_imperfect,
)
from .messages import Accept, Breakdown, BundleOffer, GainReport, Message, QuoteOffer, encode
from .transport import DataServer, InMemoryTransport, StreamTransport, Transport, TransportError

SETTINGS = ("perfect", "imperfect")
AGENTS = ("strategic", "increase_price", "random_bundle")
TRANSPORTS = ("memory", "stream")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    hidden: tuple[int, ...] = (64, 32, 16)
    lr: float = 1e-2
    clip_norm: float = 1.0
    updates_per_round: int = 10
    embedding_dim: int = 16


@dataclass
class SessionConfig:
    econ: TaskEconomics
    catalog: BundleCatalog
    oracle: GainOracle
    target: float
    setting: str = "perfect"
    agent: str = "strategic"
    max_rounds: int = 500
    N: int = 100
    tol: Tolerances = field(default_factory=Tolerances)
    task_cost: CostModel = field(default_factory=CostModel.none)
    data_cost: CostModel = field(default_factory=CostModel.none)
    seed: int = 0
    sample_count: int = 64
    p_range: Optional[tuple[float, float]] = None
    P0_range: Optional[tuple[float, float]] = None
    initial_quote: Optional[QuotedPrice] = None
    gamma: float = 1.1
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    transport: str = "memory"
    timeout: float = 5.0
    explore_untried: bool = False

    def validate(self) -> None:
        if self.setting not in SETTINGS:
            raise ConfigError(f"setting must be one of {SETTINGS}, got {self.setting!r}")
        if self.agent not in AGENTS:
            raise ConfigError(f"agent must be one of {AGENTS}, got {self.agent!r}")
        if self.transport not in TRANSPORTS:
            raise ConfigError(f"transport must be one of {TRANSPORTS}, got {self.transport!r}")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")
        if self.setting == "imperfect":
            if not 0 <= self.N <= self.max_rounds:
                raise ConfigError("need 0 <= N <= max_rounds")
            if self.agent != "strategic":
                raise ConfigError("baseline agents are defined for the perfect setting only")
        if not self.target > 0:
            raise ConfigError("target gain must be positive")

    def task_state(self) -> TaskState:
        return TaskState(self.econ, self.target, None, self.tol, self.task_cost, self.sample_count,
                         self.seed, self.p_range, self.P0_range)

    def echo(self) -> dict[str, Any]:
        """JSON-ready summary of the configuration (oracle by type only)."""
        return {
            "setting": self.setting,
            "agent": self.agent,
            "u": self.econ.u,
            "B": self.econ.B,
            "target": self.target,
            "max_rounds": self.max_rounds,
            "N": self.N,
            "tol": asdict(self.tol),
            "task_cost": self.task_cost.label(),
            "data_cost": self.data_cost.label(),
            "seed": self.seed,
            "sample_count": self.sample_count,
            "gamma": self.gamma,
            "explore_untried": self.explore_untried,
            "catalog": [
                {"id": e.id, "features": sorted(e.bundle.features),
                 "p_l": e.reserved.p_l, "P_l": e.reserved.P_l}
                for e in self.catalog
            ],
            "oracle": type(self.oracle).__name__,
        }


@dataclass
class RoundRecord:
    round: int
    p: float
    P0: float
    Ph: float
    bundle_id: Optional[str] = None
    delta_g: Optional[float] = None
    payment: Optional[float] = None
    net_profit: Optional[float] = None
    task_cost: float = 0.0
    data_cost: float = 0.0
    mse_f: Optional[float] = None
    mse_g: Optional[float] = None
    decision: str = ""


@dataclass
class Outcome:
    kind: str  # success | fail | max_rounds
    case: str
    rounds: int
    bundle_id: Optional[str] = None
    quote: Optional[tuple[float, float, float]] = None
    delta_g: Optional[float] = None
    payment: Optional[float] = None
    net_profit: Optional[float] = None
    task_cost: float = 0.0
    data_cost: float = 0.0
    dp: Optional[float] = None
    dP0: Optional[float] = None
    reason: str = ""

    @property
    def success(self) -> bool:
        return self.kind == "success"


@dataclass
class SessionTranscript:
    config: dict[str, Any]
    messages: list[str]
    rounds: list[RoundRecord]
    outcome: Outcome
    meta: dict[str, Any] = field(default_factory=dict)

    def to_dict(self, with_meta: bool = True) -> dict[str, Any]:
        out = {
            "config": self.config,
            "messages": self.messages,
            "rounds": [asdict(r) for r in self.rounds],
            "outcome": asdict(self.outcome),
        }
        if with_meta:
            out["meta"] = self.meta
        return out

    def to_json(self, with_meta: bool = True) -> str:
        return json.dumps(self.to_dict(with_meta), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SessionTranscript":
        o = dict(d["outcome"])
        if o.get("quote") is not None:
            o["quote"] = tuple(o["quote"])
        return cls(d["config"], list(d["messages"]), [RoundRecord(**r) for r in d["rounds"]],
                   Outcome(**o), dict(d.get("meta", {})))

    def quotes(self) -> list[QuotedPrice]:
        return [QuotedPrice(r.p, r.P0, r.Ph) for r in self.rounds]


class DataAgent:
    """The data party: answers quotes with bundle offers and learns from gain reports."""

    def __init__(self, cfg: SessionConfig) -> None:
        self.cfg = cfg
        self.imperfect = cfg.setting == "imperfect"
        gains = None if self.imperfect else {e.id: cfg.oracle.gain(e.bundle) for e in cfg.catalog}
        self.state = DataState(cfg.catalog, gains, cfg.tol, cfg.data_cost)
        self.random = RandomBundleState(cfg.seed) if cfg.agent == "random_bundle" else None
        self.g: Optional[BundleGainEstimator] = None
        self.tried: frozenset[str] = frozenset()
        if self.imperfect:
            e = cfg.estimator
            self.g = BundleGainEstimator(cfg.catalog.features, e.embedding_dim, e.hidden, e.lr,
                                         e.clip_norm, e.updates_per_round, seed=cfg.seed)
        self.offers: dict[int, Optional[str]] = {}
        self.mse: dict[int, float] = {}

    def handle(self, msg: Message) -> list[Message]:
        if isinstance(msg, QuoteOffer):
            return [self._respond(msg)]
        if isinstance(msg, GainReport) and self.g is not None:
            bid = self.offers.get(msg.round)
            if bid is not None:
                bundle = self.cfg.catalog.get(bid).bundle
                self.g.observe(TrainingSample(bundle, msg.delta_g, msg.round))
                self.tried = self.tried | {bid}
                self.mse[msg.round] = self.g.buffer_mse()
        return []

    def _respond(self, msg: QuoteOffer) -> Message:
        q = QuotedPrice(msg.p, msg.P0, msg.Ph)
        T = msg.round
        if self.random is not None:
            d = random_bundle_offer(self.random, self.cfg.catalog, q, T)
        elif self.g is not None:
            tried = self.tried if self.cfg.explore_untried else None
            d = data_decide_imperfect(self.state, self.g, q, T, self.cfg.N, tried)
        else:
            d = data_decide_perfect(self.state, q, T)
        if isinstance(d, BreakdownFail):
            return Breakdown(T, d.case, d.reason)
        assert isinstance(d, (AcceptSuccess, ContinueWithBundle))
        self.offers[T] = d.bundle_id
        return BundleOffer(T, d.bundle_id, isinstance(d, AcceptSuccess))


class _Session:
    def __init__(self, cfg: SessionConfig, transport: Transport) -> None:
        self.cfg = cfg
        self.tr = transport
        self.log: list[str] = []
        self.rounds: list[RoundRecord] = []

    def send(self, msg: Message) -> None:
        self.log.append(encode(msg))
        self.tr.send(msg)

    def receive(self, T: int) -> Message:
        msg = self.tr.receive()
        self.log.append(encode(msg))
        if msg.round != T:
            raise TransportError(f"out-of-order message: expected round {T}, got {msg.round}")
        return msg

    def finish(self, T: int, kind: str, case: str, reason: str = "", q: Optional[QuotedPrice] = None,
               bundle_id: Optional[str] = None, dg: Optional[float] = None) -> Outcome:
        cfg = self.cfg
        out = Outcome(kind, case, T, reason=reason, task_cost=eval_cost(cfg.task_cost, T),
                      data_cost=eval_cost(cfg.data_cost, T))
        if kind == "success":
            assert q is not None and dg is not None
            pay = payment(q, dg)
            out.bundle_id, out.quote, out.delta_g = bundle_id, q.as_tuple(), dg
            out.payment, out.net_profit = pay, cfg.econ.u * dg - pay
            if bundle_id is not None:
                r = cfg.catalog.get(bundle_id).reserved
                out.dp, out.dP0 = q.p - r.p_l, q.P0 - r.P_l
            self.send(Accept(T, pay))
        else:
            self.send(Breakdown(T, case, reason))
        return out

    def run(self) -> Outcome:
        cfg = self.cfg
        imperfect = cfg.setting == "imperfect"
        s = cfg.task_state()
        f: Optional[PriceGainEstimator] = None
        if imperfect:
            e = cfg.estimator
            f = PriceGainEstimator(cfg.econ.u, cfg.econ.B, e.hidden, e.lr, e.clip_norm,
                                   e.updates_per_round, seed=cfg.seed)
        requote = increase_price_requoter(IncreasePriceState(cfg.gamma)) if cfg.agent == "increase_price" else None
        q = cfg.initial_quote or task_initial_quote(s)
        if not cfg.econ.admits(q):
            raise ConfigError(f"initial quote {q} violates p < u or Ph <= B")
        s = s.with_quote(q)
        T = 1
        while True:
            s = replace(s, current_quote=q)
            rec = RoundRecord(T, q.p, q.P0, q.Ph, task_cost=eval_cost(cfg.task_cost, T),
                              data_cost=eval_cost(cfg.data_cost, T))
            self.rounds.append(rec)
            try:
                self.send(QuoteOffer(T, q.p, q.P0, q.Ph))
                reply = self.receive(T)
                if isinstance(reply, Breakdown):
                    rec.decision = reply.case
                    return Outcome("fail", reply.case, T, reason=reply.reason,
                                   task_cost=rec.task_cost, data_cost=rec.data_cost)
                if not isinstance(reply, BundleOffer):
                    raise TransportError(f"expected a bundle offer, got {type(reply).__name__}")
                rec.bundle_id = reply.bundle_id
                dg: Optional[float] = None
                if reply.bundle_id is not None:
                    bundle = cfg.catalog.get(reply.bundle_id).bundle
                    dg = float(cfg.oracle.gain(bundle))
                    rec.delta_g, rec.payment = dg, payment(q, dg)
                    rec.net_profit = cfg.econ.u * dg - rec.payment
                    self.send(GainReport(T, dg))
                    if f is not None:
                        f.observe(TrainingSample(q, dg, T))
                        rec.mse_f = f.buffer_mse()
                if reply.final:
                    rec.decision = "II" if imperfect else "2"
                    return self.finish(T, "success", rec.decision, q=q, bundle_id=reply.bundle_id, dg=dg)
                try:
                    if imperfect:
                        if dg is None:
                            d = ContinueWithQuote(task_quote_imperfect(s, f, T + 1))
                        else:
                            d = task_decide_imperfect(s, dg, T, cfg.N, f)
                    else:
                        assert dg is not None
                        d = task_decide_perfect(s, dg, T, requote)
                except (QuoteExhausted, InfeasibleConfiguration) as exc:
                    rec.decision = "exhausted"
                    return self.finish(T, "fail", "exhausted", str(exc))
                if isinstance(d, BreakdownFail):
                    rec.decision = d.case
                    return self.finish(T, "fail", d.case, d.reason)
                if isinstance(d, AcceptSuccess):
                    rec.decision = d.case
                    return self.finish(T, "success", d.case, q=q, bundle_id=reply.bundle_id, dg=dg)
                assert isinstance(d, ContinueWithQuote)
                rec.decision = "continue"
                if T >= cfg.max_rounds:
                    return self.finish(T, "max_rounds", "max_rounds", f"no agreement in {cfg.max_rounds} rounds")
                q = d.quote
                T += 1
            except TransportError as exc:
                rec.decision = "transport"
                return self._transport_failure(T, str(exc))

    def _transport_failure(self, T: int, reason: str) -> Outcome:
        try:
            self.send(Breakdown(T, "transport", reason))
        except TransportError:
            pass
        return Outcome("fail", "transport", T, reason=reason,
                       task_cost=eval_cost(self.cfg.task_cost, T), data_cost=eval_cost(self.cfg.data_cost, T))


def _session(cfg: SessionConfig, transport: Optional[Transport] = None,
             agent: Optional[DataAgent] = None) -> SessionTranscript:
    cfg.validate()
    agent = agent or DataAgent(cfg)
    server = None
    if transport is None:
        if cfg.transport == "stream":
            server = DataServer(agent.handle)
            transport = StreamTransport(*server.address, timeout=cfg.timeout)
        else:
            transport = InMemoryTransport(agent.handle)
    sess = _Session(cfg, transport)
    try:
        outcome = sess.run()
    finally:
        transport.close()
        if server is not None:
            server.close()
    if cfg.setting == "imperfect":
        # rounds without a gain report keep the previous buffer error
        last_f = last_g = None
        for r in sess.rounds:
            last_f = r.mse_f if r.mse_f is not None else last_f
            last_g = agent.mse.get(r.round, last_g)
            r.mse_f, r.mse_g = last_f, last_g
    return SessionTranscript(cfg.echo(), sess.log, sess.rounds, outcome,
                             {"transport": getattr(transport, "name", type(transport).__name__)})


def run_session(cfg: SessionConfig, transport: Optional[Transport] = None,
                agent: Optional[DataAgent] = None) -> SessionTranscript:
    """Run one perfect-information session (baselines included)."""
    if cfg.setting != "perfect":
        cfg = replace(cfg, setting="perfect")
    return _session(cfg, transport, agent)


def run_session_imperfect(cfg: SessionConfig, transport: Optional[Transport] = None,
                          agent: Optional[DataAgent] = None) -> SessionTranscript:
    """Run one session where both parties estimate gains online."""
    if cfg.setting != "imperfect":
        cfg = replace(cfg, setting="imperfect")
    return _session(cfg, transport, agent)


def run(cfg: SessionConfig, **kw) -> SessionTranscript:
    return run_session_imperfect(cfg, **kw) if cfg.setting == "imperfect" else run_session(cfg, **kw)

