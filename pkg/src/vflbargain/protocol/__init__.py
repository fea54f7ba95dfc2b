"""Wire messages, transports and the bargaining session loop."""

from .engine import (ConfigError, DataAgent, EstimatorConfig, Outcome, RoundRecord, SessionConfig,
                     SessionTranscript, run, run_session, run_session_imperfect)
from .messages import Accept, Breakdown, BundleOffer, DecodeError, GainReport, QuoteOffer, decode, encode
from .transport import DataServer, InMemoryTransport, StreamTransport, TransportError

__all__ = ["ConfigError", "DataAgent", "EstimatorConfig", "Outcome", "RoundRecord", "SessionConfig",
           "SessionTranscript", "run", "run_session", "run_session_imperfect", "Accept", "Breakdown",
           "BundleOffer", "DecodeError", "GainReport", "QuoteOffer", "decode", "encode", "DataServer",
           "InMemoryTransport", "StreamTransport", "TransportError"]
