"""Bargaining messages and their line-oriented wire format.

One message per line: ``TAG round key=value ...``. Reals use the shortest
repr that round-trips (integral values drop the ``.0``), strings are JSON
quoted, ``none`` encodes a missing value and booleans are ``true``/``false``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, fields
from typing import Optional, Union


class DecodeError(ValueError):
    def __init__(self, message: str, line_no: Optional[int] = None) -> None:
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}" if line_no is not None else message)


@dataclass(frozen=True)
class QuoteOffer:
    round: int
    p: float
    P0: float
    Ph: float


@dataclass(frozen=True)
class BundleOffer:
    round: int
    bundle_id: Optional[str]
    # True when the data party closes the deal with this bundle
    final: bool = False


@dataclass(frozen=True)
class GainReport:
    round: int
    delta_g: float


@dataclass(frozen=True)
class Accept:
    round: int
    payment: float


@dataclass(frozen=True)
class Breakdown:
    round: int
    case: str
    reason: str = ""


Message = Union[QuoteOffer, BundleOffer, GainReport, Accept, Breakdown]

TAGS: dict[str, type] = {
    "QUOTE": QuoteOffer,
    "BUNDLE": BundleOffer,
    "GAIN": GainReport,
    "ACCEPT": Accept,
    "BREAKDOWN": Breakdown,
}
_TAG_OF = {cls: tag for tag, cls in TAGS.items()}
TERMINAL = (Accept, Breakdown)


def format_real(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot encode non-finite value {x}")
    if x == int(x) and abs(x) < 2**53:
        return str(int(x))
    return repr(float(x))


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return format_real(float(v))
    return json.dumps(str(v))


def encode(msg: Message) -> str:
    tag = _TAG_OF[type(msg)]
    parts = [tag, str(msg.round)]
    for f in fields(msg):
        if f.name != "round":
            parts.append(f"{f.name}={_format_value(getattr(msg, f.name))}")
    return " ".join(parts)


_FIELD = re.compile(r'\s+(\w+)=("(?:[^"\\]|\\.)*"|[^\s"]+)')


def _parse_value(raw: str, kind: str):
    if raw == "none":
        return None
    if kind == "str":
        if not raw.startswith('"'):
            raise ValueError(f"expected quoted string, got {raw!r}")
        return json.loads(raw)
    if kind == "bool":
        if raw not in ("true", "false"):
            raise ValueError(f"expected true/false, got {raw!r}")
        return raw == "true"
    v = float(raw)
    if not math.isfinite(v):
        raise ValueError(f"non-finite real {raw!r}")
    return v


_KINDS = {
    QuoteOffer: {"p": "real", "P0": "real", "Ph": "real"},
    BundleOffer: {"bundle_id": "str", "final": "bool"},
    GainReport: {"delta_g": "real"},
    Accept: {"payment": "real"},
    Breakdown: {"case": "str", "reason": "str"},
}


def decode(line: str, line_no: Optional[int] = None) -> Message:
    line = line.rstrip("\r\n")
    head = re.match(r"([A-Z]+) (\d+)", line)
    if head is None:
        raise DecodeError(f"malformed header in {line!r}", line_no)
    tag, rnd = head.group(1), int(head.group(2))
    cls = TAGS.get(tag)
    if cls is None:
        raise DecodeError(f"unknown tag {tag!r}", line_no)
    pos = head.end()
    values: dict[str, object] = {}
    kinds = _KINDS[cls]
    while pos < len(line):
        m = _FIELD.match(line, pos)
        if m is None:
            raise DecodeError(f"cannot parse fields at column {pos}: {line[pos:]!r}", line_no)
        key, raw = m.group(1), m.group(2)
        if key not in kinds or key in values:
            raise DecodeError(f"unexpected field {key!r} in {tag}", line_no)
        try:
            values[key] = _parse_value(raw, kinds[key])
        except ValueError as exc:
            raise DecodeError(f"bad value for {key}: {exc}", line_no) from None
        pos = m.end()
    missing = [k for k in kinds if k not in values]
    if missing:
        raise DecodeError(f"{tag} is missing fields {missing}", line_no)
    if cls is QuoteOffer and any(values[k] is None for k in kinds):
        raise DecodeError("quote fields cannot be none", line_no)
    if cls in (GainReport, Accept) and any(values[k] is None for k in kinds):
        raise DecodeError(f"{tag} value cannot be none", line_no)
    if cls is Breakdown and values["case"] is None:
        raise DecodeError("breakdown needs a case", line_no)
    if cls is Breakdown and values["reason"] is None:
        values["reason"] = ""
    if cls is BundleOffer and values["final"] is None:
        values["final"] = False
    return cls(rnd, **values)


def decode_lines(text: str) -> list[Message]:
    """Decode a newline-separated message log; errors carry 1-based line numbers."""
    return [decode(line, i) for i, line in enumerate(text.splitlines(), start=1) if line.strip()]
