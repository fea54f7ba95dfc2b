"""Plot-ready CSV and JSON outputs of an experiment."""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from ..market import BundleCatalog
from ..protocol.engine import SessionTranscript
from .experiment import ExperimentResult

log = logging.getLogger(__name__)

RAW_COLUMNS = ("rep", "seed", "round", "p", "P0", "Ph", "bundle_id", "delta_g", "payment", "net_profit",
               "task_cost", "data_cost", "mse_f", "mse_g", "decision", "outcome", "case")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(rows: Iterable[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def raw_csv(transcripts: Sequence[SessionTranscript], seed_base: int = 0) -> str:
    rows = []
    for i, t in enumerate(transcripts):
        for r in t.rounds:
            rows.append((i, seed_base + i, r.round, r.p, r.P0, r.Ph, r.bundle_id, r.delta_g, r.payment,
                         r.net_profit, r.task_cost, r.data_cost, r.mse_f, r.mse_g, r.decision,
                         t.outcome.kind, t.outcome.case))
    return _csv(rows, RAW_COLUMNS)


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def emit_density(transcripts: Sequence[SessionTranscript], catalog: BundleCatalog, bins: int = 20) -> str:
    """Histogram CSV of final p, P0 and their margins over the traded bundle's reserved price."""
    series: dict[str, list[float]] = {"p": [], "P0": [], "dp": [], "dP0": [], "p_l": [], "P_l": []}
    for t in transcripts:
        o = t.outcome
        if not o.success or o.quote is None or o.bundle_id is None:
            continue
        r = catalog.get(o.bundle_id).reserved
        series["p"].append(o.quote[0])
        series["P0"].append(o.quote[1])
        series["dp"].append(o.quote[0] - r.p_l)
        series["dP0"].append(o.quote[1] - r.P_l)
        series["p_l"].append(r.p_l)
        series["P_l"].append(r.P_l)
    rows = []
    if not series["p"]:
        log.warning("no successful runs; density artifact is empty")
    for name, vals in series.items():
        if not vals:
            continue
        x = np.asarray(vals)
        if x.min() == x.max():
            rows.append((name, float(x[0]), float(x[0]), len(x), 1.0))
            continue
        counts, edges = np.histogram(x, bins=bins)
        for c, lo, hi in zip(counts.tolist(), edges[:-1].tolist(), edges[1:].tolist()):
            rows.append((name, lo, hi, c, c / len(x)))
    return _csv(rows, ("quantity", "bin_low", "bin_high", "count", "fraction"))


def emit_mse_curves(transcripts: Sequence[SessionTranscript]) -> str:
    """Mean per-round buffer MSE of both estimators across runs."""
    max_r = max((len(t.rounds) for t in transcripts), default=0)
    rows = []
    for r in range(max_r):
        f = [t.rounds[r].mse_f for t in transcripts if len(t.rounds) > r and t.rounds[r].mse_f is not None]
        g = [t.rounds[r].mse_g for t in transcripts if len(t.rounds) > r and t.rounds[r].mse_g is not None]
        if not f and not g:
            continue
        rows.append((r + 1, float(np.mean(f)) if f else None, float(np.mean(g)) if g else None, len(f), len(g)))
    return _csv(rows, ("round", "mse_f", "mse_g", "n_f", "n_g"))


def write_outputs(res: ExperimentResult, out: Path, transcripts: bool = True) -> dict[str, Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "raw": out / "raw.csv",
        "summary": out / "summary.json",
        "density": out / "density.csv",
    }
    paths["raw"].write_text(raw_csv(res.transcripts, res.config.seed_base), encoding="utf-8")
    paths["summary"].write_text(dumps(res.summary), encoding="utf-8")
    paths["density"].write_text(emit_density(res.transcripts, res.world.catalog), encoding="utf-8")
    if res.config.setting == "imperfect":
        paths["mse"] = out / "mse.csv"
        paths["mse"].write_text(emit_mse_curves(res.transcripts), encoding="utf-8")
    if transcripts:
        tdir = out / "transcripts"
        tdir.mkdir(exist_ok=True)
        for i, t in enumerate(res.transcripts):
            (tdir / f"run_{i:04d}.json").write_text(t.to_json(), encoding="utf-8")
        paths["transcripts"] = tdir
    return paths


def read_raw_csv(path: Path) -> list[dict[str, Optional[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: (v if v != "" else None) for k, v in row.items()} for row in csv.DictReader(fh)]
