"""Vertically split tabular datasets.

A schema assigns each CSV column to the task or data party and picks an
encoding:

- ``numeric``: parsed as float, missing values replaced by the column mean;
- ``onehot``: one indicator per sorted level, plus a missing-value indicator
  when the column has gaps;
- ``code``: sorted levels mapped to 0..k-1, missing mapped to -1.

Indicator columns of one source column always stay with its party.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np
import pandas as pd
import yaml

ENCODINGS = ("numeric", "onehot", "code")
PARTIES = ("task", "data")
BUILTIN = ("titanic", "credit", "adult")
DATA_DIR_ENV = "VFLBARGAIN_DATA_DIR"


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    name: str
    task_features: np.ndarray
    data_features: np.ndarray
    labels: np.ndarray
    task_feature_names: tuple[str, ...]
    data_feature_names: tuple[str, ...]
    # source column -> indices into data_features
    data_groups: Mapping[str, tuple[int, ...]]

    def __post_init__(self) -> None:
        n = len(self.labels)
        if n < 1:
            raise DatasetError("dataset has no rows")
        if self.task_features.shape[0] != n or self.data_features.shape[0] != n:
            raise DatasetError("row counts of the party blocks disagree")
        if self.task_features.shape[1] < 1 or self.data_features.shape[1] < 1:
            raise DatasetError("each party needs at least one feature column")
        if not set(np.unique(self.labels).tolist()) <= {0, 1}:
            raise DatasetError("labels must be 0/1")

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    @property
    def d_t(self) -> int:
        return self.task_features.shape[1]

    @property
    def d_d(self) -> int:
        return self.data_features.shape[1]

    @property
    def data_sources(self) -> tuple[str, ...]:
        """Source column names of the data party; these are the tradable feature ids."""
        return tuple(self.data_groups)

    def data_columns(self, features) -> np.ndarray:
        cols: list[int] = []
        for f in sorted(features):
            if f not in self.data_groups:
                raise KeyError(f"unknown data-party feature {f!r}")
            cols.extend(self.data_groups[f])
        return self.data_features[:, sorted(cols)]


def read_schema(schema: Union[str, Path, Mapping]) -> dict:
    if isinstance(schema, Mapping):
        return dict(schema)
    with open(schema, encoding="utf-8") as fh:
        out = yaml.safe_load(fh)
    if not isinstance(out, dict):
        raise DatasetError(f"schema {schema} is not a mapping")
    return out


def _norm(v) -> str:
    # adult marks test-split labels with a trailing period
    return str(v).strip().rstrip(".")


def _encode(col: pd.Series, name: str, enc: str) -> tuple[np.ndarray, list[str]]:
    missing = col.isna().to_numpy()
    if enc == "numeric":
        try:
            x = pd.to_numeric(col, errors="raise").to_numpy(dtype=float)
        except (ValueError, TypeError) as exc:
            raise DatasetError(f"column {name!r} is not numeric: {exc}") from None
        if missing.all():
            x = np.zeros(len(col))
        elif missing.any():
            x = np.where(missing, np.nanmean(x), x)
        return x[:, None], [name]
    values = col.map(lambda v: None if pd.isna(v) else _norm(v))
    levels = sorted({v for v in values if v is not None})
    if enc == "code":
        lookup = {v: i for i, v in enumerate(levels)}
        x = np.array([-1.0 if v is None else float(lookup[v]) for v in values])
        return x[:, None], [name]
    arr = values.to_numpy(dtype=object)
    blocks = [(arr == lv).astype(float) for lv in levels]
    names = [f"{name}={lv}" for lv in levels]
    if missing.any():
        blocks.append(missing.astype(float))
        names.append(f"{name}=nan")
    return np.stack(blocks, axis=1), names


def load_dataset(path: Union[str, Path], schema: Union[str, Path, Mapping]) -> Dataset:
    """Read ``path`` and split/encode its columns per ``schema``."""
    sch = read_schema(schema)
    try:
        frame = pd.read_csv(path, skipinitialspace=True, dtype=str, keep_default_na=True)
    except (OSError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise DatasetError(f"cannot parse {path}: {exc}") from None
    label = sch.get("label")
    if isinstance(label, str):
        label = {"column": label}
    if not label or "column" not in label:
        raise DatasetError("schema must name a label column")
    columns = sch.get("columns") or {}
    for c in [label["column"], *columns]:
        if c not in frame.columns:
            raise DatasetError(f"schema references missing column {c!r}")

    raw = frame[label["column"]]
    if raw.isna().any():
        raise DatasetError("label column has missing values")
    lab = raw.map(_norm)
    classes = sorted(set(lab))
    if len(classes) > 2:
        raise DatasetError(f"label is not binary: {classes[:5]}")
    positive = _norm(label["positive"]) if "positive" in label else classes[-1]
    y = (lab == positive).to_numpy(dtype=int)

    blocks: dict[str, list[np.ndarray]] = {"task": [], "data": []}
    names: dict[str, list[str]] = {"task": [], "data": []}
    groups: dict[str, tuple[int, ...]] = {}
    for c, spec in columns.items():
        spec = {"encoding": "numeric", **(spec or {})}
        party, enc = spec.get("party"), spec["encoding"]
        if party not in PARTIES:
            raise DatasetError(f"column {c!r} needs party task or data, got {party!r}")
        if enc not in ENCODINGS:
            raise DatasetError(f"column {c!r} has unknown encoding {enc!r}")
        x, nm = _encode(frame[c], c, enc)
        if party == "data":
            start = len(names["data"])
            groups[c] = tuple(range(start, start + len(nm)))
        blocks[party].append(x)
        names[party].extend(nm)

    def stack(party: str) -> np.ndarray:
        if not blocks[party]:
            return np.zeros((len(y), 0))
        return np.concatenate(blocks[party], axis=1)

    return Dataset(
        name=str(sch.get("name", Path(path).stem)),
        task_features=stack("task"),
        data_features=stack("data"),
        labels=y,
        task_feature_names=tuple(names["task"]),
        data_feature_names=tuple(names["data"]),
        data_groups=groups,
    )


def schema_path(name: str) -> Path:
    return Path(str(resources.files("vflbargain.data").joinpath("schemas", f"{name}.yaml")))


def locate_builtin(name: str, data_dir: Optional[Union[str, Path]] = None) -> Path:
    """Path of a built-in dataset's CSV: ``data_dir``, then the env var, then bundled data."""
    if name not in BUILTIN:
        raise DatasetError(f"unknown dataset {name!r}; choose from {BUILTIN}")
    fname = read_schema(schema_path(name))["file"]
    dirs = [data_dir, os.environ.get(DATA_DIR_ENV), str(resources.files("vflbargain.data"))]
    for d in dirs:
        if d and (Path(d) / fname).is_file():
            return Path(d) / fname
    raise DatasetError(f"{fname} for dataset {name!r} not found; set {DATA_DIR_ENV} or pass data_dir")


def load_builtin(name: str, data_dir: Optional[Union[str, Path]] = None) -> Dataset:
    return load_dataset(locate_builtin(name, data_dir), schema_path(name))
