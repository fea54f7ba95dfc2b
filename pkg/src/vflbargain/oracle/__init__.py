"""Datasets, learners and gain oracles."""

from .datasets import Dataset, DatasetError, load_builtin, load_dataset
from .oracles import GainOracle, OracleError, SyntheticOracle, VflOracle, relative_gain

__all__ = ["Dataset", "DatasetError", "load_builtin", "load_dataset", "GainOracle", "OracleError",
           "SyntheticOracle", "VflOracle", "relative_gain"]
