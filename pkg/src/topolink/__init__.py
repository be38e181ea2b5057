"""Temporal link prediction from low-order topological features."""
from .evaluate import RocResult, auc, cross_validate, drift_report
from .features import COLUMN_NAMES, FeatureMatrix, extract_window
from .graph_store import Snapshot, SnapshotWindow, TemporalEdgeList, ingest, num_possible_pairs, snapshot
from .model import ForestConfig, LogisticConfig, SearchSpec, fit_forest, fit_logistic, random_search
from .pipeline import RunConfig, run, score
from .reduce import FeatureGroups, PcaGroupModel, apply_reducer, fit_reducer
from .sampling import SamplingConfig, balanced_undersample, candidate_pairs, holdout_split, label_pairs
from .synthetic import gen_synthetic

__version__ = "0.1.0"
