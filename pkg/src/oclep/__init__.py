"""One-class anomaly detection by the minimal length of jumping emerging
patterns (OCLEP+, with the mean-length OCLEP variant as an option)."""

from .dataset import (
    AttributeSchema,
    Instance,
    ItemizedDataset,
    ItemizedInstance,
    Pattern,
    build_schema,
    fit_discretizer,
    growth_rate,
    itemize,
    itemize_all,
    load_table,
    matches,
    support,
)
from .detector import DetectorModel, HyperParams, classify, explain, score, train
from .errors import DataError, OclepError, UsageError
from .evaluation import ConfusionCounts, MetricsReport, confusion, metrics, sweep
from .miner import INF, JepSet, border_diff, diff_edge, length_statistic, minimize_family

__version__ = "0.1.0"
