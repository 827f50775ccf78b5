"""Prediction accuracy metrics and cross-model rank comparison.

RMSE and MAE are computed over a caller-chosen entry set (the held-out
test positions in the standard protocol). For comparing several models
across dataset cases, `friedman_rank` ranks the models within each row of
a result table and averages the ranks column-wise; lower mean rank means
more accurate when the metric is an error.
"""

import csv
from dataclasses import dataclass
from typing import IO, List, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateTableError, DimMismatchError, EmptyEvalSetError
from .model import ExpandedCPModel
from .tensor import ObservedTensor


@dataclass(frozen=True)
class Metrics:
    """RMSE and MAE over `count` evaluated entries."""

    rmse: float
    mae: float
    count: int


def evaluate(model: ExpandedCPModel, t: ObservedTensor, positions) -> Metrics:
    """RMSE and MAE of the model over the given entry positions."""
    if model.dims != t.dims:
        raise DimMismatchError(f"model dims {model.dims} != tensor dims {t.dims}")
    positions = np.asarray(positions, dtype=np.int64)
    if positions.size == 0:
        raise EmptyEvalSetError("no positions to evaluate")
    ii, jj, kk, y = t.gather(positions)
    res = y - model.predict_entries(ii, jj, kk)
    rmse = float(np.sqrt(np.mean(res * res)))
    mae = float(np.mean(np.abs(res)))
    return Metrics(rmse=rmse, mae=mae, count=int(positions.size))


def aggregate(runs: Sequence[Metrics]) -> Metrics:
    """Arithmetic mean of RMSE and MAE across repeated runs."""
    if not runs:
        raise EmptyEvalSetError("no runs to aggregate")
    return Metrics(
        rmse=float(np.mean([r.rmse for r in runs])),
        mae=float(np.mean([r.mae for r in runs])),
        count=int(sum(r.count for r in runs)),
    )


@dataclass
class ResultTable:
    """Metric values for several models (columns) on several cases (rows)."""

    row_ids: List[str]
    col_ids: List[str]
    values: np.ndarray  # shape (rows, cols)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.row_ids), len(self.col_ids)):
            raise DegenerateTableError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.row_ids)} rows x {len(self.col_ids)} columns"
            )
        if self.values.size and not np.isfinite(self.values).all():
            raise DegenerateTableError("table cells must be finite")


def friedman_rank(table: ResultTable, lower_is_better: bool = True) -> np.ndarray:
    """Column-wise mean rank across rows, ties averaged.

    Within each row the models are ranked 1..n_models, rank 1 going to the
    best value (smallest when lower_is_better). The returned vector is the
    per-model mean over rows.
    """
    if len(table.col_ids) < 2 or len(table.row_ids) < 1:
        raise DegenerateTableError("ranking needs >= 2 models and >= 1 row")
    cells = table.values if lower_is_better else -table.values
    ranks = np.vstack([rankdata(row, method="average") for row in cells])
    return ranks.mean(axis=0)


def write_result_csv(
    table: ResultTable, sink: IO[str], mean_ranks: Optional[np.ndarray] = None
) -> None:
    """Header of model ids, one row per case, optional final F-Rank row."""
    writer = csv.writer(sink)
    writer.writerow(["case", *table.col_ids])
    for row_id, row in zip(table.row_ids, table.values):
        writer.writerow([row_id, *[repr(v) for v in row]])
    if mean_ranks is not None:
        writer.writerow(["F-Rank", *[repr(float(v)) for v in mean_ranks]])


def read_result_csv(source: IO[str]) -> ResultTable:
    """Read a result table; any trailing F-Rank row is dropped."""
    reader = csv.reader(source)
    rows = [row for row in reader if row]
    if len(rows) < 2:
        raise DegenerateTableError("result CSV needs a header and at least one row")
    col_ids = rows[0][1:]
    row_ids, values = [], []
    for row in rows[1:]:
        if row[0] == "F-Rank":
            continue
        row_ids.append(row[0])
        values.append([float(v) for v in row[1:]])
    return ResultTable(row_ids=row_ids, col_ids=col_ids, values=np.asarray(values))
