"""Forward finite differences and the paired two-slice table they feed.

A difference of order n at time t consumes raw values t..t+n, so usable rows
are truncated from the end of each trajectory; rows never straddle a
trajectory boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import ColumnRef, TimeSeriesDataset, VariableId


def difference(series: Sequence[float] | np.ndarray, order: int) -> np.ndarray:
    """n-th forward difference; order 0 returns the series unchanged."""
    if order < 0:
        raise ValueError("difference order must be >= 0")
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 1:
        raise ValueError("difference expects a 1-d sequence")
    if len(arr) <= order:
        raise ValueError(
            f"series of length {len(arr)} is too short for order {order}"
        )
    return np.diff(arr, n=order) if order else arr.copy()


@dataclass(frozen=True)
class TwoSliceDataset:
    """Variables and their differences at paired adjacent times.

    Each column is a (variable, slice) pair; slice 0 holds the value at time
    t and slice 1 the value at t+1 of the same difference series.  One row
    per usable t, tagged with its source trajectory.
    """

    columns: tuple[ColumnRef, ...]
    values: np.ndarray  # (n_rows, n_columns), read-only
    row_trajectory: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.row_trajectory), len(self.columns)):
            raise ValueError("two-slice table shape mismatch")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def index_of(self, col: ColumnRef) -> int:
        return self.columns.index(col)

    def column_values(self, col: ColumnRef) -> np.ndarray:
        return self.values[:, self.index_of(col)]

    def select(self, columns: Iterable[ColumnRef]) -> "TwoSliceDataset":
        """View restricted to the given columns; no recomputation."""
        cols = tuple(columns)
        idx = [self.index_of(c) for c in cols]
        vals = self.values[:, idx]
        vals.flags.writeable = False
        return TwoSliceDataset(cols, vals, self.row_trajectory)

    def slice_columns(self, slc: int) -> tuple[ColumnRef, ...]:
        return tuple(c for c in self.columns if c[1] == slc)


def build_two_slice(data: TimeSeriesDataset, max_order: int,
                    retained: Iterable[VariableId] | None = None) -> TwoSliceDataset:
    """Assemble the two-slice table of all base variables plus retained differences.

    ``retained`` selects which difference variables (order >= 1, order <=
    max_order) appear; None retains every difference up to max_order.  Row
    count is sum over trajectories of (length - max_order - 1).
    """
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    if retained is None:
        retained_set = {
            VariableId(v.name, j)
            for v in data.variables for j in range(1, max_order + 1)
        }
    else:
        retained_set = set(retained)
        base_names = {v.name for v in data.variables}
        for r in retained_set:
            if r.order < 1 or r.name not in base_names:
                raise ValueError(f"retained id {r.token()} is not a difference of a data variable")
            if r.order > max_order:
                raise ValueError(
                    f"retained id {r.token()} exceeds max order {max_order}"
                )

    variables = []
    for v in sorted(data.variables):
        variables.append(v)
        variables.extend(sorted(r for r in retained_set if r.name == v.name))
    columns: tuple[ColumnRef, ...] = tuple(
        (v, s) for v in variables for s in (0, 1)
    )

    blocks = []
    row_traj: list[str] = []
    for traj_id, arr in data.trajectories:
        n = arr.shape[0]
        usable = n - max_order - 1
        if usable < 1:
            raise ValueError(
                f"trajectory {traj_id!r} of length {n} is too short for "
                f"max order {max_order} (needs > {max_order + 1} rows)"
            )
        diffs = {
            v: difference(arr[:, data.column(v.base)], v.order)
            for v in variables
        }
        cols = [diffs[v][s:s + usable] for v, s in columns]
        blocks.append(np.column_stack(cols))
        row_traj.extend([traj_id] * usable)
    values = np.vstack(blocks)
    values.flags.writeable = False
    return TwoSliceDataset(columns, values, tuple(row_traj))
