"""Imputation, standardization and one-hot encoding fitted on the training frame."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .dataset import ColumnSpec, FeatureFrame, validate_schema
from .errors import AllMissingColumn, DataError, NonFiniteInput, SchemaMismatch

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NumericStats:
    median: float
    mean: float
    std: float


@dataclass(frozen=True)
class CategoricalStats:
    mode: int
    roster: tuple[int, ...]  # category indices seen in train, schema order


@dataclass(frozen=True)
class PreprocessPlan:
    """Training-set statistics plus the ordered design-matrix column roster."""

    schema: tuple[ColumnSpec, ...]
    include_sensitive: bool
    numeric: dict[str, NumericStats]
    categorical: dict[str, CategoricalStats]
    dropped: tuple[str, ...]
    columns: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "schema": [c.to_dict() for c in self.schema],
            "include_sensitive": self.include_sensitive,
            "numeric": {
                k: {"median": s.median, "mean": s.mean, "std": s.std} for k, s in self.numeric.items()
            },
            "categorical": {
                k: {"mode": s.mode, "roster": list(s.roster)} for k, s in self.categorical.items()
            },
            "dropped": list(self.dropped),
            "columns": list(self.columns),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessPlan":
        return cls(
            schema=validate_schema(ColumnSpec.from_dict(c) for c in d["schema"]),
            include_sensitive=bool(d["include_sensitive"]),
            numeric={k: NumericStats(**v) for k, v in d["numeric"].items()},
            categorical={
                k: CategoricalStats(mode=v["mode"], roster=tuple(v["roster"]))
                for k, v in d["categorical"].items()
            },
            dropped=tuple(d["dropped"]),
            columns=tuple(d["columns"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PreprocessPlan":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    column_names: tuple[str, ...]
    unseen: dict[str, int]  # rows per column whose category was absent from train

    @property
    def row_count(self) -> int:
        return self.values.shape[0]

    @property
    def col_count(self) -> int:
        return self.values.shape[1]


def _is_constant(std: float, mean: float) -> bool:
    return std <= 1e-12 * max(1.0, abs(mean))


def _check_finite(name: str, col: np.ndarray) -> None:
    if np.isinf(col).any():
        raise NonFiniteInput(f"column {name!r} contains infinite values")


def fit_plan(train: FeatureFrame, include_sensitive: bool = False) -> PreprocessPlan:
    """Learn medians, modes and z-score parameters from ``train``.

    Constant columns (a single observed value, or a single observed
    category) are dropped and listed in ``plan.dropped``. Sensitive columns
    are left out unless ``include_sensitive`` is set.
    """
    if train.n_rows < 2:
        raise DataError(f"need at least 2 training rows, got {train.n_rows}")
    numeric, categorical, dropped, columns = {}, {}, [], []
    for spec in train.feature_specs:
        if spec.is_sensitive and not include_sensitive:
            continue
        if spec.is_numeric:
            col = train.numeric[spec.name]
            observed = col[~np.isnan(col)]
            if observed.size == 0:
                raise AllMissingColumn(f"column {spec.name!r} has no observed values")
            _check_finite(spec.name, observed)
            median = float(np.median(observed))
            imputed = np.where(np.isnan(col), median, col)
            mean, std = float(imputed.mean()), float(imputed.std())
            if _is_constant(std, mean):
                dropped.append(spec.name)
                continue
            numeric[spec.name] = NumericStats(median, mean, std)
            columns.append(spec.name)
        else:
            codes = train.categorical[spec.name]
            observed = codes[codes >= 0]
            if observed.size == 0:
                raise AllMissingColumn(f"column {spec.name!r} has no observed values")
            counts = np.bincount(observed, minlength=len(spec.categories))
            roster = tuple(int(i) for i in np.flatnonzero(counts))
            if len(roster) < 2:
                dropped.append(spec.name)
                continue
            categorical[spec.name] = CategoricalStats(int(np.argmax(counts)), roster)
            columns.extend(f"{spec.name}={spec.categories[i]}" for i in roster)
    return PreprocessPlan(
        schema=train.schema,
        include_sensitive=include_sensitive,
        numeric=numeric,
        categorical=categorical,
        dropped=tuple(dropped),
        columns=tuple(columns),
    )


def apply_plan(plan: PreprocessPlan, frame: FeatureFrame) -> DesignMatrix:
    """Turn ``frame`` into a dense design matrix using only plan statistics."""
    if frame.schema != plan.schema:
        raise SchemaMismatch("frame schema differs from the schema the plan was fitted on")
    blocks, unseen = [], {}
    for spec in frame.feature_specs:
        if spec.name in plan.numeric:
            s = plan.numeric[spec.name]
            col = frame.numeric[spec.name]
            _check_finite(spec.name, col)
            col = np.where(np.isnan(col), s.median, col)
            blocks.append(((col - s.mean) / s.std)[:, None])
        elif spec.name in plan.categorical:
            s = plan.categorical[spec.name]
            codes = frame.categorical[spec.name]
            codes = np.where(codes < 0, s.mode, codes)
            block = (codes[:, None] == np.asarray(s.roster)[None, :]).astype(float)
            n_unseen = int((block.sum(axis=1) == 0).sum())
            if n_unseen:
                unseen[spec.name] = n_unseen
            blocks.append(block)
    if unseen:
        log.warning("categories unseen in training mapped to zero blocks: %s", unseen)
    values = np.hstack(blocks) if blocks else np.empty((frame.n_rows, 0))
    return DesignMatrix(values=values, column_names=plan.columns, unseen=unseen)
