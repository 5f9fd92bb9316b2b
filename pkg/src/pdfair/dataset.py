"""Loan-default tabular data: schemas, CSV ingestion, synthesis and splitting."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.optimize import brentq
from scipy.special import expit, ndtr

from .bands import DECADE_BANDS, assign_bands
from .errors import (
    BadTarget,
    DataError,
    DegenerateConfig,
    MissingColumn,
    ParseError,
    TooFewRows,
    UnknownAttribute,
)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
TARGET = "target"
SENSITIVE_CATEGORICAL = "sensitive-categorical"
SENSITIVE_NUMERIC = "sensitive-numeric"
KINDS = (NUMERIC, CATEGORICAL, TARGET, SENSITIVE_CATEGORICAL, SENSITIVE_NUMERIC)

DEFAULT_NA_TOKENS = ("", "NA", "N/A", "null")


@dataclass(frozen=True)
class ColumnSpec:
    """One column of a loan-data schema.

    ``categories`` is required for categorical kinds. On the target column it
    is optional: when given it must hold exactly two tokens, the first mapped
    to 0 (repaid) and the second to 1 (default). ``synth_range`` only affects
    :func:`synthesize`.
    """

    name: str
    kind: str
    categories: tuple[str, ...] = ()
    na_tokens: tuple[str, ...] = DEFAULT_NA_TOKENS
    synth_range: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        object.__setattr__(self, "na_tokens", tuple(self.na_tokens))
        if self.synth_range is not None:
            object.__setattr__(self, "synth_range", tuple(float(v) for v in self.synth_range))
        if self.kind not in KINDS:
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if len(set(self.categories)) != len(self.categories):
            raise DataError(f"column {self.name!r}: duplicate categories")
        if self.is_categorical and not self.categories:
            raise DataError(f"column {self.name!r}: categorical column needs categories")
        if self.kind == TARGET and self.categories and len(self.categories) != 2:
            raise DataError(f"target {self.name!r}: categories must list exactly two tokens")

    @property
    def is_categorical(self) -> bool:
        return self.kind in (CATEGORICAL, SENSITIVE_CATEGORICAL)

    @property
    def is_numeric(self) -> bool:
        return self.kind in (NUMERIC, SENSITIVE_NUMERIC)

    @property
    def is_sensitive(self) -> bool:
        return self.kind in (SENSITIVE_CATEGORICAL, SENSITIVE_NUMERIC)

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.categories:
            d["categories"] = list(self.categories)
        if self.na_tokens != DEFAULT_NA_TOKENS:
            d["na_tokens"] = list(self.na_tokens)
        if self.synth_range is not None:
            d["synth_range"] = list(self.synth_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnSpec":
        return cls(
            name=d["name"],
            kind=d["kind"],
            categories=tuple(d.get("categories", ())),
            na_tokens=tuple(d.get("na_tokens", DEFAULT_NA_TOKENS)),
            synth_range=d.get("synth_range"),
        )


def validate_schema(schema) -> tuple[ColumnSpec, ...]:
    schema = tuple(schema)
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise DataError("schema has duplicate column names")
    n_target = sum(c.kind == TARGET for c in schema)
    if n_target != 1:
        raise DataError(f"schema needs exactly one target column, found {n_target}")
    return schema


def target_spec(schema) -> ColumnSpec:
    return next(c for c in schema if c.kind == TARGET)


def preset_path(name: str) -> Path:
    """Path of a bundled preset file (``schema_kaggle_default.json`` etc)."""
    return Path(str(resources.files("pdfair") / "presets" / name))


def load_schema(source) -> tuple[ColumnSpec, ...]:
    """Read a schema JSON file, or a bundled preset when given its bare name.

    The document is either a list of column entries or an object with a
    ``"columns"`` list, in CSV column order.
    """
    if isinstance(source, (list, tuple)):
        doc = source
    else:
        path = Path(source)
        if not path.exists():
            candidate = preset_path(path.name if path.suffix else path.name + ".json")
            if not candidate.exists():
                raise DataError(f"schema file not found: {source}")
            path = candidate
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"schema {path}: invalid JSON ({exc})") from None
    if isinstance(doc, dict):
        doc = doc["columns"]
    return validate_schema(c if isinstance(c, ColumnSpec) else ColumnSpec.from_dict(c) for c in doc)


def schema_to_json(schema) -> str:
    return json.dumps({"columns": [c.to_dict() for c in schema]}, indent=2) + "\n"


@dataclass(frozen=True, eq=False)
class FeatureFrame:
    """Immutable loan table.

    Numeric columns are float arrays with NaN for missing cells; categorical
    columns hold indices into ``ColumnSpec.categories`` with -1 for missing.
    ``row_index`` records the position of each row in the source table so
    splits can be audited.
    """

    schema: tuple[ColumnSpec, ...]
    numeric: dict[str, np.ndarray]
    categorical: dict[str, np.ndarray]
    target: np.ndarray
    row_index: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.target)
        object.__setattr__(self, "schema", validate_schema(self.schema))
        target = np.asarray(self.target)
        if target.ndim != 1 or not np.isin(target, (0, 1)).all():
            raise BadTarget("target must be a vector of 0/1 values")
        object.__setattr__(self, "target", target.astype(np.int8))
        if self.row_index is None:
            object.__setattr__(self, "row_index", np.arange(n, dtype=np.int64))
        for spec in self.schema:
            if spec.kind == TARGET:
                continue
            store = self.numeric if spec.is_numeric else self.categorical
            if spec.name not in store:
                raise MissingColumn(f"frame lacks data for column {spec.name!r}")
            col = store[spec.name]
            if len(col) != n:
                raise DataError(f"column {spec.name!r} has {len(col)} rows, expected {n}")
            if spec.is_categorical and len(col) and col.max() >= len(spec.categories):
                raise DataError(f"column {spec.name!r} has a category index out of range")
        for arr in (*self.numeric.values(), *self.categorical.values(), self.target, self.row_index):
            arr.flags.writeable = False

    @property
    def n_rows(self) -> int:
        return len(self.target)

    def spec(self, name: str) -> ColumnSpec:
        for c in self.schema:
            if c.name == name:
                return c
        raise UnknownAttribute(f"no column named {name!r}")

    @property
    def feature_specs(self) -> list[ColumnSpec]:
        return [c for c in self.schema if c.kind != TARGET]

    def take(self, indices) -> "FeatureFrame":
        idx = np.asarray(indices, dtype=np.int64)
        return FeatureFrame(
            schema=self.schema,
            numeric={k: v[idx] for k, v in self.numeric.items()},
            categorical={k: v[idx] for k, v in self.categorical.items()},
            target=self.target[idx],
            row_index=self.row_index[idx],
        )

    def __eq__(self, other):
        if not isinstance(other, FeatureFrame):
            return NotImplemented
        return (
            self.schema == other.schema
            and self.numeric.keys() == other.numeric.keys()
            and self.categorical.keys() == other.categorical.keys()
            and all(np.array_equal(v, other.numeric[k], equal_nan=True) for k, v in self.numeric.items())
            and all(np.array_equal(v, other.categorical[k]) for k, v in self.categorical.items())
            and np.array_equal(self.target, other.target)
        )

    __hash__ = None


def load_csv(path, schema, delimiter: str = ",") -> FeatureFrame:
    """Parse a loan CSV according to ``schema``.

    Columns of the file that the schema does not mention are ignored. Errors
    carry the 1-based file line number (the header is line 1) and the column.
    """
    schema = validate_schema(schema)
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    try:
        raw = pd.read_csv(
            path, sep=delimiter, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8"
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from None
    header = [h.strip() for h in raw.columns]
    raw.columns = header
    for spec in schema:
        if spec.name not in header:
            raise MissingColumn(f"{path}: column {spec.name!r} not in header")

    numeric, categorical = {}, {}
    target = None
    for spec in schema:
        cells = raw[spec.name].str.strip()
        missing = cells.isin(spec.na_tokens).to_numpy()
        if spec.kind == TARGET:
            tokens = spec.categories or ("0", "1")
            codes = cells.map({tokens[0]: 0, tokens[1]: 1})
            bad = codes.isna().to_numpy() | missing
            if bad.any():
                row = int(np.flatnonzero(bad)[0])
                raise BadTarget(
                    f"{path}: line {row + 2}, column {spec.name!r}: "
                    f"target value {raw[spec.name].iloc[row]!r} not in {tokens}"
                )
            target = codes.to_numpy(dtype=np.int8)
        elif spec.is_numeric:
            values = pd.to_numeric(cells.where(~missing, "nan"), errors="coerce").to_numpy(dtype=float)
            bad = np.isnan(values) & ~missing & ~cells.str.lower().isin(("nan",)).to_numpy()
            if bad.any():
                row = int(np.flatnonzero(bad)[0])
                raise ParseError(
                    f"{path}: line {row + 2}, column {spec.name!r}: "
                    f"cannot parse {raw[spec.name].iloc[row]!r} as a number"
                )
            numeric[spec.name] = values
        else:
            lookup = {c: i for i, c in enumerate(spec.categories)}
            codes = cells.map(lookup)
            bad = codes.isna().to_numpy() & ~missing
            if bad.any():
                row = int(np.flatnonzero(bad)[0])
                raise ParseError(
                    f"{path}: line {row + 2}, column {spec.name!r}: "
                    f"{raw[spec.name].iloc[row]!r} is not one of {list(spec.categories)}"
                )
            categorical[spec.name] = codes.fillna(-1).to_numpy(dtype=np.int64)
    return FeatureFrame(schema=schema, numeric=numeric, categorical=categorical, target=target)


def write_csv(frame: FeatureFrame, path, delimiter: str = ",") -> None:
    """Write ``frame`` so that :func:`load_csv` reads it back unchanged.

    Floats use ``repr`` (shortest round-trip form) and missing cells are
    written as ``NA``.
    """
    cols = []
    for spec in frame.schema:
        if spec.kind == TARGET:
            tokens = spec.categories or ("0", "1")
            cols.append([tokens[v] for v in frame.target])
        elif spec.is_numeric:
            cols.append(["NA" if math.isnan(v) else repr(float(v)) for v in frame.numeric[spec.name]])
        else:
            cats = spec.categories
            cols.append(["NA" if v < 0 else cats[v] for v in frame.categorical[spec.name]])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow([spec.name for spec in frame.schema])
        writer.writerows(zip(*cols))


def group_labels(frame: FeatureFrame, attribute: str, bands=None) -> list[str]:
    """Per-row group label of a sensitive attribute (bands for numeric columns)."""
    spec = frame.spec(attribute)
    if spec.is_categorical:
        cats = np.array(list(spec.categories) + ["unknown"], dtype=object)
        return cats[frame.categorical[attribute]].tolist()
    if spec.is_numeric:
        return assign_bands(frame.numeric[attribute], bands or DECADE_BANDS)
    raise UnknownAttribute(f"column {attribute!r} cannot be used as a group attribute")


# Relative spread of per-feature log-odds effects before the whole latent
# predictor is rescaled to ``signal_sd``. The default ``signal_sd`` puts a
# linear model near AUC 0.72, and an unweighted classifier at threshold 0.5
# then almost never predicts a default at an 11.55% base rate.
NUMERIC_WEIGHT_SD = 1.0
CATEGORY_EFFECT_SD = 0.5
DEFAULT_SIGNAL_SD = 0.65


def synthesize(
    n_rows: int,
    schema,
    default_rate: float,
    group_effects: dict[str, float] | None = None,
    seed: int = 0,
    missing_rate: float = 0.0,
    signal_sd: float = DEFAULT_SIGNAL_SD,
) -> FeatureFrame:
    """Draw a schema-compatible loan table from a logistic latent model.

    Numeric features are independent standard normals, mapped uniformly onto
    ``synth_range`` when the column declares one. Non-sensitive columns carry
    random log-odds effects; sensitive columns affect default risk only
    through ``group_effects``, keyed ``"attribute:group"`` (numeric sensitive
    columns use decade-band labels such as ``"Age:51-60"``). The non-sensitive
    part of the latent log-odds is rescaled to standard deviation
    ``signal_sd``, and the intercept is solved so that the expected default
    rate equals ``default_rate``.
    """
    schema = validate_schema(schema)
    if n_rows < 10:
        raise DegenerateConfig(f"n_rows must be >= 10, got {n_rows}")
    if not 0.0 < default_rate < 1.0:
        raise DegenerateConfig(f"default_rate must be in (0, 1), got {default_rate}")
    if n_rows * default_rate < 1 or n_rows * (1 - default_rate) < 1:
        raise DegenerateConfig(f"default_rate {default_rate} leaves a class empty at n_rows={n_rows}")
    if not 0.0 <= missing_rate < 1.0:
        raise DegenerateConfig(f"missing_rate must be in [0, 1), got {missing_rate}")
    if signal_sd < 0:
        raise DegenerateConfig(f"signal_sd must be >= 0, got {signal_sd}")
    group_effects = dict(group_effects or {})
    rng = np.random.default_rng(seed)

    numeric, categorical = {}, {}
    logit = np.zeros(n_rows)
    for spec in schema:
        if spec.kind == TARGET:
            continue
        if spec.is_numeric:
            z = rng.standard_normal(n_rows)
            w = rng.normal(0.0, NUMERIC_WEIGHT_SD)
            if not spec.is_sensitive:
                logit += w * z
            if spec.synth_range is not None:
                lo, hi = spec.synth_range
                numeric[spec.name] = np.round(lo + ndtr(z) * (hi - lo), 2)
            else:
                numeric[spec.name] = np.round(z, 6)
        else:
            k = len(spec.categories)
            probs = rng.dirichlet(np.full(k, 4.0))
            codes = rng.choice(k, size=n_rows, p=probs)
            effects = rng.normal(0.0, CATEGORY_EFFECT_SD, size=k)
            if not spec.is_sensitive:
                logit += (effects - probs @ effects)[codes]
            categorical[spec.name] = codes.astype(np.int64)

    spread = logit.std()
    if spread > 0:
        logit *= signal_sd / spread

    for key, shift in group_effects.items():
        attr, sep, group = key.partition(":")
        spec = next((c for c in schema if c.name == attr), None)
        if not sep or spec is None or not spec.is_sensitive:
            raise UnknownAttribute(f"group effect {key!r}: expected 'sensitive_column:group'")
        if spec.is_categorical:
            if group not in spec.categories:
                raise UnknownAttribute(f"group effect {key!r}: unknown category {group!r}")
            mask = categorical[attr] == spec.categories.index(group)
        else:
            mask = np.array(assign_bands(numeric[attr], DECADE_BANDS)) == group
        logit += float(shift) * mask

    def excess(b):
        return expit(logit + b).mean() - default_rate

    intercept = brentq(excess, -50.0, 50.0, xtol=1e-12)
    y = (rng.random(n_rows) < expit(logit + intercept)).astype(np.int8)
    if y.sum() == 0 or y.sum() == n_rows:
        raise DegenerateConfig(f"default_rate {default_rate} produced a single class at n_rows={n_rows}")

    if missing_rate > 0:
        for spec in schema:
            if spec.kind == TARGET or spec.is_sensitive:
                continue
            holes = rng.random(n_rows) < missing_rate
            if spec.is_numeric:
                numeric[spec.name] = np.where(holes, np.nan, numeric[spec.name])
            else:
                categorical[spec.name] = np.where(holes, -1, categorical[spec.name])
    return FeatureFrame(schema=schema, numeric=numeric, categorical=categorical, target=y)


@dataclass(frozen=True)
class SplitPair:
    train: FeatureFrame
    test: FeatureFrame
    seed: int
    test_fraction: float
    stratified: bool = True


def _test_size(n: int, fraction: float) -> int:
    # the rounding guards against 0.2 * n landing at k + 1e-12
    return math.ceil(round(fraction * n, 9))


def _allocate(class_counts, n_test, fraction):
    """Largest-remainder allocation of ``n_test`` rows across classes."""
    exact = [fraction * c for c in class_counts]
    alloc = [math.floor(round(e, 9)) for e in exact]
    order = sorted(range(len(exact)), key=lambda i: (-(exact[i] - alloc[i]), i))
    for i in order[: n_test - sum(alloc)]:
        alloc[i] += 1
    return alloc


def split(frame: FeatureFrame, test_fraction: float = 0.2, seed: int = 0, stratified: bool = True) -> SplitPair:
    """Random train/test split.

    The test side holds ``ceil(test_fraction * n_rows)`` rows. Stratified
    splits spread that count over the two classes by largest remainder, so
    each class's test count is within one row of its exact proportion.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must be in (0, 1), got {test_fraction}")
    y = frame.target
    counts = [int((y == c).sum()) for c in (0, 1)]
    if min(counts) < 2:
        raise TooFewRows(f"each class needs >= 2 rows to split, got counts {counts}")
    rng = np.random.default_rng(seed)
    n_test = _test_size(frame.n_rows, test_fraction)
    if stratified:
        test_parts = []
        for cls, t in zip((0, 1), _allocate(counts, n_test, test_fraction)):
            members = np.flatnonzero(y == cls)
            test_parts.append(rng.permutation(members)[:t])
        test_idx = np.sort(np.concatenate(test_parts))
    else:
        test_idx = np.sort(rng.permutation(frame.n_rows)[:n_test])
    mask = np.zeros(frame.n_rows, dtype=bool)
    mask[test_idx] = True
    train_idx = np.flatnonzero(~mask)
    for cls in (0, 1):
        if not (y[test_idx] == cls).any() or not (y[train_idx] == cls).any():
            raise TooFewRows(f"class {cls} would be empty on one side of the split")
    return SplitPair(
        train=frame.take(train_idx),
        test=frame.take(test_idx),
        seed=seed,
        test_fraction=test_fraction,
        stratified=stratified,
    )
