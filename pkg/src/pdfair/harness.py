"""Paired ablation: the same PD pipeline with and without truncated-SVD preprocessing.

Both arms share one train/test split. The SVD arm factorizes the training
design matrix, projects train and test rows with the train-fitted right
singular vectors and fits the model on the projected features. Fairness is
always sliced on the raw sensitive columns of the test frame.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import dataset as ds
from .errors import ConfigError, MismatchedTestSets, PdfairError
from .fairness import FairnessReport, fairness_report, slice_by
from .metrics import (
    ClassificationReport,
    ConfusionMatrix,
    RocCurve,
    confusion,
    report_from_confusion,
    roc_curve,
    type1_defined,
    type1_rate,
    type2_defined,
    type2_rate,
)
from .models import LOGISTIC, OLS, fit, predict_label, predict_proba
from .preprocess import apply_plan, fit_plan
from .tsvd import project, truncated_svd

BASELINE = "baseline"
SVD = "svd"
SCHEMA_VERSION = 1

FLAG_DEGENERATE = "degenerate minority-class predictor"
FLAG_LOST_RECALL = "svd arm lost all class-1 recall that the baseline had"


@dataclass(frozen=True)
class SynthSpec:
    rows: int
    default_rate: float
    seed: int = 0
    schema: str = "schema_kaggle_default.json"
    group_effects: dict = field(default_factory=dict)
    missing_rate: float = 0.0
    signal_sd: float = ds.DEFAULT_SIGNAL_SD

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown synth-config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class SvdSpec:
    rank: int
    oversampling: int = 10
    power_iters: int = 2


@dataclass(frozen=True)
class GroupSpec:
    attribute: str
    bins: str | None = None

    @classmethod
    def parse(cls, text: str) -> "GroupSpec":
        attr, _, bins = text.partition(":")
        if not attr:
            raise ConfigError(f"--group-by {text!r}: expected attr or attr:bins")
        return cls(attr, bins or None)


@dataclass(frozen=True)
class RunConfig:
    data: str | None = None
    schema: str | None = None
    delimiter: str = ","
    synth: SynthSpec | None = None
    seed: int = 0
    test_fraction: float = 0.2
    stratified: bool = True
    model: str = OLS
    threshold: float = 0.5
    class_weight: str | None = None
    max_iters: int = 500
    svd: SvdSpec | None = None
    group_by: tuple[GroupSpec, ...] = ()
    references: dict = field(default_factory=dict)
    include_sensitive: bool = False
    format: str = "text"

    def validate(self) -> "RunConfig":
        if (self.data is None) == (self.synth is None):
            raise ConfigError("exactly one data source is required: a CSV (--data) or a synth config")
        if self.data is not None and self.schema is None:
            raise ConfigError("--schema is required with --data")
        if self.model not in (OLS, LOGISTIC):
            raise ConfigError(f"model must be one of ols, logistic; got {self.model!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must be in [0, 1], got {self.threshold}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test fraction must be in (0, 1), got {self.test_fraction}")
        if self.class_weight not in (None, "balanced"):
            raise ConfigError(f"class weight must be none or balanced, got {self.class_weight!r}")
        if self.svd is not None:
            if self.svd.rank < 1:
                raise ConfigError(f"svd rank must be an integer >= 1 (and <= design-matrix columns), got {self.svd.rank}")
            if self.svd.oversampling < 0 or self.svd.power_iters < 0:
                raise ConfigError("oversampling and power iterations must be >= 0")
        if self.format not in ("text", "json", "csv"):
            raise ConfigError(f"format must be text, json or csv; got {self.format!r}")
        if self.max_iters < 1:
            raise ConfigError("max iterations must be >= 1")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["group_by"] = [{"attribute": g.attribute, "bins": g.bins} for g in self.group_by]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        if d.get("synth") is not None:
            d["synth"] = SynthSpec.from_dict(d["synth"])
        if d.get("svd") is not None:
            d["svd"] = SvdSpec(**d["svd"])
        d["group_by"] = tuple(GroupSpec(**g) for g in d.get("group_by", ()))
        return cls(**d)


def load_frame(config: RunConfig) -> ds.FeatureFrame:
    if config.synth is not None:
        s = config.synth
        schema = ds.load_schema(s.schema)
        return ds.synthesize(s.rows, schema, s.default_rate, s.group_effects, s.seed, s.missing_rate, s.signal_sd)
    return ds.load_csv(config.data, ds.load_schema(config.schema), delimiter=config.delimiter)


def resolve(config: RunConfig, frame: ds.FeatureFrame) -> RunConfig:
    """Fill data-dependent defaults: group attributes are every sensitive column."""
    if config.group_by:
        for g in config.group_by:
            frame.spec(g.attribute)
        return config
    groups = tuple(GroupSpec(c.name) for c in frame.schema if c.is_sensitive)
    return replace(config, group_by=groups)


def make_split(config: RunConfig, frame: ds.FeatureFrame) -> ds.SplitPair:
    return ds.split(frame, config.test_fraction, config.seed, config.stratified)


def _fingerprint(frame: ds.FeatureFrame) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(frame.row_index, dtype="<i8").tobytes())
    h.update(np.ascontiguousarray(frame.target, dtype="i1").tobytes())
    return h.hexdigest()


@dataclass(frozen=True, eq=False)
class ArmResult:
    arm: str
    model_kind: str
    threshold: float
    cm: ConfusionMatrix
    report: ClassificationReport
    auc: float
    fairness: dict[str, FairnessReport]
    provenance: dict
    test_fingerprint: str
    roc: RocCurve | None = None

    @property
    def recall_1(self) -> float:
        return self.report.per_class[1].recall

    def to_dict(self) -> dict:
        return {
            "arm": self.arm,
            "model_kind": self.model_kind,
            "extension": self.model_kind == LOGISTIC,
            "threshold": self.threshold,
            "confusion": self.cm.to_dict(),
            "report": self.report.to_dict(),
            "auc": self.auc,
            "type1_rate": type1_rate(self.cm),
            "type1_defined": type1_defined(self.cm),
            "type2_rate": type2_rate(self.cm),
            "type2_defined": type2_defined(self.cm),
            "fairness": {k: v.to_dict() for k, v in self.fairness.items()},
            "provenance": self.provenance,
            "test_fingerprint": self.test_fingerprint,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArmResult":
        return cls(
            arm=d["arm"],
            model_kind=d["model_kind"],
            threshold=d["threshold"],
            cm=ConfusionMatrix(**d["confusion"]),
            report=ClassificationReport.from_dict(d["report"]),
            auc=d["auc"],
            fairness={k: FairnessReport.from_dict(v) for k, v in d["fairness"].items()},
            provenance=d["provenance"],
            test_fingerprint=d["test_fingerprint"],
        )


def _stage(arm, stage, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PdfairError as exc:
        raise type(exc)(f"[{arm} arm, {stage}] {exc}") from exc


def _floats(values) -> list[float]:
    return [float(v) for v in values]


def run_arm(config: RunConfig, arm: str, split: ds.SplitPair) -> ArmResult:
    """Fit and evaluate one arm on ``split``."""
    if arm not in (BASELINE, SVD):
        raise ConfigError(f"arm must be baseline or svd, got {arm!r}")
    if arm == SVD and config.svd is None:
        raise ConfigError("the svd arm needs an svd rank")
    train, test = split.train, split.test
    plan = _stage(arm, "preprocess", fit_plan, train, config.include_sensitive)
    X_train = _stage(arm, "preprocess", apply_plan, plan, train).values
    X_test = _stage(arm, "preprocess", apply_plan, plan, test).values
    provenance = {"plan": plan.to_dict(), "n_train": train.n_rows, "n_test": test.n_rows}

    if arm == SVD:
        s = config.svd
        n_cols = X_train.shape[1]
        if not 1 <= s.rank <= n_cols:
            raise ConfigError(f"svd rank must be in [1, {n_cols}] (design-matrix columns), got {s.rank}")
        factors = _stage(
            arm, "svd", truncated_svd, X_train, s.rank,
            oversampling=s.oversampling, power_iters=s.power_iters, seed=config.seed,
        )
        total = float(np.sum(X_train**2))
        provenance["svd"] = {
            "rank": s.rank,
            "oversampling": s.oversampling,
            "power_iters": s.power_iters,
            "seed": config.seed,
            "input_columns": n_cols,
            "sigma": _floats(factors.sigma),
            "energy_retained": float(np.sum(factors.sigma**2) / total) if total > 0 else 0.0,
            "iterations": factors.iterations,
            "converged": factors.converged,
        }
        X_train = project(factors, X_train)
        X_test = project(factors, X_test)

    y_train, y_test = train.target, test.target
    fit_kwargs = {"max_iters": config.max_iters} if config.model == LOGISTIC else {}
    model = _stage(arm, "fit", fit, config.model, X_train, y_train, config.class_weight, **fit_kwargs)
    provenance["model"] = model.to_dict()
    scores = _stage(arm, "predict", predict_proba, model, X_test)
    labels = predict_label(scores, config.threshold)

    cm = confusion(y_test, labels)
    roc = _stage(arm, "roc", roc_curve, y_test, scores)
    fairness = {}
    for g in config.group_by:
        slices = _stage(arm, "fairness", slice_by, test, g.attribute, g.bins)
        fairness[g.attribute] = _stage(
            arm, "fairness", fairness_report, g.attribute, y_test, labels, slices,
            reference=config.references.get(g.attribute), bins=g.bins,
        )
    return ArmResult(
        arm=arm,
        model_kind=config.model,
        threshold=config.threshold,
        cm=cm,
        report=report_from_confusion(cm),
        auc=roc.auc,
        fairness=fairness,
        provenance=provenance,
        test_fingerprint=_fingerprint(test),
        roc=roc,
    )


@dataclass(frozen=True, eq=False)
class AblationReport:
    """Both arms plus ``svd - baseline`` deltas.

    A single-arm run is represented with the other arm set to ``None`` and
    no deltas.
    """

    config: dict
    baseline: ArmResult | None
    svd: ArmResult | None
    deltas: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def kind(self) -> str:
        return "ablation" if self.baseline is not None and self.svd is not None else "run"

    @property
    def arms(self) -> list[ArmResult]:
        return [a for a in (self.baseline, self.svd) if a is not None]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "config": self.config,
            "arms": {a.arm: a.to_dict() for a in self.arms},
            "deltas": self.deltas,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AblationReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported report schema_version {d.get('schema_version')!r}")
        arms = {k: ArmResult.from_dict(v) for k, v in d["arms"].items()}
        return cls(
            config=d["config"],
            baseline=arms.get(BASELINE),
            svd=arms.get(SVD),
            deltas=d["deltas"],
            flags=list(d["flags"]),
        )


def _delta(a, b):
    return None if a is None or b is None else b - a


def _degenerate(arm: ArmResult) -> bool:
    return arm.cm.tp + arm.cm.fp == 0


def arm_flags(arm: ArmResult) -> list[str]:
    return [f"{arm.arm}: {FLAG_DEGENERATE} (no positive predictions)"] if _degenerate(arm) else []


def compare(baseline: ArmResult, svd: ArmResult, config: dict | None = None) -> AblationReport:
    if baseline.test_fingerprint != svd.test_fingerprint:
        raise MismatchedTestSets("arms were evaluated on different test rows")
    deltas = {
        "accuracy": svd.report.accuracy - baseline.report.accuracy,
        "auc": svd.auc - baseline.auc,
        "class1_recall": svd.recall_1 - baseline.recall_1,
        "type1_rate": type1_rate(svd.cm) - type1_rate(baseline.cm),
        "type2_rate": type2_rate(svd.cm) - type2_rate(baseline.cm),
        "fairness": {
            attr: {
                "fpr_gap": _delta(rep.eq_odds_fpr_gap, svd.fairness[attr].eq_odds_fpr_gap),
                "fnr_gap": _delta(rep.eq_odds_fnr_gap, svd.fairness[attr].eq_odds_fnr_gap),
            }
            for attr, rep in baseline.fairness.items()
            if attr in svd.fairness
        },
    }
    flags = arm_flags(baseline) + arm_flags(svd)
    if svd.recall_1 == 0 and baseline.recall_1 > 0:
        flags.append(FLAG_LOST_RECALL)
    return AblationReport(config=config or {}, baseline=baseline, svd=svd, deltas=deltas, flags=flags)


def run(config: RunConfig) -> AblationReport:
    """Single arm: the SVD arm when ``config.svd`` is set, else the baseline."""
    config.validate()
    frame = load_frame(config)
    config = resolve(config, frame)
    split = make_split(config, frame)
    arm = run_arm(config, SVD if config.svd else BASELINE, split)
    report = AblationReport(config=config.to_dict(), baseline=None, svd=None, flags=arm_flags(arm))
    return replace(report, **{arm.arm: arm})


def ablate(config: RunConfig) -> AblationReport:
    config.validate()
    if config.svd is None:
        raise ConfigError("ablation needs an explicit svd rank")
    frame = load_frame(config)
    config = resolve(config, frame)
    split = make_split(config, frame)
    baseline = run_arm(config, BASELINE, split)
    svd = run_arm(config, SVD, split)
    return compare(baseline, svd, config.to_dict())


# ---------------------------------------------------------------- rendering


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _fmt(v, digits=2) -> str:
    if v is None:
        return "undef"
    return f"{v:.{digits}f}"


def _arm_title(arm: ArmResult) -> str:
    kind = arm.model_kind + (" (extension: logistic comparator)" if arm.model_kind == LOGISTIC else "")
    if arm.arm == SVD:
        k = arm.provenance.get("svd", {}).get("rank", "?")
        return f"Model with truncated SVD (k={k}), {kind}"
    return f"Model without truncated SVD, {kind}"


def _render_arm(arm: ArmResult) -> str:
    out = [_arm_title(arm), ""]
    out.append(arm.report.render(2))
    cm = arm.cm
    out.append(f"ROC AUC: {arm.auc:.3f}")
    t1 = _fmt(type1_rate(cm), 4) + ("" if type1_defined(cm) else " (no negatives)")
    t2 = _fmt(type2_rate(cm), 4) + ("" if type2_defined(cm) else " (no positives)")
    out.append(f"Type I error (FPR): {t1}    Type II error (FNR): {t2}")
    out.append(f"Confusion: TP={cm.tp} FP={cm.fp} TN={cm.tn} FN={cm.fn}   threshold={arm.threshold:g}")
    for attr, rep in arm.fairness.items():
        out.append("")
        bins = f" [{rep.bins}]" if rep.bins else ""
        out.append(f"Fairness by {attr}{bins} (reference group: {rep.reference})")
        out.append(
            f"{'group':>12} {'n':>7} {'tp':>6} {'fp':>6} {'tn':>7} {'fn':>6} "
            f"{'fpr':>6} {'fnr':>6} {'select':>7} {'base':>6} {'DI':>6}"
        )
        for g in rep.groups:
            out.append(
                f"{g.label:>12} {g.n:>7} {g.cm.tp:>6} {g.cm.fp:>6} {g.cm.tn:>7} {g.cm.fn:>6} "
                f"{_fmt(g.fpr):>6} {_fmt(g.fnr):>6} {_fmt(g.selection_rate, 3):>7} "
                f"{_fmt(g.base_rate, 3):>6} {_fmt(rep.disparate_impact[g.label]):>6}"
            )
        out.append(
            f"equalized-odds gaps: FPR {_fmt(rep.eq_odds_fpr_gap, 4)}  FNR {_fmt(rep.eq_odds_fnr_gap, 4)}"
        )
        if rep.four_fifths_flags:
            out.append(f"four-fifths rule violated by: {', '.join(rep.four_fifths_flags)}")
        out.extend(f"note: {n}" for n in rep.notes)
    return "\n".join(out) + "\n"


def render_text(report: AblationReport) -> str:
    parts = [_render_arm(a) for a in report.arms]
    if report.deltas:
        d = report.deltas
        lines = ["Change with SVD (svd minus baseline)"]
        for key in ("accuracy", "auc", "class1_recall", "type1_rate", "type2_rate"):
            lines.append(f"  {key:<14} {d[key]:+.4f}")
        for attr, gaps in d["fairness"].items():
            lines.append(
                f"  {attr:<14} FPR gap {_fmt(gaps['fpr_gap'], 4)}  FNR gap {_fmt(gaps['fnr_gap'], 4)}"
            )
        parts.append("\n".join(lines) + "\n")
    if report.flags:
        parts.append("".join(f"FLAG: {f}\n" for f in report.flags))
    return "\n".join(parts)


def _csv_value(v) -> str:
    if v is None:
        return "undefined"
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_rows(report: AblationReport) -> list[tuple]:
    """One ``(arm, attribute, group, metric, value)`` tuple per reported metric."""
    rows = []
    for arm in report.arms:
        a = arm.arm
        d = arm.to_dict()
        for metric in ("auc", "type1_rate", "type2_rate"):
            rows.append((a, "", "", metric, d[metric]))
        for metric, value in d["confusion"].items():
            rows.append((a, "", "", metric, value))
        rep = d["report"]
        rows.append((a, "", "", "accuracy", rep["accuracy"]))
        for row in ("0", "1", "macro_avg", "weighted_avg"):
            for metric in ("precision", "recall", "f1", "support"):
                rows.append((a, "report", row, metric, rep[row][metric]))
        for attr, fr in d["fairness"].items():
            for g in fr["groups"]:
                for metric in ("n", "tp", "fp", "tn", "fn", "fpr", "fnr", "selection_rate", "base_rate", "disparate_impact"):
                    rows.append((a, attr, g["group"], metric, g[metric]))
            rows.append((a, attr, "", "eq_odds_fpr_gap", fr["eq_odds_fpr_gap"]))
            rows.append((a, attr, "", "eq_odds_fnr_gap", fr["eq_odds_fnr_gap"]))
    if report.deltas:
        for key, value in report.deltas.items():
            if key == "fairness":
                for attr, gaps in value.items():
                    for metric, v in gaps.items():
                        rows.append(("delta", attr, "", metric, v))
            else:
                rows.append(("delta", "", "", key, value))
    return rows


def render_csv(report: AblationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["arm", "attribute", "group", "metric", "value"])
    for row in csv_rows(report):
        w.writerow([*row[:4], _csv_value(row[4])])
    return buf.getvalue()


def render_report(report: AblationReport, fmt: str = "text") -> bytes:
    if fmt == "json":
        return canonical_json(report.to_dict()).encode("utf-8")
    if fmt == "csv":
        return render_csv(report).encode("utf-8")
    if fmt == "text":
        return render_text(report).encode("utf-8")
    raise ConfigError(f"unknown report format {fmt!r}")


def load_report(data: bytes | str) -> AblationReport:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return AblationReport.from_dict(json.loads(data))
