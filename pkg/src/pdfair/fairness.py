"""Per-group error rates, disparate impact and equalized-odds gaps."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bands import DECADE_BANDS, UNKNOWN, Band, format_bins, parse_bins
from .dataset import TARGET, FeatureFrame, group_labels
from .errors import EmptyBins, InsufficientGroups, PartitionViolation, UnknownAttribute, UnknownReference
from .metrics import ConfusionMatrix, confusion, type1_rate, type2_rate

FOUR_FIFTHS = 0.8
DEGENERATE_NOTE = "degenerate predictor: reference group has selection rate 0, disparate impact undefined"


@dataclass(frozen=True, eq=False)
class GroupSlice:
    attribute: str
    group_label: str
    row_indices: np.ndarray


def slice_by(frame: FeatureFrame, attribute: str, bins=None) -> list[GroupSlice]:
    """Partition the rows of ``frame`` by ``attribute``.

    Categorical columns give one slice per observed category. Numeric
    columns need ``bins`` (a band string such as ``"18-30,31-40,61+"`` or a
    sequence of :class:`Band`), except sensitive numeric columns which
    default to decade bands. Missing values form an ``"unknown"`` slice.
    Empty groups are omitted.
    """
    try:
        spec = frame.spec(attribute)
    except UnknownAttribute:
        raise UnknownAttribute(f"{attribute!r} is not a column of the frame") from None
    if spec.kind == TARGET:
        raise UnknownAttribute(f"{attribute!r} is the target, not a group attribute")
    bands = None
    if spec.is_numeric:
        if isinstance(bins, str):
            bands = parse_bins(bins)
        elif bins is not None:
            bands = tuple(bins)
            if not bands:
                raise EmptyBins(f"empty bins for {attribute!r}")
        elif spec.is_sensitive:
            bands = DECADE_BANDS
        else:
            raise UnknownAttribute(f"numeric column {attribute!r} needs bins to be used as a group attribute")
        order = [f"<{bands[0].lo:g}", *(b.label for b in bands)]
        if bands[-1].hi is not None:
            order.append(f">{bands[-1].hi:g}")
    else:
        order = list(spec.categories)
    order.append(UNKNOWN)
    labels = np.array(group_labels(frame, attribute, bands), dtype=object)
    slices = []
    for label in order:
        idx = np.flatnonzero(labels == label)
        if idx.size:
            idx.flags.writeable = False
            slices.append(GroupSlice(attribute, label, idx))
    return slices


@dataclass(frozen=True)
class GroupMetrics:
    slice: GroupSlice
    cm: ConfusionMatrix
    fpr: float
    fnr: float
    selection_rate: float
    base_rate: float
    n: int

    @property
    def label(self) -> str:
        return self.slice.group_label

    @property
    def fpr_defined(self) -> bool:
        return self.cm.fp + self.cm.tn > 0

    @property
    def fnr_defined(self) -> bool:
        return self.cm.fn + self.cm.tp > 0


def group_confusions(y_true, y_pred, slices) -> list[GroupMetrics]:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    n = y_true.shape[0]
    covered = np.sort(np.concatenate([s.row_indices for s in slices])) if slices else np.array([], int)
    if covered.shape[0] != n or not np.array_equal(covered, np.arange(n)):
        raise PartitionViolation(f"slices do not partition the {n} evaluated rows")
    out = []
    for s in slices:
        cm = confusion(y_true[s.row_indices], y_pred[s.row_indices])
        out.append(
            GroupMetrics(
                slice=s,
                cm=cm,
                fpr=type1_rate(cm),
                fnr=type2_rate(cm),
                selection_rate=(cm.tp + cm.fp) / cm.n,
                base_rate=(cm.tp + cm.fn) / cm.n,
                n=cm.n,
            )
        )
    return out


def default_reference(group_metrics) -> str:
    """Largest group by count; the first listed wins ties."""
    return max(group_metrics, key=lambda g: g.n).label


def disparate_impact(group_metrics, reference: str | None = None) -> dict[str, float | None]:
    """Selection-rate ratio of every group to ``reference``.

    All ratios are ``None`` (undefined) when the reference group never
    receives a positive prediction.
    """
    if reference is None:
        reference = default_reference(group_metrics)
    ref = next((g for g in group_metrics if g.label == reference), None)
    if ref is None:
        raise UnknownReference(f"reference group {reference!r} not among {[g.label for g in group_metrics]}")
    if ref.selection_rate == 0:
        return {g.label: None for g in group_metrics}
    return {g.label: (1.0 if g is ref else g.selection_rate / ref.selection_rate) for g in group_metrics}


def four_fifths_flags(di: dict[str, float | None], threshold: float = FOUR_FIFTHS) -> list[str]:
    return [label for label, ratio in di.items() if ratio is not None and ratio < threshold]


@dataclass(frozen=True)
class EqualizedOddsGap:
    fpr_gap: float
    fnr_gap: float
    excluded: tuple[str, ...] = ()


def equalized_odds_gap(group_metrics) -> EqualizedOddsGap:
    """Largest pairwise FPR and FNR differences over groups holding both classes."""
    eligible = [g for g in group_metrics if g.fpr_defined and g.fnr_defined]
    excluded = tuple(g.label for g in group_metrics if g not in eligible)
    if len(eligible) < 2:
        raise InsufficientGroups(f"need >= 2 groups with both classes present, got {len(eligible)}")
    fprs = [g.fpr for g in eligible]
    fnrs = [g.fnr for g in eligible]
    return EqualizedOddsGap(max(fprs) - min(fprs), max(fnrs) - min(fnrs), excluded)


@dataclass(frozen=True)
class FairnessReport:
    attribute: str
    bins: str | None
    groups: list[GroupMetrics]
    reference: str
    disparate_impact: dict[str, float | None]
    eq_odds_fpr_gap: float | None
    eq_odds_fnr_gap: float | None
    excluded_from_gaps: tuple[str, ...]
    four_fifths_flags: list[str]
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "attribute": self.attribute,
            "bins": self.bins,
            "reference": self.reference,
            "groups": [
                {
                    "group": g.label,
                    "n": g.n,
                    **g.cm.to_dict(),
                    "fpr": g.fpr,
                    "fnr": g.fnr,
                    "fpr_defined": g.fpr_defined,
                    "fnr_defined": g.fnr_defined,
                    "selection_rate": g.selection_rate,
                    "base_rate": g.base_rate,
                    "disparate_impact": self.disparate_impact[g.label],
                }
                for g in self.groups
            ],
            "eq_odds_fpr_gap": self.eq_odds_fpr_gap,
            "eq_odds_fnr_gap": self.eq_odds_fnr_gap,
            "excluded_from_gaps": list(self.excluded_from_gaps),
            "four_fifths_flags": list(self.four_fifths_flags),
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FairnessReport":
        groups = []
        for g in d["groups"]:
            cm = ConfusionMatrix(g["tp"], g["fp"], g["tn"], g["fn"])
            groups.append(
                GroupMetrics(
                    slice=GroupSlice(d["attribute"], g["group"], np.array([], dtype=np.int64)),
                    cm=cm,
                    fpr=g["fpr"],
                    fnr=g["fnr"],
                    selection_rate=g["selection_rate"],
                    base_rate=g["base_rate"],
                    n=g["n"],
                )
            )
        return cls(
            attribute=d["attribute"],
            bins=d["bins"],
            groups=groups,
            reference=d["reference"],
            disparate_impact={g["group"]: g["disparate_impact"] for g in d["groups"]},
            eq_odds_fpr_gap=d["eq_odds_fpr_gap"],
            eq_odds_fnr_gap=d["eq_odds_fnr_gap"],
            excluded_from_gaps=tuple(d["excluded_from_gaps"]),
            four_fifths_flags=list(d["four_fifths_flags"]),
            notes=list(d["notes"]),
        )

    def total_confusion(self) -> ConfusionMatrix:
        total = ConfusionMatrix(0, 0, 0, 0)
        for g in self.groups:
            total = total + g.cm
        return total


def fairness_report(attribute, y_true, y_pred, slices, reference=None, bins=None) -> FairnessReport:
    groups = group_confusions(y_true, y_pred, slices)
    if reference is None:
        reference = default_reference(groups)
    di = disparate_impact(groups, reference)
    notes = []
    if all(v is None for v in di.values()):
        notes.append(DEGENERATE_NOTE)
    try:
        gap = equalized_odds_gap(groups)
        fpr_gap, fnr_gap, excluded = gap.fpr_gap, gap.fnr_gap, gap.excluded
    except InsufficientGroups as exc:
        fpr_gap = fnr_gap = None
        excluded = tuple(g.label for g in groups if not (g.fpr_defined and g.fnr_defined))
        notes.append(f"equalized-odds gaps undefined: {exc}")
    if excluded:
        notes.append(f"groups missing a class, excluded from gaps: {', '.join(excluded)}")
    if bins is not None and not isinstance(bins, str):
        bins = format_bins(bins)
    return FairnessReport(
        attribute=attribute,
        bins=bins,
        groups=groups,
        reference=reference,
        disparate_impact=di,
        eq_odds_fpr_gap=fpr_gap,
        eq_odds_fnr_gap=fnr_gap,
        excluded_from_gaps=excluded,
        four_fifths_flags=four_fifths_flags(di),
        notes=notes,
    )


__all__ = [
    "Band",
    "EqualizedOddsGap",
    "FairnessReport",
    "GroupMetrics",
    "GroupSlice",
    "disparate_impact",
    "equalized_odds_gap",
    "fairness_report",
    "four_fifths_flags",
    "group_confusions",
    "slice_by",
]
