import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import count_confusion
from pdfair.bands import DECADE_BANDS, UNKNOWN, Band, assign_bands, parse_bins
from pdfair.dataset import ColumnSpec, FeatureFrame, synthesize
from pdfair.errors import EmptyBins, InsufficientGroups, PartitionViolation, UnknownAttribute, UnknownReference
from pdfair.fairness import (
    DEGENERATE_NOTE,
    FairnessReport,
    GroupSlice,
    disparate_impact,
    equalized_odds_gap,
    fairness_report,
    four_fifths_flags,
    group_confusions,
    slice_by,
)
from pdfair.metrics import ConfusionMatrix, confusion
from pdfair.models import fit_ols, predict_label, predict_proba
from pdfair.preprocess import apply_plan, fit_plan


def slices_from(labels):
    labels = np.asarray(labels)
    return [GroupSlice("g", str(v), np.flatnonzero(labels == v)) for v in dict.fromkeys(labels.tolist())]


def group_metrics_for(cms):
    """Stack hand-chosen per-group confusion matrices into one evaluation."""
    y_true, y_pred, labels = [], [], []
    for name, (tp, fp, tn, fn) in cms.items():
        y_true += [1] * tp + [0] * fp + [0] * tn + [1] * fn
        y_pred += [1] * tp + [1] * fp + [0] * tn + [0] * fn
        labels += [name] * (tp + fp + tn + fn)
    return np.array(y_true), np.array(y_pred), slices_from(labels)


class TestBands:
    def test_parse_decades(self):
        assert [b.label for b in DECADE_BANDS] == ["18-30", "31-40", "41-50", "51-60", "61+"]

    def test_age_55_lands_in_51_60(self):
        assert assign_bands([55], DECADE_BANDS) == ["51-60"]

    def test_band_edges(self):
        labels = assign_bands([18, 30, 30.5, 31, 60, 60.9, 61, 99, 17, np.nan], DECADE_BANDS)
        assert labels == ["18-30", "18-30", "18-30", "31-40", "51-60", "51-60", "61+", "61+", "<18", UNKNOWN]

    def test_closed_top_band(self):
        assert assign_bands([5, 25], parse_bins("0-9,10-19")) == ["0-9", ">19"]

    @pytest.mark.parametrize("text", ["", "a-b", "30-20", "18-30,25-40", "61+,70-80"])
    def test_bad_bins(self, text):
        with pytest.raises(EmptyBins):
            parse_bins(text)

    def test_open_band_label(self):
        assert Band(61).label == "61+" and Band(51, 60).label == "51-60"


class TestSliceBy:
    def test_exhaustive_membership(self, rng, small_schema):
        n = 10_000
        age = rng.uniform(10, 90, n)
        age[rng.random(n) < 0.05] = np.nan
        frame = FeatureFrame(
            small_schema,
            {"income": np.zeros(n), "amount": np.zeros(n), "age": age},
            {"area": np.zeros(n, dtype=int), "gender": rng.integers(-1, 2, n)},
            rng.integers(0, 2, n).astype(np.int8),
        )
        for attr in ("age", "gender", "area"):
            slices = slice_by(frame, attr)
            counts = np.zeros(n, dtype=int)
            for s in slices:
                counts[s.row_indices] += 1
            assert np.all(counts == 1), attr
            assert all(s.row_indices.size for s in slices)

    def test_sensitive_numeric_defaults_to_decades(self, small_frame):
        labels = [s.group_label for s in slice_by(small_frame, "age")]
        assert labels == ["18-30", "31-40", "41-50", "51-60", "61+"]

    def test_custom_bins(self, small_frame):
        labels = [s.group_label for s in slice_by(small_frame, "age", "18-44,45+")]
        assert labels == ["18-44", "45+"]

    def test_bad_attributes(self, small_frame):
        with pytest.raises(UnknownAttribute):
            slice_by(small_frame, "default")
        with pytest.raises(UnknownAttribute):
            slice_by(small_frame, "income")
        with pytest.raises(UnknownAttribute):
            slice_by(small_frame, "zodiac")

    def test_synthetic_sensitive_cells_never_missing(self, small_frame):
        # missing_rate only blanks non-sensitive cells
        assert [s.group_label for s in slice_by(small_frame, "gender")] == ["Male", "Female"]


class TestGroupMetrics:
    def test_missed_defaulters_in_one_band(self):
        y, p, slices = group_metrics_for({"51-60": (4, 0, 3000, 686), "31-40": (10, 5, 4000, 300)})
        g = group_confusions(y, p, slices)[0]
        assert g.label == "51-60"
        assert g.cm == ConfusionMatrix(4, 0, 3000, 686)
        assert g.fnr == 686 / 690

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6))
    def test_additivity(self, seed, n_groups):
        rng = np.random.default_rng(seed)
        n = 300
        y, p = rng.integers(0, 2, n), rng.integers(0, 2, n)
        groups = group_confusions(y, p, slices_from(rng.integers(0, n_groups, n)))
        total = ConfusionMatrix(0, 0, 0, 0)
        for g in groups:
            total = total + g.cm
            assert (g.cm.tp, g.cm.fp, g.cm.tn, g.cm.fn) == count_confusion(y[g.slice.row_indices], p[g.slice.row_indices])
        assert total == confusion(y, p)

    def test_partition_violation(self):
        y = np.array([0, 1, 0, 1])
        overlapping = [GroupSlice("g", "a", np.array([0, 1, 2])), GroupSlice("g", "b", np.array([2, 3]))]
        with pytest.raises(PartitionViolation):
            group_confusions(y, y, overlapping)
        with pytest.raises(PartitionViolation):
            group_confusions(y, y, [GroupSlice("g", "a", np.array([0, 1]))])


class TestDisparateImpact:
    def test_half_rate_is_flagged(self):
        # selection 0.4 vs 0.2
        y, p, slices = group_metrics_for({"Married": (20, 20, 60, 0), "Single": (5, 5, 40, 0)})
        groups = group_confusions(y, p, slices)
        di = disparate_impact(groups)
        assert di == {"Married": 1.0, "Single": 0.5}
        assert four_fifths_flags(di) == ["Single"]

    def test_explicit_reference(self):
        y, p, slices = group_metrics_for({"a": (2, 2, 6, 0), "b": (1, 0, 9, 0)})
        di = disparate_impact(group_confusions(y, p, slices), reference="b")
        assert di == {"a": 4.0, "b": 1.0}
        with pytest.raises(UnknownReference):
            disparate_impact(group_confusions(y, p, slices), reference="c")

    def test_all_negative_predictor(self):
        y, p, slices = group_metrics_for({"a": (0, 0, 50, 10), "b": (0, 0, 30, 5)})
        rep = fairness_report("g", y, p, slices)
        assert all(v is None for v in rep.disparate_impact.values())
        assert all(g.selection_rate == 0 and g.fpr == 0 for g in rep.groups)
        assert DEGENERATE_NOTE in rep.notes
        assert rep.four_fifths_flags == []


class TestEqualizedOdds:
    def test_two_group_gap(self):
        # FNR 0.99 vs 0.80
        y, p, slices = group_metrics_for({"a": (1, 0, 10, 99), "b": (20, 0, 10, 80)})
        gap = equalized_odds_gap(group_confusions(y, p, slices))
        np.testing.assert_allclose(gap.fnr_gap, 0.19, atol=1e-12)
        assert gap.fpr_gap == 0.0

    def test_pairwise_oracle(self, rng):
        for _ in range(20):
            cms = {k: tuple(int(v) for v in rng.integers(1, 60, 4)) for k in "abc"}
            groups = group_confusions(*group_metrics_for(cms))
            gap = equalized_odds_gap(groups)
            pairs = list(itertools.combinations(groups, 2))
            assert gap.fpr_gap == max(abs(g.fpr - h.fpr) for g, h in pairs)
            assert gap.fnr_gap == max(abs(g.fnr - h.fnr) for g, h in pairs)

    def test_single_class_group_excluded(self):
        y, p, slices = group_metrics_for({"a": (1, 1, 5, 3), "b": (2, 0, 4, 1), "c": (0, 1, 4, 0)})
        gap = equalized_odds_gap(group_confusions(y, p, slices))
        assert gap.excluded == ("c",)

    def test_insufficient_groups(self):
        y, p, slices = group_metrics_for({"a": (1, 1, 5, 3), "c": (0, 1, 4, 0)})
        with pytest.raises(InsufficientGroups):
            equalized_odds_gap(group_confusions(y, p, slices))
        rep = fairness_report("g", y, p, slices)
        assert rep.eq_odds_fpr_gap is None and any("undefined" in n for n in rep.notes)

    def test_group_blind_predictor_on_identical_groups(self, small_schema):
        # no group effects and sensitive columns excluded from the features
        frame = synthesize(100_000, small_schema, 0.2, seed=0)
        X = apply_plan(fit_plan(frame), frame).values
        labels = predict_label(predict_proba(fit_ols(X, frame.target), X), 0.25)
        rep = fairness_report("gender", frame.target, labels, slice_by(frame, "gender"))
        assert rep.eq_odds_fpr_gap < 0.02
        assert rep.eq_odds_fnr_gap < 0.02


def test_report_dict_round_trip():
    y, p, slices = group_metrics_for({"a": (3, 2, 10, 4), "b": (0, 0, 7, 2), "c": (1, 1, 1, 1)})
    rep = fairness_report("g", y, p, slices, reference="a")
    back = FairnessReport.from_dict(rep.to_dict())
    assert back.to_dict() == rep.to_dict()
    assert back.total_confusion() == confusion(y, p)


def test_report_with_numeric_bins(small_frame):
    ages = small_frame.numeric["age"]
    y = small_frame.target
    p = (ages > 50).astype(int)
    rep = fairness_report("age", y, p, slice_by(small_frame, "age", DECADE_BANDS), bins=DECADE_BANDS)
    assert rep.bins == "18-30,31-40,41-50,51-60,61+"
    assert rep.total_confusion() == confusion(y, p)
    assert rep.reference == max(rep.groups, key=lambda g: g.n).label


def test_categorical_missing_slice():
    schema = (ColumnSpec("m", "sensitive-categorical", categories=("x", "y")), ColumnSpec("t", "target"))
    frame = FeatureFrame(schema, {}, {"m": np.array([0, -1, 1, 0])}, np.array([0, 1, 0, 1], dtype=np.int8))
    assert [s.group_label for s in slice_by(frame, "m")] == ["x", "y", UNKNOWN]
