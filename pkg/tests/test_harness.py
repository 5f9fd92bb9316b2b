import csv
import io
import json
from dataclasses import replace

import numpy as np
import pytest

from pdfair import harness
from pdfair.errors import ConfigError, MismatchedTestSets, UnknownReference
from pdfair.harness import (
    FLAG_DEGENERATE,
    FLAG_LOST_RECALL,
    AblationReport,
    GroupSpec,
    RunConfig,
    SvdSpec,
    SynthSpec,
    ablate,
    compare,
    load_report,
    render_report,
    run,
)
from pdfair.metrics import ConfusionMatrix, report_from_confusion

SCALARS = ("accuracy", "auc", "type1_rate", "type2_rate")


def config(rows=4000, seed=1, rank=3, **kw):
    synth = SynthSpec(rows=rows, default_rate=0.2, seed=seed, missing_rate=0.02)
    return RunConfig(synth=synth, seed=seed, svd=SvdSpec(rank) if rank else None, **kw)


@pytest.fixture(scope="module")
def report():
    return ablate(config())


def scalar(arm, key):
    d = arm.to_dict()
    return d["report"]["accuracy"] if key == "accuracy" else d[key]


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            {"model": "forest"},
            {"threshold": 1.5},
            {"test_fraction": 0.0},
            {"class_weight": "heavy"},
            {"format": "xml"},
            {"max_iters": 0},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            config(**kw).validate()

    def test_needs_one_source(self):
        with pytest.raises(ConfigError):
            RunConfig().validate()
        with pytest.raises(ConfigError):
            RunConfig(data="x.csv").validate()

    def test_rank_zero(self):
        with pytest.raises(ConfigError, match="rank"):
            replace(config(), svd=SvdSpec(0)).validate()

    def test_ablate_needs_rank(self):
        with pytest.raises(ConfigError):
            ablate(config(rank=None))

    def test_rank_above_columns(self):
        with pytest.raises(ConfigError, match=r"\[1, 27\]"):
            ablate(config(rank=28))

    def test_dict_round_trip(self):
        c = config(group_by=(GroupSpec("Age", "18-40,41+"),), references={"Age": "41+"})
        assert RunConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c

    def test_unknown_synth_key(self):
        with pytest.raises(ConfigError):
            SynthSpec.from_dict({"rows": 10, "default_rate": 0.1, "colour": "red"})

    def test_group_spec_parse(self):
        assert GroupSpec.parse("Age:18-30,31+") == GroupSpec("Age", "18-30,31+")
        assert GroupSpec.parse("MaritalStatus") == GroupSpec("MaritalStatus", None)


class TestAblation:
    def test_shared_test_rows(self, report):
        assert report.baseline.test_fingerprint == report.svd.test_fingerprint
        assert report.baseline.cm.n == report.svd.cm.n == 800

    def test_default_groups_are_sensitive_columns(self, report):
        assert set(report.baseline.fairness) == {"Age", "MaritalStatus"}

    def test_fairness_additivity(self, report):
        for arm in report.arms:
            for rep in arm.fairness.values():
                assert rep.total_confusion() == arm.cm

    def test_deltas_recompute_exactly(self, report):
        b, s = report.baseline, report.svd
        for key in SCALARS:
            assert report.deltas[key] == scalar(s, key) - scalar(b, key)
        assert report.deltas["class1_recall"] == s.recall_1 - b.recall_1
        for attr, gaps in report.deltas["fairness"].items():
            fb, fs = b.fairness[attr], s.fairness[attr]
            assert gaps["fpr_gap"] == (None if None in (fb.eq_odds_fpr_gap, fs.eq_odds_fpr_gap)
                                       else fs.eq_odds_fpr_gap - fb.eq_odds_fpr_gap)

    def test_svd_provenance(self, report):
        svd = report.svd.provenance["svd"]
        assert svd["rank"] == 3 and len(svd["sigma"]) == 3
        assert 0 < svd["energy_retained"] < 1
        assert svd["converged"]
        assert len(report.svd.provenance["model"]["weights"]) == 3

    def test_deterministic_bytes(self, report):
        again = ablate(config())
        for fmt in ("json", "csv", "text"):
            assert render_report(again, fmt) == render_report(report, fmt)

    def test_full_rank_equivalence(self):
        r = ablate(config(rank=27, seed=4))
        for key in SCALARS:
            assert abs(scalar(r.svd, key) - scalar(r.baseline, key)) <= 1e-6

    def test_logistic_arm(self):
        r = ablate(config(model="logistic", class_weight="balanced"))
        assert r.baseline.to_dict()["extension"] is True
        assert r.baseline.recall_1 > 0.3

    def test_stage_prefix_on_error(self):
        with pytest.raises(UnknownReference, match=r"\[baseline arm, fairness\]"):
            ablate(config(group_by=(GroupSpec("MaritalStatus"),), references={"MaritalStatus": "Widowed"}))

    def test_single_arm_run(self):
        r = run(config(rank=None))
        assert r.kind == "run" and r.svd is None and r.deltas == {}
        r = run(config(rank=2))
        assert r.kind == "run" and r.baseline is None


class TestCompare:
    def test_published_auc_delta(self, report):
        b = replace(report.baseline, auc=0.704)
        s = replace(report.svd, auc=0.638)
        assert compare(b, s).deltas["auc"] == pytest.approx(-0.066, abs=1e-12)

    def test_identical_arms(self, report):
        d = compare(report.baseline, report.baseline).deltas
        assert all(d[k] == 0 for k in (*SCALARS, "class1_recall"))

    def test_mismatched_test_sets(self, report):
        with pytest.raises(MismatchedTestSets):
            compare(report.baseline, replace(report.svd, test_fingerprint="0" * 64))

    def test_degenerate_flags(self, report):
        dead = ConfusionMatrix(0, 0, 700, 100)
        live = ConfusionMatrix(5, 2, 698, 95)
        b = replace(report.baseline, cm=live, report=report_from_confusion(live))
        s = replace(report.svd, cm=dead, report=report_from_confusion(dead))
        flags = compare(b, s).flags
        assert f"svd: {FLAG_DEGENERATE} (no positive predictions)" in flags
        assert FLAG_LOST_RECALL in flags
        assert not any(f.startswith("baseline") for f in flags)


def count_csv_rows(tree):
    """Count metrics by walking the JSON report, independently of csv_rows."""
    n = 0
    for arm in tree["arms"].values():
        n += 3 + 4 + 1  # auc, type rates, confusion cells, accuracy
        n += sum(len([k for k in arm["report"][r] if k in ("precision", "recall", "f1", "support")])
                 for r in ("0", "1", "macro_avg", "weighted_avg"))
        for fr in arm["fairness"].values():
            per_group = {"n", "tp", "fp", "tn", "fn", "fpr", "fnr", "selection_rate", "base_rate", "disparate_impact"}
            n += sum(len(per_group & set(g)) for g in fr["groups"]) + 2
    for key, value in tree["deltas"].items():
        n += sum(len(g) for g in value.values()) if key == "fairness" else 1
    return n


class TestRendering:
    def test_json_round_trip(self, report):
        blob = render_report(report, "json")
        assert render_report(load_report(blob), "json") == blob
        assert json.loads(blob)["schema_version"] == 1

    def test_csv_row_count(self, report):
        rows = list(csv.reader(io.StringIO(render_report(report, "csv").decode())))
        assert rows[0] == ["arm", "attribute", "group", "metric", "value"]
        assert len(rows) - 1 == count_csv_rows(json.loads(render_report(report, "json")))

    def test_csv_undefined_cells(self):
        # rank 1 on a rare class predicts no defaults, so every DI ratio is undefined
        r = ablate(config(rank=1, group_by=(GroupSpec("MaritalStatus"),), threshold=0.9))
        assert r.svd.cm.tp + r.svd.cm.fp == 0
        rows = list(csv.DictReader(io.StringIO(harness.render_csv(r))))
        di = [x["value"] for x in rows if x["arm"] == "svd" and x["metric"] == "disparate_impact"]
        assert di == ["undefined"] * 3

    def test_text_mirrors_table_layout(self, report):
        cm = ConfusionMatrix(tp=18, fp=11, tn=45159, fn=5882)
        arm = replace(report.baseline, cm=cm, report=report_from_confusion(cm))
        text = render_report(AblationReport(config={}, baseline=arm, svd=None), "text").decode()
        rows = {" ".join(line.split()[:2]): line.split()[2:5] for line in text.splitlines() if line.strip()}
        assert rows["macro avg"] == ["0.75", "0.50", "0.47"]
        assert rows["weighted avg"] == ["0.85", "0.88", "0.83"]
        assert text.startswith("Model without truncated SVD, ols")

    def test_text_has_delta_block(self, report):
        text = render_report(report, "text").decode()
        assert "Model with truncated SVD (k=3), ols" in text
        assert "Change with SVD (svd minus baseline)" in text

    def test_unsupported_schema_version(self, report):
        tree = report.to_dict()
        tree["schema_version"] = 99
        with pytest.raises(ConfigError):
            AblationReport.from_dict(tree)

    def test_json_has_no_nan(self, report):
        tree = json.loads(render_report(report, "json"))
        assert np.isfinite(tree["arms"]["svd"]["auc"])
