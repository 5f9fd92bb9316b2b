"""Probability-of-default models with and without truncated-SVD preprocessing,
scored for accuracy and group fairness."""

from .dataset import ColumnSpec, FeatureFrame, SplitPair, load_csv, load_schema, split, synthesize, write_csv
from .fairness import (
    FairnessReport,
    GroupMetrics,
    GroupSlice,
    disparate_impact,
    equalized_odds_gap,
    fairness_report,
    group_confusions,
    slice_by,
)
from .harness import AblationReport, ArmResult, RunConfig, SvdSpec, SynthSpec, ablate, compare, render_report, run, run_arm
from .metrics import (
    ClassificationReport,
    ConfusionMatrix,
    RocCurve,
    classification_report,
    confusion,
    roc_curve,
    type1_rate,
    type2_rate,
)
from .models import TrainedModel, fit_logistic, fit_ols, predict_label, predict_proba
from .preprocess import DesignMatrix, PreprocessPlan, apply_plan, fit_plan
from .tsvd import TruncatedFactors, frobenius_error, project, reconstruct, truncated_svd

__version__ = "0.1.0"
