"""Benchmark toolkit for uplift modeling and individual-treatment-effect
prediction: semi-synthetic trial data with known ground truth, from-scratch
baseline learners, ranking and effect-recovery metrics, sanity checks and a
reproducible experiment CLI."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    ConstraintReport,
    Dataset,
    ParseError,
    Sample,
    SchemaDescriptor,
    SchemaError,
    load_csv,
    rebalance,
    validate_constraints,
    write_csv,
)
from .encoding import EncodedMatrix, FeatureEncoder, encode  # noqa: E402
from .metrics import (  # noqa: E402
    MetricResult,
    UpliftCurve,
    ate,
    auuc,
    auuc_ci,
    auuc_score,
    pehe,
    policy_risk,
    uplift_curve,
)
from .splits import SplitSpec, kfold, split  # noqa: E402
from .synthgen import (  # noqa: E402
    AssignmentSpec,
    GroundTruthBundle,
    SurfaceSpec,
    assign_treatment,
    calibrate,
    eval_surface,
    gen_covariates,
    generate_ite_dataset,
    generate_um_dataset,
    sample_outcomes,
)
from .validation import C2STResult, c2st, dummy_improvement  # noqa: E402

__all__ = [
    "AssignmentSpec",
    "C2STResult",
    "ConstraintReport",
    "Dataset",
    "EncodedMatrix",
    "FeatureEncoder",
    "GroundTruthBundle",
    "MetricResult",
    "ParseError",
    "Sample",
    "SchemaDescriptor",
    "SchemaError",
    "SplitSpec",
    "SurfaceSpec",
    "UpliftCurve",
    "__version__",
    "assign_treatment",
    "ate",
    "auuc",
    "auuc_ci",
    "auuc_score",
    "c2st",
    "calibrate",
    "dummy_improvement",
    "encode",
    "eval_surface",
    "gen_covariates",
    "generate_ite_dataset",
    "generate_um_dataset",
    "kfold",
    "load_csv",
    "pehe",
    "policy_risk",
    "rebalance",
    "sample_outcomes",
    "split",
    "uplift_curve",
    "validate_constraints",
    "write_csv",
]
