"""Base learners, uplift baselines and effect meta-learners."""

from .base import (
    BaseLearnerConfig,
    LogisticModel,
    RidgeModel,
    log_loss,
    logistic_fit,
    logistic_objective,
    ridge_fit,
    sigmoid,
)
from .meta import (
    RidgeEffectScorer,
    XLearnerScorer,
    dr_pseudo_outcome,
    fit_dr_learner,
    fit_r_learner,
    fit_x_learner,
)
from .scoring import PROPENSITY_CLIP, FitError, UpliftScorer
from .serialize import load_scorer, save_scorer, scorer_from_dict, scorer_to_dict
from .tuning import (
    ITE_METHODS,
    UM_METHODS,
    TuneResult,
    default_grid,
    default_logistic_grid,
    default_ridge_grid,
    fit_method,
    tune,
)
from .uplift import (
    CvtScorer,
    MomScorer,
    SdrScorer,
    TwoModelScorer,
    cvt_labels,
    fit_cvt,
    fit_mom,
    fit_sdr,
    fit_t_learner,
    fit_two_model,
    mom_transform,
)

__all__ = [
    "BaseLearnerConfig",
    "CvtScorer",
    "FitError",
    "ITE_METHODS",
    "LogisticModel",
    "MomScorer",
    "PROPENSITY_CLIP",
    "RidgeEffectScorer",
    "RidgeModel",
    "SdrScorer",
    "TuneResult",
    "TwoModelScorer",
    "UM_METHODS",
    "UpliftScorer",
    "XLearnerScorer",
    "cvt_labels",
    "default_grid",
    "default_logistic_grid",
    "default_ridge_grid",
    "dr_pseudo_outcome",
    "fit_cvt",
    "fit_dr_learner",
    "fit_method",
    "fit_mom",
    "fit_r_learner",
    "fit_sdr",
    "fit_t_learner",
    "fit_two_model",
    "fit_x_learner",
    "load_scorer",
    "log_loss",
    "logistic_fit",
    "logistic_objective",
    "mom_transform",
    "ridge_fit",
    "save_scorer",
    "scorer_from_dict",
    "scorer_to_dict",
    "sigmoid",
    "tune",
]
