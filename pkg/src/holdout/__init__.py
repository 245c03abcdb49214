"""Choose the cross-validation hold-out size by trading loss against its variance."""

__version__ = "0.1.0"

from .errors import (
    AnchorError,
    DataError,
    DomainError,
    HoldoutError,
    ModelError,
    RankDeficientError,
)
from .rng import stream
from .dataset import Dataset, FoldPlan, Split, load_csv, make_folds, random_split
from .models import ForestConfig, PredictorSpec, fit, hat_matrix, predict
from .cv import (
    LossAnchors,
    estimate_anchors,
    kfold_mse,
    loocv_mse,
    pure_loss,
    split_mse,
)
from .curves import (
    BoundMode,
    LossCurve,
    eval_loss,
    eval_variance_bound,
    fit_interpolating_curve,
    fit_power_curve,
    negative_utility,
)
from .optimizer import (
    OptimalSplit,
    ParetoPoint,
    implicit_sigma2,
    optimal_m,
    pareto_frontier,
    sigma2_upper_bound,
)
from .sure import SureResult, sure_anchor, sure_estimate, sure_variance_estimate
from .simulation import (
    DgpConfig,
    clt_plugin_variance,
    generate,
    nested_cv_variance,
    run_fixed_model_experiment,
    run_kfold_experiment,
    run_split_experiment,
)

__all__ = [
    "AnchorError",
    "BoundMode",
    "DataError",
    "DgpConfig",
    "Dataset",
    "DomainError",
    "FoldPlan",
    "ForestConfig",
    "HoldoutError",
    "LossAnchors",
    "LossCurve",
    "ModelError",
    "OptimalSplit",
    "ParetoPoint",
    "PredictorSpec",
    "RankDeficientError",
    "Split",
    "SureResult",
    "clt_plugin_variance",
    "estimate_anchors",
    "eval_loss",
    "eval_variance_bound",
    "fit",
    "fit_interpolating_curve",
    "fit_power_curve",
    "generate",
    "hat_matrix",
    "implicit_sigma2",
    "kfold_mse",
    "load_csv",
    "loocv_mse",
    "make_folds",
    "negative_utility",
    "nested_cv_variance",
    "optimal_m",
    "pareto_frontier",
    "predict",
    "pure_loss",
    "random_split",
    "run_fixed_model_experiment",
    "run_kfold_experiment",
    "run_split_experiment",
    "sigma2_upper_bound",
    "split_mse",
    "stream",
    "sure_anchor",
    "sure_estimate",
    "sure_variance_estimate",
]
