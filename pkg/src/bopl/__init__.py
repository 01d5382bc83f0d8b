"""Boosted off-policy learning from logged bandit feedback.

Softmax ensemble policies of decision trees, trained by directly
minimizing an inverse-propensity-scored empirical risk (plain or
surrogate objective), plus off-policy estimators, base-learner
reductions, bound diagnostics and a supervised-to-bandit experiment
pipeline.
"""

from .base_learners import (
    classification_targets,
    fit_base_predictor,
    predictor_norm,
    regression_targets,
    rescale_to_omega,
    weighted_error_rate,
)
from .boosting import (
    BoostConfig,
    RoundStats,
    TrainTrace,
    bopl_ensemble_weight,
    bopls_ensemble_weight,
    empirical_risk,
    min_emp_risk,
    surrogate_empirical_risk,
    theorem1_bound,
    train,
    train_brr,
    translate_rewards,
)
from .dataset import BanditDataset, LoggedExample, SupervisedExample
from .estimators import (
    RiskEstimate,
    dm_reward,
    expected_policy_reward,
    ground_truth_reward,
    ips_risk,
    snips_reward,
)
from .policy import (
    Ensemble,
    SoftmaxPolicy,
    action_select,
    ensemble_score,
    loss,
    loss_gradient,
    softmax,
    surrogate_loss,
    surrogate_loss_gradient,
)
from .simulation import (
    COVERTYPE_GROUPS,
    FASHION_MNIST_GROUPS,
    LoggingPolicy,
    RewardSpec,
    convert,
    derive_seed,
    split_dataset,
    train_logging_policy,
)
from .trees import (
    ClassificationSamples,
    Predictor,
    RegressionSamples,
    Tree,
    TreeParams,
    fit_classification_tree,
    fit_regression_tree,
)

__version__ = "0.1.0"

__all__ = [
    "BanditDataset",
    "BoostConfig",
    "ClassificationSamples",
    "COVERTYPE_GROUPS",
    "Ensemble",
    "FASHION_MNIST_GROUPS",
    "LoggedExample",
    "LoggingPolicy",
    "Predictor",
    "RegressionSamples",
    "RewardSpec",
    "RiskEstimate",
    "RoundStats",
    "SoftmaxPolicy",
    "SupervisedExample",
    "TrainTrace",
    "Tree",
    "TreeParams",
    "action_select",
    "bopl_ensemble_weight",
    "bopls_ensemble_weight",
    "classification_targets",
    "convert",
    "derive_seed",
    "dm_reward",
    "empirical_risk",
    "ensemble_score",
    "expected_policy_reward",
    "fit_base_predictor",
    "fit_classification_tree",
    "fit_regression_tree",
    "ground_truth_reward",
    "ips_risk",
    "loss",
    "loss_gradient",
    "min_emp_risk",
    "predictor_norm",
    "regression_targets",
    "rescale_to_omega",
    "snips_reward",
    "softmax",
    "split_dataset",
    "surrogate_empirical_risk",
    "surrogate_loss",
    "surrogate_loss_gradient",
    "theorem1_bound",
    "train",
    "train_brr",
    "train_logging_policy",
    "translate_rewards",
    "weighted_error_rate",
]
