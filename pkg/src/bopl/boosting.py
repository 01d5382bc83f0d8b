"""Boosted off-policy training loops and their diagnostics.

Two policy-optimization loops share one skeleton.  At round t, with the
previous policy pi (beta = 1) evaluated on the training log:

* "bopl" fits a predictor against the gradient of the IPS risk, rescales
  it so (1/n) sum (|r_i|/p_i) ||h(x_i)||^2 = omega, and adds it with the
  closed-form weight alpha_t = (2/omega) * g_t, where g_t is the averaged
  gradient correlation of the fitted predictor;
* "bopl_s" boosts a composite surrogate objective that swaps in the
  log-loss for nonnegative rewards; its norm constraint is rho-weighted
  and the weight is alpha_t = g_t / omega.

Early stopping follows the order: vanished gradient term, vanished base
predictions, vanished ensemble weight (threshold |.| < stop_threshold),
then an optional validation patience rule.  "brr" is plain gradient
boosting of squared error on the logged (x_i, a_i, r_i) pairs with a
fixed learning rate; it serves as the reward-regression baseline.

Reward translation subtracts a constant from the training rewards only;
reported rewards (the snips_train trace column) always use the original
rewards.  The per-round empirical and surrogate risks, the minimum
empirical risk and the excess-risk bound all refer to the translated
training objective.

The loop is sequential by construction; within-round statistics are
plain numpy reductions, so identical inputs give bit-identical models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .base_learners import (
    classification_targets,
    fit_base_predictor,
    gradient_switch,
    make_fast_regression_fitter,
    predictor_norm,
    rescale_to_omega,
    smoothness_weights,
    weighted_error_rate,
)
from .dataset import BanditDataset, SupervisedExample
from .policy import Ensemble, SoftmaxPolicy, softmax_matrix, log_softmax_matrix
from .trees import (
    Predictor,
    RegressionSamples,
    TreeParams,
    augment_contexts,
    fit_regression_tree,
)

ALGORITHMS = ("bopl", "bopl_s", "brr")
BASES = ("regression", "classification")

STOP_ROUNDS = "rounds_exhausted"
STOP_GRADIENT = "gradient_vanished"
STOP_PREDICTOR = "predictor_vanished"
STOP_WEIGHT = "weight_vanished"
STOP_VALIDATION = "validation_patience"


@dataclass
class BoostConfig:
    """All training hyperparameters.

    reward_translation is the additive shift applied to training rewards
    (the App-G-style value; e.g. -0.2 subtracts 0.2 from every reward).
    omega is the base-predictor scale constraint; rescale toggles whether
    fitted predictors are rescaled to meet it exactly (required for the
    excess-risk bound to hold).  shrinkage multiplies every ensemble
    weight (1 disables it).  patience enables validation early stopping
    when set; it is off by default.
    """

    algorithm: str
    rounds: int
    tree_params: TreeParams
    base: str = "regression"
    omega: float = 1.0
    reward_translation: float = 0.0
    shrinkage: float = 1.0
    stop_threshold: float = 1e-10
    clip_cap: float | None = None
    rescale: bool = True
    patience: int | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.base not in BASES:
            raise ValueError(f"base must be one of {BASES}")
        if self.algorithm == "brr" and self.base != "regression":
            raise ValueError("brr supports only the regression base")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not self.omega > 0:
            raise ValueError("omega must be > 0")
        if not (0.0 < self.shrinkage <= 1.0):
            raise ValueError("shrinkage must be in (0, 1]")
        if self.stop_threshold < 0:
            raise ValueError("stop_threshold must be >= 0")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be >= 1 when set")


@dataclass
class RoundStats:
    """Diagnostics recorded after each completed round."""

    t: int
    alpha: float
    grad_term: float
    grad_norm: float
    emp_risk: float
    surrogate_risk: float | None
    snips_train: float
    bound: float | None
    error_rate: float | None = None
    xi: np.ndarray | None = field(default=None, repr=False)
    rho: np.ndarray | None = field(default=None, repr=False)


@dataclass
class TrainTrace:
    """Per-round statistics plus the bound ingredients for the whole run."""

    rounds: list[RoundStats]
    min_emp_risk: float
    initial_gap: float
    stop_reason: str

    def alphas(self) -> np.ndarray:
        return np.array([s.alpha for s in self.rounds])

    def __len__(self) -> int:
        return len(self.rounds)


def translate_rewards(data: BanditDataset, c: float) -> BanditDataset:
    """Subtract c from every reward; evaluation paths use the original data."""
    if c == 0.0:
        return data
    return data.replace_rewards(data.rewards - c)


def min_emp_risk(data: BanditDataset) -> float:
    """The unconstrained minimum empirical risk R* = (1/n) sum min(0, -r_i/p_i).

    Each logged example is treated as a distinct context, so the
    per-example maximizing policy puts probability 1 on a_i when the
    reward is positive and 0 otherwise.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    return float(np.mean(np.minimum(0.0, -data.rewards / data.propensities)))


def bopl_ensemble_weight(grad_term: float, omega: float, shrinkage: float = 1.0) -> float:
    """Closed-form ensemble weight (2/omega) * grad_term, shrunk by eta."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    return shrinkage * 2.0 * grad_term / omega

def bopls_ensemble_weight(grad_term: float, omega: float, shrinkage: float = 1.0) -> float:
    """Surrogate-objective ensemble weight grad_term / omega, shrunk by eta."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    return shrinkage * grad_term / omega


def theorem1_bound(alphas: Sequence[float], omega: float, delta0: float) -> np.ndarray:
    """Excess-empirical-risk bound at every prefix of the weight sequence.

    bound_T = delta0 * exp(-(omega / (4 delta0)) * sum_{t<=T} alpha_t^2);
    delta0 = 0 collapses to all zeros.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    if delta0 < 0:
        raise ValueError("delta0 must be >= 0")
    if delta0 == 0.0:
        return np.zeros(alphas.shape[0])
    return delta0 * np.exp(-(omega / (4.0 * delta0)) * np.cumsum(alphas**2))


def empirical_risk_from_probs(data: BanditDataset, probs: np.ndarray) -> float:
    chosen = probs[np.arange(len(data)), data.actions]
    return float(np.mean(-data.rewards / data.propensities * chosen))


def empirical_risk(policy: SoftmaxPolicy, data: BanditDataset) -> float:
    """IPS empirical risk of the policy on the log (mean per-example loss)."""
    return empirical_risk_from_probs(data, policy.action_probs_matrix(data.features))


def surrogate_risk_from_scores(data: BanditDataset, scores: np.ndarray) -> float:
    idx = np.arange(len(data))
    probs = softmax_matrix(scores)
    logp = log_softmax_matrix(scores)[idx, data.actions]
    chosen = probs[idx, data.actions]
    ratio = data.rewards / data.propensities
    per_example = np.where(
        data.rewards < 0.0, -ratio * chosen, -ratio * (logp + 1.0)
    )
    return float(np.mean(per_example))


def surrogate_empirical_risk(policy: SoftmaxPolicy, data: BanditDataset) -> float:
    """Composite surrogate risk: log-loss rows for r >= 0, plain loss rows below."""
    if policy.is_argmax or policy.beta != 1.0:
        raise ValueError("the surrogate risk is defined for the beta=1 training policy")
    return surrogate_risk_from_scores(data, policy.ensemble.scores_matrix(data.features))


def _snips_from_probs(data: BanditDataset, probs: np.ndarray, rewards: np.ndarray) -> float:
    chosen = probs[np.arange(len(data)), data.actions]
    w = chosen / data.propensities
    denom = float(w.sum())
    return float(np.dot(rewards, w)) / denom if denom > 0 else math.nan


ValidationSet = tuple[Sequence[SupervisedExample], object]


def train(
    data: BanditDataset,
    config: BoostConfig,
    base_learner: Callable[..., Predictor] | None = None,
    validation: ValidationSet | None = None,
) -> tuple[Ensemble, TrainTrace]:
    """Run the configured boosting loop and return the ensemble plus trace.

    base_learner may override the built-in reduction; it is called as
    base_learner(data, policy_probs, base, tree_params, variant) and must
    return a Predictor.  validation, when given with config.patience, is
    an (examples, reward_spec) pair scored by argmax ground-truth reward;
    without it the patience rule tracks the self-normalized training
    reward.  On a patience stop the ensemble is truncated to the best
    round seen.
    """
    if config.algorithm == "brr":
        return train_brr(data, config, base_learner)
    if len(data) == 0:
        raise ValueError("empty dataset")

    val_aug = val_rewards = None
    if config.patience is not None and validation is not None:
        examples, spec = validation
        val_X = np.stack([e.features for e in examples])
        val_aug = augment_contexts(val_X, data.num_actions)
        val_rewards = np.array([
            [spec.reward(e.labels, a) for a in range(data.num_actions)]
            for e in examples
        ])
        Fv = np.zeros((len(examples), data.num_actions))

    original_rewards = data.rewards
    data = translate_rewards(data, -config.reward_translation)
    if not np.any(data.rewards != 0.0):
        raise ValueError(
            "all rewards are zero after translation; the scale constraint "
            "is unsatisfiable"
        )
    variant = "bopl_s" if config.algorithm == "bopl_s" else "bopl"
    surrogate = config.algorithm == "bopl_s"
    if base_learner is not None:
        fit = base_learner
    elif config.base == "regression":
        fit = make_fast_regression_fitter(data, variant)
    else:
        fit = fit_base_predictor

    n, A = len(data), data.num_actions
    idx = np.arange(n)
    ratio = data.rewards / data.propensities
    rho = smoothness_weights(data.rewards)
    rstar = min_emp_risk(data)
    F = np.zeros((n, A))
    delta0 = empirical_risk_from_probs(data, softmax_matrix(F)) - rstar

    members: list[tuple[float, Predictor]] = []
    stats: list[RoundStats] = []
    stop_reason = STOP_ROUNDS
    best_metric = -math.inf
    best_round = 0
    alpha_sq_sum = 0.0

    for t in range(1, config.rounds + 1):
        probs = softmax_matrix(F)
        chosen = probs[idx, data.actions]
        indicator = np.zeros((n, A))
        indicator[idx, data.actions] = 1.0
        diff = indicator - probs
        if surrogate:
            xi = gradient_switch(data.rewards, chosen)
            grad_rows = -(ratio * xi)[:, None] * diff
        else:
            xi = None
            grad_rows = -(ratio * chosen)[:, None] * diff
        grad_norm = float(np.linalg.norm(grad_rows)) / n

        predictor = fit(data, probs, config.base, config.tree_params, variant)
        if config.rescale:
            try:
                predictor = rescale_to_omega(predictor, data, config.omega, variant)
            except ValueError:
                stop_reason = STOP_PREDICTOR
                break
            denom_omega = config.omega
        else:
            denom_omega = predictor_norm(predictor, data, variant)
            if denom_omega <= 0.0:
                stop_reason = STOP_PREDICTOR
                break
        H = predictor.predict_rows(data.augmented_rows()).reshape(n, A)
        grad_term = float(np.mean(-np.sum(grad_rows * H, axis=1)))
        if surrogate:
            alpha_star = bopls_ensemble_weight(grad_term, denom_omega)
        else:
            alpha_star = bopl_ensemble_weight(grad_term, denom_omega)

        if abs(grad_term) < config.stop_threshold:
            stop_reason = STOP_GRADIENT
            break
        if float(np.max(np.abs(H))) < config.stop_threshold:
            stop_reason = STOP_PREDICTOR
            break
        if abs(alpha_star) < config.stop_threshold:
            stop_reason = STOP_WEIGHT
            break

        alpha = config.shrinkage * alpha_star
        members.append((alpha, predictor))
        F = F + alpha * H
        new_probs = softmax_matrix(F)
        emp = empirical_risk_from_probs(data, new_probs)
        surr = surrogate_risk_from_scores(data, F)
        snips = _snips_from_probs(data, new_probs, original_rewards)
        alpha_sq_sum += alpha * alpha
        if not surrogate and config.rescale and delta0 > 0.0:
            bound = delta0 * math.exp(-(config.omega / (4.0 * delta0)) * alpha_sq_sum)
        elif not surrogate and config.rescale:
            bound = 0.0
        else:
            bound = None
        error_rate = None
        if config.base == "classification":
            error_rate = weighted_error_rate(
                predictor, classification_targets(data, probs, variant)
            )
        stats.append(RoundStats(
            t=t,
            alpha=alpha,
            grad_term=grad_term,
            grad_norm=grad_norm,
            emp_risk=emp,
            surrogate_risk=surr,
            snips_train=snips,
            bound=bound,
            error_rate=error_rate,
            xi=xi,
            rho=rho if surrogate else None,
        ))

        if config.patience is not None:
            if val_aug is not None:
                Fv = Fv + alpha * predictor.predict_rows(val_aug).reshape(Fv.shape)
                selected = np.argmax(Fv, axis=1)
                metric = float(np.mean(val_rewards[np.arange(Fv.shape[0]), selected]))
            else:
                metric = snips
            if metric > best_metric:
                best_metric = metric
                best_round = t
            elif t - best_round >= config.patience:
                stop_reason = STOP_VALIDATION
                members = members[:best_round]
                break

    ensemble = Ensemble(members=members, num_actions=A, feature_dim=data.feature_dim)
    trace = TrainTrace(
        rounds=stats, min_emp_risk=rstar, initial_gap=delta0, stop_reason=stop_reason
    )
    return ensemble, trace


def train_brr(
    data: BanditDataset,
    config: BoostConfig,
    tree_learner: Callable[..., Predictor] | None = None,
) -> tuple[Ensemble, TrainTrace]:
    """Boosted reward regression: squared-error boosting on logged pairs.

    Fits each round's regression tree to the residual r_i - f(x_i, a_i)
    over the logged (context, action) rows only, with a fixed learning
    rate equal to config.shrinkage.  Risk diagnostics in the trace score
    the induced beta=1 softmax policy so runs stay comparable to the
    policy-optimization loops.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    original_rewards = data.rewards
    data = translate_rewards(data, -config.reward_translation)

    n, A = len(data), data.num_actions
    d = data.feature_dim
    logged_rows = data.augmented_rows()[np.arange(n) * A + data.actions]
    rstar = min_emp_risk(data)
    F = np.zeros((n, A))
    f_logged = np.zeros(n)
    delta0 = empirical_risk_from_probs(data, softmax_matrix(F)) - rstar
    unit_weights = np.ones(n)

    members: list[tuple[float, Predictor]] = []
    stats: list[RoundStats] = []
    stop_reason = STOP_ROUNDS
    for t in range(1, config.rounds + 1):
        residual = data.rewards - f_logged
        samples = RegressionSamples(
            features=logged_rows, weights=unit_weights, targets=residual
        )
        if tree_learner is not None:
            predictor = tree_learner(samples, config.tree_params)
        else:
            predictor = fit_regression_tree(samples, config.tree_params)
        H = predictor.predict_rows(data.augmented_rows()).reshape(n, A)
        if float(np.max(np.abs(H))) < config.stop_threshold:
            stop_reason = STOP_PREDICTOR
            break
        alpha = config.shrinkage
        members.append((alpha, predictor))
        F = F + alpha * H
        f_logged = F[np.arange(n), data.actions]
        new_probs = softmax_matrix(F)
        stats.append(RoundStats(
            t=t,
            alpha=alpha,
            grad_term=math.nan,
            grad_norm=float(np.sqrt(np.mean(residual**2))),
            emp_risk=empirical_risk_from_probs(data, new_probs),
            surrogate_risk=None,
            snips_train=_snips_from_probs(data, new_probs, original_rewards),
            bound=None,
        ))

    ensemble = Ensemble(members=members, num_actions=A, feature_dim=d)
    trace = TrainTrace(
        rounds=stats, min_emp_risk=rstar, initial_gap=delta0, stop_reason=stop_reason
    )
    return ensemble, trace
