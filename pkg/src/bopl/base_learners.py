"""Reductions from the per-round base objective to supervised tree fits.

Each boosting round asks the base learner for a predictor h maximizing

    | (1/n) sum_i (r_i/p_i) * xi_i * (e_i - pi(x_i))' h(x_i) |

subject to a weighted norm constraint on h, where pi is the previous
round's policy.  Two reductions are provided:

* regression: weighted least squares on n*|A| expanded [x_i; e_a] rows,
  with per-example weight and a pseudo-target derived from the gradient;
* classification: weighted binary classification on the same rows with
  +-1 pseudo-labels, solved greedily by the CART classifier.

The "bopl" variant uses xi_i = pi(a_i|x_i) and norm weights |r_i|/p_i.
The "bopl_s" (surrogate) variant uses xi_i = pi(a_i|x_i) when r_i < 0
and 1 otherwise, and norm weights |r_i| * rho_i / p_i with rho_i = 1/2
for negative rewards and 1 otherwise.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .dataset import BanditDataset
from .trees import (
    ClassificationSamples,
    Predictor,
    RegressionSamples,
    TreeParams,
    fit_classification_tree,
    fit_regression_tree,
)

VARIANTS = ("bopl", "bopl_s")


def _check_variant(variant: str) -> None:
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")


def _check_probs(data: BanditDataset, policy_probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(policy_probs, dtype=np.float64)
    if probs.shape != (len(data), data.num_actions):
        raise ValueError(
            f"policy_probs must have shape {(len(data), data.num_actions)}, "
            f"got {probs.shape}"
        )
    return probs


def smoothness_weights(rewards: np.ndarray) -> np.ndarray:
    """rho_i: 1/2 where the reward is negative, else 1."""
    return np.where(np.asarray(rewards) < 0.0, 0.5, 1.0)


def gradient_switch(rewards: np.ndarray, chosen_probs: np.ndarray) -> np.ndarray:
    """xi_i: pi(a_i|x_i) where the reward is negative, else 1."""
    return np.where(np.asarray(rewards) < 0.0, chosen_probs, 1.0)


def _indicator_diff(data: BanditDataset, probs: np.ndarray) -> np.ndarray:
    n, A = probs.shape
    indicator = np.zeros((n, A))
    indicator[np.arange(n), data.actions] = 1.0
    return indicator - probs


def regression_row_weights(data: BanditDataset, variant: str = "bopl") -> np.ndarray:
    """Per-example least-squares weight: |r_i|/p_i, rho-scaled for bopl_s."""
    _check_variant(variant)
    weights = np.abs(data.rewards) / data.propensities
    if variant == "bopl_s":
        weights = weights * smoothness_weights(data.rewards)
    return weights


def regression_target_matrix(
    data: BanditDataset, policy_probs: np.ndarray, variant: str = "bopl"
) -> np.ndarray:
    """(n, |A|) pseudo-target matrix for the least-squares reduction."""
    _check_variant(variant)
    probs = _check_probs(data, policy_probs)
    n = probs.shape[0]
    r = data.rewards
    chosen = probs[np.arange(n), data.actions]
    diff = _indicator_diff(data, probs)
    if variant == "bopl":
        return np.sign(r)[:, None] * chosen[:, None] * diff
    rho = smoothness_weights(r)
    xi = gradient_switch(r, chosen)
    return (np.sign(r) * xi / rho)[:, None] * diff


def regression_targets(
    data: BanditDataset, policy_probs: np.ndarray, variant: str = "bopl"
) -> RegressionSamples:
    """Weighted least-squares rows for one round, n*|A| of them.

    For the plain variant, row (i, a) carries weight |r_i|/p_i and target

        sgn(r_i) * pi(a_i|x_i) * (1{a = a_i} - pi(a|x_i)).

    Rows with r_i = 0 carry weight 0 and are inert.
    """
    targets = regression_target_matrix(data, policy_probs, variant)
    return RegressionSamples(
        features=data.augmented_rows(),
        weights=np.repeat(regression_row_weights(data, variant), data.num_actions),
        targets=targets.reshape(-1),
    )


def classification_targets(
    data: BanditDataset, policy_probs: np.ndarray, variant: str = "bopl"
) -> ClassificationSamples:
    """Weighted binary-classification rows for one round.

    Row (i, a) carries the magnitude of the gradient term as its weight and
    the +-1 pseudo-label sgn(r_i) * (2 * 1{a = a_i} - 1).  Zero-reward rows
    carry weight 0; their label defaults to the a = a_i sign pattern.
    """
    _check_variant(variant)
    probs = _check_probs(data, policy_probs)
    n, A = probs.shape
    r, p = data.rewards, data.propensities
    chosen = probs[np.arange(n), data.actions]
    indicator = np.zeros((n, A))
    indicator[np.arange(n), data.actions] = 1.0
    diff = indicator - probs
    if variant == "bopl":
        weights = np.abs((r / p * chosen)[:, None] * diff)
    else:
        xi = gradient_switch(r, chosen)
        weights = np.abs((r * xi / p)[:, None] * diff)
    signs = np.where(np.sign(r) == 0.0, 1.0, np.sign(r))
    labels = signs[:, None] * (2.0 * indicator - 1.0)
    return ClassificationSamples(
        features=data.augmented_rows(),
        weights=weights.reshape(-1),
        labels=labels.reshape(-1),
    )


def make_fast_regression_fitter(data: BanditDataset, variant: str):
    """Round-invariant setup for repeated regression fits on one dataset.

    Drops zero-weight rows once (weights do not change across rounds) and
    presorts the pruned design matrix, so each round only rebuilds targets.
    Returns a callable with the fit_base_predictor signature.
    """
    from .trees import fit_regression_tree, presort_features

    A = data.num_actions
    row_w = np.repeat(regression_row_weights(data, variant), A)
    keep = row_w > 0.0
    rows = np.ascontiguousarray(data.augmented_rows()[keep])
    kept_w = row_w[keep]
    presorted = presort_features(rows)

    def fit(data_, policy_probs, base, params, variant_):
        targets = regression_target_matrix(data_, policy_probs, variant_)
        samples = RegressionSamples(
            features=rows, weights=kept_w, targets=targets.reshape(-1)[keep]
        )
        return fit_regression_tree(samples, params, presorted=presorted)

    return fit


def predictor_norm(
    predictor: Predictor, data: BanditDataset, variant: str = "bopl"
) -> float:
    """(1/n) sum_i c_i ||h(x_i)||^2 with c_i = |r_i|/p_i (rho-weighted for bopl_s)."""
    _check_variant(variant)
    H = predictor.predict_rows(data.augmented_rows()).reshape(
        len(data), data.num_actions
    )
    coef = np.abs(data.rewards) / data.propensities
    if variant == "bopl_s":
        coef = coef * smoothness_weights(data.rewards)
    return float(np.mean(coef * np.sum(H * H, axis=1)))


def rescale_to_omega(
    predictor: Predictor, data: BanditDataset, omega: float, variant: str = "bopl"
) -> Predictor:
    """Scale the predictor so its weighted norm on the data equals omega."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    current = predictor_norm(predictor, data, variant)
    if current <= 0.0:
        raise ValueError(
            "predictor vanishes on every weighted context; "
            "the norm constraint cannot be met (early-stop signal)"
        )
    return replace(predictor, scale=predictor.scale * np.sqrt(omega / current))


def weighted_error_rate(predictor: Predictor, samples: ClassificationSamples) -> float:
    """Error rate of the predictor's signs under the normalized sample weights."""
    total = float(np.sum(samples.weights))
    if total <= 0.0:
        raise ValueError("zero total weight")
    preds = predictor.predict_rows(samples.features)
    signs = np.where(preds >= 0.0, 1.0, -1.0)
    wrong = samples.weights * (signs != samples.labels)
    return float(np.sum(wrong)) / total


def fit_base_predictor(
    data: BanditDataset,
    policy_probs: np.ndarray,
    base: str,
    params: TreeParams,
    variant: str = "bopl",
) -> Predictor:
    """One round of the base learner: build targets, fit the matching tree."""
    if base == "regression":
        return fit_regression_tree(regression_targets(data, policy_probs, variant), params)
    if base == "classification":
        return fit_classification_tree(
            classification_targets(data, policy_probs, variant), params
        )
    raise ValueError(f"unknown base learner {base!r}")
