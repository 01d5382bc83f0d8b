"""Off-policy estimators of policy risk and reward from logged data.

Given a log (x_i, a_i, p_i, r_i) and a target policy pi, the importance
weight of example i is w_i = pi(a_i | x_i) / p_i.

ips_risk       (1/n) sum_i -r_i * w_i, optionally with w_i capped.
snips_reward   (sum_i r_i * w_i) / (sum_i w_i), reported as reward.
dm_reward      (1/m) sum_x sum_a pi(a|x) * g(x, a) for a reward model g.
ground truth   full-information mean reward of an argmax policy after a
               supervised-to-bandit conversion.

Sign convention: IPS reports risk (negative estimated reward); the other
estimators report reward.  Clipping caps the importance weight, never the
reward.  All functions are pure and read-only on their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import BanditDataset, SupervisedExample, supervised_matrix
from .policy import Ensemble, SoftmaxPolicy, argmax_rows

ESTIMATOR_NAMES = ("ips", "ips_clipped", "snips", "dm", "truth")


@dataclass
class RiskEstimate:
    """A single estimated value plus its estimator identity."""

    value: float
    estimator: str
    clip_cap: float | None = None

    def __post_init__(self):
        if self.estimator not in ESTIMATOR_NAMES:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if (self.clip_cap is not None) != (self.estimator == "ips_clipped"):
            raise ValueError("clip_cap is present iff estimator is ips_clipped")
        if self.clip_cap is not None and not self.clip_cap > 0:
            raise ValueError("clip_cap must be positive")


def _importance_weights(policy, data: BanditDataset) -> np.ndarray:
    probs = policy.action_probs_matrix(data.features)
    if probs.shape[1] != data.num_actions:
        raise ValueError("policy and dataset disagree on the number of actions")
    chosen = probs[np.arange(len(data)), data.actions]
    return chosen / data.propensities


def ips_risk(
    policy: SoftmaxPolicy, data: BanditDataset, clip_cap: float | None = None
) -> RiskEstimate:
    """Inverse-propensity-scored empirical risk of a policy on a log."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    w = _importance_weights(policy, data)
    if clip_cap is not None:
        if not clip_cap > 0:
            raise ValueError("clip_cap must be positive")
        w = np.minimum(w, clip_cap)
    value = float(np.mean(-data.rewards * w))
    if clip_cap is None:
        return RiskEstimate(value=value, estimator="ips")
    return RiskEstimate(value=value, estimator="ips_clipped", clip_cap=clip_cap)


def snips_reward(policy: SoftmaxPolicy, data: BanditDataset) -> RiskEstimate:
    """Self-normalized IPS estimate of the policy's reward."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    w = _importance_weights(policy, data)
    denom = float(w.sum())
    if denom <= 0.0:
        raise ValueError(
            "all importance weights are zero; the policy places no mass "
            "on any logged action"
        )
    return RiskEstimate(value=float(np.dot(data.rewards, w)) / denom, estimator="snips")


def dm_reward(
    reward_model: Ensemble, policy: SoftmaxPolicy, contexts: np.ndarray
) -> RiskEstimate:
    """Direct-method reward: the reward model scored under the target policy.

    In argmax mode the inner sum over actions collapses to the selected
    action's predicted reward.
    """
    contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
    if contexts.shape[1] != reward_model.feature_dim:
        raise ValueError("contexts do not match the reward model's feature_dim")
    g = reward_model.scores_matrix(contexts)
    probs = policy.action_probs_matrix(contexts)
    if probs.shape != g.shape:
        raise ValueError("policy and reward model disagree on the number of actions")
    return RiskEstimate(value=float(np.mean(np.sum(probs * g, axis=1))), estimator="dm")


def ground_truth_reward(
    policy: SoftmaxPolicy,
    examples: Sequence[SupervisedExample],
    reward_spec,
) -> float:
    """Mean full-information reward of an argmax policy on supervised data."""
    if not policy.is_argmax:
        raise ValueError("ground-truth evaluation requires an argmax-mode policy")
    if not examples:
        raise ValueError("no examples")
    X = supervised_matrix(examples)
    selected = argmax_rows(policy.ensemble.scores_matrix(X))
    return float(
        np.mean([
            reward_spec.reward(e.labels, int(a)) for e, a in zip(examples, selected)
        ])
    )


def expected_policy_reward(policy, examples: Sequence[SupervisedExample], reward_spec) -> float:
    """Expected reward of a (possibly stochastic) policy under its own sampling.

    Averages sum_a pi(a|x) * reward(labels, a) over the examples; used to
    score logging policies, whose deployed behavior is stochastic.
    """
    if not examples:
        raise ValueError("no examples")
    X = supervised_matrix(examples)
    probs = policy.action_probs_matrix(X)
    num_actions = probs.shape[1]
    reward_rows = np.array([
        [reward_spec.reward(e.labels, a) for a in range(num_actions)] for e in examples
    ])
    return float(np.mean(np.sum(probs * reward_rows, axis=1)))
