"""Supervised-to-bandit conversion.

A logging policy (regularized multinomial logistic regression trained on
a small held-out slice) samples one action per remaining example; the
sampled action, its exact mixed probability and the task reward are
recorded as one logged interaction.  Mixing with epsilon-uniform
exploration keeps every propensity at least epsilon / num_actions.

Task rewards: multilabel tasks pay 1 when the action is one of the true
labels; multiclass tasks pay 1 on the true label and a partial credit
(default 1/4) when the action falls in the label's near-miss group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import BanditDataset, SupervisedExample, supervised_matrix
from .policy import softmax_matrix

MULTICLASS = "multiclass"
MULTILABEL = "multilabel"

# Near-miss class groups for the two multiclass benchmark tasks.
# Fashion-MNIST: outerwear {coat, pullover}, shirts {T-shirt/top, shirt},
# footwear {sandal, sneaker, ankle boot}.
FASHION_MNIST_GROUPS = ((2, 4), (0, 6), (5, 7, 9))
# Covertype: firs {spruce/fir, Douglas-fir}, pines {lodgepole, ponderosa},
# populus {cottonwood/willow, aspen}; krummholz stays a singleton.
COVERTYPE_GROUPS = ((0, 5), (1, 2), (3, 4))

# splitmix64 mixing constants; fixed so derived trial seeds are portable.
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_SPLITMIX_M1 = 0xBF58476D1CE4E5B9
_SPLITMIX_M2 = 0x94D049BB133111EB
_MASK64 = (1 << 64) - 1


def derive_seed(master_seed: int, index: int) -> int:
    """Per-trial seed via splitmix64, so trials are independent and portable."""
    z = (master_seed + (index + 1) * _SPLITMIX_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * _SPLITMIX_M1) & _MASK64
    z = ((z ^ (z >> 27)) * _SPLITMIX_M2) & _MASK64
    return z ^ (z >> 31)


@dataclass
class RewardSpec:
    """Task reward structure; groups are disjoint near-miss classes."""

    task: str
    groups: tuple[tuple[int, ...], ...] | None = None
    partial_credit: float = 0.25

    def __post_init__(self):
        if self.task not in (MULTICLASS, MULTILABEL):
            raise ValueError(f"task must be multiclass or multilabel, got {self.task!r}")
        if not (0.0 <= self.partial_credit <= 1.0):
            raise ValueError("partial_credit must be in [0, 1]")
        self._group_of: dict[int, int] = {}
        if self.groups is not None:
            self.groups = tuple(tuple(int(c) for c in g) for g in self.groups)
            for gi, group in enumerate(self.groups):
                for c in group:
                    if c in self._group_of:
                        raise ValueError("partial-credit groups must be disjoint")
                    self._group_of[c] = gi

    def reward(self, labels: Sequence[int], action: int) -> float:
        """Full reward on a match, partial credit on a near miss, else zero."""
        if self.task == MULTILABEL:
            return 1.0 if action in labels else 0.0
        (label,) = labels
        if action == label:
            return 1.0
        ga = self._group_of.get(action)
        if ga is not None and ga == self._group_of.get(label):
            return self.partial_credit
        return 0.0


@dataclass(eq=False)
class LoggingPolicy:
    """Multinomial logistic behavior policy with epsilon-uniform mixing."""

    weights: np.ndarray  # (num_actions, feature_dim + 1), bias last
    epsilon: float = 0.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be a matrix")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")
        if not (0.0 <= self.epsilon < 1.0):
            raise ValueError("epsilon must be in [0, 1)")

    @property
    def num_actions(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1] - 1

    def action_probs_matrix(self, contexts: np.ndarray) -> np.ndarray:
        contexts = np.asarray(contexts, dtype=np.float64)
        if contexts.shape[1] != self.feature_dim:
            raise ValueError("context width does not match the logging policy")
        logits = contexts @ self.weights[:, :-1].T + self.weights[:, -1]
        probs = softmax_matrix(logits)
        if self.epsilon > 0.0:
            probs = (1.0 - self.epsilon) * probs + self.epsilon / self.num_actions
        return probs

    def action_probs(self, features: np.ndarray) -> np.ndarray:
        return self.action_probs_matrix(np.atleast_2d(np.asarray(features)))[0]


def _logistic_loss_grad(W, X1, targets, l2):
    m = X1.shape[0]
    logits = X1 @ W.T
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -float(np.mean(log_probs[np.arange(m), targets]))
    loss += 0.5 * l2 * float(np.sum(W**2))
    probs = np.exp(log_probs)
    Y = np.zeros_like(probs)
    Y[np.arange(m), targets] = 1.0
    grad = (probs - Y).T @ X1 / m + l2 * W
    return loss, grad


def train_logging_policy(
    subset: Sequence[SupervisedExample],
    l2_strength: float,
    max_epochs: int = 500,
    seed: int = 0,
    num_actions: int | None = None,
) -> LoggingPolicy:
    """Fit the behavior model by full-batch gradient descent from zeros.

    The step size is 1 over the loss's curvature bound, so the loss
    decreases monotonically; training stops once the relative improvement
    drops below 1e-6 or max_epochs is reached.  Multilabel examples
    contribute one positive label sampled uniformly with the given seed.
    The bias column is not regularized.  epsilon is left at 0; set it on
    the returned policy before converting.
    """
    if not subset:
        raise ValueError("cannot train a logging policy on an empty subset")
    if not l2_strength > 0:
        raise ValueError("l2_strength must be positive")
    X = supervised_matrix(subset)
    m, d = X.shape
    if num_actions is None:
        num_actions = 1 + max(max(e.labels) for e in subset)
    rng = np.random.default_rng(seed)
    targets = np.array([
        e.labels[0] if len(e.labels) == 1 else int(rng.choice(e.labels))
        for e in subset
    ])
    if np.any(targets >= num_actions):
        raise ValueError("label index out of range")

    X1 = np.concatenate([X, np.ones((m, 1))], axis=1)
    # curvature of the multinomial log-loss is at most sigma_max(X1)^2 / (2m)
    lipschitz = 0.5 * float(np.linalg.norm(X1, 2)) ** 2 / m + l2_strength
    step = 1.0 / lipschitz
    W = np.zeros((num_actions, d + 1))
    prev_loss = math.inf
    for _epoch in range(max_epochs):
        loss, grad = _logistic_loss_grad(W, X1, targets, l2_strength)
        if prev_loss - loss < 1e-6 * abs(prev_loss) and math.isfinite(prev_loss):
            break
        W = W - step * grad
        prev_loss = loss
    return LoggingPolicy(weights=W, epsilon=0.0)


def sample_actions(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Row-wise inverse-CDF sampling; matches policy.sample_index bit for bit."""
    cum = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0])
    idx = np.sum(cum <= u[:, None], axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def convert(
    examples: Sequence[SupervisedExample],
    logging: LoggingPolicy,
    spec: RewardSpec,
    seed: int,
) -> BanditDataset:
    """Sample one logged interaction per example under the logging policy.

    Records the exact mixed probability of the sampled action as its
    propensity, so downstream importance weights are exact.
    """
    if not examples:
        raise ValueError("no examples to convert")
    X = supervised_matrix(examples)
    probs = logging.action_probs_matrix(X)
    rng = np.random.default_rng(seed)
    actions = sample_actions(probs, rng)
    propensities = probs[np.arange(len(examples)), actions]
    assert np.all(propensities > 0.0), "sampled a zero-propensity action"
    rewards = np.array([
        spec.reward(e.labels, int(a)) for e, a in zip(examples, actions)
    ])
    return BanditDataset(
        features=X,
        actions=actions,
        propensities=propensities,
        rewards=rewards,
        num_actions=logging.num_actions,
    )


def split_dataset(
    examples: Sequence[SupervisedExample],
    fractions: Sequence[float],
    seed: int,
) -> list[list[SupervisedExample]]:
    """Seeded shuffle followed by contiguous slicing into len(fractions) parts."""
    fractions = list(fractions)
    if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must be nonnegative and sum to 1")
    n = len(examples)
    order = np.random.default_rng(seed).permutation(n)
    bounds = [int(round(n * c)) for c in np.cumsum(fractions)]
    bounds[-1] = n
    parts: list[list[SupervisedExample]] = []
    start = 0
    for b in bounds:
        parts.append([examples[i] for i in order[start:b]])
        start = b
    return parts
