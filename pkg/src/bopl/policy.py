"""Softmax ensemble policies: scores, probabilities, losses and gradients.

An ensemble scores every action as a weighted sum of tree outputs,

    f(x, a) = sum_t alpha_t * h_t(x, a),

and induces the softmax policy

    pi(a | x) = exp(beta * f(x, a)) / sum_a' exp(beta * f(x, a')).

beta = inf denotes deterministic argmax evaluation (ties break to the
lowest action index).  Training always works at beta = 1; any finite
temperature folds into the ensemble weights.

The per-example objective pieces, for a logged (x, a, p, r):

    loss            -(r/p) * pi(a|x)
    gradient        -(r/p) * pi(a|x) * (e_a - pi(x))
    surrogate loss  -(r/p) * (ln pi(a|x) + 1)
    its gradient    -(r/p) * (e_a - pi(x))

Gradients are taken with respect to the score vector f(x).  All
operations are pure; values are safe to share across threads.

Scores and distributions are plain float64 vectors of length
num_actions; distributions are nonnegative and sum to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import LoggedExample
from .trees import Predictor, augment_contexts


@dataclass(eq=False)
class Ensemble:
    """Weighted sum of tree predictors; an empty ensemble scores all zeros."""

    members: list[tuple[float, Predictor]]
    num_actions: int
    feature_dim: int

    def __post_init__(self):
        if self.num_actions < 1 or self.feature_dim < 1:
            raise ValueError("num_actions and feature_dim must be positive")
        for alpha, _pred in self.members:
            if not math.isfinite(alpha):
                raise ValueError("ensemble weights must be finite")

    def __len__(self) -> int:
        return len(self.members)

    def score(self, features: np.ndarray) -> np.ndarray:
        """Score vector f(x, .) for a single context."""
        return self.scores_matrix(np.atleast_2d(np.asarray(features, dtype=np.float64)))[0]

    def scores_matrix(self, contexts: np.ndarray) -> np.ndarray:
        """(n, num_actions) score matrix over a batch of contexts."""
        contexts = np.asarray(contexts, dtype=np.float64)
        if contexts.ndim != 2 or contexts.shape[1] != self.feature_dim:
            raise ValueError(
                f"expected contexts of width {self.feature_dim}, got shape {contexts.shape}"
            )
        total = np.zeros((contexts.shape[0], self.num_actions))
        if not self.members:
            return total
        rows = augment_contexts(contexts, self.num_actions)
        for alpha, pred in self.members:
            total += alpha * pred.predict_rows(rows).reshape(total.shape)
        return total

    def prefix(self, t: int) -> "Ensemble":
        """The ensemble after the first t rounds."""
        return Ensemble(
            members=list(self.members[:t]),
            num_actions=self.num_actions,
            feature_dim=self.feature_dim,
        )


def ensemble_score(ensemble: Ensemble, features: np.ndarray) -> np.ndarray:
    """f(x, .) by direct summation over members (Ensemble.score)."""
    return ensemble.score(features)


def softmax(scores: np.ndarray, beta: float = 1.0) -> np.ndarray:
    """Softmax distribution over scores, computed with max-subtraction."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    if not (math.isfinite(beta) and beta >= 0):
        raise ValueError("beta must be finite and >= 0 (argmax handled separately)")
    z = beta * scores
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def softmax_matrix(scores: np.ndarray, beta: float = 1.0) -> np.ndarray:
    """Row-wise softmax of an (n, num_actions) score matrix."""
    z = beta * np.asarray(scores, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax_matrix(scores: np.ndarray, beta: float = 1.0) -> np.ndarray:
    z = beta * np.asarray(scores, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def argmax_rows(scores: np.ndarray) -> np.ndarray:
    """Row argmax with ties broken toward the lowest action index."""
    return np.argmax(np.asarray(scores), axis=1)


@dataclass(eq=False)
class SoftmaxPolicy:
    """An ensemble plus an inverse temperature; beta = inf means argmax."""

    ensemble: Ensemble
    beta: float = 1.0

    def __post_init__(self):
        if not (self.beta >= 0):
            raise ValueError("beta must be >= 0 or inf")

    @property
    def is_argmax(self) -> bool:
        return math.isinf(self.beta)

    @property
    def num_actions(self) -> int:
        return self.ensemble.num_actions

    @property
    def feature_dim(self) -> int:
        return self.ensemble.feature_dim

    def action_probs(self, features: np.ndarray) -> np.ndarray:
        return self.action_probs_matrix(
            np.atleast_2d(np.asarray(features, dtype=np.float64))
        )[0]

    def action_probs_matrix(self, contexts: np.ndarray) -> np.ndarray:
        scores = self.ensemble.scores_matrix(contexts)
        if self.is_argmax:
            probs = np.zeros_like(scores)
            probs[np.arange(scores.shape[0]), argmax_rows(scores)] = 1.0
            return probs
        return softmax_matrix(scores, self.beta)


def action_select(
    policy: SoftmaxPolicy,
    features: np.ndarray,
    rng: np.random.Generator | None = None,
) -> int:
    """Select an action: sample from the softmax, or argmax when beta = inf."""
    scores = policy.ensemble.score(features)
    if policy.is_argmax:
        return int(np.argmax(scores))
    if rng is None:
        raise ValueError("stochastic action selection requires an rng")
    probs = softmax(scores, policy.beta)
    return sample_index(probs, rng)


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF sample from a probability vector; bit-stable given the rng."""
    u = rng.random()
    c = 0.0
    for i, p in enumerate(probs):
        c += p
        if u < c:
            return i
    return len(probs) - 1  # cumulative rounding fell short of 1


def _check_propensity(p: float) -> None:
    if not p > 0.0:
        raise ValueError(f"propensity must be positive, got {p}")


def one_hot(action: int, num_actions: int) -> np.ndarray:
    e = np.zeros(num_actions)
    e[action] = 1.0
    return e


def loss(example: LoggedExample, ensemble: Ensemble) -> float:
    """-(r/p) * pi(a|x) under the beta=1 training policy."""
    _check_propensity(example.propensity)
    probs = softmax(ensemble.score(example.features), 1.0)
    return -(example.reward / example.propensity) * float(probs[example.action])


def loss_gradient(example: LoggedExample, ensemble: Ensemble) -> np.ndarray:
    """Gradient of the loss with respect to the score vector; sums to 0."""
    _check_propensity(example.propensity)
    probs = softmax(ensemble.score(example.features), 1.0)
    e = one_hot(example.action, ensemble.num_actions)
    return (
        -(example.reward / example.propensity)
        * float(probs[example.action])
        * (e - probs)
    )


def surrogate_loss(example: LoggedExample, ensemble: Ensemble) -> float:
    """-(r/p) * (ln pi(a|x) + 1); equals the loss exactly when pi(a|x) = 1."""
    _check_propensity(example.propensity)
    scores = ensemble.score(example.features)
    logp = log_softmax_matrix(scores[None, :], 1.0)[0, example.action]
    return -(example.reward / example.propensity) * (float(logp) + 1.0)


def surrogate_loss_gradient(example: LoggedExample, ensemble: Ensemble) -> np.ndarray:
    """Gradient of the surrogate loss with respect to the scores; sums to 0."""
    _check_propensity(example.propensity)
    probs = softmax(ensemble.score(example.features), 1.0)
    e = one_hot(example.action, ensemble.num_actions)
    return -(example.reward / example.propensity) * (e - probs)
