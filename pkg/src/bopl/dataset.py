"""Logged bandit interactions and supervised examples.

A bandit log is the tuple stream (x_i, a_i, p_i, r_i): context features,
the logged action, the propensity the logging policy assigned to it at
logging time, and the observed reward.  Rewards may be negative after
translation.  Propensities must lie in (0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .trees import augment_contexts


@dataclass(eq=False)
class LoggedExample:
    """One logged interaction."""

    features: np.ndarray
    action: int
    propensity: float
    reward: float

    def validate(self, num_actions: int | None = None) -> None:
        if not (0.0 < self.propensity <= 1.0):
            raise ValueError(f"propensity must be in (0, 1], got {self.propensity}")
        if self.action < 0 or (num_actions is not None and self.action >= num_actions):
            raise ValueError(f"action index {self.action} out of range")
        if not np.all(np.isfinite(self.features)) or not np.isfinite(self.reward):
            raise ValueError("features and reward must be finite")


@dataclass(eq=False)
class BanditDataset:
    """A column-oriented collection of logged interactions."""

    features: np.ndarray  # (n, feature_dim)
    actions: np.ndarray  # (n,) int
    propensities: np.ndarray  # (n,) in (0, 1]
    rewards: np.ndarray  # (n,)
    num_actions: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.actions = np.asarray(self.actions, dtype=np.int64)
        self.propensities = np.asarray(self.propensities, dtype=np.float64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        self._augmented: np.ndarray | None = None
        self.validate()

    def validate(self) -> None:
        n = self.features.shape[0]
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        for name, col in (
            ("actions", self.actions),
            ("propensities", self.propensities),
            ("rewards", self.rewards),
        ):
            if col.shape != (n,):
                raise ValueError(f"{name} must have one entry per example")
        if self.num_actions < 1:
            raise ValueError("num_actions must be >= 1")
        if np.any(self.actions < 0) or np.any(self.actions >= self.num_actions):
            raise ValueError("action index out of range")
        if np.any(self.propensities <= 0.0) or np.any(self.propensities > 1.0):
            raise ValueError("propensities must be in (0, 1]")
        if not np.all(np.isfinite(self.features)) or not np.all(np.isfinite(self.rewards)):
            raise ValueError("features and rewards must be finite")

    @classmethod
    def from_examples(cls, examples: Sequence[LoggedExample], num_actions: int) -> "BanditDataset":
        if not examples:
            raise ValueError("cannot build a dataset from zero examples")
        return cls(
            features=np.stack([np.asarray(e.features, dtype=np.float64) for e in examples]),
            actions=np.array([e.action for e in examples]),
            propensities=np.array([e.propensity for e in examples]),
            rewards=np.array([e.reward for e in examples]),
            num_actions=num_actions,
        )

    def __len__(self) -> int:
        return self.features.shape[0]

    def __iter__(self) -> Iterator[LoggedExample]:
        for i in range(len(self)):
            yield self.example(i)

    def example(self, i: int) -> LoggedExample:
        return LoggedExample(
            features=self.features[i],
            action=int(self.actions[i]),
            propensity=float(self.propensities[i]),
            reward=float(self.rewards[i]),
        )

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def augmented_rows(self) -> np.ndarray:
        """The (n * num_actions, feature_dim + num_actions) base-learner design
        matrix of [x_i; e_a] rows, cached after the first call."""
        if self._augmented is None:
            self._augmented = augment_contexts(self.features, self.num_actions)
        return self._augmented

    def replace_rewards(self, rewards: np.ndarray) -> "BanditDataset":
        return BanditDataset(
            features=self.features,
            actions=self.actions,
            propensities=self.propensities,
            rewards=np.asarray(rewards, dtype=np.float64),
            num_actions=self.num_actions,
        )


@dataclass(eq=False)
class SupervisedExample:
    """A full-information example; labels is a singleton for multiclass."""

    features: np.ndarray
    labels: tuple[int, ...]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = tuple(sorted(int(c) for c in self.labels))
        if not self.labels:
            raise ValueError("an example needs at least one label")


def supervised_matrix(examples: Sequence[SupervisedExample]) -> np.ndarray:
    if not examples:
        raise ValueError("no examples")
    return np.stack([e.features for e in examples])
