import numpy as np
import pytest

from bopl.dataset import BanditDataset
from bopl.policy import Ensemble, SoftmaxPolicy
from bopl.trees import Predictor, Tree, leaf_tree


def stump(feature, threshold, left_value, right_value, kind="regression_tree", scale=1.0):
    """Hand-built one-split tree: rows with x[feature] <= threshold go left."""
    tree = Tree(
        is_leaf=np.array([0, 1, 1], dtype=np.uint8),
        feature=np.array([feature, -1, -1], dtype=np.int64),
        threshold=np.array([threshold, np.nan, np.nan]),
        value=np.array([0.0, left_value, right_value]),
        left=np.array([1, -1, -1], dtype=np.int64),
        right=np.array([2, -1, -1], dtype=np.int64),
    )
    return Predictor(kind=kind, tree=tree, scale=scale)


def constant_predictor(value, kind="regression_tree", scale=1.0):
    return Predictor(kind=kind, tree=leaf_tree(value), scale=scale)


def random_bandit_dataset(rng, n=8, num_actions=3, feature_dim=2,
                          reward_low=-1.0, reward_high=1.0, zero_reward_frac=0.0):
    rewards = rng.uniform(reward_low, reward_high, n)
    if zero_reward_frac > 0:
        rewards[rng.random(n) < zero_reward_frac] = 0.0
    return BanditDataset(
        features=rng.uniform(0.0, 1.0, (n, feature_dim)),
        actions=rng.integers(0, num_actions, n),
        propensities=rng.uniform(0.05, 1.0, n),
        rewards=rewards,
        num_actions=num_actions,
    )


def random_ensemble(rng, num_actions, feature_dim, members=3, depth=2):
    """A small random ensemble built from hand-made stumps on random dims."""
    ms = []
    aug_dim = feature_dim + num_actions
    for _ in range(members):
        f = int(rng.integers(0, aug_dim))
        thr = float(rng.uniform(0.0, 1.0))
        ms.append((
            float(rng.normal()),
            stump(f, thr, float(rng.normal()), float(rng.normal())),
        ))
    return Ensemble(members=ms, num_actions=num_actions, feature_dim=feature_dim)


def finite_difference_gradient(fn, x, h=1e-4):
    """Central-difference gradient of a scalar function of a vector."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return g


def table_ensemble(reward_table):
    """An ensemble computing an exact (x, a) table for x in {0, 1}, |A| = 3.

    Contexts are single-feature 0/1; augmented rows are [x, e0, e1, e2].
    One depth-3 tree routes on the context bit then the one-hot bits, so
    ensemble_score([x]) equals reward_table[x] exactly.
    """
    t = np.asarray(reward_table, dtype=np.float64)
    assert t.shape == (2, 3)
    # nodes: 0: f0<=0.5; 1,2: f1<=0.5 per context; then f2<=0.5 or leaf a=0
    is_leaf = np.array([0, 0, 0, 0, 1, 0, 1, 1, 1, 1, 1], dtype=np.uint8)
    feature = np.array([0, 1, 1, 2, -1, 2, -1, -1, -1, -1, -1], dtype=np.int64)
    threshold = np.array([0.5, 0.5, 0.5, 0.5, np.nan, 0.5, np.nan, np.nan, np.nan, np.nan, np.nan])
    #                     0    1    2    3    4(x0,a0) 5  6(x1,a0) 7..10 leaves
    value = np.array([0, 0, 0, 0, t[0, 0], 0, t[1, 0], t[0, 2], t[0, 1], t[1, 2], t[1, 1]])
    left = np.array([1, 3, 5, 7, -1, 9, -1, -1, -1, -1, -1], dtype=np.int64)
    right = np.array([2, 4, 6, 8, -1, 10, -1, -1, -1, -1, -1], dtype=np.int64)
    tree = Tree(is_leaf=is_leaf, feature=feature, threshold=threshold,
                value=value, left=left, right=right)
    pred = Predictor(kind="regression_tree", tree=tree, scale=1.0)
    return Ensemble(members=[(1.0, pred)], num_actions=3, feature_dim=1)


class TableEnvironment:
    """Finite 2-context, 3-action environment with deterministic rewards."""

    def __init__(self, reward_table, logging_table):
        self.rewards = np.asarray(reward_table, dtype=np.float64)
        self.logging = np.asarray(logging_table, dtype=np.float64)
        assert self.rewards.shape == (2, 3) and self.logging.shape == (2, 3)
        assert np.all(self.logging > 0)
        assert np.allclose(self.logging.sum(axis=1), 1.0)

    def true_risk(self, policy_table):
        """Exhaustive expectation of -reward under the target policy."""
        return float(np.mean(np.sum(policy_table * -self.rewards, axis=1)))

    def simulate_ips_estimates(self, policy_table, num_logs, log_size, seed):
        """IPS risk estimates over many simulated logs, fully vectorized."""
        rng_ = np.random.default_rng(seed)
        xs = rng_.integers(0, 2, (num_logs, log_size))
        cum = np.cumsum(self.logging, axis=1)[xs]  # (logs, n, 3)
        u = rng_.random((num_logs, log_size))
        acts = np.minimum(np.sum(cum <= u[..., None], axis=2), 2)
        props = self.logging[xs, acts]
        rews = self.rewards[xs, acts]
        target = policy_table[xs, acts]
        return np.mean(-rews * target / props, axis=1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
