import math

import numpy as np
import pytest

from bopl.dataset import BanditDataset, SupervisedExample
from bopl.estimators import (
    RiskEstimate,
    dm_reward,
    expected_policy_reward,
    ground_truth_reward,
    ips_risk,
    snips_reward,
)
from bopl.policy import Ensemble, SoftmaxPolicy, softmax_matrix
from bopl.simulation import RewardSpec

from conftest import (
    TableEnvironment,
    constant_predictor,
    random_bandit_dataset,
    random_ensemble,
    stump,
    table_ensemble,
)


def uniform_policy(num_actions=2, feature_dim=1):
    return SoftmaxPolicy(
        Ensemble(members=[], num_actions=num_actions, feature_dim=feature_dim),
        beta=1.0,
    )


def single_example_data(action=0, propensity=0.5, reward=1.0, num_actions=2):
    return BanditDataset(
        features=np.array([[0.0]]),
        actions=np.array([action]),
        propensities=np.array([propensity]),
        rewards=np.array([reward]),
        num_actions=num_actions,
    )


def test_riskestimate_invariants():
    with pytest.raises(ValueError):
        RiskEstimate(value=0.0, estimator="ips", clip_cap=2.0)
    with pytest.raises(ValueError):
        RiskEstimate(value=0.0, estimator="ips_clipped")
    with pytest.raises(ValueError):
        RiskEstimate(value=0.0, estimator="bogus")


def test_ips_uniform_policy_single_example():
    est = ips_risk(uniform_policy(), single_example_data())
    assert est.value == pytest.approx(-1.0, abs=0)
    assert est.estimator == "ips"


def test_ips_deterministic_policy_and_clipping():
    # argmax policy picking the logged action: w = 1/0.5 = 2
    s = stump(1, 0.5, 0.0, 1.0)  # a=0 has e0=1 -> right leaf 1
    ens = Ensemble(members=[(1.0, s)], num_actions=2, feature_dim=1)
    pol = SoftmaxPolicy(ens, beta=math.inf)
    data = single_example_data()
    assert ips_risk(pol, data).value == pytest.approx(-2.0)
    clipped = ips_risk(pol, data, clip_cap=1.5)
    assert clipped.value == pytest.approx(-1.5)
    assert clipped.estimator == "ips_clipped" and clipped.clip_cap == 1.5


def test_ips_matches_bruteforce_loop(rng):
    data = random_bandit_dataset(rng, n=3, num_actions=3, feature_dim=2)
    ens = random_ensemble(rng, num_actions=3, feature_dim=2)
    pol = SoftmaxPolicy(ens, beta=1.0)
    total = 0.0
    for ex in data:
        probs = softmax_matrix(ens.scores_matrix(ex.features[None, :]))[0]
        total += -ex.reward * probs[ex.action] / ex.propensity
    assert ips_risk(pol, data).value == pytest.approx(total / 3.0, rel=1e-14)


def test_clipping_monotone_for_nonnegative_rewards(rng):
    data = random_bandit_dataset(rng, n=12, num_actions=3, feature_dim=2,
                                 reward_low=0.0, reward_high=1.0)
    pol = SoftmaxPolicy(random_ensemble(rng, 3, 2), beta=1.0)
    base_reward = -ips_risk(pol, data).value
    prev = -math.inf
    for cap in (0.25, 0.5, 1.0, 2.0, 50.0):
        clipped_reward = -ips_risk(pol, data, clip_cap=cap).value
        assert clipped_reward <= base_reward + 1e-15
        assert clipped_reward >= prev - 1e-12
        prev = clipped_reward
    # a cap at least the max weight reproduces the unclipped value exactly
    probs = pol.action_probs_matrix(data.features)
    wmax = np.max(probs[np.arange(len(data)), data.actions] / data.propensities)
    assert ips_risk(pol, data, clip_cap=float(wmax)).value == ips_risk(pol, data).value


def test_snips_mean_reward_when_weights_are_one():
    # policy identical to logging propensities: uniform policy, p = 1/2
    data = BanditDataset(
        features=np.zeros((4, 1)),
        actions=np.array([0, 1, 0, 1]),
        propensities=np.full(4, 0.5),
        rewards=np.array([1.0, 0.0, 0.5, 0.25]),
        num_actions=2,
    )
    est = snips_reward(uniform_policy(), data)
    assert est.value == pytest.approx(np.mean(data.rewards), rel=1e-15)


def test_snips_translation_equivariance(rng):
    data = random_bandit_dataset(rng, n=20, num_actions=3, feature_dim=2)
    pol = SoftmaxPolicy(random_ensemble(rng, 3, 2), beta=1.0)
    base = snips_reward(pol, data).value
    for c in (0.3, -1.7, 42.0):
        shifted = data.replace_rewards(data.rewards - c)
        assert snips_reward(pol, shifted).value == pytest.approx(base - c, abs=1e-12)


def test_snips_matches_direct_ratio(rng):
    data = random_bandit_dataset(rng, n=7, num_actions=2, feature_dim=1)
    pol = SoftmaxPolicy(random_ensemble(rng, 2, 1), beta=1.0)
    num = den = 0.0
    for ex in data:
        w = pol.action_probs(ex.features)[ex.action] / ex.propensity
        num += ex.reward * w
        den += w
    assert snips_reward(pol, data).value == pytest.approx(num / den, rel=1e-13)


def test_snips_zero_weights_is_error():
    # argmax policy that never matches the logged action
    s = stump(1, 0.5, 0.0, 1.0)  # argmax always 0
    pol = SoftmaxPolicy(Ensemble([(1.0, s)], 2, 1), beta=math.inf)
    data = single_example_data(action=1)
    with pytest.raises(ValueError, match="zero"):
        snips_reward(pol, data)


def test_dm_constant_reward_model(rng):
    model = Ensemble([(1.0, constant_predictor(0.7))], num_actions=3, feature_dim=2)
    pol = SoftmaxPolicy(random_ensemble(rng, 3, 2), beta=1.0)
    contexts = rng.uniform(0, 1, (5, 2))
    assert dm_reward(model, pol, contexts).value == pytest.approx(0.7, rel=1e-14)


def test_dm_uniform_policy_half():
    model = Ensemble(
        [(1.0, stump(1, 0.5, 1.0, 0.0))], num_actions=2, feature_dim=1
    )  # g(x, .) = (0, 1)
    pol = uniform_policy()
    assert dm_reward(model, pol, np.zeros((3, 1))).value == pytest.approx(0.5)


def test_dm_argmax_single_stump_hand_value():
    table = np.array([[0.1, 0.9, 0.4], [0.8, 0.2, 0.3]])
    model = table_ensemble(table)
    pol = SoftmaxPolicy(table_ensemble(table), beta=math.inf)
    contexts = np.array([[0.0], [1.0]])
    # argmax picks a=1 at x=0 (0.9) and a=0 at x=1 (0.8)
    assert dm_reward(model, pol, contexts).value == pytest.approx((0.9 + 0.8) / 2)


def test_dm_exhaustive_sum_equals_true_risk(rng):
    # the DM of the true mean-reward function equals the negated true risk
    table = np.array([[0.2, 0.7, 0.1], [0.9, 0.05, 0.4]])
    env = TableEnvironment(table, np.full((2, 3), 1 / 3))
    model = table_ensemble(table)
    target = SoftmaxPolicy(random_ensemble(rng, 3, 1), beta=1.0)
    pi_table = target.action_probs_matrix(np.array([[0.0], [1.0]]))
    dm = dm_reward(model, target, np.array([[0.0], [1.0]]))
    assert dm.value == pytest.approx(-env.true_risk(pi_table), rel=1e-13)


def test_ips_unbiased_on_synthetic_environment(rng):
    table = np.array([[0.2, 0.7, 0.1], [0.9, 0.05, 0.4]])
    logging = np.array([[0.5, 0.3, 0.2], [0.2, 0.2, 0.6]])
    env = TableEnvironment(table, logging)
    target = SoftmaxPolicy(table_ensemble(table), beta=1.0)
    pi_table = target.action_probs_matrix(np.array([[0.0], [1.0]]))
    estimates = env.simulate_ips_estimates(pi_table, num_logs=2000, log_size=100, seed=5)
    se = estimates.std(ddof=1) / math.sqrt(len(estimates))
    assert abs(estimates.mean() - env.true_risk(pi_table)) <= 3 * se


# ---------------------------------------------------------------------------
# ground truth


def multilabel_spec():
    return RewardSpec(task="multilabel")


def test_ground_truth_all_correct():
    # ensemble scoring action 1 highest everywhere; labels contain 1
    s = stump(2, 0.5, 0.0, 5.0)  # e1 bit
    pol = SoftmaxPolicy(Ensemble([(1.0, s)], 3, 1), beta=math.inf)
    examples = [SupervisedExample(np.array([float(i)]), (1,)) for i in range(4)]
    assert ground_truth_reward(pol, examples, multilabel_spec()) == 1.0


def test_ground_truth_all_wrong():
    s = stump(2, 0.5, 0.0, 5.0)
    pol = SoftmaxPolicy(Ensemble([(1.0, s)], 3, 1), beta=math.inf)
    examples = [SupervisedExample(np.array([0.0]), (0, 2)) for _ in range(3)]
    assert ground_truth_reward(pol, examples, multilabel_spec()) == 0.0


def test_ground_truth_mixed_mean():
    s = stump(2, 0.5, 0.0, 5.0)  # always picks action 1
    pol = SoftmaxPolicy(Ensemble([(1.0, s)], 3, 1), beta=math.inf)
    examples = [
        SupervisedExample(np.array([0.0]), (1,)),
        SupervisedExample(np.array([0.0]), (0,)),
        SupervisedExample(np.array([0.0]), (1, 2)),
        SupervisedExample(np.array([0.0]), (2,)),
    ]
    # direct loop oracle
    expected = np.mean([1.0, 0.0, 1.0, 0.0])
    assert ground_truth_reward(pol, examples, multilabel_spec()) == pytest.approx(expected)


def test_ground_truth_requires_argmax():
    pol = uniform_policy()
    with pytest.raises(ValueError, match="argmax"):
        ground_truth_reward(pol, [SupervisedExample(np.array([0.0]), (0,))], multilabel_spec())


def test_expected_policy_reward_uniform():
    pol = SoftmaxPolicy(Ensemble([], 2, 1), beta=1.0)
    examples = [SupervisedExample(np.array([0.0]), (0,))]
    assert expected_policy_reward(pol, examples, multilabel_spec()) == pytest.approx(0.5)
