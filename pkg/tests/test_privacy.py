import numpy as np
import pytest

from conftest import tiny_graph
from fedgat.errors import IllPosedAttackError
from fedgat.gat import (
    AttentionHead,
    GatLayerParams,
    ModelParams,
    TrainConfig,
    init_params,
    model_forward,
    params_to_vector,
)
from fedgat.graphs import SyntheticSpec, generate_synthetic, make_splits
from fedgat.privacy import (
    AttackConfig,
    DpConfig,
    apply_dp,
    clip_params,
    confidences,
    default_candidates,
    laplace_noise,
    membership_attack,
    node_confidence,
    sensitivity,
    sweep_threshold,
    white_box_view,
)
from fedgat.seeding import rng_for


class TestSensitivity:
    def test_values(self):
        assert sensitivity(1.0) == 2.0
        assert sensitivity(0.5) == 1.0

    def test_empirical_clip_distance_bound(self):
        rng = np.random.default_rng(0)
        c = 0.8
        x = rng.normal(scale=5.0, size=100_000)
        y = rng.normal(scale=5.0, size=100_000)
        gap = np.abs(np.clip(x, -c, c) - np.clip(y, -c, c))
        assert gap.max() <= 2 * c + 1e-12

    def test_positive_bound_required(self):
        with pytest.raises(ValueError):
            sensitivity(0.0)


class TestLaplaceNoise:
    def test_moments_at_scale_two(self):
        b = 2.0
        n = 1_000_000
        draws = laplace_noise(n, b, rng_for(123, "laplace-test"))
        assert abs(draws.mean()) < 3.0 * (b / np.sqrt(n)) * np.sqrt(2.0)
        assert draws.var() == pytest.approx(2.0 * b * b, rel=0.05)

    def test_scale_doubles_when_epsilon_halves(self):
        n = 1_000_000
        lo = laplace_noise(n, DpConfig(epsilon=1.0).noise_scale, rng_for(5, "a"))
        hi = laplace_noise(n, DpConfig(epsilon=0.5).noise_scale, rng_for(5, "b"))
        assert hi.std() / lo.std() == pytest.approx(2.0, rel=0.05)

    def test_reproducible(self):
        a = laplace_noise(100, 1.0, rng_for(7, "x"))
        b = laplace_noise(100, 1.0, rng_for(7, "x"))
        assert np.array_equal(a, b)


@pytest.fixture(scope="module")
def model_and_graph():
    spec = SyntheticSpec(n_nodes=20, n_classes=3, feature_dim=5,
                         intra_class_edge_prob=0.4, inter_class_edge_prob=0.05,
                         seed=31)
    g = make_splits(generate_synthetic(spec)[0], (2, 2, 6), seed=1)
    cfg = TrainConfig(nhid=3, nhead=2, seed=0)
    return init_params(g.num_features, g.num_classes, cfg), g


class TestApplyDp:
    def test_huge_epsilon_is_pure_clipping(self, model_and_graph):
        params, _ = model_and_graph
        dp = DpConfig(epsilon=1e12, clip_bound=0.5, seed=0)
        noised = apply_dp(params, (1, 2, 3), dp)
        clipped = clip_params(params, (1, 2, 3), 0.5)
        dev = np.abs(params_to_vector(noised) - params_to_vector(clipped)).max()
        assert dev < 1e-6

    def test_reproducible_under_seed(self, model_and_graph):
        params, _ = model_and_graph
        dp = DpConfig(epsilon=1.0, clip_bound=1.0, seed=9)
        a = apply_dp(params, (1,), dp)
        b = apply_dp(params, (1,), dp)
        assert np.array_equal(params_to_vector(a), params_to_vector(b))

    def test_unshared_layers_untouched(self, model_and_graph):
        params, _ = model_and_graph
        dp = DpConfig(epsilon=0.5, clip_bound=1.0, seed=2)
        noised = apply_dp(params, (1,), dp)
        for v in (1, 2):
            for ha, hb in zip(noised.layers[v].heads, params.layers[v].heads):
                assert np.array_equal(ha.W, hb.W) and np.array_equal(ha.a, hb.a)
        assert not np.array_equal(noised.layers[0].heads[0].W,
                                  params.layers[0].heads[0].W)

    def test_clipping_is_projection(self, model_and_graph):
        params, _ = model_and_graph
        once = clip_params(params, (1, 2, 3), 0.1)
        twice = clip_params(once, (1, 2, 3), 0.1)
        assert np.array_equal(params_to_vector(once), params_to_vector(twice))

    def test_noise_variance_matches_scale(self, model_and_graph):
        params, _ = model_and_graph
        big = ModelParams(layers=(
            GatLayerParams(heads=(AttentionHead(W=np.zeros((1000, 100)),
                                                a=np.zeros(200)),), combine="concat"),
            GatLayerParams(heads=(AttentionHead(W=np.zeros((100, 100)),
                                                a=np.zeros(200)),), combine="concat"),
            GatLayerParams(heads=(AttentionHead(W=np.zeros((100, 2)),
                                                a=np.zeros(4)),), combine="single"),
        ))
        dp = DpConfig(epsilon=2.0, clip_bound=1.0, seed=3)   # b = 1
        noised = apply_dp(big, (1,), dp)
        samples = noised.layers[0].heads[0].W.ravel()
        assert samples.var() == pytest.approx(2.0, rel=0.05)


class TestConfidences:
    def test_one_hot_confidence(self):
        g = tiny_graph([], [0, 1], features=np.array([[40.0, 0.0], [0.0, 40.0]]))
        pass_through = np.vstack([np.eye(2), np.eye(2)]) * 0.5
        params = ModelParams(layers=(
            GatLayerParams(heads=(AttentionHead(W=np.eye(2), a=np.zeros(4)),
                                  AttentionHead(W=np.eye(2), a=np.zeros(4))),
                           combine="concat"),
            GatLayerParams(heads=(AttentionHead(W=pass_through, a=np.zeros(4)),
                                  AttentionHead(W=pass_through, a=np.zeros(4))),
                           combine="concat"),
            GatLayerParams(heads=(AttentionHead(W=pass_through * 3, a=np.zeros(4)),),
                           combine="single"),
        ))
        assert node_confidence(params, g, 0) == pytest.approx(1.0, abs=1e-12)

    def test_uniform_confidence(self, model_and_graph):
        params, g = model_and_graph
        flat = tiny_graph([], [0] * 4, features=np.zeros((4, 5)), num_classes=3)
        assert node_confidence(params, flat, 2) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_matches_forward_oracle(self, model_and_graph):
        params, g = model_and_graph
        probs = model_forward(params, g)
        for node in (0, 7, 19):
            assert node_confidence(params, g, node) == float(probs[node].max())
        np.testing.assert_array_equal(confidences(params, g, [0, 7, 19]),
                                      probs[[0, 7, 19]].max(axis=1))

    def test_missing_node(self, model_and_graph):
        params, g = model_and_graph
        with pytest.raises(ValueError, match="not present"):
            node_confidence(params, g, 99)


class TestSweepThreshold:
    def test_separable(self):
        conf = np.array([0.99, 0.99, 0.40, 0.40])
        members = np.array([True, True, False, False])
        acc, t = sweep_threshold(conf, members)
        assert acc == 1.0
        assert 0.40 < t <= 0.99

    def test_identical_confidences_balanced(self):
        conf = np.full(6, 0.7)
        members = np.array([True] * 3 + [False] * 3)
        acc, _ = sweep_threshold(conf, members)
        assert acc == 0.5

    def test_identical_confidences_imbalanced(self):
        conf = np.full(5, 0.7)
        members = np.array([True, True, True, True, False])
        acc, _ = sweep_threshold(conf, members)
        assert acc == 0.8   # predict everyone a member

    def test_exhaustive_optimality(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            conf = np.round(rng.random(12), 2)
            members = rng.random(12) < 0.5
            if members.all() or not members.any():
                continue
            best, _ = sweep_threshold(conf, members)
            grid = np.concatenate([[-1.0], np.sort(np.unique(conf)),
                                   (np.sort(np.unique(conf))[:-1]
                                    + np.diff(np.sort(np.unique(conf))) / 2),
                                   [2.0]])
            brute = max(float(np.mean((conf >= t) == members)) for t in grid)
            assert best == pytest.approx(brute, abs=1e-12)


class TestMembershipAttack:
    def test_advantage_identity(self, model_and_graph):
        params, g = model_and_graph
        members, nonmembers = default_candidates(g, rng_for(0, "cand"))
        cfg = AttackConfig(mode="black-box", member_ids=tuple(members),
                           nonmember_ids=tuple(nonmembers))
        report = membership_attack(cfg, params, g)
        assert report.i_adv == (report.i_acc - 0.5) * 2.0
        assert -1.0 <= report.i_adv <= 1.0

    def test_arithmetic_example(self):
        # i_acc = 0.75 -> i_adv = 0.5 via a 4-candidate set with 3 separable
        conf = np.array([0.9, 0.9, 0.2, 0.9])
        members = np.array([True, True, False, False])
        acc, _ = sweep_threshold(conf, members)
        assert acc == 0.75
        assert (acc - 0.5) * 2.0 == 0.5

    def test_ill_posed_candidate_sets(self, model_and_graph):
        params, g = model_and_graph
        with pytest.raises(IllPosedAttackError):
            membership_attack(AttackConfig(mode="black-box", member_ids=(0, 1),
                                           nonmember_ids=()), params, g)

    def test_default_candidates_balanced(self, model_and_graph):
        _, g = model_and_graph
        members, nonmembers = default_candidates(g, rng_for(1, "cand"))
        assert len(members) == len(nonmembers) > 0
        assert g.train_mask[members].all()
        assert g.test_mask[nonmembers].all()


class TestWhiteBoxView:
    def test_layer_substitution(self):
        cfg = TrainConfig(nhid=3, nhead=2)
        target = init_params(5, 3, cfg, rng=np.random.default_rng(0))
        attacker = init_params(5, 3, cfg, rng=np.random.default_rng(1))
        hybrid = white_box_view(target, attacker, shared_layers=(1, 3))
        assert np.array_equal(hybrid.layers[0].heads[0].W,
                              target.layers[0].heads[0].W)
        assert np.array_equal(hybrid.layers[1].heads[0].W,
                              attacker.layers[1].heads[0].W)
        assert np.array_equal(hybrid.layers[2].heads[0].W,
                              target.layers[2].heads[0].W)
