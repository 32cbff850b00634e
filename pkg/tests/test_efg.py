import numpy as np
import pytest

from regretkit import efg
from regretkit.core import AggregateState, _normalize_nonneg, prm_plus_step
from regretkit.fixedpoint import initial_lifted_point, exrm_round
from regretkit.games import NormalFormGame
from regretkit.core import regret_loss

from .oracles import count_paths, counterfactual_values_by_paths


def constant_tree(value: float = 0.7, players: int = 2) -> efg.GameTree:
    b = efg.TreeBuilder(players)
    leaves = [b.leaf([value] * players) for _ in range(2)]
    inner = b.decision(1, "P2:only", leaves)
    other = b.decision(1, "P2:only", [b.leaf([value] * players),
                                      b.leaf([value] * players)])
    root = b.decision(0, "P1:only", [inner, other])
    return b.build(root)


def single_decision_tree() -> efg.GameTree:
    b = efg.TreeBuilder(1)
    root = b.decision(0, "P1:pick", [b.leaf([0.3]), b.leaf([0.9])])
    return b.build(root)


# payoffs inside [0, 1] keep the payoff map at identity
U1 = np.array([[1.0, 0.0, 0.25], [0.3, 0.8, 0.5], [0.0, 1.0, 0.6]])
U2 = np.array([[0.2, 0.9, 0.0], [1.0, 0.1, 0.7], [0.5, 0.4, 1.0]])


class TestTreeBuilder:
    def test_kuhn_structure(self):
        tree = efg.build_kuhn(2, 3)
        assert len(tree.nodes) == 55
        assert len(tree.infosets) == 12
        assert [len(tree.infosets_of(i)) for i in range(2)] == [6, 6]
        root = tree.nodes[0]
        assert isinstance(root, efg.ChanceNode)
        assert len(root.children) == 6  # ordered deals of 3 ranks
        assert tree.behavioral_dim == 24

    def test_kuhn_needs_three_ranks(self):
        with pytest.raises(ValueError):
            efg.build_kuhn(2, 2)
        with pytest.raises(ValueError):
            efg.build_kuhn(3, 3)

    def test_liars_dice_root(self):
        tree = efg.build_liars_dice(2, 2)
        root = tree.nodes[0]
        assert isinstance(root, efg.ChanceNode)
        assert len(root.children) == 4  # 2 faces ^ 2 players
        with pytest.raises(ValueError):
            efg.build_liars_dice(4, 2)
        with pytest.raises(ValueError):
            efg.build_liars_dice(2, 3)

    def test_payoffs_mapped_into_unit_interval(self):
        for tree in (efg.build_kuhn(2, 3), efg.build_liars_dice(2, 2),
                     efg.build_liars_dice(3, 2)):
            for node in tree.nodes:
                if isinstance(node, efg.LeafNode):
                    assert np.all(node.payoffs >= -1e-12)
                    assert np.all(node.payoffs <= 1.0 + 1e-12)

    def test_identity_map_when_already_valid(self):
        tree = efg.build_bimatrix_tree(U1, U2)
        np.testing.assert_array_equal(tree.payoff_scale, [1.0, 1.0])
        np.testing.assert_array_equal(tree.payoff_offset, [0.0, 0.0])

    def test_perfect_recall_violation_detected(self):
        b = efg.TreeBuilder(2)
        # the same P2 infoset hangs below two different P2 actions
        deep = b.decision(1, "P2:dup", [b.leaf([0, 1]), b.leaf([1, 0])])
        first = b.decision(1, "P2:dup", [deep, b.leaf([0.5, 0.5])])
        root = b.decision(0, "P1:root", [first])
        with pytest.raises(ValueError, match="perfect recall"):
            b.build(root)

    def test_chance_probabilities_validated(self):
        b = efg.TreeBuilder(1)
        kids = [b.leaf([0.0]), b.leaf([1.0])]
        with pytest.raises(ValueError):
            b.chance([0.7, 0.7], kids)


class TestCounterfactualValues:
    def test_depth_one_matches_matrix_expectation(self):
        tree = efg.build_bimatrix_tree(U1, U2)
        rng = np.random.default_rng(0)
        x = rng.dirichlet(np.ones(3))
        y = rng.dirichlet(np.ones(3))
        blocks = [None, None]
        blocks[tree.infosets_of(0)[0]] = x
        blocks[tree.infosets_of(1)[0]] = y
        values = efg.counterfactual_values(tree, blocks)
        np.testing.assert_allclose(values[tree.infosets_of(0)[0]], U1 @ y,
                                   atol=1e-12)
        np.testing.assert_allclose(values[tree.infosets_of(1)[0]], x @ U2,
                                   atol=1e-12)

    def test_single_decision_values(self):
        tree = single_decision_tree()
        values = efg.counterfactual_values(tree, [np.array([0.5, 0.5])])
        np.testing.assert_allclose(values[0], [0.3, 0.9], atol=1e-15)

    @pytest.mark.parametrize("builder", [
        lambda: efg.build_kuhn(2, 3),
        lambda: efg.build_liars_dice(2, 2),
        lambda: efg.build_liars_dice(3, 2),
    ])
    def test_matches_path_enumeration(self, builder):
        tree = builder()
        assert count_paths(tree) <= 10**4
        rng = np.random.default_rng(7)
        for _ in range(3):
            x = [rng.dirichlet(np.ones(j.num_actions)) for j in tree.infosets]
            fast = efg.counterfactual_values(tree, x)
            slow = counterfactual_values_by_paths(tree, x)
            for a, b in zip(fast, slow):
                np.testing.assert_allclose(a, b, atol=1e-10)

    def test_kuhn_uniform_against_oracle(self):
        tree = efg.build_kuhn(2, 3)
        x = efg.uniform_behavioral(tree)
        fast = efg.counterfactual_values(tree, x)
        slow = counterfactual_values_by_paths(tree, x)
        for a, b in zip(fast, slow):
            np.testing.assert_allclose(a, b, atol=1e-10)


class TestCounterfactualRegretOperator:
    def test_orthogonality_everywhere(self):
        tree = efg.build_kuhn(2, 4)
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = [rng.dirichlet(np.ones(j.num_actions)) for j in tree.infosets]
            h = efg.counterfactual_regret_operator(tree, x)
            for hj, xj in zip(h, x):
                assert abs(np.dot(hj, xj)) < 1e-12

    def test_constant_tree_is_zero(self):
        tree = constant_tree()
        x = efg.uniform_behavioral(tree)
        for hj in efg.counterfactual_regret_operator(tree, x):
            np.testing.assert_allclose(hj, 0.0, atol=1e-12)

    def test_depth_one_matches_regret_loss(self):
        tree = efg.build_bimatrix_tree(U1, U2)
        rng = np.random.default_rng(2)
        x = rng.dirichlet(np.ones(3))
        y = rng.dirichlet(np.ones(3))
        blocks = [None, None]
        i1, i2 = tree.infosets_of(0)[0], tree.infosets_of(1)[0]
        blocks[i1], blocks[i2] = x, y
        h = efg.counterfactual_regret_operator(tree, blocks)
        # H = -f(x, loss) for the loss convention of the games module
        game = NormalFormGame((U1, U2))
        losses = game.gradients([x, y])
        np.testing.assert_allclose(h[i1], -regret_loss(x, losses[0]),
                                   atol=1e-12)
        np.testing.assert_allclose(h[i2], -regret_loss(y, losses[1]),
                                   atol=1e-12)


class TestLiftedNormalize:
    def test_unit_blocks_become_uniform(self):
        tree = efg.build_kuhn(2, 3)
        z = [np.ones(j.num_actions) for j in tree.infosets]
        for block in efg.lifted_normalize(z):
            np.testing.assert_allclose(block, np.full(block.size,
                                                      1.0 / block.size))

    def test_blockwise_matches_core(self):
        from regretkit.core import normalize
        rng = np.random.default_rng(3)
        z = [rng.uniform(0, 2, 3), rng.uniform(0, 2, 2)]
        out = efg.lifted_normalize(z)
        for a, b in zip(out, [normalize(v) for v in z]):
            np.testing.assert_array_equal(a, b)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            efg.lifted_normalize([np.array([0.5, -0.1])])

    def test_floor_respecting_lipschitz(self):
        tree = efg.build_kuhn(2, 3)
        constant = max(np.sqrt(j.num_actions) for j in tree.infosets)
        rng = np.random.default_rng(4)
        for _ in range(1000):
            z1 = [np.abs(rng.normal(size=j.num_actions)) + 1.0
                  for j in tree.infosets]
            z2 = [np.abs(rng.normal(size=j.num_actions)) + 1.0
                  for j in tree.infosets]
            lhs = efg.behavioral_distance(efg.lifted_normalize(z1),
                                          efg.lifted_normalize(z2))
            rhs = constant * efg.behavioral_distance(z1, z2)
            assert lhs <= rhs + 1e-9


class TestExploitability:
    def test_constant_tree(self):
        tree = constant_tree()
        x = efg.uniform_behavioral(tree)
        np.testing.assert_allclose(efg.exploitability(tree, x), 0.0,
                                   atol=1e-12)

    def test_single_decision(self):
        tree = single_decision_tree()
        gaps = efg.exploitability(tree, [np.array([0.5, 0.5])])
        assert gaps[0] == pytest.approx(0.3, abs=1e-12)

    def test_matching_pennies_equilibrium(self):
        pennies_u1 = np.array([[1.0, 0.0], [0.0, 1.0]])
        tree = efg.build_bimatrix_tree(pennies_u1, 1.0 - pennies_u1)
        x = efg.uniform_behavioral(tree)
        np.testing.assert_allclose(efg.exploitability(tree, x), 0.0,
                                   atol=1e-9)

    def test_exploitability_in_original_units(self):
        # same game, payoffs shifted/scaled out of [0, 1]: identical values
        tree_a = efg.build_bimatrix_tree(U1, U2)
        tree_b = efg.build_bimatrix_tree(4.0 * U1 - 2.0, 4.0 * U2 - 2.0)
        rng = np.random.default_rng(5)
        blocks = [rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))]
        gaps_a = efg.exploitability(tree_a, blocks)
        gaps_b = efg.exploitability(tree_b, blocks)
        np.testing.assert_allclose(gaps_b, 4.0 * gaps_a, atol=1e-9)


class TestLipschitzCertificates:
    def test_counterfactual_operator_bound(self):
        for tree in (efg.build_kuhn(2, 3), efg.build_liars_dice(2, 2)):
            bound = efg.counterfactual_lipschitz(tree)
            assert bound == pytest.approx(np.sqrt(2 * tree.behavioral_dim))
            rng = np.random.default_rng(6)
            for _ in range(1000):
                x1 = [rng.dirichlet(np.ones(j.num_actions))
                      for j in tree.infosets]
                x2 = [rng.dirichlet(np.ones(j.num_actions))
                      for j in tree.infosets]
                h1 = efg.counterfactual_regret_operator(tree, x1)
                h2 = efg.counterfactual_regret_operator(tree, x2)
                lhs = efg.behavioral_distance(h1, h2)
                assert lhs <= bound * efg.behavioral_distance(x1, x2) + 1e-9

    def test_lifted_operator_bound(self):
        tree = efg.build_kuhn(2, 3)
        bound = efg.lifted_lipschitz(tree)
        rng = np.random.default_rng(8)
        for _ in range(1000):
            z1 = [np.abs(rng.normal(size=j.num_actions)) + 1.0
                  for j in tree.infosets]
            z2 = [np.abs(rng.normal(size=j.num_actions)) + 1.0
                  for j in tree.infosets]
            h1 = efg.counterfactual_regret_operator(
                tree, efg.lifted_normalize(z1))
            h2 = efg.counterfactual_regret_operator(
                tree, efg.lifted_normalize(z2))
            lhs = efg.behavioral_distance(h1, h2)
            assert lhs <= bound * efg.behavioral_distance(z1, z2) + 1e-9

    def test_contraction_step_size(self):
        tree = efg.build_kuhn(2, 3)
        assert efg.contraction_step_size(tree) == pytest.approx(
            1.0 / (np.sqrt(2.0) * efg.lifted_lipschitz(tree)))


class TestPredictiveCfr:
    def test_constant_tree_stays_uniform(self):
        tree = constant_tree()
        state = efg.predictive_cfr_state(tree)
        for _ in range(25):
            state, played = efg.predictive_cfr_round(state, tree)
            for block in played:
                np.testing.assert_allclose(
                    block, np.full(block.size, 1.0 / block.size), atol=1e-12)

    def test_depth_one_tracks_prm_plus(self):
        tree = efg.build_bimatrix_tree(U1, U2)
        game = NormalFormGame((U1, U2))
        state = efg.predictive_cfr_state(tree)
        simplex = [AggregateState.initial(3), AggregateState.initial(3)]
        i1, i2 = tree.infosets_of(0)[0], tree.infosets_of(1)[0]
        for _ in range(200):
            state, played = efg.predictive_cfr_round(state, tree)
            xs = [_normalize_nonneg(np.maximum(s.r + s.prediction, 0.0))
                  for s in simplex]
            losses = game.gradients(xs)
            for i in range(2):
                simplex[i], _ = prm_plus_step(simplex[i], losses[i])
            np.testing.assert_allclose(played[i1], xs[0], atol=1e-12)
            np.testing.assert_allclose(played[i2], xs[1], atol=1e-12)

    def test_kuhn_exploitability_decreases(self):
        tree = efg.build_kuhn(2, 3)
        state = efg.predictive_cfr_state(tree)
        averager = efg.BehavioralAverager(tree, "linear")
        checkpoints = []
        for t in range(1, 1001):
            state, played = efg.predictive_cfr_round(state, tree,
                                                     alternate=True)
            averager.observe(played)
            if t in (10, 100, 1000):
                checkpoints.append(
                    float(efg.exploitability(tree, averager.average()).sum()))
        assert checkpoints[1] < checkpoints[0]
        assert checkpoints[2] < checkpoints[1]
        assert checkpoints[-1] < 1e-3


class TestClairvoyantCfr:
    def test_constant_tree_is_fixed(self):
        tree = constant_tree()
        state = efg.clairvoyant_cfr_state(tree)
        previous = [z.copy() for z in state.z]
        state, _ = efg.clairvoyant_cfr_round(state, tree, 5.0)
        for a, b in zip(state.z, previous):
            np.testing.assert_array_equal(a, b)

    def test_depth_one_tracks_exrm(self):
        tree = efg.build_bimatrix_tree(U1, U2)
        game = NormalFormGame((U1, U2))
        state = efg.clairvoyant_cfr_state(tree)
        z = initial_lifted_point(game.dims)
        i1, i2 = tree.infosets_of(0)[0], tree.infosets_of(1)[0]
        for _ in range(200):
            state, played = efg.clairvoyant_cfr_round(state, tree, 0.3)
            z, xs = exrm_round(z, game, 0.3)
            np.testing.assert_allclose(played[i1], xs[0], atol=1e-12)
            np.testing.assert_allclose(played[i2], xs[1], atol=1e-12)

    def test_blocks_stay_in_chopped_orthant(self):
        tree = efg.build_kuhn(2, 3)
        state = efg.clairvoyant_cfr_state(tree)
        for _ in range(100):
            state, played = efg.clairvoyant_cfr_round(state, tree, 10.0)
            for z in state.z:
                assert np.all(z >= 0) and z.sum() >= 1.0 - 1e-9

    def test_alternating_variant_runs(self):
        tree = efg.build_kuhn(2, 3)
        state = efg.clairvoyant_cfr_state(tree)
        for _ in range(50):
            state, played = efg.clairvoyant_cfr_round(state, tree, 1.0,
                                                      alternate=True)
            for block in played:
                assert block.sum() == pytest.approx(1.0, abs=1e-9)


class TestCfrDecomposition:
    @pytest.mark.parametrize("builder,rounds", [
        (lambda: efg.build_kuhn(2, 3), 300),
        (lambda: efg.build_liars_dice(3, 2), 150),
    ])
    def test_sequence_regret_bounded_by_infoset_regrets(self, builder, rounds):
        tree = builder()
        n = tree.num_players
        state = efg.predictive_cfr_state(tree)
        cum_h = [np.zeros(j.num_actions) for j in tree.infosets]
        cum_weights = [np.zeros(len(tree.nodes)) for _ in range(n)]
        cum_value = np.zeros(n)
        for t in range(1, rounds + 1):
            state, played = efg.predictive_cfr_round(state, tree,
                                                     alternate=(n == 2))
            h = efg.counterfactual_regret_operator(tree, played,
                                                   validate=False)
            for j, hj in enumerate(h):
                cum_h[j] += hj
            for i in range(n):
                cum_weights[i] += efg.leaf_excl_weights(tree, played, i)
            cum_value += efg.expected_values(tree, played, validate=False)
            if t % 50 == 0:
                for i in range(n):
                    seq_regret = (efg.best_response_value(tree, i,
                                                          cum_weights[i])
                                  - cum_value[i])
                    bound = sum(max(float(cum_h[j].max()), 0.0)
                                for j in tree.infosets_of(i))
                    assert seq_regret <= bound + 1e-9


class TestTreeFiles:
    def test_round_trip_kuhn(self, tmp_path):
        tree = efg.build_kuhn(2, 3)
        path = tmp_path / "kuhn.efg"
        efg.save_tree(tree, path)
        loaded = efg.load_tree(path)
        assert len(loaded.nodes) == len(tree.nodes)
        assert len(loaded.infosets) == len(tree.infosets)
        np.testing.assert_array_equal(loaded.payoff_scale, tree.payoff_scale)
        x = efg.uniform_behavioral(tree)
        for a, b in zip(efg.counterfactual_values(tree, x),
                        efg.counterfactual_values(loaded, x)):
            np.testing.assert_array_equal(a, b)

    def test_golden_grammar(self, tmp_path):
        text = (
            "efg 1\n"
            "infoset 0 player 0 actions 2 key P1:pick\n"
            "node 0 player 0 infoset 0 2 1 2\n"
            "node 1 leaf 0.3\n"
            "node 2 leaf 0.9\n"
        )
        path = tmp_path / "tiny.efg"
        path.write_text(text)
        tree = efg.load_tree(path)
        values = efg.counterfactual_values(tree, [np.array([0.5, 0.5])])
        np.testing.assert_allclose(values[0], [0.3, 0.9], atol=1e-15)

    def test_builder_emits_parseable_golden(self, tmp_path):
        tree = single_decision_tree()
        path = tmp_path / "single.efg"
        efg.save_tree(tree, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "efg 1"
        assert lines[1] == "infoset 0 player 0 actions 2 key P1:pick"
        assert lines[2] == "node 0 player 0 infoset 0 2 1 2"
        assert lines[3] == "node 1 leaf 0.29999999999999999"
        assert lines[4] == "node 2 leaf 0.90000000000000002"

    def test_malformed_rejected(self, tmp_path):
        path = tmp_path / "bad.efg"
        path.write_text("efg 1\nnode 0 leaf 0.5 0.5\n")
        with pytest.raises(ValueError):
            efg.load_tree(path)
