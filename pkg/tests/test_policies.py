import math
import unittest

import numpy as np

from domains.stp import StpDomain, StpState
from services.node_store import Edge
from services.policies import (
    ExpansionContext, HighLevelPolicy, LowLevelPolicy, MixedPolicy, edge_log_prob, log_softmax,
    normalized_distribution,
)
from toy_domains import BinaryTreeDomain
from utils.errors import EdgeNotInContext, InvalidEpsilon, NoLegalEdges

CENTER = StpState(3, (1, 2, 3, 4, 0, 5, 6, 7, 8))


def stp_context(n_proposals: int) -> ExpansionContext:
    """Centre-blank STP expansion with four low-level moves and `n_proposals` placeholder subgoals."""
    domain = StpDomain(3)
    successors = domain.successors(CENTER)
    low_edges = tuple(Edge.low(a) for a, _ in successors)
    low_targets = tuple(s for _, s in successors)
    sub_edges = tuple(Edge.subgoal(i, ("N", "N")) for i in range(n_proposals))
    sub_targets = tuple(("target", i) for i in range(n_proposals))
    return ExpansionContext(domain, CENTER, low_edges, low_targets, sub_edges, sub_targets)


class TestMixedPolicy(unittest.TestCase):

    def test_low_level_edge_mass(self):
        """Test a low-level edge gets log(0.1 * 0.25) with ε = 0.1 and four legal actions."""
        context = stp_context(8)
        log_prob = edge_log_prob(MixedPolicy(0.1), CENTER, context.low_edges[0], context)
        self.assertAlmostEqual(log_prob, math.log(0.025), places=12)

    def test_subgoal_edge_mass(self):
        """Test a subgoal edge gets log(0.9 * 0.125) with ε = 0.1 and eight proposals."""
        context = stp_context(8)
        log_prob = edge_log_prob(MixedPolicy(0.1), CENTER, context.sub_edges[3], context)
        self.assertAlmostEqual(log_prob, math.log(0.1125), places=12)

    def test_epsilon_one_excludes_subgoals(self):
        """Test ε = 1 leaves every subgoal edge without mass."""
        context = stp_context(8)
        distribution = normalized_distribution(MixedPolicy(1.0), CENTER, context)
        self.assertEqual(edge_log_prob(MixedPolicy(1.0), CENTER, context.sub_edges[0], context), float("-inf"))
        self.assertEqual(set(distribution), set(context.low_edges))

    def test_distribution_sums_to_one(self):
        """Test four actions plus eight proposals give twelve entries summing to one."""
        distribution = normalized_distribution(MixedPolicy(0.1), CENTER, stp_context(8))
        self.assertEqual(len(distribution), 12)
        self.assertAlmostEqual(sum(distribution.values()), 1.0, places=12)

    def test_single_support_renormalized(self):
        """Test without proposals the low-level edges carry the whole mass."""
        distribution = normalized_distribution(MixedPolicy(0.1), CENTER, stp_context(0))
        for probability in distribution.values():
            self.assertAlmostEqual(probability, 0.25, places=12)

    def test_to_zero_keeps_component_probabilities(self):
        """Test the ε → 0 limit drops the ε factor from both supports."""
        context = stp_context(8)
        log_probs = MixedPolicy("to-zero").edge_log_probs(context)
        self.assertAlmostEqual(log_probs[context.low_edges[0]], math.log(0.25), places=12)
        self.assertAlmostEqual(log_probs[context.sub_edges[0]], math.log(0.125), places=12)

    def test_mass_is_monotone_in_epsilon(self):
        """Test raising ε raises every low-level edge and lowers every subgoal edge."""
        context = stp_context(3)
        epsilons = [1e-5, 1e-3, 0.1, 0.5, 0.9]
        previous = None
        for epsilon in epsilons:
            log_probs = MixedPolicy(epsilon).edge_log_probs(context)
            if previous is not None:
                for edge in context.low_edges:
                    self.assertGreater(log_probs[edge], previous[edge])
                for edge in context.sub_edges:
                    self.assertLess(log_probs[edge], previous[edge])
            previous = log_probs

    def test_tier_steps_mark_epsilon_edges(self):
        """Test only low-level edges beside proposals carry a tier step."""
        steps = MixedPolicy("to-zero").tier_steps(stp_context(2))
        self.assertEqual(sorted(steps.values()), [0, 0, 1, 1, 1, 1])
        steps = MixedPolicy("to-zero").tier_steps(stp_context(0))
        self.assertEqual(set(steps.values()), {0})

    def test_invalid_epsilon(self):
        """Test ε outside (0, 1] is rejected."""
        for epsilon in (0, -0.1, 1.5, "half"):
            with self.assertRaises(InvalidEpsilon):
                MixedPolicy(epsilon)

    def test_edge_not_offered(self):
        """Test asking for an edge the expansion does not offer raises."""
        context = stp_context(2)
        with self.assertRaises(EdgeNotInContext):
            edge_log_prob(MixedPolicy(0.1), CENTER, Edge.subgoal(7, ("E",)), context)

    def test_no_legal_edges(self):
        """Test an empty expansion has no distribution."""
        context = ExpansionContext(StpDomain(3), CENTER, (), (), (), ())
        with self.assertRaises(NoLegalEdges):
            normalized_distribution(MixedPolicy(0.1), CENTER, context)


class TestComponentPolicies(unittest.TestCase):

    def test_boltzmann_progress_ratio(self):
        """Test improvements {2, 0} at temperature 1 give an e² : 1 probability ratio."""
        domain = BinaryTreeDomain(h_table={"": 2.0, "L": 0.0, "R": 2.0})
        log_probs = HighLevelPolicy("boltzmann_progress", 1.0).log_probs(domain, "", ["L", "R"])
        self.assertAlmostEqual(log_probs[0] - log_probs[1], 2.0, places=12)

    def test_boltzmann_heuristic_prefers_lower_h(self):
        """Test the heuristic Boltzmann policy puts more mass on the successor with lower h."""
        domain = BinaryTreeDomain(h_table={"L": 3.0, "R": 1.0})
        log_probs = LowLevelPolicy("boltzmann_heuristic", 1.0).log_probs(domain, "", ["L", "R"], ["L", "R"])
        self.assertGreater(log_probs[1], log_probs[0])
        self.assertAlmostEqual(math.exp(log_probs[0]) + math.exp(log_probs[1]), 1.0, places=12)

    def test_demo_table_add_one_smoothing(self):
        """Test demonstration counts are add-one smoothed and unseen actions keep positive mass."""
        domain = BinaryTreeDomain()
        policy = LowLevelPolicy("demo_table", table={(domain.static_key, ""): {"R": 3}})
        self.assertAlmostEqual(policy.action_log_prob(domain, "", "R"), math.log(4 / 5), places=12)
        self.assertAlmostEqual(policy.action_log_prob(domain, "", "L"), math.log(1 / 5), places=12)

    def test_demo_table_unseen_state_is_uniform(self):
        """Test a state missing from the table falls back to uniform."""
        domain = BinaryTreeDomain()
        policy = LowLevelPolicy("demo_table", table={})
        self.assertAlmostEqual(policy.action_log_prob(domain, "L", "R"), math.log(0.5), places=12)

    def test_log_softmax_shift_invariant(self):
        """Test adding a constant to every score leaves the log-softmax unchanged."""
        rng = np.random.default_rng(5)
        for _ in range(50):
            scores = rng.normal(0.0, 5.0, size=int(rng.integers(1, 12)))
            shift = float(rng.normal(0.0, 100.0))
            np.testing.assert_allclose(log_softmax(scores + shift), log_softmax(scores), atol=1e-9)
            self.assertAlmostEqual(float(np.exp(log_softmax(scores)).sum()), 1.0, places=12)

    def test_boltzmann_heuristic_ignores_common_offset(self):
        """Test shifting every successor heuristic by the same amount keeps the distribution."""
        policy = LowLevelPolicy("boltzmann_heuristic", 2.0)
        base = policy.log_probs(BinaryTreeDomain(h_table={"L": 3.0, "R": 1.0}), "", ["L", "R"], ["L", "R"])
        shifted = policy.log_probs(BinaryTreeDomain(h_table={"L": 13.0, "R": 11.0}), "", ["L", "R"], ["L", "R"])
        np.testing.assert_allclose(base, shifted, atol=1e-12)

    def test_illegal_action_has_no_mass(self):
        """Test an action that is not legal at the state has log-probability −inf."""
        self.assertEqual(LowLevelPolicy().action_log_prob(BinaryTreeDomain(), "LL", "L"), float("-inf"))


if __name__ == "__main__":
    unittest.main()
