import unittest

from domains import generate_instance, load_instance
from domains.base import Instance
from domains.sokoban import parse
from domains.stp import StpDomain, StpState, goal_tiles
from services.generators import AdversarialGenerator, MacroGenerator
from services.heuristics import EvaluationFunction
from services.node_store import Edge, NodeStore
from services.oracle import bfs_from, bfs_solve
from services.policies import MixedPolicy
from services.search_core import (
    BUDGET_EXHAUSTED, EXHAUSTED, OUT_OF_MEMORY, SOLVED, ChildExpander, SearchBudget, fringe_nodes,
    goal_test, reconstruct_plan, search, search_from,
)
from toy_domains import BinaryTreeDomain
from utils.errors import InvalidInstance

GOAL = list(goal_tiles(3))
TWO_FROM_GOAL = StpState(3, (1, 2, 3, 4, 5, 6, 0, 7, 8))


def stp_instance(tiles, seed: int = 0) -> Instance:
    return Instance(domain="stp", seed=seed, params={"width": 3, "scramble": 0}, initial=list(tiles))


def low_level_expander(domain, epsilon=1.0, generator=None, low_level=True) -> ChildExpander:
    return ChildExpander(domain, MixedPolicy(epsilon), generator, low_level)


class TestSearch(unittest.TestCase):

    def test_root_is_goal(self):
        """Test a goal instance is solved by the first pop with an empty plan."""
        result = search(stp_instance(GOAL), low_level_expander(StpDomain(3)), EvaluationFunction("levin_ts"),
                        SearchBudget())
        self.assertTrue(result.solved)
        self.assertEqual(result.status, SOLVED)
        self.assertEqual(result.expansions, 1)
        self.assertEqual(result.search_loss, 0)
        self.assertEqual(result.low_level_plan, [])

    def test_zero_budget(self):
        """Test max_expansions = 0 leaves the instance unsolved with no expansion."""
        result = search(stp_instance(TWO_FROM_GOAL.tiles), low_level_expander(StpDomain(3)),
                        EvaluationFunction("levin_ts"), SearchBudget(max_expansions=0))
        self.assertFalse(result.solved)
        self.assertEqual(result.status, BUDGET_EXHAUSTED)
        self.assertEqual(result.expansions, 0)

    def test_two_moves_from_goal(self):
        """Test pure low-level LevinTS finds a 2-move plan that the BFS oracle confirms."""
        instance = stp_instance(TWO_FROM_GOAL.tiles)
        result = search(instance, low_level_expander(StpDomain(3)), EvaluationFunction("levin_ts"), SearchBudget())
        self.assertTrue(result.solved)
        self.assertEqual(len(result.low_level_plan), 2)
        self.assertEqual(len(result.low_level_plan), bfs_solve(instance).optimal_length)
        domain, state = load_instance(instance)
        self.assertTrue(domain.is_goal(domain.replay(state, result.low_level_plan)))
        self.assertEqual(result.solution_breakdown, {"low": 2, "subgoal": 0})

    def test_goal_test_uses_instance_layout(self):
        """Test goal_test judges a state against the instance's own domain."""
        instance = stp_instance(TWO_FROM_GOAL.tiles)
        self.assertTrue(goal_test(StpState(3, goal_tiles(3)), instance))
        self.assertFalse(goal_test(TWO_FROM_GOAL, instance))

    def test_domain_mismatch(self):
        """Test an instance whose layout differs from the expander's domain is refused."""
        with self.assertRaises(InvalidInstance):
            search(stp_instance(GOAL), low_level_expander(StpDomain(4)), EvaluationFunction("levin_ts"),
                   SearchBudget())

    def test_astar_matches_oracle(self):
        """Test A* on dist with Manhattan and dedup returns the optimal plan length."""
        for seed in range(5):
            instance = generate_instance("stp", {"width": 3, "scramble": 20}, seed)
            domain, _ = load_instance(instance)
            result = search(instance, low_level_expander(domain), EvaluationFunction("astar_dist"), SearchBudget())
            self.assertTrue(result.solved)
            self.assertEqual(result.solution_dist, bfs_solve(instance).optimal_length)

    def test_node_cap_is_out_of_memory(self):
        """Test exceeding the node cap ends the search with the out-of-memory status."""
        result = search(stp_instance(TWO_FROM_GOAL.tiles), low_level_expander(StpDomain(3)),
                        EvaluationFunction("levin_ts"), SearchBudget(max_nodes=1))
        self.assertFalse(result.solved)
        self.assertEqual(result.status, OUT_OF_MEMORY)

    def test_binary_tree_worst_case(self):
        """Test LevinTS on a depth-2 binary tree pops every node before the last leaf."""
        result = search_from("", low_level_expander(BinaryTreeDomain(goal="RR")), EvaluationFunction("levin_ts"),
                             SearchBudget(), dedup=False)
        self.assertTrue(result.solved)
        self.assertEqual(result.expansions, 7)
        self.assertEqual(result.search_loss, 6)
        self.assertEqual(result.generated, 6)
        self.assertEqual(result.ll_expansions, 6)

    def test_env_steps_count_transition_calls(self):
        """Test env_steps counts one transition call per action tried at each expanded state."""
        result = search_from("", low_level_expander(BinaryTreeDomain(goal="RR")), EvaluationFunction("levin_ts"),
                             SearchBudget(), dedup=False)
        # root, L, R and three leaves are expanded, each trying both actions
        self.assertEqual(result.env_steps, 12)

    def test_tiered_ordering_prefers_subgoals(self):
        """Test in the ε → 0 limit a subgoal child is popped before any low-level child."""
        domain = BinaryTreeDomain(goal="RR")
        expander = low_level_expander(domain, "to-zero", MacroGenerator(catalog=[["R", "R"]]))
        result = search_from("", expander, EvaluationFunction("levin_ts"), SearchBudget())
        self.assertTrue(result.tiered)
        self.assertEqual(result.expansions, 2)
        self.assertEqual(result.solution_breakdown, {"low": 0, "subgoal": 1})
        self.assertEqual(result.low_level_plan, ["R", "R"])
        self.assertEqual((result.solution_g, result.solution_dist), (1, 2))

    def test_adversary_needs_low_level_edges(self):
        """Test pure subgoal search under the adversary fails while the hybrid search succeeds."""
        domain = BinaryTreeDomain(goal="RR")
        generator = AdversarialGenerator(lengths=[1], horizon=1, codebook_size=2)
        pure = search_from("", low_level_expander(domain, 0.5, generator, low_level=False),
                           EvaluationFunction("levin_ts"), SearchBudget())
        hybrid = search_from("", low_level_expander(domain, 0.5, generator), EvaluationFunction("levin_ts"),
                             SearchBudget())
        self.assertFalse(pure.solved)
        self.assertEqual(pure.status, EXHAUSTED)
        self.assertTrue(hybrid.solved)

    def test_same_inputs_same_result(self):
        """Test two identical searches give identical results apart from wall clock."""
        instance = generate_instance("stp", {"width": 3, "scramble": 12}, 4)
        domain, _ = load_instance(instance)
        expander = ChildExpander(domain, MixedPolicy(0.5), MacroGenerator(lengths=[2]), seed=instance.seed)
        first = search(instance, expander, EvaluationFunction("phs_star_scaled"), SearchBudget(max_expansions=500))
        second = search(instance, expander, EvaluationFunction("phs_star_scaled"), SearchBudget(max_expansions=500))
        self.assertEqual(first.model_dump(exclude={"wall_clock"}), second.model_dump(exclude={"wall_clock"}))


class TestTieredLimit(unittest.TestCase):
    """The ε → 0 limit must order nodes as a very small ε does."""

    CATALOG = [["L"], ["R", "R"], ["R", "L"]]

    def tree_search(self, epsilon, depth: int, goal: str):
        domain = BinaryTreeDomain(depth=depth, goal=goal)
        generator = MacroGenerator(catalog=self.CATALOG, horizon=2, codebook_size=3)
        store = NodeStore()
        result = search_from("", low_level_expander(domain, epsilon, generator), EvaluationFunction("levin_ts"),
                             SearchBudget(), dedup=False, store=store)
        return result, store

    @staticmethod
    def path_key(store: NodeStore, node_id: int):
        return tuple(n.edge for n in store.path(node_id)[1:])

    def test_collision_keeps_edge_without_epsilon(self):
        """Test a low-level edge and a proposal on the same state merge to the proposal in both regimes."""
        domain = BinaryTreeDomain(depth=2, goal="LL")
        generator = MacroGenerator(catalog=self.CATALOG, horizon=2, codebook_size=3)
        for epsilon in ("to-zero", 1e-6):
            children, _ = low_level_expander(domain, epsilon, generator).children("")
            kinds = {child.target: child.edge.is_low for child in children}
            self.assertEqual(kinds, {"L": False, "R": True, "RR": False, "RL": False})
            self.assertEqual({child.target: child.tier_step for child in children},
                             {"L": 0, "R": 1, "RR": 0, "RL": 0})

    def test_solution_matches_small_epsilon(self):
        """Test the limit solves a depth-2 tree with the same plan and effort as ε = 1e-6."""
        limit, _ = self.tree_search("to-zero", 2, "LL")
        small, _ = self.tree_search(1e-6, 2, "LL")
        self.assertTrue(limit.solved and small.solved)
        self.assertEqual(limit.low_level_plan, small.low_level_plan)
        self.assertEqual(limit.expansions, small.expansions)
        self.assertEqual(limit.solution_breakdown, small.solution_breakdown)

    def test_pop_order_matches_small_epsilon(self):
        """Test on an exhausted 3-level tree both regimes pop the same (tier, value) sequence."""
        limit, limit_store = self.tree_search("to-zero", 3, "X")
        small, small_store = self.tree_search(1e-6, 3, "X")
        self.assertEqual(limit.status, EXHAUSTED)
        self.assertEqual(small.status, EXHAUSTED)
        labels = {self.path_key(limit_store, n.node_id): (n.priority.tier, round(n.priority.log_phi, 9))
                  for n in limit_store.nodes}

        def popped_labels(store):
            popped = sorted((n for n in store.nodes if n.popped_at is not None), key=lambda n: n.popped_at)
            return [labels[self.path_key(store, n.node_id)] for n in popped]

        self.assertEqual(len(limit_store), len(small_store))
        self.assertEqual(popped_labels(limit_store), popped_labels(small_store))

    def test_tier_counts_epsilon_factors(self):
        """Test a node's tier is the number of low-level edges taken beside proposals."""
        _, store = self.tree_search("to-zero", 3, "X")
        for n in store.nodes:
            if n.parent is None:
                self.assertEqual(n.tier, 0)
                continue
            parent = store.get(n.parent)
            self.assertGreaterEqual(n.tier, parent.tier)
            self.assertLessEqual(n.tier, n.ll_edges)


class TestExpansion(unittest.TestCase):

    def test_corner_blank_children(self):
        """Test a corner blank without a generator yields exactly two children."""
        children, steps = low_level_expander(StpDomain(3)).children(StpState(3, goal_tiles(3)))
        self.assertEqual(len(children), 2)
        self.assertEqual(steps, 4)

    def test_sokoban_with_macros(self):
        """Test four legal moves plus three distinct macro targets give seven children."""
        domain, state = parse(["#######", "#     #", "#     #", "#  @  #", "#     #", "#$.   #", "#######"])
        generator = MacroGenerator(catalog=[["N", "N"], ["E", "E"], ["W", "W"]])
        children, _ = ChildExpander(domain, MixedPolicy(0.1), generator).children(state)
        self.assertEqual(len(children), 7)
        self.assertEqual(sum(1 for child in children if not child.edge.is_low), 3)

    def test_illegal_proposal_dropped(self):
        """Test a proposal containing an illegal action never becomes a child."""
        generator = MacroGenerator(catalog=[["E", "E"]])
        children, _ = ChildExpander(StpDomain(3), MixedPolicy(0.1), generator).children(StpState(3, goal_tiles(3)))
        self.assertTrue(all(child.edge.is_low for child in children))

    def test_duplicate_target_keeps_likelier_edge(self):
        """Test a proposal reaching a low-level successor collapses into one child with the larger mass."""
        domain = BinaryTreeDomain()
        generator = MacroGenerator(catalog=[["L"]])
        children, _ = ChildExpander(domain, MixedPolicy(0.1), generator).children("")
        by_target = {child.target: child.edge for child in children}
        self.assertEqual(len(children), 2)
        self.assertFalse(by_target["L"].is_low)
        self.assertTrue(by_target["R"].is_low)

    def test_proposals_do_not_depend_on_expansion_order(self):
        """Test the generator seed depends only on the expander seed and the state."""
        instance = generate_instance("stp", {"width": 3, "scramble": 10}, 1)
        domain, state = load_instance(instance)
        expander = ChildExpander(domain, MixedPolicy(0.5), AdversarialGenerator(), seed=9)
        first, _ = expander.children(state)
        expander.children(domain.successors(state)[0][1])
        second, _ = expander.children(state)
        self.assertEqual(first, second)


class TestPlanReconstruction(unittest.TestCase):

    def test_subgoal_plan_concatenates_actions(self):
        """Test subgoal edges of lengths 2, 4 and 1 give a 7-action plan equal to dist."""
        store = NodeStore()
        root = store.add_root("s0")
        a = store.add("s1", root.node_id, Edge.subgoal(0, ("E", "E")), 1, 2, -1.0, 0)
        b = store.add("s2", a.node_id, Edge.subgoal(1, ("S", "S", "W", "N")), 2, 6, -2.0, 0)
        c = store.add("s3", b.node_id, Edge.subgoal(0, ("E",)), 3, 7, -3.0, 0)
        plan = reconstruct_plan(c.node_id, store)
        self.assertEqual(plan, ["E", "E", "S", "S", "W", "N", "E"])
        self.assertEqual(len(plan), c.dist)

    def test_low_level_plan_length_is_depth(self):
        """Test a low-level-only path gives a plan of length g = dist."""
        store = NodeStore()
        node = store.add_root("s0")
        for i, action in enumerate(["N", "W", "W"]):
            node = store.add(f"s{i + 1}", node.node_id, Edge.low(action), node.g + 1, node.dist + 1, 0.0, i + 1)
        self.assertEqual(reconstruct_plan(node.node_id, store), ["N", "W", "W"])
        self.assertEqual(node.g, node.dist)

    def test_root_plan_is_empty(self):
        """Test the root's plan is empty."""
        store = NodeStore()
        self.assertEqual(reconstruct_plan(store.add_root("s0").node_id, store), [])

    def test_fringe_is_maximal_elements(self):
        """Test the fringe keeps expanded nodes none of whose children were expanded, plus the solution."""
        store = NodeStore()
        root = store.add_root("r")
        left = store.add("l", root.node_id, Edge.low("L"), 1, 1, 0.0, 1)
        right = store.add("r2", root.node_id, Edge.low("R"), 1, 1, 0.0, 1)
        leaf = store.add("ll", left.node_id, Edge.low("L"), 2, 2, 0.0, 2)
        self.assertEqual(fringe_nodes(store, [root.node_id, left.node_id, right.node_id], leaf.node_id),
                         [right.node_id, leaf.node_id])

    def test_oracle_agrees_on_two_step_board(self):
        """Test the BFS oracle finds the same 2-move distance from the state directly."""
        self.assertEqual(bfs_from(StpDomain(3), TWO_FROM_GOAL).optimal_length, 2)


if __name__ == "__main__":
    unittest.main()
