import unittest

from domains import generate_instance
from domains.base import Instance
from domains.stp import goal_tiles
from services.oracle import bfs_solve, distance_map, idastar_solve, optimal_first_actions
from toy_domains import BinaryTreeDomain
from utils.errors import InadmissibleHeuristic, OracleBudgetExceeded


def stp_instance(tiles) -> Instance:
    return Instance(domain="stp", seed=0, params={"width": 3, "scramble": 0}, initial=list(tiles))


def sokoban_instance(rows) -> Instance:
    return Instance(domain="sokoban", seed=0, params={}, initial=rows)


class TestBfs(unittest.TestCase):

    def test_goal_instance(self):
        """Test a goal instance has optimal length 0."""
        result = bfs_solve(stp_instance(goal_tiles(3)))
        self.assertTrue(result.solved)
        self.assertEqual(result.optimal_length, 0)
        self.assertEqual(result.plan, [])

    def test_short_scramble_bound(self):
        """Test a 5-step reverse walk gives an optimal length of at most 5."""
        for seed in range(5):
            instance = generate_instance("stp", {"width": 3, "scramble": 5}, seed)
            self.assertLessEqual(bfs_solve(instance).optimal_length, 5)

    def test_state_cap(self):
        """Test exceeding the state cap raises."""
        instance = generate_instance("stp", {"width": 3, "scramble": 30}, 1)
        with self.assertRaises(OracleBudgetExceeded):
            bfs_solve(instance, max_states=10)


class TestIdaStar(unittest.TestCase):

    def test_agrees_with_bfs(self):
        """Test IDA* and BFS return the same optimal length on seeded 3x3 instances."""
        for seed in range(10):
            instance = generate_instance("stp", {"width": 3, "scramble": 14}, seed)
            self.assertEqual(idastar_solve(instance).optimal_length, bfs_solve(instance).optimal_length)

    def test_goal_instance(self):
        """Test a goal instance has optimal length 0."""
        self.assertEqual(idastar_solve(stp_instance(goal_tiles(3))).optimal_length, 0)

    def test_inadmissible_guard(self):
        """Test IDA* refuses the Sokoban heuristic unless explicitly allowed."""
        instance = sokoban_instance(["######", "#@ $.#", "######"])
        with self.assertRaises(InadmissibleHeuristic):
            idastar_solve(instance)
        result = idastar_solve(instance, allow_inadmissible=True)
        self.assertTrue(result.solved)
        self.assertEqual(result.optimal_length, bfs_solve(instance).optimal_length)

    def test_generated_budget(self):
        """Test exceeding the generated-node cap raises."""
        instance = generate_instance("stp", {"width": 3, "scramble": 30}, 2)
        with self.assertRaises(OracleBudgetExceeded):
            idastar_solve(instance, max_generated=5)


class TestOptimalActions(unittest.TestCase):

    def test_one_move_from_goal(self):
        """Test one move from the goal the only optimal action is the goal-reaching one."""
        self.assertEqual(optimal_first_actions(stp_instance((1, 2, 3, 4, 5, 6, 7, 0, 8))), ["E"])

    def test_goal_state(self):
        """Test a goal state has no optimal first action."""
        self.assertEqual(optimal_first_actions(stp_instance(goal_tiles(3))), [])

    def test_symmetric_tour(self):
        """Test a TSP toy with two mirrored optimal tours has two optimal first actions."""
        instance = Instance(domain="tsp", seed=0, params={},
                            initial={"size": 3, "cities": [[0, 0], [1, 1]], "agent": [0, 0], "visited": 1})
        self.assertEqual(sorted(optimal_first_actions(instance)), ["E", "S"])

    def test_distance_map_skips_dead_ends(self):
        """Test states that cannot reach the goal are absent from the distance map."""
        distances = distance_map(BinaryTreeDomain(goal="RR"), "")
        self.assertEqual(distances, {"RR": 0, "R": 1, "": 2})


if __name__ == "__main__":
    unittest.main()
