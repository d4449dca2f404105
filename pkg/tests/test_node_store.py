import io
import json
import unittest

from services.node_store import Edge, NodeStore, PriorityKey
from utils.errors import DanglingParent


class TestNodeStore(unittest.TestCase):

    def test_states_are_interned(self):
        """Test equal states share one id and distinct states get new ids."""
        store = NodeStore()
        self.assertEqual(store.intern(("a", 1)), store.intern(("a", 1)))
        self.assertNotEqual(store.intern(("a", 1)), store.intern(("b", 1)))
        root = store.add_root(("a", 1))
        self.assertEqual(store.state_of(root), ("a", 1))

    def test_path_from_root(self):
        """Test path returns the nodes from the root down."""
        store = NodeStore()
        root = store.add_root("r")
        child = store.add("c", root.node_id, Edge.low("N"), 1, 1, -0.5, 1)
        self.assertEqual([n.node_id for n in store.path(child.node_id)], [0, 1])

    def test_dangling_parent(self):
        """Test a node pointing outside the arena raises."""
        store = NodeStore()
        store.add_root("r")
        store.add("c", 7, Edge.low("N"), 1, 1, -0.5, 1)
        with self.assertRaises(DanglingParent):
            store.path(1)
        with self.assertRaises(DanglingParent):
            store.get(42)

    def test_dump_jsonl(self):
        """Test the audit dump writes one JSON line per node with infinities as strings."""
        store = NodeStore()
        root = store.add_root("r")
        root.priority = PriorityKey(0, float("-inf"), 0)
        store.add("c", root.node_id, Edge.subgoal(2, ("E", "E")), 1, 2, -1.0, 0)
        stream = io.StringIO()
        self.assertEqual(store.dump_jsonl(stream), 2)
        lines = [json.loads(line) for line in stream.getvalue().splitlines()]
        self.assertEqual(lines[0]["priority"], [0, "-inf", 0])
        self.assertEqual(lines[1]["edge"], {"kind": "subgoal", "actions": ["E", "E"], "proposal_id": 2})


if __name__ == "__main__":
    unittest.main()
