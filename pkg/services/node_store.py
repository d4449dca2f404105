import json
import math
from dataclasses import dataclass
from typing import Any, Dict, Hashable, List, NamedTuple, Optional, TextIO, Tuple

from utils.errors import DanglingParent

LOW = "low"
SUBGOAL = "subgoal"


class Edge(NamedTuple):
    """A tree edge: one low-level action, or a subgoal proposal with its inducing actions."""
    kind: str
    actions: Tuple[str, ...]
    proposal_id: Optional[int] = None

    @property
    def is_low(self) -> bool:
        return self.kind == LOW

    @classmethod
    def low(cls, action: str) -> "Edge":
        return cls(LOW, (action,))

    @classmethod
    def subgoal(cls, proposal_id: int, actions: Tuple[str, ...]) -> "Edge":
        return cls(SUBGOAL, tuple(actions), proposal_id)


class PriorityKey(NamedTuple):
    """Lexicographic queue key: (tier, log_phi, fifo)."""
    tier: int
    log_phi: float
    fifo: int


@dataclass
class SearchNode:
    node_id: int
    state_id: int
    parent: Optional[int]
    edge: Optional[Edge]
    g: int
    dist: int
    log_pi: float
    ll_edges: int
    h: float = 0.0
    priority: Optional[PriorityKey] = None
    expanded: bool = False
    # ε factors on the root path; the queue tier in the ε → 0 limit
    tier: int = 0
    popped_at: Optional[int] = None


class NodeStore:
    """
    Arena for one search: interned states plus every created node.

    Nodes refer to states and parents by index, never by object.
    """

    def __init__(self):
        self.states: List[Hashable] = []
        self._state_ids: Dict[Hashable, int] = {}
        self.nodes: List[SearchNode] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def intern(self, state: Hashable) -> int:
        state_id = self._state_ids.get(state)
        if state_id is None:
            state_id = len(self.states)
            self._state_ids[state] = state_id
            self.states.append(state)
        return state_id

    def state(self, state_id: int) -> Hashable:
        return self.states[state_id]

    def state_of(self, node: SearchNode) -> Hashable:
        return self.states[node.state_id]

    def add_root(self, state: Hashable) -> SearchNode:
        return self.add(state, None, None, 0, 0, 0.0, 0)

    def add(self, state: Hashable, parent: Optional[int], edge: Optional[Edge],
            g: int, dist: int, log_pi: float, ll_edges: int, tier: int = 0) -> SearchNode:
        node = SearchNode(len(self.nodes), self.intern(state), parent, edge, g, dist, log_pi, ll_edges, tier=tier)
        self.nodes.append(node)
        return node

    def get(self, node_id: int) -> SearchNode:
        if node_id is None or not 0 <= node_id < len(self.nodes):
            raise DanglingParent(f"Node {node_id} is not in the tree ({len(self.nodes)} nodes).")
        return self.nodes[node_id]

    def path(self, node_id: int) -> List[SearchNode]:
        """Nodes from the root down to `node_id`."""
        path = []
        node = self.get(node_id)
        while True:
            path.append(node)
            if node.parent is None:
                break
            if node.parent >= node.node_id:
                raise DanglingParent(f"Node {node.node_id} has parent {node.parent} created after it.")
            node = self.get(node.parent)
        return path[::-1]

    def dump_jsonl(self, stream: TextIO) -> int:
        """Writes one JSON line per node for bound-check audits; returns the line count."""
        for node in self.nodes:
            stream.write(json.dumps(_node_record(node)) + "\n")
        return len(self.nodes)


def _finite(value: float) -> Any:
    return value if math.isfinite(value) else str(value)


def _node_record(node: SearchNode) -> Dict[str, Any]:
    return {
        "node_id": node.node_id,
        "parent": node.parent,
        "edge": None if node.edge is None else {
            "kind": node.edge.kind, "actions": list(node.edge.actions), "proposal_id": node.edge.proposal_id,
        },
        "g": node.g,
        "dist": node.dist,
        "log_pi": _finite(node.log_pi),
        "tier": node.tier,
        "popped_at": node.popped_at,
        "priority": None if node.priority is None else [
            node.priority.tier, _finite(node.priority.log_phi), node.priority.fifo,
        ],
    }
