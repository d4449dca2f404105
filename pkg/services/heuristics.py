import math
from dataclasses import dataclass
from typing import Hashable

from domains.base import Domain
from services.node_store import PriorityKey, SearchNode
from utils.errors import NegativeHeuristic, ZeroDist
from utils.validator import EVAL_KINDS

PHS_FAMILY = ("phs_star_scaled", "levin_ts", "phs_depth", "phs_dist")
ROOT_PRIORITY = float("-inf")


@dataclass(frozen=True)
class EvaluationFunction:
    """
    Node evaluation by kind name.

    phs_star_scaled  log g + log(1 + h/dist) − (1 + h/dist)·log π
    levin_ts         log g − log π
    phs_depth        log(g + h) − log π
    phs_dist         log(dist + h) − log π
    gbfs             h
    astar_dist       dist + h
    """
    kind: str = "phs_star_scaled"

    def __post_init__(self):
        if self.kind not in EVAL_KINDS:
            raise ValueError(f"Unknown evaluation function {self.kind!r}; expected one of {EVAL_KINDS}.")

    @property
    def is_phs_family(self) -> bool:
        return self.kind in PHS_FAMILY

    @property
    def uses_heuristic(self) -> bool:
        return self.kind != "levin_ts"


def heuristic_factor(node: SearchNode, h_value: float) -> float:
    """
    log η̂ = log(1 + h/dist) − (h/dist)·log π.

    Parameters:
        node (SearchNode): non-root node with dist > 0.
        h_value (float): heuristic at the node's state.

    Returns:
        float: the log heuristic factor, ≥ 0 for h ≥ 0.
    """
    if node.dist <= 0:
        raise ZeroDist(f"Node {node.node_id} has dist {node.dist}; the heuristic factor needs dist > 0.")
    ratio = h_value / node.dist
    return math.log1p(ratio) - ratio * node.log_pi


def pi_star_estimate(node: SearchNode, h_value: float) -> float:
    """log π of the nearest goal below n, ≈ (1 + h/dist)·log π(n)."""
    if node.dist <= 0:
        raise ZeroDist(f"Node {node.node_id} has dist {node.dist}; the goal π estimate needs dist > 0.")
    return (1.0 + h_value / node.dist) * node.log_pi


def unscaled_phs_star(g: int, log_pi: float, h_value: float) -> float:
    """PHS* with exponent 1 + h/g; equals phs_star_scaled whenever dist = g."""
    ratio = h_value / g
    return math.log(g) + math.log1p(ratio) - (1.0 + ratio) * log_pi


def log_phi(fn: EvaluationFunction, node: SearchNode, h_value: float) -> float:
    if h_value < 0:
        raise NegativeHeuristic(f"Heuristic value {h_value} at node {node.node_id} is negative.")
    if node.parent is None or node.g == 0:
        return ROOT_PRIORITY
    if fn.kind == "gbfs":
        return float(h_value)
    if fn.kind == "astar_dist":
        return float(node.dist + h_value)
    if node.log_pi == float("-inf"):
        return float("inf")
    if fn.kind == "levin_ts":
        return math.log(node.g) - node.log_pi
    if fn.kind == "phs_depth":
        return math.log(node.g + h_value) - node.log_pi
    if fn.kind == "phs_dist":
        return math.log(node.dist + h_value) - node.log_pi
    return math.log(node.g) + heuristic_factor(node, h_value) - node.log_pi


def eval_node(fn: EvaluationFunction, node: SearchNode, h_value: float, tier: int = 0) -> PriorityKey:
    """Priority of `node`; the node id doubles as the FIFO tie-breaker."""
    return PriorityKey(tier, log_phi(fn, node, h_value), node.node_id)


def domain_h(domain: Domain, state: Hashable) -> float:
    """Domain heuristic clamped to ≥ 0, exactly 0 on goal states."""
    if domain.is_goal(state):
        return 0.0
    return max(0.0, float(domain.heuristic(state)))
