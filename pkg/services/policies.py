import math
from dataclasses import dataclass, field
from typing import Any, Dict, Hashable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from domains.base import Domain
from services.node_store import Edge
from utils.config_loader import EPS_TO_ZERO
from utils.errors import EdgeNotInContext, InvalidEpsilon, NoLegalEdges
from utils.validator import validate_epsilon

LOG_ZERO = float("-inf")


def log_softmax(scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    return scores - np.logaddexp.reduce(scores)


@dataclass(frozen=True)
class ExpansionContext:
    """Everything one expansion offers: the legal low-level moves and the valid proposals at `state`."""
    domain: Domain
    state: Hashable
    low_edges: Tuple[Edge, ...]
    low_targets: Tuple[Hashable, ...]
    sub_edges: Tuple[Edge, ...]
    sub_targets: Tuple[Hashable, ...]

    @property
    def edges(self) -> Tuple[Edge, ...]:
        return self.low_edges + self.sub_edges

    @property
    def targets(self) -> Tuple[Hashable, ...]:
        return self.low_targets + self.sub_targets


@dataclass(frozen=True)
class LowLevelPolicy:
    """
    Policy over primitive actions. Normalizes over the legal actions at a state and is strictly positive on them.

    kinds: uniform | boltzmann_heuristic (scores −h(T(s, a)) / temperature) |
    demo_table (add-one smoothed action counts from demonstrations, uniform when unseen).
    """
    kind: str = "uniform"
    temperature: float = 1.0
    table: Mapping[Any, Mapping[str, int]] = field(default_factory=dict)

    def log_probs(self, domain: Domain, state: Hashable, actions: Sequence[str],
                  successors: Sequence[Hashable]) -> np.ndarray:
        n = len(actions)
        if n == 0:
            return np.zeros(0)
        if self.kind == "boltzmann_heuristic":
            scores = np.array([-max(0.0, domain.heuristic(s)) for s in successors]) / self.temperature
            return log_softmax(scores)
        if self.kind == "demo_table":
            counts = self.table.get((domain.static_key, state))
            if counts:
                weights = np.array([counts.get(a, 0) + 1.0 for a in actions])
                return np.log(weights) - math.log(weights.sum())
        return np.full(n, -math.log(n))

    def action_log_prob(self, domain: Domain, state: Hashable, action: str) -> float:
        """log π(action | state) over the legal actions at `state`."""
        successors = domain.successors(state)
        actions = [a for a, _ in successors]
        if action not in actions:
            return LOG_ZERO
        log_probs = self.log_probs(domain, state, actions, [s for _, s in successors])
        return float(log_probs[actions.index(action)])


@dataclass(frozen=True)
class HighLevelPolicy:
    """
    Policy over the proposals returned at a state.

    kinds: uniform | boltzmann_progress (scores (h(s) − h(s_g)) / temperature).
    """
    kind: str = "uniform"
    temperature: float = 1.0

    def log_probs(self, domain: Domain, state: Hashable, targets: Sequence[Hashable]) -> np.ndarray:
        n = len(targets)
        if n == 0:
            return np.zeros(0)
        if self.kind == "boltzmann_progress":
            h_here = max(0.0, domain.heuristic(state))
            scores = np.array([h_here - max(0.0, domain.heuristic(t)) for t in targets]) / self.temperature
            return log_softmax(scores)
        return np.full(n, -math.log(n))


class MixedPolicy:
    """
    The ε-mixed hybrid policy.

    Low-level edges get ε·π_low, subgoal edges (1−ε)·π_high. When one support is empty the
    other carries the whole mass. With ε = EPS_TO_ZERO the ε factor is dropped (each edge
    carries only its component probability) and ordering is left to the queue tier.
    """

    def __init__(self, epsilon: Union[float, str], low: Optional[LowLevelPolicy] = None,
                 high: Optional[HighLevelPolicy] = None):
        is_valid, error_message = validate_epsilon(epsilon)
        if not is_valid:
            raise InvalidEpsilon(error_message)
        self.epsilon = epsilon
        self.low = low or LowLevelPolicy()
        self.high = high or HighLevelPolicy()

    @property
    def to_zero(self) -> bool:
        return self.epsilon == EPS_TO_ZERO

    def __repr__(self) -> str:
        return f"MixedPolicy(epsilon={self.epsilon!r}, low={self.low.kind}, high={self.high.kind})"

    def edge_log_probs(self, context: ExpansionContext) -> Dict[Edge, float]:
        actions = [edge.actions[0] for edge in context.low_edges]
        low = self.low.log_probs(context.domain, context.state, actions, context.low_targets)
        high = self.high.log_probs(context.domain, context.state, context.sub_targets)
        if context.low_edges and context.sub_edges and not self.to_zero:
            low = low + math.log(self.epsilon)
            high = high + (math.log1p(-self.epsilon) if self.epsilon < 1 else LOG_ZERO)
        result = {edge: float(lp) for edge, lp in zip(context.low_edges, low)}
        result.update({edge: float(lp) for edge, lp in zip(context.sub_edges, high)})
        return result

    def tier_steps(self, context: ExpansionContext) -> Dict[Edge, int]:
        """1 for an edge that carries the ε factor (a low-level edge beside proposals), else 0."""
        mixed = 1 if context.low_edges and context.sub_edges else 0
        steps = {edge: mixed for edge in context.low_edges}
        steps.update({edge: 0 for edge in context.sub_edges})
        return steps


def edge_log_prob(policy: MixedPolicy, state: Hashable, edge: Edge, context: ExpansionContext) -> float:
    """log π(child | state) for one edge of the expansion; −inf for an edge with no mass."""
    log_probs = policy.edge_log_probs(context)
    if edge not in log_probs:
        raise EdgeNotInContext(f"Edge {edge} is not offered at state {state}.")
    return log_probs[edge]


def normalized_distribution(policy: MixedPolicy, state: Hashable, context: ExpansionContext) -> Dict[Edge, float]:
    """Probabilities of every edge with positive mass at `state`."""
    if not context.edges:
        raise NoLegalEdges(f"No legal edges at state {state}.")
    return {edge: math.exp(lp) for edge, lp in policy.edge_log_probs(context).items() if lp > LOG_ZERO}
