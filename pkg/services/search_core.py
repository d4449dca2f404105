import heapq
import math
import time
from typing import Dict, Hashable, List, NamedTuple, Optional, Sequence, Set, Tuple

import psutil
from pydantic import BaseModel, Field

from domains import Domain, Instance, load_instance
from services.heuristics import EvaluationFunction, domain_h, eval_node
from services.node_store import Edge, NodeStore, PriorityKey, SearchNode
from services.policies import ExpansionContext, MixedPolicy
from utils.config_loader import MEMORY_CHECK_EVERY, TRACE_BUCKET, logging
from utils.errors import InvalidInstance
from utils.seeding import stable_hash

SOLVED = "solved"
BUDGET_EXHAUSTED = "budget_exhausted"
TIMEOUT = "timeout"
OUT_OF_MEMORY = "out_of_memory"
EXHAUSTED = "exhausted"


class ChildSpec(NamedTuple):
    edge: Edge
    target: Hashable
    log_prob: float
    tier_step: int


class SearchBudget(BaseModel):
    """Any cap left as None is unlimited."""
    max_expansions: Optional[int] = None
    max_seconds: Optional[float] = None
    max_nodes: Optional[int] = None
    max_memory_mb: Optional[float] = None


class SearchResult(BaseModel):
    solved: bool
    status: str
    solution_node: Optional[int] = None
    low_level_plan: List[str] = Field(default_factory=list)
    expansions: int = 0
    search_loss: int = 0
    generated: int = 0
    env_steps: int = 0
    ll_expansions: int = 0
    ll_expansion_trace: List[float] = Field(default_factory=list)
    fringe_at_solution: List[int] = Field(default_factory=list)
    solution_breakdown: Dict[str, int] = Field(default_factory=lambda: {"low": 0, "subgoal": 0})
    solution_g: Optional[int] = None
    solution_dist: Optional[int] = None
    dedup: bool = True
    eval_kind: str = ""
    tiered: bool = False
    wall_clock: float = 0.0


class ChildExpander:
    """
    Produces the children of a state in the hybrid action space.

    Low-level successors come from the domain transition function (skipped when
    `low_level` is False); subgoal children come from the attached generator, seeded
    per state so proposals never depend on expansion order.
    """

    def __init__(self, domain: Domain, policy: MixedPolicy, generator=None, low_level: bool = True, seed: int = 0):
        self.domain = domain
        self.policy = policy
        self.generator = generator
        self.low_level = low_level
        self.seed = seed

    def context(self, state: Hashable) -> Tuple[ExpansionContext, int]:
        """Returns the expansion context at `state` and the transition calls it took."""
        low_edges, low_targets, steps = [], [], 0
        if self.low_level:
            for action in self.domain.actions:
                steps += 1
                successor = self.domain.transition(state, action)
                if successor is not None:
                    low_edges.append(Edge.low(action))
                    low_targets.append(successor)
        sub_edges, sub_targets = [], []
        if self.generator is not None:
            for proposal in self.generator.propose(state, self.domain, stable_hash((self.seed, state))):
                sub_edges.append(Edge.subgoal(proposal.proposal_id, tuple(proposal.actions)))
                sub_targets.append(proposal.target)
            steps += self.generator.last_steps
        context = ExpansionContext(
            self.domain, state, tuple(low_edges), tuple(low_targets), tuple(sub_edges), tuple(sub_targets)
        )
        return context, steps

    def children(self, state: Hashable) -> Tuple[List[ChildSpec], int]:
        """
        Child edges with their conditional log-probabilities and tier steps.

        Edges without mass are dropped. When two edges reach the same state only the more
        probable one survives; in the ε → 0 limit an edge without the ε factor beats one
        with it before probabilities are compared. On a tie the earlier (low-level) edge wins.
        """
        context, steps = self.context(state)
        log_probs = self.policy.edge_log_probs(context)
        tier_steps = self.policy.tier_steps(context)
        best: Dict[Hashable, ChildSpec] = {}
        for edge, target in zip(context.edges, context.targets):
            child = ChildSpec(edge, target, log_probs[edge], tier_steps[edge])
            if child.log_prob == -math.inf:
                continue
            current = best.get(target)
            if current is None or self._rank(child) > self._rank(current):
                best[target] = child
        return list(best.values()), steps

    def _rank(self, child: ChildSpec) -> Tuple[float, ...]:
        if self.policy.to_zero:
            return -child.tier_step, child.log_prob
        return (child.log_prob,)


def expand(node: SearchNode, expander: ChildExpander, store: NodeStore,
           closed: Optional[Set[int]] = None) -> Tuple[List[SearchNode], int]:
    """
    Creates the children of `node` in `store`.

    Parameters:
        node (SearchNode): a non-goal node of the tree.
        expander (ChildExpander): source of low-level and subgoal edges.
        store (NodeStore): the tree being grown.
        closed (Optional[Set[int]]): interned states whose children are pruned.

    Returns:
        Tuple:
            - List[SearchNode]: the new children, possibly empty at a dead end.
            - int: transition calls spent.
    """
    specs, steps = expander.children(store.state_of(node))
    children = []
    for spec in specs:
        if closed is not None and store.intern(spec.target) in closed:
            continue
        children.append(store.add(
            spec.target, node.node_id, spec.edge,
            g=node.g + 1,
            dist=node.dist + len(spec.edge.actions),
            log_pi=node.log_pi + spec.log_prob,
            ll_edges=node.ll_edges + (1 if spec.edge.is_low else 0),
            tier=node.tier + spec.tier_step,
        ))
    return children, steps


def goal_test(state: Hashable, instance: Instance) -> bool:
    domain, _ = load_instance(instance)
    return domain.is_goal(state)


def reconstruct_plan(solution: int, tree: NodeStore) -> List[str]:
    """Root-to-solution concatenation of every edge's low-level actions."""
    plan: List[str] = []
    for node in tree.path(solution):
        if node.edge is not None:
            plan.extend(node.edge.actions)
    return plan


def fringe_nodes(tree: NodeStore, expanded: Sequence[int], solution: Optional[int] = None) -> List[int]:
    """Members of expanded ∪ {solution} none of whose children are members."""
    members = set(expanded)
    if solution is not None:
        members.add(solution)
    parents = {tree.nodes[i].parent for i in members if tree.nodes[i].parent is not None}
    return sorted(members - parents)


def _rss_mb() -> float:
    return psutil.Process().memory_info().rss / float(1 << 20)


def search(instance: Instance, expander: ChildExpander, eval_fn: EvaluationFunction, budget: SearchBudget,
           dedup: bool = True, instrument: bool = True, store: Optional[NodeStore] = None) -> SearchResult:
    """Best-first search from the instance's initial state; see `search_from`."""
    instance_domain, initial = load_instance(instance)
    if instance_domain.static_key != expander.domain.static_key:
        raise InvalidInstance(f"Instance {instance.domain}/{instance.seed} does not match the expander's domain.")
    return search_from(initial, expander, eval_fn, budget, dedup, instrument, store,
                       label=f"{instance.domain}/{instance.seed}")


def search_from(initial: Hashable, expander: ChildExpander, eval_fn: EvaluationFunction, budget: SearchBudget,
                dedup: bool = True, instrument: bool = True, store: Optional[NodeStore] = None,
                label: str = "") -> SearchResult:
    """
    Best-first search from `initial` in the expander's domain.

    Pops the minimum PriorityKey, tests it for the goal, then expands it. Every pop counts
    as an expansion, the goal pop included; `search_loss` excludes the goal pop. With
    `dedup` a state is expanded at most once and children on closed states are pruned.
    """
    domain = expander.domain
    label = label or domain.name
    started = time.perf_counter()
    store = store if store is not None else NodeStore()
    to_zero = expander.policy.to_zero
    root = store.add_root(initial)
    root.h = domain_h(domain, initial)
    root.priority = eval_node(eval_fn, root, root.h)
    queue: List[PriorityKey] = [root.priority]
    closed: Set[int] = set()
    expanded: List[int] = []
    expansions = ll_expansions = generated = env_steps = 0
    trace: List[float] = []
    status, solution = EXHAUSTED, None

    try:
        while queue:
            if budget.max_expansions is not None and expansions >= budget.max_expansions:
                status = BUDGET_EXHAUSTED
                break
            if budget.max_seconds is not None and time.perf_counter() - started > budget.max_seconds:
                status = TIMEOUT
                break
            node = store.nodes[heapq.heappop(queue).fifo]
            if dedup:
                if node.state_id in closed:
                    continue
                closed.add(node.state_id)
            expansions += 1
            node.popped_at = expansions
            if node.edge is not None and node.edge.is_low:
                ll_expansions += 1
            if instrument and expansions % TRACE_BUCKET == 0:
                trace.append(round(ll_expansions / expansions, 6))
            if domain.is_goal(store.state_of(node)):
                status, solution = SOLVED, node
                break

            node.expanded = True
            expanded.append(node.node_id)
            children, steps = expand(node, expander, store, closed if dedup else None)
            env_steps += steps
            generated += len(children)
            for child in children:
                child.h = domain_h(domain, store.state_of(child))
                child.priority = eval_node(eval_fn, child, child.h, child.tier if to_zero else 0)
                heapq.heappush(queue, child.priority)

            if budget.max_nodes is not None and len(store) > budget.max_nodes:
                status = OUT_OF_MEMORY
                break
            if budget.max_memory_mb is not None and expansions % MEMORY_CHECK_EVERY == 0:
                if _rss_mb() > budget.max_memory_mb:
                    status = OUT_OF_MEMORY
                    break
    except MemoryError:
        status = OUT_OF_MEMORY

    if status == OUT_OF_MEMORY:
        logging.warning(f"Search on {label} ran out of memory after {expansions} expansions")

    result = SearchResult(
        solved=solution is not None,
        status=status,
        expansions=expansions,
        search_loss=expansions - 1 if solution is not None else expansions,
        generated=generated,
        env_steps=env_steps,
        ll_expansions=ll_expansions,
        ll_expansion_trace=trace,
        dedup=dedup,
        eval_kind=eval_fn.kind,
        tiered=to_zero,
    )
    if solution is not None:
        path = store.path(solution.node_id)
        low = sum(1 for n in path if n.edge is not None and n.edge.is_low)
        result.solution_node = solution.node_id
        result.low_level_plan = reconstruct_plan(solution.node_id, store)
        result.solution_breakdown = {"low": low, "subgoal": len(path) - 1 - low}
        result.solution_g = solution.g
        result.solution_dist = solution.dist
    if instrument:
        result.fringe_at_solution = fringe_nodes(store, expanded, result.solution_node)
    result.wall_clock = time.perf_counter() - started
    logging.debug(f"Search {label} finished: {status}, {expansions} expansions")
    return result
