import math
from typing import Hashable, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel

from domains.base import Domain
from services.heuristics import EvaluationFunction, domain_h, log_phi
from services.node_store import NodeStore, SearchNode
from services.policies import LowLevelPolicy
from services.search_core import SearchResult
from utils.config_loader import EPS_TO_ZERO, logging
from utils.errors import InvalidWitness, MissingInstrumentation

SLACK = 1e-9
NEG_INF = float("-inf")
TO_ZERO_NOTE = "epsilon -> 0 drives the witness probability to zero"


class BoundReport(BaseModel):
    """Measured search loss against the upper bounds, all bounds also kept as logs."""
    expansions: int
    applicable: bool = True
    dedup: bool = False
    log_bound_general: Optional[float] = None
    log_bound_witness: Optional[float] = None
    log_bound_policy: Optional[float] = None
    bound_general: Optional[float] = None
    bound_witness: Optional[float] = None
    bound_policy: Optional[float] = None
    holds_general: Optional[bool] = None
    holds_witness: Optional[bool] = None
    holds_policy: Optional[bool] = None
    fringe_size: int = 0
    fringe_mass: Optional[float] = None
    witness: Optional[List[str]] = None
    approximate: bool = False
    unbounded: bool = False
    note: str = ""


def within(loss: int, log_bound: float) -> bool:
    """loss ≤ exp(log_bound) up to a relative slack."""
    if loss <= 0:
        return True
    return math.log(loss) <= log_bound + SLACK


def _exp(log_value: float) -> Optional[float]:
    if log_value == NEG_INF:
        return 0.0
    try:
        return math.exp(log_value)
    except OverflowError:
        return None


def phi_plus(tree: NodeStore, node: Union[int, SearchNode]) -> float:
    """
    log φ⁺(n): running max of log φ over the root path of n.

    The root keeps its sentinel value. log η⁺ = log φ⁺ + log π − log g.
    """
    node_id = node.node_id if isinstance(node, SearchNode) else node
    values = [n.priority.log_phi for n in tree.path(node_id) if n.priority is not None]
    if not values:
        raise MissingInstrumentation(f"Node {node_id} carries no priority.")
    return max(values)


def log_eta_plus(tree: NodeStore, node: SearchNode) -> float:
    return phi_plus(tree, node) + node.log_pi - math.log(node.g)


def _fringe_log_sum(tree: NodeStore, fringe: Sequence[int]) -> float:
    """log Σ_{n in fringe, g > 0} π(n)/η⁺(n), i.e. log Σ g(n)/φ⁺(n)."""
    terms = [math.log(tree.nodes[i].g) - phi_plus(tree, i) for i in fringe if tree.nodes[i].g > 0]
    if not terms:
        return NEG_INF
    return float(np.logaddexp.reduce(np.array(terms)))


def _fringe_mass(tree: NodeStore, fringe: Sequence[int]) -> float:
    return float(sum(math.exp(tree.nodes[i].log_pi) for i in fringe))


def _not_applicable(result: SearchResult, note: str, **fields) -> BoundReport:
    return BoundReport(expansions=result.search_loss, applicable=False, dedup=result.dedup, note=note, **fields)


def _check_run(result: SearchResult) -> Optional[str]:
    if not EvaluationFunction(result.eval_kind).is_phs_family:
        return f"{result.eval_kind} is not a PHS evaluation function"
    if result.tiered:
        return "tiered (to-zero) ordering has no finite bound"
    return None


def check_fringe_bound(result: SearchResult, tree: NodeStore) -> BoundReport:
    """
    L ≤ φ⁺(solution) · Σ_{n ∈ fringe} π(n)/η⁺(n), evaluated in log space.

    Parameters:
        result (SearchResult): a solved, instrumented run.
        tree (NodeStore): the tree that run grew.

    Returns:
        BoundReport: with bound_general filled in.
    """
    if not result.solved:
        return _not_applicable(result, "unsolved run")
    if result.solution_node is None or not result.fringe_at_solution:
        raise MissingInstrumentation("The run carries no fringe snapshot; search with instrument=True.")
    note = _check_run(result)
    fringe = result.fringe_at_solution
    if note:
        return _not_applicable(result, note, fringe_size=len(fringe))
    log_bound = phi_plus(tree, result.solution_node) + _fringe_log_sum(tree, fringe)
    return BoundReport(
        expansions=result.search_loss,
        dedup=result.dedup,
        log_bound_general=log_bound,
        bound_general=_exp(log_bound),
        holds_general=within(result.search_loss, log_bound),
        fringe_size=len(fringe),
        fringe_mass=_fringe_mass(tree, fringe),
    )


def witness_path(domain: Domain, initial: Hashable, witness: Sequence[str]) -> List[Hashable]:
    """States visited by the witness, initial included; it must end on a goal."""
    states = [initial]
    for action in witness:
        nxt = domain.transition(states[-1], action)
        if nxt is None:
            raise InvalidWitness(f"Witness action {action!r} is illegal after {len(states) - 1} steps.")
        states.append(nxt)
    if not domain.is_goal(states[-1]):
        raise InvalidWitness("The witness does not end on a goal state.")
    return states


def witness_log_pi(domain: Domain, states: Sequence[Hashable], witness: Sequence[str],
                   epsilon: float, low_policy: LowLevelPolicy) -> List[float]:
    """log π of every witness prefix: N·log ε + Σ log π_low(a_i | s_i)."""
    log_eps = math.log(epsilon)
    log_pis = [0.0]
    for state, action in zip(states, witness):
        log_pis.append(log_pis[-1] + log_eps + low_policy.action_log_prob(domain, state, action))
    return log_pis


def _witness_phi_plus(domain: Domain, states: Sequence[Hashable], log_pis: Sequence[float],
                      eval_fn: EvaluationFunction) -> float:
    best = NEG_INF
    for depth in range(1, len(states)):
        node = SearchNode(depth, depth, depth - 1, None, depth, depth, log_pis[depth], depth)
        best = max(best, log_phi(eval_fn, node, domain_h(domain, states[depth])))
    return best


def check_witness_bound(result: SearchResult, tree: NodeStore, domain: Domain, initial: Hashable,
                        witness: Sequence[str], epsilon: Union[float, str],
                        low_policy: LowLevelPolicy) -> BoundReport:
    """
    Bound through the pure low-level witness node reached by `witness`.

    φ⁺ of the witness node is evaluated along the witness. Its fringe is the fringe of the
    run, exact only when the run returned the witness itself; otherwise the report is approximate.
    """
    states = witness_path(domain, initial, witness)
    if epsilon == EPS_TO_ZERO:
        return _not_applicable(result, TO_ZERO_NOTE, witness=list(witness),
                               unbounded=True)
    note = _check_run(result)
    if note:
        return _not_applicable(result, note, witness=list(witness))
    if not result.fringe_at_solution:
        raise MissingInstrumentation("The run carries no fringe snapshot; search with instrument=True.")
    if not witness:
        return BoundReport(expansions=result.search_loss, dedup=result.dedup, log_bound_witness=NEG_INF,
                           bound_witness=0.0, holds_witness=within(result.search_loss, NEG_INF), witness=[])
    log_pis = witness_log_pi(domain, states, witness, epsilon, low_policy)
    eval_fn = EvaluationFunction(result.eval_kind)
    fringe = result.fringe_at_solution
    log_bound = _witness_phi_plus(domain, states, log_pis, eval_fn) + _fringe_log_sum(tree, fringe)
    exact = (result.solved and list(result.low_level_plan) == list(witness)
             and result.solution_breakdown.get("subgoal", 0) == 0)
    return BoundReport(
        expansions=result.search_loss,
        dedup=result.dedup,
        log_bound_witness=log_bound,
        bound_witness=_exp(log_bound),
        holds_witness=within(result.search_loss, log_bound),
        fringe_size=len(fringe),
        fringe_mass=_fringe_mass(tree, fringe),
        witness=list(witness),
        approximate=not exact,
    )


def check_policy_bound(result: SearchResult, domain: Domain, initial: Hashable, witness: Sequence[str],
                       epsilon: Union[float, str], low_policy: LowLevelPolicy) -> BoundReport:
    """L ≤ N/π(witness) with π(witness) = ε^N ∏ π_low(a_i | s_i); for runs without a heuristic."""
    states = witness_path(domain, initial, witness)
    if epsilon == EPS_TO_ZERO:
        return _not_applicable(result, TO_ZERO_NOTE, witness=list(witness),
                               unbounded=True)
    if result.eval_kind != "levin_ts" or result.tiered:
        return _not_applicable(result, f"{result.eval_kind} run is not heuristic-free", witness=list(witness))
    if not witness:
        return BoundReport(expansions=result.search_loss, dedup=result.dedup, log_bound_policy=NEG_INF,
                           bound_policy=0.0, holds_policy=within(result.search_loss, NEG_INF), witness=[])
    log_pi = witness_log_pi(domain, states, witness, epsilon, low_policy)[-1]
    log_bound = math.log(len(witness)) - log_pi
    return BoundReport(
        expansions=result.search_loss,
        dedup=result.dedup,
        log_bound_policy=log_bound,
        bound_policy=_exp(log_bound),
        holds_policy=within(result.search_loss, log_bound),
        witness=list(witness),
    )


def merge_reports(*reports: BoundReport) -> BoundReport:
    """One report carrying every bound that was computed."""
    merged = reports[0].model_dump()
    for report in reports[1:]:
        for name, value in report.model_dump().items():
            if value is not None and merged.get(name) in (None, False, "", 0):
                merged[name] = value
    merged["applicable"] = any(r.applicable for r in reports)
    merged["note"] = "; ".join(r.note for r in reports if r.note)
    merged_report = BoundReport(**merged)
    violated = [name for name in ("general", "witness", "policy")
                if getattr(merged_report, f"holds_{name}") is False]
    if violated:
        logging.warning(f"Bound violated ({', '.join(violated)}): loss {merged_report.expansions}")
    return merged_report
