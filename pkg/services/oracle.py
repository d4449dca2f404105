from collections import OrderedDict, deque
from typing import Dict, Hashable, List, Optional, Set, Tuple

from pydantic import BaseModel, Field

from domains import Domain, Instance, load_instance
from utils.config_loader import BFS_MAX_STATES, IDASTAR_MAX_GENERATED, logging
from utils.errors import InadmissibleHeuristic, OracleBudgetExceeded

_DISTANCE_CACHE_SIZE = 8
_distance_cache: "OrderedDict[Hashable, Tuple[Set[Hashable], Dict[Hashable, int]]]" = OrderedDict()


class OracleResult(BaseModel):
    solved: bool
    optimal_length: Optional[int] = None
    plan: List[str] = Field(default_factory=list)
    visited_count: int = 0


def bfs_from(domain: Domain, start: Hashable, max_states: Optional[int] = None) -> OracleResult:
    """Breadth-first search over the domain graph; the first goal dequeued is optimal."""
    max_states = BFS_MAX_STATES if max_states is None else max_states
    parents: Dict[Hashable, Tuple[Optional[Hashable], Optional[str]]] = {start: (None, None)}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        if domain.is_goal(state):
            plan = []
            while parents[state][0] is not None:
                state, action = parents[state]
                plan.append(action)
            plan.reverse()
            return OracleResult(solved=True, optimal_length=len(plan), plan=plan, visited_count=len(parents))
        for action, successor in domain.successors(state):
            if successor in parents:
                continue
            parents[successor] = (state, action)
            if len(parents) > max_states:
                raise OracleBudgetExceeded(f"BFS exceeded {max_states} states.")
            queue.append(successor)
    return OracleResult(solved=False, visited_count=len(parents))


def bfs_solve(instance: Instance, max_states: Optional[int] = None) -> OracleResult:
    domain, start = load_instance(instance)
    return bfs_from(domain, start, max_states)


def idastar_from(domain: Domain, start: Hashable, allow_inadmissible: bool = False,
                 max_generated: Optional[int] = None) -> OracleResult:
    """
    Iterative-deepening A* with cycle checking along the current path.

    Optimal only when the domain heuristic is admissible; other domains are refused unless
    `allow_inadmissible` is set.
    """
    if not domain.admissible_heuristic and not allow_inadmissible:
        raise InadmissibleHeuristic(f"The {domain.name} heuristic is not admissible; IDA* would not be optimal.")
    max_generated = IDASTAR_MAX_GENERATED if max_generated is None else max_generated
    generated = 0
    path_states = [start]
    on_path = {start}
    plan: List[str] = []

    def bounded(g: int, threshold: float) -> float:
        nonlocal generated
        state = path_states[-1]
        f = g + domain.heuristic(state)
        if f > threshold:
            return f
        if domain.is_goal(state):
            return -1.0
        next_threshold = float("inf")
        for action, successor in domain.successors(state):
            generated += 1
            if generated > max_generated:
                raise OracleBudgetExceeded(f"IDA* exceeded {max_generated} generated nodes.")
            if successor in on_path:
                continue
            path_states.append(successor)
            on_path.add(successor)
            plan.append(action)
            found = bounded(g + 1, threshold)
            if found < 0:
                return found
            next_threshold = min(next_threshold, found)
            plan.pop()
            on_path.discard(path_states.pop())
        return next_threshold

    threshold = domain.heuristic(start)
    while True:
        found = bounded(0, threshold)
        if found < 0:
            return OracleResult(solved=True, optimal_length=len(plan), plan=list(plan), visited_count=generated)
        if found == float("inf"):
            return OracleResult(solved=False, visited_count=generated)
        threshold = found


def idastar_solve(instance: Instance, allow_inadmissible: bool = False,
                  max_generated: Optional[int] = None) -> OracleResult:
    domain, start = load_instance(instance)
    return idastar_from(domain, start, allow_inadmissible, max_generated)


def distance_map(domain: Domain, start: Hashable, max_states: Optional[int] = None) -> Dict[Hashable, int]:
    """
    Exact distance-to-goal for every state reachable from `start`.

    Enumerates the reachable graph forward, then runs BFS backwards from its goal states.
    States that cannot reach a goal are absent.
    """
    return _reachable_distances(domain, start, max_states)[1]


def _reachable_distances(domain: Domain, start: Hashable,
                         max_states: Optional[int] = None) -> Tuple[Set[Hashable], Dict[Hashable, int]]:
    max_states = BFS_MAX_STATES if max_states is None else max_states
    predecessors: Dict[Hashable, List[Hashable]] = {start: []}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        for _, successor in domain.successors(state):
            if successor not in predecessors:
                predecessors[successor] = []
                if len(predecessors) > max_states:
                    raise OracleBudgetExceeded(f"Distance map exceeded {max_states} states.")
                queue.append(successor)
            predecessors[successor].append(state)

    distances = {state: 0 for state in predecessors if domain.is_goal(state)}
    queue = deque(distances)
    while queue:
        state = queue.popleft()
        for previous in predecessors[state]:
            if previous not in distances:
                distances[previous] = distances[state] + 1
                queue.append(previous)
    logging.debug(f"Distance map for {domain.name}: {len(predecessors)} reachable, {len(distances)} solvable")
    return set(predecessors), distances


def cached_distances(domain: Domain, state: Hashable) -> Dict[Hashable, int]:
    """Distance map for the layout of `domain`, rebuilt when `state` was not enumerated yet."""
    key = domain.static_key
    entry = _distance_cache.get(key)
    if entry is None or state not in entry[0]:
        entry = _reachable_distances(domain, state)
        _distance_cache[key] = entry
        while len(_distance_cache) > _DISTANCE_CACHE_SIZE:
            _distance_cache.popitem(last=False)
    _distance_cache.move_to_end(key)
    return entry[1]


def optimal_actions_at(domain: Domain, state: Hashable, distances: Dict[Hashable, int]) -> List[str]:
    """Actions that start some optimal plan from `state`; empty at goals and dead ends."""
    here = distances.get(state)
    if not here:
        return []
    return [a for a, successor in domain.successors(state) if distances.get(successor) == here - 1]


def optimal_first_actions(instance: Instance) -> List[str]:
    domain, start = load_instance(instance)
    return optimal_actions_at(domain, start, distance_map(domain, start))
