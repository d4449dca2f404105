import json
from collections import Counter, defaultdict
from typing import Any, Dict, Hashable, Iterable, List, Optional, Tuple

from pydantic import BaseModel, Field

from domains import generate_instance, load_instance
from services.oracle import OracleResult, bfs_from, idastar_from
from utils.config_loader import logging
from utils.errors import OracleBudgetExceeded
from utils.seeding import derive_seed, make_rng

Segment = Tuple[Tuple[str, ...], Hashable]


class DemoTrajectory(BaseModel):
    domain: str
    seed: int
    params: Dict[str, Any]
    actions: List[str] = Field(default_factory=list)
    length: int = 0


class SegmentIndex(dict):
    """(layout key, state) -> list of (segment actions, segment end state)."""

    @property
    def segment_count(self) -> int:
        return sum(len(segments) for segments in self.values())


def _plan(domain, state) -> OracleResult:
    if domain.admissible_heuristic:
        return idastar_from(domain, state)
    return bfs_from(domain, state)


def demo_trajectory(domain_id: str, params: Dict[str, Any], seed: int, noise: float = 0.0,
                    noise_seed: Optional[int] = None) -> DemoTrajectory:
    """
    One recorded solution for the instance (domain_id, params, seed).

    With probability `noise` per step the demonstrator takes a random legal action and
    re-plans from where it lands. A detour is kept only while the state stays solvable and
    the trajectory stays within twice the optimal length.
    """
    instance = generate_instance(domain_id, params, seed)
    domain, state = load_instance(instance)
    optimal = _plan(domain, state)
    if not optimal.solved:
        raise OracleBudgetExceeded(f"No demonstration found for {domain_id}/{seed}.")
    cap = 2 * optimal.optimal_length
    rng = make_rng(seed if noise_seed is None else noise_seed, 1)
    actions: List[str] = []
    plan = list(optimal.plan)
    while plan:
        if noise > 0 and rng.random() < noise:
            successors = domain.successors(state)
            action, detour = successors[int(rng.integers(len(successors)))]
            replan = _plan(domain, detour)
            if replan.solved and len(actions) + 1 + replan.optimal_length <= cap:
                actions.append(action)
                state, plan = detour, list(replan.plan)
                continue
        action = plan.pop(0)
        state = domain.transition(state, action)
        actions.append(action)
    if not domain.is_goal(domain.replay(load_instance(instance)[1], actions)):
        raise OracleBudgetExceeded(f"Demonstration for {domain_id}/{seed} does not reach a goal.")
    return DemoTrajectory(domain=domain_id, seed=seed, params=dict(instance.params), actions=actions, length=len(actions))


def build_demo_dataset(domain: str, params: Dict[str, Any], n_instances: int, seed: int,
                       noise: float = 0.0) -> List[DemoTrajectory]:
    """Demonstrations for instances (base seed, index) for index in 0..n_instances-1."""
    dataset = []
    for index in range(n_instances):
        instance_seed = derive_seed(seed, index)
        dataset.append(demo_trajectory(domain, params, instance_seed, noise, derive_seed(seed, index, 1)))
    logging.info(f"Built {len(dataset)} {domain} demonstrations (noise={noise})")
    return dataset


def save_demo_dataset(dataset: Iterable[DemoTrajectory], path: str) -> int:
    count = 0
    with open(path, "w") as stream:
        for trajectory in dataset:
            stream.write(json.dumps(trajectory.model_dump(), sort_keys=True) + "\n")
            count += 1
    return count


def load_demo_dataset(path: str) -> List[DemoTrajectory]:
    with open(path, "r") as stream:
        return [DemoTrajectory(**json.loads(line)) for line in stream if line.strip()]


def _replayed(trajectory: DemoTrajectory):
    instance = generate_instance(trajectory.domain, trajectory.params, trajectory.seed)
    domain, state = load_instance(instance)
    states = [state]
    for action in trajectory.actions:
        state = domain.transition(state, action)
        if state is None:
            raise OracleBudgetExceeded(f"Demonstration {trajectory.domain}/{trajectory.seed} replays an illegal action.")
        states.append(state)
    return domain, states


def segment_demos(dataset: List[DemoTrajectory], horizon: int) -> SegmentIndex:
    """Cuts every trajectory every `horizon` steps; the last segment may be shorter."""
    index = SegmentIndex()
    for trajectory in dataset:
        domain, states = _replayed(trajectory)
        for start in range(0, len(trajectory.actions), horizon):
            actions = tuple(trajectory.actions[start:start + horizon])
            segments = index.setdefault((domain.static_key, states[start]), [])
            segment = (actions, states[start + len(actions)])
            if segment not in segments:
                segments.append(segment)
    logging.info(f"Indexed {index.segment_count} segments of length <= {horizon} at {len(index)} states")
    return index


def demo_action_counts(dataset: List[DemoTrajectory]) -> Dict[Hashable, Dict[str, int]]:
    """(layout key, state) -> action counts, the table behind the demo_table low-level policy."""
    counts: Dict[Hashable, Counter] = defaultdict(Counter)
    for trajectory in dataset:
        domain, states = _replayed(trajectory)
        for state, action in zip(states, trajectory.actions):
            counts[(domain.static_key, state)][action] += 1
    return {key: dict(counter) for key, counter in counts.items()}
