from typing import Dict, Hashable, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from domains.base import INVERSE, Domain
from services.oracle import cached_distances, optimal_actions_at
from utils.config_loader import logging
from utils.errors import ConfigError
from utils.seeding import make_rng, unit_interval

FIRST_ACTION_WRONG = "first_action_wrong"
AWAY_FROM_GOAL = "away_from_goal"


class SubgoalProposal(NamedTuple):
    proposal_id: int
    target: Hashable
    actions: Tuple[str, ...]
    valid: bool = True


class GeneratorConfig(BaseModel):
    """
    Subgoal generator settings.

    kind: null | macro | greedy_rollout | demo_segment | adversarial
    horizon: longest action sequence a proposal may carry (H).
    codebook_size: most proposals returned per state (K).
    """
    kind: str = "null"
    horizon: int = 8
    codebook_size: int = 3
    catalog: List[List[str]] = Field(default_factory=list)
    lengths: List[int] = Field(default_factory=lambda: [2, 4, 8])
    mode: str = FIRST_ACTION_WRONG
    coverage: float = 1.0
    dataset: Optional[str] = None
    mask_seed: int = 0
    lookahead_states: int = 5000


class SubgoalGenerator:
    """
    Base generator: subclasses yield candidate action sequences, this class rolls them out.

    A candidate survives when it is 1..H actions long, every action is legal, and it moves
    the state. Candidates reaching the same target keep the shortest sequence; at most K
    proposals are returned, numbered in candidate order.
    """
    kind = "null"

    def __init__(self, horizon: int = 8, codebook_size: int = 3):
        self.horizon = horizon
        self.codebook_size = codebook_size
        # transition calls spent by the last propose
        self.last_steps = 0

    def candidates(self, state: Hashable, domain: Domain, seed: int) -> Iterable[Sequence[str]]:
        return ()

    def accept(self, domain: Domain, target: Hashable) -> bool:
        return True

    def propose(self, state: Hashable, domain: Domain, seed: int) -> List[SubgoalProposal]:
        best: Dict[Hashable, Tuple[str, ...]] = {}
        self.last_steps = 0
        for actions in self.candidates(state, domain, seed):
            actions = tuple(actions)
            if not 1 <= len(actions) <= self.horizon:
                continue
            self.last_steps += len(actions)
            target = domain.replay(state, actions)
            if target is None or target == state or not self.accept(domain, target):
                continue
            if target not in best or len(actions) < len(best[target]):
                best[target] = actions
        proposals = list(best.items())[:self.codebook_size]
        return [SubgoalProposal(i, target, actions) for i, (target, actions) in enumerate(proposals)]


class NullGenerator(SubgoalGenerator):
    kind = "null"


class MacroGenerator(SubgoalGenerator):
    """Replays a fixed catalog of action sequences (straight runs of each length when none given)."""
    kind = "macro"

    def __init__(self, catalog: Sequence[Sequence[str]] = (), lengths: Sequence[int] = (2, 4, 8),
                 horizon: int = 8, codebook_size: int = 3, actions: Sequence[str] = ("N", "E", "S", "W")):
        super().__init__(horizon, codebook_size)
        if catalog:
            self.catalog = [tuple(c) for c in catalog]
        else:
            self.catalog = [(a,) * n for n in sorted(lengths) if n <= horizon for a in actions]

    def candidates(self, state, domain, seed):
        return self.catalog


class GreedyRolloutGenerator(SubgoalGenerator):
    """
    Heuristic lookahead: one proposal per length n, the best state reachable within n moves.

    States are enumerated breadth-first up to the longest length (at most `max_states` of
    them). Best means a goal first, then the lowest heuristic, then the fewest moves, then
    discovery order. The lookahead stops at the first layer holding a goal.
    """
    kind = "greedy_rollout"

    def __init__(self, lengths: Sequence[int] = (2, 4, 8), horizon: int = 8, codebook_size: int = 3,
                 max_states: int = 5000):
        super().__init__(horizon, codebook_size)
        self.lengths = sorted(n for n in lengths if 1 <= n <= horizon) or [horizon]
        self.max_states = max_states

    def best_by_length(self, state: Hashable, domain: Domain) -> Dict[int, List[str]]:
        parents: Dict[Hashable, Tuple[Hashable, str]] = {state: (None, "")}
        frontier = [state]
        best: Optional[Tuple[Tuple[int, float, int, int], Hashable]] = None
        chosen: Dict[int, List[str]] = {}
        order = 0
        for depth in range(1, self.lengths[-1] + 1):
            layer = []
            for current in frontier:
                self.last_steps += len(domain.actions)
                for action, successor in domain.successors(current):
                    if successor in parents or len(parents) >= self.max_states:
                        continue
                    parents[successor] = (current, action)
                    layer.append(successor)
                    goal = domain.is_goal(successor)
                    key = (0 if goal else 1, 0.0 if goal else float(domain.heuristic(successor)), depth, order)
                    order += 1
                    if best is None or key < best[0]:
                        best = (key, successor)
            frontier = layer
            if depth in self.lengths and best is not None:
                chosen[depth] = self._path(parents, best[1])
            if not frontier or (best is not None and best[0][0] == 0):
                break
        if best is not None:
            for n in self.lengths:
                chosen.setdefault(n, self._path(parents, best[1]))
        return chosen

    @staticmethod
    def _path(parents: Dict[Hashable, Tuple[Hashable, str]], target: Hashable) -> List[str]:
        actions = []
        while parents[target][0] is not None:
            target, action = parents[target]
            actions.append(action)
        return actions[::-1]

    def candidates(self, state, domain, seed):
        chosen = self.best_by_length(state, domain)
        return [chosen[n] for n in self.lengths if n in chosen]


class DemoSegmentGenerator(SubgoalGenerator):
    """
    Replays demonstration segments starting at the current state.

    A (layout, state) key is served only when its seeded mask value falls below the
    coverage ρ, so ρ = 0 proposes nothing and ρ = 1 serves every indexed state.
    """
    kind = "demo_segment"

    def __init__(self, index, coverage: float = 1.0, mask_seed: int = 0, horizon: int = 8, codebook_size: int = 3):
        super().__init__(horizon, codebook_size)
        self.index = index
        self.coverage = coverage
        self.mask_seed = mask_seed

    def covered(self, key: Hashable) -> bool:
        return unit_interval(key, self.mask_seed) < self.coverage

    def candidates(self, state, domain, seed):
        key = (domain.static_key, state)
        if not self.covered(key):
            return ()
        return [actions for actions, _ in self.index.get(key, ())]


class AdversarialGenerator(SubgoalGenerator):
    """
    Proposals that are never on an optimal path and never land on a goal.

    first_action_wrong: random walks whose first action is not optimal.
    away_from_goal: random walks along which every step increases the distance to the goal.
    """
    kind = "adversarial"

    def __init__(self, mode: str = FIRST_ACTION_WRONG, lengths: Sequence[int] = (2, 4, 8),
                 horizon: int = 8, codebook_size: int = 3):
        super().__init__(horizon, codebook_size)
        if mode not in (FIRST_ACTION_WRONG, AWAY_FROM_GOAL):
            raise ConfigError(f"Unknown adversarial mode {mode!r}.")
        self.mode = mode
        self.lengths = sorted(n for n in lengths if 1 <= n <= horizon) or [horizon]

    def accept(self, domain, target):
        return not domain.is_goal(target)

    def candidates(self, state, domain, seed):
        distances = cached_distances(domain, state)
        optimal = set(optimal_actions_at(domain, state, distances))
        rng = make_rng(seed)
        walks = []
        for k in range(self.codebook_size):
            length = self.lengths[k % len(self.lengths)]
            if self.mode == AWAY_FROM_GOAL:
                walks.append(self._away_walk(state, domain, distances, length, rng))
            else:
                walks.append(self._wrong_first_walk(state, domain, optimal, length, rng))
        return walks

    @staticmethod
    def _pick(options: List[Tuple[str, Hashable]], rng: np.random.Generator) -> Tuple[str, Hashable]:
        return options[int(rng.integers(len(options)))]

    def _wrong_first_walk(self, state, domain, optimal, length, rng) -> List[str]:
        first = [(a, s) for a, s in domain.successors(state) if a not in optimal]
        if not first:
            return []
        action, state = self._pick(first, rng)
        actions = [action]
        while len(actions) < length:
            options = [(a, s) for a, s in domain.successors(state) if a != INVERSE[actions[-1]]]
            if not options:
                break
            action, state = self._pick(options, rng)
            actions.append(action)
        return actions

    def _away_walk(self, state, domain, distances, length, rng) -> List[str]:
        actions: List[str] = []
        while len(actions) < length:
            here = distances.get(state)
            if here is None:
                break
            options = [(a, s) for a, s in domain.successors(state) if distances.get(s, -1) > here]
            if not options:
                break
            action, state = self._pick(options, rng)
            actions.append(action)
        return actions


def build_generator(config: GeneratorConfig, index=None) -> SubgoalGenerator:
    """
    Instantiates the generator named by `config.kind`.

    Parameters:
        config (GeneratorConfig): the generator settings.
        index (Optional[SegmentIndex]): demonstration segments, required by demo_segment.

    Returns:
        SubgoalGenerator: ready to `propose`.
    """
    H, K = config.horizon, config.codebook_size
    if config.kind == "null":
        return NullGenerator(H, K)
    if config.kind == "macro":
        return MacroGenerator(config.catalog, config.lengths, H, K)
    if config.kind == "greedy_rollout":
        return GreedyRolloutGenerator(config.lengths, H, K, config.lookahead_states)
    if config.kind == "adversarial":
        return AdversarialGenerator(config.mode, config.lengths, H, K)
    if config.kind == "demo_segment":
        if index is None:
            raise ConfigError("The demo_segment generator needs a segment index (set generator.dataset).")
        return DemoSegmentGenerator(index, config.coverage, config.mask_seed, H, K)
    raise ConfigError(f"Unknown generator kind {config.kind!r}.")


def propose(gen: Union[GeneratorConfig, SubgoalGenerator], state: Hashable, domain: Domain,
            rng_seed: int) -> List[SubgoalProposal]:
    generator = build_generator(gen) if isinstance(gen, GeneratorConfig) else gen
    proposals = generator.propose(state, domain, rng_seed)
    logging.debug(f"{generator.kind} proposed {len(proposals)} subgoals")
    return proposals
