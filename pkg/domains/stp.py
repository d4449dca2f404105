import math
from typing import List, NamedTuple, Optional, Tuple

from domains.base import ACTIONS, INVERSE, Domain, Instance, step
from utils.errors import InvalidInstance
from utils.seeding import make_rng


class StpState(NamedTuple):
    width: int
    tiles: Tuple[int, ...]


def goal_tiles(width: int) -> Tuple[int, ...]:
    """Tiles 1..w²-1 in row-major order, blank (0) last."""
    return tuple(range(1, width * width)) + (0,)


class StpDomain(Domain):
    """Sliding tile puzzle. An action names the direction the blank moves."""
    name = "stp"
    admissible_heuristic = True

    def __init__(self, width: int):
        self.width = width
        self.goal = goal_tiles(width)
        # goal (row, col) per tile
        self._goal_pos = {tile: divmod(index, width) for index, tile in enumerate(self.goal)}

    @property
    def static_key(self):
        return ("stp", self.width)

    def transition(self, state: StpState, action: str) -> Optional[StpState]:
        w = state.width
        blank = state.tiles.index(0)
        r, c = step(divmod(blank, w), action)
        if not (0 <= r < w and 0 <= c < w):
            return None
        target = r * w + c
        tiles = list(state.tiles)
        tiles[blank], tiles[target] = tiles[target], tiles[blank]
        return StpState(w, tuple(tiles))

    def is_goal(self, state: StpState) -> bool:
        return state.tiles == self.goal

    def heuristic(self, state: StpState) -> float:
        """Sum of tile Manhattan distances (blank excluded)."""
        total = 0
        for index, tile in enumerate(state.tiles):
            if tile == 0:
                continue
            r, c = divmod(index, self.width)
            gr, gc = self._goal_pos[tile]
            total += abs(r - gr) + abs(c - gc)
        return float(total)


def decode(instance: Instance) -> Tuple[StpDomain, StpState]:
    tiles = tuple(int(t) for t in instance.initial)
    width = math.isqrt(len(tiles))
    if width * width != len(tiles) or sorted(tiles) != list(range(width * width)):
        raise InvalidInstance(f"STP tiles are not a permutation of 0..w²-1: {instance.initial}")
    return StpDomain(width), StpState(width, tiles)


def generate(params: dict, seed: int) -> Instance:
    """Reverse random walk from the goal (no immediate backtrack); the reversed walk is the witness."""
    width = int(params["width"])
    rng = make_rng(seed)
    domain = StpDomain(width)
    state = StpState(width, domain.goal)
    walk: List[str] = []
    for _ in range(int(params["scramble"])):
        options = [a for a in ACTIONS if domain.transition(state, a) is not None]
        if walk and len(options) > 1:
            options = [a for a in options if a != INVERSE[walk[-1]]]
        action = options[int(rng.integers(len(options)))]
        state = domain.transition(state, action)
        walk.append(action)
    witness = [INVERSE[a] for a in reversed(walk)]
    return Instance(domain="stp", seed=seed, params=dict(params), initial=list(state.tiles), witness=witness)
