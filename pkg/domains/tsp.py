from typing import List, NamedTuple, Optional, Sequence, Tuple

from domains.base import Cell, Domain, Instance, manhattan, step
from utils.errors import InvalidInstance, ParamsOutOfRange
from utils.seeding import make_rng


class TspState(NamedTuple):
    agent: Cell
    visited: int  # bitmask over cities


class TspDomain(Domain):
    """
    Grid TSP: the agent walks the grid, stepping onto a city marks it visited.

    Terminal once every city is visited and the agent stands on the start city (city 0).
    """
    name = "tsp"

    def __init__(self, size: int, cities: Sequence[Cell]):
        self.size = size
        self.cities = tuple(tuple(c) for c in cities)
        self.start = self.cities[0]
        self.full = (1 << len(self.cities)) - 1
        self._city_at = {cell: i for i, cell in enumerate(self.cities)}

    @property
    def static_key(self):
        return ("tsp", self.size, self.cities)

    def transition(self, state: TspState, action: str) -> Optional[TspState]:
        nxt = step(state.agent, action)
        if not (0 <= nxt[0] < self.size and 0 <= nxt[1] < self.size):
            return None
        city = self._city_at.get(nxt)
        visited = state.visited if city is None else state.visited | (1 << city)
        return TspState(nxt, visited)

    def is_goal(self, state: TspState) -> bool:
        return state.visited == self.full and state.agent == self.start

    def heuristic(self, state: TspState) -> float:
        """Nearest-neighbour completion over unvisited cities plus the return leg."""
        position, total = state.agent, 0
        unvisited = [i for i in range(len(self.cities)) if not state.visited >> i & 1]
        while unvisited:
            nearest = min(unvisited, key=lambda i: (manhattan(position, self.cities[i]), i))
            total += manhattan(position, self.cities[nearest])
            position = self.cities[nearest]
            unvisited.remove(nearest)
        return float(total + manhattan(position, self.start))

    def encode(self, state: TspState) -> dict:
        return {
            "size": self.size,
            "cities": [list(c) for c in self.cities],
            "agent": list(state.agent),
            "visited": state.visited,
        }


def decode(instance: Instance) -> Tuple[TspDomain, TspState]:
    try:
        data = instance.initial
        cities = [(int(r), int(c)) for r, c in data["cities"]]
        if len(set(cities)) != len(cities) or not cities:
            raise InvalidInstance("TSP cities must be distinct and non-empty.")
        domain = TspDomain(int(data["size"]), cities)
        agent = (int(data["agent"][0]), int(data["agent"][1]))
        return domain, TspState(agent, int(data["visited"]) | 1)
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidInstance(f"Malformed TSP instance: {e}")


def _leg(start: Cell, goal: Cell) -> List[str]:
    """Vertical moves first, then horizontal."""
    dr, dc = goal[0] - start[0], goal[1] - start[1]
    return ["S" if dr > 0 else "N"] * abs(dr) + ["E" if dc > 0 else "W"] * abs(dc)


def generate(params: dict, seed: int) -> Instance:
    """Random distinct cities; the witness is the nearest-neighbour tour."""
    size, n_cities = int(params["size"]), int(params["cities"])
    if n_cities > size * size:
        raise ParamsOutOfRange(f"{n_cities} cities do not fit on a {size}x{size} grid.")
    rng = make_rng(seed)
    cities = [divmod(int(i), size) for i in rng.permutation(size * size)[:n_cities]]
    domain = TspDomain(size, cities)
    state = TspState(domain.start, 1)
    witness: List[str] = []
    current = state
    while current.visited != domain.full:
        nearest = min(
            (i for i in range(n_cities) if not current.visited >> i & 1),
            key=lambda i: (manhattan(current.agent, cities[i]), i),
        )
        leg = _leg(current.agent, cities[nearest])
        current = domain.replay(current, leg)
        witness.extend(leg)
    witness.extend(_leg(current.agent, domain.start))
    return Instance(domain="tsp", seed=seed, params=dict(params), initial=domain.encode(state), witness=witness)
