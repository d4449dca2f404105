from collections import deque
from typing import Dict, List, NamedTuple, Optional, Sequence, Set, Tuple

from domains.base import ACTIONS, Cell, Domain, Instance, manhattan, step
from utils.config_loader import palette
from utils.errors import InvalidInstance, ParamsOutOfRange
from utils.seeding import make_rng

GEM = "gem"


class BoxWorldState(NamedTuple):
    agent: Cell
    held: Optional[str]
    opened: int  # bitmask over locks
    taken: int  # bitmask over loose keys
    gem: bool


class Lock(NamedTuple):
    cell: Cell
    color: str
    content: str  # key color inside, or GEM


class BoxWorldDomain(Domain):
    """
    Box-World on an open square grid.

    Stepping onto a lock while holding the matching key opens it, consumes the key and hands
    over the content. Stepping onto a loose key picks it up, replacing any held key. A lock
    without the matching key is impassable.
    """
    name = "boxworld"

    def __init__(self, size: int, locks: Sequence[Lock], keys: Sequence[Tuple[Cell, str]],
                 chain: Sequence[int] = (), branches: Sequence[Sequence[int]] = ()):
        self.size = size
        self.locks = tuple(locks)
        self.keys = tuple(keys)
        self.chain = tuple(chain)
        self.branches = tuple(tuple(b) for b in branches)
        self._lock_at: Dict[Cell, int] = {lock.cell: i for i, lock in enumerate(self.locks)}
        self._key_at: Dict[Cell, int] = {cell: j for j, (cell, _) in enumerate(self.keys)}
        gem_locks = [lock.cell for lock in self.locks if lock.content == GEM]
        if len(gem_locks) != 1:
            raise InvalidInstance(f"Box-World needs exactly one gem lock, found {len(gem_locks)}.")
        self.gem_cell = gem_locks[0]

    @property
    def static_key(self):
        return ("boxworld", self.size, self.locks, self.keys)

    def transition(self, state: BoxWorldState, action: str) -> Optional[BoxWorldState]:
        nxt = step(state.agent, action)
        if not (0 <= nxt[0] < self.size and 0 <= nxt[1] < self.size):
            return None
        lock_index = self._lock_at.get(nxt)
        if lock_index is not None and not state.opened >> lock_index & 1:
            lock = self.locks[lock_index]
            if state.held != lock.color:
                return None
            opened = state.opened | (1 << lock_index)
            if lock.content == GEM:
                return BoxWorldState(nxt, None, opened, state.taken, True)
            return BoxWorldState(nxt, lock.content, opened, state.taken, state.gem)
        key_index = self._key_at.get(nxt)
        if key_index is not None and not state.taken >> key_index & 1:
            return BoxWorldState(nxt, self.keys[key_index][1], state.opened, state.taken | (1 << key_index), state.gem)
        return BoxWorldState(nxt, state.held, state.opened, state.taken, state.gem)

    def is_goal(self, state: BoxWorldState) -> bool:
        return state.gem

    def heuristic(self, state: BoxWorldState) -> float:
        """Manhattan distance to the gem plus 2 per unopened lock left on the solution chain."""
        if state.gem:
            return 0.0
        remaining = sum(
            1 for i in self.chain if self.locks[i].content != GEM and not state.opened >> i & 1
        )
        return float(manhattan(state.agent, self.gem_cell) + 2 * remaining)

    def encode(self, state: BoxWorldState) -> dict:
        return {
            "size": self.size,
            "agent": list(state.agent),
            "held": state.held,
            "locks": [[lock.cell[0], lock.cell[1], lock.color, lock.content] for lock in self.locks],
            "keys": [[cell[0], cell[1], color] for cell, color in self.keys],
            "chain": list(self.chain),
            "branches": [list(b) for b in self.branches],
        }


def decode(instance: Instance) -> Tuple[BoxWorldDomain, BoxWorldState]:
    try:
        data = instance.initial
        locks = [Lock((int(r), int(c)), str(color), str(content)) for r, c, color, content in data["locks"]]
        keys = [((int(r), int(c)), str(color)) for r, c, color in data["keys"]]
        domain = BoxWorldDomain(int(data["size"]), locks, keys, data.get("chain", []), data.get("branches", []))
        agent = (int(data["agent"][0]), int(data["agent"][1]))
        return domain, BoxWorldState(agent, data.get("held"), 0, 0, False)
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidInstance(f"Malformed Box-World instance: {e}")


def _path(size: int, start: Cell, goal: Cell, blocked: Set[Cell]) -> Optional[List[str]]:
    """Shortest grid path from start to goal that avoids `blocked` (goal itself allowed)."""
    parents: Dict[Cell, Tuple[Optional[Cell], Optional[str]]] = {start: (None, None)}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        if cell == goal:
            moves = []
            while parents[cell][0] is not None:
                prev, action = parents[cell]
                moves.append(action)
                cell = prev
            return moves[::-1]
        for action in ACTIONS:
            nxt = step(cell, action)
            if not (0 <= nxt[0] < size and 0 <= nxt[1] < size) or nxt in parents:
                continue
            if nxt in blocked and nxt != goal:
                continue
            parents[nxt] = (cell, action)
            queue.append(nxt)
    return None


def generate(params: dict, seed: int, max_attempts: int = 100) -> Instance:
    """
    Lays a solution chain (loose key -> lock -> ... -> gem lock) plus distractor branches.

    A distractor branch hangs off a chain color: a lock of that color holds a key that opens
    only further distractor locks, ending in a key that opens nothing. Using a chain key on
    a distractor therefore dead-ends the episode.
    """
    size, chain_len = int(params["size"]), int(params["chain"])
    n_distractors, branch_len = int(params["distractors"]), int(params["distractor_length"])
    if params.get("dead_end_chains"):
        branch_len = max(branch_len, 2)
    n_colors = chain_len + n_distractors * branch_len
    if n_colors > len(palette):
        raise ParamsOutOfRange(f"Box-World needs {n_colors} colors, palette has {len(palette)}.")
    n_objects = 1 + chain_len + n_distractors * branch_len + 1
    if n_objects > size * size:
        raise ParamsOutOfRange(f"{size}x{size} grid cannot hold {n_objects} objects.")

    rng = make_rng(seed)
    for _ in range(max_attempts):
        colors = [palette[i] for i in rng.permutation(len(palette))[:n_colors]]
        chain_colors, distractor_colors = colors[:chain_len], colors[chain_len:]
        cells = [divmod(int(i), size) for i in rng.permutation(size * size)[:n_objects]]
        agent, key_cell, object_cells = cells[0], cells[1], cells[2:]

        locks: List[Lock] = []
        for k in range(chain_len):
            content = chain_colors[k + 1] if k + 1 < chain_len else GEM
            locks.append(Lock(object_cells[len(locks)], chain_colors[k], content))
        chain = list(range(chain_len))
        branches = []
        for i in range(n_distractors):
            hook = chain_colors[int(rng.integers(chain_len))]
            branch_colors = distractor_colors[i * branch_len:(i + 1) * branch_len]
            branch = []
            for j, color in enumerate(branch_colors):
                lock_color = hook if j == 0 else branch_colors[j - 1]
                branch.append(len(locks))
                locks.append(Lock(object_cells[len(locks)], lock_color, color))
            branches.append(branch)
        keys = [(key_cell, chain_colors[0])]

        # Witness: walk to the loose key, then through the chain in order.
        blocked = {lock.cell for lock in locks} | {key_cell}
        witness: List[str] = []
        position = agent
        feasible = True
        for target in [key_cell] + [locks[i].cell for i in chain]:
            leg = _path(size, position, target, blocked)
            if leg is None:
                feasible = False
                break
            witness.extend(leg)
            blocked.discard(target)
            position = target
        if not feasible:
            continue
        domain = BoxWorldDomain(size, locks, keys, chain, branches)
        state = BoxWorldState(agent, None, 0, 0, False)
        return Instance(domain="boxworld", seed=seed, params=dict(params), initial=domain.encode(state), witness=witness)
    raise ParamsOutOfRange(f"Could not lay out a solvable Box-World in {max_attempts} attempts with params {params}.")
