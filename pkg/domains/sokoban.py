from typing import FrozenSet, List, NamedTuple, Optional, Tuple

from domains.base import ACTIONS, INVERSE, Cell, Domain, Instance, manhattan, step
from utils.errors import InvalidInstance, ParamsOutOfRange
from utils.seeding import make_rng

WALL, FLOOR, TARGET, BOX, BOX_ON_TARGET, PLAYER, PLAYER_ON_TARGET = "#", " ", ".", "$", "*", "@", "+"


class SokobanState(NamedTuple):
    player: Cell
    boxes: Tuple[Cell, ...]


class SokobanDomain(Domain):
    """
    Sokoban on a rectangular grid. Moving into a box pushes it when the cell behind it is free.

    No deadlock detection: dead ends are left to the search.
    """
    name = "sokoban"

    def __init__(self, rows: int, cols: int, walls: FrozenSet[Cell], targets: Tuple[Cell, ...]):
        self.rows = rows
        self.cols = cols
        self.walls = frozenset(walls)
        self.targets = tuple(sorted(targets))
        self._target_set = frozenset(self.targets)

    @property
    def static_key(self):
        return ("sokoban", self.rows, self.cols, tuple(sorted(self.walls)), self.targets)

    def _blocked(self, cell: Cell) -> bool:
        r, c = cell
        return not (0 <= r < self.rows and 0 <= c < self.cols) or cell in self.walls

    def transition(self, state: SokobanState, action: str) -> Optional[SokobanState]:
        nxt = step(state.player, action)
        if self._blocked(nxt):
            return None
        if nxt in state.boxes:
            beyond = step(nxt, action)
            if self._blocked(beyond) or beyond in state.boxes:
                return None
            boxes = tuple(sorted(beyond if box == nxt else box for box in state.boxes))
            return SokobanState(nxt, boxes)
        return SokobanState(nxt, state.boxes)

    def is_goal(self, state: SokobanState) -> bool:
        return frozenset(state.boxes) == self._target_set

    def heuristic(self, state: SokobanState) -> float:
        """Greedy min-cost box-to-target Manhattan matching plus player distance to the nearest unplaced box."""
        pairs = sorted(
            (manhattan(box, target), box, target) for box in state.boxes for target in self.targets
        )
        used_boxes, used_targets, matching = set(), set(), 0
        for cost, box, target in pairs:
            if box in used_boxes or target in used_targets:
                continue
            used_boxes.add(box)
            used_targets.add(target)
            matching += cost
        unplaced = [box for box in state.boxes if box not in self._target_set]
        player_cost = min((manhattan(state.player, box) for box in unplaced), default=0)
        return float(matching + player_cost)

    def render(self, state: SokobanState) -> List[str]:
        rows = []
        for r in range(self.rows):
            line = []
            for c in range(self.cols):
                cell = (r, c)
                if cell in self.walls:
                    line.append(WALL)
                elif cell in state.boxes:
                    line.append(BOX_ON_TARGET if cell in self._target_set else BOX)
                elif cell == state.player:
                    line.append(PLAYER_ON_TARGET if cell in self._target_set else PLAYER)
                else:
                    line.append(TARGET if cell in self._target_set else FLOOR)
            rows.append("".join(line))
        return rows


def parse(rows: List[str]) -> Tuple[SokobanDomain, SokobanState]:
    if not rows or len({len(row) for row in rows}) != 1:
        raise InvalidInstance("Sokoban grid must be a non-empty list of equal-length rows.")
    walls, targets, boxes, players = set(), [], [], []
    for r, row in enumerate(rows):
        for c, char in enumerate(row):
            cell = (r, c)
            if char == WALL:
                walls.add(cell)
            elif char in (TARGET, BOX_ON_TARGET, PLAYER_ON_TARGET):
                targets.append(cell)
            elif char not in (FLOOR, BOX, PLAYER):
                raise InvalidInstance(f"Unknown Sokoban grid character {char!r} at {cell}.")
            if char in (BOX, BOX_ON_TARGET):
                boxes.append(cell)
            if char in (PLAYER, PLAYER_ON_TARGET):
                players.append(cell)
    if len(players) != 1:
        raise InvalidInstance(f"Sokoban grid needs exactly one player, found {len(players)}.")
    if len(boxes) != len(targets) or not boxes:
        raise InvalidInstance(f"Sokoban grid has {len(boxes)} boxes for {len(targets)} targets.")
    domain = SokobanDomain(len(rows), len(rows[0]), frozenset(walls), tuple(targets))
    return domain, SokobanState(players[0], tuple(sorted(boxes)))


def decode(instance: Instance) -> Tuple[SokobanDomain, SokobanState]:
    return parse(list(instance.initial))


def generate(params: dict, seed: int, max_attempts: int = 100) -> Instance:
    """
    Reverse play from the solved configuration: the player walks and pulls boxes.

    Every pull reverses a legal push, so the reversed walk is a forward witness.
    """
    rows, cols = int(params["rows"]), int(params["cols"])
    n_boxes, n_walls, n_pulls = int(params["boxes"]), int(params["walls"]), int(params["pulls"])
    rng = make_rng(seed)
    interior = [(r, c) for r in range(1, rows - 1) for c in range(1, cols - 1)]
    border = {(r, c) for r in range(rows) for c in range(cols)} - set(interior)
    if n_walls + n_boxes + 1 > len(interior):
        raise ParamsOutOfRange(f"{rows}x{cols} grid cannot hold {n_walls} walls and {n_boxes} boxes.")

    for _ in range(max_attempts):
        order = [interior[i] for i in rng.permutation(len(interior))]
        walls = frozenset(border | set(order[:n_walls]))
        targets = tuple(order[n_walls:n_walls + n_boxes])
        player = order[n_walls + n_boxes]
        boxes = set(targets)
        walk: List[str] = []
        for _ in range(n_pulls):
            options = [a for a in ACTIONS if step(player, a) not in walls and step(player, a) not in boxes]
            if not options:
                break
            action = options[int(rng.integers(len(options)))]
            behind = step(player, INVERSE[action])
            if behind in boxes and rng.random() < 0.7:
                boxes.remove(behind)
                boxes.add(player)
            player = step(player, action)
            walk.append(action)
        if set(boxes) == set(targets):
            continue
        domain = SokobanDomain(rows, cols, walls, targets)
        state = SokobanState(player, tuple(sorted(boxes)))
        witness = [INVERSE[a] for a in reversed(walk)]
        return Instance(domain="sokoban", seed=seed, params=dict(params), initial=domain.render(state), witness=witness)
    raise ParamsOutOfRange(f"Could not scramble a Sokoban board in {max_attempts} attempts with params {params}.")
