from abc import ABC, abstractmethod
from typing import Any, Dict, Hashable, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field

Cell = Tuple[int, int]
DomainState = Hashable
DomainAction = str

# Fixed order keeps expansion deterministic.
ACTIONS: Tuple[str, ...] = ("N", "E", "S", "W")
DELTAS: Dict[str, Cell] = {"N": (-1, 0), "E": (0, 1), "S": (1, 0), "W": (0, -1)}
INVERSE: Dict[str, str] = {"N": "S", "S": "N", "E": "W", "W": "E"}


def step(cell: Cell, action: str) -> Cell:
    dr, dc = DELTAS[action]
    return cell[0] + dr, cell[1] + dc


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


class Instance(BaseModel):
    """A serialized puzzle instance. Regenerating from (domain, seed, params) reproduces `initial`."""
    model_config = ConfigDict(frozen=True)

    domain: str
    seed: int
    params: Dict[str, Any]
    initial: Any
    witness: List[str] = Field(default_factory=list)


class Domain(ABC):
    """
    One planning environment bound to the immutable layout of a single instance.

    States are hashable immutable values; `transition` returns None for an illegal move.
    """
    name: str = ""
    admissible_heuristic: bool = False
    actions: Tuple[str, ...] = ACTIONS

    @abstractmethod
    def transition(self, state: DomainState, action: DomainAction) -> Optional[DomainState]:
        ...

    @abstractmethod
    def is_goal(self, state: DomainState) -> bool:
        ...

    @abstractmethod
    def heuristic(self, state: DomainState) -> float:
        ...

    @property
    @abstractmethod
    def static_key(self) -> Any:
        """Hashable identity of the instance layout (walls, cities, locks...)."""

    def legal_actions(self, state: DomainState) -> List[DomainAction]:
        return [a for a in self.actions if self.transition(state, a) is not None]

    def successors(self, state: DomainState) -> List[Tuple[DomainAction, DomainState]]:
        result = []
        for action in self.actions:
            nxt = self.transition(state, action)
            if nxt is not None:
                result.append((action, nxt))
        return result

    def replay(self, state: DomainState, actions: Sequence[DomainAction]) -> Optional[DomainState]:
        """Applies `actions` in order; None as soon as one is illegal."""
        for action in actions:
            state = self.transition(state, action)
            if state is None:
                return None
        return state
