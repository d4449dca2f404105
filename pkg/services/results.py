import hashlib
import json
import math
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence

import pandas as pd

from services.search_core import SearchResult
from utils.errors import ConfigError

ROW_COLUMNS = [
    "index", "seed", "solved", "status", "expansions", "search_loss", "generated", "env_steps",
    "dist", "plan_length", "ll_share_solution", "ll_share_expansions", "wall_clock",
]
WALL_CLOCK_FIELDS = ("wall_clock",)
PLOT_COLUMNS = ["label", "config_hash", "metric", "x", "value"]


def result_row(index: int, seed: int, result: SearchResult) -> Dict[str, Any]:
    """One ResultsTable row for a finished search."""
    edges = result.solution_breakdown.get("low", 0) + result.solution_breakdown.get("subgoal", 0)
    return {
        "index": index,
        "seed": seed,
        "solved": result.solved,
        "status": result.status,
        "expansions": result.expansions,
        "search_loss": result.search_loss,
        "generated": result.generated,
        "env_steps": result.env_steps,
        "dist": result.solution_dist if result.solved else None,
        "plan_length": len(result.low_level_plan) if result.solved else None,
        "ll_share_solution": result.solution_breakdown.get("low", 0) / edges if edges else 0.0,
        "ll_share_expansions": result.ll_expansions / result.expansions if result.expansions else 0.0,
        "wall_clock": result.wall_clock,
    }


def _clean(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def canonical_digest(payload: Any) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode("utf-8")).hexdigest()


class ResultsTable:
    """
    Per-run rows of one configuration plus the aggregates derived from them.

    Rows from a different config hash are refused; aggregates are always recomputed from rows.
    """

    def __init__(self, config_hash: str, n_list: Sequence[int], seconds_list: Sequence[float] = (),
                 rows: Optional[Iterable[Dict[str, Any]]] = None):
        self.config_hash = config_hash
        self.n_list = sorted(int(n) for n in n_list)
        self.seconds_list = sorted(float(s) for s in seconds_list)
        self.rows: List[Dict[str, Any]] = []
        if rows:
            self.add_rows(rows, config_hash)

    def add_rows(self, rows: Iterable[Dict[str, Any]], config_hash: str) -> None:
        if config_hash != self.config_hash:
            raise ConfigError(f"Refusing to mix rows of config {config_hash[:12]} into table {self.config_hash[:12]}.")
        self.rows.extend(dict(row) for row in rows)
        self.rows.sort(key=lambda row: (row["seed"], row["index"]))

    @property
    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=ROW_COLUMNS)

    def success_rate_at(self, n: int) -> float:
        frame = self.frame
        if frame.empty:
            return 0.0
        return float((frame["solved"].astype(bool) & (frame["expansions"] <= n)).mean())

    def success_rate_at_seconds(self, seconds: float) -> float:
        frame = self.frame
        if frame.empty:
            return 0.0
        return float((frame["solved"].astype(bool) & (frame["wall_clock"] <= seconds)).mean())

    def unsolved_at(self, n: int) -> int:
        frame = self.frame
        return int(len(frame) - (frame["solved"].astype(bool) & (frame["expansions"] <= n)).sum())

    def aggregates(self, include_wall_clock: bool = True) -> Dict[str, Any]:
        frame = self.frame
        solved = frame[frame["solved"].astype(bool)]
        expansions = solved["expansions"].astype(float)
        aggregates = {
            "count": int(len(frame)),
            "solved": int(len(solved)),
            "success_rate_at_N": {str(n): self.success_rate_at(n) for n in self.n_list},
            "mean_expansions_solved": _clean(float(expansions.mean())) if len(solved) else None,
            "stderr_expansions_solved": _clean(float(expansions.std(ddof=1) / math.sqrt(len(solved))))
            if len(solved) > 1 else None,
            "mean_ll_share_solution": _clean(float(solved["ll_share_solution"].mean())) if len(solved) else None,
            "mean_ll_share_expansions": _clean(float(frame["ll_share_expansions"].mean())) if len(frame) else None,
            "status_counts": {str(k): int(v) for k, v in frame["status"].value_counts().sort_index().items()},
        }
        if include_wall_clock:
            aggregates["success_rate_at_seconds"] = {
                str(s): self.success_rate_at_seconds(s) for s in self.seconds_list
            }
        return aggregates

    def digest(self) -> str:
        """SHA-256 of the rows and aggregates with wall-clock fields left out."""
        rows = [{k: v for k, v in row.items() if k not in WALL_CLOCK_FIELDS} for row in self.rows]
        return canonical_digest({
            "config_hash": self.config_hash, "rows": rows, "aggregates": self.aggregates(include_wall_clock=False),
        })

    def to_dict(self, config: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "config": config,
            "rows": self.rows,
            "aggregates": self.aggregates(),
            "digest": self.digest(),
        }

    def write(self, output_dir: str, config: Optional[Dict[str, Any]] = None, stem: str = "results") -> Dict[str, str]:
        """Writes <stem>.csv (one row per run) and <stem>.json; returns their paths."""
        os.makedirs(output_dir, exist_ok=True)
        csv_path = os.path.join(output_dir, f"{stem}.csv")
        json_path = os.path.join(output_dir, f"{stem}.json")
        frame = self.frame
        frame.insert(0, "config_hash", self.config_hash)
        frame.to_csv(csv_path, index=False)
        with open(json_path, "w") as stream:
            json.dump(self.to_dict(config), stream, indent=2, sort_keys=True, default=str)
        return {"csv": csv_path, "json": json_path}

    @classmethod
    def from_dict(cls, data: Dict[str, Any], n_list: Optional[Sequence[int]] = None) -> "ResultsTable":
        aggregates = data.get("aggregates", {})
        n_list = n_list or [int(n) for n in aggregates.get("success_rate_at_N", {})]
        seconds = [float(s) for s in aggregates.get("success_rate_at_seconds", {})]
        return cls(data["config_hash"], n_list, seconds, data.get("rows", []))


def load_results(path: str) -> ResultsTable:
    with open(path, "r") as stream:
        return ResultsTable.from_dict(json.load(stream))


def merge_tables(tables: Sequence[ResultsTable]) -> ResultsTable:
    """Concatenates tables of one configuration; mixed config hashes raise ConfigError."""
    merged = ResultsTable(tables[0].config_hash, tables[0].n_list, tables[0].seconds_list)
    for table in tables:
        merged.add_rows(table.rows, table.config_hash)
    return merged


def plot_frame(tables: Dict[str, ResultsTable]) -> pd.DataFrame:
    """
    Long-format plot data: success rate against N, and the low-level share of expansions
    against expansion count for every solved run.
    """
    records = []
    for label, table in tables.items():
        for n in table.n_list:
            records.append((label, table.config_hash, "success_rate", n, table.success_rate_at(n)))
        for row in table.rows:
            records.append((label, table.config_hash, "ll_share_expansions", row["expansions"],
                            row["ll_share_expansions"]))
    return pd.DataFrame(records, columns=PLOT_COLUMNS)
