import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd
import yaml
from pydantic import BaseModel, Field, ValidationError

from domains import Instance, generate_instance, load_instance
from services.bounds import BoundReport, check_fringe_bound, check_policy_bound, check_witness_bound, merge_reports
from services.demos import build_demo_dataset, demo_action_counts, load_demo_dataset, save_demo_dataset, segment_demos
from services.generators import GeneratorConfig, build_generator
from services.heuristics import PHS_FAMILY, EvaluationFunction
from services.node_store import NodeStore
from services.oracle import bfs_from, bfs_solve, idastar_solve
from services.policies import HighLevelPolicy, LowLevelPolicy, MixedPolicy
from services.results import ResultsTable, canonical_digest, load_results, plot_frame, result_row
from services.search_core import ChildExpander, SearchBudget, SearchResult, search
from utils.config_loader import (
    CONFIG_ERROR, EPS_BASELINE, EPS_TO_ZERO, FAILURE, SUCCESS, harness_defaults, logging, search_defaults,
)
from utils.errors import ConfigError, SubgoalSearchError
from utils.seeding import derive_seed
from utils.validator import validate_epsilon_list, validate_run_config

NOT_AVAILABLE = "N/A"
ERROR_STATUS = "error"
_HASH_EXCLUDED = {"output_dir", "parallelism", "dump_nodes"}

_datasets: Dict[str, list] = {}
_segment_indexes: Dict[Tuple[str, int], Any] = {}
_action_tables: Dict[str, Dict] = {}


class PolicyConfig(BaseModel):
    epsilon: Union[float, str] = 0.1
    low_kind: str = "uniform"
    high_kind: str = "uniform"
    low_temperature: float = 1.0
    high_temperature: float = 1.0
    dataset: Optional[str] = None


class BudgetConfig(BaseModel):
    """max_expansions defaults to the largest N; -1 removes the cap."""
    n_list: List[int] = Field(default_factory=lambda: list(harness_defaults["n_list"]))
    seconds_list: List[float] = Field(default_factory=lambda: list(harness_defaults["seconds_list"]))
    max_expansions: Optional[int] = None
    max_seconds: Optional[float] = search_defaults["max_seconds"]
    max_nodes: Optional[int] = search_defaults["max_nodes"]
    max_memory_mb: Optional[float] = search_defaults["max_memory_mb"]


class RunConfig(BaseModel):
    """Everything one experiment depends on; instance i uses the seed (base_seed, i)."""
    domain: str = "stp"
    params: Dict[str, Any] = Field(default_factory=dict)
    count: int = 10
    base_seed: int = 0
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    policy: PolicyConfig = Field(default_factory=PolicyConfig)
    eval_fn: str = "phs_star_scaled"
    budget: BudgetConfig = Field(default_factory=BudgetConfig)
    dedup: bool = search_defaults["dedup"]
    instrument: bool = search_defaults["instrument"]
    low_level: bool = True
    demo_noise: float = 0.0
    eps_list: List[Union[float, str]] = Field(default_factory=lambda: [EPS_BASELINE, 1e-5, 1e-3, 0.1, EPS_TO_ZERO])
    eval_list: List[str] = Field(default_factory=lambda: list(PHS_FAMILY))
    witness: str = "instance"
    output_dir: str = harness_defaults["output_dir"]
    parallelism: int = harness_defaults["parallelism"]
    dump_nodes: bool = False

    def config_hash(self) -> str:
        payload = self.model_dump(exclude=_HASH_EXCLUDED)
        return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode("utf-8")).hexdigest()

    def instance_seed(self, index: int) -> int:
        return derive_seed(self.base_seed, index)

    def variant(self, **updates: Any) -> "RunConfig":
        """A validated copy with dotted-key updates applied."""
        return RunConfig(**apply_overrides(self.model_dump(), updates))


def apply_overrides(data: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Sets dotted keys (`policy.epsilon`) in a nested dict; flags win over file values."""
    for dotted, value in overrides.items():
        if value is None:
            continue
        target = data
        *parents, leaf = dotted.split(".")
        for key in parents:
            target = target.setdefault(key, {})
        target[leaf] = value
    return data


def load_run_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Loads a YAML or JSON run configuration and applies flag overrides.

    Parameters:
        path (Optional[str]): config file; defaults only when None.
        overrides (Optional[Dict[str, Any]]): dotted-key values from the command line.

    Returns:
        RunConfig: the validated configuration.
    """
    data: Dict[str, Any] = {}
    try:
        if path:
            with open(path, "r") as stream:
                data = yaml.safe_load(stream) or {}
        return RunConfig(**apply_overrides(data, overrides or {}))
    except (OSError, yaml.YAMLError, ValidationError, TypeError) as e:
        raise ConfigError(f"Invalid run configuration {path or '(defaults)'}: {e}")


def _dataset(path: str) -> list:
    if path not in _datasets:
        _datasets[path] = load_demo_dataset(path)
    return _datasets[path]


def _segment_index(path: str, horizon: int):
    key = (path, horizon)
    if key not in _segment_indexes:
        _segment_indexes[key] = segment_demos(_dataset(path), horizon)
    return _segment_indexes[key]


def _action_table(path: str) -> Dict:
    if path not in _action_tables:
        _action_tables[path] = demo_action_counts(_dataset(path))
    return _action_tables[path]


def build_policy(config: RunConfig) -> MixedPolicy:
    table = {}
    if config.policy.low_kind == "demo_table":
        path = config.policy.dataset or config.generator.dataset
        if not path:
            raise ConfigError("The demo_table policy needs policy.dataset or generator.dataset.")
        table = _action_table(path)
    low = LowLevelPolicy(config.policy.low_kind, config.policy.low_temperature, table)
    high = HighLevelPolicy(config.policy.high_kind, config.policy.high_temperature)
    return MixedPolicy(config.policy.epsilon, low, high)


def build_expander(config: RunConfig, instance: Instance) -> ChildExpander:
    domain, _ = load_instance(instance)
    index = None
    if config.generator.kind == "demo_segment":
        if not config.generator.dataset:
            raise ConfigError("The demo_segment generator needs generator.dataset.")
        index = _segment_index(config.generator.dataset, config.generator.horizon)
    generator = build_generator(config.generator, index)
    return ChildExpander(domain, build_policy(config), generator, config.low_level, seed=instance.seed)


def search_budget(config: RunConfig) -> SearchBudget:
    budget = config.budget
    if budget.max_expansions is None:
        max_expansions = max(budget.n_list) if budget.n_list else None
    else:
        max_expansions = None if budget.max_expansions < 0 else budget.max_expansions
    return SearchBudget(max_expansions=max_expansions, max_seconds=budget.max_seconds,
                        max_nodes=budget.max_nodes, max_memory_mb=budget.max_memory_mb)


def solve_instance(config: RunConfig, instance: Instance, dedup: Optional[bool] = None,
                   instrument: Optional[bool] = None) -> Tuple[SearchResult, NodeStore, ChildExpander]:
    expander = build_expander(config, instance)
    store = NodeStore()
    result = search(
        instance, expander, EvaluationFunction(config.eval_fn), search_budget(config),
        dedup=config.dedup if dedup is None else dedup,
        instrument=config.instrument if instrument is None else instrument,
        store=store,
    )
    return result, store, expander


def _error_row(index: int, seed: int) -> Dict[str, Any]:
    return {"index": index, "seed": seed, "solved": False, "status": ERROR_STATUS, "expansions": 0,
            "search_loss": 0, "generated": 0, "env_steps": 0, "dist": None, "plan_length": None,
            "ll_share_solution": 0.0, "ll_share_expansions": 0.0, "wall_clock": 0.0}


def _bench_worker(payload: Tuple[Dict[str, Any], int]) -> Dict[str, Any]:
    config_data, index = payload
    config = RunConfig(**config_data)
    seed = config.instance_seed(index)
    try:
        instance = generate_instance(config.domain, config.params, seed)
        result, _, _ = solve_instance(config, instance)
        return result_row(index, seed, result)
    except SubgoalSearchError as e:
        logging.warning(f"Instance {index} (seed {seed}) failed: {e}")
        return _error_row(index, seed)
    except Exception as e:
        logging.error(f"An error occurred on instance {index} (seed {seed}): {e}")
        return _error_row(index, seed)


def run_table(config: RunConfig) -> ResultsTable:
    """Solves instances 0..count-1; rows come back in seed order whatever the parallelism."""
    payloads = [(config.model_dump(), index) for index in range(config.count)]
    if config.parallelism > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=config.parallelism) as executor:
            rows = list(executor.map(_bench_worker, payloads))
    else:
        rows = [_bench_worker(payload) for payload in payloads]
    return ResultsTable(config.config_hash(), config.budget.n_list, config.budget.seconds_list, rows)


def _checked(config: RunConfig) -> Tuple[int, str]:
    status, message = validate_run_config(config)
    if status != SUCCESS:
        logging.warning(message)
    return status, message


def _instance_path(output_dir: str, domain: str, index: int) -> str:
    return os.path.join(output_dir, "instances", f"{domain}_{index:05d}.json")


def cmd_generate(config: RunConfig) -> Tuple[Dict[str, Any], int, str]:
    """
    Writes instance JSON files and a manifest under <output_dir>/instances.

    Returns:
        Tuple:
            - Dict[str, Any]: manifest path and instance file paths.
            - int: SUCCESS, FAILURE or CONFIG_ERROR.
            - str: A descriptive message about the result.
    """
    status, message = _checked(config)
    if status != SUCCESS:
        return {}, status, message
    try:
        os.makedirs(os.path.join(config.output_dir, "instances"), exist_ok=True)
        files = []
        for index in range(config.count):
            instance = generate_instance(config.domain, config.params, config.instance_seed(index))
            path = _instance_path(config.output_dir, config.domain, index)
            with open(path, "w") as stream:
                stream.write(instance.model_dump_json(indent=2))
            files.append(path)
        manifest = os.path.join(config.output_dir, "instances", "manifest.json")
        with open(manifest, "w") as stream:
            json.dump({"config_hash": config.config_hash(), "domain": config.domain, "files": files}, stream, indent=2)
        message = f"Generated {len(files)} {config.domain} instances."
        logging.info(message)
        return {"manifest": manifest, "files": files}, SUCCESS, message
    except SubgoalSearchError as e:
        message = f"Instance generation failed: {e}"
        logging.warning(message)
        return {}, CONFIG_ERROR, message
    except Exception as e:
        message = f"An error occurred while generating instances: {e}"
        logging.error(message)
        return {}, FAILURE, message


def load_instance_file(path: str) -> Instance:
    with open(path, "r") as stream:
        return Instance.model_validate_json(stream.read())


def _bound_report(config: RunConfig, instance: Instance, result: SearchResult, store: NodeStore,
                  expander: ChildExpander) -> BoundReport:
    domain, initial = load_instance(instance)
    witness = instance.witness
    if config.witness == "oracle":
        witness = bfs_from(domain, initial).plan
    epsilon = config.policy.epsilon
    reports = [check_policy_bound(result, domain, initial, witness, epsilon, expander.policy.low)]
    if result.solved:
        reports.insert(0, check_fringe_bound(result, store))
        reports.insert(1, check_witness_bound(result, store, domain, initial, witness, epsilon, expander.policy.low))
    return merge_reports(*reports)


def cmd_solve(config: RunConfig, instance_path: str, with_bounds: bool = False) -> Tuple[Dict[str, Any], int, str]:
    """Solves one instance file; with bounds the search runs without duplicate detection."""
    status, message = _checked(config)
    if status != SUCCESS:
        return {}, status, message
    try:
        instance = load_instance_file(instance_path)
        if instance.domain != config.domain:
            message = f"Instance domain {instance.domain!r} does not match config domain {config.domain!r}."
            logging.warning(message)
            return {}, CONFIG_ERROR, message
        dedup = False if with_bounds else None
        result, store, expander = solve_instance(config, instance, dedup=dedup, instrument=with_bounds or None)
        data = {
            "config_hash": config.config_hash(),
            "instance": {"domain": instance.domain, "seed": instance.seed},
            "result": result.model_dump(),
        }
        if with_bounds:
            data["bounds"] = _bound_report(config, instance, result, store, expander).model_dump()
        os.makedirs(config.output_dir, exist_ok=True)
        path = os.path.join(config.output_dir, f"solve_{instance.domain}_{instance.seed}.json")
        with open(path, "w") as stream:
            json.dump(data, stream, indent=2, sort_keys=True, default=str)
        message = f"Instance {instance.domain}/{instance.seed}: {result.status} after {result.expansions} expansions."
        logging.info(message)
        return data, SUCCESS, message
    except (OSError, ValidationError, SubgoalSearchError) as e:
        message = f"Could not solve {instance_path}: {e}"
        logging.warning(message)
        return {}, FAILURE, message
    except Exception as e:
        message = f"An error occurred while solving {instance_path}: {e}"
        logging.error(message)
        return {}, FAILURE, message


def cmd_bench(config: RunConfig) -> Tuple[Dict[str, Any], int, str]:
    """Success rate at every N plus mean/stderr expansions; errored instances are marked and skipped."""
    status, message = _checked(config)
    if status != SUCCESS:
        return {}, status, message
    try:
        table = run_table(config)
        paths = table.write(config.output_dir, config.model_dump())
        data = {"paths": paths, "aggregates": table.aggregates(), "digest": table.digest()}
        errors = sum(1 for row in table.rows if row["status"] == ERROR_STATUS)
        rates = ", ".join(f"N={n}: {rate:.3f}" for n, rate in data["aggregates"]["success_rate_at_N"].items())
        message = f"Bench on {config.count} {config.domain} instances: {rates}; {errors} failed."
        logging.info(message)
        return data, FAILURE if errors else SUCCESS, message
    except SubgoalSearchError as e:
        message = f"Bench failed: {e}"
        logging.warning(message)
        return {}, CONFIG_ERROR, message
    except Exception as e:
        message = f"An error occurred during the bench run: {e}"
        logging.error(message)
        return {}, FAILURE, message


def unsolved_ratio(unsolved: int, baseline: int) -> float:
    if baseline == 0:
        return 1.0 if unsolved == 0 else math.inf
    return unsolved / baseline


def _eps_label(epsilon: Union[float, str]) -> str:
    return str(epsilon).replace(".", "p")


def cmd_sweep_epsilon(config: RunConfig, eps_list: Optional[Sequence[Union[float, str]]] = None
                      ) -> Tuple[Dict[str, Any], int, str]:
    """
    Unsolved count at each N relative to the pure subgoal baseline, per ε.

    `baseline` in the list (or added when missing) runs with low-level edges disabled.
    """
    eps_list = list(eps_list or config.eps_list)
    status, message = _checked(config)
    if status == SUCCESS:
        is_valid, message = validate_epsilon_list(eps_list)
        status = SUCCESS if is_valid else CONFIG_ERROR
    if status != SUCCESS:
        logging.warning(message)
        return {}, status, message
    try:
        if EPS_BASELINE not in eps_list:
            eps_list.insert(0, EPS_BASELINE)
        tables: Dict[str, ResultsTable] = {}
        sweep_dir = os.path.join(config.output_dir, "sweep")
        for epsilon in eps_list:
            if epsilon == EPS_BASELINE:
                variant = config.variant(low_level=False)
            else:
                variant = config.variant(**{"policy.epsilon": epsilon, "low_level": True})
            table = run_table(variant)
            table.write(sweep_dir, variant.model_dump(), stem=f"results_eps_{_eps_label(epsilon)}")
            tables[str(epsilon)] = table
            logging.info(f"Sweep epsilon={epsilon}: {table.aggregates()['success_rate_at_N']}")

        baseline = tables[EPS_BASELINE]
        records = []
        for label, table in tables.items():
            aggregates = table.aggregates()
            for n in config.budget.n_list:
                unsolved, base = table.unsolved_at(n), baseline.unsolved_at(n)
                records.append({
                    "epsilon": label, "N": n, "unsolved": unsolved, "unsolved_baseline": base,
                    "ratio": unsolved_ratio(unsolved, base),
                    "mean_ll_share_expansions": aggregates["mean_ll_share_expansions"],
                    "mean_ll_share_solution": aggregates["mean_ll_share_solution"],
                    "config_hash": table.config_hash,
                })
        frame = pd.DataFrame(records)
        os.makedirs(config.output_dir, exist_ok=True)
        path = os.path.join(config.output_dir, "sweep.csv")
        frame.to_csv(path, index=False)
        message = f"Swept {len(eps_list)} epsilon settings on {config.count} {config.domain} instances."
        logging.info(message)
        return {"path": path, "rows": records}, SUCCESS, message
    except SubgoalSearchError as e:
        message = f"Epsilon sweep failed: {e}"
        logging.warning(message)
        return {}, CONFIG_ERROR, message
    except Exception as e:
        message = f"An error occurred during the epsilon sweep: {e}"
        logging.error(message)
        return {}, FAILURE, message


def cmd_ablate_eval(config: RunConfig, kinds: Optional[Sequence[str]] = None) -> Tuple[Dict[str, Any], int, str]:
    """Success at every N per evaluation function; a kind that ran out of memory anywhere reads N/A."""
    kinds = list(kinds or config.eval_list)
    status, message = _checked(config)
    if status != SUCCESS:
        return {}, status, message
    try:
        records = []
        for kind in kinds:
            variant = config.variant(eval_fn=kind)
            status, message = _checked(variant)
            if status != SUCCESS:
                return {}, status, message
            table = run_table(variant)
            table.write(os.path.join(config.output_dir, "ablation"), variant.model_dump(), stem=f"results_{kind}")
            out_of_memory = any(row["status"] == "out_of_memory" for row in table.rows)
            if out_of_memory:
                logging.warning(f"{kind} ran out of memory on {config.domain}; recording N/A")
            for n in config.budget.n_list:
                records.append({
                    "eval_fn": kind, "N": n,
                    "success_rate": NOT_AVAILABLE if out_of_memory else table.success_rate_at(n),
                    "config_hash": table.config_hash,
                })
        os.makedirs(config.output_dir, exist_ok=True)
        path = os.path.join(config.output_dir, "ablation.csv")
        pd.DataFrame(records).to_csv(path, index=False)
        message = f"Ablated {len(kinds)} evaluation functions on {config.count} {config.domain} instances."
        logging.info(message)
        return {"path": path, "rows": records}, SUCCESS, message
    except SubgoalSearchError as e:
        message = f"Ablation failed: {e}"
        logging.warning(message)
        return {}, CONFIG_ERROR, message
    except Exception as e:
        message = f"An error occurred during the ablation: {e}"
        logging.error(message)
        return {}, FAILURE, message


def cmd_bound_check(config: RunConfig) -> Tuple[Dict[str, Any], int, str]:
    """
    Checks every computable bound on each instance with duplicate detection forced off.

    Returns FAILURE when any bound is violated.
    """
    status, message = _checked(config)
    if status != SUCCESS:
        return {}, status, message
    try:
        reports = []
        for index in range(config.count):
            seed = config.instance_seed(index)
            instance = generate_instance(config.domain, config.params, seed)
            result, store, expander = solve_instance(config, instance, dedup=False, instrument=True)
            report = _bound_report(config, instance, result, store, expander)
            if config.dump_nodes:
                audit_dir = os.path.join(config.output_dir, "nodes")
                os.makedirs(audit_dir, exist_ok=True)
                with open(os.path.join(audit_dir, f"{config.domain}_{index:05d}.jsonl"), "w") as stream:
                    store.dump_jsonl(stream)
            reports.append({"index": index, "seed": seed, "solved": result.solved, **report.model_dump()})
        summary = {}
        for name in ("general", "witness", "policy"):
            checked = [r[f"holds_{name}"] for r in reports if r[f"holds_{name}"] is not None]
            summary[f"{name}_checked"] = len(checked)
            summary[f"{name}_holds"] = sum(1 for holds in checked if holds)
        data = {"config_hash": config.config_hash(), "dedup": False, "summary": summary, "reports": reports,
                "digest": canonical_digest(reports)}
        os.makedirs(config.output_dir, exist_ok=True)
        path = os.path.join(config.output_dir, "bounds.json")
        with open(path, "w") as stream:
            json.dump(data, stream, indent=2, sort_keys=True, default=str)
        violated = sum(summary[f"{n}_checked"] - summary[f"{n}_holds"] for n in ("general", "witness", "policy"))
        message = f"Bound check on {config.count} instances: {summary}."
        if violated:
            logging.warning(message)
            return data, FAILURE, message
        logging.info(message)
        return data, SUCCESS, message
    except SubgoalSearchError as e:
        message = f"Bound check failed: {e}"
        logging.warning(message)
        return {}, FAILURE, message
    except Exception as e:
        message = f"An error occurred during the bound check: {e}"
        logging.error(message)
        return {}, FAILURE, message


def cmd_demos(config: RunConfig, path: Optional[str] = None) -> Tuple[Dict[str, Any], int, str]:
    """Writes a JSONL demonstration dataset for instances 0..count-1 of the config."""
    status, message = _checked(config)
    if status != SUCCESS:
        return {}, status, message
    if not 0 <= config.demo_noise <= 0.5:
        message = f"Invalid demo_noise: {config.demo_noise}. It must be in [0, 0.5]."
        logging.warning(message)
        return {}, CONFIG_ERROR, message
    try:
        path = path or config.generator.dataset or os.path.join(config.output_dir, "demos.jsonl")
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        dataset = build_demo_dataset(config.domain, config.params, config.count, config.base_seed, config.demo_noise)
        count = save_demo_dataset(dataset, path)
        lengths = [t.length for t in dataset]
        message = f"Wrote {count} demonstrations to {path}."
        logging.info(message)
        return {"path": path, "count": count, "mean_length": sum(lengths) / len(lengths) if lengths else 0.0}, \
            SUCCESS, message
    except SubgoalSearchError as e:
        message = f"Demonstrations failed: {e}"
        logging.warning(message)
        return {}, FAILURE, message
    except Exception as e:
        message = f"An error occurred while building demonstrations: {e}"
        logging.error(message)
        return {}, FAILURE, message


def cmd_oracle(instance_path: str, method: str = "bfs", allow_inadmissible: bool = False,
               output: Optional[str] = None) -> Tuple[Dict[str, Any], int, str]:
    """Optimal solution of one instance file by BFS or IDA*."""
    if method not in ("bfs", "idastar"):
        message = f"Invalid oracle method: {method!r}. It must be 'bfs' or 'idastar'."
        logging.warning(message)
        return {}, CONFIG_ERROR, message
    try:
        instance = load_instance_file(instance_path)
        if method == "bfs":
            result = bfs_solve(instance)
        else:
            result = idastar_solve(instance, allow_inadmissible=allow_inadmissible)
        data = {"instance": {"domain": instance.domain, "seed": instance.seed}, "method": method,
                **result.model_dump()}
        if output:
            with open(output, "w") as stream:
                json.dump(data, stream, indent=2, sort_keys=True)
        message = f"Oracle {method} on {instance.domain}/{instance.seed}: length {result.optimal_length}."
        logging.info(message)
        return data, SUCCESS, message
    except (OSError, ValidationError, SubgoalSearchError) as e:
        message = f"Oracle failed on {instance_path}: {e}"
        logging.warning(message)
        return {}, FAILURE, message
    except Exception as e:
        message = f"An error occurred while running the oracle on {instance_path}: {e}"
        logging.error(message)
        return {}, FAILURE, message


def cmd_plotdata(paths: Sequence[str], output: str) -> Tuple[Dict[str, Any], int, str]:
    """Long-format CSV from results.json files, labelled by file name."""
    try:
        tables = {path: load_results(path) for path in paths}
        frame = plot_frame(tables)
        os.makedirs(os.path.dirname(os.path.abspath(output)), exist_ok=True)
        frame.to_csv(output, index=False)
        message = f"Wrote {len(frame)} plot records from {len(paths)} result files to {output}."
        logging.info(message)
        return {"path": output, "records": len(frame)}, SUCCESS, message
    except (OSError, KeyError, ValueError, SubgoalSearchError) as e:
        message = f"Plot data failed: {e}"
        logging.warning(message)
        return {}, FAILURE, message
    except Exception as e:
        message = f"An error occurred while writing plot data: {e}"
        logging.error(message)
        return {}, FAILURE, message
