import argparse
import json
import sys
from typing import Any, Dict, List, Optional

from services.harness import (
    cmd_ablate_eval, cmd_bench, cmd_bound_check, cmd_demos, cmd_generate, cmd_oracle, cmd_plotdata, cmd_solve,
    cmd_sweep_epsilon, load_run_config,
)
from utils.config_loader import CONFIG_ERROR, EPS_BASELINE, EPS_TO_ZERO, logging
from utils.errors import ConfigError


def parse_epsilon(value: str):
    if value in (EPS_TO_ZERO, EPS_BASELINE):
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"epsilon must be a number, {EPS_TO_ZERO!r} or {EPS_BASELINE!r}: {value!r}")


def parse_param(value: str):
    """key=value with an integer or boolean value."""
    key, _, raw = value.partition("=")
    if not key or not raw:
        raise argparse.ArgumentTypeError(f"param must look like key=value: {value!r}")
    if raw.lower() in ("true", "false"):
        return key, raw.lower() == "true"
    try:
        return key, int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"param {key} must be an integer or boolean: {raw!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--domain", choices=["stp", "sokoban", "boxworld", "tsp"])
    common.add_argument("--param", action="append", type=parse_param, default=[], help="domain param key=value")
    common.add_argument("--count", type=int)
    common.add_argument("--seed", type=int, dest="base_seed")
    common.add_argument("--epsilon", type=parse_epsilon)
    common.add_argument("--eval", dest="eval_fn")
    common.add_argument("--low-policy")
    common.add_argument("--high-policy")
    common.add_argument("--low-temperature", type=float)
    common.add_argument("--high-temperature", type=float)
    common.add_argument("--generator")
    common.add_argument("--horizon", type=int)
    common.add_argument("--codebook", type=int)
    common.add_argument("--lengths", type=int, nargs="+")
    common.add_argument("--mode", help="adversarial mode: first_action_wrong | away_from_goal")
    common.add_argument("--coverage", type=float)
    common.add_argument("--dataset")
    common.add_argument("--n-list", type=int, nargs="+")
    common.add_argument("--max-expansions", type=int, help="-1 for unlimited")
    common.add_argument("--max-seconds", type=float)
    common.add_argument("--max-nodes", type=int)
    common.add_argument("--max-memory-mb", type=float)
    common.add_argument("--no-dedup", action="store_true")
    common.add_argument("--no-instrument", action="store_true")
    common.add_argument("--pure-subgoal", action="store_true", help="disable low-level edges")
    common.add_argument("--witness", choices=["instance", "oracle"])
    common.add_argument("--output-dir")
    common.add_argument("--parallelism", type=int)
    common.add_argument("--dump-nodes", action="store_true", help="bound-check: write every search tree as JSONL")

    parser = argparse.ArgumentParser(prog="subgoal-search", description="Complete subgoal search benchmarks.")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("generate", parents=[common], help="write instance files")
    solve = commands.add_parser("solve", parents=[common], help="solve one instance file")
    solve.add_argument("instance")
    solve.add_argument("--bounds", action="store_true", help="run without dedup and attach a bound report")
    commands.add_parser("bench", parents=[common], help="success rate at N over an instance set")
    sweep = commands.add_parser("sweep-eps", parents=[common], help="unsolved ratio per epsilon")
    sweep.add_argument("--eps", type=parse_epsilon, nargs="+")
    ablate = commands.add_parser("ablate-eval", parents=[common], help="success rate per evaluation function")
    ablate.add_argument("--kinds", nargs="+")
    commands.add_parser("bound-check", parents=[common], help="verify the search-loss bounds")
    demos = commands.add_parser("demos", parents=[common], help="write a demonstration dataset")
    demos.add_argument("--noise", type=float)
    demos.add_argument("--out")
    oracle = commands.add_parser("oracle", help="optimal solution of one instance file")
    oracle.add_argument("instance")
    oracle.add_argument("--method", choices=["bfs", "idastar"], default="bfs")
    oracle.add_argument("--allow-inadmissible", action="store_true")
    oracle.add_argument("--out")
    plotdata = commands.add_parser("plotdata", help="long-format CSV from results.json files")
    plotdata.add_argument("results", nargs="+")
    plotdata.add_argument("--out", required=True)
    return parser


def overrides_from(args: argparse.Namespace) -> Dict[str, Any]:
    """Dotted-key overrides for every flag that was given."""
    overrides = {
        "domain": args.domain,
        "count": args.count,
        "base_seed": args.base_seed,
        "policy.epsilon": args.epsilon,
        "eval_fn": args.eval_fn,
        "policy.low_kind": args.low_policy,
        "policy.high_kind": args.high_policy,
        "policy.low_temperature": args.low_temperature,
        "policy.high_temperature": args.high_temperature,
        "generator.kind": args.generator,
        "generator.horizon": args.horizon,
        "generator.codebook_size": args.codebook,
        "generator.lengths": args.lengths,
        "generator.mode": args.mode,
        "generator.coverage": args.coverage,
        "generator.dataset": args.dataset,
        "budget.n_list": args.n_list,
        "budget.max_expansions": args.max_expansions,
        "budget.max_seconds": args.max_seconds,
        "budget.max_nodes": args.max_nodes,
        "budget.max_memory_mb": args.max_memory_mb,
        "dedup": False if args.no_dedup else None,
        "instrument": False if args.no_instrument else None,
        "low_level": False if args.pure_subgoal else None,
        "witness": args.witness,
        "output_dir": args.output_dir,
        "parallelism": args.parallelism,
        "dump_nodes": True if args.dump_nodes else None,
        "demo_noise": getattr(args, "noise", None),
    }
    for key, value in args.param:
        overrides[f"params.{key}"] = value
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "oracle":
        data, status, message = cmd_oracle(args.instance, args.method, args.allow_inadmissible, args.out)
    elif args.command == "plotdata":
        data, status, message = cmd_plotdata(args.results, args.out)
    else:
        try:
            config = load_run_config(args.config, overrides_from(args))
        except ConfigError as e:
            logging.warning(str(e))
            print(json.dumps({"status": CONFIG_ERROR, "message": str(e)}))
            return CONFIG_ERROR
        if args.command == "generate":
            data, status, message = cmd_generate(config)
        elif args.command == "solve":
            data, status, message = cmd_solve(config, args.instance, args.bounds)
        elif args.command == "bench":
            data, status, message = cmd_bench(config)
        elif args.command == "sweep-eps":
            data, status, message = cmd_sweep_epsilon(config, args.eps)
        elif args.command == "ablate-eval":
            data, status, message = cmd_ablate_eval(config, args.kinds)
        elif args.command == "bound-check":
            data, status, message = cmd_bound_check(config)
        else:
            data, status, message = cmd_demos(config, args.out)
    print(json.dumps({"status": status, "message": message}))
    return status


if __name__ == "__main__":
    sys.exit(main())
