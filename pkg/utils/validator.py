from typing import Any, Dict, Optional, Sequence, Tuple, Union

from utils.config_loader import SUCCESS, CONFIG_ERROR, EPS_TO_ZERO, EPS_BASELINE, domain_settings

EVAL_KINDS = ("phs_star_scaled", "levin_ts", "phs_depth", "phs_dist", "gbfs", "astar_dist")
LOW_KINDS = ("uniform", "boltzmann_heuristic", "demo_table")
HIGH_KINDS = ("uniform", "boltzmann_progress")
GENERATOR_KINDS = ("null", "macro", "greedy_rollout", "demo_segment", "adversarial")


def validate_domain(domain: str) -> Tuple[bool, str]:
    """Validates the domain id."""
    if domain not in domain_settings:
        return False, f"Invalid domain: {domain!r}. It must be one of {sorted(domain_settings)}."
    return True, ""


def resolve_domain_params(domain: str, params: Optional[Dict[str, Any]]) -> Tuple[bool, Dict[str, Any], str]:
    """Merges params over the configured defaults and checks the documented ranges."""
    is_valid, error_message = validate_domain(domain)
    if not is_valid:
        return False, {}, error_message
    settings = domain_settings[domain]
    resolved = dict(settings["defaults"])
    resolved.update(params or {})
    unknown = set(resolved) - set(settings["defaults"])
    if unknown:
        return False, {}, f"Unknown {domain} params: {sorted(unknown)}."
    for name, (low, high) in settings["ranges"].items():
        value = resolved[name]
        if not isinstance(value, int) or isinstance(value, bool) or not (low <= value <= high):
            return False, {}, f"Invalid {domain} param {name}={value!r}. It must be an integer in [{low}, {high}]."
    if domain == "tsp" and resolved["cities"] > resolved["size"] ** 2:
        return False, {}, (f"Invalid tsp params: {resolved['cities']} cities do not fit on a "
                           f"{resolved['size']}x{resolved['size']} grid.")
    return True, resolved, ""


def validate_epsilon(epsilon: Union[float, str]) -> Tuple[bool, str]:
    """ε must be in (0, 1] or the symbolic limit; ε = 0 forfeits completeness."""
    if epsilon == EPS_TO_ZERO:
        return True, ""
    if isinstance(epsilon, bool) or not isinstance(epsilon, (int, float)):
        return False, f"Invalid epsilon: {epsilon!r}. It must be a number in (0, 1] or {EPS_TO_ZERO!r}."
    if not (0 < epsilon <= 1):
        return False, f"Invalid epsilon: {epsilon}. It must be in (0, 1]; use {EPS_TO_ZERO!r} for the limit."
    return True, ""


def validate_epsilon_list(eps_list: Sequence[Union[float, str]]) -> Tuple[bool, str]:
    if not eps_list:
        return False, "The epsilon list must not be empty."
    for epsilon in eps_list:
        if epsilon == EPS_BASELINE:
            continue
        is_valid, error_message = validate_epsilon(epsilon)
        if not is_valid:
            return False, error_message
    return True, ""


def validate_choice(name: str, value: str, choices: Sequence[str]) -> Tuple[bool, str]:
    if value not in choices:
        return False, f"Invalid {name}: {value!r}. It must be one of {list(choices)}."
    return True, ""


def validate_positive(name: str, value: Optional[float], allow_none: bool = True) -> Tuple[bool, str]:
    if value is None:
        return (True, "") if allow_none else (False, f"Invalid {name}: it is required.")
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
        return False, f"Invalid {name}: {value!r}. It must be a non-negative number."
    return True, ""


def validate_run_config(config: Any) -> Tuple[int, str]:
    """
    Validates a RunConfig.
    Combines individual validation functions for convenience.
    """
    checks = [
        resolve_domain_params(config.domain, config.params)[::2],
        validate_epsilon(config.policy.epsilon),
        validate_choice("evaluation function", config.eval_fn, EVAL_KINDS),
        validate_choice("low-level policy", config.policy.low_kind, LOW_KINDS),
        validate_choice("high-level policy", config.policy.high_kind, HIGH_KINDS),
        validate_choice("generator", config.generator.kind, GENERATOR_KINDS),
        validate_positive("instance count", config.count, allow_none=False),
        validate_positive("max_seconds", config.budget.max_seconds),
        validate_positive("max_nodes", config.budget.max_nodes),
        validate_positive("max_memory_mb", config.budget.max_memory_mb),
    ]
    for n in config.budget.n_list:
        checks.append(validate_positive("N", n, allow_none=False))
    for is_valid, error_message in checks:
        if not is_valid:
            return CONFIG_ERROR, error_message
    if config.policy.low_temperature <= 0 or config.policy.high_temperature <= 0:
        return CONFIG_ERROR, "Invalid temperature: it must be positive."
    if config.generator.kind != "null" and (config.generator.horizon < 1 or config.generator.codebook_size < 1):
        return CONFIG_ERROR, "Invalid generator: horizon and codebook_size must be at least 1."
    if not 0 <= config.generator.coverage <= 1:
        return CONFIG_ERROR, f"Invalid coverage: {config.generator.coverage}. It must be in [0, 1]."
    return SUCCESS, ""
