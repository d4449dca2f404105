from typing import Any, Dict, Tuple

from domains import boxworld, sokoban, stp, tsp
from domains.base import ACTIONS, INVERSE, Domain, DomainAction, DomainState, Instance
from utils.config_loader import logging
from utils.errors import InvalidInstance, ParamsOutOfRange
from utils.validator import resolve_domain_params

_MODULES = {"stp": stp, "sokoban": sokoban, "boxworld": boxworld, "tsp": tsp}
DOMAIN_IDS = tuple(_MODULES)


def generate_instance(domain: str, params: Dict[str, Any], seed: int) -> Instance:
    """
    Generates a solvable instance of `domain` from (params, seed).

    Params missing from `params` take the configured defaults; out-of-range values raise
    ParamsOutOfRange. The instance records the witness solution laid down by the generator.
    """
    is_valid, resolved, error_message = resolve_domain_params(domain, params)
    if not is_valid:
        logging.warning(error_message)
        raise ParamsOutOfRange(error_message)
    instance = _MODULES[domain].generate(resolved, seed)
    logging.debug(f"Generated {domain} instance seed={seed} witness_length={len(instance.witness)}")
    return instance


def load_instance(instance: Instance) -> Tuple[Domain, DomainState]:
    """Builds the domain bound to the instance layout and decodes its initial state."""
    if instance.domain not in _MODULES:
        raise InvalidInstance(f"Unknown domain: {instance.domain}")
    return _MODULES[instance.domain].decode(instance)


__all__ = [
    "ACTIONS", "INVERSE", "DOMAIN_IDS", "Domain", "DomainAction", "DomainState", "Instance",
    "generate_instance", "load_instance",
]
