import os
import yaml
import logging

CONFIG_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config", "config.yaml")


def load_config(config_path: str = CONFIG_PATH) -> dict:
    """Loads configuration from the YAML file."""
    with open(config_path, "r") as file:
        return yaml.safe_load(file)

# Initialize configuration
config = load_config()

# Extract configurations
LOGGING_CONFIG = config["logging"]
CONSTANTS = config["constants"]

search_defaults = config["search"]
oracle_defaults = config["oracle"]
domain_settings = config["domains"]
harness_defaults = config["harness"]
palette = config["palette"]

# Configure logging
logging.basicConfig(
    level=getattr(logging, LOGGING_CONFIG["level"]),
    format=LOGGING_CONFIG["format"],
    handlers=[logging.StreamHandler()]
)

# Constants
SUCCESS = CONSTANTS["SUCCESS"]
FAILURE = CONSTANTS["FAILURE"]
CONFIG_ERROR = CONSTANTS["CONFIG_ERROR"]
EPS_TO_ZERO = CONSTANTS["EPS_TO_ZERO"]
EPS_BASELINE = CONSTANTS["EPS_BASELINE"]

BFS_MAX_STATES = oracle_defaults["bfs_max_states"]
IDASTAR_MAX_GENERATED = oracle_defaults["idastar_max_generated"]
MEMORY_CHECK_EVERY = search_defaults["memory_check_every"]
TRACE_BUCKET = search_defaults["trace_bucket"]
