from pathlib import Path
import sys

from dotenv import load_dotenv, find_dotenv
from loguru import logger
import os

import yaml


# Load environment variables from .env file if it exists
load_dotenv(find_dotenv())

# Paths
PROJ_ROOT = Path(__file__).resolve().parents[1]

# Environment variable that points the CLI at a different config file
CONFIG_ENV_VAR = "POLAR_AUTOGEN_CONFIG"


def default_config_path():
    """
    Return the config file used when none is given explicitly.
    $POLAR_AUTOGEN_CONFIG wins over PROJ_ROOT/config.yaml.
    """
    env_path = os.getenv(CONFIG_ENV_VAR)
    if env_path:
        return Path(env_path)
    return PROJ_ROOT / "config.yaml"


def parse_yaml(yaml_path=None):
    """
    Parse a YAML file and return the loaded dictionary.
    If yaml_path is None, defaults to default_config_path().
    """
    if yaml_path is None:
        yaml_path = default_config_path()
    with open(yaml_path, 'r') as f:
        return yaml.safe_load(f) or {}


def parse_config(config_path=None):
    """
    Parse a YAML config file and return the loaded dictionary.
    If config_path is None, uses default_config_path().
    """
    if config_path is None:
        yaml_path = default_config_path()
        if yaml_path.exists():
            config_path = yaml_path
        else:
            raise FileNotFoundError(f"No config file found at {yaml_path}.")
    config_path = Path(config_path)
    return parse_yaml(config_path)


def get_config_value(section, key, fallback=None, yaml_path=None):
    """
    Get a configuration value from YAML format.

    Args:
        section: Configuration section name
        key: Configuration key name
        fallback: Fallback value if not found
        yaml_path: Config file to read (default_config_path() if None)

    Returns:
        Configuration value or fallback
    """
    return get_yaml_value([section, key], yaml_path=yaml_path, fallback=fallback)


def get_yaml_value(key_path, yaml_path=None, fallback=None):
    """
    Get a value from a YAML config file using a list of keys (key_path).
    Example: key_path=["EXPLORE", "fmax_mhz"]
    Returns fallback if not found or if the file does not exist.
    """
    try:
        data = parse_yaml(yaml_path)
    except FileNotFoundError:
        return fallback
    d = data
    try:
        for k in key_path:
            d = d[k]
        return d
    except (KeyError, TypeError):
        return fallback


def command_defaults(config_path=None):
    """
    Build a click ``default_map`` from the lower-case command sections.

    Upper-case sections (DEFAULT, NETLIST, EXPLORE) are library settings,
    not flag defaults, and are left out.

    Args:
        config_path: Config file to read (default_config_path() if None)

    Returns:
        Dict mapping command name to {option_name: default}
    """
    try:
        data = parse_config(config_path)
    except FileNotFoundError as e:
        logger.warning(f"{e} Using built-in defaults.")
        return {}

    defaults = {}
    for section, values in data.items():
        if section.islower() and isinstance(values, dict):
            defaults[section] = dict(values)
    logger.debug(f"Command defaults from config: {defaults}")
    return defaults


def _sink(msg):
    try:
        from tqdm import tqdm

        tqdm.write(msg, end="", file=sys.stderr)
    except ModuleNotFoundError:
        sys.stderr.write(msg)


def set_log_level(level="INFO"):
    """Replace every loguru sink with the tqdm-aware one at ``level``."""
    logger.remove()
    logger.add(_sink, colorize=True, level=level)


# If tqdm is installed, configure loguru with tqdm.write
# https://github.com/Delgan/loguru/issues/135
try:
    from tqdm import tqdm  # noqa: F401

    set_log_level("INFO")
except ModuleNotFoundError:
    pass

logger.debug(f"PROJ_ROOT path is: {PROJ_ROOT}")
