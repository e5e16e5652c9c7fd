import json
import os

from .experiment import ExperimentConfig, config_hash, parse_config, serialize_config

DEFAULT_PATH = os.path.join(os.path.dirname(__file__), 'config.json')


def load_config(path=None):
    with open(path or DEFAULT_PATH, 'r') as f:
        config = json.load(f)
    return config
