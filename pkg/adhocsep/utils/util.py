import hashlib
import json
import os
from typing import Any

from omegaconf import DictConfig, OmegaConf


def to_plain(cfg: DictConfig | dict) -> dict:
    if isinstance(cfg, DictConfig):
        return OmegaConf.to_container(cfg, resolve=True)  # type: ignore[return-value]
    return dict(cfg)


def config_fingerprint(config: DictConfig | dict) -> str:
    """MD5 of the JSON-serialized config, independent of key order."""
    return hashlib.md5(
        json.dumps(to_plain(config), sort_keys=True, default=str).encode()
    ).hexdigest()


def write_json(path: str, data: Any) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        json.dump(data, f, indent=4, sort_keys=True)


def read_json(path: str) -> Any:
    with open(path) as f:
        return json.load(f)
