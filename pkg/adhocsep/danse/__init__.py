from .node import CompressedMessage, NodeState
from .protocol import exchange, fuse_step, local_step, relative_power_db
from .separator import (
    METHODS,
    NodeResult,
    SeparationConfig,
    SeparationOutput,
    load_estimates,
    run_separation,
    save_separation_output,
)

__all__ = [
    "CompressedMessage",
    "NodeState",
    "exchange",
    "fuse_step",
    "local_step",
    "relative_power_db",
    "METHODS",
    "NodeResult",
    "SeparationConfig",
    "SeparationOutput",
    "load_estimates",
    "run_separation",
    "save_separation_output",
]
