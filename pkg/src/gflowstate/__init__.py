"""GFlowNet training and diagnostics workbench.

Train a trajectory-balance policy on a grid environment, log every sampled
trajectory to an embedded database, and explore the run through exact and
sampled probability estimates, trajectory-DAG queries, hexbin projections,
rankings, and transition statistics, over a JSON HTTP API or the CLI.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .envs import Action, CapabilityError, Environment, GridConfig, GridEnv
from .policy import PolicyNet
from .store import IngestionError, Store
from .training import TrainConfig, train

__all__ = [
    "Action",
    "CapabilityError",
    "Environment",
    "GridConfig",
    "GridEnv",
    "IngestionError",
    "PolicyNet",
    "Store",
    "TrainConfig",
    "train",
    "__version__",
]
