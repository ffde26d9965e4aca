from __future__ import annotations

import pytest

from gflowstate.envs import GridConfig, GridEnv
from gflowstate.store import Store
from gflowstate.training import TrainConfig, train


@pytest.fixture(scope="session")
def mini_run_path(tmp_path_factory) -> str:
    """Trained and analyzed desk-scale run shared by read-only tests."""
    from gflowstate.api import analyze_run

    path = str(tmp_path_factory.mktemp("mini") / "run.db")
    env = GridEnv(GridConfig(height=4))
    config = TrainConfig(iterations=50, batch_size=16, seed=7)
    with Store.create(path, env, config.to_json()) as store:
        store.populate_grid_validation()
        train(env, config, store)
    with Store.open(path, writable=True) as store:
        analyze_run(store)
    return path


@pytest.fixture(scope="session")
def mini_store(mini_run_path) -> Store:
    with Store.open(mini_run_path) as store:
        yield store
