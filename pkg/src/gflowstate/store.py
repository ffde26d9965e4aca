"""Single-file SQLite store for runs, trajectories, samples, and analysis.

Every trajectory is logged step by step; the Stop decision is recorded as a
terminal-flagged self-edge so terminal probabilities survive round trips.
Writes happen in one transaction per training iteration. All stored JSON
goes through the deterministic serializer, so identical runs produce
identical database content.
"""

from __future__ import annotations

import json
import math
import os
import sqlite3
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Sequence

from . import jsonio
from .envs import Action, Environment, GridConfig, GridEnv
from .training import Trajectory

__all__ = ["EdgeRecord", "IngestionError", "SampleRow", "Store", "ValidationRow", "make_env"]

SCHEMA_VERSION = "1"

_SCHEMA = """
CREATE TABLE meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
CREATE TABLE runs (
    id INTEGER PRIMARY KEY CHECK (id = 1),
    env TEXT NOT NULL,
    config_json TEXT NOT NULL,
    status TEXT NOT NULL
);
CREATE TABLE nodes (
    state_key TEXT PRIMARY KEY,
    features_json TEXT NOT NULL
);
CREATE TABLE edges (
    trajectory_id INTEGER NOT NULL,
    step_index INTEGER NOT NULL,
    src_key TEXT NOT NULL,
    dst_key TEXT NOT NULL,
    action TEXT NOT NULL,
    iteration INTEGER NOT NULL,
    p_forward REAL NOT NULL,
    p_backward REAL NOT NULL,
    terminal INTEGER NOT NULL DEFAULT 0,
    PRIMARY KEY (trajectory_id, step_index)
);
CREATE TABLE samples (
    trajectory_id INTEGER PRIMARY KEY,
    terminal_key TEXT NOT NULL,
    reward REAL NOT NULL,
    loss REAL NOT NULL,
    iteration INTEGER NOT NULL,
    log_ptx REAL
);
CREATE TABLE validation (
    state_key TEXT PRIMARY KEY,
    reward REAL NOT NULL,
    features_json TEXT NOT NULL,
    log_ptx REAL
);
CREATE TABLE dag_edges (
    range_lo INTEGER NOT NULL,
    range_hi INTEGER NOT NULL,
    src_key TEXT NOT NULL,
    dst_key TEXT NOT NULL,
    contracted_path_json TEXT NOT NULL,
    traversals_json TEXT NOT NULL,
    PRIMARY KEY (range_lo, range_hi, src_key, dst_key)
) WITHOUT ROWID;
CREATE INDEX idx_samples_iteration ON samples (iteration, trajectory_id);
"""


class IngestionError(ValueError):
    """A validation-set record failed to parse; carries the 1-based line number."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


def make_env(name: str, config_doc: dict) -> Environment:
    if name == "grid":
        return GridEnv(GridConfig.from_json(config_doc))
    raise ValueError(f"unknown environment {name!r}")


@dataclass(frozen=True)
class SampleRow:
    trajectory_id: int
    terminal_key: str
    reward: float
    loss: float
    iteration: int
    log_ptx: float | None


@dataclass(frozen=True)
class ValidationRow:
    state_key: str
    reward: float
    features: list[float]
    log_ptx: float | None


@dataclass(frozen=True)
class EdgeRecord:
    trajectory_id: int
    step_index: int
    src_key: str
    dst_key: str
    action: str
    iteration: int
    p_forward: float
    p_backward: float
    terminal: bool


class Store:
    """Run storage bound to one environment and one training run."""

    def __init__(self, conn: sqlite3.Connection, env: Environment, path: str) -> None:
        self.conn = conn
        self.env = env
        self.path = path

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def create(cls, path: str, env: Environment, train_config: dict) -> "Store":
        if os.path.exists(path) and os.path.getsize(path) > 0:
            raise ValueError(f"refusing to overwrite existing database {path}")
        conn = sqlite3.connect(path)
        conn.executescript(_SCHEMA)
        config = {"env": env.config_json(), "train": dict(train_config)}
        with conn:
            conn.execute(
                "INSERT INTO runs (id, env, config_json, status) VALUES (1, ?, ?, 'running')",
                (env.name, jsonio.dumps(config)),
            )
            conn.execute(
                "INSERT INTO meta (key, value) VALUES ('schema_version', ?)",
                (SCHEMA_VERSION,),
            )
        return cls(conn, env, path)

    @classmethod
    def open(cls, path: str, writable: bool = False) -> "Store":
        if not os.path.exists(path):
            raise FileNotFoundError(f"no database at {path}")
        if writable:
            conn = sqlite3.connect(path)
        else:
            # Read-only serving shares one connection across request worker
            # threads; the sqlite library is built in serialized mode.
            conn = sqlite3.connect(f"file:{path}?mode=ro", uri=True, check_same_thread=False)
        row = conn.execute("SELECT value FROM meta WHERE key = 'schema_version'").fetchone()
        if row is None or row[0] != SCHEMA_VERSION:
            conn.close()
            found = None if row is None else row[0]
            raise ValueError(f"unsupported schema version {found!r} (expected {SCHEMA_VERSION!r})")
        name, config_json = conn.execute("SELECT env, config_json FROM runs WHERE id = 1").fetchone()
        env = make_env(name, json.loads(config_json)["env"])
        return cls(conn, env, path)

    def close(self) -> None:
        self.conn.close()

    def __enter__(self) -> "Store":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- run metadata ------------------------------------------------------

    def run_config(self) -> dict:
        config_json, status = self.conn.execute(
            "SELECT config_json, status FROM runs WHERE id = 1"
        ).fetchone()
        doc = json.loads(config_json)
        doc["status"] = status
        return doc

    def get_meta(self, key: str) -> str | None:
        row = self.conn.execute("SELECT value FROM meta WHERE key = ?", (key,)).fetchone()
        return None if row is None else row[0]

    def set_meta(self, key: str, value: str) -> None:
        with self.conn:
            self.conn.execute(
                "INSERT INTO meta (key, value) VALUES (?, ?) "
                "ON CONFLICT (key) DO UPDATE SET value = excluded.value",
                (key, value),
            )

    def finish_run(self, net, summary: dict) -> None:
        stored = {k: v for k, v in summary.items() if k != "wall_time_s"}
        with self.conn:
            self.conn.execute("UPDATE runs SET status = 'complete' WHERE id = 1")
            self.conn.execute(
                "INSERT INTO meta (key, value) VALUES ('net_json', ?) "
                "ON CONFLICT (key) DO UPDATE SET value = excluded.value",
                (jsonio.dumps(net.to_json()),),
            )
            self.conn.execute(
                "INSERT INTO meta (key, value) VALUES ('train_summary', ?) "
                "ON CONFLICT (key) DO UPDATE SET value = excluded.value",
                (jsonio.dumps(stored),),
            )

    def mark_aborted(self) -> None:
        try:
            with self.conn:
                self.conn.execute("UPDATE runs SET status = 'aborted' WHERE id = 1")
        except sqlite3.Error:
            pass  # the partial-run marker is best effort

    # -- trajectory logging --------------------------------------------------

    def _trajectory_rows(self, traj: Trajectory, reward: float, loss: float):
        env = self.env
        if math.isnan(loss):
            raise ValueError(f"trajectory {traj.trajectory_id}: loss is NaN")
        node_rows: list[tuple[str, str]] = []
        edge_rows: list[tuple] = []
        steps = traj.steps
        if not steps or steps[-1].action is not Action.STOP:
            raise ValueError(f"trajectory {traj.trajectory_id} does not end with Stop")
        for i, step in enumerate(steps):
            src = env.state_key(step.state)
            node_rows.append((src, jsonio.dumps(env.features(step.state).tolist())))
            if step.action is Action.STOP:
                dst, terminal = src, 1
            else:
                dst, terminal = env.state_key(steps[i + 1].state), 0
            if math.isnan(step.p_backward) or math.isnan(step.p_forward):
                raise ValueError(f"trajectory {traj.trajectory_id}: unfilled step probability")
            edge_rows.append(
                (
                    traj.trajectory_id,
                    i,
                    src,
                    dst,
                    step.action.value,
                    traj.iteration,
                    step.p_forward,
                    step.p_backward,
                    terminal,
                )
            )
        sample_row = (
            traj.trajectory_id,
            env.state_key(traj.terminal),
            reward,
            loss,
            traj.iteration,
        )
        return node_rows, edge_rows, sample_row

    def log_iteration(
        self,
        trajectories: Sequence[Trajectory],
        rewards: Sequence[float],
        losses: Sequence[float],
    ) -> None:
        """Insert a batch of trajectories atomically."""
        nodes: list[tuple[str, str]] = []
        edges: list[tuple] = []
        samples: list[tuple] = []
        for traj, reward, loss in zip(trajectories, rewards, losses):
            n, e, s = self._trajectory_rows(traj, reward, loss)
            nodes.extend(n)
            edges.extend(e)
            samples.append(s)
        with self.conn:
            self.conn.executemany(
                "INSERT OR IGNORE INTO nodes (state_key, features_json) VALUES (?, ?)", nodes
            )
            self.conn.executemany(
                "INSERT INTO edges (trajectory_id, step_index, src_key, dst_key, action,"
                " iteration, p_forward, p_backward, terminal)"
                " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
                edges,
            )
            self.conn.executemany(
                "INSERT INTO samples (trajectory_id, terminal_key, reward, loss, iteration)"
                " VALUES (?, ?, ?, ?, ?)",
                samples,
            )

    def log_trajectory(self, traj: Trajectory, reward: float, loss: float) -> None:
        self.log_iteration([traj], [reward], [loss])

    # -- queries -------------------------------------------------------------

    @staticmethod
    def _check_range(lo: int | None, hi: int | None) -> None:
        if lo is not None and hi is not None and lo > hi:
            raise ValueError(f"inverted iteration range [{lo}, {hi}]")

    def iteration_bounds(self) -> tuple[int, int]:
        row = self.conn.execute("SELECT MIN(iteration), MAX(iteration) FROM samples").fetchone()
        if row[0] is None:
            return (0, 0)
        return (int(row[0]), int(row[1]))

    def query_samples(
        self,
        lo: int | None = None,
        hi: int | None = None,
        limit: int | None = None,
        terminal_key: str | None = None,
    ) -> list[SampleRow]:
        self._check_range(lo, hi)
        sql = (
            "SELECT trajectory_id, terminal_key, reward, loss, iteration, log_ptx FROM samples"
        )
        clauses, args = [], []
        if lo is not None:
            clauses.append("iteration >= ?")
            args.append(lo)
        if hi is not None:
            clauses.append("iteration <= ?")
            args.append(hi)
        if terminal_key is not None:
            clauses.append("terminal_key = ?")
            args.append(terminal_key)
        if clauses:
            sql += " WHERE " + " AND ".join(clauses)
        sql += " ORDER BY iteration, trajectory_id"
        if limit is not None:
            sql += f" LIMIT {int(limit)}"
        return [SampleRow(*row) for row in self.conn.execute(sql, args)]

    def sample_count(self, lo: int | None = None, hi: int | None = None) -> int:
        self._check_range(lo, hi)
        row = self.conn.execute(
            "SELECT COUNT(*) FROM samples WHERE iteration >= ? AND iteration <= ?",
            (lo if lo is not None else -(1 << 60), hi if hi is not None else (1 << 60)),
        ).fetchone()
        return int(row[0])

    def distinct_terminals(self, lo: int | None = None, hi: int | None = None) -> list[str]:
        self._check_range(lo, hi)
        rows = self.conn.execute(
            "SELECT DISTINCT terminal_key FROM samples WHERE iteration >= ? AND iteration <= ?"
            " ORDER BY terminal_key",
            (lo if lo is not None else -(1 << 60), hi if hi is not None else (1 << 60)),
        )
        return [r[0] for r in rows]

    def node_features(self) -> dict[str, list[float]]:
        rows = self.conn.execute("SELECT state_key, features_json FROM nodes ORDER BY state_key")
        return {key: json.loads(doc) for key, doc in rows}

    def iter_edges_grouped(
        self, lo: int | None = None, hi: int | None = None
    ) -> Iterator[EdgeRecord]:
        """Edges in `[lo, hi]` ordered by (src, dst, iteration, trajectory)."""
        self._check_range(lo, hi)
        rows = self.conn.execute(
            "SELECT trajectory_id, step_index, src_key, dst_key, action, iteration,"
            " p_forward, p_backward, terminal FROM edges"
            " WHERE iteration >= ? AND iteration <= ?"
            " ORDER BY src_key, dst_key, iteration, trajectory_id",
            (lo if lo is not None else -(1 << 60), hi if hi is not None else (1 << 60)),
        )
        for row in rows:
            yield EdgeRecord(*row[:8], bool(row[8]))

    def trajectory_steps(self, trajectory_ids: Sequence[int]) -> dict[int, list[EdgeRecord]]:
        out: dict[int, list[EdgeRecord]] = {}
        CHUNK = 500
        ids = list(trajectory_ids)
        for start in range(0, len(ids), CHUNK):
            chunk = ids[start : start + CHUNK]
            marks = ",".join("?" * len(chunk))
            rows = self.conn.execute(
                "SELECT trajectory_id, step_index, src_key, dst_key, action, iteration,"
                f" p_forward, p_backward, terminal FROM edges WHERE trajectory_id IN ({marks})"
                " ORDER BY trajectory_id, step_index",
                chunk,
            )
            for row in rows:
                rec = EdgeRecord(*row[:8], bool(row[8]))
                out.setdefault(rec.trajectory_id, []).append(rec)
        return out

    def ensure_edge_index(self) -> None:
        with self.conn:
            self.conn.execute(
                "CREATE INDEX IF NOT EXISTS idx_edges_pair"
                " ON edges (src_key, dst_key, iteration, trajectory_id)"
            )

    # -- validation set -------------------------------------------------------

    def load_validation(self, records: Iterable[dict]) -> int:
        """Ingest validation objects; replaces any existing set."""
        rows = []
        for line, rec in enumerate(records, start=1):
            if not isinstance(rec, dict):
                raise IngestionError(line, "record is not an object")
            try:
                key = rec["state_key"]
                reward = float(rec["reward"])
                features = [float(v) for v in rec["features"]]
            except (KeyError, TypeError, ValueError) as exc:
                raise IngestionError(line, f"bad record: {exc}") from exc
            if not isinstance(key, str) or not key:
                raise IngestionError(line, "state_key must be a non-empty string")
            if reward <= 0:
                raise IngestionError(line, f"reward must be positive, got {reward}")
            rows.append((key, reward, jsonio.dumps(features)))
        with self.conn:
            self.conn.execute("DELETE FROM validation")
            self.conn.executemany(
                "INSERT INTO validation (state_key, reward, features_json) VALUES (?, ?, ?)",
                rows,
            )
        return len(rows)

    def populate_grid_validation(self) -> int:
        """Validation set = every state of the environment (grid default)."""
        env = self.env
        records = [
            {
                "state_key": env.state_key(s),
                "reward": env.reward(s),
                "features": env.features(s).tolist(),
            }
            for s in env.enumerate_states()
        ]
        return self.load_validation(records)

    def query_validation(self) -> list[ValidationRow]:
        rows = self.conn.execute(
            "SELECT state_key, reward, features_json, log_ptx FROM validation ORDER BY state_key"
        )
        return [ValidationRow(r[0], r[1], json.loads(r[2]), r[3]) for r in rows]

    # -- analysis artifacts ----------------------------------------------------

    def set_log_ptx(
        self, sample_values: dict[str, float], validation_values: dict[str, float]
    ) -> None:
        with self.conn:
            self.conn.executemany(
                "UPDATE samples SET log_ptx = ? WHERE terminal_key = ?",
                [(sample_values[k], k) for k in sorted(sample_values)],
            )
            self.conn.executemany(
                "UPDATE validation SET log_ptx = ? WHERE state_key = ?",
                [(validation_values[k], k) for k in sorted(validation_values)],
            )

    def save_dag_edges(self, lo: int, hi: int, rows: Iterable[tuple[str, str, str, str]]) -> None:
        with self.conn:
            self.conn.execute(
                "DELETE FROM dag_edges WHERE range_lo = ? AND range_hi = ?", (lo, hi)
            )
            self.conn.executemany(
                "INSERT INTO dag_edges (range_lo, range_hi, src_key, dst_key,"
                " contracted_path_json, traversals_json) VALUES (?, ?, ?, ?, ?, ?)",
                [(lo, hi, *row) for row in rows],
            )

    def load_dag_edges(self, lo: int, hi: int) -> list[tuple[str, str, str, str]]:
        rows = self.conn.execute(
            "SELECT src_key, dst_key, contracted_path_json, traversals_json FROM dag_edges"
            " WHERE range_lo = ? AND range_hi = ? ORDER BY src_key, dst_key",
            (lo, hi),
        )
        return [tuple(r) for r in rows]

    def content_dump(self) -> str:
        """Canonical SQL dump of the database content."""
        return "\n".join(self.conn.iterdump())
