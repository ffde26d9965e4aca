"""JSON HTTP service, the post-hoc analysis pass, and DAG session state.

The service is read-only against the store; the only mutable state is the
in-memory session table holding per-session pinned DAG views. Every data
endpoint accepts an iteration range as `from`/`to` query params, defaulting
to the full run. Endpoints that rely on persisted analysis artifacts (the
truncated DAG) answer 409 until `analyze` has been run on the database.
"""

from __future__ import annotations

import json
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np
from fastapi import Body, FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware

from . import analytics, jsonio
from .dag import (
    DagViewState,
    TrajectoryDag,
    apply_serialized_edges,
    build_dag,
    children_table,
    collapse,
    expand,
    normalize_view,
    placeholder_counts,
    serialize_dag_edges,
    trajectories_through,
    truncate_chains,
    visible_edges,
)
from .envs import CapabilityError
from .estimators import EstimatorConfig, estimate_log_ptx, exact_terminal_log_distribution
from .policy import PolicyNet
from .store import Store

__all__ = ["AnalyzeError", "ApiService", "analyze_run", "create_app"]

SESSION_IDLE_SECONDS = 30 * 60
META_ANALYZE = "analyze_info"


class AnalyzeError(RuntimeError):
    pass


# -- analysis pass -------------------------------------------------------------


def analyze_run(
    store: Store, estimator: str = "auto", k: int = 1000, seed: int = 0
) -> dict:
    """Persist the analysis artifacts for a completed run.

    Populates log_ptx for every distinct sampled terminal and every
    validation object (exact dynamic programming where the environment can
    be enumerated, importance sampling otherwise), then builds and stores
    the truncated trajectory DAG for the full iteration range. Idempotent.
    """
    if estimator not in ("auto", "exact", "sampled"):
        raise ValueError(f"unknown estimator {estimator!r}")
    status = store.run_config()["status"]
    if status != "complete":
        raise AnalyzeError(f"run status is {status!r}; analyze requires a completed run")
    net_doc = store.get_meta("net_json")
    if net_doc is None:
        raise AnalyzeError("no trained policy stored; run training to completion first")
    net = PolicyNet.from_json(json.loads(net_doc))
    env = store.env

    sample_keys = set(store.distinct_terminals())
    validation_keys = {v.state_key for v in store.query_validation()}
    keys = sorted(sample_keys | validation_keys)

    mode = estimator
    log_ptx: dict[str, float] = {}
    if estimator in ("auto", "exact"):
        try:
            dist = exact_terminal_log_distribution(net, env)
        except CapabilityError:
            if estimator == "exact":
                raise
            mode = "sampled"
        else:
            mode = "exact"
            missing = [key for key in keys if key not in dist]
            if missing:
                raise AnalyzeError(f"states missing from the exact distribution: {missing[:5]}")
            log_ptx = {key: dist[key] for key in keys}
    if mode == "sampled":
        config = EstimatorConfig(k=k, seed=seed)
        log_ptx = {
            key: estimate_log_ptx(net, env, env.parse_key(key), config) for key in keys
        }

    store.set_log_ptx(
        {key: log_ptx[key] for key in sorted(sample_keys)},
        {key: log_ptx[key] for key in sorted(validation_keys)},
    )
    store.ensure_edge_index()
    lo, hi = store.iteration_bounds()
    truncated = truncate_chains(build_dag(store, lo, hi))
    store.save_dag_edges(lo, hi, serialize_dag_edges(truncated))

    info = {
        "estimator": mode,
        "k": k if mode == "sampled" else None,
        "seed": seed if mode == "sampled" else None,
        "range": [lo, hi],
        "states": len(keys),
        "dag_nodes": len(truncated.nodes),
        "dag_edges": len(truncated.edges),
    }
    store.set_meta(META_ANALYZE, jsonio.dumps(info))
    return info


# -- caching and sessions --------------------------------------------------------


class _CacheEntry:
    __slots__ = ("lock", "ready", "value")

    def __init__(self) -> None:
        self.lock = threading.Lock()
        self.ready = False
        self.value: Any = None


class SingleFlightCache:
    """Keyed memo with single-flight recomputation and LRU eviction."""

    def __init__(self, limit: int = 32) -> None:
        self.limit = limit
        self._entries: OrderedDict[Any, _CacheEntry] = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key: Any, build: Callable[[], Any]) -> Any:
        with self._lock:
            entry = self._entries.get(key)
            if entry is None:
                entry = self._entries[key] = _CacheEntry()
            self._entries.move_to_end(key)
        with entry.lock:
            if not entry.ready:
                entry.value = build()
                entry.ready = True
        with self._lock:
            while len(self._entries) > self.limit:
                self._entries.popitem(last=False)
        return entry.value


@dataclass
class Session:
    view: DagViewState
    last_access: float


class ApiService:
    """Request-level orchestration over one read-only store."""

    def __init__(self, store: Store, clock: Callable[[], float] = time.monotonic) -> None:
        self.store = store
        self.env = store.env
        self.clock = clock
        self.cache = SingleFlightCache()
        self.sessions: dict[str, Session] = {}
        self._session_lock = threading.Lock()

    # -- ranges and cached artifacts -----------------------------------------

    def resolve_range(self, lo: int | None, hi: int | None) -> tuple[int, int]:
        bounds = self.store.iteration_bounds()
        lo = bounds[0] if lo is None else lo
        hi = bounds[1] if hi is None else hi
        if lo > hi:
            raise HTTPException(400, f"inverted iteration range [{lo}, {hi}]")
        return lo, hi

    def analyzed(self) -> bool:
        return self.store.get_meta(META_ANALYZE) is not None

    def require_analyzed(self) -> None:
        if not self.analyzed():
            raise HTTPException(
                409,
                "analysis artifacts missing; run `gflowstate analyze --db <path>` first",
            )

    def raw_dag(self, lo: int, hi: int) -> TrajectoryDag:
        return self.cache.get(
            ("raw-dag", lo, hi), lambda: build_dag(self.store, lo, hi)
        )

    def truncated_dag(self, lo: int, hi: int) -> TrajectoryDag:
        def build() -> TrajectoryDag:
            raw = self.raw_dag(lo, hi)
            if (lo, hi) == self.store.iteration_bounds():
                rows = self.store.load_dag_edges(lo, hi)
                if rows:
                    return apply_serialized_edges(raw, rows)
            return truncate_chains(raw)

        return self.cache.get(("truncated-dag", lo, hi), build)

    def projection(
        self, lo: int, hi: int, resolution: int, method: str
    ) -> analytics.BinnedProjection:
        key = ("projection", lo, hi, resolution, method)
        return self.cache.get(
            key,
            lambda: analytics.build_projection(self.store, lo, hi, resolution, method),
        )

    # -- sessions ---------------------------------------------------------------

    def session(self, session_id: str, dag: TrajectoryDag) -> Session:
        now = self.clock()
        with self._session_lock:
            expired = [
                sid
                for sid, sess in self.sessions.items()
                if now - sess.last_access > SESSION_IDLE_SECONDS
            ]
            for sid in expired:
                del self.sessions[sid]
            sess = self.sessions.get(session_id)
            if sess is None:
                sess = Session(view=DagViewState(root=dag.root), last_access=now)
                self.sessions[session_id] = sess
            sess.last_access = now
            sess.view = normalize_view(dag, sess.view)
            return sess

    # -- payload builders ---------------------------------------------------------

    def run_payload(self) -> dict:
        config = self.store.run_config()
        env_doc = config.get("env", {})
        train_doc = config.get("train", {})
        lo, hi = self.store.iteration_bounds()
        summary_doc = self.store.get_meta("train_summary")
        payload: dict[str, Any] = {
            "env": self.env.name,
            "status": config.get("status"),
            "iterations": train_doc.get("iterations"),
            "batch_size": train_doc.get("batch_size"),
            "seed": train_doc.get("seed"),
            "iteration_lo": lo,
            "iteration_hi": hi,
            "sample_count": self.store.sample_count(),
            "distinct_terminals": len(self.store.distinct_terminals()),
            "validation_count": len(self.store.query_validation()),
            "analyzed": self.analyzed(),
            "env_config": env_doc,
            "train_config": train_doc,
            "summary": json.loads(summary_doc) if summary_doc else None,
        }
        if "height" in env_doc:
            payload["height"] = env_doc["height"]
        return payload

    def view_payload(
        self, session_id: str, dag: TrajectoryDag, view: DagViewState, lo: int, hi: int
    ) -> dict:
        env = self.env
        nodes = []
        for key in sorted(view.pinned):
            node = dag.nodes[key]
            stop = node.stop
            nodes.append(
                {
                    "key": key,
                    "depth": node.depth,
                    "visit_count": node.visit_count,
                    "first_iteration": node.first_iteration,
                    "terminal_count": node.terminal_count,
                    "stop": None
                    if stop is None
                    else {
                        "frequency": len(stop),
                        "mean_p_forward": float(np.mean(stop.p_forward)),
                    },
                    "render": env.render_state(env.parse_key(key)).to_json(),
                }
            )
        edges = []
        for src, dst in visible_edges(dag, view):
            edge = dag.edges[(src, dst)]
            trav = edge.traversals
            edges.append(
                {
                    "src": src,
                    "dst": dst,
                    "contracted_path": list(edge.contracted_path),
                    "frequency": len(trav),
                    "mean_p_forward": float(np.mean(trav.p_forward)),
                    "mean_p_backward": float(np.mean(trav.p_backward)),
                    "active_iterations": sorted({int(i) for i in trav.iterations}),
                }
            )
        return {
            "session": session_id,
            "from": lo,
            "to": hi,
            "root": dag.root,
            "truncated": dag.truncated,
            "pinned": sorted(view.pinned),
            "nodes": nodes,
            "edges": edges,
            "placeholders": placeholder_counts(dag, view),
        }

    def samples_payload(
        self, kind: str, trajectory_ids: list[int], lo: int, hi: int
    ) -> dict:
        rows = self.store.query_samples(lo, hi)
        by_id = {row.trajectory_id: row for row in rows}
        missing = sorted(t for t in set(trajectory_ids) if t not in by_id)
        if missing:
            raise HTTPException(404, {"unresolved_ids": missing})
        tids = sorted(set(trajectory_ids))
        dag = self.truncated_dag(lo, hi)
        pins = []
        for tid in tids:
            path, edges = dag.trajectory_path(tid)
            pins.append(
                {
                    "trajectory_id": tid,
                    "keys": path,
                    "edges": [[src, dst] for src, dst in edges],
                }
            )
        return {
            "kind": kind,
            "from": lo,
            "to": hi,
            "trajectory_ids": tids,
            "ranking_keys": sorted({by_id[t].terminal_key for t in tids}),
            "projection_ids": tids,
            "pins": pins,
        }

    def resolve_selection(self, body: dict) -> dict:
        kind = str(body.get("kind", "")).lower()
        ids = body.get("ids", [])
        lo, hi = self.resolve_range(body.get("from"), body.get("to"))
        if kind == "samples":
            try:
                tids = [int(i) for i in ids]
            except (TypeError, ValueError):
                raise HTTPException(400, "samples selection ids must be integers")
            return self.samples_payload(kind, tids, lo, hi)
        if kind == "bin":
            resolution = int(body.get("resolution", 20))
            method = str(body.get("method", "auto"))
            proj = self.projection(lo, hi, resolution, method)
            coords = []
            for item in ids:
                if not isinstance(item, (list, tuple)) or len(item) != 2:
                    raise HTTPException(400, f"bin selection ids must be [q, r] pairs, got {item!r}")
                coords.append((int(item[0]), int(item[1])))
            missing = sorted(c for c in set(coords) if c not in proj.bins)
            if missing:
                raise HTTPException(404, {"unresolved_bins": [list(c) for c in missing]})
            tids: list[int] = []
            for coord in coords:
                tids.extend(proj.bins[coord].sample_ids)
            payload = self.samples_payload(kind, tids, lo, hi)
            payload["bins"] = [list(c) for c in sorted(set(coords))]
            return payload
        if kind == "node":
            dag = self.truncated_dag(lo, hi)
            keys = [str(k) for k in ids]
            missing = sorted(
                k for k in set(keys) if k not in dag.node_trajectories and k != dag.root
            )
            if missing:
                raise HTTPException(404, {"unresolved_keys": missing})
            nodes = [
                {"key": key, "trajectories": trajectories_through(dag, self.store, key)}
                for key in keys
            ]
            return {"kind": kind, "from": lo, "to": hi, "nodes": nodes}
        if kind == "edges":
            raw = self.raw_dag(lo, hi)
            truncated = self.truncated_dag(lo, hi)
            tids: list[int] = []
            resolved = []
            unresolved = []
            for item in ids:
                if isinstance(item, dict):
                    src = str(item.get("src"))
                    dst = str(item.get("dst"))
                    terminal = bool(item.get("terminal", False))
                elif isinstance(item, (list, tuple)) and len(item) in (2, 3):
                    src, dst = str(item[0]), str(item[1])
                    terminal = bool(item[2]) if len(item) == 3 else False
                else:
                    raise HTTPException(400, f"edge selection ids must be [src, dst] pairs, got {item!r}")
                trav = None
                if terminal:
                    node = raw.nodes.get(src)
                    if node is not None and src == dst:
                        trav = node.stop
                elif (src, dst) in raw.edges:
                    trav = raw.edges[(src, dst)].traversals
                elif (src, dst) in truncated.edges:
                    trav = truncated.edges[(src, dst)].traversals
                if trav is None:
                    unresolved.append({"src": src, "dst": dst, "terminal": terminal})
                    continue
                tids.extend(int(t) for t in trav.trajectory_ids)
                resolved.append({"src": src, "dst": dst, "terminal": terminal})
            if unresolved:
                raise HTTPException(404, {"unresolved_edges": unresolved})
            payload = self.samples_payload(kind, tids, lo, hi)
            payload["edges"] = resolved
            return payload
        raise HTTPException(400, f"unknown selection kind {body.get('kind')!r}")


# -- application factory -----------------------------------------------------------


def _json(payload: Any) -> Response:
    return Response(content=jsonio.dumps_bytes(payload), media_type="application/json")


def create_app(
    db_path: str | None = None,
    *,
    store: Store | None = None,
    service: ApiService | None = None,
    clock: Callable[[], float] = time.monotonic,
) -> FastAPI:
    if service is None:
        if store is None:
            if db_path is None:
                raise ValueError("create_app needs a db_path, store, or service")
            store = Store.open(db_path)
        service = ApiService(store, clock=clock)

    app = FastAPI(title="gflowstate", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.service = service
    svc = service

    @app.get("/api/run")
    def api_run() -> Response:
        return _json(svc.run_payload())

    @app.get("/api/samples")
    def api_samples(
        from_: int | None = Query(None, alias="from"),
        to: int | None = Query(None),
        limit: int | None = Query(None, ge=1),
        terminal_key: str | None = Query(None),
    ) -> Response:
        lo, hi = svc.resolve_range(from_, to)
        rows = svc.store.query_samples(lo, hi, limit=limit, terminal_key=terminal_key)
        return _json(
            {
                "from": lo,
                "to": hi,
                "samples": [
                    {
                        "trajectory_id": r.trajectory_id,
                        "iteration": r.iteration,
                        "terminal_key": r.terminal_key,
                        "reward": r.reward,
                        "loss": r.loss,
                        "log_ptx": r.log_ptx,
                    }
                    for r in rows
                ],
            }
        )

    @app.get("/api/ranking")
    def api_ranking(
        metric: str = Query("reward"),
        n: int = Query(20, ge=1),
        from_: int | None = Query(None, alias="from"),
        to: int | None = Query(None),
        step: int = Query(1, ge=1),
    ) -> Response:
        lo, hi = svc.resolve_range(from_, to)
        samples = svc.store.query_samples(lo, hi)
        if samples:
            try:
                frames = analytics.ranking_frames(samples, metric, n, lo, hi, step)
            except ValueError as exc:
                raise HTTPException(400, str(exc))
        else:
            frames = []
        return _json({"metric": metric, "n": n, "from": lo, "to": hi, "frames": frames})

    @app.get("/api/projection")
    def api_projection(
        mode: str = Query("binned"),
        resolution: int = Query(20, ge=1),
        method: str = Query("auto"),
        from_: int | None = Query(None, alias="from"),
        to: int | None = Query(None),
    ) -> Response:
        lo, hi = svc.resolve_range(from_, to)
        try:
            proj = svc.projection(lo, hi, resolution, method)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        base = {
            "mode": mode,
            "method": proj.method,
            "from": lo,
            "to": hi,
            "totals": {"samples": len(proj.samples), "validation": len(proj.validation)},
        }
        if mode == "binned":
            base["resolution"] = proj.resolution
            base["origin"] = [proj.grid.origin_x, proj.grid.origin_y]
            base["radius"] = proj.grid.radius
            base["bins"] = [
                analytics.bin_summary(proj, proj.bins[cell]) for cell in sorted(proj.bins)
            ]
            return _json(base)
        if mode == "scatter":
            base["points"] = [
                {
                    "trajectory_id": row.trajectory_id,
                    "iteration": row.iteration,
                    "terminal_key": row.terminal_key,
                    "reward": row.reward,
                    "loss": row.loss,
                    "x": float(pt[0]),
                    "y": float(pt[1]),
                }
                for row, pt in zip(proj.samples, proj.sample_points)
            ]
            base["validation"] = [
                {
                    "state_key": row.state_key,
                    "reward": row.reward,
                    "x": float(pt[0]),
                    "y": float(pt[1]),
                }
                for row, pt in zip(proj.validation, proj.validation_points)
            ]
            return _json(base)
        raise HTTPException(400, f"unknown projection mode {mode!r}")

    @app.get("/api/projection/bin/{q}/{r}")
    def api_projection_bin(
        q: int,
        r: int,
        resolution: int = Query(20, ge=1),
        method: str = Query("auto"),
        from_: int | None = Query(None, alias="from"),
        to: int | None = Query(None),
    ) -> Response:
        lo, hi = svc.resolve_range(from_, to)
        try:
            proj = svc.projection(lo, hi, resolution, method)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        detail = analytics.bin_detail(proj, q, r)
        if detail is None:
            raise HTTPException(404, f"no bin ({q}, {r}) in range [{lo}, {hi}]")
        env = svc.env
        by_id = {s.trajectory_id: s for s in proj.samples}
        states = [env.parse_key(by_id[t].terminal_key) for t in detail["sample_ids"]]
        if not states:
            states = [env.parse_key(k) for k in detail["validation_keys"]]
        detail["render"] = env.render_states(states).to_json()
        detail["from"] = lo
        detail["to"] = hi
        return _json(detail)

    @app.get("/api/dag/session/{session_id}")
    def api_dag_session(
        session_id: str,
        from_: int | None = Query(None, alias="from"),
        to: int | None = Query(None),
    ) -> Response:
        svc.require_analyzed()
        lo, hi = svc.resolve_range(from_, to)
        dag = svc.truncated_dag(lo, hi)
        sess = svc.session(session_id, dag)
        return _json(svc.view_payload(session_id, dag, sess.view, lo, hi))

    @app.post("/api/dag/session/{session_id}/expand")
    def api_dag_expand(
        session_id: str,
        body: dict = Body(...),
        from_: int | None = Query(None, alias="from"),
        to: int | None = Query(None),
    ) -> Response:
        svc.require_analyzed()
        lo, hi = svc.resolve_range(from_, to)
        dag = svc.truncated_dag(lo, hi)
        sess = svc.session(session_id, dag)
        try:
            sess.view = expand(dag, sess.view, str(body.get("key")), str(body.get("child")))
        except KeyError as exc:
            raise HTTPException(404, str(exc.args[0]))
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        return _json(svc.view_payload(session_id, dag, sess.view, lo, hi))

    @app.post("/api/dag/session/{session_id}/collapse")
    def api_dag_collapse(
        session_id: str,
        body: dict = Body(...),
        from_: int | None = Query(None, alias="from"),
        to: int | None = Query(None),
    ) -> Response:
        svc.require_analyzed()
        lo, hi = svc.resolve_range(from_, to)
        dag = svc.truncated_dag(lo, hi)
        sess = svc.session(session_id, dag)
        try:
            sess.view = collapse(dag, sess.view, str(body.get("key")))
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        return _json(svc.view_payload(session_id, dag, sess.view, lo, hi))

    @app.get("/api/dag/children/{key}")
    def api_dag_children(
        key: str,
        from_: int | None = Query(None, alias="from"),
        to: int | None = Query(None),
    ) -> Response:
        svc.require_analyzed()
        lo, hi = svc.resolve_range(from_, to)
        dag = svc.truncated_dag(lo, hi)
        probe = DagViewState(root=dag.root, pinned={dag.root, key})
        try:
            rows = children_table(dag, probe, key)
        except KeyError as exc:
            raise HTTPException(404, str(exc.args[0]))
        return _json({"key": key, "from": lo, "to": hi, "children": rows})

    @app.get("/api/dag/through/{key}")
    def api_dag_through(
        key: str,
        limit: int | None = Query(None, ge=1),
        from_: int | None = Query(None, alias="from"),
        to: int | None = Query(None),
    ) -> Response:
        svc.require_analyzed()
        lo, hi = svc.resolve_range(from_, to)
        dag = svc.truncated_dag(lo, hi)
        rows = trajectories_through(dag, svc.store, key, limit=limit)
        return _json({"key": key, "from": lo, "to": hi, "trajectories": rows})

    @app.get("/api/transitions")
    def api_transitions(
        metric: str = Query("probability"),
        direction: str = Query("forward"),
        top: int = Query(50, ge=1),
        from_: int | None = Query(None, alias="from"),
        to: int | None = Query(None),
    ) -> Response:
        lo, hi = svc.resolve_range(from_, to)
        dag = svc.raw_dag(lo, hi)
        try:
            rows = analytics.transition_heatmap(dag, metric, direction, top)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        return _json(
            {
                "metric": metric,
                "direction": direction,
                "from": lo,
                "to": hi,
                "rows": rows,
            }
        )

    @app.get("/api/transitions/history")
    def api_transitions_history(
        src: str = Query(...),
        dst: str = Query(...),
        terminal: bool = Query(False),
        from_: int | None = Query(None, alias="from"),
        to: int | None = Query(None),
    ) -> Response:
        lo, hi = svc.resolve_range(from_, to)
        dag = svc.raw_dag(lo, hi)
        series = analytics.transition_history(dag, src, dst, terminal)
        return _json(
            {
                "src": src,
                "dst": dst,
                "terminal": terminal,
                "from": lo,
                "to": hi,
                "series": series,
            }
        )

    @app.post("/api/selection/resolve")
    def api_selection_resolve(body: dict = Body(...)) -> Response:
        return _json(svc.resolve_selection(body))

    @app.get("/api/render/state/{key}")
    def api_render_state(key: str) -> Response:
        try:
            state = svc.env.parse_key(key)
        except ValueError as exc:
            raise HTTPException(404, str(exc))
        return _json({"key": key, "render": svc.env.render_state(state).to_json()})

    @app.post("/api/render/states")
    def api_render_states(body: dict = Body(...)) -> Response:
        keys = body.get("keys", [])
        if not isinstance(keys, list):
            raise HTTPException(400, "body must carry a `keys` list")
        states = []
        bad = []
        for key in keys:
            try:
                states.append(svc.env.parse_key(str(key)))
            except ValueError:
                bad.append(key)
        if bad:
            raise HTTPException(404, {"unresolved_keys": bad})
        return _json({"count": len(states), "render": svc.env.render_states(states).to_json()})

    return app
