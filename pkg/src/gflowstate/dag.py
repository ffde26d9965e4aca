"""Trajectory DAG: merge logged edges, contract pass-through chains, and
serve the expand/collapse view state.

Identical transitions from every trajectory in an iteration range merge into
one edge carrying the full traversal history. Chains of interior nodes that
no sample terminated at (indegree 1, outdegree 1, successor with indegree 1,
never the root) contract to a single edge whose per-traversal probabilities
are the products along the hidden path, so any trajectory can be
reconstructed exactly from the truncated graph. Stop decisions live as node
annotations, not structural edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import json
import numpy as np

from . import jsonio
from .store import Store

__all__ = [
    "DagEdge",
    "DagNode",
    "DagViewState",
    "TrajectoryDag",
    "Traversals",
    "build_dag",
    "children_table",
    "collapse",
    "expand",
    "trajectories_through",
    "truncate_chains",
]


@dataclass(frozen=True)
class Traversals:
    """Parallel arrays describing every trajectory that took an edge."""

    iterations: np.ndarray
    trajectory_ids: np.ndarray
    p_forward: np.ndarray
    p_backward: np.ndarray

    @classmethod
    def from_lists(cls, iters, tids, pf, pb) -> "Traversals":
        t = cls(
            np.asarray(iters, dtype=np.int64),
            np.asarray(tids, dtype=np.int64),
            np.asarray(pf, dtype=np.float64),
            np.asarray(pb, dtype=np.float64),
        )
        order = np.argsort(t.trajectory_ids, kind="stable")
        return cls(
            t.iterations[order], t.trajectory_ids[order], t.p_forward[order], t.p_backward[order]
        )

    def __len__(self) -> int:
        return int(self.trajectory_ids.shape[0])

    def contains(self, trajectory_id: int) -> bool:
        i = int(np.searchsorted(self.trajectory_ids, trajectory_id))
        return i < len(self) and int(self.trajectory_ids[i]) == trajectory_id

    def to_json(self) -> list:
        return [
            [int(it), int(tid), float(pf), float(pb)]
            for it, tid, pf, pb in zip(
                self.iterations, self.trajectory_ids, self.p_forward, self.p_backward
            )
        ]

    @classmethod
    def from_json(cls, rows: list) -> "Traversals":
        if not rows:
            return cls.from_lists([], [], [], [])
        arr = np.asarray(rows, dtype=np.float64)
        return cls.from_lists(arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2], arr[:, 3])


@dataclass(frozen=True)
class DagEdge:
    src: str
    dst: str
    contracted_path: tuple[str, ...]
    traversals: Traversals


@dataclass(frozen=True)
class DagNode:
    key: str
    depth: int
    visit_count: int
    first_iteration: int
    terminal_count: int
    stop: Traversals | None


@dataclass
class TrajectoryDag:
    """Merged (and optionally truncated) trajectory graph for one range."""

    root: str
    range_lo: int
    range_hi: int
    truncated: bool
    nodes: dict[str, DagNode]
    edges: dict[tuple[str, str], DagEdge]
    node_trajectories: dict[str, np.ndarray]  # every raw state, even contracted ones

    out_keys: dict[str, list[str]] = field(default_factory=dict)
    in_keys: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.out_keys = {key: [] for key in self.nodes}
        self.in_keys = {key: [] for key in self.nodes}
        for src, dst in self.edges:
            self.out_keys[src].append(dst)
            self.in_keys[dst].append(src)
        for adj in (self.out_keys, self.in_keys):
            for key in adj:
                adj[key].sort()

    def trajectory_path(self, trajectory_id: int) -> tuple[list[str], list[tuple[str, str]]]:
        """Visible node path and edge list a trajectory follows in this graph."""
        path = [self.root]
        edges: list[tuple[str, str]] = []
        current = self.root
        for _ in range(len(self.nodes) + 1):
            stop = self.nodes[current].stop
            if stop is not None and stop.contains(trajectory_id):
                return path, edges
            nxt = None
            for dst in self.out_keys[current]:
                if self.edges[(current, dst)].traversals.contains(trajectory_id):
                    nxt = dst
                    break
            if nxt is None:
                raise ValueError(
                    f"trajectory {trajectory_id} does not continue from {current!r}"
                )
            edges.append((current, nxt))
            path.append(nxt)
            current = nxt
        raise ValueError(f"trajectory {trajectory_id} does not terminate in the graph")


def build_dag(store: Store, lo: int | None = None, hi: int | None = None) -> TrajectoryDag:
    """Merge the logged edges of an iteration range into a raw DAG."""
    bounds = store.iteration_bounds()
    range_lo = bounds[0] if lo is None else lo
    range_hi = bounds[1] if hi is None else hi
    if range_lo > range_hi:
        raise ValueError(f"inverted iteration range [{range_lo}, {range_hi}]")

    edges: dict[tuple[str, str], DagEdge] = {}
    stops: dict[str, Traversals] = {}
    node_tids: dict[str, list[int]] = {}
    node_first: dict[str, int] = {}

    group_key: tuple[str, str] | None = None
    group: list[tuple[int, int, float, float]] = []
    group_terminal = False

    def flush() -> None:
        nonlocal group
        if group_key is None or not group:
            return
        trav = Traversals.from_lists(
            [g[0] for g in group], [g[1] for g in group], [g[2] for g in group], [g[3] for g in group]
        )
        if group_terminal:
            stops[group_key[0]] = trav
        else:
            edges[group_key] = DagEdge(group_key[0], group_key[1], (), trav)
        group = []

    for rec in store.iter_edges_grouped(range_lo, range_hi):
        key = (rec.src_key, rec.dst_key)
        if key != group_key:
            flush()
            group_key = key
            group_terminal = rec.terminal
        group.append((rec.iteration, rec.trajectory_id, rec.p_forward, rec.p_backward))
        node_tids.setdefault(rec.src_key, []).append(rec.trajectory_id)
        for key in (rec.src_key, rec.dst_key):
            prev = node_first.get(key)
            if prev is None or rec.iteration < prev:
                node_first[key] = rec.iteration
    flush()

    root = store.env.state_key(store.env.initial_state())
    all_keys = sorted(set(node_tids) | {src for src, _ in edges} | {dst for _, dst in edges})
    if not all_keys:
        all_keys = [root]
        node_tids[root] = []
        node_first[root] = range_lo

    node_trajectories = {
        key: np.sort(np.asarray(node_tids.get(key, []), dtype=np.int64)) for key in all_keys
    }
    depths = _depths(root, all_keys, edges)
    nodes = {}
    for key in all_keys:
        stop = stops.get(key)
        nodes[key] = DagNode(
            key=key,
            depth=depths[key],
            visit_count=len(node_trajectories[key]),
            first_iteration=node_first.get(key, range_lo),
            terminal_count=0 if stop is None else len(stop),
            stop=stop,
        )
    return TrajectoryDag(
        root=root,
        range_lo=range_lo,
        range_hi=range_hi,
        truncated=False,
        nodes=nodes,
        edges=edges,
        node_trajectories=node_trajectories,
    )


def _depths(root: str, keys: Sequence[str], edges: dict[tuple[str, str], DagEdge]) -> dict[str, int]:
    """Longest-path depth from the root; contracted edges count their span."""
    incoming: dict[str, list[tuple[str, int]]] = {key: [] for key in keys}
    outdeg = {key: 0 for key in keys}
    for (src, dst), edge in edges.items():
        incoming[dst].append((src, len(edge.contracted_path) + 1))
        outdeg[src] += 1
    depths: dict[str, int] = {}

    order = _topological(keys, edges)
    for key in order:
        if key == root:
            depths[key] = 0
            continue
        best = 0
        for src, span in incoming[key]:
            best = max(best, depths.get(src, 0) + span)
        depths[key] = best
    return depths


def _topological(keys: Sequence[str], edges: dict[tuple[str, str], DagEdge]) -> list[str]:
    indeg = {key: 0 for key in keys}
    out: dict[str, list[str]] = {key: [] for key in keys}
    for src, dst in edges:
        indeg[dst] += 1
        out[src].append(dst)
    ready = sorted(key for key, d in indeg.items() if d == 0)
    order: list[str] = []
    while ready:
        key = ready.pop(0)
        order.append(key)
        inserted = []
        for dst in out[key]:
            indeg[dst] -= 1
            if indeg[dst] == 0:
                inserted.append(dst)
        for dst in sorted(inserted):
            ready.append(dst)
    if len(order) != len(keys):
        raise ValueError("trajectory graph contains a cycle")
    return order


def truncate_chains(dag: TrajectoryDag) -> TrajectoryDag:
    """Contract maximal pass-through chains into single edges.

    A node is contractible when exactly one merged edge enters it, exactly
    one leaves it, no sample in range terminated at it, it is not the root,
    and its unique successor has indegree 1 (so contracted edges never
    collide with each other or an original edge).
    """
    indeg = {key: 0 for key in dag.nodes}
    outdeg = {key: 0 for key in dag.nodes}
    succ: dict[str, str] = {}
    pred: dict[str, str] = {}
    for src, dst in dag.edges:
        outdeg[src] += 1
        indeg[dst] += 1
        succ[src] = dst if outdeg[src] == 1 else succ.get(src, dst)
        pred[dst] = src if indeg[dst] == 1 else pred.get(dst, src)

    def contractible(key: str) -> bool:
        if key == dag.root or indeg[key] != 1 or outdeg[key] != 1:
            return False
        if dag.nodes[key].terminal_count > 0:
            return False
        return indeg[succ[key]] == 1

    removed: set[str] = set()
    new_edges: dict[tuple[str, str], DagEdge] = {}
    consumed: set[tuple[str, str]] = set()

    for key in dag.nodes:
        if not contractible(key) or key in removed:
            continue
        # Walk to the start of the maximal chain containing `key`.
        start = key
        while contractible(pred[start]):
            start = pred[start]
        chain = [start]
        while contractible(succ[chain[-1]]):
            chain.append(succ[chain[-1]])
        removed.update(chain)
        src = pred[start]
        dst = succ[chain[-1]]
        segments = [dag.edges[(src, chain[0])]]
        for a, b in zip(chain, chain[1:]):
            segments.append(dag.edges[(a, b)])
        segments.append(dag.edges[(chain[-1], dst)])
        for seg in segments:
            consumed.add((seg.src, seg.dst))
        new_edges[(src, dst)] = _fold_chain(src, dst, chain, segments)

    edges: dict[tuple[str, str], DagEdge] = {}
    for pair in sorted(set(dag.edges) - consumed | set(new_edges)):
        edges[pair] = new_edges.get(pair) or dag.edges[pair]
    nodes = {key: node for key, node in dag.nodes.items() if key not in removed}
    return TrajectoryDag(
        root=dag.root,
        range_lo=dag.range_lo,
        range_hi=dag.range_hi,
        truncated=True,
        nodes=nodes,
        edges=edges,
        node_trajectories=dag.node_trajectories,
    )


def _fold_chain(src: str, dst: str, chain: list[str], segments: list[DagEdge]) -> DagEdge:
    """Merge consecutive edges of a chain, multiplying per-trajectory probabilities."""
    base = segments[0].traversals
    tids = base.trajectory_ids
    pf = base.p_forward.copy()
    pb = base.p_backward.copy()
    for seg in segments[1:]:
        trav = seg.traversals
        if len(trav) != len(tids) or not np.array_equal(trav.trajectory_ids, tids):
            raise ValueError(
                f"chain segment {seg.src}->{seg.dst} traversals do not align with {src}->{chain[0]}"
            )
        pf *= trav.p_forward
        pb *= trav.p_backward
    # Interior states include any previously contracted hops inside segments.
    interior = tuple(p for seg in segments for p in (*seg.contracted_path, seg.dst))[:-1]
    return DagEdge(src, dst, interior, Traversals(base.iterations, tids, pf, pb))


def serialize_dag_edges(dag: TrajectoryDag) -> list[tuple[str, str, str, str]]:
    rows = []
    for (src, dst), edge in sorted(dag.edges.items()):
        rows.append(
            (
                src,
                dst,
                jsonio.dumps(list(edge.contracted_path)),
                jsonio.dumps(edge.traversals.to_json()),
            )
        )
    return rows


def apply_serialized_edges(
    raw: TrajectoryDag, rows: Iterable[tuple[str, str, str, str]]
) -> TrajectoryDag:
    """Reconstitute a truncated graph from persisted contraction rows."""
    edges: dict[tuple[str, str], DagEdge] = {}
    interior: set[str] = set()
    for src, dst, path_json, trav_json in rows:
        path = tuple(json.loads(path_json))
        interior.update(path)
        edges[(src, dst)] = DagEdge(src, dst, path, Traversals.from_json(json.loads(trav_json)))
    nodes = {key: node for key, node in raw.nodes.items() if key not in interior}
    return TrajectoryDag(
        root=raw.root,
        range_lo=raw.range_lo,
        range_hi=raw.range_hi,
        truncated=True,
        nodes=nodes,
        edges=edges,
        node_trajectories=raw.node_trajectories,
    )


# -- interactive view ---------------------------------------------------------


@dataclass
class DagViewState:
    """Pinned-node state of one exploration session; the root is always pinned."""

    root: str
    pinned: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        self.pinned.add(self.root)


def children_table(dag: TrajectoryDag, view: DagViewState, node: str) -> list[dict]:
    """Aggregated children of a pinned node, most-traversed first."""
    if node not in dag.nodes:
        raise KeyError(f"unknown node {node!r}")
    if node not in view.pinned:
        raise ValueError(f"node {node!r} is not pinned in this view")
    rows = []
    for dst in dag.out_keys[node]:
        edge = dag.edges[(node, dst)]
        trav = edge.traversals
        rows.append(
            {
                "key": dst,
                "frequency": len(trav),
                "mean_p_forward": float(trav.p_forward.mean()) if len(trav) else None,
                "max_p_forward": float(trav.p_forward.max()) if len(trav) else None,
                "first_iteration": int(trav.iterations.min()) if len(trav) else None,
                "trajectory_count": int(dag.nodes[dst].visit_count),
                "contracted_path": list(edge.contracted_path),
            }
        )
    rows.sort(key=lambda r: (-r["frequency"], r["key"]))
    return rows


def expand(dag: TrajectoryDag, view: DagViewState, node: str, child: str) -> DagViewState:
    """Pin `child`; every truncated edge between pinned nodes becomes visible."""
    if node not in view.pinned:
        raise ValueError(f"node {node!r} is not pinned in this view")
    if (node, child) not in dag.edges:
        raise KeyError(f"{child!r} is not a child of {node!r} in the truncated graph")
    view.pinned.add(child)
    return view


def collapse(dag: TrajectoryDag, view: DagViewState, node: str) -> DagViewState:
    """Unpin `node` and drop pinned nodes no longer reachable through pins."""
    if node == view.root:
        raise ValueError("the root cannot be collapsed")
    view.pinned.discard(node)
    view.pinned = _reachable_pinned(dag, view)
    return view


def normalize_view(dag: TrajectoryDag, view: DagViewState) -> DagViewState:
    """Drop pins that do not exist in this graph, then enforce reachability."""
    view.pinned = {key for key in view.pinned if key in dag.nodes}
    view.pinned.add(view.root)
    view.pinned = _reachable_pinned(dag, view)
    return view


def _reachable_pinned(dag: TrajectoryDag, view: DagViewState) -> set[str]:
    reachable = {view.root}
    frontier = [view.root]
    while frontier:
        current = frontier.pop()
        for dst in dag.out_keys.get(current, ()):
            if dst in view.pinned and dst not in reachable:
                reachable.add(dst)
                frontier.append(dst)
    return reachable


def visible_edges(dag: TrajectoryDag, view: DagViewState) -> list[tuple[str, str]]:
    return [
        (src, dst)
        for (src, dst) in sorted(dag.edges)
        if src in view.pinned and dst in view.pinned
    ]


def placeholder_counts(dag: TrajectoryDag, view: DagViewState) -> dict[str, int]:
    counts = {}
    for key in sorted(view.pinned):
        if key not in dag.nodes:
            continue
        hidden = sum(1 for dst in dag.out_keys[key] if dst not in view.pinned)
        counts[key] = hidden
    return counts


def trajectories_through(
    dag: TrajectoryDag, store: Store, node: str, limit: int | None = None
) -> list[dict]:
    """Full trajectories (ordered step sequences) that contain `node`.

    `node` may be a contracted interior state; unknown keys yield an empty
    list. Results are ordered by trajectory id.
    """
    tids = dag.node_trajectories.get(node)
    if tids is None or len(tids) == 0:
        return []
    ids = [int(t) for t in tids]
    if limit is not None:
        ids = ids[: int(limit)]
    steps = store.trajectory_steps(ids)
    out = []
    for tid in ids:
        recs = steps.get(tid, [])
        out.append(
            {
                "trajectory_id": tid,
                "iteration": recs[0].iteration if recs else None,
                "terminal_key": recs[-1].dst_key if recs else None,
                "steps": [
                    {
                        "src": r.src_key,
                        "dst": r.dst_key,
                        "action": r.action,
                        "p_forward": r.p_forward,
                        "p_backward": r.p_backward,
                        "terminal": r.terminal,
                    }
                    for r in recs
                ],
            }
        )
    return out
