"""Projection, hexagonal binning, rankings, and transition statistics.

Samples and validation objects are projected into the plane (identity for
2-D features, PCA otherwise, or externally precomputed coordinates), then
aggregated into pointy-top hexagonal bins. Per-bin metrics compare where
the sampler actually goes against where the validation set says mass should
be: mean reward and loss, Pearson correlation between estimated terminal
log-probability and log reward, and a signed sampling-odds score in [-1, 1].
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .dag import TrajectoryDag
from .store import SampleRow, Store, ValidationRow

__all__ = [
    "BinnedProjection",
    "HexBin",
    "HexGrid",
    "bin_detail",
    "build_projection",
    "hex_assign",
    "hex_center",
    "odds_score",
    "pearson",
    "project",
    "ranking_frames",
    "transition_heatmap",
    "transition_history",
]

SQRT3 = math.sqrt(3.0)


# -- projection ---------------------------------------------------------------


def project(points: np.ndarray, method: str) -> np.ndarray:
    """Project an (n, d) feature matrix to (n, 2)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {points.shape}")
    n, d = points.shape
    if method in ("identity", "precomputed"):
        if d != 2:
            raise ValueError(f"{method} projection requires 2-D inputs, got d={d}")
        return points.copy()
    if method == "pca":
        if d < 2:
            raise ValueError(f"pca projection requires d >= 2, got d={d}")
        centered = points - points.mean(axis=0, keepdims=True)
        cov = centered.T @ centered / max(n, 1)
        eigvals, eigvecs = np.linalg.eigh(cov)
        components = eigvecs[:, ::-1][:, :2]
        # Deterministic orientation: the largest-magnitude loading of each
        # component points in the positive direction.
        for col in range(2):
            loading = components[:, col]
            peak = int(np.argmax(np.abs(loading)))
            if loading[peak] < 0:
                components[:, col] = -loading
        return centered @ components
    raise ValueError(f"unknown projection method {method!r}")


# -- hexagonal binning --------------------------------------------------------


@dataclass(frozen=True)
class HexGrid:
    """Pointy-top hexagonal lattice: origin plus circumradius."""

    origin_x: float
    origin_y: float
    radius: float


def hex_grid_for(points: np.ndarray, resolution: int) -> HexGrid:
    """Size hexes so `resolution` columns span the horizontal extent."""
    if resolution < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    if len(points) == 0:
        return HexGrid(0.0, 0.0, 1.0 / SQRT3)
    min_x = float(np.min(points[:, 0]))
    max_x = float(np.max(points[:, 0]))
    min_y = float(np.min(points[:, 1]))
    extent = max_x - min_x
    if extent <= 0.0:
        extent = 1.0
    width = extent / resolution
    return HexGrid(min_x, min_y, width / SQRT3)


def hex_assign(x: float, y: float, grid: HexGrid) -> tuple[int, int]:
    """Axial (q, r) of the hex containing the point, by cube rounding."""
    px = (x - grid.origin_x) / grid.radius
    py = (y - grid.origin_y) / grid.radius
    qf = SQRT3 / 3.0 * px - py / 3.0
    rf = 2.0 / 3.0 * py
    return _cube_round(qf, rf)


def _cube_round(qf: float, rf: float) -> tuple[int, int]:
    sf = -qf - rf
    q, r, s = round(qf), round(rf), round(sf)
    dq, dr, ds = abs(q - qf), abs(r - rf), abs(s - sf)
    if dq > dr and dq > ds:
        q = -r - s
    elif dr > ds:
        r = -q - s
    return int(q), int(r)


def hex_center(q: int, r: int, grid: HexGrid) -> tuple[float, float]:
    x = grid.radius * (SQRT3 * q + SQRT3 / 2.0 * r) + grid.origin_x
    y = grid.radius * 1.5 * r + grid.origin_y
    return x, y


# -- correlation and odds -----------------------------------------------------


def pearson(xs, ys) -> float | None:
    """Pearson coefficient; None when either variance vanishes."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) == 0:
        raise ValueError("pearson expects two equal-length vectors")
    dx = x - x.mean()
    dy = y - y.mean()
    vx = float(dx @ dx)
    vy = float(dy @ dy)
    if vx <= 0.0 or vy <= 0.0:
        return None
    return float((dx @ dy) / math.sqrt(vx * vy))


def odds_score(v: int, s: int, total_v: int, total_s: int) -> float | None:
    """Signed over/under-sampling score in [-1, 1].

    Compares a bin's share of samples against its share of validation mass:
    (v*S - s*V) / (v*S + s*V). +1 means validation-only (never sampled),
    -1 means sample-only (no validation support), 0 means proportional.
    Absent (None) when either global total is zero or the bin is empty.
    """
    if total_v <= 0 or total_s <= 0:
        return None
    if v + s == 0:
        return None
    num = v * total_s - s * total_v
    den = v * total_s + s * total_v
    return float(num) / float(den)


# -- projection assembly --------------------------------------------------------


@dataclass
class HexBin:
    q: int
    r: int
    sample_ids: list[int]
    validation_keys: list[str]


@dataclass
class BinnedProjection:
    method: str
    resolution: int
    grid: HexGrid
    samples: list[SampleRow]
    validation: list[ValidationRow]
    sample_points: np.ndarray
    validation_points: np.ndarray
    bins: dict[tuple[int, int], HexBin]
    sample_bin: dict[int, tuple[int, int]]

    def bin_of_sample(self, trajectory_id: int) -> tuple[int, int] | None:
        return self.sample_bin.get(trajectory_id)


def build_projection(
    store: Store,
    lo: int | None = None,
    hi: int | None = None,
    resolution: int = 20,
    method: str = "auto",
) -> BinnedProjection:
    """Project and bin all samples in range plus the whole validation set."""
    env = store.env
    samples = store.query_samples(lo, hi)
    validation = store.query_validation()
    sample_feats = [env.features(env.parse_key(s.terminal_key)) for s in samples]
    val_feats = [np.asarray(v.features, dtype=np.float64) for v in validation]
    dims = {len(f) for f in sample_feats} | {len(f) for f in val_feats}
    if len(dims) > 1:
        raise ValueError(f"inconsistent feature dimensions: {sorted(dims)}")
    dim = dims.pop() if dims else 2
    if method == "auto":
        method = "identity" if dim == 2 else "pca"

    combined = (
        np.stack(sample_feats + val_feats)
        if (sample_feats or val_feats)
        else np.zeros((0, dim))
    )
    projected = project(combined, method) if len(combined) else combined
    sample_points = projected[: len(sample_feats)]
    validation_points = projected[len(sample_feats):]
    grid = hex_grid_for(projected, resolution)

    bins: dict[tuple[int, int], HexBin] = {}
    sample_bin: dict[int, tuple[int, int]] = {}
    for row, point in zip(samples, sample_points):
        cell = hex_assign(float(point[0]), float(point[1]), grid)
        hex_bin = bins.get(cell)
        if hex_bin is None:
            hex_bin = bins[cell] = HexBin(cell[0], cell[1], [], [])
        hex_bin.sample_ids.append(row.trajectory_id)
        sample_bin[row.trajectory_id] = cell
    for row, point in zip(validation, validation_points):
        cell = hex_assign(float(point[0]), float(point[1]), grid)
        hex_bin = bins.get(cell)
        if hex_bin is None:
            hex_bin = bins[cell] = HexBin(cell[0], cell[1], [], [])
        hex_bin.validation_keys.append(row.state_key)
    return BinnedProjection(
        method=method,
        resolution=resolution,
        grid=grid,
        samples=samples,
        validation=validation,
        sample_points=sample_points,
        validation_points=validation_points,
        bins=bins,
        sample_bin=sample_bin,
    )


def _bin_members(projection: BinnedProjection, hex_bin: HexBin):
    by_id = {s.trajectory_id: s for s in projection.samples}
    by_key = {v.state_key: v for v in projection.validation}
    members_s = [by_id[t] for t in hex_bin.sample_ids]
    members_v = [by_key[k] for k in hex_bin.validation_keys]
    return members_s, members_v


def bin_correlation(members_s: list[SampleRow], members_v: list[ValidationRow]) -> float | None:
    """Pearson of (log_ptx, log reward) over members carrying estimates."""
    xs, ys = [], []
    for s in members_s:
        if s.log_ptx is not None:
            xs.append(s.log_ptx)
            ys.append(math.log(s.reward))
    for v in members_v:
        if v.log_ptx is not None:
            xs.append(v.log_ptx)
            ys.append(math.log(v.reward))
    if len(xs) < 3:
        return None
    return pearson(xs, ys)


def bin_summary(projection: BinnedProjection, hex_bin: HexBin) -> dict:
    members_s, members_v = _bin_members(projection, hex_bin)
    rewards = [s.reward for s in members_s]
    losses = [s.loss for s in members_s]
    center = hex_center(hex_bin.q, hex_bin.r, projection.grid)
    return {
        "q": hex_bin.q,
        "r": hex_bin.r,
        "center": [center[0], center[1]],
        "count_samples": len(members_s),
        "count_validation": len(members_v),
        "mean_reward": float(np.mean(rewards)) if rewards else None,
        "mean_loss": float(np.mean(losses)) if losses else None,
        "correlation": bin_correlation(members_s, members_v),
        "odds_score": odds_score(
            len(members_v),
            len(members_s),
            len(projection.validation),
            len(projection.samples),
        ),
    }


def bin_detail(projection: BinnedProjection, q: int, r: int) -> dict | None:
    hex_bin = projection.bins.get((q, r))
    if hex_bin is None:
        return None
    members_s, members_v = _bin_members(projection, hex_bin)
    summary = bin_summary(projection, hex_bin)

    by_iter: dict[int, list[float]] = {}
    for s in members_s:
        by_iter.setdefault(s.iteration, []).append(s.loss)
    summary["loss_series"] = [
        {"iteration": it, "mean_loss": float(np.mean(vals))}
        for it, vals in sorted(by_iter.items())
    ]
    if members_s:
        log_r = np.log([s.reward for s in members_s])
        counts, edges = np.histogram(log_r, bins=20)
        summary["reward_histogram"] = {
            "log_edges": [float(e) for e in edges],
            "counts": [int(c) for c in counts],
        }
    else:
        summary["reward_histogram"] = {"log_edges": [], "counts": []}
    summary["sample_ids"] = sorted(hex_bin.sample_ids)
    summary["validation_keys"] = sorted(hex_bin.validation_keys)
    return summary


# -- sample rankings ------------------------------------------------------------


def ranking_frames(
    samples: list[SampleRow],
    metric: str,
    n: int,
    lo: int,
    hi: int,
    step: int = 1,
) -> list[dict]:
    """Cumulative top-n frames per iteration over distinct terminal objects.

    Objects are ranked by their best metric value so far (reward descending,
    loss ascending); ties break by earliest appearance, then key. Each entry
    records the iteration at which the object first entered any frame.
    """
    if metric not in ("reward", "loss"):
        raise ValueError(f"unknown ranking metric {metric!r}")
    if lo > hi:
        raise ValueError(f"inverted iteration range [{lo}, {hi}]")
    if n < 1:
        raise ValueError(f"ranking size must be >= 1, got {n}")
    if step < 1:
        raise ValueError(f"frame step must be >= 1, got {step}")
    minimize = metric == "loss"

    best: dict[str, tuple[float, int]] = {}  # key -> (value, first_iteration)
    first_ranked: dict[str, int] = {}
    frames: list[dict] = []
    idx = 0
    emit = set(range(lo, hi + 1, step))
    emit.add(hi)
    for t in range(lo, hi + 1):
        while idx < len(samples) and samples[idx].iteration == t:
            row = samples[idx]
            value = row.loss if minimize else row.reward
            cur = best.get(row.terminal_key)
            if cur is None:
                best[row.terminal_key] = (value, t)
            else:
                better = value < cur[0] if minimize else value > cur[0]
                if better:
                    best[row.terminal_key] = (value, cur[1])
            idx += 1
        if t not in emit:
            continue
        if minimize:
            ordered = heapq.nsmallest(
                n, best.items(), key=lambda kv: (kv[1][0], kv[1][1], kv[0])
            )
        else:
            ordered = heapq.nsmallest(
                n, best.items(), key=lambda kv: (-kv[1][0], kv[1][1], kv[0])
            )
        entries = []
        for rank, (key, (value, _first)) in enumerate(ordered, start=1):
            if key not in first_ranked:
                first_ranked[key] = t
            entries.append(
                {
                    "key": key,
                    "rank": rank,
                    "value": value,
                    "first_ranked_iteration": first_ranked[key],
                }
            )
        frames.append({"iteration": t, "entries": entries})
    return frames


# -- transition statistics -------------------------------------------------------


def _edge_stats(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    var = float(np.mean((values - mean) ** 2))
    return mean, var


def transition_heatmap(
    dag: TrajectoryDag,
    metric: str = "probability",
    direction: str = "forward",
    top: int = 50,
) -> list[dict]:
    """Top transitions of a raw trajectory graph, ranked by the chosen metric.

    Stop decisions are included as terminal rows (src == dst). The variance
    is the population variance of the per-traversal probabilities.
    """
    if metric not in ("probability", "variance", "frequency"):
        raise ValueError(f"unknown heatmap metric {metric!r}")
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    rows = []

    def emit(src: str, dst: str, terminal: bool, trav) -> None:
        values = trav.p_forward if direction == "forward" else trav.p_backward
        mean, var = _edge_stats(values)
        metric_value = {"probability": mean, "variance": var, "frequency": float(len(trav))}[
            metric
        ]
        rows.append(
            {
                "src": src,
                "dst": dst,
                "terminal": terminal,
                "value": metric_value,
                "probability": mean,
                "variance": var,
                "frequency": len(trav),
                "active_iterations": sorted({int(i) for i in trav.iterations}),
            }
        )

    for (src, dst), edge in dag.edges.items():
        emit(src, dst, False, edge.traversals)
    for key, node in dag.nodes.items():
        if node.stop is not None:
            emit(key, key, True, node.stop)
    rows.sort(key=lambda r: (-r["value"], r["src"], r["dst"], r["terminal"]))
    rows = rows[: max(top, 0)]
    for rank, row in enumerate(rows, start=1):
        row["rank"] = rank
    return rows


def transition_history(
    dag: TrajectoryDag, src: str, dst: str, terminal: bool = False
) -> list[dict]:
    """Per-iteration mean forward/backward probability for one transition.

    Unknown transitions yield an empty series rather than an error.
    """
    if terminal:
        node = dag.nodes.get(src)
        trav = node.stop if node is not None else None
        if src != dst:
            trav = None
    else:
        edge = dag.edges.get((src, dst))
        trav = edge.traversals if edge is not None else None
    if trav is None:
        return []
    by_iter: dict[int, tuple[list[float], list[float]]] = {}
    for it, pf, pb in zip(trav.iterations, trav.p_forward, trav.p_backward):
        bucket = by_iter.setdefault(int(it), ([], []))
        bucket[0].append(float(pf))
        bucket[1].append(float(pb))
    return [
        {
            "iteration": it,
            "p_forward": float(np.mean(pfs)),
            "p_backward": float(np.mean(pbs)),
        }
        for it, (pfs, pbs) in sorted(by_iter.items())
    ]
