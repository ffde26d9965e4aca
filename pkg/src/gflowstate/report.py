"""Static report generation: a JSON summary plus standalone SVG charts.

For headless use the report verb renders the three main diagnostics
(ranking bump chart, hexbin projection, transition heatmap) to plain SVG
with no script dependencies, next to a machine-readable report.json.
"""

from __future__ import annotations

import math
import os

from . import analytics, jsonio
from .dag import build_dag
from .store import Store

__all__ = ["write_report"]


def _fmt(value: float) -> str:
    return format(float(value), ".6g")


def _lerp_hex(a: str, b: str, t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    ar, ag, ab = (int(a[i : i + 2], 16) for i in (1, 3, 5))
    br, bg, bb = (int(b[i : i + 2], 16) for i in (1, 3, 5))
    return "#{:02x}{:02x}{:02x}".format(
        round(ar + (br - ar) * t), round(ag + (bg - ag) * t), round(ab + (bb - ab) * t)
    )


def _sequential(t: float) -> str:
    return _lerp_hex("#e2e8f0", "#1d4ed8", t)


def _diverging(t: float) -> str:
    # t in [-1, 1]: negative toward orange, positive toward blue.
    if t < 0:
        return _lerp_hex("#f8fafc", "#c2410c", -t)
    return _lerp_hex("#f8fafc", "#1d4ed8", t)


def _svg(width: float, height: float, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}"'
        f' height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">'
    )
    return "\n".join([head, *body, "</svg>"]) + "\n"


def ranking_svg(frames: list[dict], width: float = 720.0, height: float = 360.0) -> str:
    if not frames:
        return _svg(width, height, ['<text x="20" y="30">no ranking data</text>'])
    margin = 40.0
    n = max(len(f["entries"]) for f in frames)
    iters = [f["iteration"] for f in frames]
    lo, hi = iters[0], iters[-1]
    span = max(hi - lo, 1)
    first_seen: dict[str, int] = {}
    lines: dict[str, list[tuple[float, float]]] = {}
    for frame in frames:
        x = margin + (frame["iteration"] - lo) / span * (width - 2 * margin)
        for entry in frame["entries"]:
            key = entry["key"]
            first_seen.setdefault(key, entry["first_ranked_iteration"])
            y = margin + (entry["rank"] - 1) / max(n - 1, 1) * (height - 2 * margin)
            lines.setdefault(key, []).append((x, y))
    body = [f'<rect width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>']
    for key in sorted(lines):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in lines[key])
        color = _sequential((first_seen[key] - lo) / span)
        body.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2">'
            f"<title>{key}</title></polyline>"
        )
    return _svg(width, height, body)


def _hex_points(cx: float, cy: float, radius: float) -> str:
    corners = []
    for k in range(6):
        angle = math.radians(60.0 * k + 90.0)
        corners.append(f"{_fmt(cx + radius * math.cos(angle))},{_fmt(cy + radius * math.sin(angle))}")
    return " ".join(corners)


def projection_svg(
    projection: analytics.BinnedProjection,
    metric: str = "odds_score",
    width: float = 560.0,
    height: float = 560.0,
) -> str:
    bins = [
        analytics.bin_summary(projection, projection.bins[cell])
        for cell in sorted(projection.bins)
    ]
    if not bins:
        return _svg(width, height, ['<text x="20" y="30">no projection data</text>'])
    margin = 30.0
    xs = [b["center"][0] for b in bins]
    ys = [b["center"][1] for b in bins]
    min_x, max_x = min(xs), max(xs)
    min_y, max_y = min(ys), max(ys)
    span_x = max(max_x - min_x, 1e-9)
    span_y = max(max_y - min_y, 1e-9)
    scale = min((width - 2 * margin) / span_x, (height - 2 * margin) / span_y)
    values = [b[metric] for b in bins if b.get(metric) is not None]
    vmin, vmax = (min(values), max(values)) if values else (0.0, 1.0)
    vspan = max(vmax - vmin, 1e-12)
    diverging = metric in ("odds_score", "correlation")
    body = [f'<rect width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>']
    for b in bins:
        cx = margin + (b["center"][0] - min_x) * scale
        # SVG y goes down; flip so larger projected y is higher.
        cy = height - margin - (b["center"][1] - min_y) * scale
        value = b.get(metric)
        if value is None:
            fill = "#e5e7eb"
        elif diverging:
            fill = _diverging(float(value))
        else:
            fill = _sequential((float(value) - vmin) / vspan)
        label = "absent" if value is None else _fmt(value)
        body.append(
            f'<polygon points="{_hex_points(cx, cy, projection.grid.radius * scale)}"'
            f' fill="{fill}" stroke="#94a3b8" stroke-width="0.5">'
            f'<title>({b["q"]}, {b["r"]}) {metric}={label}'
            f' samples={b["count_samples"]} validation={b["count_validation"]}</title></polygon>'
        )
    return _svg(width, height, body)


def heatmap_svg(
    rows: list[dict],
    lo: int,
    hi: int,
    buckets: int = 100,
    width: float = 720.0,
    height: float = 400.0,
) -> str:
    if not rows:
        return _svg(width, height, ['<text x="20" y="30">no transition data</text>'])
    margin = 40.0
    buckets = max(1, min(buckets, hi - lo + 1))
    cell_w = (width - 2 * margin) / buckets
    cell_h = (height - 2 * margin) / len(rows)
    values = [r["value"] for r in rows]
    vmin, vmax = min(values), max(values)
    vspan = max(vmax - vmin, 1e-12)
    span = max(hi - lo, 1)
    body = [f'<rect width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>']
    for i, row in enumerate(rows):
        fill = _sequential((row["value"] - vmin) / vspan)
        active = sorted(
            {min(int((it - lo) / span * buckets), buckets - 1) for it in row["active_iterations"]}
        )
        y = margin + i * cell_h
        for b in active:
            x = margin + b * cell_w
            body.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(cell_w)}"'
                f' height="{_fmt(cell_h)}" fill="{fill}">'
                f'<title>#{row["rank"]} {row["src"]} -&gt; {row["dst"]}'
                f' value={_fmt(row["value"])}</title></rect>'
            )
    return _svg(width, height, body)


def write_report(
    store: Store,
    out_dir: str,
    metric: str = "reward",
    n: int = 20,
    top: int = 50,
    resolution: int = 20,
    method: str = "auto",
    bin_metric: str = "odds_score",
    step: int | None = None,
) -> dict[str, str]:
    """Write report.json plus the three SVG charts into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    lo, hi = store.iteration_bounds()
    if step is None:
        step = max(1, math.ceil((hi - lo + 1) / 200))

    samples = store.query_samples(lo, hi)
    frames = analytics.ranking_frames(samples, metric, n, lo, hi, step) if samples else []
    projection = analytics.build_projection(store, lo, hi, resolution, method)
    bins = [
        analytics.bin_summary(projection, projection.bins[cell])
        for cell in sorted(projection.bins)
    ]
    dag = build_dag(store, lo, hi)
    heat_rows = analytics.transition_heatmap(dag, "probability", "forward", top)

    doc = {
        "range": [lo, hi],
        "ranking": {"metric": metric, "n": n, "step": step, "frames": frames},
        "projection": {
            "method": projection.method,
            "resolution": resolution,
            "origin": [projection.grid.origin_x, projection.grid.origin_y],
            "radius": projection.grid.radius,
            "totals": {
                "samples": len(projection.samples),
                "validation": len(projection.validation),
            },
            "bins": bins,
        },
        "transitions": {"metric": "probability", "direction": "forward", "rows": heat_rows},
    }
    paths = {}
    paths["report.json"] = os.path.join(out_dir, "report.json")
    with open(paths["report.json"], "w", encoding="utf-8") as fh:
        fh.write(jsonio.dumps(doc))
        fh.write("\n")
    paths["ranking.svg"] = os.path.join(out_dir, "ranking.svg")
    with open(paths["ranking.svg"], "w", encoding="utf-8") as fh:
        fh.write(ranking_svg(frames))
    paths["projection.svg"] = os.path.join(out_dir, "projection.svg")
    with open(paths["projection.svg"], "w", encoding="utf-8") as fh:
        fh.write(projection_svg(projection, bin_metric))
    paths["heatmap.svg"] = os.path.join(out_dir, "heatmap.svg")
    with open(paths["heatmap.svg"], "w", encoding="utf-8") as fh:
        fh.write(heatmap_svg(heat_rows, lo, hi))
    return paths
