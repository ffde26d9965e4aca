"""Acceptance gate: one test per criterion A1..A9.

Each test prints a single PASS/FAIL line with the measured quantities, so
the gate can be read off a -v run directly. These are full-scale runs and
dominate the suite's wall time (a few minutes total). Training here uses
explicit exploration and rate settings exposed by the train verb; only
grid size, iteration budget, batch size, and seed are fixed by the
criteria.
"""

from __future__ import annotations

import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from gflowstate import analytics
from gflowstate.api import analyze_run, create_app
from gflowstate.dag import build_dag, trajectories_through, truncate_chains
from gflowstate.envs import GridConfig, GridEnv
from gflowstate.estimators import (
    EstimatorConfig,
    estimate_log_ptx,
    exact_terminal_log_distribution,
)
from gflowstate.policy import PolicyNet
from gflowstate.store import Store
from gflowstate.training import TrainConfig, sample_trajectory, tb_loss, train

from helpers import make_grid, randomized_heads
from test_dag import reconstruct_full_path

ACCEPT_RATES = {"learning_rate": 5e-3, "epsilon": 0.4}


def emit(capsys, ident: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"{ident}: {'PASS' if ok else 'FAIL'} ({detail})", flush=True)
    assert ok, f"{ident}: {detail}"


def reward_table(env: GridEnv) -> dict[str, float]:
    return {env.state_key(s): env.reward(s) for s in env.enumerate_states()}


# -- A1: reward-proportional sampling at desk scale -----------------------------------


@pytest.fixture(scope="module")
def a1_run(tmp_path_factory):
    env = GridEnv(GridConfig(height=8))
    config = TrainConfig(iterations=3000, batch_size=16, seed=7, **ACCEPT_RATES)
    path = str(tmp_path_factory.mktemp("a1") / "run.db")
    started = time.monotonic()
    with Store.create(path, env, config.to_json()) as store:
        store.populate_grid_validation()
        result = train(env, config, store)
        terminals = set(store.distinct_terminals())
    elapsed = time.monotonic() - started
    return env, result, terminals, elapsed


def test_a1_reward_proportional_sampling(a1_run, capsys):
    env, result, terminals, elapsed = a1_run
    rewards = reward_table(env)
    total = sum(rewards.values())
    learned = exact_terminal_log_distribution(result.net, env)
    l1 = sum(abs(math.exp(learned[k]) - rewards[k] / total) for k in rewards)
    peak = max(rewards.values())
    modes = sorted(k for k, r in rewards.items() if r == peak)
    missing = [k for k in modes if k not in terminals]
    ok = l1 <= 0.15 and not missing and elapsed < 120.0
    emit(
        capsys,
        "A1 reward-proportional sampling",
        ok,
        f"L1={l1:.4f} (<=0.15), modes sampled {len(modes) - len(missing)}/4, train {elapsed:.0f}s (<120s)",
    )


# -- A2: importance-sampling estimator correctness ------------------------------------


def test_a2_estimator_correctness(capsys):
    started = time.monotonic()
    env = make_grid(5)
    net = randomized_heads(env, seed=0)
    exact = exact_terminal_log_distribution(net, env)
    states = env.enumerate_states()
    err_hi, err_lo = {}, {}
    for s in states:
        key = env.state_key(s)
        err_hi[key] = abs(estimate_log_ptx(net, env, s, EstimatorConfig(k=10_000, seed=0)) - exact[key])
        err_lo[key] = abs(estimate_log_ptx(net, env, s, EstimatorConfig(k=100, seed=0)) - exact[key])
    elapsed = time.monotonic() - started
    within = sum(1 for v in err_hi.values() if v <= 0.05)
    agg_hi, agg_lo = sum(err_hi.values()), sum(err_lo.values())
    ok = within >= math.ceil(0.95 * 25) and agg_lo > agg_hi and elapsed < 30.0
    emit(
        capsys,
        "A2 estimator correctness",
        ok,
        f"K=1e4 within 0.05 for {within}/25 states, aggregate {agg_lo:.3f} (K=100) > {agg_hi:.3f} (K=1e4), {elapsed:.1f}s (<30s)",
    )


# -- A3: gradient fidelity -------------------------------------------------------------


def test_a3_gradient_fidelity(capsys):
    env = make_grid(4)
    rng = np.random.default_rng(11)
    net = PolicyNet.for_env(env, 8, rng)
    for key in ("wf", "bf", "wb", "bb"):
        net.params[key] = rng.normal(0.0, 0.5, size=net.params[key].shape)
    h = 1e-5
    worst = 0.0
    checked = 0
    for t in range(20):
        traj = sample_trajectory(net, env, rng, epsilon=0.3, trajectory_id=t)
        reward = env.reward(traj.terminal)
        _, grads = tb_loss(net, env, traj, reward)
        for key in PolicyNet.PARAM_KEYS:
            param = net.params[key]
            flat = param.reshape(-1) if param.ndim else param.reshape(1)
            gflat = np.asarray(grads[key]).reshape(flat.shape)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up, _ = tb_loss(net, env, traj, reward)
                flat[i] = orig - h
                down, _ = tb_loss(net, env, traj, reward)
                flat[i] = orig
                fd = (up - down) / (2.0 * h)
                analytic = float(gflat[i])
                if max(abs(fd), abs(analytic)) < 1e-6:
                    continue  # both zero up to difference-quotient noise
                rel = abs(analytic - fd) / max(abs(fd), abs(analytic))
                worst = max(worst, rel)
                checked += 1
    ok = worst <= 1e-4 and checked > 0
    emit(
        capsys,
        "A3 gradient fidelity",
        ok,
        f"20 trajectories, {checked} parameter entries, worst relative error {worst:.2e} (<=1e-4)",
    )


# -- A4/A5: DAG truncation and graph-query oracles on ten mini-runs --------------------


@pytest.fixture(scope="module")
def mini_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("a4")
    env = GridEnv(GridConfig(height=6))
    paths = []
    for seed in range(10):
        config = TrainConfig(iterations=200, batch_size=8, seed=seed)
        path = str(root / f"run{seed}.db")
        with Store.create(path, env, config.to_json()) as store:
            train(env, config, store)
        paths.append(path)
    return paths


def test_a4_truncation_oracle(mini_runs, capsys):
    mismatches = 0
    worst = 0.0
    contracted_total = 0
    trajectories_checked = 0
    for path in mini_runs:
        with Store.open(path) as store:
            full = store.iteration_bounds()
            # Early narrow windows are sparse enough to contain chains, so the
            # product clause is exercised and not vacuously true.
            for lo, hi in (full, (0, 4)):
                raw = build_dag(store, lo, hi)
                truncated = truncate_chains(raw)
                contracted_total += sum(
                    1 for e in truncated.edges.values() if e.contracted_path
                )
                samples = store.query_samples(lo, hi)
                all_steps = store.trajectory_steps([s.trajectory_id for s in samples])
                for sample in samples:
                    recs = all_steps[sample.trajectory_id]
                    raw_keys = [recs[0].src_key] + [r.dst_key for r in recs[:-1]]
                    if reconstruct_full_path(truncated, sample.trajectory_id) != raw_keys:
                        mismatches += 1
                        continue
                    step_pf = {(r.src_key, r.dst_key): r.p_forward for r in recs[:-1]}
                    step_pb = {(r.src_key, r.dst_key): r.p_backward for r in recs[:-1]}
                    _, edge_pairs = truncated.trajectory_path(sample.trajectory_id)
                    for src, dst in edge_pairs:
                        edge = truncated.edges[(src, dst)]
                        hops = [src, *edge.contracted_path, dst]
                        want_pf = math.prod(
                            step_pf[(a, b)] for a, b in zip(hops, hops[1:])
                        )
                        want_pb = math.prod(
                            step_pb[(a, b)] for a, b in zip(hops, hops[1:])
                        )
                        slot = int(
                            np.nonzero(
                                edge.traversals.trajectory_ids == sample.trajectory_id
                            )[0][0]
                        )
                        worst = max(
                            worst,
                            abs(edge.traversals.p_forward[slot] - want_pf),
                            abs(edge.traversals.p_backward[slot] - want_pb),
                        )
                    trajectories_checked += 1
    ok = mismatches == 0 and worst <= 1e-12 and contracted_total > 0
    emit(
        capsys,
        "A4 truncation oracle",
        ok,
        f"{trajectories_checked} trajectories reconstructed exactly over 10 runs, "
        f"{contracted_total} contracted edges, worst product error {worst:.2e} (<=1e-12)",
    )


def test_a5_graph_query_oracles(mini_runs, capsys):
    through_checked = heat_checked = 0
    through_bad = heat_bad = 0
    for path in mini_runs:
        with Store.open(path) as store:
            lo, hi = store.iteration_bounds()
            raw = build_dag(store, lo, hi)
            truncated = truncate_chains(raw)
            samples = store.query_samples(lo, hi)
            all_steps = store.trajectory_steps([s.trajectory_id for s in samples])
            visits: dict[str, set[int]] = {}
            counts: dict[tuple[str, str, bool], int] = {}
            for tid, recs in all_steps.items():
                for rec in recs:
                    visits.setdefault(rec.src_key, set()).add(tid)
                    pair = (rec.src_key, rec.dst_key, rec.terminal)
                    counts[pair] = counts.get(pair, 0) + 1
            for key, expected in visits.items():
                got = [
                    t["trajectory_id"]
                    for t in trajectories_through(truncated, store, key)
                ]
                through_checked += 1
                if got != sorted(expected):
                    through_bad += 1
            rows = analytics.transition_heatmap(raw, "frequency", "forward", len(counts))
            got_counts = {(r["src"], r["dst"], r["terminal"]): r["value"] for r in rows}
            heat_checked += 1
            if got_counts != counts:
                heat_bad += 1
    ok = through_bad == 0 and heat_bad == 0
    emit(
        capsys,
        "A5 graph-query oracles",
        ok,
        f"trajectories_through exact for {through_checked} node queries, "
        f"frequency heatmap exact for {heat_checked}/10 runs",
    )


# -- A6: odds-score anchors -------------------------------------------------------------


def test_a6_odds_score_anchors(capsys):
    anchors = (
        analytics.odds_score(5, 0, 10, 10) == 1.0
        and analytics.odds_score(0, 7, 10, 10) == -1.0
        and analytics.odds_score(3, 1, 30, 10) == 0.0
    )
    rng = np.random.default_rng(123)
    holds = 0
    quads = 0
    while quads < 1000:
        v, s = int(rng.integers(0, 50)), int(rng.integers(0, 50))
        V, S = int(rng.integers(1, 100)), int(rng.integers(1, 100))
        if v + s == 0:
            continue
        quads += 1
        k = int(rng.integers(2, 9))
        anti = analytics.odds_score(v, s, V, S) == -analytics.odds_score(s, v, S, V)
        scale = analytics.odds_score(k * v, s, k * V, S) == analytics.odds_score(v, s, V, S)
        if anti and scale:
            holds += 1
    ok = anchors and holds == 1000
    emit(
        capsys,
        "A6 odds-score anchors",
        ok,
        f"anchors exact, antisymmetry and scale-invariance exact on {holds}/1000 quadruples",
    )


# -- A7: correlation anchor --------------------------------------------------------------


THREE_POINT = ([-1.0, -2.0, -3.0], [0.0, math.log(2.0), math.log(3.0)])
# Pearson of the three-point example, recomputed independently. The stated
# -0.9897 does not satisfy the definition (see the ledger); the sub-clause is
# kept as an expected failure below rather than weakening this oracle.
THREE_POINT_ORACLE = -0.98876385376805831


def test_a7_correlation_anchor(capsys):
    rng = np.random.default_rng(7)
    log_r = rng.uniform(-3.0, 0.0, size=50)
    affine = analytics.pearson(list(log_r + 0.7), list(log_r))
    hand = analytics.pearson(*THREE_POINT)
    affine_ok = abs(affine - 1.0) <= 1e-9
    hand_ok = hand == pytest.approx(THREE_POINT_ORACLE, abs=1e-12)
    ok = affine_ok and hand_ok
    emit(
        capsys,
        "A7 correlation anchor",
        ok,
        f"affine 1.0 within 1e-9, hand example {hand:.17g} matches recomputed oracle; "
        f"stated -0.9897 clause is off by {abs(hand + 0.9897):.2e} and kept as an expected failure",
    )


@pytest.mark.xfail(
    strict=True,
    reason="the stated constant -0.9897 is not the Pearson correlation of the "
    "three-point example; the value is -0.98876385376805831, 9.4e-4 away, "
    "beyond the 1e-4 tolerance (decision ledger, A7)",
)
def test_a7_stated_constant_subclause():
    assert analytics.pearson(*THREE_POINT) == pytest.approx(-0.9897, abs=1e-4)


# -- A8: determinism and goldens ----------------------------------------------------------


def _a8_execute(workdir: str) -> tuple[bytes, dict[str, bytes]]:
    os.makedirs(workdir, exist_ok=True)
    db = os.path.join(workdir, "run.db")
    base = [sys.executable, "-m", "gflowstate.cli"]
    train_cmd = base + [
        "train",
        "--db", db,
        "--height", "4",
        "--iterations", "50",
        "--batch-size", "16",
        "--seed", "7",
    ]
    subprocess.run(train_cmd, check=True, capture_output=True)
    subprocess.run(base + ["analyze", "--db", db], check=True, capture_output=True)
    with Store.open(db) as store:
        dump = store.content_dump()
        client = TestClient(create_app(store=store))
        bodies = {
            path: client.get(path).content
            for path in ("/api/ranking", "/api/projection", "/api/transitions")
        }
    return dump, bodies


def test_a8_determinism_goldens(tmp_path, capsys):
    dump_a, bodies_a = _a8_execute(str(tmp_path / "x"))
    dump_b, bodies_b = _a8_execute(str(tmp_path / "y"))
    db_same = dump_a == dump_b
    same = {path: bodies_a[path] == bodies_b[path] for path in bodies_a}
    ok = db_same and all(same.values())
    emit(
        capsys,
        "A8 determinism goldens",
        ok,
        f"database content byte-identical: {db_same}; "
        + ", ".join(f"{p} byte-identical: {v}" for p, v in sorted(same.items())),
    )


# -- A9: paper-scale qualitative reproduction ----------------------------------------------


def test_a9_paper_scale_mode_discovery(tmp_path, capsys):
    env = GridEnv(GridConfig(height=20))
    config = TrainConfig(iterations=10_000, batch_size=16, seed=7, **ACCEPT_RATES)
    started = time.monotonic()
    path = str(tmp_path / "a9.db")
    with Store.create(path, env, config.to_json()) as store:
        store.populate_grid_validation()
        train(env, config, store)
        lo, hi = store.iteration_bounds()
        samples = store.query_samples(lo, hi)
    elapsed = time.monotonic() - started

    frames = analytics.ranking_frames(samples, "reward", 20, lo, hi, 25)
    first_ranked: dict[str, int] = {}
    for frame in frames:
        for entry in frame["entries"]:
            first_ranked.setdefault(entry["key"], entry["first_ranked_iteration"])
    # Keys ranked at the very first frame were never "new"; every later
    # first_ranked iteration is an entry event.
    events = sorted(t for t in first_ranked.values() if t > lo)
    best_count, best_start = 0, None
    for start in events:
        count = sum(1 for t in events if start <= t <= start + 200)
        if count > best_count:
            best_count, best_start = count, start
    ok = elapsed < 900.0 and best_count >= 5
    emit(
        capsys,
        "A9 paper-scale reproduction",
        ok,
        f"10k-iteration run in {elapsed:.0f}s (<900s); {best_count} new top-20 entries "
        f"in window [{best_start}, {best_start + 200 if best_start is not None else '-'}] (>=5); "
        f"discovery timing is run-specific by design",
    )
