"""Shared oracles and builders for the test suite.

Everything here is computed independently of the code under test wherever
the tests need an oracle: brute-force path enumeration, hand recursions,
and explicit trajectory construction.
"""

from __future__ import annotations

import math

import numpy as np

from gflowstate.envs import Action, GridConfig, GridEnv, GridState
from gflowstate.policy import PolicyNet
from gflowstate.store import Store
from gflowstate.training import Step, Trajectory

MOVES = (Action.INC_X, Action.INC_Y)


def make_grid(height: int, **kwargs) -> GridEnv:
    return GridEnv(GridConfig(height=height, **kwargs))


def path_states(env: GridEnv, moves: list[Action]) -> list[GridState]:
    states = [env.initial_state()]
    for action in moves:
        states.append(env.apply_action(states[-1], action))
    return states


def path_trajectory(
    env: GridEnv,
    tid: int,
    iteration: int,
    moves: list[Action],
    pf: list[float] | None = None,
    pb: list[float] | None = None,
) -> Trajectory:
    """Build a Stop-terminated trajectory along `moves` with chosen probs.

    pf and pb each carry one entry per step including the final Stop step;
    the Stop step's pb entry is forced to 1.0.
    """
    states = path_states(env, moves)
    n = len(moves) + 1
    pf = [0.5] * n if pf is None else list(pf)
    pb = [0.5] * n if pb is None else list(pb)
    assert len(pf) == n and len(pb) == n
    steps = []
    for i, action in enumerate(moves):
        steps.append(Step(states[i], action, pf[i], pb[i]))
    steps.append(Step(states[-1], Action.STOP, pf[-1], 1.0))
    return Trajectory(
        trajectory_id=tid,
        iteration=iteration,
        steps=tuple(steps),
        terminal=states[-1],
    )


def log_paths(store: Store, specs: list[tuple[int, int, list[Action], list[float], list[float]]]) -> None:
    """Log crafted trajectories: (tid, iteration, moves, pf, pb) tuples."""
    env = store.env
    by_iter: dict[int, list[Trajectory]] = {}
    for tid, iteration, moves, pf, pb in specs:
        by_iter.setdefault(iteration, []).append(
            path_trajectory(env, tid, iteration, moves, pf, pb)
        )
    for iteration in sorted(by_iter):
        trajs = by_iter[iteration]
        rewards = [env.reward(t.terminal) for t in trajs]
        losses = [0.25] * len(trajs)
        store.log_iteration(trajs, rewards, losses)


def enumerate_move_sequences(height: int) -> list[list[Action]]:
    """Every distinct move sequence (excluding the final Stop) on the grid."""
    out: list[list[Action]] = []

    def walk(x: int, y: int, prefix: list[Action]) -> None:
        out.append(list(prefix))
        if x < height - 1:
            prefix.append(Action.INC_X)
            walk(x + 1, y, prefix)
            prefix.pop()
        if y < height - 1:
            prefix.append(Action.INC_Y)
            walk(x, y + 1, prefix)
            prefix.pop()

    walk(0, 0, [])
    return out


def brute_force_terminal_probs(net: PolicyNet, env: GridEnv) -> dict[str, float]:
    """P_T by summing full path products over every enumerated trajectory."""
    probs: dict[str, float] = {}
    for moves in enumerate_move_sequences(env.config.height):
        states = path_states(env, moves)
        p = 1.0
        for state, action in zip(states, moves):
            p *= forward_prob(net, env, state, action)
        p *= forward_prob(net, env, states[-1], Action.STOP)
        key = env.state_key(states[-1])
        probs[key] = probs.get(key, 0.0) + p
    return probs


def forward_prob(net: PolicyNet, env: GridEnv, state: GridState, action: Action) -> float:
    from gflowstate.policy import forward_policy

    return forward_policy(net, env, state)[action]


def backward_prob(net: PolicyNet, env: GridEnv, state: GridState, action: Action) -> float:
    from gflowstate.policy import backward_policy

    return backward_policy(net, env, state)[action]


def ideal_flow_policy(env: GridEnv) -> tuple[dict[str, dict[Action, float]], dict[str, dict[Action, float]], float]:
    """Analytic reward-proportional policy with uniform backward policy.

    Backward recursion: nu(s) = R(s) + sum over children c of PB(s|c) nu(c),
    with PB uniform over parents. Then PF(Stop|s) = R(s)/nu(s) and
    PF(a: s->c) = PB(s|c) nu(c) / nu(s), and log Z = log nu(source). Under
    this policy the trajectory-balance residual telescopes to zero exactly.
    """
    h = env.config.height
    nu: dict[tuple[int, int], float] = {}
    for total in range(2 * h - 2, -1, -1):
        for x in range(h):
            y = total - x
            if not (0 <= y < h):
                continue
            state = GridState(x, y)
            value = env.reward(state)
            for action in MOVES:
                if action in env.valid_forward_actions(state):
                    child = env.apply_action(state, action)
                    pb = 1.0 / len(env.parents(child))
                    value += pb * nu[(child.x, child.y)]
            nu[(x, y)] = value
    pf_target: dict[str, dict[Action, float]] = {}
    pb_target: dict[str, dict[Action, float]] = {}
    for (x, y), value in nu.items():
        state = GridState(x, y)
        key = env.state_key(state)
        dist = {Action.STOP: env.reward(state) / value}
        for action in MOVES:
            if action in env.valid_forward_actions(state):
                child = env.apply_action(state, action)
                pb = 1.0 / len(env.parents(child))
                dist[action] = pb * nu[(child.x, child.y)] / value
        pf_target[key] = dist
        parents = env.parents(state)
        if parents:
            pb_target[key] = {action: 1.0 / len(parents) for _, action in parents}
    return pf_target, pb_target, math.log(nu[(0, 0)])


def fit_net_to_policy(
    env: GridEnv,
    pf_target: dict[str, dict[Action, float]],
    pb_target: dict[str, dict[Action, float]],
    log_z: float,
    seed: int = 11,
) -> PolicyNet:
    """Solve for output heads that realize the target policy exactly.

    Keeps a random trunk and least-squares fits each head column so the
    logits equal the target log-probabilities (free constants fixed at 0);
    with n_states equations and width+1 unknowns per column the fit is
    exact up to float precision.
    """
    rng = np.random.default_rng(seed)
    net = PolicyNet.for_env(env, 64, rng)
    states = list(env.enumerate_states())
    feats = np.stack([env.features(s) for s in states])
    h1 = np.tanh(feats @ net.params["w1"] + net.params["b1"])
    h2 = np.tanh(h1 @ net.params["w2"] + net.params["b2"])
    design = np.concatenate([h2, np.ones((len(states), 1))], axis=1)

    fvocab = env.forward_actions
    targets_f = np.full((len(states), len(fvocab)), -30.0)
    for i, state in enumerate(states):
        for j, action in enumerate(fvocab):
            p = pf_target[env.state_key(state)].get(action)
            if p is not None:
                targets_f[i, j] = math.log(p)
    sol_f, *_ = np.linalg.lstsq(design, targets_f, rcond=None)
    net.params["wf"] = sol_f[:-1]
    net.params["bf"] = sol_f[-1]

    bvocab = env.backward_actions
    targets_b = np.full((len(states), len(bvocab)), -30.0)
    for i, state in enumerate(states):
        doc = pb_target.get(env.state_key(state), {})
        for j, action in enumerate(bvocab):
            p = doc.get(action)
            if p is not None:
                targets_b[i, j] = math.log(p)
    sol_b, *_ = np.linalg.lstsq(design, targets_b, rcond=None)
    net.params["wb"] = sol_b[:-1]
    net.params["bb"] = sol_b[-1]

    net.params["log_z"] = np.asarray(log_z, dtype=np.float64)
    return net


def randomized_heads(env: GridEnv, seed: int, scale: float = 0.5) -> PolicyNet:
    """A frozen random (non-uniform) policy: normal noise on both heads."""
    rng = np.random.default_rng(seed)
    net = PolicyNet.for_env(env, 64, rng)
    for key in ("wf", "bf", "wb", "bb"):
        net.params[key] = rng.normal(0.0, scale, size=net.params[key].shape)
    return net
