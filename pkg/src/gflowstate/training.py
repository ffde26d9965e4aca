"""Trajectory sampling and trajectory-balance training.

The loss for one trajectory tau ending at x is

    (log_z + sum log P_F(a|s) - log R(x) - sum log P_B(s|s'))^2

where the stop step contributes nothing to the backward sum. Exploration
mixes epsilon of a uniform-over-valid policy into the *sampling*
distribution only; recorded probabilities are always the unmixed policy's.
train() anneals the mixture linearly from config.epsilon to zero so late
iterations optimize on-policy.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .envs import Action, Environment
from .policy import PolicyNet, _backward_mask, _forward_mask, masked_log_softmax, masked_softmax

__all__ = [
    "Adam",
    "Step",
    "TrainConfig",
    "TrainResult",
    "Trajectory",
    "sample_batch",
    "sample_trajectory",
    "tb_loss",
    "tb_loss_batch",
    "train",
]


@dataclass(frozen=True)
class Step:
    state: Any
    action: Action
    p_forward: float
    p_backward: float


@dataclass(frozen=True)
class Trajectory:
    trajectory_id: int
    iteration: int
    steps: tuple[Step, ...]
    terminal: Any

    def states(self) -> list[Any]:
        return [step.state for step in self.steps]


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 1000
    batch_size: int = 16
    learning_rate: float = 1e-3
    log_z_learning_rate: float = 1e-1
    epsilon: float = 0.05
    seed: int = 0
    hidden_width: int = 64

    def to_json(self) -> dict:
        return {
            "iterations": self.iterations,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "log_z_learning_rate": self.log_z_learning_rate,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "hidden_width": self.hidden_width,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TrainConfig":
        return cls(
            iterations=int(doc["iterations"]),
            batch_size=int(doc["batch_size"]),
            learning_rate=float(doc["learning_rate"]),
            log_z_learning_rate=float(doc["log_z_learning_rate"]),
            epsilon=float(doc["epsilon"]),
            seed=int(doc["seed"]),
            hidden_width=int(doc["hidden_width"]),
        )


def sample_trajectory(
    net: PolicyNet,
    env: Environment,
    rng: np.random.Generator,
    epsilon: float = 0.0,
    iteration: int = 0,
    trajectory_id: int = 0,
) -> Trajectory:
    """Roll out one trajectory from the initial state until Stop."""
    state = env.initial_state()
    rows: list[list] = []  # [state, action, p_forward, p_backward]
    prev_action: Action | None = None
    for _ in range(env.max_trajectory_length + 1):
        lf, lb, _ = net.forward(env.features(state))
        if prev_action is not None:
            pb = masked_softmax(lb, _backward_mask(env, state)[None, :])[0]
            rows[-1][3] = float(pb[env.backward_actions.index(prev_action)])
        pf = masked_softmax(lf, _forward_mask(env, state)[None, :])[0]
        valid = env.valid_forward_actions(state)
        chosen = _draw_action(rng.random(), pf, valid, env, epsilon)
        p_fwd = float(pf[env.forward_actions.index(chosen)])
        if chosen is Action.STOP:
            rows.append([state, chosen, p_fwd, 1.0])
            steps = tuple(Step(*row) for row in rows)
            return Trajectory(trajectory_id, iteration, steps, state)
        rows.append([state, chosen, p_fwd, float("nan")])
        state = env.apply_action(state, chosen)
        prev_action = chosen
    raise RuntimeError("trajectory exceeded the maximum length guard")


def _draw_action(
    u: float,
    pf: np.ndarray,
    valid: list[Action],
    env: Environment,
    epsilon: float,
) -> Action:
    # Inverse-CDF draw over valid actions in vocabulary order, under the
    # epsilon-mixed behavior distribution.
    k = len(valid)
    acc = 0.0
    for action in valid:
        idx = env.forward_actions.index(action)
        acc += (1.0 - epsilon) * float(pf[idx]) + epsilon / k
        if u < acc:
            return action
    return valid[-1]


def sample_batch(
    net: PolicyNet,
    env: Environment,
    rng: np.random.Generator,
    batch_size: int,
    epsilon: float = 0.0,
    iteration: int = 0,
    id_base: int = 0,
) -> list[Trajectory]:
    """Roll out a batch in lockstep; one network pass per step for all lanes."""
    states: list[Any] = [env.initial_state() for _ in range(batch_size)]
    rows: list[list[list]] = [[] for _ in range(batch_size)]
    prev_action: list[Action | None] = [None] * batch_size
    terminal: list[Any] = [None] * batch_size
    for _ in range(env.max_trajectory_length + 1):
        lanes = [i for i in range(batch_size) if terminal[i] is None]
        if not lanes:
            break
        feats = np.stack([env.features(states[i]) for i in lanes])
        fmask = np.stack([_forward_mask(env, states[i]) for i in lanes])
        bmask = np.stack([_backward_mask(env, states[i]) for i in lanes])
        lf, lb, _ = net.forward(feats)
        pf = masked_softmax(lf, fmask)
        pb = masked_softmax(lb, bmask)
        draws = rng.random(len(lanes))
        for row, i in enumerate(lanes):
            if prev_action[i] is not None:
                rows[i][-1][3] = float(pb[row, env.backward_actions.index(prev_action[i])])
            valid = env.valid_forward_actions(states[i])
            chosen = _draw_action(float(draws[row]), pf[row], valid, env, epsilon)
            p_fwd = float(pf[row, env.forward_actions.index(chosen)])
            if chosen is Action.STOP:
                rows[i].append([states[i], chosen, p_fwd, 1.0])
                terminal[i] = states[i]
            else:
                rows[i].append([states[i], chosen, p_fwd, float("nan")])
                states[i] = env.apply_action(states[i], chosen)
                prev_action[i] = chosen
    if any(t is None for t in terminal):
        raise RuntimeError("batch sampling exceeded the maximum length guard")
    return [
        Trajectory(
            trajectory_id=id_base + i,
            iteration=iteration,
            steps=tuple(Step(*row) for row in rows[i]),
            terminal=terminal[i],
        )
        for i in range(batch_size)
    ]


def _loss_rows(env: Environment, trajectories: Sequence[Trajectory]):
    """Flatten trajectories into forward-head and backward-head row batches."""
    f_feats, f_mask, f_idx, f_traj = [], [], [], []
    b_feats, b_mask, b_idx, b_traj = [], [], [], []
    for ti, traj in enumerate(trajectories):
        steps = traj.steps
        for si, step in enumerate(steps):
            f_feats.append(env.features(step.state))
            f_mask.append(_forward_mask(env, step.state))
            f_idx.append(env.forward_actions.index(step.action))
            f_traj.append(ti)
            if step.action is not Action.STOP:
                nxt = steps[si + 1].state
                b_feats.append(env.features(nxt))
                b_mask.append(_backward_mask(env, nxt))
                b_idx.append(env.backward_actions.index(step.action))
                b_traj.append(ti)
    f = (np.stack(f_feats), np.stack(f_mask), np.array(f_idx), np.array(f_traj))
    if b_feats:
        b = (np.stack(b_feats), np.stack(b_mask), np.array(b_idx), np.array(b_traj))
    else:
        b = None
    return f, b


def tb_loss_batch(
    net: PolicyNet,
    env: Environment,
    trajectories: Sequence[Trajectory],
    rewards: Sequence[float],
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Per-trajectory losses plus gradients of the batch-mean loss."""
    n = len(trajectories)
    (f_feats, f_mask, f_idx, f_traj), b = _loss_rows(env, trajectories)
    lf, _, f_cache = net.forward(f_feats)
    f_logp = masked_log_softmax(lf, f_mask)
    rows = np.arange(len(f_idx))
    sum_f = np.bincount(f_traj, weights=f_logp[rows, f_idx], minlength=n)

    if b is not None:
        b_feats, b_mask, b_idx, b_traj = b
        _, lb, b_cache = net.forward(b_feats)
        b_logp = masked_log_softmax(lb, b_mask)
        brows = np.arange(len(b_idx))
        sum_b = np.bincount(b_traj, weights=b_logp[brows, b_idx], minlength=n)
    else:
        sum_b = np.zeros(n)

    log_r = np.log(np.asarray(rewards, dtype=np.float64))
    residual = net.log_z + sum_f - log_r - sum_b
    losses = residual * residual

    # Gradient of mean(residual^2): each row scaled by 2*residual/n.
    coeff = 2.0 * residual / n
    f_probs = masked_softmax(lf, f_mask)
    dlf = -f_probs
    dlf[rows, f_idx] += 1.0
    dlf *= coeff[f_traj][:, None]
    grads = net.backward(f_cache, dlf, None)
    if b is not None:
        b_probs = masked_softmax(lb, b_mask)
        dlb = -b_probs
        dlb[brows, b_idx] += 1.0
        dlb *= -coeff[b_traj][:, None]
        b_grads = net.backward(b_cache, None, dlb)
        for key in grads:
            grads[key] = grads[key] + b_grads[key]
    grads["log_z"] = np.asarray(coeff.sum())
    return losses, grads


def tb_loss(
    net: PolicyNet,
    env: Environment,
    trajectory: Trajectory,
    reward: float,
) -> tuple[float, dict[str, np.ndarray]]:
    """Trajectory-balance loss and its analytic parameter gradients."""
    if reward <= 0.0:
        raise ValueError(f"reward must be positive, got {reward}")
    losses, grads = tb_loss_batch(net, env, [trajectory], [reward])
    return float(losses[0]), grads


class Adam:
    """Adam with a separate learning rate for the log_z scalar."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        learning_rate: float,
        log_z_learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.lr = {key: learning_rate for key in params}
        self.lr["log_z"] = log_z_learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {key: np.zeros_like(value) for key, value in params.items()}
        self.v = {key: np.zeros_like(value) for key, value in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for key, grad in grads.items():
            self.m[key] = b1 * self.m[key] + (1.0 - b1) * grad
            self.v[key] = b2 * self.v[key] + (1.0 - b2) * grad * grad
            m_hat = self.m[key] / bias1
            v_hat = self.v[key] / bias2
            params[key] = params[key] - self.lr[key] * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainResult:
    net: PolicyNet
    summary: dict = field(default_factory=dict)


def train(env: Environment, config: TrainConfig, store=None) -> TrainResult:
    """Run trajectory-balance training, logging every trajectory to `store`.

    config.epsilon is the initial exploration weight; it anneals linearly
    to zero over the run. The store receives one transactional batch per
    iteration; on a store failure the run is marked aborted before the
    error propagates.
    """
    started = time.monotonic()
    rng = np.random.default_rng(config.seed)
    net = PolicyNet.for_env(env, config.hidden_width, rng)
    adam = Adam(net.params, config.learning_rate, config.log_z_learning_rate)
    terminals: set[str] = set()
    sample_count = 0
    last_losses = np.zeros(0)
    try:
        for it in range(config.iterations):
            batch = sample_batch(
                net,
                env,
                rng,
                config.batch_size,
                epsilon=config.epsilon * (1.0 - it / config.iterations),
                iteration=it,
                id_base=it * config.batch_size,
            )
            rewards = [env.reward(t.terminal) for t in batch]
            losses, grads = tb_loss_batch(net, env, batch, rewards)
            if store is not None:
                store.log_iteration(batch, rewards, [float(l) for l in losses])
            adam.step(net.params, grads)
            for traj in batch:
                terminals.add(env.state_key(traj.terminal))
            sample_count += len(batch)
            last_losses = losses
    except Exception:
        if store is not None:
            store.mark_aborted()
        raise
    summary = {
        "iterations": config.iterations,
        "sample_count": sample_count,
        "distinct_terminal_states": len(terminals),
        "final_mean_loss": float(last_losses.mean()) if last_losses.size else None,
        "log_z": net.log_z,
        "wall_time_s": time.monotonic() - started,
    }
    if store is not None:
        store.finish_run(net, summary)
    return TrainResult(net=net, summary=summary)
