"""Terminal-probability estimators for a fixed policy.

Two ways to get log P(x), the probability that a rollout of the forward
policy terminates at x:

- exact dynamic programming over an enumerable state DAG (log-space, so
  deep low-probability states never underflow to -inf), and
- an importance-sampling estimate from K backward trajectories drawn under
  the backward policy, averaged with a max-shifted log-sum-exp.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Any

import numpy as np

from .envs import Action, Environment
from .policy import PolicyNet, _backward_mask, _forward_mask, masked_log_softmax

__all__ = [
    "EstimatorConfig",
    "estimate_log_ptx",
    "exact_terminal_distribution",
    "exact_terminal_log_distribution",
]


@dataclass(frozen=True)
class EstimatorConfig:
    k: int = 1000
    seed: int = 0


def _state_logits(net: PolicyNet, env: Environment, states: list[Any]):
    feats = np.stack([env.features(s) for s in states])
    fmask = np.stack([_forward_mask(env, s) for s in states])
    bmask = np.stack([_backward_mask(env, s) for s in states])
    lf, lb, _ = net.forward(feats)
    return masked_log_softmax(lf, fmask), masked_log_softmax(lb, bmask)


def exact_terminal_log_distribution(net: PolicyNet, env: Environment) -> dict[str, float]:
    """log P(terminate at s) for every state, by forward DP in log space."""
    states = env.enumerate_states()
    f_logp, _ = _state_logits(net, env, states)
    index = {env.state_key(s): i for i, s in enumerate(states)}
    stop_idx = env.forward_actions.index(Action.STOP)
    log_flow = np.full(len(states), -np.inf)
    log_flow[index[env.state_key(env.initial_state())]] = 0.0
    out: dict[str, float] = {}
    for i, state in enumerate(states):
        key = env.state_key(state)
        flow = log_flow[i]
        for action in env.valid_forward_actions(state):
            j = env.forward_actions.index(action)
            if action is Action.STOP:
                out[key] = float(flow + f_logp[i, j])
            else:
                child = index[env.state_key(env.apply_action(state, action))]
                log_flow[child] = np.logaddexp(log_flow[child], flow + f_logp[i, j])
    return out


def exact_terminal_distribution(net: PolicyNet, env: Environment) -> dict[str, float]:
    """P(terminate at s) for every state; values sum to 1 up to float error."""
    return {key: float(np.exp(lp)) for key, lp in exact_terminal_log_distribution(net, env).items()}


def estimate_log_ptx(
    net: PolicyNet,
    env: Environment,
    x: Any,
    config: EstimatorConfig = EstimatorConfig(),
) -> float:
    """Importance-sampling estimate of log P(terminate at x).

    Draws K backward trajectories from x under the backward policy; each
    contributes weight prod P_F / prod P_B with P_F including the Stop step
    at x. The estimate is log of the mean weight, computed max-shifted. The
    random stream is keyed to (seed, state key) so per-state estimates are
    reproducible regardless of evaluation order.
    """
    if config.k < 1:
        raise ValueError(f"estimator needs k >= 1, got {config.k}")
    key_x = env.state_key(x)
    rng = np.random.default_rng([config.seed, zlib.crc32(key_x.encode("utf-8"))])
    root_key = env.state_key(env.initial_state())
    k = config.k

    f_logp_x, _ = _state_logits(net, env, [x])
    stop_idx = env.forward_actions.index(Action.STOP)
    log_w = np.full(k, float(f_logp_x[0, stop_idx]))

    current: list[Any] = [x] * k
    pending: list[int] = [-1] * k  # forward-action index awaiting P_F at the parent
    done = np.zeros(k, dtype=bool)
    n_back = len(env.backward_actions)

    for _ in range(env.max_trajectory_length + 1):
        lanes = [i for i in range(k) if not done[i]]
        if not lanes:
            break
        # Deduplicate: lanes crowd onto few distinct states near the root.
        uniq: dict[str, int] = {}
        uniq_states: list[Any] = []
        rows = np.empty(len(lanes), dtype=np.int64)
        for j, i in enumerate(lanes):
            ckey = env.state_key(current[i])
            if ckey not in uniq:
                uniq[ckey] = len(uniq_states)
                uniq_states.append(current[i])
            rows[j] = uniq[ckey]
        f_logp, b_logp = _state_logits(net, env, uniq_states)
        b_prob = np.exp(b_logp)  # zeros at invalid entries
        parent_maps = []
        for s in uniq_states:
            parent_maps.append(
                {env.backward_actions.index(a): p for p, a in env.parents(s)}
            )

        # Resolve pending forward terms now that we stand on the parent.
        for j, i in enumerate(lanes):
            if pending[i] >= 0:
                log_w[i] += f_logp[rows[j], pending[i]]
                pending[i] = -1

        active = [
            (j, i) for j, i in zip(range(len(lanes)), lanes)
            if env.state_key(current[i]) != root_key
        ]
        for j, i in zip(range(len(lanes)), lanes):
            if env.state_key(current[i]) == root_key:
                done[i] = True
        if not active:
            continue
        draws = rng.random(len(active))
        for d, (j, i) in enumerate(active):
            probs = b_prob[rows[j]]
            acc = 0.0
            choice = -1
            for a_idx in range(n_back):
                if probs[a_idx] <= 0.0:
                    continue
                acc += probs[a_idx]
                choice = a_idx
                if draws[d] < acc:
                    break
            log_w[i] -= b_logp[rows[j], choice]
            pending[i] = env.forward_actions.index(env.backward_actions[choice])
            current[i] = parent_maps[rows[j]][choice]
    if not done.all():
        raise RuntimeError("backward walk exceeded the maximum length guard")

    shift = float(np.max(log_w))
    return float(shift + np.log(np.mean(np.exp(log_w - shift))))
