"""Policy network: a small MLP with analytic gradients.

One trunk (two tanh layers) feeds two linear heads: forward-action logits
and backward-parent logits. A learned scalar log_z rides along with the
parameters. Heads are zero-initialized so the initial policy is uniform
over whatever actions the environment masks in.

Everything is float64 numpy; gradients are computed by hand so they can be
audited against finite differences.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from .envs import Action, Environment

__all__ = [
    "PolicyNet",
    "backward_policy",
    "forward_policy",
    "masked_log_softmax",
    "masked_softmax",
]


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise softmax over the entries where mask is True; zeros elsewhere.

    Rows with an empty mask come back all-zero (an empty distribution), which
    is what the root state's parent distribution looks like.
    """
    logits = np.asarray(logits, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    neg = np.where(mask, logits, -np.inf)
    any_valid = mask.any(axis=-1, keepdims=True)
    shift = np.where(any_valid, np.max(neg, axis=-1, keepdims=True), 0.0)
    exp = np.exp(neg - shift) * mask
    total = exp.sum(axis=-1, keepdims=True)
    return np.divide(exp, total, out=np.zeros_like(exp), where=total > 0)


def masked_log_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Log of masked_softmax, computed stably; -inf at masked-out entries."""
    logits = np.asarray(logits, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    neg = np.where(mask, logits, -np.inf)
    any_valid = mask.any(axis=-1, keepdims=True)
    shift = np.where(any_valid, np.max(neg, axis=-1, keepdims=True), 0.0)
    centered = neg - shift
    total = np.sum(np.exp(np.where(mask, centered, -np.inf)) * mask, axis=-1, keepdims=True)
    # Empty rows would hit log(0); give them a harmless norm, the final
    # where() masks every entry of such rows to -inf anyway.
    norm = np.log(np.where(any_valid, total, 1.0))
    return np.where(mask, centered - norm, -np.inf)


class PolicyNet:
    """Two-layer tanh MLP with forward/backward heads and a log_z scalar."""

    PARAM_KEYS = ("w1", "b1", "w2", "b2", "wf", "bf", "wb", "bb", "log_z")

    def __init__(
        self,
        feature_dim: int,
        hidden_width: int,
        n_forward: int,
        n_backward: int,
        rng: np.random.Generator,
    ) -> None:
        self.feature_dim = feature_dim
        self.hidden_width = hidden_width
        self.n_forward = n_forward
        self.n_backward = n_backward
        w = hidden_width
        self.params: dict[str, np.ndarray] = {
            "w1": rng.normal(0.0, 1.0 / np.sqrt(feature_dim), (feature_dim, w)),
            "b1": np.zeros(w),
            "w2": rng.normal(0.0, 1.0 / np.sqrt(w), (w, w)),
            "b2": np.zeros(w),
            # Zero heads -> uniform masked policies at initialization.
            "wf": np.zeros((w, n_forward)),
            "bf": np.zeros(n_forward),
            "wb": np.zeros((w, n_backward)),
            "bb": np.zeros(n_backward),
            "log_z": np.zeros(()),
        }

    @classmethod
    def for_env(
        cls, env: Environment, hidden_width: int, rng: np.random.Generator
    ) -> "PolicyNet":
        return cls(
            env.feature_dim,
            hidden_width,
            len(env.forward_actions),
            len(env.backward_actions),
            rng,
        )

    @property
    def log_z(self) -> float:
        return float(self.params["log_z"])

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, dict]:
        """Batch forward pass. Returns (forward_logits, backward_logits, cache)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        p = self.params
        h1 = np.tanh(x @ p["w1"] + p["b1"])
        h2 = np.tanh(h1 @ p["w2"] + p["b2"])
        lf = h2 @ p["wf"] + p["bf"]
        lb = h2 @ p["wb"] + p["bb"]
        return lf, lb, {"x": x, "h1": h1, "h2": h2}

    def backward(
        self, cache: dict, dlf: np.ndarray | None, dlb: np.ndarray | None
    ) -> dict[str, np.ndarray]:
        """Backprop logit gradients to parameter gradients (log_z excluded)."""
        x, h1, h2 = cache["x"], cache["h1"], cache["h2"]
        p = self.params
        grads = {key: np.zeros_like(p[key]) for key in self.PARAM_KEYS}
        dh2 = np.zeros_like(h2)
        if dlf is not None:
            grads["wf"] = h2.T @ dlf
            grads["bf"] = dlf.sum(axis=0)
            dh2 += dlf @ p["wf"].T
        if dlb is not None:
            grads["wb"] = h2.T @ dlb
            grads["bb"] = dlb.sum(axis=0)
            dh2 += dlb @ p["wb"].T
        da2 = dh2 * (1.0 - h2 * h2)
        grads["w2"] = h1.T @ da2
        grads["b2"] = da2.sum(axis=0)
        dh1 = da2 @ p["w2"].T
        da1 = dh1 * (1.0 - h1 * h1)
        grads["w1"] = x.T @ da1
        grads["b1"] = da1.sum(axis=0)
        return grads

    def to_json(self) -> dict:
        doc: dict[str, Any] = {
            "feature_dim": self.feature_dim,
            "hidden_width": self.hidden_width,
            "n_forward": self.n_forward,
            "n_backward": self.n_backward,
        }
        doc["params"] = {key: self.params[key].tolist() for key in self.PARAM_KEYS}
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "PolicyNet":
        net = cls.__new__(cls)
        net.feature_dim = int(doc["feature_dim"])
        net.hidden_width = int(doc["hidden_width"])
        net.n_forward = int(doc["n_forward"])
        net.n_backward = int(doc["n_backward"])
        net.params = {
            key: np.asarray(doc["params"][key], dtype=np.float64)
            for key in cls.PARAM_KEYS
        }
        return net


def _forward_mask(env: Environment, state: Any) -> np.ndarray:
    mask = np.zeros(len(env.forward_actions), dtype=bool)
    valid = env.valid_forward_actions(state)
    for action in valid:
        mask[env.forward_actions.index(action)] = True
    return mask


def _backward_mask(env: Environment, state: Any) -> np.ndarray:
    mask = np.zeros(len(env.backward_actions), dtype=bool)
    for _, action in env.parents(state):
        mask[env.backward_actions.index(action)] = True
    return mask


def forward_policy(net: PolicyNet, env: Environment, state: Any) -> dict[Action, float]:
    """Distribution over valid forward actions at `state`."""
    lf, _, _ = net.forward(env.features(state))
    probs = masked_softmax(lf, _forward_mask(env, state)[None, :])[0]
    return {
        action: float(probs[i])
        for i, action in enumerate(env.forward_actions)
        if probs[i] > 0.0 or action in env.valid_forward_actions(state)
    }


def backward_policy(net: PolicyNet, env: Environment, state: Any) -> dict[Action, float]:
    """Distribution over parent moves of `state`; empty at the root."""
    parents = env.parents(state)
    if not parents:
        return {}
    _, lb, _ = net.forward(env.features(state))
    probs = masked_softmax(lb, _backward_mask(env, state)[None, :])[0]
    return {
        action: float(probs[env.backward_actions.index(action)])
        for _, action in parents
    }
