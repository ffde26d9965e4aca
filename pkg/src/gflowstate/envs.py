"""Environment core: the grid MDP, reward bands, and the hook interface.

States form a DAG rooted at the initial state. Every environment exposes the
same small hook set (keys, features, rendering, dynamics) so training, the
store, and the analytics layer never special-case the grid.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, NamedTuple, Sequence

import numpy as np

__all__ = [
    "Action",
    "CapabilityError",
    "Environment",
    "GridConfig",
    "GridEnv",
    "GridState",
    "RenderSpec",
    "Terminal",
]


class CapabilityError(RuntimeError):
    """An operation the environment cannot support (too large, not enumerable)."""


class Action(Enum):
    INC_X = "inc_x"
    INC_Y = "inc_y"
    STOP = "stop"


class GridState(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class Terminal:
    """Marker returned by apply_action when the trajectory ends at `state`."""

    state: Any


@dataclass(frozen=True)
class RenderSpec:
    """Environment-agnostic drawing instruction: {kind, payload} JSON."""

    kind: str
    payload: dict

    def to_json(self) -> dict:
        return {"kind": self.kind, "payload": self.payload}


@dataclass(frozen=True)
class GridConfig:
    """Grid geometry and reward shape.

    The reward of a cell is r0 plus r1 if both axes fall in the outer band
    plus r2 if both axes fall in the inner band, where an axis value is the
    normalized distance d = |coord/(height-1) - 0.5| and band membership is
    half-open: lo < d <= hi.
    """

    height: int = 20
    r0: float = 0.001
    r1: float = 0.5
    r2: float = 2.0
    outer: tuple[float, float] = (0.25, 0.5)
    inner: tuple[float, float] = (0.3, 0.4)

    def __post_init__(self) -> None:
        if self.height < 2:
            raise ValueError(f"grid height must be >= 2, got {self.height}")

    def to_json(self) -> dict:
        return {
            "height": self.height,
            "r0": self.r0,
            "r1": self.r1,
            "r2": self.r2,
            "outer": list(self.outer),
            "inner": list(self.inner),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GridConfig":
        return cls(
            height=int(doc["height"]),
            r0=float(doc["r0"]),
            r1=float(doc["r1"]),
            r2=float(doc["r2"]),
            outer=(float(doc["outer"][0]), float(doc["outer"][1])),
            inner=(float(doc["inner"][0]), float(doc["inner"][1])),
        )


class Environment(ABC):
    """Hook interface every environment implements.

    Forward actions come from a fixed ordered vocabulary
    (`forward_actions`); the final entry must be the stop action. Backward
    moves reuse the non-stop part of the vocabulary: `parents(s)` yields
    (parent, action) pairs such that apply_action(parent, action) == s.
    """

    name: str
    feature_dim: int
    forward_actions: Sequence[Action]
    backward_actions: Sequence[Action]
    max_trajectory_length: int

    @abstractmethod
    def initial_state(self) -> Any: ...

    @abstractmethod
    def valid_forward_actions(self, state: Any) -> list[Action]: ...

    @abstractmethod
    def apply_action(self, state: Any, action: Action) -> Any: ...

    @abstractmethod
    def parents(self, state: Any) -> list[tuple[Any, Action]]: ...

    @abstractmethod
    def reward(self, state: Any) -> float: ...

    @abstractmethod
    def state_key(self, state: Any) -> str: ...

    @abstractmethod
    def parse_key(self, key: str) -> Any: ...

    @abstractmethod
    def features(self, state: Any) -> np.ndarray: ...

    @abstractmethod
    def render_state(self, state: Any) -> RenderSpec: ...

    @abstractmethod
    def render_states(self, states: Sequence[Any]) -> RenderSpec: ...

    def enumerate_states(self) -> list[Any]:
        """All states in a topological order, when tractable."""
        raise CapabilityError(f"environment {self.name!r} is not enumerable")

    def config_json(self) -> dict:
        raise NotImplementedError


def _in_band(d: float, band: tuple[float, float]) -> bool:
    return band[0] < d <= band[1]


class GridEnv(Environment):
    """H x H grid rooted at (0,0) with IncX / IncY / Stop actions.

    Stop is valid everywhere, so every state is a potential terminal. The
    state DAG is the monotone lattice: parents of (x,y) are (x-1,y) via
    IncX and (x,y-1) via IncY.
    """

    name = "grid"
    feature_dim = 2
    forward_actions = (Action.INC_X, Action.INC_Y, Action.STOP)
    backward_actions = (Action.INC_X, Action.INC_Y)

    def __init__(self, config: GridConfig | None = None) -> None:
        self.config = config or GridConfig()
        self.height = self.config.height
        # Longest trajectory walks both axes end to end, plus the stop step;
        # the spec guard of 4H comfortably bounds it.
        self.max_trajectory_length = 4 * self.height

    def initial_state(self) -> GridState:
        return GridState(0, 0)

    def _check(self, state: GridState) -> None:
        h = self.height
        if not (0 <= state.x < h and 0 <= state.y < h):
            raise ValueError(f"state {state} outside {h}x{h} grid")

    def valid_forward_actions(self, state: GridState) -> list[Action]:
        self._check(state)
        actions = []
        if state.x < self.height - 1:
            actions.append(Action.INC_X)
        if state.y < self.height - 1:
            actions.append(Action.INC_Y)
        actions.append(Action.STOP)
        return actions

    def apply_action(self, state: GridState, action: Action) -> GridState | Terminal:
        self._check(state)
        if action is Action.STOP:
            return Terminal(state)
        if action is Action.INC_X:
            nxt = GridState(state.x + 1, state.y)
        elif action is Action.INC_Y:
            nxt = GridState(state.x, state.y + 1)
        else:
            raise ValueError(f"unknown action {action!r}")
        if nxt.x >= self.height or nxt.y >= self.height:
            raise ValueError(f"action {action.value} leaves the grid from {tuple(state)}")
        return nxt

    def parents(self, state: GridState) -> list[tuple[GridState, Action]]:
        self._check(state)
        out: list[tuple[GridState, Action]] = []
        if state.x > 0:
            out.append((GridState(state.x - 1, state.y), Action.INC_X))
        if state.y > 0:
            out.append((GridState(state.x, state.y - 1), Action.INC_Y))
        return out

    def reward(self, state: GridState) -> float:
        self._check(state)
        cfg = self.config
        scale = self.height - 1
        dists = (abs(state.x / scale - 0.5), abs(state.y / scale - 0.5))
        value = cfg.r0
        if all(_in_band(d, cfg.outer) for d in dists):
            value += cfg.r1
        if all(_in_band(d, cfg.inner) for d in dists):
            value += cfg.r2
        return value

    def state_key(self, state: GridState) -> str:
        return f"{state.x},{state.y}"

    def parse_key(self, key: str) -> GridState:
        try:
            xs, ys = key.split(",")
            state = GridState(int(xs), int(ys))
        except (ValueError, TypeError) as exc:
            raise ValueError(f"malformed grid state key {key!r}") from exc
        if self.state_key(state) != key:  # canonical form only, no aliases
            raise ValueError(f"malformed grid state key {key!r}")
        self._check(state)
        return state

    def features(self, state: GridState) -> np.ndarray:
        self._check(state)
        scale = self.height - 1
        return np.array([state.x / scale, state.y / scale], dtype=np.float64)

    def render_state(self, state: GridState) -> RenderSpec:
        self._check(state)
        return RenderSpec(
            kind="grid_highlight",
            payload={"height": self.height, "cells": [[state.x, state.y]]},
        )

    def render_states(self, states: Sequence[GridState]) -> RenderSpec:
        counts: dict[str, int] = {}
        for state in states:
            self._check(state)
            key = self.state_key(state)
            counts[key] = counts.get(key, 0) + 1
        ordered = {key: counts[key] for key in sorted(counts)}
        return RenderSpec(
            kind="grid_density",
            payload={"height": self.height, "counts": ordered},
        )

    def enumerate_states(self) -> list[GridState]:
        """All H*H states ordered by (x+y, x): a topological order of the DAG."""
        if self.height * self.height > 1_000_000:
            raise CapabilityError(
                f"grid of {self.height}x{self.height} states is too large to enumerate"
            )
        states = [GridState(x, y) for x in range(self.height) for y in range(self.height)]
        states.sort(key=lambda s: (s.x + s.y, s.x))
        return states

    def config_json(self) -> dict:
        return self.config.to_json()
