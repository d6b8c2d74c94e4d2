"""Arm-selection policies for the exploration phase and their exploitation rules.

Arms are indexed from 0. Every policy starts with the same context-blind
round-robin burn-in of ``arms * burn_in`` steps; after that:

``contextual_gap``
    gap-based choice between the arm minimising ``B`` and the most optimistic
    competitor, whichever has the wider interval. Exploits ``J``.
``uniform``
    round-robin for the whole budget. Exploits ``argmax mean``.
``epsilon_greedy``
    greedy on the mean with probability ``1 - decay**t``, otherwise a uniform
    draw among the other arms. Exploits ``argmax mean``.
``kernel_ucb`` / ``kernel_ucb_mod``
    ``argmax upper`` while exploring. Exploit ``argmax upper`` and
    ``argmax mean`` respectively.
``kernel_ts``
    ``argmax`` of a normal draw centred on the mean with standard deviation
    ``ts_scale * sigma / sqrt(lam)``. Exploits ``argmax mean``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .confidence import (
    ConfidenceParams,
    GapDecision,
    bounds_from_posterior,
    choose_wider,
    gap_from_bounds,
)
from .errors import InvalidArgumentError
from .kernel_core import ArmState, KernelSpec

__all__ = [
    "POLICY_KINDS",
    "BASELINE_KINDS",
    "PolicyConfig",
    "BanditState",
    "select",
    "select_contextual_gap",
    "select_baseline",
    "recommend",
    "exploit",
    "exploit_batch",
]

POLICY_KINDS = (
    "contextual_gap",
    "uniform",
    "epsilon_greedy",
    "kernel_ucb",
    "kernel_ucb_mod",
    "kernel_ts",
)
BASELINE_KINDS = POLICY_KINDS[1:]


@dataclass(frozen=True)
class PolicyConfig:
    arms: int
    kernel: KernelSpec = field(default_factory=KernelSpec)
    params: ConfidenceParams = field(default_factory=ConfidenceParams)
    burn_in: int = 1
    history_window: int = 1
    epsilon_decay: float = 0.99
    ts_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.arms < 2:
            raise InvalidArgumentError("need at least two arms")
        if self.burn_in < 1:
            raise InvalidArgumentError("burn_in must be >= 1")
        if self.history_window < 1:
            raise InvalidArgumentError("history_window must be >= 1")
        # 0 is accepted so that pure greedy is expressible
        if not 0.0 <= self.epsilon_decay < 1.0:
            raise InvalidArgumentError("epsilon_decay must lie in [0, 1)")
        if not self.ts_scale > 0:
            raise InvalidArgumentError("ts_scale must be positive")

    @property
    def burn_in_steps(self) -> int:
        return self.arms * self.burn_in


class BanditState:
    """Per-arm regression states plus step bookkeeping.

    With ``history_window = W > 1`` the state also keeps the ``W - 1`` most
    recent pre-update snapshots. Snapshots share unchanged arms, so each step
    copies only the arm that was pulled: memory is O(W * max_a N_a^2).
    """

    def __init__(self, cfg: PolicyConfig, dim: int | None = None):
        self.cfg = cfg
        self.arm_states = [ArmState(cfg.kernel, cfg.params.lam, dim) for _ in range(cfg.arms)]
        self.t = 0
        self.pull_counts = np.zeros(cfg.arms, dtype=int)
        self.snapshots: deque = deque(maxlen=max(cfg.history_window - 1, 0))
        self._frozen: dict[int, ArmState] = {}

    @property
    def in_burn_in(self) -> bool:
        return self.t < self.cfg.burn_in_steps

    def _frozen_arm(self, a: int) -> ArmState:
        cached = self._frozen.get(a)
        if cached is None or cached.count != self.arm_states[a].count:
            cached = self.arm_states[a].copy()
            self._frozen[a] = cached
        return cached

    def observe(self, arm: int, x, reward: float) -> None:
        if self.snapshots.maxlen:
            self.snapshots.append(tuple(self._frozen_arm(a) for a in range(self.cfg.arms)))
        self.arm_states[arm].update(x, reward)
        self.pull_counts[arm] += 1
        self.t += 1

    def window(self) -> list:
        """Arm-state tuples from oldest retained snapshot to the current state."""
        return [*self.snapshots, tuple(self.arm_states)]

    def estimates(self, x) -> tuple[np.ndarray, np.ndarray]:
        return _estimates(self.arm_states, x)


def _estimates(arm_states, x) -> tuple[np.ndarray, np.ndarray]:
    A = len(arm_states)
    means = np.empty(A)
    var = np.empty(A)
    for a, st in enumerate(arm_states):
        means[a], var[a] = st.posterior(x)
    return means, var


def _estimates_batch(arm_states, X) -> tuple[np.ndarray, np.ndarray]:
    """Means and variances with shape (A, n)."""
    pairs = [st.posterior_batch(X) for st in arm_states]
    return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])


def _gap_batch(upper: np.ndarray, lower: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise ``J`` and ``B[J]`` for bounds of shape (A, n)."""
    A, n = upper.shape
    cols = np.arange(n)
    top = np.argmax(upper, axis=0)
    rest = upper.copy()
    rest[top, cols] = -np.inf
    second = rest.max(axis=0)
    best_other = np.broadcast_to(upper[top, cols], (A, n)).copy()
    best_other[top, cols] = second
    B = best_other - lower
    J = np.argmin(B, axis=0)
    return J, B[J, cols]


def select_contextual_gap(state: BanditState, x, cfg: PolicyConfig) -> tuple[int, GapDecision | None]:
    if state.t < cfg.burn_in_steps:
        return state.t % cfg.arms, None
    means, var = state.estimates(x)
    _, widths, lower, upper = bounds_from_posterior(means, var, cfg.params)
    decision = gap_from_bounds(upper, lower, widths)
    return choose_wider(decision), decision


def select_baseline(kind: str, state: BanditState, x, cfg: PolicyConfig, rng: np.random.Generator) -> int:
    if kind not in BASELINE_KINDS:
        raise InvalidArgumentError(f"unknown baseline {kind!r}")
    A = cfg.arms
    if kind == "uniform" or state.t < cfg.burn_in_steps:
        return state.t % A
    means, var = state.estimates(x)
    if kind == "epsilon_greedy":
        eps = cfg.epsilon_decay ** (state.t + 1)
        greedy = int(np.argmax(means))
        if rng.random() < eps:
            other = int(rng.integers(A - 1))
            return other + (other >= greedy)
        return greedy
    if kind in ("kernel_ucb", "kernel_ucb_mod"):
        return int(np.argmax(means + cfg.params.scale * np.sqrt(var)))
    draws = means + cfg.ts_scale * cfg.params.scale * np.sqrt(var) * rng.standard_normal(A)
    return int(np.argmax(draws))


def select(kind: str, state: BanditState, x, cfg: PolicyConfig, rng: np.random.Generator) -> int:
    if kind == "contextual_gap":
        return select_contextual_gap(state, x, cfg)[0]
    return select_baseline(kind, state, x, cfg, rng)


def recommend(state: BanditState, x, cfg: PolicyConfig) -> int:
    """Exploitation arm for the gap policy.

    Over the retained window, the snapshot whose ``B[J]`` is smallest wins;
    ties go to the most recent snapshot.
    """
    best_arm, best_b = -1, np.inf
    for arms in reversed(state.window()):
        means, var = _estimates(arms, x)
        _, widths, lower, upper = bounds_from_posterior(means, var, cfg.params)
        d = gap_from_bounds(upper, lower, widths)
        if d.B[d.J] < best_b:
            best_arm, best_b = d.J, d.B[d.J]
    return best_arm


def exploit(kind: str, state: BanditState, x, cfg: PolicyConfig) -> int:
    if kind == "contextual_gap":
        return recommend(state, x, cfg)
    if kind not in BASELINE_KINDS:
        raise InvalidArgumentError(f"unknown policy {kind!r}")
    means, var = state.estimates(x)
    if kind == "kernel_ucb":
        return int(np.argmax(means + cfg.params.scale * np.sqrt(var)))
    return int(np.argmax(means))


def exploit_batch(kind: str, state: BanditState, X, cfg: PolicyConfig) -> np.ndarray:
    """Vectorised :func:`exploit` over the rows of ``X``; never mutates ``state``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if kind == "contextual_gap":
        best_arm = np.zeros(X.shape[0], dtype=int)
        best_b = np.full(X.shape[0], np.inf)
        for arms in reversed(state.window()):
            means, var = _estimates_batch(arms, X)
            _, _, lower, upper = bounds_from_posterior(means, var, cfg.params)
            J, BJ = _gap_batch(upper, lower)
            better = BJ < best_b
            best_arm[better] = J[better]
            best_b[better] = BJ[better]
        return best_arm
    if kind not in BASELINE_KINDS:
        raise InvalidArgumentError(f"unknown policy {kind!r}")
    means, var = _estimates_batch(state.arm_states, X)
    if kind == "kernel_ucb":
        return np.argmax(means + cfg.params.scale * np.sqrt(var), axis=0)
    return np.argmax(means, axis=0)
