"""Monte Carlo checks of the confidence-interval and eigenvalue theory.

Every check is seeded; trial ``i`` draws from child stream ``i`` of the
check's seed, so a report can be reproduced trial by trial.
"""

from __future__ import annotations

import inspect
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bounds import g_bound, theoretical_N_lambda
from .confidence import ConfidenceParams, bounds_from_posterior
from .environments import EnvSpec, KernelExpansion, UnitCircle, child_seed
from .errors import InvalidArgumentError
from .harness import policy_rng
from .kernel_core import ArmState, KernelSpec
from .policies import BanditState, PolicyConfig, select_contextual_gap

__all__ = [
    "DiagnosticReport",
    "coverage_check",
    "c2_estimate",
    "c2_growth_check",
    "eigen_lower_bound_check",
    "width_bound_check",
    "second_moment_eigs",
    "theoretical_N_lambda",
    "run_suite",
]


@dataclass
class DiagnosticReport:
    name: str
    trials: int
    violation_rate: float
    nominal_rate: float
    slack: float
    seed: int
    pass_: bool = False
    extra: dict = field(default_factory=dict)
    details: list = field(default_factory=list)

    def __post_init__(self):
        self.pass_ = bool(self.violation_rate <= self.nominal_rate + self.slack)

    @property
    def passed(self) -> bool:
        return self.pass_

    @property
    def std_error(self) -> float:
        p = self.violation_rate
        return math.sqrt(max(p * (1 - p), 0.0) / self.trials) if self.trials else math.nan

    def to_dict(self, details: bool = False) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("pass_")
        d["std_error"] = self.std_error
        if not details:
            d.pop("details")
        return d

    def to_json(self, details: bool = False) -> str:
        return json.dumps(self.to_dict(details), indent=2, default=float)


def c2_estimate(state: ArmState, rho: float, lam: float, f_norm_bound: float) -> float:
    """Data-dependent part ``rho * sqrt(log det(I + K/lam))`` plus ``sqrt(lam) * |f|_H``."""
    if state.lam != lam:
        raise InvalidArgumentError("lambda differs from the state's regulariser")
    return rho * math.sqrt(max(state.log_det_capacity(), 0.0)) + math.sqrt(lam) * f_norm_bound


def coverage_check(trials=2000, beta=2.0, rho=0.1, lam=1.0, steps=30, bandwidth=0.5,
                   n_centers=10, f_norm=1.0, n_query=40, alpha=None, seed=0,
                   slack=0.01) -> DiagnosticReport:
    """Empirical miss rate of the simultaneous confidence band.

    Each trial draws a fresh mean function ``f`` (a gaussian-kernel expansion
    scaled to RKHS norm ``f_norm``), feeds ``steps`` noisy observations with
    contexts uniform on [-2, 2], and checks ``|f - mean| <= alpha sigma / sqrt(lam)``
    at every step, before and after each update, on a fixed query grid plus
    every context of the stream. A trial misses if any check fails.

    ``alpha`` defaults to ``C1 beta + C2`` with ``C1 = rho sqrt(2)`` and ``C2``
    from :func:`c2_estimate` on the full history, as the band is uniform over
    ``t <= T``. Passing ``alpha`` fixes it instead.
    """
    kernel = KernelSpec("gaussian", bandwidth)
    grid = np.linspace(-2.0, 2.0, n_query)[:, None]
    misses = 0
    details = []
    for i in range(trials):
        rng = np.random.default_rng(child_seed(seed, i))
        f = KernelExpansion.random(kernel, 1, n_centers, rng, target_norm=f_norm)
        X = rng.uniform(-2.0, 2.0, size=(steps, 1))
        y = f(X) + rho * rng.standard_normal(steps)
        Q = np.vstack([grid, X])
        fq = f(Q)
        state = ArmState(kernel, lam, 1)
        gaps, sigmas = [], []
        for t in range(steps + 1):
            mean, var = state.posterior_batch(Q)
            gaps.append(np.abs(fq - mean))
            sigmas.append(np.sqrt(var))
            if t < steps:
                state.update(X[t], y[t])
        a = alpha if alpha is not None else rho * math.sqrt(2.0) * beta + c2_estimate(state, rho, lam, f_norm)
        ratio = np.max(np.array(gaps) - a * np.array(sigmas) / math.sqrt(lam))
        missed = bool(ratio > 0)
        misses += missed
        details.append({"trial": i, "alpha": a, "missed": missed})
    # a fixed alpha carries no nominal rate; the report then just records misses
    nominal = math.exp(-beta * beta) if alpha is None else 0.0
    return DiagnosticReport(
        "coverage", trials, misses / trials, nominal, slack, seed,
        extra={"beta": beta, "rho": rho, "lam": lam, "steps": steps, "bandwidth": bandwidth,
               "fixed_alpha": alpha},
        details=details,
    )


def c2_growth_check(T_values=(10, 30, 100, 300, 1000, 3000, 10000), rho=1.0, lam=1.0,
                    seed=0, tolerance=0.10) -> DiagnosticReport:
    """Fit ``C2(T) ~ c sqrt(ln T)`` on a unit-circle stream with a linear kernel.

    ``log det(I_T + K/lam)`` is evaluated through the equivalent d x d form
    ``log det(I_d + X^T X / lam)`` so that long horizons stay cheap; the
    ``|f|_H`` term is left out because it does not depend on ``T``.
    """
    T_values = np.asarray(sorted(T_values))
    env = UnitCircle(EnvSpec(kind="unit_circle", arms=1, seed=seed))
    X = env.generate(int(T_values[-1]), seed).contexts
    c2 = []
    for T in T_values:
        S = X[:T].T @ X[:T]
        _, logdet = np.linalg.slogdet(np.eye(2) + S / lam)
        c2.append(rho * math.sqrt(logdet))
    c2 = np.array(c2)
    root = np.sqrt(np.log(T_values))
    c = float(c2 @ root / (root @ root))
    rel = np.abs(c2 - c * root) / (c * root)
    worst = float(rel.max())
    return DiagnosticReport(
        "c2_growth", len(T_values), float(np.mean(rel > tolerance)), 0.0, 0.0, seed,
        extra={"c": c, "max_relative_deviation": worst, "T": T_values.tolist(), "c2": c2.tolist()},
    )


def second_moment_eigs(X, kernel: KernelSpec | None = None) -> np.ndarray:
    """Descending nonzero-spectrum eigenvalues of ``S = sum_s phi(x_s) phi(x_s)^T``.

    Linear kernel: the explicit d x d matrix. Otherwise the Gram matrix, which
    has the same nonzero spectrum.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if kernel is None or kernel.family == "linear":
        ev = np.linalg.eigvalsh(X.T @ X)
    else:
        ev = np.linalg.eigvalsh(kernel.gram(X, X))
    return np.clip(ev[::-1], 0.0, None)


def eigen_lower_bound_check(trials=1000, t_max=400, t0=200, r=2, delta=0.1, seed=0,
                            d_tilde=None) -> DiagnosticReport:
    """How often ``lambda_r(S_t) >= t lambda_x / 2`` fails for some ``t0 <= t <= t_max``.

    Contexts come from the unit-circle environment (``lambda_x = 1/2``,
    ``d* = 2``). Also reports the trace identity error, the ``r = 1`` check
    ``lambda_1(S_t) >= t lambda_x`` for ``t >= 10`` and the theoretical
    threshold on ``t``, which is far beyond desk scale and is not asserted.
    """
    lam_x, d_star = UnitCircle.lambda_x, UnitCircle.d_star
    if not 1 <= r <= d_star:
        raise InvalidArgumentError(f"r must lie in 1..{d_star}")
    d_tilde = 50 * d_star if d_tilde is None else d_tilde
    env = UnitCircle(EnvSpec(kind="unit_circle", arms=1, seed=seed))
    t = np.arange(1, t_max + 1)
    misses = 0
    top_misses = 0
    trace_err = 0.0
    monotone = True
    details = []
    for i in range(trials):
        X = env.generate(t_max, child_seed(seed, i)).contexts
        S = np.cumsum(X[:, :, None] * X[:, None, :], axis=0)
        ev = np.linalg.eigvalsh(S)[:, ::-1]
        trace_err = max(trace_err, float(np.max(np.abs(ev.sum(1) - np.cumsum((X * X).sum(1))))))
        monotone &= bool(np.all(np.diff(ev[:, 0]) >= -1e-9)) and bool(np.all(ev >= -1e-9))
        late = t >= t0
        missed = bool(np.any(ev[late, r - 1] < t[late] * lam_x / 2))
        misses += missed
        top_misses += bool(np.any(ev[t >= 10, 0] < t[t >= 10] * lam_x - 1e-9))
        details.append({"trial": i, "missed": missed, "min_ratio": float(np.min(ev[late, r - 1] / t[late]))})
    threshold = 256.0 / lam_x**2 * math.log(128.0 * d_tilde / (lam_x**2 * delta))
    return DiagnosticReport(
        "eigen_lower_bound", trials, misses / trials, delta, 0.0, seed,
        extra={
            "r": r, "t0": t0, "t_max": t_max, "lambda_x": lam_x, "d_star": d_star,
            "trace_identity_error": trace_err, "top_eigen_violation_rate": top_misses / trials,
            "eigs_nonnegative_and_top_nondecreasing": monotone,
            "theoretical_t_threshold": threshold, "theoretical_threshold_verified": False,
        },
        details=details,
    )


def width_bound_check(runs=200, T=300, arms=2, alpha_theory=1.0, lam=1.0, delta=0.125,
                      noise_sigma=0.0, n_threshold=None, seed=0, slack=0.05) -> DiagnosticReport:
    """Fraction of gap-policy runs where ``s^2 <= g(N)`` fails for the pulled arm.

    Runs use the unit-circle environment with a linear kernel. A step is
    checked once the pulled arm has more than ``n_threshold`` samples
    (default ``d* = 2``: the theoretical burn-in is reported, not used).
    """
    lam_x, d_star = UnitCircle.lambda_x, UnitCircle.d_star
    n_threshold = d_star if n_threshold is None else n_threshold
    kernel = KernelSpec("linear", bound=1.0)
    params = ConfidenceParams(alpha_theory, lam)
    cfg = PolicyConfig(arms=arms, kernel=kernel, params=params)
    env = UnitCircle(EnvSpec(kind="unit_circle", arms=arms, noise_sigma=noise_sigma, seed=seed))
    misses = 0
    g_monotone = True
    details = []
    for i in range(runs):
        ss = child_seed(seed, i)
        batch = env.generate(T, ss)
        worst = -math.inf
        checked = 0
        records = []

        def observe_hook(state, x, arm):
            n = state.arm_states[arm].count
            if n <= n_threshold:
                return
            mean, var = state.arm_states[arm].posterior(x)
            _, width, _, _ = bounds_from_posterior(mean, var, params)
            records.append((width * width, g_bound(n, alpha_theory, lam, lam_x), n))

        _explore_with_hook(cfg, batch, T, policy_rng(ss, "contextual_gap"), observe_hook)
        for s2, g, n in records:
            worst = max(worst, s2 - g)
            checked += 1
            g_monotone &= g_bound(n + 1, alpha_theory, lam, lam_x) < g
        missed = worst > 0
        misses += missed
        details.append({"run": i, "missed": bool(missed), "checked_steps": checked,
                        "max_excess": float(worst) if checked else None})
    return DiagnosticReport(
        "width_bound", runs, misses / runs, delta, slack, seed,
        extra={
            "T": T, "arms": arms, "alpha_theory": alpha_theory, "lam": lam, "lambda_x": lam_x,
            "n_threshold": n_threshold, "g_strictly_decreasing": bool(g_monotone),
            "theoretical_N_lambda": theoretical_N_lambda(lam, lam_x, d_star, 50 * d_star, delta),
        },
        details=details,
    )


def _explore_with_hook(cfg, batch, T, rng, hook):
    """Gap-policy exploration that calls ``hook(state, x, arm)`` before each update."""
    state = BanditState(cfg, batch.contexts.shape[1])
    for t in range(T):
        x = batch.contexts[t]
        arm, _ = select_contextual_gap(state, x, cfg)
        hook(state, x, arm)
        state.observe(arm, x, batch.rewards[t, arm])
    return state


SUITE = {
    "coverage": coverage_check,
    "c2": c2_growth_check,
    "eigen": eigen_lower_bound_check,
    "width": width_bound_check,
}


def run_suite(names, seed=0, **overrides) -> list[DiagnosticReport]:
    """Run the named checks (``"all"`` for every one) with shared keyword overrides.

    An override is forwarded only to checks whose signature accepts it.
    """
    if "all" in names:
        names = list(SUITE)
    reports = []
    for name in names:
        if name not in SUITE:
            raise InvalidArgumentError(f"unknown diagnostic {name!r}; choose from {sorted(SUITE)}")
        fn = SUITE[name]
        accepted = inspect.signature(fn).parameters
        kwargs = {k: v for k, v in overrides.items() if k in accepted and v is not None}
        reports.append(fn(seed=seed, **kwargs))
    return reports
