"""Experiment orchestration: exploration runs, regret scoring, sweeps and tuning.

Seeding
-------
Replication ``r`` of an experiment with base seed ``s`` owns the seed
sequence ``SeedSequence([s, r])``. Its exploration stream, its evaluation set
and each policy's private generator (used by epsilon-greedy and Thompson
sampling) are fixed child streams of it, so every policy in a replication sees
the same contexts and rewards. Hold-out tuning runs use ``SeedSequence([s,
HOLDOUT_TAG, r])`` and never share draws with evaluation runs.

No policy looks at the budget while exploring, so the run for budget ``T`` is
a prefix of the run for any larger budget. A sweep therefore explores once
to the largest budget and scores the state at each budget on the way; this is
bit-identical to a fresh run per budget, which is what :func:`replay_cell`
does.
"""

from __future__ import annotations

import concurrent.futures as cf
import copy
import csv
import itertools
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .bounds import beta_threshold, compute_beta, g_bound, g_inverse  # noqa: F401
from .confidence import ConfidenceParams
from .environments import (
    CsvEnvironment,
    EnvBatch,
    EnvSpec,
    Environment,
    child_seed,
    make_env,
    simple_regret_batch,
)
from .errors import ConfigError, EndOfDataError, InvalidArgumentError
from .kernel_core import KernelSpec
from .policies import POLICY_KINDS, BanditState, PolicyConfig, exploit_batch, select

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "TuningConfig",
    "RegretReport",
    "policy_config",
    "policy_params",
    "explore",
    "run_exploration",
    "evaluate",
    "run_cell",
    "replay_cell",
    "budget_sweep",
    "grid_search",
    "holdout_split",
    "load_config",
    "config_from_dict",
    "write_reports",
    "read_reports",
    "compute_beta",
    "beta_threshold",
    "g_bound",
    "g_inverse",
]

HOLDOUT_TAG = 7919

#: flat policy parameters accepted in configs and tuning grids
PARAM_DEFAULTS = {
    "kernel": "gaussian",
    "bandwidth": 1.0,
    "lam": 1.0,
    "alpha": 1.0,
    "burn_in": 1,
    "history_window": 1,
    "epsilon_decay": 0.99,
    "ts_scale": 1.0,
}


def policy_config(arms: int, params: dict | None = None, seed: int = 0) -> PolicyConfig:
    """Build a :class:`PolicyConfig` from flat parameters (see ``PARAM_DEFAULTS``)."""
    p = dict(PARAM_DEFAULTS)
    unknown = set(params or {}) - set(p)
    if unknown:
        raise ConfigError(f"unknown policy parameter(s): {sorted(unknown)}")
    p.update(params or {})
    kernel = KernelSpec(p["kernel"], float(p["bandwidth"]))
    return PolicyConfig(
        arms=arms,
        kernel=kernel,
        params=ConfidenceParams(float(p["alpha"]), float(p["lam"])),
        burn_in=int(p["burn_in"]),
        history_window=int(p["history_window"]),
        epsilon_decay=float(p["epsilon_decay"]),
        ts_scale=float(p["ts_scale"]),
        seed=seed,
    )


def policy_params(cfg: PolicyConfig) -> dict:
    return {
        "kernel": cfg.kernel.family,
        "bandwidth": cfg.kernel.bandwidth,
        "lam": cfg.params.lam,
        "alpha": cfg.params.alpha,
        "burn_in": cfg.burn_in,
        "history_window": cfg.history_window,
        "epsilon_decay": cfg.epsilon_decay,
        "ts_scale": cfg.ts_scale,
    }


@dataclass
class TuningConfig:
    grid: dict = field(default_factory=dict)
    budget: int | None = None
    eval_size: int | None = None
    replications: int = 1
    holdout_fraction: float = 0.5


@dataclass
class ExperimentConfig:
    env: EnvSpec
    policies: dict  # kind -> flat params
    budgets: tuple = (100, 200, 500, 1000, 2000)
    eval_size: int = 500
    replications: int = 20
    seed: int = 0
    output: str = "results"
    jobs: int = 1
    timing: bool = True
    plots: bool = True
    tune: TuningConfig | None = None

    def __post_init__(self):
        self.budgets = tuple(int(b) for b in self.budgets)
        if not self.budgets or any(b2 <= b1 for b1, b2 in zip(self.budgets, self.budgets[1:])):
            raise ConfigError("budgets must be non-empty and strictly increasing")
        for kind in self.policies:
            if kind not in POLICY_KINDS:
                raise ConfigError(f"unknown policy {kind!r}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.eval_size < 1:
            raise ConfigError("eval_size must be >= 1")
        for kind, params in self.policies.items():
            cfg = policy_config(max(self.env.arms, 2), params)
            if self.budgets[0] < cfg.burn_in_steps + 1:
                raise ConfigError(
                    f"smallest budget {self.budgets[0]} must exceed the burn-in of {kind} "
                    f"({cfg.burn_in_steps} steps)"
                )

    def policy_configs(self, arms: int) -> dict:
        return {k: policy_config(arms, p) for k, p in self.policies.items()}


@dataclass
class RegretReport:
    policy: str
    budget: int
    replication: int
    avg_regret: float
    worst_regret: float
    pull_histogram: list
    seconds: float
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


# -- seeding -----------------------------------------------------------------


def replication_seed(seed: int, replication: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, replication])


def holdout_seed(seed: int, replication: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, HOLDOUT_TAG, replication])


def policy_rng(seed, kind: str) -> np.random.Generator:
    return np.random.default_rng(child_seed(seed, 100 + POLICY_KINDS.index(kind)))


# -- runs --------------------------------------------------------------------


def explore(kind, cfg: PolicyConfig, batch: EnvBatch, T: int, rng, checkpoints=(), on_checkpoint=None):
    """Run ``T`` exploration steps of ``kind`` over ``batch``.

    ``on_checkpoint(t, state)`` is called after step ``t`` for each ``t`` in
    ``checkpoints``; it must not mutate the state.
    """
    if T > len(batch):
        raise EndOfDataError(f"budget {T} exceeds the {len(batch)} available steps")
    if T < cfg.burn_in_steps:
        raise InvalidArgumentError(f"budget {T} shorter than burn-in ({cfg.burn_in_steps} steps)")
    state = BanditState(cfg, batch.contexts.shape[1])
    marks = set(checkpoints)
    X, R = batch.contexts, batch.rewards
    for t in range(T):
        x = X[t]
        arm = select(kind, state, x, cfg, rng)
        state.observe(arm, x, R[t, arm])
        if on_checkpoint is not None and (t + 1) in marks:
            on_checkpoint(t + 1, state)
    return state


def run_exploration(kind, env: Environment, T: int, seed, cfg: PolicyConfig):
    """Fresh exploration run; returns ``(state, pull_histogram)``."""
    batch = env.generate(T, child_seed(seed, 0))
    state = explore(kind, cfg, batch, T, policy_rng(seed, kind))
    return state, state.pull_counts.copy()


def evaluate(kind, state: BanditState, env_eval: EnvBatch, eval_size: int | None, cfg: PolicyConfig):
    """Average and worst simple regret of the exploitation rule over ``env_eval``."""
    batch = env_eval if eval_size is None else env_eval.head(eval_size)
    arms = exploit_batch(kind, state, batch.contexts, cfg)
    regret = simple_regret_batch(batch.means, arms)
    return float(regret.mean()), float(regret.max())


def run_cell(kind, cfg, env: Environment, budgets, eval_size, seed, replication, timing=True,
             seed_fn=replication_seed):
    """All budgets of one (policy, replication) pair as a list of reports."""
    budgets = sorted(budgets)
    ss = seed_fn(seed, replication)
    reports = []
    try:
        explore_batch, eval_batch = env.split(budgets[-1], eval_size, ss)
        t0 = time.perf_counter()

        def score(t, state):
            avg, worst = evaluate(kind, state, eval_batch, None, cfg)
            secs = time.perf_counter() - t0 if timing else 0.0
            reports.append(RegretReport(kind, t, replication, avg, worst,
                                        state.pull_counts.tolist(), secs))

        explore(kind, cfg, explore_batch, budgets[-1], policy_rng(ss, kind), budgets, score)
    except Exception as exc:  # recorded, the sweep carries on
        log.warning("cell %s/rep %d failed: %s", kind, replication, exc)
        done = {r.budget for r in reports}
        for b in budgets:
            if b not in done:
                reports.append(RegretReport(kind, b, replication, math.nan, math.nan,
                                            [], 0.0, f"{type(exc).__name__}: {exc}"))
    return reports


def replay_cell(kind, cfg, env: Environment, budget, max_budget, eval_size, seed, replication):
    """Re-run one sweep cell from scratch (exploration of exactly ``budget`` steps)."""
    ss = replication_seed(seed, replication)
    explore_batch, eval_batch = env.split(max_budget, eval_size, ss)
    state = explore(kind, cfg, explore_batch, budget, policy_rng(ss, kind))
    avg, worst = evaluate(kind, state, eval_batch, None, cfg)
    return RegretReport(kind, budget, replication, avg, worst, state.pull_counts.tolist(), 0.0)


def _cell_task(args):
    return run_cell(*args)


def _order_key(r: RegretReport):
    return (POLICY_KINDS.index(r.policy), r.budget, r.replication)


def budget_sweep(config: ExperimentConfig, env: Environment | None = None, write: bool = True):
    """Every (policy, budget, replication) report, sorted; optionally persisted."""
    env = env or make_env(config.env)
    cfgs = config.policy_configs(env.arms)
    tasks = [
        (kind, cfgs[kind], env, config.budgets, config.eval_size, config.seed, r, config.timing)
        for kind in cfgs
        for r in range(config.replications)
    ]
    reports = []
    if config.jobs > 1:
        with cf.ProcessPoolExecutor(max_workers=config.jobs) as pool:
            for chunk in pool.map(_cell_task, tasks):
                reports.extend(chunk)
    else:
        for task in tasks:
            reports.extend(_cell_task(task))
    reports.sort(key=_order_key)
    if write:
        write_reports(reports, config.output)
    return reports


# -- tuning ------------------------------------------------------------------


def holdout_split(env: Environment, fraction: float = 0.5):
    """Hold-out and evaluation environments.

    Stored datasets are cut in file order; generated environments are shared
    and kept apart by seed (see the module docstring).
    """
    if isinstance(env, CsvEnvironment):
        return env.halves(fraction)
    return env, env


def _grid_points(grid: dict):
    keys = list(grid)
    for values in itertools.product(*(grid[k] for k in keys)):
        yield dict(zip(keys, values))


def grid_search(ho_env: Environment, param_grid: dict, budget: int, eval_size: int, seed: int,
                kinds=POLICY_KINDS, base_params: dict | None = None, replications: int = 1):
    """Per-policy grid point with the lowest mean hold-out average simple regret.

    ``param_grid`` maps parameter name to candidate values; a nested dict
    under a policy name adds or overrides axes for that policy only. Ties keep
    the earliest point in grid order. Returns ``{kind: {"params", "score",
    "table"}}``.
    """
    base_params = base_params or {}
    shared = {k: v for k, v in param_grid.items() if k not in POLICY_KINDS}
    results = {}
    for kind in kinds:
        grid = {**shared, **param_grid.get(kind, {})}
        if not grid:
            raise InvalidArgumentError("empty tuning grid")
        best, best_score, table = None, math.inf, []
        for point in _grid_points(grid):
            params = {**base_params.get(kind, {}), **point}
            cfg = policy_config(ho_env.arms, params)
            scores = []
            for r in range(replications):
                rep = run_cell(kind, cfg, ho_env, [budget], eval_size, seed, r,
                               timing=False, seed_fn=holdout_seed)[0]
                scores.append(rep.avg_regret)
            score = float(np.mean(scores))
            table.append({**point, "score": score})
            if score < best_score:
                best, best_score = params, score
        if best is None:
            raise RuntimeError(f"every grid point failed for {kind}")
        results[kind] = {"params": best, "score": best_score, "table": table}
    return results


# -- persistence -------------------------------------------------------------

REPORT_COLUMNS = ("policy", "budget", "replication", "avg_regret", "worst_regret", "seconds")
HIST_COLUMNS = ("policy", "budget", "replication", "arm", "pulls")


def write_reports(reports, output, stem: str = "regret"):
    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    main = out / f"{stem}.csv"
    hist = out / f"{stem}_hist.csv"
    with main.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow([r.policy, r.budget, r.replication, repr(r.avg_regret),
                        repr(r.worst_regret), repr(r.seconds)])
    with hist.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HIST_COLUMNS)
        for r in reports:
            for arm, pulls in enumerate(r.pull_histogram):
                w.writerow([r.policy, r.budget, r.replication, arm, pulls])
    return main, hist


def read_reports(output, stem: str = "regret"):
    out = Path(output)
    hists = {}
    with (out / f"{stem}_hist.csv").open(newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["policy"], int(row["budget"]), int(row["replication"]))
            hists.setdefault(key, []).append(int(row["pulls"]))
    reports = []
    with (out / f"{stem}.csv").open(newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["policy"], int(row["budget"]), int(row["replication"]))
            reports.append(RegretReport(key[0], key[1], key[2], float(row["avg_regret"]),
                                        float(row["worst_regret"]), hists.get(key, []),
                                        float(row["seconds"])))
    return reports


def summarize(reports):
    """``{(policy, budget): (mean avg, std-err avg, mean worst, n)}`` over replications."""
    groups = {}
    for r in reports:
        if not r.failed:
            groups.setdefault((r.policy, r.budget), []).append((r.avg_regret, r.worst_regret))
    out = {}
    for key, vals in groups.items():
        a = np.array(vals)
        n = len(a)
        se = float(a[:, 0].std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        out[key] = (float(a[:, 0].mean()), se, float(a[:, 1].mean()), n)
    return out


# -- configuration -----------------------------------------------------------

_ENV_FIELDS = {f.name for f in fields(EnvSpec)}
_TOP_KEYS = {"env", "policies", "defaults", "budgets", "eval_size", "replications", "seed",
             "output", "jobs", "timing", "plots", "tune"}
_TUNE_KEYS = {f.name for f in fields(TuningConfig)}


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Parse a config mapping; see the README for the schema."""
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    env_raw = dict(raw.get("env", {}))
    bad = set(env_raw) - _ENV_FIELDS
    if bad:
        raise ConfigError(f"unknown env key(s): {sorted(bad)}")
    try:
        env = EnvSpec(**env_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"env: {exc}") from None
    defaults = dict(raw.get("defaults", {}))
    pol_raw = raw.get("policies", list(POLICY_KINDS))
    if isinstance(pol_raw, list):
        pol_raw = {k: {} for k in pol_raw}
    policies = {}
    for kind, params in pol_raw.items():
        merged = {**defaults, **(params or {})}
        try:
            policy_config(max(env.arms, 2), merged)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"policy {kind}: {exc}") from None
        policies[kind] = merged
    tune = None
    if raw.get("tune"):
        t = dict(raw["tune"])
        bad = set(t) - _TUNE_KEYS
        if bad:
            raise ConfigError(f"unknown tune key(s): {sorted(bad)}")
        tune = TuningConfig(**t)
    kwargs = {k: raw[k] for k in ("budgets", "eval_size", "replications", "seed", "output",
                                   "jobs", "timing", "plots") if k in raw}
    try:
        return ExperimentConfig(env=env, policies=policies, tune=tune, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``dotted.key=value`` overrides (values parsed as JSON when possible)."""
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        parts = key.split(".")
        node = raw
        for p in parts[:-1]:
            child = node.setdefault(p, {})
            if isinstance(child, list) and all(isinstance(v, str) for v in child):
                # a bare policy list becomes a mapping so entries can be addressed
                child = node[p] = {v: {} for v in child}
            node = child
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-mapping")
        node[parts[-1]] = _coerce(value)
    return raw


def load_config(path, overrides=()) -> tuple[ExperimentConfig, dict]:
    """Read a JSON config, apply overrides; returns the parsed config and the raw mapping."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = apply_overrides(raw, overrides)
    return config_from_dict(raw), raw


def config_to_dict(config: ExperimentConfig) -> dict:
    env = asdict(config.env)
    if env.get("offsets") is not None:
        env["offsets"] = list(env["offsets"])
    return {
        "env": env,
        "policies": config.policies,
        "budgets": list(config.budgets),
        "eval_size": config.eval_size,
        "replications": config.replications,
        "seed": config.seed,
        "output": config.output,
        "jobs": config.jobs,
        "timing": config.timing,
        "plots": config.plots,
        "tune": asdict(config.tune) if config.tune else None,
    }


def tune_config(config: ExperimentConfig, env: Environment | None = None):
    """Tune every policy on the hold-out split; returns ``(tuned config, grid results)``."""
    if config.tune is None:
        raise ConfigError("config has no 'tune' section")
    env = env or make_env(config.env)
    ho_env, _ = holdout_split(env, config.tune.holdout_fraction)
    results = grid_search(
        ho_env,
        config.tune.grid,
        config.tune.budget or config.budgets[-1],
        config.tune.eval_size or config.eval_size,
        config.seed,
        kinds=tuple(config.policies),
        base_params=config.policies,
        replications=config.tune.replications,
    )
    tuned = replace(config, policies={k: results[k]["params"] for k in config.policies})
    return tuned, results
