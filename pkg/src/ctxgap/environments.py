"""Context and reward generators.

An environment turns a seed into a batch of steps: contexts, the true mean
reward of every arm (when known) and a realised reward for every arm. The
harness reveals only the pulled arm's realised reward to a policy.

Batches are prefix-consistent: ``generate(n, seed)`` is the first ``n`` rows
of ``generate(m, seed)`` for any ``m >= n``. Contexts and noise come from
independent child generators so this holds for every kind.

Kinds
-----
``synthetic_sine``
    ``x ~ U[0, 2*pi]``; arm ``a`` (0-based) has mean
    ``amplitude * sin((a + 1) * x) + offsets[a]``. Defaults: 20 arms,
    amplitude 1, no offsets, no noise.
``ar1_sensor``
    Surrogate for a non-i.i.d. sensor-selection stream. Contexts follow a
    stationary AR(1) process ``x_t = c x_{t-1} + sqrt(1 - c^2) z_t`` with unit
    marginal variance per coordinate. Each arm's mean is a fixed random
    gaussian-kernel expansion with 20 centres drawn from the seed.
``unit_circle``
    Contexts uniform on the unit circle in R^2 (second moment ``I/2``); arm
    means ``w_a . x`` with fixed random ``|w_a| <= 1``.
``csv``
    Replays a file (see :func:`load_csv` for the format).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    DataParseError,
    EndOfDataError,
    InvalidArgumentError,
    SchemaError,
    UnsupportedError,
)
from .kernel_core import KernelSpec

__all__ = [
    "ENV_KINDS",
    "EnvSpec",
    "EnvStep",
    "EnvBatch",
    "KernelExpansion",
    "Environment",
    "SyntheticSine",
    "AR1Sensor",
    "UnitCircle",
    "CsvEnvironment",
    "make_env",
    "step",
    "simple_regret",
    "simple_regret_batch",
    "load_csv",
    "write_csv",
    "child_seed",
]

ENV_KINDS = ("synthetic_sine", "ar1_sensor", "unit_circle", "csv")


@dataclass(frozen=True)
class EnvSpec:
    kind: str = "synthetic_sine"
    arms: int = 20
    noise_sigma: float = 0.0
    ar_coefficient: float = 0.9
    dims: int = 1
    seed: int = 0
    path: str | None = None
    offsets: tuple[float, ...] | None = None
    amplitude: float = 1.0
    bandwidth: float = 1.0
    shuffle: bool = True

    def __post_init__(self):
        if self.kind not in ENV_KINDS:
            raise InvalidArgumentError(f"unknown environment kind {self.kind!r}")
        if self.kind != "csv" and self.arms < 1:
            raise InvalidArgumentError("arms must be >= 1")
        if not self.noise_sigma >= 0:
            raise InvalidArgumentError("noise_sigma must be >= 0")
        if not -1.0 < self.ar_coefficient < 1.0:
            raise InvalidArgumentError("ar_coefficient must lie in (-1, 1)")
        if self.dims < 1:
            raise InvalidArgumentError("dims must be >= 1")
        if self.kind == "csv" and not self.path:
            raise InvalidArgumentError("csv environment needs a path")
        if self.offsets is not None:
            object.__setattr__(self, "offsets", tuple(float(v) for v in self.offsets))
            if len(self.offsets) != self.arms:
                raise InvalidArgumentError("offsets must have one entry per arm")


@dataclass(frozen=True)
class EnvStep:
    context: np.ndarray
    true_means: np.ndarray | None
    realized_rewards: np.ndarray


@dataclass
class EnvBatch:
    """Rows of consecutive steps: contexts (n, d), means (n, A) or None, rewards (n, A)."""

    contexts: np.ndarray
    means: np.ndarray | None
    rewards: np.ndarray

    def __len__(self):
        return self.contexts.shape[0]

    def step(self, t: int) -> EnvStep:
        if t >= len(self):
            raise EndOfDataError(f"step {t} beyond {len(self)} available steps")
        means = None if self.means is None else self.means[t]
        return EnvStep(self.contexts[t], means, self.rewards[t])

    def head(self, n: int) -> "EnvBatch":
        means = None if self.means is None else self.means[:n]
        return EnvBatch(self.contexts[:n], means, self.rewards[:n])

    def tail(self, n: int) -> "EnvBatch":
        means = None if self.means is None else self.means[-n:]
        return EnvBatch(self.contexts[-n:], means, self.rewards[-n:])


@dataclass
class KernelExpansion:
    """``f(x) = sum_m w_m k(x, z_m)``, a function with known RKHS norm."""

    kernel: KernelSpec
    centers: np.ndarray
    weights: np.ndarray

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.kernel.gram(X, self.centers) @ self.weights

    @property
    def rkhs_norm(self) -> float:
        K = self.kernel.gram(self.centers, self.centers)
        return math.sqrt(max(float(self.weights @ K @ self.weights), 0.0))

    @classmethod
    def random(cls, kernel, dims, n_centers, rng, center_scale=1.0, target_norm=None):
        centers = rng.normal(scale=center_scale, size=(n_centers, dims))
        weights = rng.normal(size=n_centers) / math.sqrt(n_centers)
        f = cls(kernel, centers, weights)
        if target_norm is not None:
            f.weights = f.weights * (target_norm / f.rkhs_norm)
        return f


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def child_seed(seed, index: int) -> np.random.SeedSequence:
    """Deterministic child stream; unlike ``spawn`` this never mutates ``seed``."""
    ss = as_seed_sequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=(*ss.spawn_key, index))


def _streams(seed):
    return np.random.default_rng(child_seed(seed, 0)), np.random.default_rng(child_seed(seed, 1))


class Environment:
    """Base class; subclasses implement :meth:`_contexts` and :meth:`means`."""

    has_means = True
    iid = True

    def __init__(self, spec: EnvSpec):
        self.spec = spec
        self._cache: EnvBatch | None = None

    @property
    def arms(self) -> int:
        return self.spec.arms

    @property
    def dim(self) -> int:
        return self.spec.dims

    def _contexts(self, n, rng) -> np.ndarray:
        raise NotImplementedError

    def means(self, X) -> np.ndarray:
        raise NotImplementedError

    def generate(self, n: int, seed) -> EnvBatch:
        ctx_rng, noise_rng = _streams(seed)
        X = self._contexts(n, ctx_rng)
        M = self.means(X)
        R = M.copy()
        if self.spec.noise_sigma > 0:
            R += self.spec.noise_sigma * noise_rng.standard_normal(M.shape)
        return EnvBatch(X, M, R)

    def split(self, n_explore: int, eval_size: int, seed) -> tuple[EnvBatch, EnvBatch]:
        """Exploration stream and a disjoint evaluation set for one replication."""
        if self.iid:
            return (self.generate(n_explore, child_seed(seed, 2)),
                    self.generate(eval_size, child_seed(seed, 3)))
        # one continuous trace: evaluation continues after the exploration stream
        batch = self.generate(n_explore + eval_size, seed)
        return batch.head(n_explore), batch.tail(eval_size)

    def step(self, t: int) -> EnvStep:
        """Step ``t`` (0-based) of the stream seeded by ``spec.seed``."""
        if self._cache is None or t >= len(self._cache):
            n = max(2 * (t + 1), 64)
            self._cache = self.generate(n, self.spec.seed)
        return self._cache.step(t)


class SyntheticSine(Environment):
    def __init__(self, spec):
        super().__init__(spec)
        if spec.dims != 1:
            raise InvalidArgumentError("synthetic_sine contexts are scalar (dims=1)")
        self._freq = np.arange(1, spec.arms + 1, dtype=float)
        self._offsets = np.zeros(spec.arms) if spec.offsets is None else np.array(spec.offsets)

    def _contexts(self, n, rng):
        return rng.uniform(0.0, 2.0 * math.pi, size=(n, 1))

    def means(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.spec.amplitude * np.sin(X[:, :1] * self._freq) + self._offsets


class AR1Sensor(Environment):
    iid = False

    def __init__(self, spec):
        super().__init__(spec)
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x5E5]))
        kernel = KernelSpec("gaussian", spec.bandwidth)
        self.mean_functions = [
            KernelExpansion.random(kernel, spec.dims, 20, rng) for _ in range(spec.arms)
        ]

    def _contexts(self, n, rng):
        c = self.spec.ar_coefficient
        z = rng.standard_normal((n, self.spec.dims))
        X = np.empty_like(z)
        prev = z[0]
        X[0] = prev
        scale = math.sqrt(1.0 - c * c)
        for t in range(1, n):
            prev = c * prev + scale * z[t]
            X[t] = prev
        return X

    def means(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.column_stack([f(X) for f in self.mean_functions])


class UnitCircle(Environment):
    #: second-moment eigenvalue floor and effective dimension, by construction
    lambda_x = 0.5
    d_star = 2

    def __init__(self, spec):
        if spec.dims != 2:
            spec = replace(spec, dims=2)
        super().__init__(spec)
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0xC1C]))
        w = rng.normal(size=(spec.arms, 2))
        w /= np.maximum(np.linalg.norm(w, axis=1, keepdims=True), 1.0)
        self.weights = w

    def _contexts(self, n, rng):
        theta = rng.uniform(0.0, 2.0 * math.pi, size=n)
        return np.column_stack([np.cos(theta), np.sin(theta)])

    def means(self, X):
        return np.atleast_2d(np.asarray(X, dtype=float)) @ self.weights.T


class CsvEnvironment(Environment):
    """Replay of a stored dataset.

    ``generate(n, seed)`` replays the first ``n`` rows of the file order, or of
    a seeded permutation when ``shuffle`` is on (only sensible for i.i.d. data).
    """

    def __init__(self, contexts, rewards, means=None, shuffle=True, seed=0, path=None):
        A = rewards.shape[1]
        spec = EnvSpec(kind="csv", arms=A, dims=contexts.shape[1], seed=seed,
                       path=str(path or "<memory>"), shuffle=shuffle)
        super().__init__(spec)
        self.contexts = contexts
        self.rewards = rewards
        self.true_means = means
        self.has_means = means is not None
        self.iid = shuffle

    def __len__(self):
        return self.contexts.shape[0]

    def means(self, X):
        raise UnsupportedError("stored datasets expose means only row-wise")

    def order(self, seed) -> np.ndarray:
        n = len(self)
        if not self.spec.shuffle:
            return np.arange(n)
        return np.random.default_rng(as_seed_sequence(seed)).permutation(n)

    def _take(self, idx) -> EnvBatch:
        means = None if self.true_means is None else self.true_means[idx]
        return EnvBatch(self.contexts[idx], means, self.rewards[idx])

    def generate(self, n, seed):
        if n > len(self):
            raise EndOfDataError(f"requested {n} rows, dataset has {len(self)}")
        return self._take(self.order(seed)[:n])

    def split(self, n_explore, eval_size, seed):
        if n_explore + eval_size > len(self):
            raise EndOfDataError(
                f"need {n_explore + eval_size} rows for exploration+evaluation, have {len(self)}"
            )
        idx = self.order(seed)
        return self._take(idx[:n_explore]), self._take(idx[len(self) - eval_size:])

    def halves(self, fraction: float = 0.5) -> tuple["CsvEnvironment", "CsvEnvironment"]:
        """Hold-out / evaluation split in file order."""
        cut = int(round(len(self) * fraction))
        parts = []
        for sl in (slice(0, cut), slice(cut, None)):
            means = None if self.true_means is None else self.true_means[sl]
            parts.append(CsvEnvironment(self.contexts[sl], self.rewards[sl], means,
                                        self.spec.shuffle, self.spec.seed, self.spec.path))
        return parts[0], parts[1]


def make_env(spec: EnvSpec) -> Environment:
    if spec.kind == "synthetic_sine":
        return SyntheticSine(spec)
    if spec.kind == "ar1_sensor":
        return AR1Sensor(spec)
    if spec.kind == "unit_circle":
        return UnitCircle(spec)
    return load_csv(spec.path, shuffle=spec.shuffle, seed=spec.seed)


def step(env: Environment, t: int) -> EnvStep:
    return env.step(t)


def simple_regret(envstep: EnvStep, arm: int) -> float:
    if envstep.true_means is None:
        raise UnsupportedError("true means unavailable; simple regret undefined")
    m = envstep.true_means
    return float(m.max() - m[arm])


def simple_regret_batch(means: np.ndarray | None, arms: np.ndarray) -> np.ndarray:
    if means is None:
        raise UnsupportedError("true means unavailable; simple regret undefined")
    arms = np.asarray(arms, dtype=int)
    return means.max(axis=1) - means[np.arange(means.shape[0]), arms]


# -- CSV format --------------------------------------------------------------
#
# header:  d=<int>,A=<int>[,means=<0|1>]
# row:     d context values, A realised rewards, then A true means if present.
# A row may carry A trailing empty fields in place of the means.


def _parse_header(line: str) -> tuple[int, int, bool]:
    fields = {}
    for part in line.strip().split(","):
        if not part.strip():
            continue
        key, sep, value = part.partition("=")
        if not sep:
            raise SchemaError(f"malformed header field {part!r}", line=1)
        fields[key.strip()] = value.strip()
    try:
        d = int(fields["d"])
        A = int(fields["A"])
        has_means = bool(int(fields.get("means", "0")))
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"header must be 'd=<int>,A=<int>,means=<0|1>': {exc}", line=1) from None
    if d < 1 or A < 1:
        raise SchemaError("d and A must be positive", line=1)
    return d, A, has_means


def load_csv(path, shuffle: bool = True, seed: int = 0) -> CsvEnvironment:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            raise SchemaError("empty file", line=1)
        d, A, has_means = _parse_header(header)
        contexts, rewards, means = [], [], []
        for lineno, row in enumerate(csv.reader(fh), start=2):
            if not row or all(not c.strip() for c in row):
                continue
            cells = [c.strip() for c in row]
            if len(cells) not in (d + A, d + 2 * A):
                raise SchemaError(f"expected {d + A} or {d + 2 * A} fields, got {len(cells)}", line=lineno)
            mean_cells = cells[d + A:]
            if mean_cells and all(c == "" for c in mean_cells):
                mean_cells = []
            if has_means and not mean_cells:
                raise SchemaError("header declares means but row has none", line=lineno)
            try:
                values = [float(c) for c in cells[: d + A] + mean_cells]
            except ValueError as exc:
                raise DataParseError(str(exc), line=lineno) from None
            if not all(math.isfinite(v) for v in values):
                raise DataParseError("non-finite value", line=lineno)
            contexts.append(values[:d])
            rewards.append(values[d: d + A])
            if mean_cells:
                means.append(values[d + A:])
    if not contexts:
        raise SchemaError("no data rows")
    if means and len(means) != len(contexts):
        raise SchemaError("means present on some rows only")
    M = np.array(means) if means else None
    return CsvEnvironment(np.array(contexts), np.array(rewards), M, shuffle=shuffle, seed=seed, path=path)


def write_csv(path, contexts, rewards, means=None) -> None:
    contexts = np.atleast_2d(np.asarray(contexts, dtype=float))
    rewards = np.atleast_2d(np.asarray(rewards, dtype=float))
    d, A = contexts.shape[1], rewards.shape[1]
    buf = io.StringIO()
    buf.write(f"d={d},A={A},means={int(means is not None)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    for i in range(contexts.shape[0]):
        row = [*contexts[i], *rewards[i]]
        if means is not None:
            row.extend(means[i])
        writer.writerow([repr(float(v)) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
