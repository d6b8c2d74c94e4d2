"""Kernels and per-arm incremental kernel ridge regression.

Each arm keeps the inverse of its regularised Gram matrix ``(K + lam*I)^-1``
and the log-determinant of ``K + lam*I``. Both are extended by a rank-one
block (Schur complement) step when a new observation arrives, so an update
costs O(N^2) instead of the O(N^3) of a fresh solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericalDegeneracyError

__all__ = [
    "KernelSpec",
    "ArmState",
    "eval_kernel",
    "posterior",
    "update",
    "log_det_capacity",
]

KERNEL_FAMILIES = ("gaussian", "linear")
SCHUR_FLOOR = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its parameters.

    ``bound`` is ``sup_x sqrt(k(x, x))``. It is exactly 1 for the gaussian
    kernel; for the linear kernel it must dominate the input norms, which
    :meth:`check_bound` verifies against data.
    """

    family: str = "gaussian"
    bandwidth: float = 1.0
    bound: float = 1.0

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise InvalidArgumentError(f"unknown kernel family {self.family!r}")
        if not self.bandwidth > 0:
            raise InvalidArgumentError("bandwidth must be positive")
        if not self.bound > 0:
            raise InvalidArgumentError("kernel bound must be positive")
        if self.family == "gaussian" and self.bound != 1.0:
            raise InvalidArgumentError("gaussian kernel has bound exactly 1")

    def gram(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Kernel matrix between the rows of ``X`` (n, d) and ``Y`` (m, d)."""
        if self.family == "linear":
            return X @ Y.T
        sq = (
            np.einsum("ij,ij->i", X, X)[:, None]
            + np.einsum("ij,ij->i", Y, Y)[None, :]
            - 2.0 * (X @ Y.T)
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(sq * (-0.5 / self.bandwidth**2))

    def column(self, X: np.ndarray, x: np.ndarray) -> np.ndarray:
        """``k(X_i, x)`` for each row of ``X``; exact differences, no expansion."""
        if self.family == "linear":
            return X @ x
        diff = X - x
        return np.exp(np.einsum("ij,ij->i", diff, diff) * (-0.5 / self.bandwidth**2))

    def diag(self, X: np.ndarray) -> np.ndarray:
        if self.family == "linear":
            return np.einsum("ij,ij->i", X, X)
        return np.ones(X.shape[0])

    def self_value(self, x: np.ndarray) -> float:
        if self.family == "linear":
            return float(x @ x)
        return 1.0

    def check_bound(self, X) -> bool:
        """True when every row satisfies ``sqrt(k(x, x)) <= bound``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return bool(np.all(np.sqrt(self.diag(X)) <= self.bound * (1 + 1e-12)))


def _as_context(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidArgumentError("context must be a non-empty vector")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("context entries must be finite")
    return arr


def eval_kernel(spec: KernelSpec, x, y) -> float:
    x = _as_context(x)
    y = _as_context(y)
    if x.shape != y.shape:
        raise InvalidArgumentError(f"dimension mismatch: {x.size} vs {y.size}")
    return float(spec.column(x[None, :], y)[0])


class ArmState:
    """Growing kernel ridge regression history for a single arm.

    Storage is preallocated with geometric growth; the public ``contexts``,
    ``rewards`` and ``inv`` attributes are views of the active block.
    A state is mutated in place by :meth:`update`; use :meth:`copy` to keep a
    snapshot.
    """

    def __init__(self, kernel: KernelSpec, lam: float, dim: int | None = None, capacity: int = 32):
        if not lam > 0:
            raise InvalidArgumentError("lambda must be positive")
        self.kernel = kernel
        self.lam = float(lam)
        self.dim = dim
        self.count = 0
        self.logdet = 0.0
        self._cap = 0
        self._X = np.empty((0, dim or 0))
        self._y = np.empty(0)
        self._inv = np.empty((0, 0))
        # inv @ y, maintained alongside inv so the mean is a single dot product
        self._coef = np.empty(0)
        if dim is not None:
            self._grow(capacity)

    # -- storage ---------------------------------------------------------
    def _grow(self, capacity: int) -> None:
        n = self.count
        X = np.zeros((capacity, self.dim))
        y = np.zeros(capacity)
        inv = np.zeros((capacity, capacity))
        coef = np.zeros(capacity)
        X[:n] = self._X[:n]
        y[:n] = self._y[:n]
        inv[:n, :n] = self._inv[:n, :n]
        coef[:n] = self._coef[:n]
        self._X, self._y, self._inv, self._coef = X, y, inv, coef
        self._cap = capacity

    @property
    def contexts(self) -> np.ndarray:
        return self._X[: self.count]

    @property
    def rewards(self) -> np.ndarray:
        return self._y[: self.count]

    @property
    def inv(self) -> np.ndarray:
        return self._inv[: self.count, : self.count]

    @property
    def coef(self) -> np.ndarray:
        return self._coef[: self.count]

    def copy(self) -> "ArmState":
        other = ArmState.__new__(ArmState)
        n = self.count
        other.kernel = self.kernel
        other.lam = self.lam
        other.dim = self.dim
        other.count = n
        other.logdet = self.logdet
        other._cap = n
        other._X = self._X[:n].copy()
        other._y = self._y[:n].copy()
        other._inv = self._inv[:n, :n].copy()
        other._coef = self._coef[:n].copy()
        return other

    def _check_dim(self, x: np.ndarray) -> None:
        if self.dim is not None and x.size != self.dim:
            raise InvalidArgumentError(f"dimension mismatch: state has d={self.dim}, got {x.size}")

    # -- queries ---------------------------------------------------------
    def posterior(self, x) -> tuple[float, float]:
        """Posterior mean and (clamped) variance at a single context."""
        x = _as_context(x)
        self._check_dim(x)
        kxx = self.kernel.self_value(x)
        n = self.count
        if n == 0:
            return 0.0, kxx
        kvec = self.kernel.column(self._X[:n], x)
        mean = float(kvec @ self._coef[:n])
        var = kxx - float(kvec @ (self._inv[:n, :n] @ kvec))
        return mean, min(max(var, 0.0), kxx)

    def posterior_batch(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised :meth:`posterior` over the rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.dim is not None and X.shape[1] != self.dim:
            raise InvalidArgumentError(f"dimension mismatch: state has d={self.dim}, got {X.shape[1]}")
        kxx = self.kernel.diag(X)
        n = self.count
        if n == 0:
            return np.zeros(X.shape[0]), kxx
        Kq = self.kernel.gram(X, self._X[:n])
        mean = Kq @ self._coef[:n]
        var = kxx - np.einsum("ij,ij->i", Kq @ self._inv[:n, :n], Kq)
        return mean, np.clip(var, 0.0, kxx)

    def log_det_capacity(self) -> float:
        """``log det(I + K/lam)``; zero for an empty state."""
        if self.count == 0:
            return 0.0
        return self.logdet - self.count * math.log(self.lam)

    # -- mutation --------------------------------------------------------
    def update(self, x, r: float) -> "ArmState":
        """Append ``(x, r)`` and extend inverse and log-determinant in place."""
        x = _as_context(x)
        r = float(r)
        if not math.isfinite(r):
            raise InvalidArgumentError("reward must be finite")
        if self.dim is None:
            self.dim = x.size
            self._X = np.empty((0, self.dim))
            self._grow(32)
        self._check_dim(x)
        n = self.count
        kxx = self.kernel.self_value(x)
        if n == 0:
            schur = kxx + self.lam
            if schur <= SCHUR_FLOOR:
                raise NumericalDegeneracyError(f"Schur complement {schur:.3e} too small")
            if self._cap == 0:
                self._grow(32)
            self._inv[0, 0] = 1.0 / schur
            self._coef[0] = r / schur
        else:
            kvec = self.kernel.column(self._X[:n], x)
            inv = self._inv[:n, :n]
            b = inv @ kvec
            schur = kxx + self.lam - float(kvec @ b)
            if schur <= SCHUR_FLOOR:
                raise NumericalDegeneracyError(
                    f"Schur complement {schur:.3e} too small (duplicate context with tiny lambda?)"
                )
            if n == self._cap:
                self._grow(2 * self._cap)
                inv = self._inv[:n, :n]
            resid = r - float(kvec @ self._coef[:n])
            inv += np.outer(b, b / schur)
            self._inv[:n, n] = -b / schur
            self._inv[n, :n] = -b / schur
            self._inv[n, n] = 1.0 / schur
            self._coef[:n] -= b * (resid / schur)
            self._coef[n] = resid / schur
        self._X[n] = x
        self._y[n] = r
        self.logdet += math.log(schur)
        self.count = n + 1
        return self

    def __repr__(self):
        return f"ArmState(kernel={self.kernel!r}, lam={self.lam}, count={self.count})"


def posterior(state: ArmState, x) -> tuple[float, float]:
    return state.posterior(x)


def update(state: ArmState, x, r: float) -> ArmState:
    return state.update(x, r)


def log_det_capacity(state: ArmState) -> float:
    return state.log_det_capacity()
