"""Closed-form quantities from the simple-regret analysis.

These are used to validate behaviour, not to drive the policies: in practice
the exploration scale ``alpha`` is tuned directly.
"""

from __future__ import annotations

import math
import warnings

from .errors import InvalidArgumentError

__all__ = ["compute_beta", "beta_threshold", "g_bound", "g_inverse", "theoretical_N_lambda"]


def _positive(**kwargs):
    for name, value in kwargs.items():
        if not value > 0:
            raise InvalidArgumentError(f"{name} must be positive, got {value!r}")


def compute_beta(T, lambda_x, lam, A, N_lambda, H_eps, C1, C2) -> float:
    """Confidence parameter that balances the width budget against ``T``.

    Returns ``sqrt((lambda_x (T - N_lambda (A-1)) + 2 A lam) / (16 C1^2 H_eps)) - C2/C1``.
    A non-positive result is returned as is, with a ``RuntimeWarning`` naming
    the budget needed (:func:`beta_threshold`).
    """
    _positive(T=T, lambda_x=lambda_x, lam=lam, A=A, N_lambda=N_lambda, H_eps=H_eps, C1=C1)
    if C2 < 0:
        raise InvalidArgumentError("C2 must be non-negative")
    num = lambda_x * (T - N_lambda * (A - 1)) + 2 * A * lam
    beta = math.sqrt(max(num, 0.0) / (16.0 * C1 * C1 * H_eps)) - C2 / C1
    if beta <= 0:
        need = beta_threshold(lambda_x, lam, A, N_lambda, H_eps, C1, C2)
        warnings.warn(f"beta={beta:.4g} is not positive; needs T > {need:.4g}", RuntimeWarning, stacklevel=2)
    return beta


def beta_threshold(lambda_x, lam, A, N_lambda, H_eps, C1, C2) -> float:
    """Budget above which :func:`compute_beta` is positive (``C1`` cancels out).

    ``(16 H_eps C2^2 - 2 A lam) / lambda_x + N_lambda (A - 1)``
    """
    _positive(lambda_x=lambda_x, lam=lam, A=A, N_lambda=N_lambda, H_eps=H_eps, C1=C1)
    return (16.0 * H_eps * C2 * C2 - 2 * A * lam) / lambda_x + N_lambda * (A - 1)


def g_bound(N, alpha_theory, lam, lambda_x) -> float:
    """Upper bound on the squared width after ``N`` pulls: ``8 alpha^2 / (lam + N lambda_x / 2)``."""
    _positive(alpha_theory=alpha_theory, lam=lam, lambda_x=lambda_x)
    if N < 0:
        raise InvalidArgumentError("N must be non-negative")
    return 8.0 * alpha_theory**2 / (lam + N * lambda_x / 2.0)


def g_inverse(s, alpha_theory, lam, lambda_x) -> float:
    """Pull count at which the width bound reaches ``s`` (a width, not a squared width)."""
    _positive(s=s, alpha_theory=alpha_theory, lam=lam, lambda_x=lambda_x)
    return 16.0 * alpha_theory**2 / (s * s * lambda_x) - 2.0 * lam / lambda_x


def theoretical_N_lambda(lam, lambda_x, d_star, d_tilde, delta) -> int:
    """Burn-in length required before the width bound applies.

    ``ceil(max(2 (1 - lam) / lambda_x, d_star, 256 / lambda_x^2 * ln(128 d_tilde / (lambda_x^2 delta))))``
    """
    _positive(lam=lam, lambda_x=lambda_x, d_star=d_star, d_tilde=d_tilde)
    if not 0 < delta <= 0.125:
        raise InvalidArgumentError("delta must lie in (0, 1/8]")
    terms = (
        2.0 * (1.0 - lam) / lambda_x,
        float(d_star),
        256.0 / lambda_x**2 * math.log(128.0 * d_tilde / (lambda_x**2 * delta)),
    )
    return int(math.ceil(max(terms)))
