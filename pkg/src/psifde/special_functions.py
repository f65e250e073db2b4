"""Gamma and one-parameter Mittag-Leffler functions.

The Mittag-Leffler function E_alpha(z) = sum_n z**n / gamma(n*alpha + 1)
is the shape of every stability envelope produced by this package, and
the fractional analogue of the exponential (E_1 = exp).  Only real
arguments of desk scale (|z| <= 50) are supported; the series is summed
directly with a two-confirmation truncation rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConvergenceError, DomainError

__all__ = ["MLEvalConfig", "DEFAULT_ML_CONFIG", "gamma", "mittag_leffler"]

_Z_CAP = 50.0
_GAMMA_MAX = 171.0
_EXP_MAX = 709.0  # log of the largest finite double


@dataclass(frozen=True)
class MLEvalConfig:
    """Truncation control for the Mittag-Leffler series."""

    rel_tol: float = 1e-12
    max_terms: int = 500

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise DomainError(f"rel_tol must lie in (0,1), got {self.rel_tol}")
        if self.max_terms < 10:
            raise DomainError(f"max_terms must be at least 10, got {self.max_terms}")


DEFAULT_ML_CONFIG = MLEvalConfig()


def gamma(x: float) -> float:
    """Gamma function on positive arguments.

    Delegates to the C library implementation, which is accurate to a
    few ulp on (0, 171).  Nonpositive arguments never arise in this
    package and are rejected.
    """
    if not x > 0.0:
        raise DomainError(f"gamma requires a positive argument, got {x}")
    if x > _GAMMA_MAX:
        raise OverflowError(f"gamma({x}) overflows double precision (x > {_GAMMA_MAX:g})")
    return math.gamma(x)


def _term(alpha: float, z: float, n: int) -> float:
    """n-th series term z**n / gamma(n*alpha + 1) without overflow."""
    if n == 0:
        return 1.0
    if z == 0.0:
        return 0.0
    log_mag = n * math.log(abs(z)) - math.lgamma(n * alpha + 1.0)
    if log_mag > _EXP_MAX:
        raise ConvergenceError(
            f"Mittag-Leffler term n={n} overflows double precision for "
            f"alpha={alpha}, z={z}; the value exceeds the floating range")
    mag = math.exp(log_mag)
    return mag if z > 0.0 or n % 2 == 0 else -mag


def mittag_leffler(alpha: float, z: float,
                   cfg: MLEvalConfig = DEFAULT_ML_CONFIG) -> float:
    """E_alpha(z) by direct series summation.

    Truncates once the next term's magnitude drops below
    ``cfg.rel_tol * |partial sum|`` twice in a row; for alpha < 1 the
    term magnitudes are not monotone at small n, so a single small term
    proves nothing.  Raises ConvergenceError (carrying the last partial
    sum and term count in the message) if the budget is exhausted.
    """
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"mittag_leffler requires alpha in (0,1], got {alpha}")
    z = float(z)
    if abs(z) > _Z_CAP:
        raise DomainError(
            f"|z| = {abs(z)} exceeds the supported argument cap {_Z_CAP:g}")

    total = 1.0  # n = 0 term is exactly 1
    confirmations = 0
    for n in range(1, cfg.max_terms + 1):
        term = _term(alpha, z, n)
        if abs(term) < cfg.rel_tol * abs(total):
            confirmations += 1
        else:
            confirmations = 0
        total += term
        if not math.isfinite(total):
            raise ConvergenceError(
                f"Mittag-Leffler sum became non-finite at term {n} for "
                f"alpha={alpha}, z={z}", residual=abs(term))
        if confirmations >= 2:
            return total
    raise ConvergenceError(
        f"Mittag-Leffler series did not converge within {cfg.max_terms} terms "
        f"for alpha={alpha}, z={z}; last partial sum {total!r}",
        residual=abs(term), history=[total])
