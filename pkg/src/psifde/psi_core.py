"""Weight function, singular kernel and weighted norms.

Everything downstream is parameterized by an increasing weight function
``psi`` on ``[0, b]`` with nonvanishing derivative.  The fractional
calculus built on it uses three primitives defined here:

* the increment ``psi(t) - psi(s)``,
* the weakly singular kernel ``psi'(s) * (psi(t) - psi(s))**(alpha - 1)``,
* the weight factor ``(psi(t) - psi(0))**(rho - 1) / gamma(rho)`` that
  carries the solution's algebraic singularity at ``t = 0``.

Solutions are stored in weighted form
``w(t) = (psi(t) - psi(0))**(1 - rho) * u(t)`` so that no array ever
holds a singular value; ``WeightedGridFunction`` is that container.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, SingularityError
from .special_functions import gamma

__all__ = [
    "PsiSpec",
    "FractionalOrder",
    "WeightedGridFunction",
    "PsiValidationReport",
    "identity_psi",
    "log_shifted_psi",
    "power_psi",
    "tabulated_psi",
    "custom_psi",
    "psi_increment",
    "psi_inverse",
    "kernel",
    "rho_weight",
    "weighted_norm",
    "validate_psi",
]


@dataclass(frozen=True)
class PsiSpec:
    """An increasing weight function on ``[0, b]`` with its derivative.

    ``eval_fn`` and ``deriv_fn`` must accept floats and numpy arrays.
    Instances are immutable and safe to share across threads.
    """

    kind: str
    b: float
    eval_fn: Callable
    deriv_fn: Callable
    label: str = ""

    def __post_init__(self):
        if not self.b > 0:
            raise DomainError(f"psi domain end must be positive, got b={self.b}")

    def eval(self, t):
        return self.eval_fn(t)

    def deriv(self, t):
        return self.deriv_fn(t)

    def increment_from_zero(self, t):
        """psi(t) - psi(0), broadcasting over arrays."""
        return self.eval_fn(t) - self.eval_fn(0.0)


def identity_psi(b: float) -> PsiSpec:
    """psi(t) = t: the classical (Caputo / Riemann-Liouville) calculus."""
    return PsiSpec("identity", float(b),
                   lambda t: np.asarray(t, dtype=float) + 0.0,
                   lambda t: np.ones_like(np.asarray(t, dtype=float)),
                   label="psi(t)=t")


def log_shifted_psi(b: float) -> PsiSpec:
    """psi(t) = log(1 + t): Hadamard-type calculus shifted to start at 0."""
    return PsiSpec("log-shifted", float(b),
                   lambda t: np.log1p(np.asarray(t, dtype=float)),
                   lambda t: 1.0 / (1.0 + np.asarray(t, dtype=float)),
                   label="psi(t)=log(1+t)")


def power_psi(sigma: float, b: float) -> PsiSpec:
    """psi(t) = t**sigma for sigma > 0 (Katugampola-type calculus).

    For sigma != 1 the derivative vanishes or blows up at t = 0, which
    ``validate_psi`` reports as a failure; the kernel and quadrature
    remain usable because they only sample psi itself.
    """
    if not sigma > 0:
        raise DomainError(f"power psi requires sigma > 0, got {sigma}")
    sigma = float(sigma)
    return PsiSpec("power", float(b),
                   lambda t: np.asarray(t, dtype=float) ** sigma,
                   lambda t: sigma * np.asarray(t, dtype=float) ** (sigma - 1.0),
                   label=f"psi(t)=t^{sigma:g}")


def tabulated_psi(nodes, values, derivatives, label: str = "") -> PsiSpec:
    """Custom psi given by samples of the function and its derivative.

    Interpolated with a C1 piecewise-cubic Hermite spline through the
    supplied (value, derivative) data.  Monotonicity is not enforced
    here; run ``validate_psi`` on the result.
    """
    from scipy.interpolate import CubicHermiteSpline

    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    derivatives = np.asarray(derivatives, dtype=float)
    if nodes.ndim != 1 or nodes.size < 2:
        raise DomainError("tabulated psi needs at least two nodes")
    if nodes[0] != 0.0:
        raise DomainError("tabulated psi nodes must start at t=0")
    if np.any(np.diff(nodes) <= 0):
        raise DomainError("tabulated psi nodes must be strictly increasing")
    if values.shape != nodes.shape or derivatives.shape != nodes.shape:
        raise DomainError("tabulated psi values/derivatives must match nodes")
    spline = CubicHermiteSpline(nodes, values, derivatives)
    dspline = spline.derivative()
    return PsiSpec("tabulated", float(nodes[-1]), spline, dspline,
                   label=label or "psi=tabulated")


def custom_psi(eval_fn: Callable, deriv_fn: Callable, b: float,
               label: str = "psi=custom") -> PsiSpec:
    """Wrap arbitrary callables; intended for tests and experimentation."""
    return PsiSpec("custom", float(b), eval_fn, deriv_fn, label=label)


@dataclass(frozen=True)
class FractionalOrder:
    """Order ``alpha`` and type ``beta`` of the derivative.

    The composite parameter ``rho = alpha + beta - alpha*beta`` controls
    the solution's singularity strength at t = 0 and is always derived,
    never stored.  beta = 1 gives the Caputo-type weight (rho = 1),
    beta = 0 the Riemann-Liouville-type weight (rho = alpha).
    """

    alpha: float
    beta: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0,1), got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise DomainError(f"beta must lie in [0,1], got {self.beta}")

    @property
    def rho(self) -> float:
        return self.alpha + self.beta - self.alpha * self.beta


@dataclass(frozen=True)
class WeightedGridFunction:
    """A grid function stored in weighted form.

    ``weighted_values[i] = (psi(grid[i]) - psi(0))**(1 - rho) * u(grid[i])``.
    The raw ``u`` may be singular at t = 0 when rho < 1; the weighted
    representation must be finite everywhere, including the origin.

    With ``allow_impulse_pairs`` the grid may contain each interior node
    at most twice in a row (left/right limits at an impulse time);
    otherwise it must be strictly increasing.
    """

    grid: np.ndarray
    weighted_values: np.ndarray
    rho: float
    psi: PsiSpec
    allow_impulse_pairs: bool = field(default=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        vals = np.asarray(self.weighted_values, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "weighted_values", vals)
        if grid.ndim != 1 or grid.size < 1:
            raise DomainError("grid must be a non-empty 1-d array")
        if vals.shape != grid.shape:
            raise DomainError("weighted_values must match the grid shape")
        if not np.all(np.isfinite(vals)):
            raise DomainError("weighted values must be finite at every node, "
                              "including t=0")
        if not 0.0 < self.rho <= 1.0:
            raise DomainError(f"rho must lie in (0,1], got {self.rho}")
        if grid[0] != 0.0:
            raise DomainError("grid must start at t=0")
        if grid[-1] != self.psi.b:
            raise DomainError(f"grid must end at b={self.psi.b}, got {grid[-1]}")
        d = np.diff(grid)
        if self.allow_impulse_pairs:
            if np.any(d < 0):
                raise DomainError("grid must be non-decreasing")
            # duplicates may appear, but never three nodes with one time
            if grid.size >= 3 and np.any((d[:-1] == 0) & (d[1:] == 0)):
                raise DomainError("a grid time may repeat at most twice")
        elif np.any(d <= 0):
            raise DomainError("grid must be strictly increasing")


def psi_increment(psi: PsiSpec, t: float, s: float) -> float:
    """psi(t) - psi(s) for 0 <= s <= t <= b."""
    if not (0.0 <= s <= t <= psi.b):
        raise DomainError(
            f"psi_increment needs 0 <= s <= t <= {psi.b}, got s={s}, t={t}")
    return float(psi.eval_fn(t) - psi.eval_fn(s))


def psi_inverse(psi: PsiSpec, y: float, tol: float = 1e-14) -> float:
    """Solve psi(t) - psi(0) = y on [0, b] by bisection."""
    total = float(psi.eval_fn(psi.b) - psi.eval_fn(0.0))
    if not 0.0 <= y <= total:
        raise DomainError(f"psi_inverse target {y} outside [0, {total}]")
    lo, hi = 0.0, psi.b
    psi0 = float(psi.eval_fn(0.0))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(psi.eval_fn(mid)) - psi0 < y:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * psi.b:
            break
    return 0.5 * (lo + hi)


def kernel(psi: PsiSpec, alpha: float, t: float, s: float) -> float:
    """Singular kernel psi'(s) * (psi(t) - psi(s))**(alpha - 1).

    Integrable-singular as s -> t; evaluation exactly at s = t is
    refused.  Callers integrate across the singularity in closed form
    (see frac_integral), never by sampling it.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"kernel needs 0 < alpha < 1, got {alpha}")
    if not (0.0 <= s <= t <= psi.b):
        raise DomainError(f"kernel needs 0 <= s <= t <= {psi.b}, got s={s}, t={t}")
    if s == t:
        raise SingularityError("kernel is singular at s = t; integrate "
                               "across the endpoint analytically instead")
    inc = psi_increment(psi, t, s)
    return float(psi.deriv_fn(s)) * inc ** (alpha - 1.0)


def rho_weight(psi: PsiSpec, rho: float, t: float) -> float:
    """(psi(t) - psi(0))**(rho - 1) / gamma(rho).

    The prefactor of the initial-data and impulse terms in the solution
    formula.  Singular at t = 0 when rho < 1; store solutions in
    weighted form rather than evaluating this there.
    """
    if not 0.0 < rho <= 1.0:
        raise DomainError(f"rho must lie in (0,1], got {rho}")
    if not 0.0 <= t <= psi.b:
        raise DomainError(f"t={t} outside [0, {psi.b}]")
    if rho == 1.0:
        return 1.0
    if t == 0.0:
        raise SingularityError(
            "rho_weight is singular at t=0 for rho < 1; use the weighted "
            "representation instead")
    inc = psi_increment(psi, t, 0.0)
    return inc ** (rho - 1.0) / gamma(rho)


def weighted_norm(u: WeightedGridFunction) -> float:
    """Sup of |weighted values| over the grid (the weighted sup-norm)."""
    if u.grid.size == 0:
        raise DomainError("weighted_norm of an empty grid function")
    return float(np.max(np.abs(u.weighted_values)))


@dataclass(frozen=True)
class PsiValidationReport:
    """Probe-based check that a PsiSpec is an admissible weight."""

    passed: bool
    monotone: bool
    derivative_positive: bool
    values_finite: bool
    derivative_consistent: bool
    max_derivative_rel_error: float
    probe_count: int
    failures: tuple[str, ...]


def validate_psi(psi: PsiSpec, probe_count: int = 256) -> PsiValidationReport:
    """Sample psi and psi' and confirm the standing assumptions.

    Checks, at ``probe_count`` uniformly spaced points of [0, b]:
    strict monotonicity of psi, strict positivity of psi', finiteness of
    both, and consistency of psi' with a finite difference of psi to
    relative tolerance 1e-6.  Failures are reported, never raised.
    """
    if probe_count < 2:
        raise DomainError("probe_count must be at least 2")
    probes = np.linspace(0.0, psi.b, probe_count)
    vals = np.asarray(psi.eval_fn(probes), dtype=float)
    ders = np.asarray(psi.deriv_fn(probes), dtype=float)

    failures: list[str] = []
    finite = bool(np.all(np.isfinite(vals)) and np.all(np.isfinite(ders)))
    if not finite:
        failures.append("psi or psi' is non-finite at a probe point")

    monotone = finite and bool(np.all(np.diff(vals) > 0))
    if finite and not monotone:
        failures.append("psi is not strictly increasing across the probes")

    deriv_pos = finite and bool(np.all(ders > 0))
    if finite and not deriv_pos:
        worst = probes[int(np.argmin(ders))]
        failures.append(f"psi' is not strictly positive (worst probe t={worst:g})")

    # second-order finite differences; one-sided at the interval ends
    max_rel = np.inf
    consistent = False
    if finite:
        h = 1e-6 * psi.b
        fd = np.empty_like(probes)
        inner = (probes - h >= 0.0) & (probes + h <= psi.b)
        p_in = probes[inner]
        fd[inner] = (np.asarray(psi.eval_fn(p_in + h), dtype=float)
                     - np.asarray(psi.eval_fn(p_in - h), dtype=float)) / (2 * h)
        lo = probes - h < 0.0
        p_lo = probes[lo]
        fd[lo] = (-3.0 * np.asarray(psi.eval_fn(p_lo), dtype=float)
                  + 4.0 * np.asarray(psi.eval_fn(p_lo + h), dtype=float)
                  - np.asarray(psi.eval_fn(p_lo + 2 * h), dtype=float)) / (2 * h)
        hi = probes + h > psi.b
        p_hi = probes[hi]
        fd[hi] = (3.0 * np.asarray(psi.eval_fn(p_hi), dtype=float)
                  - 4.0 * np.asarray(psi.eval_fn(p_hi - h), dtype=float)
                  + np.asarray(psi.eval_fn(p_hi - 2 * h), dtype=float)) / (2 * h)
        scale = np.maximum(np.abs(ders), np.finfo(float).tiny)
        rel = np.abs(fd - ders) / scale
        max_rel = float(np.max(rel))
        consistent = max_rel <= 1e-6
        if not consistent:
            worst = probes[int(np.argmax(rel))]
            failures.append(
                f"psi' disagrees with a finite difference of psi "
                f"(rel err {max_rel:.3e} at t={worst:g})")

    passed = finite and monotone and deriv_pos and consistent
    return PsiValidationReport(
        passed=passed,
        monotone=monotone,
        derivative_positive=deriv_pos,
        values_finite=finite,
        derivative_consistent=consistent,
        max_derivative_rel_error=max_rel,
        probe_count=probe_count,
        failures=tuple(failures),
    )
