"""Picard iteration on the equivalent fractional integral equation.

The problem is solved through its integral form: on (0, b],

    u(t) = R(t) * (u0 + sum_{t_k < t} J_k(u(t_k-))) + I^{alpha;psi} g(t),
    g(t) = f(t, u(t), u(h(t)), g(t)),

with R(t) = (psi(t)-psi(0))**(rho-1) / gamma(rho).  The right-hand side
defines an operator on grid functions whose fixed point is the solution;
sweeps of that operator converge geometrically whenever the contraction
modulus of the problem is below one (and often in practice even when the
sufficient condition fails, in which case a warning is emitted instead
of a refusal).

Everything is stored in weighted form w = (psi(t)-psi(0))**(1-rho) * u,
in which the update is free of singular arithmetic:

    w_new = (u0 + sum J_k) / gamma(rho) + (psi(t)-psi(0))**(1-rho) * I.

Impulse times are mandatory grid nodes and appear twice (left and right
slots), so both one-sided limits are first-class; the weighted jump at
t_k is exactly J_k(u(t_k-)) / gamma(rho).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import IO

import numpy as np

from .errors import ConvergenceError, DomainError
from .frac_integral import ProductQuadrature, QuadratureScheme
from .problem import ImpulsiveDelayIVP, LipschitzData
from .psi_core import WeightedGridFunction, psi_inverse
from .special_functions import gamma

__all__ = [
    "GridSpec",
    "GridSolution",
    "make_grid",
    "apply_T",
    "picard_solve",
    "solution_at",
    "export_solution",
    "load_solution",
    "EXPORT_COLUMNS",
]

EXPORT_COLUMNS = ("t", "weighted_u", "u", "g", "is_impulse_left", "is_impulse_right")


@dataclass(frozen=True)
class GridSpec:
    """Grid resolution and node placement.

    ``n`` uniform intervals (in t, or in psi(t) for kind='uniform-psi')
    before the impulse times are snapped in as mandatory nodes.
    """

    n: int
    kind: str = "uniform-t"

    def __post_init__(self):
        if self.n < 2:
            raise DomainError(f"grid needs at least 2 intervals, got n={self.n}")
        if self.kind not in ("uniform-t", "uniform-psi"):
            raise DomainError(f"unknown grid kind {self.kind!r}")


@dataclass(frozen=True)
class GridSolution:
    """A grid function in weighted form with impulse-slot bookkeeping.

    ``times`` contains every impulse time twice in a row; the first slot
    holds the left limit and the second the right limit.  ``convergence``
    is the list of successive weighted-norm deltas, one per sweep.
    """

    ivp: ImpulsiveDelayIVP
    times: np.ndarray
    is_impulse_left: np.ndarray
    is_impulse_right: np.ndarray
    weighted_values: np.ndarray
    g_values: np.ndarray
    impulse_contributions: np.ndarray
    convergence: tuple[float, ...] = ()
    scheme: QuadratureScheme = QuadratureScheme.TRAPEZOID

    def __post_init__(self):
        for name in ("times", "weighted_values", "g_values",
                     "impulse_contributions"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        for name in ("is_impulse_left", "is_impulse_right"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=bool))

    @property
    def weighted_u(self) -> WeightedGridFunction:
        return WeightedGridFunction(self.times, self.weighted_values,
                                    self.ivp.rho, self.ivp.psi,
                                    allow_impulse_pairs=True)

    @property
    def impulses_before(self) -> np.ndarray:
        """Number of impulse terms active at each node (right limits count)."""
        return np.cumsum(self.is_impulse_right.astype(int))

    def left_slot_indices(self) -> np.ndarray:
        return np.flatnonzero(self.is_impulse_left)

    def weighted_jumps(self) -> np.ndarray:
        """Weighted right-minus-left jump at each impulse time."""
        left = self.left_slot_indices()
        return self.weighted_values[left + 1] - self.weighted_values[left]


def make_grid(ivp: ImpulsiveDelayIVP, spec: GridSpec | int):
    """Node times with impulse duplication, plus the slot masks."""
    if isinstance(spec, int):
        spec = GridSpec(spec)
    if spec.kind == "uniform-t":
        base = np.linspace(0.0, ivp.b, spec.n + 1)
    else:
        total = float(ivp.psi.eval_fn(ivp.b) - ivp.psi.eval_fn(0.0))
        targets = np.linspace(0.0, total, spec.n + 1)
        base = np.array([psi_inverse(ivp.psi, y) for y in targets])
        base[0], base[-1] = 0.0, ivp.b
    snap_tol = (ivp.b / spec.n) * 1e-8
    for t_k in ivp.impulse_times:
        i = int(np.argmin(np.abs(base - t_k)))
        if abs(base[i] - t_k) <= snap_tol and 0 < i < base.size - 1:
            base[i] = t_k
        elif t_k not in base:
            base = np.sort(np.append(base, t_k))
    times = []
    is_left = []
    is_right = []
    impulse_set = set(ivp.impulse_times)
    for t in base:
        if t in impulse_set:
            times.extend([t, t])
            is_left.extend([True, False])
            is_right.extend([False, True])
        else:
            times.append(t)
            is_left.append(False)
            is_right.append(False)
    return (np.asarray(times), np.asarray(is_left, dtype=bool),
            np.asarray(is_right, dtype=bool))


def _eval_broadcast(fn, arr: np.ndarray) -> np.ndarray:
    """Evaluate fn on arr, promoting constant results to full arrays."""
    out = np.asarray(fn(arr), dtype=float)
    if out.shape != arr.shape:
        out = np.broadcast_to(out, arr.shape).copy()
    return out


def _raw_from_weighted(w: np.ndarray, x: np.ndarray, rho: float) -> np.ndarray:
    """Unweight w -> u = w * x**(rho-1).

    At x = 0 with rho < 1 the raw value is the one-sided limit: 0 when
    the weighted value vanishes, else a signed infinity.  IEEE
    arithmetic then propagates the correct limit through right-hand
    sides whose state dependence is damped by the weighted factor.
    """
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    if rho == 1.0:
        return w.copy()
    out = np.empty_like(w)
    pos = x > 0.0
    out[pos] = w[pos] * x[pos] ** (rho - 1.0)
    at_zero = ~pos
    out[at_zero] = np.where(w[at_zero] == 0.0, 0.0,
                            np.copysign(np.inf, w[at_zero]))
    return out


def _interp_weighted(times: np.ndarray, weighted: np.ndarray,
                     q: np.ndarray) -> np.ndarray:
    """Linear-in-t interpolation of the weighted values at queries q.

    Exact node hits resolve to the first slot (the left limit) at
    duplicated impulse nodes, matching left-continuity of the solution.
    """
    q = np.asarray(q, dtype=float)
    idx = np.searchsorted(times, q, side="left")
    idx = np.minimum(idx, times.size - 1)
    exact = times[idx] == q
    lo = np.maximum(idx - 1, 0)
    t0 = times[lo]
    t1 = times[idx]
    span = np.where(t1 > t0, t1 - t0, 1.0)
    frac = np.where(t1 > t0, (q - t0) / span, 0.0)
    interp = weighted[lo] + frac * (weighted[idx] - weighted[lo])
    return np.where(exact, weighted[idx], interp)


def _delayed_values(ivp: ImpulsiveDelayIVP, times: np.ndarray,
                    weighted: np.ndarray, psi0: float) -> np.ndarray:
    """u(h(t)) at every node: history for h <= 0, else interpolation."""
    hv = _eval_broadcast(ivp.delay, times)
    ud = np.empty_like(hv)
    hist = hv <= 0.0
    if np.any(hist):
        ud[hist] = _eval_broadcast(ivp.history, hv[hist])
    future = ~hist
    if np.any(future):
        qs = hv[future]
        w_q = _interp_weighted(times, weighted, qs)
        x_q = np.asarray(ivp.psi.eval_fn(qs), dtype=float) - psi0
        ud[future] = w_q * x_q ** (ivp.rho - 1.0)
    return ud


def _implicit_profile(ivp: ImpulsiveDelayIVP, times: np.ndarray,
                      u: np.ndarray, ud: np.ndarray, tol: float,
                      max_iter: int) -> np.ndarray:
    """Vectorized fixed point for g = f(t, u, ud, g) at every node."""
    zeros = np.zeros_like(times)
    g = _eval_broadcast(lambda _: ivp.rhs(times, u, ud, zeros), times)
    delta = np.inf
    for _ in range(max_iter):
        g_next = _eval_broadcast(lambda _: ivp.rhs(times, u, ud, g), times)
        bad = ~np.isfinite(g_next)
        if np.any(bad):
            j = int(np.flatnonzero(bad)[0])
            raise ConvergenceError(
                f"implicit right-hand side is non-finite at node {j} "
                f"(t={times[j]:g}); if this is the t=0 node, the expression "
                f"does not admit the weighted-singularity limit convention")
        delta = float(np.max(np.abs(g_next - g)))
        g = g_next
        if delta <= tol:
            return g
    j = int(np.argmax(np.abs(g - _eval_broadcast(
        lambda _: ivp.rhs(times, u, ud, g), times))))
    raise ConvergenceError(
        f"implicit fixed point stalled (delta={delta:.3e} > tol={tol:g}) "
        f"at node {j} (t={times[j]:g})", residual=delta)


def apply_T(ivp: ImpulsiveDelayIVP, current: GridSolution,
            quad: ProductQuadrature | None = None,
            inner_tol: float = 1e-12, inner_max_iter: int = 200) -> GridSolution:
    """One application of the solution operator to a grid iterate.

    Resolves delayed values against the current iterate, solves the
    implicit relation at every node, evaluates the fractional integral
    of g, and recombines with the initial datum and accumulated impulse
    contributions, all in weighted form.
    """
    if quad is None:
        quad = ProductQuadrature(ivp.order.alpha, ivp.psi, current.times,
                                 current.scheme)
    psi0 = float(ivp.psi.eval_fn(0.0))
    x = quad.x
    rho = ivp.rho
    w_cur = current.weighted_values

    u_raw = _raw_from_weighted(w_cur, x, rho)
    ud = _delayed_values(ivp, current.times, w_cur, psi0)
    g = _implicit_profile(ivp, current.times, u_raw, ud,
                          inner_tol, inner_max_iter)
    integral = quad.profile(g)

    left_idx = current.left_slot_indices()
    jumps = np.array([ivp.impulse_maps[k](u_raw[j])
                      for k, j in enumerate(left_idx)], dtype=float)
    cum = np.concatenate(([0.0], np.cumsum(jumps)))
    contributions = cum[current.impulses_before]

    w_new = ((ivp.u0_weighted + contributions) / gamma(rho)
             + x ** (1.0 - rho) * integral)
    return replace(current, weighted_values=w_new, g_values=g,
                   impulse_contributions=contributions)


def picard_solve(ivp: ImpulsiveDelayIVP, grid: GridSpec | int,
                 tol: float = 1e-10, max_sweeps: int = 60,
                 scheme: QuadratureScheme | str = QuadratureScheme.TRAPEZOID,
                 lipschitz: LipschitzData | None = None,
                 inner_tol: float | None = None) -> GridSolution:
    """Iterate the solution operator to its fixed point.

    Starts from the weighted constant u0/gamma(rho) (the exact solution
    for a trivial right-hand side with no impulses) and sweeps until the
    weighted sup-norm delta drops to ``tol``.  When Lipschitz data is
    supplied and its contraction modulus is >= 1 the solve proceeds with
    a warning: the modulus is sufficient, not necessary.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    scheme = QuadratureScheme.parse(scheme)
    if lipschitz is not None:
        from .analysis import contraction_constant
        modulus = contraction_constant(ivp.order, ivp.psi, ivp.b, lipschitz.K,
                                       lipschitz.L_f, lipschitz.L_J)
        if modulus >= 1.0:
            warnings.warn(
                f"contraction modulus {modulus:.4f} >= 1: the fixed point is "
                "not certified to exist; iterating anyway", RuntimeWarning,
                stacklevel=2)
    times, is_left, is_right = make_grid(ivp, grid)
    quad = ProductQuadrature(ivp.order.alpha, ivp.psi, times, scheme)
    if inner_tol is None:
        inner_tol = min(1e-12, 0.01 * tol)

    w0 = np.full(times.shape, ivp.u0_weighted / gamma(ivp.rho))
    sol = GridSolution(ivp=ivp, times=times, is_impulse_left=is_left,
                       is_impulse_right=is_right, weighted_values=w0,
                       g_values=np.zeros_like(times),
                       impulse_contributions=np.zeros_like(times),
                       convergence=(), scheme=scheme)
    deltas: list[float] = []
    for _ in range(max_sweeps):
        nxt = apply_T(ivp, sol, quad=quad, inner_tol=inner_tol)
        delta = float(np.max(np.abs(nxt.weighted_values - sol.weighted_values)))
        deltas.append(delta)
        sol = replace(nxt, convergence=tuple(deltas))
        if delta <= tol:
            return sol
    raise ConvergenceError(
        f"Picard iteration did not reach tol={tol:g} within {max_sweeps} "
        f"sweeps (last delta {deltas[-1]:.3e})", residual=deltas[-1],
        history=deltas)


def solution_at(sol: GridSolution, t: float, side: str = "right") -> float:
    """Evaluate the solution at any time in [-r, b].

    Nonpositive times return the history.  Positive times interpolate
    the weighted values linearly and unweight; at an impulse node the
    ``side`` selects the right (default) or left limit.
    """
    ivp = sol.ivp
    if side not in ("left", "right"):
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")
    if not -ivp.delay_bound <= t <= ivp.b:
        raise DomainError(
            f"t={t} outside the solution domain [{-ivp.delay_bound}, {ivp.b}]")
    if t <= 0.0:
        return float(ivp.history(t))
    hits = np.flatnonzero(sol.times == t)
    if hits.size:
        j = int(hits[0] if side == "left" else hits[-1])
        w = sol.weighted_values[j]
    else:
        w = float(_interp_weighted(sol.times, sol.weighted_values,
                                   np.array([t]))[0])
    x = float(ivp.psi.eval_fn(t) - ivp.psi.eval_fn(0.0))
    return float(w * x ** (ivp.rho - 1.0))


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def export_solution(sol: GridSolution, target) -> None:
    """Write the solution as tab-delimited text.

    Columns: t, weighted_u, u, g, is_impulse_left, is_impulse_right.
    The raw-u cell is blank at t=0 when rho < 1 (the raw solution is
    singular there).  17 significant digits; byte-deterministic.
    """
    if hasattr(target, "write"):
        _write_solution(sol, target)
    else:
        with open(target, "w", encoding="utf-8", newline="\n") as fh:
            _write_solution(sol, fh)


def _write_solution(sol: GridSolution, fh: IO[str]) -> None:
    ivp = sol.ivp
    rho = ivp.rho
    psi0 = float(ivp.psi.eval_fn(0.0))
    fh.write("\t".join(EXPORT_COLUMNS) + "\n")
    for j, t in enumerate(sol.times):
        x = float(ivp.psi.eval_fn(t)) - psi0
        if x == 0.0 and rho < 1.0:
            u_cell = ""
        else:
            u_cell = _fmt(sol.weighted_values[j] * x ** (rho - 1.0))
        row = (_fmt(t), _fmt(sol.weighted_values[j]), u_cell,
               _fmt(sol.g_values[j]),
               str(int(sol.is_impulse_left[j])),
               str(int(sol.is_impulse_right[j])))
        fh.write("\t".join(row) + "\n")


def load_solution(path) -> dict[str, np.ndarray]:
    """Read a solution export back into column arrays (blank u -> nan)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != EXPORT_COLUMNS:
            raise DomainError(f"unexpected solution header {header!r}")
        rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
    cols = {name: [] for name in EXPORT_COLUMNS}
    for row in rows:
        if len(row) != len(EXPORT_COLUMNS):
            raise DomainError(f"malformed solution row {row!r}")
        for name, cell in zip(EXPORT_COLUMNS, row):
            cols[name].append(math.nan if cell == "" else float(cell))
    return {name: np.asarray(vals) for name, vals in cols.items()}
