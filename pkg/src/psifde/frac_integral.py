"""Product integration for the psi-fractional integral.

Evaluates ``I^{alpha;psi} g(t) = (1/gamma(alpha)) * integral_0^t
psi'(s) (psi(t)-psi(s))**(alpha-1) g(s) ds`` for grid-sampled ``g``.
In the transformed variable ``x = psi(s) - psi(0)`` the operator becomes
a convolution against the pure power kernel ``(X - x)**(alpha-1)``, and
each panel's moment integrals have closed forms, so the endpoint
singularity is treated exactly:

* product-rectangle: g is piecewise constant (left sample) in x,
* product-trapezoid: g is piecewise linear in x.

Rectangle is exact for constant g, trapezoid for g linear in x.
Grids may contain a time twice in a row (the left/right slots of an
impulse node); zero-width panels contribute nothing.
"""

from __future__ import annotations

from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .psi_core import PsiSpec
from .special_functions import gamma

__all__ = [
    "QuadratureScheme",
    "ProductQuadrature",
    "frac_integral_at",
    "frac_integral_profile",
]


class QuadratureScheme(Enum):
    RECTANGLE = "rectangle"
    TRAPEZOID = "trapezoid"

    @classmethod
    def parse(cls, name) -> "QuadratureScheme":
        if isinstance(name, cls):
            return name
        aliases = {"rect": cls.RECTANGLE, "rectangle": cls.RECTANGLE,
                   "trap": cls.TRAPEZOID, "trapezoid": cls.TRAPEZOID}
        try:
            return aliases[str(name).lower()]
        except KeyError:
            raise DomainError(f"unknown quadrature scheme {name!r}; "
                              f"expected one of {sorted(aliases)}") from None


def _pow_diff(a: np.ndarray, c: np.ndarray, p: float) -> np.ndarray:
    """a**p - c**p for 0 <= c <= a, stable when a - c << a."""
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    out = np.empty_like(a)
    interior = c > 0.0
    # c = 0: plain power, no cancellation
    out[~interior] = a[~interior] ** p
    ai = a[interior]
    ci = c[interior]
    out[interior] = -(ai ** p) * np.expm1(p * np.log1p(-(ai - ci) / ai))
    return out


class ProductQuadrature:
    """Precomputed product-integration weights for one grid.

    Row j of ``weights`` maps samples g[0..j] to I^{alpha;psi} g at node
    j (already normalized by 1/gamma(alpha)).  Building the matrix costs
    O(n^2); applying it is a triangular matvec, so the matrix is meant
    to be built once per grid and reused across solver sweeps.
    """

    def __init__(self, alpha: float, psi: PsiSpec, grid: Sequence[float],
                 scheme: QuadratureScheme = QuadratureScheme.TRAPEZOID):
        if not 0.0 < alpha < 1.0:
            raise DomainError(f"product quadrature needs 0 < alpha < 1, got {alpha}")
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or grid.size < 1:
            raise DomainError("grid must be a non-empty 1-d array")
        if grid[0] != 0.0:
            raise DomainError("grid must start at t=0")
        if np.any(np.diff(grid) < 0):
            raise DomainError("grid must be non-decreasing")
        if grid[-1] > psi.b:
            raise DomainError(f"grid exceeds the psi domain end {psi.b}")
        self.alpha = float(alpha)
        self.psi = psi
        self.scheme = QuadratureScheme.parse(scheme)
        self.grid = grid
        x = np.asarray(psi.eval_fn(grid), dtype=float) - float(psi.eval_fn(0.0))
        if np.any(np.diff(x) < 0):
            raise DomainError("psi must be non-decreasing on the grid")
        self.x = x
        self.weights = self._build_weights()

    def _build_weights(self) -> np.ndarray:
        alpha = self.alpha
        x = self.x
        n = x.size
        dx = np.diff(x)
        live = dx > 0.0
        inv_gamma = 1.0 / gamma(alpha)
        w = np.zeros((n, n))
        for j in range(1, n):
            a = x[j] - x[:j]
            c = x[j] - x[1:j + 1]
            lv = live[:j]
            if not np.any(lv):
                continue
            m0 = np.zeros(j)
            m0[lv] = _pow_diff(a[lv], c[lv], alpha) / alpha
            if self.scheme is QuadratureScheme.RECTANGLE:
                w[j, :j] += inv_gamma * m0
            else:
                m1 = np.zeros(j)
                d1 = _pow_diff(a[lv], c[lv], alpha + 1.0)
                m1[lv] = a[lv] * m0[lv] - d1 / (alpha + 1.0)
                right = np.zeros(j)
                right[lv] = m1[lv] / dx[:j][lv]
                w[j, :j] += inv_gamma * (m0 - right)
                w[j, 1:j + 1] += inv_gamma * right
        return w

    def _first_live_panel(self) -> int:
        dx = np.diff(self.x)
        idx = np.flatnonzero(dx > 0.0)
        if idx.size == 0:
            raise DomainError("grid has no panel of positive width")
        return int(idx[0])

    def integral_at(self, g: Sequence[float], j: int,
                    first_panel_moment: Callable[[float], float] | None = None
                    ) -> float:
        """I^{alpha;psi} g at node j.

        ``first_panel_moment(X)``, when given, must return the exact
        unnormalized moment ``integral_{x0}^{x1} (X - x)**(alpha-1) g(x) dx``
        over the first panel; it replaces that panel's product rule so
        integrands singular at the left endpoint can be tested.  The
        g-sample at the left endpoint is then ignored.
        """
        g = np.asarray(g, dtype=float)
        if g.shape != self.x.shape:
            raise DomainError("g must be sampled on the full grid")
        if not 0 <= j < self.x.size:
            raise DomainError(f"node index {j} out of range")
        if j == 0:
            return 0.0
        if first_panel_moment is None:
            if not np.all(np.isfinite(g[:j + 1])):
                raise DomainError("non-finite integrand sample on [0, t_j]")
            return float(self.weights[j, :j + 1] @ g[:j + 1])
        return self._integral_with_moment(g, j, first_panel_moment)

    def _integral_with_moment(self, g: np.ndarray, j: int,
                              moment: Callable[[float], float]) -> float:
        i0 = self._first_live_panel()
        if j <= i0:
            return 0.0
        if not np.all(np.isfinite(g[i0 + 1:j + 1])):
            raise DomainError("non-finite integrand sample beyond the first panel")
        g_eff = g[:j + 1].copy()
        g_eff[:i0 + 1] = 0.0
        total = float(self.weights[j, :j + 1] @ g_eff)
        if self.scheme is QuadratureScheme.TRAPEZOID:
            # remove the first panel's contribution to the right sample
            alpha = self.alpha
            a = self.x[j] - self.x[i0]
            c = self.x[j] - self.x[i0 + 1]
            dx = self.x[i0 + 1] - self.x[i0]
            m0 = float(_pow_diff(np.array([a]), np.array([c]), alpha)[0]) / alpha
            d1 = float(_pow_diff(np.array([a]), np.array([c]), alpha + 1.0)[0])
            m1 = a * m0 - d1 / (alpha + 1.0)
            total -= (m1 / dx) * g[i0 + 1] / gamma(alpha)
        return total + float(moment(float(self.x[j]))) / gamma(self.alpha)

    def profile(self, g: Sequence[float],
                first_panel_moment: Callable[[float], float] | None = None
                ) -> np.ndarray:
        """I^{alpha;psi} g at every grid node."""
        g = np.asarray(g, dtype=float)
        if g.shape != self.x.shape:
            raise DomainError("g must be sampled on the full grid")
        if first_panel_moment is None:
            if not np.all(np.isfinite(g)):
                raise DomainError("non-finite integrand sample")
            out = self.weights @ g
            out[0] = 0.0
            return out
        return np.array([self.integral_at(g, j, first_panel_moment)
                         for j in range(self.x.size)])


def frac_integral_at(alpha: float, psi: PsiSpec, grid: Sequence[float],
                     g: Sequence[float], j: int,
                     scheme: QuadratureScheme = QuadratureScheme.TRAPEZOID,
                     first_panel_moment: Callable[[float], float] | None = None
                     ) -> float:
    """I^{alpha;psi} g at grid node j (one-shot convenience form)."""
    quad = ProductQuadrature(alpha, psi, grid, scheme)
    return quad.integral_at(g, j, first_panel_moment)


def frac_integral_profile(alpha: float, psi: PsiSpec, grid: Sequence[float],
                          g: Sequence[float],
                          scheme: QuadratureScheme = QuadratureScheme.TRAPEZOID,
                          first_panel_moment: Callable[[float], float] | None = None
                          ) -> np.ndarray:
    """I^{alpha;psi} g at every grid node (one-shot convenience form)."""
    quad = ProductQuadrature(alpha, psi, grid, scheme)
    return quad.profile(g, first_panel_moment)
