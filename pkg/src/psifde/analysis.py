"""Contraction modulus, Gronwall bounds and stability certification.

Under the Lipschitz structure asserted in ``LipschitzData`` the solution
operator is a contraction on the weighted space whenever

    L = sum_k L_J[k] / gamma(rho)
        + 2 K (psi(b)-psi(0))**(alpha - rho + 1) / ((1 - L_f) gamma(alpha+1))

is below one.  L < 1 certifies existence, uniqueness, and a
Mittag-Leffler-shaped stability envelope: every eps-approximate solution
stays within

    eps * C_{p,E_alpha} * E_alpha(zeta * (psi(t)-psi(0))**alpha)

of the true solution in the weighted metric.  Two variants of zeta are
computed.  The derivation supports zeta = 2K(psi(b)-psi(0))**(1-rho) /
(1-L_f) ("derived", including the Lipschitz scale K); a commonly printed
form omits K ("as-stated").  For K < 1 the as-stated envelope is looser
but still valid; only the derived variant is supported by the
contraction argument when K > 1, so it is the default everywhere.

``uhml_verify`` makes the envelope empirical: it perturbs the right-hand
side by a bounded forcing eps * eta(t) * E_alpha((psi(t)-psi(0))**alpha)
and the impulse maps by eps * xi_k, solves the exact and perturbed
problems with identical initial data and history, and checks the
pointwise weighted deviation against the envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DomainError
from .frac_integral import ProductQuadrature, QuadratureScheme
from .picard_solver import GridSpec, make_grid, picard_solve
from .problem import ImpulsiveDelayIVP, LipschitzData
from .psi_core import FractionalOrder, PsiSpec, psi_increment
from .special_functions import DEFAULT_ML_CONFIG, MLEvalConfig, gamma, mittag_leffler

__all__ = [
    "StabilityCertificate",
    "PerturbationSpec",
    "UhmlEnvelopeCheck",
    "UhmlReport",
    "contraction_constant",
    "stability_constants",
    "gronwall_bound",
    "gronwall_worst_case",
    "uhml_verify",
]

ZETA_VARIANTS = ("derived", "as-stated")


def _check_lipschitz_numbers(K: float, L_f: float, L_J: Sequence[float]) -> None:
    if not K > 0:
        raise DomainError(f"K must be positive, got {K}")
    if not 0.0 < L_f < 1.0:
        raise DomainError(
            f"L_f must lie in (0,1) for the implicit slot to contract, got {L_f}")
    if any(v <= 0 for v in L_J):
        raise DomainError(f"every impulse Lipschitz constant must be positive: {L_J}")


def contraction_constant(order: FractionalOrder, psi: PsiSpec, b: float,
                         K: float, L_f: float,
                         L_J: Sequence[float]) -> float:
    """The contraction modulus L of the solution operator."""
    _check_lipschitz_numbers(K, L_f, L_J)
    rho = order.rho
    X = psi_increment(psi, b, 0.0)
    impulse_part = sum(L_J) / gamma(rho)
    forcing_part = (2.0 * K * X ** (order.alpha - rho + 1.0)
                    / ((1.0 - L_f) * gamma(order.alpha + 1.0)))
    return impulse_part + forcing_part


@dataclass(frozen=True)
class StabilityCertificate:
    """Stability constants plus the hypothesis verdicts.

    ``h1_K``, ``h1_L_f`` and ``h2_L_J`` echo the user-asserted Lipschitz
    data; ``h3_contractive`` is computed.  ``zeta_derived`` equals
    ``h1_K * zeta_as_stated`` by construction.  ``C_f`` is the flat
    deviation bound ``max weighted deviation <= eps * C_f`` and is
    evaluated with the recorded ``zeta_variant``.
    """

    L_contraction: float
    zeta_derived: float
    zeta_as_stated: float
    C_p_E_alpha: float
    C_f: float
    h1_K: float
    h1_L_f: float
    h2_L_J: tuple[float, ...]
    h3_contractive: bool
    m_convention: int
    zeta_variant: str

    def __post_init__(self):
        object.__setattr__(self, "h2_L_J", tuple(float(v) for v in self.h2_L_J))
        if self.L_contraction < 0:
            raise DomainError("contraction modulus cannot be negative")
        if self.zeta_variant not in ZETA_VARIANTS:
            raise DomainError(f"zeta_variant must be one of {ZETA_VARIANTS}")

    @property
    def contractive(self) -> bool:
        return self.L_contraction < 1.0

    def zeta(self, variant: str | None = None) -> float:
        variant = variant or self.zeta_variant
        if variant == "derived":
            return self.zeta_derived
        if variant == "as-stated":
            return self.zeta_as_stated
        raise DomainError(f"unknown zeta variant {variant!r}")

    def render(self) -> str:
        lines = [
            f"L_contraction={self.L_contraction:.17g}",
            f"L_contraction_4dp={self.L_contraction:.4f}",
            f"contractive={str(self.contractive).lower()}",
            f"zeta_as_stated={self.zeta_as_stated:.17g}",
            f"zeta_derived={self.zeta_derived:.17g}",
            f"zeta_variant={self.zeta_variant}",
            f"C_p_E_alpha={self.C_p_E_alpha:.17g}",
            f"C_f={self.C_f:.17g}",
            f"m_convention={self.m_convention}",
            f"H1_K={self.h1_K:.17g}",
            f"H1_L_f={self.h1_L_f:.17g}",
            "H2_L_J=" + ",".join(f"{v:.17g}" for v in self.h2_L_J),
        ]
        return "\n".join(lines) + "\n"


def stability_constants(order: FractionalOrder, psi: PsiSpec, b: float,
                        K: float, L_f: float, L_J: Sequence[float],
                        p: int | None = None, zeta_variant: str = "derived",
                        ml_cfg: MLEvalConfig = DEFAULT_ML_CONFIG
                        ) -> StabilityCertificate:
    """Assemble the stability certificate.

    With m = p (the number of impulses) and X = psi(b) - psi(0):

        zeta_as_stated = 2 X**(1-rho) / (1 - L_f)
        zeta_derived   = K * zeta_as_stated
        C_{p,E_alpha}  = (m/gamma(rho) + X**(1-rho) E_alpha(X**alpha))
                         * (1 + (max L_J / gamma(rho))
                              * E_alpha(2K X**(1-rho+alpha)/(1-L_f)))**p
        C_f            = C_{p,E_alpha} * E_alpha(zeta * X**alpha)
    """
    _check_lipschitz_numbers(K, L_f, L_J)
    if zeta_variant not in ZETA_VARIANTS:
        raise DomainError(f"zeta_variant must be one of {ZETA_VARIANTS}")
    L_J = tuple(float(v) for v in L_J)
    if p is None:
        p = len(L_J)
    if p != len(L_J):
        raise DomainError(f"p={p} does not match len(L_J)={len(L_J)}")
    alpha = order.alpha
    rho = order.rho
    X = psi_increment(psi, b, 0.0)

    zeta_as = 2.0 * X ** (1.0 - rho) / (1.0 - L_f)
    zeta_der = K * zeta_as
    base = (p / gamma(rho)
            + X ** (1.0 - rho) * mittag_leffler(alpha, X ** alpha, ml_cfg))
    if p > 0:
        inner = mittag_leffler(alpha, 2.0 * K * X ** (1.0 - rho + alpha)
                               / (1.0 - L_f), ml_cfg)
        impulse_factor = (1.0 + (max(L_J) / gamma(rho)) * inner) ** p
    else:
        impulse_factor = 1.0
    C_p = base * impulse_factor
    zeta_sel = zeta_der if zeta_variant == "derived" else zeta_as
    C_f = C_p * mittag_leffler(alpha, zeta_sel * X ** alpha, ml_cfg)

    return StabilityCertificate(
        L_contraction=contraction_constant(order, psi, b, K, L_f, L_J),
        zeta_derived=zeta_der, zeta_as_stated=zeta_as,
        C_p_E_alpha=C_p, C_f=C_f, h1_K=K, h1_L_f=L_f, h2_L_J=L_J,
        h3_contractive=contraction_constant(order, psi, b, K, L_f, L_J) < 1.0,
        m_convention=p, zeta_variant=zeta_variant)


def gronwall_bound(grid: Sequence[float], V: Sequence[float],
                   g_coeff: Sequence[float], beta_k: Sequence[float],
                   impulse_times: Sequence[float], alpha: float,
                   psi: PsiSpec, t: float,
                   ml_cfg: MLEvalConfig = DEFAULT_ML_CONFIG) -> float:
    """The impulsive Gronwall majorant at time t.

    For grid-sampled nonnegative V and coefficient g, returns

        V(t) * prod_{t_i < t} (1 + beta_i E_alpha(g(t) gamma(alpha) x_i**alpha))
             * E_alpha(g(t) gamma(alpha) x(t)**alpha)

    with x(s) = psi(s) - psi(0).  This dominates any function satisfying
    the corresponding integral inequality with impulse terms (for
    nondecreasing data, the regime the inequality is stated for).
    """
    grid = np.asarray(grid, dtype=float)
    V = np.asarray(V, dtype=float)
    g_coeff = np.asarray(g_coeff, dtype=float)
    if V.shape != grid.shape or g_coeff.shape != grid.shape:
        raise DomainError("V and g_coeff must be sampled on the grid")
    if np.any(V < 0):
        raise DomainError("V must be nonnegative")
    if any(b_ <= 0 for b_ in beta_k):
        raise DomainError("every beta_k must be positive")
    if len(beta_k) != len(impulse_times):
        raise DomainError("beta_k and impulse_times must have equal length")
    if not grid[0] <= t <= grid[-1]:
        raise DomainError(f"t={t} outside the sampled range")

    v_t = float(np.interp(t, grid, V))
    g_t = float(np.interp(t, grid, g_coeff))
    psi0 = float(psi.eval_fn(0.0))
    x_t = float(psi.eval_fn(t)) - psi0
    out = v_t * mittag_leffler(alpha, g_t * gamma(alpha) * x_t ** alpha, ml_cfg)
    for beta, t_i in zip(beta_k, impulse_times):
        if t_i < t:
            x_i = float(psi.eval_fn(t_i)) - psi0
            out *= 1.0 + beta * mittag_leffler(
                alpha, g_t * gamma(alpha) * x_i ** alpha, ml_cfg)
    return out


def gronwall_worst_case(grid: Sequence[float], V: Sequence[float],
                        g_coeff: Sequence[float], beta_k: Sequence[float],
                        impulse_times: Sequence[float], alpha: float,
                        psi: PsiSpec) -> np.ndarray:
    """Forward-substituted equality solution of the Gronwall inequality.

    Builds U on the grid by U(t_j) = V(t_j) + g(t_j) * integral + jumps
    with equality, discretizing the integral by the product-rectangle
    rule (which uses only earlier nodes, so the recursion is explicit
    and the quadrature under-resolves the true integral for
    nondecreasing U).  This is the worst case the closed-form bound must
    dominate.  Impulse times must be grid nodes.
    """
    grid = np.asarray(grid, dtype=float)
    V = np.asarray(V, dtype=float)
    g_coeff = np.asarray(g_coeff, dtype=float)
    if np.any(V < 0):
        raise DomainError("V must be nonnegative")
    quad = ProductQuadrature(alpha, psi, grid, QuadratureScheme.RECTANGLE)
    # the inequality carries the raw kernel, without the 1/gamma(alpha)
    kernel_weights = quad.weights * gamma(alpha)
    k_index = []
    for t_k in impulse_times:
        hits = np.flatnonzero(grid == t_k)
        if hits.size == 0:
            raise DomainError(f"impulse time {t_k} is not a grid node")
        k_index.append(int(hits[0]))
    U = np.zeros_like(V)
    for j in range(grid.size):
        jump = sum(b_ * U[idx] for b_, t_k, idx
                   in zip(beta_k, impulse_times, k_index) if t_k < grid[j])
        U[j] = V[j] + g_coeff[j] * float(kernel_weights[j, :j] @ U[:j]) + jump
    return U


@dataclass(frozen=True)
class PerturbationSpec:
    """A bounded perturbation of the right-hand side and impulse maps.

    The forcing added to f is eps * eta(t) * E_alpha((psi(t)-psi(0))**alpha)
    with |eta| <= 1; each impulse map gains the constant eps * xi_k with
    |xi_k| <= 1.  eps = 0 is allowed and must reproduce the unperturbed
    solution exactly.
    """

    epsilon: float
    shape: str = "constant-one"
    frequency: float = 1.0
    impulse_signs: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "impulse_signs",
                           tuple(float(v) for v in self.impulse_signs))
        if self.epsilon < 0:
            raise ConfigurationError(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.shape not in ("constant-one", "sinusoidal"):
            raise ConfigurationError(
                f"unknown perturbation shape {self.shape!r}; "
                "expected 'constant-one' or 'sinusoidal'")
        if any(abs(x) > 1.0 for x in self.impulse_signs):
            raise ConfigurationError(
                f"impulse signs must satisfy |xi_k| <= 1, got {self.impulse_signs}")

    def eta(self, t):
        if self.shape == "constant-one":
            return np.ones_like(np.asarray(t, dtype=float))
        return np.sin(2.0 * np.pi * self.frequency * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class UhmlEnvelopeCheck:
    zeta_variant: str
    zeta: float
    C_p_E_alpha: float
    C_f: float
    max_ratio: float
    argmax_time: float
    envelope_pass: bool
    uh_deviation_bound: float
    uh_pass: bool


@dataclass(frozen=True)
class UhmlReport:
    """Outcome of one empirical stability-envelope verification."""

    epsilon: float
    grid_n: int
    max_weighted_deviation: float
    argmax_deviation_time: float
    checks: tuple[UhmlEnvelopeCheck, ...]

    def check(self, variant: str) -> UhmlEnvelopeCheck:
        for c in self.checks:
            if c.zeta_variant == variant:
                return c
        raise DomainError(f"no check for zeta variant {variant!r}")

    def passed(self, variant: str = "derived") -> bool:
        c = self.check(variant)
        return c.envelope_pass and c.uh_pass

    def render(self) -> str:
        lines = [
            f"epsilon={self.epsilon:.17g}",
            f"grid_n={self.grid_n}",
            f"max_weighted_deviation={self.max_weighted_deviation:.17g}",
            f"argmax_deviation_time={self.argmax_deviation_time:.17g}",
        ]
        for c in self.checks:
            lines += [
                f"zeta_variant={c.zeta_variant}",
                f"zeta={c.zeta:.17g}",
                f"C_p_E_alpha={c.C_p_E_alpha:.17g}",
                f"C_f={c.C_f:.17g}",
                f"max_ratio={c.max_ratio:.17g}",
                f"argmax_time={c.argmax_time:.17g}",
                f"pass={str(c.envelope_pass).lower()}",
                f"uh_bound={c.uh_deviation_bound:.17g}",
                f"uh_pass={str(c.uh_pass).lower()}",
            ]
        return "\n".join(lines) + "\n"


def _perturbed_problem(ivp: ImpulsiveDelayIVP, pert: PerturbationSpec,
                       node_times: np.ndarray,
                       ml_cfg: MLEvalConfig) -> ImpulsiveDelayIVP:
    psi0 = float(ivp.psi.eval_fn(0.0))
    t_dedup = np.unique(node_times)
    x_dedup = np.asarray(ivp.psi.eval_fn(t_dedup), dtype=float) - psi0
    ml_dedup = np.array([mittag_leffler(ivp.order.alpha, xv ** ivp.order.alpha,
                                        ml_cfg) for xv in x_dedup])
    eps = pert.epsilon
    base = ivp.rhs
    eta = pert.eta

    # linear interpolation of the envelope profile: exact at grid nodes,
    # which is everywhere the solver samples the right-hand side
    def rhs(t, u, ud, w):
        return base(t, u, ud, w) + eps * eta(t) * np.interp(t, t_dedup, ml_dedup)

    maps = tuple(
        (lambda u, m=m, s=s: m(u) + eps * s)
        for m, s in zip(ivp.impulse_maps, pert.impulse_signs))
    label = (ivp.label + "+perturbed") if ivp.label else "perturbed"
    return dc_replace(ivp, rhs=rhs, impulse_maps=maps, label=label)


def uhml_verify(ivp: ImpulsiveDelayIVP, lipschitz: LipschitzData,
                pert: PerturbationSpec, grid: GridSpec | int,
                tol: float = 1e-10,
                scheme: QuadratureScheme | str = QuadratureScheme.TRAPEZOID,
                ml_cfg: MLEvalConfig = DEFAULT_ML_CONFIG) -> UhmlReport:
    """Empirically verify the stability envelope on one problem.

    Solves the exact and perturbed problems with matching initial data
    and history on the same grid, and checks the nodewise weighted
    deviation against eps * C_{p,E_alpha} * E_alpha(zeta * x**alpha) for
    both zeta variants, plus the flat deviation bound eps * C_f.
    Refuses when the contraction modulus is not below one, since the
    envelope is only guaranteed in that regime.
    """
    p = len(ivp.impulse_times)
    if len(pert.impulse_signs) != p:
        raise ConfigurationError(
            f"perturbation carries {len(pert.impulse_signs)} impulse signs "
            f"but the problem has {p} impulses")
    if len(lipschitz.L_J) != p:
        raise ConfigurationError(
            f"Lipschitz data carries {len(lipschitz.L_J)} impulse constants "
            f"but the problem has {p} impulses")

    certs = {variant: stability_constants(
        ivp.order, ivp.psi, ivp.b, lipschitz.K, lipschitz.L_f,
        lipschitz.L_J, p=p, zeta_variant=variant, ml_cfg=ml_cfg)
        for variant in ZETA_VARIANTS}
    modulus = certs["derived"].L_contraction
    if modulus >= 1.0:
        raise DomainError(
            f"contraction modulus {modulus:.4f} >= 1: the stability theorem "
            "does not apply, refusing to verify an unsupported envelope")

    probes = np.linspace(0.0, ivp.b, 256)
    if np.any(np.abs(pert.eta(probes)) > 1.0 + 1e-12):
        raise ConfigurationError("perturbation shape violates |eta| <= 1")

    if isinstance(grid, int):
        grid = GridSpec(grid)
    node_times, _, _ = make_grid(ivp, grid)
    perturbed = _perturbed_problem(ivp, pert, node_times, ml_cfg)

    sol_u = picard_solve(ivp, grid, tol=tol, scheme=scheme, lipschitz=lipschitz)
    sol_v = picard_solve(perturbed, grid, tol=tol, scheme=scheme,
                         lipschitz=lipschitz)
    if not np.array_equal(sol_u.times, sol_v.times):
        raise DomainError("exact and perturbed solves produced different grids")

    dev = np.abs(sol_v.weighted_values - sol_u.weighted_values)
    j_dev = int(np.argmax(dev))
    psi0 = float(ivp.psi.eval_fn(0.0))
    x = np.asarray(ivp.psi.eval_fn(sol_u.times), dtype=float) - psi0

    checks = []
    for variant in ZETA_VARIANTS:
        cert = certs[variant]
        zeta = cert.zeta(variant)
        envelope = pert.epsilon * cert.C_p_E_alpha * np.array(
            [mittag_leffler(ivp.order.alpha, zeta * xv ** ivp.order.alpha, ml_cfg)
             for xv in x])
        safe_env = np.where(envelope > 0.0, envelope, 1.0)
        ratios = np.where(envelope > 0.0, dev / safe_env, 0.0)
        j = int(np.argmax(ratios))
        uh_bound = pert.epsilon * cert.C_f
        max_dev = float(dev[j_dev])
        checks.append(UhmlEnvelopeCheck(
            zeta_variant=variant, zeta=zeta, C_p_E_alpha=cert.C_p_E_alpha,
            C_f=cert.C_f, max_ratio=float(ratios[j]),
            argmax_time=float(sol_u.times[j]),
            envelope_pass=bool(ratios[j] <= 1.0),
            uh_deviation_bound=uh_bound,
            uh_pass=bool(max_dev <= uh_bound)))

    return UhmlReport(
        epsilon=pert.epsilon, grid_n=grid.n,
        max_weighted_deviation=float(dev[j_dev]),
        argmax_deviation_time=float(sol_u.times[j_dev]),
        checks=tuple(checks))
