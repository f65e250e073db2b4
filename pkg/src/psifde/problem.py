"""The impulsive implicit delay initial-value problem and its ingestion.

A problem consists of

* a fractional order (alpha, beta) and weight function psi on [0, b],
* an implicit right-hand side f(t, u, u(h(t)), w), where the implicit
  slot w stands for the fractional derivative itself,
* a continuous delay h with h(t) <= t and a history phi on [-r, 0],
* the initial value of the (1-rho)-order fractional integral at 0+
  (``u0_weighted`` -- this is *not* u(0)),
* impulse times 0 < t_1 < ... < t_p < b with jump maps J_k applied to
  the same fractional integral.

Problems are built from TOML configuration files (see
``docs in the README``) or from the built-in catalog.  Config sections:
[order] alpha, beta; [psi] kind (identity | log-shifted | power |
tabulated) and parameters; [domain] b, r; [history] expr; [rhs] expr;
[delay] expr; [[impulses]] time, map; [initial] u0_weighted;
[lipschitz] K, L_f, L_J (optional).  Unknown keys are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigurationError, ConvergenceError, DomainError
from .expressions import Expression, parse_expression
from .psi_core import (FractionalOrder, PsiSpec, identity_psi, log_shifted_psi,
                       power_psi, tabulated_psi, validate_psi)

__all__ = [
    "ImpulsiveDelayIVP",
    "LipschitzData",
    "CATALOG_NAMES",
    "catalog_config",
    "build_problem",
    "lipschitz_from_config",
    "load_config",
    "history_eval",
    "solve_implicit_g",
]

_PROBE_COUNT = 256


@dataclass(frozen=True)
class LipschitzData:
    """User-asserted Lipschitz structure of f and the impulse maps.

    K and L_f bound f through
    ``|f(t,u1,u2,u3) - f(t,v1,v2,v3)| <= K * (psi(t)-psi(0))**(1-rho) *
    (|u1-v1| + |u2-v2|) + L_f * |u3-v3|``; L_J[k] bounds the k-th
    impulse map in the same weighted sense.  L_f < 1 is what makes the
    implicit slot solvable by fixed-point iteration.
    """

    K: float
    L_f: float
    L_J: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "L_J", tuple(float(v) for v in self.L_J))
        if not self.K > 0:
            raise ConfigurationError(f"K must be positive, got {self.K}")
        if not 0.0 < self.L_f < 1.0:
            raise ConfigurationError(f"L_f must lie in (0,1), got {self.L_f}")
        if any(v <= 0 for v in self.L_J):
            raise ConfigurationError(f"every L_J entry must be positive, got {self.L_J}")


@dataclass(frozen=True)
class ImpulsiveDelayIVP:
    """A validated impulsive implicit delay problem.

    ``rhs``, ``delay`` and ``history`` must accept numpy arrays.
    Instances are immutable; all solver state lives elsewhere.
    """

    order: FractionalOrder
    psi: PsiSpec
    b: float
    delay_bound: float
    rhs: Callable
    delay: Callable
    history: Callable
    u0_weighted: float
    impulse_times: tuple[float, ...] = ()
    impulse_maps: tuple[Callable, ...] = ()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "impulse_times",
                           tuple(float(t) for t in self.impulse_times))
        object.__setattr__(self, "impulse_maps", tuple(self.impulse_maps))
        if not self.b > 0:
            raise ConfigurationError(f"horizon b must be positive, got {self.b}")
        if self.b != self.psi.b:
            raise ConfigurationError(
                f"horizon b={self.b} must match the psi domain end {self.psi.b}")
        if self.delay_bound < 0:
            raise ConfigurationError(
                f"delay bound r must be nonnegative, got {self.delay_bound}")
        if not math.isfinite(self.u0_weighted):
            raise ConfigurationError("u0_weighted must be finite")
        times = self.impulse_times
        if len(times) != len(self.impulse_maps):
            raise ConfigurationError(
                f"{len(times)} impulse times but {len(self.impulse_maps)} maps")
        for k, tk in enumerate(times):
            if not 0.0 < tk < self.b:
                raise ConfigurationError(
                    f"impulses[{k}].time={tk} must lie strictly inside (0, {self.b})")
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ConfigurationError(
                f"impulse times must be strictly increasing, got {times}")

    @property
    def rho(self) -> float:
        return self.order.rho


def _caputo_rl_example(alpha: float, beta: float, label: str) -> dict:
    return {
        "order": {"alpha": alpha, "beta": beta},
        "psi": {"kind": "identity"},
        "domain": {"b": 1.0, "r": 1.0},
        "history": {"expr": "0"},
        "rhs": {"expr": "psi_w * exp_npsi / (50 * (1 + abs(u) + abs(ud)))"
                        " + sat(abs(w), 15)"},
        "delay": {"expr": "t - 0.5"},
        "impulses": [{"time": 1.0 / 3.0, "map": "psi_w * sat(abs(u), 7)"}],
        "initial": {"u0_weighted": 0.0},
        "lipschitz": {"K": 1.0 / 50.0, "L_f": 1.0 / 15.0, "L_J": [1.0 / 7.0]},
        "label": label,
    }


def _linear_caputo() -> dict:
    # pure linear test problem: the fractional derivative equals u itself
    return {
        "order": {"alpha": 0.5, "beta": 1.0},
        "psi": {"kind": "identity"},
        "domain": {"b": 1.0, "r": 0.0},
        "history": {"expr": "1"},
        "rhs": {"expr": "u"},
        "delay": {"expr": "t"},
        "impulses": [],
        "initial": {"u0_weighted": 1.0},
        "lipschitz": {"K": 1.0, "L_f": 1e-6, "L_J": []},
        "label": "linear-caputo",
    }


_CATALOG: dict[str, Callable[[], dict]] = {
    # nonlinear saturating example with one impulse at t=1/3 and delay 1/2
    "paper-ex-caputo": lambda: _caputo_rl_example(0.5, 1.0, "paper-ex-caputo"),
    "paper-ex-rl": lambda: _caputo_rl_example(1.0 / 3.0, 0.0, "paper-ex-rl"),
    "linear-caputo": _linear_caputo,
}

CATALOG_NAMES = tuple(sorted(_CATALOG))


def catalog_config(name: str) -> dict:
    """A fresh configuration dict for a built-in problem."""
    try:
        return _CATALOG[name]()
    except KeyError:
        raise ConfigurationError(
            f"unknown catalog problem {name!r}; available: {list(CATALOG_NAMES)}"
        ) from None


_SCHEMA = {
    "order": {"alpha", "beta"},
    "psi": {"kind", "sigma", "nodes", "values", "derivatives"},
    "domain": {"b", "r"},
    "history": {"expr"},
    "rhs": {"expr"},
    "delay": {"expr"},
    "initial": {"u0_weighted"},
    "lipschitz": {"K", "L_f", "L_J"},
}
_REQUIRED_SECTIONS = ("order", "psi", "domain", "history", "rhs", "delay", "initial")


def _check_keys(config: Mapping) -> None:
    known_sections = set(_SCHEMA) | {"impulses", "label", "problem"}
    for section in config:
        if section not in known_sections:
            raise ConfigurationError(f"unknown config section [{section}]")
    for section, allowed in _SCHEMA.items():
        body = config.get(section)
        if body is None:
            continue
        if not isinstance(body, Mapping):
            raise ConfigurationError(f"section [{section}] must be a table")
        for key in body:
            if key not in allowed:
                raise ConfigurationError(
                    f"unknown key {key!r} in section [{section}]")
    for k, imp in enumerate(config.get("impulses", ())):
        if not isinstance(imp, Mapping):
            raise ConfigurationError(f"impulses[{k}] must be a table")
        for key in imp:
            if key not in {"time", "map"}:
                raise ConfigurationError(f"unknown key {key!r} in impulses[{k}]")
        for key in ("time", "map"):
            if key not in imp:
                raise ConfigurationError(f"impulses[{k}] is missing {key!r}")


def _number(config: Mapping, section: str, key: str) -> float:
    try:
        raw = config[section][key]
    except KeyError:
        raise ConfigurationError(f"missing {key!r} in section [{section}]") from None
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigurationError(f"[{section}].{key} must be a number, got {raw!r}")
    return float(raw)


def _expr_source(config: Mapping, section: str) -> str:
    try:
        raw = config[section]["expr"]
    except KeyError:
        raise ConfigurationError(f"missing 'expr' in section [{section}]") from None
    return raw


def _build_psi(config: Mapping, b: float) -> PsiSpec:
    body = config.get("psi")
    if body is None or "kind" not in body:
        raise ConfigurationError("missing 'kind' in section [psi]")
    kind = body["kind"]
    if kind == "identity":
        return identity_psi(b)
    if kind == "log-shifted":
        return log_shifted_psi(b)
    if kind == "power":
        if "sigma" not in body:
            raise ConfigurationError("[psi].sigma is required for kind='power'")
        return power_psi(float(body["sigma"]), b)
    if kind == "tabulated":
        for key in ("nodes", "values", "derivatives"):
            if key not in body:
                raise ConfigurationError(f"[psi].{key} is required for kind='tabulated'")
        return tabulated_psi(body["nodes"], body["values"], body["derivatives"])
    raise ConfigurationError(
        f"unknown psi kind {kind!r}; expected identity, log-shifted, power or tabulated")


def _rhs_callable(expr: Expression, psi: PsiSpec, rho: float) -> Callable:
    psi0 = float(psi.eval_fn(0.0))

    def rhs(t, u, ud, w):
        x = np.asarray(psi.eval_fn(t), dtype=float) - psi0
        return expr(t=t, u=u, ud=ud, w=w,
                    psi_w=x ** (1.0 - rho), exp_npsi=np.exp(-x))

    return rhs


def _scalar_callable(expr: Expression) -> Callable:
    def fn(t):
        return expr(t=t)

    return fn


def _impulse_callable(expr: Expression, psi: PsiSpec, rho: float,
                      t_k: float) -> Callable:
    psi_w = float(psi.eval_fn(t_k) - psi.eval_fn(0.0)) ** (1.0 - rho)

    def jmap(u):
        return expr(u=u, psi_w=psi_w)

    return jmap


def build_problem(config: Mapping | str) -> ImpulsiveDelayIVP:
    """Build and validate an IVP from a catalog name or a config mapping.

    Runs the psi validator, checks h(t) <= t and h(t) >= -r on probe
    points, checks the history for finiteness and the impulse times for
    ordering.  Raises ConfigurationError naming the offending field.
    """
    if isinstance(config, str):
        config = catalog_config(config)
    elif set(config.keys()) == {"problem"}:
        config = catalog_config(config["problem"])
    _check_keys(config)
    for section in _REQUIRED_SECTIONS:
        if section not in config:
            raise ConfigurationError(f"missing required section [{section}]")

    order = FractionalOrder(_number(config, "order", "alpha"),
                            _number(config, "order", "beta"))
    b = _number(config, "domain", "b")
    r = _number(config, "domain", "r")
    if b <= 0:
        raise ConfigurationError(f"[domain].b must be positive, got {b}")
    if r < 0:
        raise ConfigurationError(f"[domain].r must be nonnegative, got {r}")
    psi = _build_psi(config, b)

    report = validate_psi(psi, _PROBE_COUNT)
    if not report.passed:
        raise ConfigurationError(
            "[psi] failed validation: " + "; ".join(report.failures))

    rho = order.rho
    rhs_expr = parse_expression(_expr_source(config, "rhs"),
                                allowed=("t", "u", "ud", "w", "psi_w", "exp_npsi"))
    delay_expr = parse_expression(_expr_source(config, "delay"), allowed=("t",))
    history_expr = parse_expression(_expr_source(config, "history"), allowed=("t",))

    delay = _scalar_callable(delay_expr)
    history = _scalar_callable(history_expr)

    probes = np.linspace(0.0, b, _PROBE_COUNT)
    hvals = np.asarray(delay(probes), dtype=float)
    if hvals.shape != probes.shape:
        hvals = np.full_like(probes, float(delay(0.0)))
    if not np.all(np.isfinite(hvals)):
        raise ConfigurationError("[delay].expr produced non-finite values")
    if np.any(hvals > probes + 1e-12 * max(b, 1.0)):
        worst = probes[int(np.argmax(hvals - probes))]
        raise ConfigurationError(
            f"[delay].expr violates h(t) <= t (at probe t={worst:g})")
    if np.any(hvals < -r - 1e-12 * max(r, 1.0)):
        worst = probes[int(np.argmin(hvals))]
        raise ConfigurationError(
            f"[delay].expr falls below -r={-r} (at probe t={worst:g})")

    hist_probes = np.linspace(-r, 0.0, _PROBE_COUNT) if r > 0 else np.zeros(1)
    hist_vals = np.asarray(history(hist_probes), dtype=float)
    if not np.all(np.isfinite(hist_vals)):
        raise ConfigurationError("[history].expr produced non-finite values")

    impulses = config.get("impulses", [])
    times = []
    maps = []
    for k, imp in enumerate(impulses):
        t_k = imp["time"]
        if isinstance(t_k, bool) or not isinstance(t_k, (int, float)):
            raise ConfigurationError(f"impulses[{k}].time must be a number")
        t_k = float(t_k)
        if not 0.0 < t_k < b:
            raise ConfigurationError(
                f"impulses[{k}].time={t_k} must lie strictly inside (0, {b})")
        map_expr = parse_expression(imp["map"], allowed=("u", "psi_w"))
        times.append(t_k)
        maps.append(_impulse_callable(map_expr, psi, rho, t_k))

    u0 = _number(config, "initial", "u0_weighted")
    label = config.get("label", "")
    if not isinstance(label, str):
        raise ConfigurationError("label must be a string")

    if "lipschitz" in config:
        lipschitz_from_config(config)  # validate eagerly; carried separately

    return ImpulsiveDelayIVP(
        order=order, psi=psi, b=b, delay_bound=r,
        rhs=_rhs_callable(rhs_expr, psi, rho),
        delay=delay, history=history, u0_weighted=u0,
        impulse_times=tuple(times), impulse_maps=tuple(maps), label=label)


def lipschitz_from_config(config: Mapping | str) -> LipschitzData | None:
    """Extract the [lipschitz] section, if present."""
    if isinstance(config, str):
        config = catalog_config(config)
    body = config.get("lipschitz")
    if body is None:
        return None
    for key in ("K", "L_f", "L_J"):
        if key not in body:
            raise ConfigurationError(f"missing {key!r} in section [lipschitz]")
    lj = body["L_J"]
    if not isinstance(lj, (list, tuple)):
        raise ConfigurationError("[lipschitz].L_J must be a list of numbers")
    n_impulses = len(config.get("impulses", []))
    if len(lj) != n_impulses:
        raise ConfigurationError(
            f"[lipschitz].L_J has {len(lj)} entries but the problem has "
            f"{n_impulses} impulses")
    return LipschitzData(K=float(body["K"]), L_f=float(body["L_f"]),
                         L_J=tuple(float(v) for v in lj))


def load_config(path) -> dict:
    """Parse a TOML problem configuration file."""
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"config file {path} is not valid TOML: {exc}")


def history_eval(ivp: ImpulsiveDelayIVP, t: float) -> float:
    """phi(t) on the history window [-r, 0]."""
    if not -ivp.delay_bound <= t <= 0.0:
        raise DomainError(
            f"history is defined on [{-ivp.delay_bound}, 0], got t={t}")
    return float(ivp.history(t))


def solve_implicit_g(ivp: ImpulsiveDelayIVP, t: float, u: float,
                     u_delayed: float, tol: float = 1e-12,
                     max_iter: int = 200) -> float:
    """Solve the implicit relation g = f(t, u, u_delayed, g).

    Iterates g <- f(t, u, u_delayed, g) from g0 = f(t, u, u_delayed, 0);
    converges geometrically with ratio at most L_f when f is
    L_f-contractive in its final slot.  The returned value satisfies
    |g - f(t, u, u_delayed, g)| <= tol.
    """
    if tol <= 0 or max_iter < 1:
        raise DomainError("tol must be positive and max_iter at least 1")
    g = float(ivp.rhs(t, u, u_delayed, 0.0))
    delta = math.inf
    for _ in range(max_iter):
        g_next = float(ivp.rhs(t, u, u_delayed, g))
        delta = abs(g_next - g)
        g = g_next
        if not math.isfinite(g):
            raise ConvergenceError(
                f"implicit right-hand side diverged at t={t}", residual=delta)
        if delta <= tol:
            return g
    raise ConvergenceError(
        f"implicit fixed point did not reach tol={tol} within {max_iter} "
        f"iterations at t={t}", residual=delta)
