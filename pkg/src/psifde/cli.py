"""Command-line front end.

Commands: solve, check-hypotheses, certify, verify-uhml,
convergence-study.  Problems come from a TOML config (--config) or the
built-in catalog (--problem).  Exit codes separate engineering failures
from mathematical verdicts: 0 = success/pass, 2 = a verification failed
(hypotheses not contractive, envelope exceeded), 1 = error (bad config,
missing file, solver breakdown).

All floating output carries 17 significant digits; summary lines repeat
headline numbers rounded to 4 decimals.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import PerturbationSpec, stability_constants, uhml_verify
from .errors import ConvergenceError, PsifdeError
from .frac_integral import QuadratureScheme
from .picard_solver import GridSpec, export_solution, picard_solve, solution_at
from .problem import (CATALOG_NAMES, build_problem, catalog_config,
                      lipschitz_from_config, load_config)

__all__ = ["RunManifest", "run", "main"]

COMMANDS = ("solve", "check-hypotheses", "certify", "verify-uhml",
            "convergence-study")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERIFICATION_FAILED = 2


@dataclass(frozen=True)
class RunManifest:
    """One fully specified CLI run."""

    command: str
    config_path: Path | None = None
    problem: str | None = None
    output_dir: Path = Path("psifde-out")
    grid_n: int = 512
    tol: float = 1e-10
    seed: int = 0
    zeta: str = "derived"
    scheme: str = "trap"
    epsilon: float = 1e-3

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise PsifdeError(f"unknown command {self.command!r}")
        if self.grid_n < 8:
            raise PsifdeError(f"grid_n must be at least 8, got {self.grid_n}")
        if not 0.0 < self.tol <= 1e-2:
            raise PsifdeError(f"tol must lie in (0, 1e-2], got {self.tol}")
        if self.seed < 0:
            raise PsifdeError(f"seed must be nonnegative, got {self.seed}")
        if (self.config_path is None) == (self.problem is None):
            raise PsifdeError("exactly one of --config and --problem is required")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _load(manifest: RunManifest) -> dict:
    if manifest.problem is not None:
        return catalog_config(manifest.problem)
    return load_config(manifest.config_path)


def _require_lipschitz(config: dict):
    data = lipschitz_from_config(config)
    if data is None:
        raise PsifdeError(
            "this command needs the [lipschitz] section (K, L_f, L_J)")
    return data


def _cmd_solve(manifest: RunManifest, out: Path) -> int:
    config = _load(manifest)
    ivp = build_problem(config)
    lipschitz = lipschitz_from_config(config)
    sol = picard_solve(ivp, GridSpec(manifest.grid_n), tol=manifest.tol,
                       scheme=QuadratureScheme.parse(manifest.scheme),
                       lipschitz=lipschitz)
    export_solution(sol, out / "solution.txt")
    with open(out / "convergence.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sweep\tweighted_norm_delta\n")
        for i, d in enumerate(sol.convergence, start=1):
            fh.write(f"{i}\t{_fmt(d)}\n")
    u_b = solution_at(sol, ivp.b)
    print(f"solved {ivp.label or 'problem'} on n={manifest.grid_n} grid "
          f"in {len(sol.convergence)} sweeps")
    print(f"u(b)={_fmt(u_b)} ({u_b:.4f})")
    print(f"artifacts: {out / 'solution.txt'} {out / 'convergence.txt'}")
    return EXIT_OK


def _cmd_check_hypotheses(manifest: RunManifest) -> int:
    config = _load(manifest)
    ivp = build_problem(config)
    data = _require_lipschitz(config)
    cert = stability_constants(ivp.order, ivp.psi, ivp.b, data.K, data.L_f,
                               data.L_J, zeta_variant=manifest.zeta)
    print(f"H1: K={_fmt(data.K)} L_f={_fmt(data.L_f)} (user-asserted)")
    print("H2: L_J=" + ",".join(_fmt(v) for v in data.L_J) + " (user-asserted)")
    print(f"H3: L={_fmt(cert.L_contraction)} ({cert.L_contraction:.4f})")
    verdict = "CONTRACTIVE" if cert.contractive else "NOT CONTRACTIVE"
    print(f"verdict: {verdict}")
    return EXIT_OK if cert.contractive else EXIT_VERIFICATION_FAILED


def _cmd_certify(manifest: RunManifest, out: Path) -> int:
    config = _load(manifest)
    ivp = build_problem(config)
    data = _require_lipschitz(config)
    cert = stability_constants(ivp.order, ivp.psi, ivp.b, data.K, data.L_f,
                               data.L_J, zeta_variant=manifest.zeta)
    text = cert.render()
    (out / "certificate.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    print(f"artifacts: {out / 'certificate.txt'}")
    return EXIT_OK if cert.contractive else EXIT_VERIFICATION_FAILED


def _cmd_verify_uhml(manifest: RunManifest, out: Path) -> int:
    config = _load(manifest)
    ivp = build_problem(config)
    data = _require_lipschitz(config)
    cert = stability_constants(ivp.order, ivp.psi, ivp.b, data.K, data.L_f,
                               data.L_J, zeta_variant=manifest.zeta)
    if not cert.contractive:
        print(f"H3: L={_fmt(cert.L_contraction)} ({cert.L_contraction:.4f})")
        print("verdict: NOT CONTRACTIVE, envelope verification refused")
        return EXIT_VERIFICATION_FAILED
    pert = PerturbationSpec(epsilon=manifest.epsilon,
                            impulse_signs=(1.0,) * len(ivp.impulse_times))
    report = uhml_verify(ivp, data, pert, GridSpec(manifest.grid_n),
                         tol=manifest.tol,
                         scheme=QuadratureScheme.parse(manifest.scheme))
    text = report.render()
    (out / "uhml_report.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    selected = report.check(manifest.zeta)
    print(f"selected zeta variant: {manifest.zeta}")
    print(f"max_ratio={_fmt(selected.max_ratio)} ({selected.max_ratio:.4f})")
    print(f"artifacts: {out / 'uhml_report.txt'}")
    return EXIT_OK if report.passed(manifest.zeta) else EXIT_VERIFICATION_FAILED


def _cmd_convergence_study(manifest: RunManifest, out: Path) -> int:
    config = _load(manifest)
    ivp = build_problem(config)
    lipschitz = lipschitz_from_config(config)
    rows = []
    prev = None
    n = manifest.grid_n
    for _ in range(4):
        sol = picard_solve(ivp, GridSpec(n), tol=manifest.tol,
                           scheme=QuadratureScheme.parse(manifest.scheme),
                           lipschitz=lipschitz)
        u_b = solution_at(sol, ivp.b)
        delta = float("nan") if prev is None else abs(u_b - prev)
        rows.append((n, u_b, delta))
        prev = u_b
        n *= 2
    with open(out / "convergence_study.txt", "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write("N\tu_b\tdelta\n")
        for n_, u_, d_ in rows:
            cell = "" if np.isnan(d_) else _fmt(d_)
            fh.write(f"{n_}\t{_fmt(u_)}\t{cell}\n")
    for n_, u_, d_ in rows:
        tail = "" if np.isnan(d_) else f" delta={_fmt(d_)}"
        print(f"N={n_} u(b)={_fmt(u_)}{tail}")
    print(f"artifacts: {out / 'convergence_study.txt'}")
    return EXIT_OK


def run(manifest: RunManifest) -> int:
    """Execute one manifest; returns the process exit status."""
    try:
        out = Path(manifest.output_dir)
        if manifest.command != "check-hypotheses":
            out.mkdir(parents=True, exist_ok=True)
        if manifest.command == "solve":
            return _cmd_solve(manifest, out)
        if manifest.command == "check-hypotheses":
            return _cmd_check_hypotheses(manifest)
        if manifest.command == "certify":
            return _cmd_certify(manifest, out)
        if manifest.command == "verify-uhml":
            return _cmd_verify_uhml(manifest, out)
        return _cmd_convergence_study(manifest, out)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (PsifdeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psifde",
        description="Solve and certify impulsive implicit psi-Hilfer "
                    "fractional delay problems")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", type=Path, default=None,
                         help="TOML problem configuration file")
        cmd.add_argument("--problem", type=str, default=None,
                         help=f"catalog problem name, one of {list(CATALOG_NAMES)}")
        cmd.add_argument("--out", type=Path, default=Path("psifde-out"),
                         help="output directory for artifacts")
        cmd.add_argument("--grid-n", type=int, default=512)
        cmd.add_argument("--tol", type=float, default=1e-10)
        cmd.add_argument("--seed", type=int, default=0)
        cmd.add_argument("--zeta", choices=("derived", "as-stated"),
                         default="derived")
        cmd.add_argument("--scheme", choices=("rect", "trap"), default="trap")
        if name == "verify-uhml":
            cmd.add_argument("--epsilon", type=float, default=1e-3)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        manifest = RunManifest(
            command=args.command, config_path=args.config, problem=args.problem,
            output_dir=args.out, grid_n=args.grid_n, tol=args.tol,
            seed=args.seed, zeta=args.zeta, scheme=args.scheme,
            epsilon=getattr(args, "epsilon", 1e-3))
    except PsifdeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return run(manifest)


if __name__ == "__main__":
    raise SystemExit(main())
