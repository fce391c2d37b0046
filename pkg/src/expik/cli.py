"""``expik`` command-line interface.

Subcommands: ``solve``, ``study-convergence``, ``study-timing``,
``verify-bounds`` and ``verify-lemmas``. Options may also come from a JSON
file given with ``--config``; flags on the command line win. Every output
carries a provenance header with the effective configuration.

Exit codes: 0 success, 1 usage or input error, 2 numeric failure (including
a verification run that finds a violated identity or bound).
"""
import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .basis import BasisFamily
from .bench import (BenchmarkProblem, reference_solution, run_convergence_study,
                    run_timing_study, schrodinger_1d, schrodinger_2d)
from .errors import (ContractViolation, DerivativeOrderUnavailable, EstimateFailed,
                     NumericFailure, NumericOverflow, OracleUncertified)
from .gsource import SeparableProfile, source_from_json
from .integrator import infinite_arnoldi
from .linalg import as_operator, read_matrix_market
from .verify import bound_sweep, chebyshev_identity_report, truncation_equivalence_report

log = logging.getLogger("expik")

BUILTINS = {"schrodinger1d": schrodinger_1d, "schrodinger2d": schrodinger_2d}
_BUILTIN_DEFAULT_N = {"schrodinger1d": 100, "schrodinger2d": 32}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


@dataclass
class RunConfig:
    """Effective configuration of one CLI run."""

    command: str
    builtin: str = None
    eps: float = None
    n: int = None
    matrix: str = None
    u0: str = None
    source: str = None
    family: str = "besselj"
    families: list = field(default_factory=lambda: [f.value for f in BasisFamily])
    N: int = None
    N_list: list = None
    T: float = None
    out: str = None
    seed: int = 0
    check: bool = False

    def validate(self):
        external = any(x is not None for x in (self.matrix, self.u0, self.source))
        if self.builtin is not None and external:
            raise UsageError("give either --builtin or --matrix/--u0/--source, not both")
        if self.builtin is None and not external:
            raise UsageError("a problem is required: --builtin NAME or --matrix/--u0/--source")
        if external and (self.matrix is None or self.u0 is None):
            raise UsageError("--matrix and --u0 are both required for an external problem")
        if self.builtin is not None and self.builtin not in BUILTINS:
            raise UsageError(f"unknown builtin {self.builtin!r}; choose from {sorted(BUILTINS)}")
        if self.T is None:
            raise UsageError("--T is required")
        if not self.T > 0:
            raise UsageError("--T must be positive")
        return self

    def provenance(self):
        return {"expik_version": __version__, "config": asdict(self)}


def _read_path(path, reader):
    if not Path(path).is_file():
        raise UsageError(f"cannot read {path}: no such file")
    try:
        return reader(Path(path))
    except FileNotFoundError:
        raise UsageError(f"cannot read {path}: no such file") from None
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def build_problem(cfg):
    if cfg.builtin is not None:
        kwargs = {}
        if cfg.eps is not None:
            kwargs["epsilon"] = cfg.eps
        size = cfg.n if cfg.n is not None else _BUILTIN_DEFAULT_N[cfg.builtin]
        return BUILTINS[cfg.builtin](size, T=cfg.T, **kwargs)
    try:
        A = as_operator(_read_path(cfg.matrix, read_matrix_market))
    except ContractViolation as exc:
        raise UsageError(f"cannot use {cfg.matrix} as A: {exc}") from None
    u0 = np.asarray(_read_path(cfg.u0, read_matrix_market), dtype=complex).reshape(-1)
    if cfg.source is not None:
        src = _read_path(cfg.source, lambda p: source_from_json(json.loads(p.read_text()),
                                                                base_dir=p.parent))
    else:
        src = SeparableProfile([], n=A.n)
    eps = float("nan") if cfg.eps is None else cfg.eps
    return BenchmarkProblem(A=A, src=src, u0=u0, T=cfg.T, label=str(cfg.matrix), epsilon=eps)


def _parse_int_list(text):
    if isinstance(text, list):
        return [int(x) for x in text]
    try:
        return [int(x) for x in str(text).replace(" ", "").split(",") if x]
    except ValueError:
        raise UsageError(f"expected a comma separated list of integers, got {text!r}") from None


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS,
                        help="log progress to stderr")
    parser = _Parser(prog="expik", description="Infinite Arnoldi exponential integrator.",
                     parents=[common])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def problem_args(p):
        p.add_argument("--config", help="JSON file with option values")
        p.add_argument("--builtin", choices=sorted(BUILTINS), default=None)
        p.add_argument("--eps", type=float, default=None, help="diffusion parameter")
        p.add_argument("--n", type=int, default=None, help="grid points (per side in 2-D)")
        p.add_argument("--matrix", default=None, help="Matrix Market file with A")
        p.add_argument("--u0", default=None, help="Matrix Market dense vector with u0")
        p.add_argument("--source", default=None, help="JSON source description")
        p.add_argument("--T", type=float, default=None, help="final time")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("solve", parents=[common], help="approximate u(T)")
    problem_args(p)
    p.add_argument("--family", default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--check", action="store_true", default=None,
                   help="also report the relative error against the reference solver")

    p = sub.add_parser("study-convergence", parents=[common], help="error vs N for several families")
    problem_args(p)
    p.add_argument("--families", default=None, help="comma separated family names")
    p.add_argument("--N-list", dest="N_list", default=None)

    p = sub.add_parser("study-timing", parents=[common], help="wall-clock and error vs N for one family")
    problem_args(p)
    p.add_argument("--family", default=None)
    p.add_argument("--N-list", dest="N_list", default=None)

    p = sub.add_parser("verify-bounds", parents=[common], help="check every bound against measurements")
    p.add_argument("--max-N", dest="max_N", type=int, default=40)
    p.add_argument("--t-max", dest="t_max", type=float, default=8.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("verify-lemmas", parents=[common], help="check the closed-form identities")
    p.add_argument("--max-N", dest="max_N", type=int, default=15)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    return parser


def _merge(args):
    # flags override config-file values, which override dataclass defaults
    values = {}
    if getattr(args, "config", None):
        text = _read_path(args.config, lambda p: p.read_text())
        try:
            values.update(json.loads(text))
        except json.JSONDecodeError as exc:
            raise UsageError(f"cannot parse {args.config}: {exc}") from None
    for key, val in vars(args).items():
        if key in ("config", "verbose") or val is None:
            continue
        values[key] = val
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(values) - known
    if unknown:
        raise UsageError(f"unknown configuration keys: {sorted(unknown)}")
    cfg = RunConfig(**values)
    if isinstance(cfg.families, str):
        cfg.families = [f for f in cfg.families.split(",") if f]
    try:
        cfg.families = [BasisFamily.parse(f).value for f in cfg.families]
        cfg.family = BasisFamily.parse(cfg.family).value
    except ContractViolation as exc:
        raise UsageError(str(exc)) from None
    if cfg.N_list is not None:
        cfg.N_list = _parse_int_list(cfg.N_list)
    return cfg.validate()


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _dump_json(obj):
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def cmd_solve(cfg):
    if cfg.N is None:
        raise UsageError("--N is required")
    p = build_problem(cfg)
    res = infinite_arnoldi(p.A, p.src, cfg.family, p.u0, p.T, cfg.N)
    payload = {"provenance": cfg.provenance(), "result": res.to_json()}
    if cfg.check:
        ref = reference_solution(p)
        payload["relative_error"] = float(np.linalg.norm(res.u - ref) / np.linalg.norm(ref))
        log.info("relative error vs reference: %.3e", payload["relative_error"])
    _emit(_dump_json(payload), cfg.out)
    return 0


def _provenance_lines(cfg):
    return [json.dumps(cfg.provenance(), sort_keys=True)]


def cmd_study_convergence(cfg):
    if not cfg.N_list:
        raise UsageError("--N-list is required")
    p = build_problem(cfg)
    study = run_convergence_study(p, cfg.families, cfg.N_list)
    _emit(study.to_csv(header_lines=_provenance_lines(cfg)), cfg.out)
    return 0


def cmd_study_timing(cfg):
    if not cfg.N_list:
        raise UsageError("--N-list is required")
    p = build_problem(cfg)
    study = run_timing_study(p, cfg.family, cfg.N_list)
    _emit(study.to_csv(header_lines=_provenance_lines(cfg)), cfg.out)
    return 0


def cmd_verify_bounds(args):
    report = bound_sweep(seed=args.seed, N_max=args.max_N, t_max=args.t_max)
    report["provenance"] = {"expik_version": __version__, "max_N": args.max_N,
                            "t_max": args.t_max, "seed": args.seed}
    _emit(_dump_json(report), args.out)
    for key, val in report.items():
        if isinstance(val, dict) and "passed" in val:
            log.info("%s: %s", key, "ok" if val["passed"] else "VIOLATED")
    return 0 if report["passed"] else 2


def cmd_verify_lemmas(args):
    if args.max_N < 1 or args.trials < 1:
        raise UsageError("--max-N and --trials must be positive")
    cheb = chebyshev_identity_report(args.max_N)
    equiv = truncation_equivalence_report(args.trials, seed=args.seed,
                                          N_max=min(12, args.max_N))
    report = {"provenance": {"expik_version": __version__, "max_N": args.max_N,
                             "trials": args.trials, "seed": args.seed},
              "chebyshev_krylov_inverse": cheb, "truncation_equivalence": equiv,
              "passed": cheb["passed"] and equiv["passed"]}
    _emit(_dump_json(report), args.out)
    return 0 if report["passed"] else 2


def main(argv=None):
    parser = _parser()
    try:
        args = parser.parse_args(argv)
        verbose = getattr(args, "verbose", False)
        logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                            format="%(name)s: %(message)s")
        if args.command is None:
            raise UsageError(parser.format_usage() + "expik: error: a subcommand is required")
        if args.command == "verify-bounds":
            return cmd_verify_bounds(args)
        if args.command == "verify-lemmas":
            return cmd_verify_lemmas(args)
        cfg = _merge(args)
        handler = {"solve": cmd_solve, "study-convergence": cmd_study_convergence,
                   "study-timing": cmd_study_timing}[args.command]
        return handler(cfg)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        if "usage:" not in str(exc):
            print(parser.format_usage(), file=sys.stderr, end="")
        return 1
    except (ContractViolation, DerivativeOrderUnavailable) as exc:
        print(f"expik: error: {exc}", file=sys.stderr)
        return 1
    except (NumericFailure, NumericOverflow, EstimateFailed, OracleUncertified) as exc:
        print(f"expik: numeric failure: {exc}", file=sys.stderr)
        return 2
