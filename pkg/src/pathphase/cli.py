"""Command-line entry point.

Exit codes: 0 success, 2 usage, 3 domain/physics error, 4 parse error.
Machine output goes to stdout, human messages to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import bloch, circuit_io, fringes
from .circuit_io import emit_results, fmt, parse_number
from .errors import DomainError, ParseError
from .state import compensated_shifts, phase_decomposition

EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_PARSE = 4


class UsageError(Exception):
    pass


def angle(text: str) -> float:
    try:
        return parse_number(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid angle/number {text!r}") from None


def _default_seed() -> int:
    raw = os.environ.get("PATHPHASE_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        return 0


def _print_json(obj) -> None:
    def clean(v):
        if isinstance(v, bool) or v is None or isinstance(v, str):
            return v
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        return float(fmt(v))
    sys.stdout.write(json.dumps(clean(obj)) + "\n")


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def _model_args(p: argparse.ArgumentParser, with_c: bool = True) -> None:
    p.add_argument("--t1", type=angle, default=fringes.REF_T1)
    p.add_argument("--t2", type=angle, default=fringes.REF_T2)
    p.add_argument("--s1", type=angle, default=fringes.REF_S1)
    p.add_argument("--s2", type=angle, default=None, help="defaults to 1 - s1")
    if with_c:
        p.add_argument("--c", type=angle, default=fringes.REF_C)


def _s2(args) -> float:
    return 1.0 - args.s1 if args.s2 is None else args.s2


# -- subcommands ---------------------------------------------------------------

def cmd_phase(args) -> None:
    if args.dchi is not None:
        if not args.compensated or args.chi1 is not None or args.chi2 is not None:
            raise UsageError("--dchi needs --compensated and excludes --chi1/--chi2")
        chi1, chi2 = compensated_shifts(args.t, args.dchi)
    else:
        if args.chi1 is None or args.chi2 is None:
            raise UsageError("give --dchi with --compensated, or both --chi1 and --chi2")
        if args.compensated:
            raise UsageError("--compensated only applies with --dchi")
        chi1, chi2 = args.chi1, args.chi2
    _print_json(phase_decomposition(args.t, chi1, chi2).as_dict())


def cmd_sweep(args) -> None:
    cfg = None
    if args.config:
        cfg = circuit_io.parse_sweep(_read_text(args.config))
    inline = []
    for flag, key in (("dchi_from", "dchi_from"), ("dchi_to", "dchi_to"), ("steps", "steps"),
                      ("t1", "T1"), ("t2", "T2"), ("s1", "s1"), ("s2", "s2"), ("c", "C"),
                      ("compensated", "compensated"), ("output", "output")):
        value = getattr(args, flag)
        if value is not None:
            inline.append(f"{key}={value}")
    if inline:
        cfg = circuit_io.parse_sweep("\n".join(inline), base=cfg)
    cfg = cfg or circuit_io.SweepConfig()
    grid = fringes.sweep_grid(cfg.dchi_from, cfg.dchi_to, cfg.steps)
    rows = fringes.phase_sweep(cfg.T1, cfg.T2, cfg.s1, cfg.s2, cfg.C, grid,
                               compensated=cfg.compensated, segments=args.segments)
    emit_results(rows, args.format, cfg.output_path)


def cmd_solid_angle(args) -> None:
    path = bloch.build_evolution_path(args.t, args.dchi, args.segments)
    omega = bloch.signed_solid_angle(path)
    if args.path_csv:
        Path(args.path_csv).write_text(circuit_io.path_to_csv(path), encoding="utf-8")
    _print_json({"omega": omega, "phase_from_area": -0.5 * omega})


def cmd_fringes(args) -> None:
    data = fringes.synthesize_interferogram(args.t1, args.t2, args.s1, _s2(args), args.c,
                                            args.dchi, args.mean_counts, args.points,
                                            args.noise, args.seed)
    emit_results(data, "csv", args.output)


def cmd_fit_fringe(args) -> None:
    fit = fringes.fit_fringe(circuit_io.read_interferogram(_read_text(args.input)))
    _print_json(fit.as_dict())


def cmd_fit_visibility(args) -> None:
    points = circuit_io.read_phase_points(_read_text(args.input))
    C, stderr = fringes.fit_visibility_C(points, args.t1, args.t2, args.s1, _s2(args))
    _print_json({"C": C, "stderr": stderr})


def cmd_run(args) -> None:
    spec = circuit_io.parse_circuit(_read_text(args.circuit))
    result = circuit_io.simulate_circuit(spec).as_dict()
    if args.eta_steps is not None:
        if args.eta_steps < 5:
            raise UsageError("--eta-steps must be >= 5")
        data = circuit_io.circuit_interferogram(spec, args.eta_steps, args.mean_counts)
        result["interferogram"] = [{"eta": e, "counts": c}
                                   for e, c in zip(data.eta_values, data.counts)]
        if args.out:
            emit_results(data, "csv", args.out)
    _print_json(result)


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathphase",
        description="Spatial geometric phase of a two-path interferometer loop.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phase", help="closed-form phase decomposition")
    p.add_argument("--t", type=angle, required=True, help="absorber transmissivity")
    p.add_argument("--dchi", type=angle)
    p.add_argument("--chi1", type=angle)
    p.add_argument("--chi2", type=angle)
    p.add_argument("--compensated", action="store_true",
                   help="choose chi1, chi2 so the dynamical phase vanishes")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("sweep", help="phase sweep over dchi as CSV")
    p.add_argument("--config", help="sweep config file ('-' for stdin)")
    p.add_argument("--dchi-from", dest="dchi_from")
    p.add_argument("--dchi-to", dest="dchi_to")
    p.add_argument("--steps")
    p.add_argument("--t1")
    p.add_argument("--t2")
    p.add_argument("--s1")
    p.add_argument("--s2")
    p.add_argument("--c")
    p.add_argument("--compensated", choices=["true", "false"])
    p.add_argument("--output")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--segments", type=int, default=1024)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("solid-angle", help="signed solid angle of the Bloch loop")
    p.add_argument("--t", type=angle, required=True)
    p.add_argument("--dchi", type=angle, required=True)
    p.add_argument("--segments", type=int, default=1024)
    p.add_argument("--path-csv", help="also dump the discretized path")
    p.set_defaults(func=cmd_solid_angle)

    p = sub.add_parser("fringes", help="synthesize an interferogram as CSV")
    _model_args(p)
    p.add_argument("--dchi", type=angle, required=True)
    p.add_argument("--mean-counts", type=float, default=1000.0)
    p.add_argument("--points", type=int, default=32)
    p.add_argument("--noise", choices=["none", "poisson"], default="none")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_fringes)

    p = sub.add_parser("fit-fringe", help="fit A + B cos(eta - phase) to eta,counts CSV")
    p.add_argument("--input", default="-")
    p.set_defaults(func=cmd_fit_fringe)

    p = sub.add_parser("fit-visibility", help="fit the damping coefficient C to dchi,phase CSV")
    _model_args(p, with_c=False)
    p.add_argument("--input", default="-")
    p.set_defaults(func=cmd_fit_visibility)

    p = sub.add_parser("run", help="simulate a circuit file")
    p.add_argument("--circuit", required=True)
    p.add_argument("--eta-steps", type=int)
    p.add_argument("--mean-counts", type=float, default=1000.0)
    p.add_argument("--out", help="write the interferogram CSV here as well")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"pathphase {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
