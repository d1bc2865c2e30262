"""Command-line front end: gen, solve, validate, oracle.

Exit codes: 0 success (or a feasible certificate), 1 validation failure,
2 usage error or malformed input, 3 inconclusive solve.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import instances, io, oracle, sdp as sdpm, solver
from .io import FormatError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_INCONCLUSIVE = 3


class UsageError(Exception):
    pass


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _print(doc: dict):
    print(json.dumps(doc, indent=1))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmam", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write an instance file")
    kind = g.add_mutually_exclusive_group(required=True)
    kind.add_argument("--planted", choices=["yes", "no"])
    kind.add_argument("--random", action="store_true")
    kind.add_argument("--scalar", action="store_true", help="P0 = P1 = 1, i.e. Q = 1/2")
    g.add_argument("--dw", type=int, default=2)
    g.add_argument("--dy", type=int, default=2)
    g.add_argument("--k", type=int, default=1, help="rank of the planted-no projector")
    g.add_argument("--rank0", type=int)
    g.add_argument("--rank1", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--eps", type=_fraction, default=sdpm.DEFAULT_PADDING, help="soundness padding (default 1/64)")
    g.add_argument("--no-padding", action="store_true")
    g.add_argument("--samples", type=int, default=2000, help="oracle samples for --random")
    g.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="run the solver and write a certificate")
    s.add_argument("instance")
    s.add_argument("--mode", choices=[solver.CERTIFIED, solver.FAITHFUL], default=solver.CERTIFIED)
    s.add_argument("--fixed-point", type=int, metavar="K", help="store iterates on a 2^-K grid")
    s.add_argument("--mu", type=_fraction)
    s.add_argument("--step-scale", type=_fraction)
    s.add_argument("--cap", type=int, help="iteration cap (certified mode)")
    s.add_argument("--T", type=int, help="iteration count override (faithful mode)")
    s.add_argument("--refine", type=int, help="extra iterations after the first reject certificate")
    s.add_argument("--seed", type=int)
    s.add_argument("--trace", metavar="OUT.jsonl")
    s.add_argument("--cert", help="certificate path (default: <instance>.cert.json)")

    v = sub.add_parser("validate", help="revalidate a certificate against an instance")
    v.add_argument("instance")
    v.add_argument("certificate")
    v.add_argument("--tol", type=float, help="override the tolerance stored in the certificate")

    o = sub.add_parser("oracle", help="bracket the optimal value independently of the solver")
    o.add_argument("instance")
    o.add_argument("--samples", type=int, default=2000)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", help="report path (default: stdout)")
    return parser


def _load(path: str):
    if not Path(path).is_file():
        raise UsageError(f"{path}: no such file")
    return io.load_instance(path)


def _assemble(inst):
    try:
        return sdpm.assemble(inst)
    except sdpm.SdpError as exc:
        raise UsageError(str(exc)) from None


def cmd_gen(args) -> int:
    eps = None if args.no_padding else args.eps
    dW, dY = args.dw, args.dy
    meta = {"generator": None, "seed": args.seed}
    try:
        if args.planted == "yes":
            inst, (rho0, rho1) = instances.gen_planted_yes(dW, dY, args.seed)
            meta.update(generator="planted-yes", known_value=[1, 1],
                        known_value_note="witness strategy scores 1; padding keeps it at 1",
                        witness={"rho0": io.encode_matrix(rho0), "rho1": io.encode_matrix(rho1)})
        elif args.planted == "no":
            inst, proj = instances.gen_planted_no(dW, dY, args.k, args.seed)
            value = oracle.planted_no_value(eps or 0)
            meta.update(generator="planted-no", k=args.k, known_value=io.encode_fraction(value),
                        known_value_note="every strategy scores 1/2 before padding; optimal dual attains it",
                        planted_projector=io.encode_matrix(proj))
        elif args.random:
            n = dW * dY
            r0 = n // 2 if args.rank0 is None else args.rank0
            r1 = n // 2 if args.rank1 is None else args.rank1
            inst = instances.gen_random(dW, dY, r0, r1, args.seed)
            meta.update(generator="random", rank0=r0, rank1=r1, known_value=None)
            full = io.padded(inst, eps)
            b = oracle.bracket(full, samples=args.samples, seed=args.seed)
            meta["bracket"] = {"lower": io.encode_scalar(b.lower), "upper": io.encode_scalar(b.upper),
                               "sources": b.sources}
        else:
            inst = instances.scalar_instance(dW, dY)
            meta.update(generator="scalar", known_value=[1, 1], known_value_note="P0 = P1 = 1 accepts always")
    except (sdpm.SdpError, oracle.OracleError) as exc:
        raise UsageError(str(exc)) from None
    doc = io.instance_to_doc(inst, eps, meta)
    io.dump_json(doc, args.out)
    # the written file must load with its witness revalidated
    io.load_instance(args.out)
    _print({"wrote": args.out, "generator": meta["generator"], "dims": doc["dims"]})
    return EXIT_OK


def _default_cert_path(instance: str) -> str:
    p = Path(instance)
    return str(p.with_name(p.stem + ".cert.json"))


def cmd_solve(args) -> int:
    raw, eps, _ = _load(args.instance)
    inst = io.padded(raw, eps)
    sdp = _assemble(inst)
    overrides = {}
    for key, value in (("fixed_point_bits", args.fixed_point), ("mu", args.mu), ("step_scale", args.step_scale),
                       ("iteration_cap", args.cap), ("T", args.T), ("refine_iterations", args.refine),
                       ("seed", args.seed)):
        if value is not None:
            overrides[key] = value
    try:
        config = solver.configure(sdp, args.mode, **overrides)
    except solver.SolverError as exc:
        raise UsageError(str(exc)) from None

    trace = open(args.trace, "w") if args.trace else None
    try:
        def emit(record):
            if trace is not None:
                trace.write(json.dumps(record.as_dict()) + "\n")
        outcome = solver.solve(sdp, config, on_record=emit)
    finally:
        if trace is not None:
            trace.close()

    summary = {"verdict": outcome.verdict, "iterations": outcome.iterations_used, "mode": outcome.mode,
               "objective": outcome.objective}
    if outcome.certificate is None:
        summary.update(outcome.diagnostics)
        _print(summary)
        return EXIT_INCONCLUSIVE
    cert_path = args.cert or _default_cert_path(args.instance)
    doc = io.certificate_to_doc(outcome.certificate, outcome.objective, outcome.verdict,
                                config.as_dict(), config.validation_tol)
    io.dump_json(doc, cert_path)
    summary["certificate"] = cert_path
    summary["worst_violation"] = outcome.report.worst_violation
    _print(summary)
    return EXIT_OK


def cmd_validate(args) -> int:
    raw, eps, _ = _load(args.instance)
    inst = io.padded(raw, eps)
    sdp = _assemble(inst)
    if not Path(args.certificate).is_file():
        raise UsageError(f"{args.certificate}: no such file")
    cand, claimed, tol = io.load_certificate(args.certificate, inst.dims)
    if args.tol is not None:
        tol = args.tol
    if isinstance(cand, sdpm.PrimalCandidate):
        report = sdpm.validate_primal(sdp, cand, tol)
        kind = "primal"
    else:
        report = sdpm.validate_dual(sdp, cand, tol)
        kind = "dual"
    claim_ok = abs(report.objective - claimed) <= tol * max(1.0, abs(claimed))
    ok = report.feasible and claim_ok
    _print({"kind": kind, "valid": ok, "feasible": report.feasible, "objective": report.objective,
            "claimed_objective": claimed, "claim_matches": claim_ok, "tolerance": tol,
            "worst_violation": report.worst_violation, "checks": report.details})
    return EXIT_OK if ok else EXIT_INVALID


def cmd_oracle(args) -> int:
    raw, eps, meta = _load(args.instance)
    inst = io.padded(raw, eps)
    try:
        sdp = sdpm.assemble(inst)
    except sdpm.SdpError:
        sdp = None
    try:
        b = oracle.bracket(inst, sdp, samples=args.samples, seed=args.seed)
    except oracle.OracleError as exc:
        raise UsageError(str(exc)) from None
    closed = oracle.closed_form_value(inst)
    doc = {
        "lower": io.encode_scalar(b.lower),
        "upper": io.encode_scalar(b.upper),
        "sources": b.sources,
        "closed_form": None if closed is None else io.encode_scalar(closed),
        "known_value": meta.get("known_value"),
        "samples": args.samples,
        "seed": args.seed,
        "lower_witness": {"rho0": io.encode_matrix(b.lower_witness[0]), "rho1": io.encode_matrix(b.lower_witness[1])},
        "upper_witness": None if b.upper_witness is None else {"Y": io.encode_matrix(b.upper_witness.Y)},
    }
    if args.out:
        io.dump_json(doc, args.out)
        _print({k: doc[k] for k in ("lower", "upper", "sources", "closed_form")})
    else:
        _print(doc)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "validate": cmd_validate, "oracle": cmd_oracle}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, FormatError) as exc:
        print(f"qmam {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
