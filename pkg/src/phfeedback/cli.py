"""Command-line front end: ``phfeedback {analyze,synthesize,verify,simulate,generate}``.

Exit codes: 0 ok, 2 input error, 3 infeasible, 4 certification or numerical failure.
The default tolerances can be set with ``PHFEEDBACK_TOL_PROFILE`` (``default``,
``strict``, ``loose`` or a JSON object of tolerance fields); explicit flags win.
"""
from __future__ import annotations

import argparse
import json
import os
import sys as _sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .condense import CondensedFormError, ConditioningError, InvalidSystemError, condensed_form, structural_indices
from .generator import GeneratorSpec, SpecError, generate
from .jsonio import (
    InputFormatError,
    dumps,
    feedback_from_json,
    feedback_to_json,
    load_feedback,
    load_system,
    read_json,
    report_to_json,
    system_to_json,
    to_plain,
    write_json,
)
from .linalg import DEFAULT_TOL, DimensionError, TolerancePolicy, rank_of
from .model import (
    FeedbackSolution,
    GeneralPHDAE,
    RankDeficientInputError,
    closed_loop,
    compress_input,
    validate_general,
    validate_simplified,
)
from .reform import NotFullRankError, StructuralInconsistencyError, simplify
from .sim import InputSignal, SimulationError, simulate
from .synth import (
    CLAIMS,
    PROBLEMS,
    CertificationError,
    InfeasibleError,
    RangeError,
    derivative_only_stabilizable,
    rank_range_B2,
    rank_range_B4,
    solvability,
    structure_check,
    synthesize,
)
from .verify import is_asymptotically_stable

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_CERT = 0, 2, 3, 4

TOL_ENV = "PHFEEDBACK_TOL_PROFILE"
PROFILES = {
    "default": DEFAULT_TOL,
    "strict": TolerancePolicy(rank_rel=1e-12, psd_tol=1e-12, stab_margin=1e-10, equality_tol=1e-12),
    "loose": TolerancePolicy(rank_rel=1e-8, psd_tol=1e-8, stab_margin=1e-6, equality_tol=1e-8),
}


class CommandError(Exception):
    def __init__(self, code, message, payload=None):
        super().__init__(message)
        self.code = code
        self.payload = payload or {}


def base_tolerances(env=None) -> TolerancePolicy:
    env = os.environ if env is None else env
    prof = env.get(TOL_ENV, "").strip()
    if not prof:
        return DEFAULT_TOL
    if prof in PROFILES:
        return PROFILES[prof]
    try:
        return replace(DEFAULT_TOL, **{k: float(v) for k, v in json.loads(prof).items()})
    except (json.JSONDecodeError, TypeError, ValueError, AttributeError) as exc:
        raise CommandError(EXIT_INPUT, f"{TOL_ENV}={prof!r} is neither a profile name nor a JSON tolerance object") from exc


def tolerances(args) -> TolerancePolicy:
    tol = base_tolerances()
    over = {}
    if args.tol_rank is not None:
        over["rank_rel"] = args.tol_rank
    if args.tol_psd is not None:
        over["psd_tol"] = args.tol_psd
    if args.stab_margin is not None:
        over["stab_margin"] = args.stab_margin
    try:
        return replace(tol, **over)
    except ValueError as exc:
        raise CommandError(EXIT_INPUT, str(exc)) from exc


def prepare(system, tol):
    """Reduce a loaded system to simplified form; returns ``(simplified, info)``."""
    info = {"kind": "general" if isinstance(system, GeneralPHDAE) else "simplified"}
    if isinstance(system, GeneralPHDAE):
        rep = validate_general(system, tol)
        info["validation_general"] = to_plain(rep)
        simple, emb, rinfo = simplify(system, tol, allow_rank_deficient=True)
        info["reform"] = rinfo
        system = simple
    return system, info


def _load(path, tol):
    return prepare(load_system(path), tol)


def _full_rank(system, tol):
    """Compress a rank-deficient ``B``; returns ``(system, compression or None)``."""
    if rank_of(system.B, tol) == system.m:
        return system, None
    return compress_input(system, tol)


# ---------------------------------------------------------------- commands

def cmd_analyze(args, tol):
    system, info = _load(args.system, tol)
    out = {"system": info, "tolerances": tol.to_dict()}
    val = validate_simplified(system, tol)
    out["validation"] = {"ok": val.ok, "failures": val.failures, **to_plain(val)}
    work, comp = _full_rank(system, tol)
    out["input_compressed"] = comp is not None
    cf = condensed_form(work, tol)
    out["dims"] = list(cf.dims)
    si = structural_indices(work, tol)
    out["structural_indices"] = to_plain(si)
    out["open_loop"] = report_to_json(is_asymptotically_stable(work.pencil(), tol))
    verdicts = {}
    for p in ("1", "2", "3", "B1", "B3", "B5"):
        v = solvability(work, p, tol)
        verdicts[p] = {"solvable": v.solvable, "failed": v.failed(),
                       "conditions": to_plain(v.conditions), "witness": to_plain(v.witness)}
    out["solvability"] = verdicts
    r2, r4 = rank_range_B2(work, tol), rank_range_B4(work, tol)
    out["rank_ranges"] = {"B2": [r2.lo, r2.hi], "B4": [r4.lo, r4.hi]}
    d = derivative_only_stabilizable(work, tol, seed=args.seed)
    out["derivative_only"] = {"verdict": d.verdict, "failed": d.failed(),
                              "details": to_plain({k: v for k, v in d.details.items() if k != "certificate"})}
    return out, EXIT_OK


def cmd_synthesize(args, tol):
    system, info = _load(args.system, tol)
    work, comp = _full_rank(system, tol)
    if args.derivative:
        v = derivative_only_stabilizable(work, tol, seed=args.seed)
        if v.verdict != "sampled-yes":
            raise CommandError(EXIT_INFEASIBLE, f"derivative-only stabilisation: {v.verdict}",
                               {"verdict": v.verdict, "failed": v.failed(), "details": to_plain(v.details)})
        m = work.m
        zero = np.zeros((m, m), dtype=complex)
        fb = FeedbackSolution(zero, zero, v.witness[0], "derivative-only", None,
                              v.details.get("certificate"), {"witness": v.details.get("witness_label")})
    else:
        if args.problem is None:
            raise CommandError(EXIT_INPUT, "--problem is required unless --derivative is given")
        fb = synthesize(work, args.problem, args.rank, tol)
    if comp is not None:
        fb = comp.expand_feedback(fb)
    out = feedback_to_json(fb, tol)
    out["system"] = info
    return out, EXIT_OK


def _claims(problem):
    if problem == "derivative-only":
        return CLAIMS["3"]
    return CLAIMS.get(problem, ("regular",))


def cmd_verify(args, tol):
    system, _ = _load(args.system, tol)
    fb = load_feedback(args.feedback)
    if fb.m != system.m:
        raise CommandError(EXIT_INPUT, f"feedback is {fb.m}x{fb.m} but the system has m = {system.m}")
    report = is_asymptotically_stable(closed_loop(system, fb), tol)
    struct = structure_check(system, fb, tol)
    claims = _claims(fb.problem)
    ok = report.satisfies(claims) and struct["ok"]
    out = {"problem": fb.problem, "claims": list(claims), "certified": bool(ok),
           "report": report_to_json(report), "structure": to_plain(struct), "tolerances": tol.to_dict()}
    if fb.rank_target is not None and fb.K is not None:
        E = closed_loop(system, fb)
        achieved = rank_of(E.E, tol, scale=E.E_ref)
        out["rank_achieved"] = achieved
        ok = ok and achieved == fb.rank_target
        out["certified"] = bool(ok)
    if fb.certificate is not None:
        out["stored_certificate_agrees"] = fb.certificate.satisfies(claims) == report.satisfies(claims)
    return out, EXIT_OK if ok else EXIT_CERT


def cmd_simulate(args, tol):
    system, _ = _load(args.system, tol)
    fb = load_feedback(args.feedback) if args.feedback else None
    try:
        u = InputSignal.parse(args.input)
    except ValueError as exc:
        raise CommandError(EXIT_INPUT, str(exc)) from exc
    if args.x0 is not None:
        x0 = np.array([complex(v) for v in args.x0.split(",")])
    else:
        x0 = np.random.default_rng(args.seed).standard_normal(system.n)
    try:
        traj = simulate(system, u, x0, args.T, args.h, fb=fb, tol=tol)
    except SimulationError as exc:
        code = EXIT_INPUT if exc.report is None else EXIT_CERT
        payload = {} if exc.report is None else {"report": report_to_json(exc.report)}
        raise CommandError(code, str(exc), payload) from exc
    if args.csv:
        traj.to_csv(args.csv)
    out = traj.summary()
    out["csv"] = args.csv
    out["tolerances"] = tol.to_dict()
    return out, EXIT_OK


def _spec_from_arg(text):
    if text is None:
        return {}
    p = Path(text)
    if not text.lstrip().startswith("{") and p.exists():
        return read_json(p)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CommandError(EXIT_INPUT, f"--spec is neither a file nor JSON: {exc}") from exc


def cmd_generate(args, tol):
    d = _spec_from_arg(args.spec)
    if not isinstance(d, dict):
        raise CommandError(EXIT_INPUT, "--spec must be a JSON object")
    if args.seed is not None:
        d["seed"] = args.seed
    spec = GeneratorSpec.from_dict(d)
    system, truth = generate(spec)
    doc = system_to_json(system)
    if args.out:
        write_json(doc, args.out)
        sidecar = str(args.out) + ".truth.json"
        write_json(truth.to_dict(), sidecar)
        return {"system": str(args.out), "ground_truth": sidecar, "dims": list(truth.dims)}, EXIT_OK
    return {"system": doc, "ground_truth": truth.to_dict()}, EXIT_OK


# ---------------------------------------------------------------- plumbing

def _text(obj, indent=0):
    pad = "  " * indent
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v and not _is_matrix(v):
                lines.append(f"{pad}{k}:")
                lines.extend(_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {_short(v)}")
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, (dict, list)) and not _is_matrix(v):
                lines.append(f"{pad}-")
                lines.extend(_text(v, indent + 1))
            else:
                lines.append(f"{pad}- {_short(v)}")
    else:
        lines.append(f"{pad}{_short(obj)}")
    return lines


def _is_matrix(v):
    return isinstance(v, dict) and {"rows", "cols", "re", "im"} <= set(v)


def _short(v):
    if _is_matrix(v):
        return f"<{v['rows']}x{v['cols']} matrix>"
    if isinstance(v, float):
        return f"{v:.6g}"
    return json.dumps(v) if isinstance(v, (list, dict)) else str(v)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-rank", type=float, help="relative singular value cutoff")
    common.add_argument("--tol-psd", type=float, help="relative PSD tolerance")
    common.add_argument("--stab-margin", type=float, help="required distance of eigenvalues from the axis")
    common.add_argument("--seed", type=int, default=None, help="seed for sampled searches and random data")
    common.add_argument("--format", choices=("json", "text"), default="json")

    ap = argparse.ArgumentParser(prog="phfeedback", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="structural analysis and solvability verdicts")
    p.add_argument("system")

    p = sub.add_parser("synthesize", parents=[common], help="construct a feedback")
    p.add_argument("system")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--rank", type=int, default=None, help="target rank of E + B K B^H (B2, B4)")
    p.add_argument("--derivative", action="store_true", help="stabilise with derivative feedback only")

    p = sub.add_parser("verify", parents=[common], help="certify a feedback independently")
    p.add_argument("system")
    p.add_argument("feedback")

    p = sub.add_parser("simulate", parents=[common], help="integrate the (closed) loop")
    p.add_argument("system")
    p.add_argument("feedback", nargs="?")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--h", type=float, default=1e-2)
    p.add_argument("--input", default="zero", help="zero | step:A[:t0] | sin:A[:f[:phase]] | table:file.csv")
    p.add_argument("--x0", default=None, help="comma separated initial state (default: seeded random)")
    p.add_argument("--csv", default=None, help="write the trajectory here")

    p = sub.add_parser("generate", parents=[common], help="random system with known structure")
    p.add_argument("--spec", default=None, help="generator spec as JSON text or file")
    p.add_argument("--out", default=None, help="system file; ground truth goes to OUT.truth.json")
    return ap


COMMANDS = {"analyze": cmd_analyze, "synthesize": cmd_synthesize, "verify": cmd_verify,
            "simulate": cmd_simulate, "generate": cmd_generate}


def run(argv=None):
    """Run a command; returns ``(exit_code, payload)`` without printing."""
    args = build_parser().parse_args(argv)
    try:
        tol = tolerances(args)
        if args.command != "generate" and args.seed is None:
            args.seed = 0
        payload, code = COMMANDS[args.command](args, tol)
    except CommandError as exc:
        return exc.code, {"error": str(exc), **to_plain(exc.payload)}
    except (InfeasibleError, RangeError) as exc:
        extra = {"failed": exc.failed} if isinstance(exc, InfeasibleError) else {"range": [exc.lo, exc.hi]}
        return EXIT_INFEASIBLE, {"error": str(exc), **extra}
    except CertificationError as exc:
        rep = None if exc.report is None else report_to_json(exc.report)
        return EXIT_CERT, {"error": str(exc), "report": rep}
    except (CondensedFormError, ConditioningError) as exc:
        return EXIT_CERT, {"error": f"numerical failure: {exc}"}
    except (InputFormatError, DimensionError, RankDeficientInputError, NotFullRankError,
            StructuralInconsistencyError, InvalidSystemError, SpecError, ValueError) as exc:
        return EXIT_INPUT, {"error": str(exc)}
    return code, payload


def main(argv=None) -> int:
    args_fmt = "json"
    argv = list(_sys.argv[1:] if argv is None else argv)
    if "--format" in argv:
        i = argv.index("--format")
        if i + 1 < len(argv):
            args_fmt = argv[i + 1]
    code, payload = run(argv)
    if args_fmt == "text":
        text = "\n".join(_text(payload))
    else:
        text = dumps(payload)
    print(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
