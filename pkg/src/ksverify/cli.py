"""Command-line front end: ``ksverify {generate,verify,fwt,twin,perturb}``.

Exit codes: 0 success or expected result, 1 verification failure, 2 usage
or I/O error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .config import (
    Configuration,
    ConfigurationError,
    build_peres_configuration,
    configuration_to_csv,
    configuration_to_json,
    load_configuration,
    perturbation_check,
    quadruple_count,
    symmetry_group,
)
from .fwt import (
    DEFAULT_DRAW_BUDGET,
    STRATEGIES,
    derandomization_report,
    fwt_reduction_check,
    generate_tapes,
    tapes_from_json,
    tapes_to_json,
)
from .quantum import sample_run, twin_disagreement
from .solver import (
    CertificateError,
    UnsatCertificate,
    build_constraints,
    certificate_failure,
    render_certificate,
    search_101,
)

SCHEMA_VERSION = 1

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class VerificationFailure(Exception):
    pass


def _load(args) -> Configuration:
    if args.config is None:
        return build_peres_configuration()
    try:
        return load_configuration(args.config)
    except OSError as exc:
        raise UsageError(f"cannot read configuration {args.config}: {exc}") from exc
    except (ConfigurationError, json.JSONDecodeError) as exc:
        raise UsageError(f"invalid configuration {args.config}: {exc}") from exc


def _header(args, command: str, config: Configuration, run_config: dict) -> dict:
    header = {
        "schema_version": SCHEMA_VERSION,
        "tool": f"ksverify {__version__}",
        "command": command,
        "run_config": {
            "config": args.config,
            "format": args.format,
            "seed": args.seed,
            **run_config,
        },
        "config_hash": config.config_hash,
    }
    if not args.no_timestamp:
        header["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return header


def _emit(args, text: str) -> None:
    if args.output is None:
        sys.stdout.write(text)
        return
    try:
        Path(args.output).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write {args.output}: {exc}") from exc


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _text(lines) -> str:
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ commands


def cmd_generate(args) -> int:
    config = _load(args)
    header = _header(args, "generate", config, {})
    if args.format == "csv":
        comment = "".join(f"# {line}\n" for line in json.dumps(header, sort_keys=True).splitlines())
        _emit(args, comment + configuration_to_csv(config))
    elif args.format == "text":
        lines = [f"{config.n_rays} rays, {len(config.orthogonal_pairs)} orthogonal pairs, "
                 f"{len(config.internal_triples)} internal triples, {len(config.completion_triples)} completion triples"]
        lines += [f"{i:3d}  {r}" for i, r in enumerate(config.rays)]
        _emit(args, _text(lines))
    else:
        _emit(args, _dump({"meta": header, **configuration_to_json(config)}))
    return EXIT_OK


def _self_checks(config: Configuration, builtin: bool) -> dict:
    checks = {
        "rays": config.n_rays,
        "orthogonal_pairs": len(config.orthogonal_pairs),
        "internal_triples": len(config.internal_triples),
        "completion_triples": len(config.completion_triples),
        "triples": config.n_triples,
        "quadruples": quadruple_count(config),
    }
    if builtin:
        want = {"rays": 33, "orthogonal_pairs": 72, "internal_triples": 16, "completion_triples": 24,
                "triples": 40, "quadruples": 1320}
        for key, value in want.items():
            if checks[key] != value:
                raise VerificationFailure(f"self-check '{key}' failed: {checks[key]} != {value}")
    return checks


def cmd_verify(args) -> int:
    config = _load(args)
    builtin = args.config is None
    checks = _self_checks(config, builtin)
    constraints = build_constraints(config)
    symmetries = [g.permutation for g in symmetry_group(config)] if args.wlog else ()
    result = search_101(constraints, "certify" if args.certify else "decide", symmetries=symmetries)
    body = {
        "self_checks": checks,
        "constraints_hash": constraints.constraint_hash,
        "status": result.status,
        "search_nodes": result.nodes,
        "symmetry_pruning": bool(args.wlog),
    }
    failure = None
    if result.satisfiable:
        body["model"] = list(result.model)
        if builtin:
            failure = "a 101 function was found for the Peres configuration"
    elif args.certify:
        path = Path(args.certificate)
        try:
            path.write_text(result.certificate.to_jsonl(), encoding="utf-8")
            reread = UnsatCertificate.from_jsonl(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"cannot write certificate {path}: {exc}") from exc
        reason = certificate_failure(reread, constraints)
        body["certificate"] = {
            "path": str(path),
            "steps": len(reread.steps),
            "valid": reason is None,
        }
        if reason is not None:
            body["certificate"]["failure"] = reason
            failure = f"certificate rejected: {reason}"

    header = _header(args, "verify", config, {"certify": args.certify, "certificate": args.certificate if args.certify else None,
                                              "wlog": args.wlog})
    if args.format == "text":
        lines = [result.status]
        if result.satisfiable:
            lines.append("model: " + "".join(map(str, result.model)))
        if "certificate" in body:
            lines.append(f"certificate {body['certificate']['path']}: {len(reread.steps)} steps, "
                         f"{'valid' if body['certificate']['valid'] else 'INVALID'}")
            if args.wlog:
                lines.append(render_certificate(reread))
        _emit(args, _text(lines))
    else:
        _emit(args, _dump({"meta": header, **body}))
    if failure:
        raise VerificationFailure(failure)
    return EXIT_OK


def cmd_fwt(args) -> int:
    config = _load(args)
    builtin = args.config is None
    report = fwt_reduction_check(config)
    body = {"reduction": report.to_json()}
    failure = None
    if builtin and report.status != "UNSAT":
        failure = "the reduction found response tables for the Peres configuration"

    run_config = {"derandomize": args.derandomize}
    if args.derandomize:
        n_quads = quadruple_count(config)
        if args.tapes:
            try:
                tapes = tapes_from_json(json.loads(Path(args.tapes).read_text(encoding="utf-8")))
            except (OSError, ValueError) as exc:
                raise UsageError(f"cannot read tapes {args.tapes}: {exc}") from exc
        else:
            tapes = generate_tapes(n_quads, args.draw_budget, args.seed)
        if args.write_tapes:
            try:
                Path(args.write_tapes).write_text(json.dumps(tapes_to_json(tapes)) + "\n", encoding="utf-8")
            except OSError as exc:
                raise UsageError(f"cannot write tapes {args.write_tapes}: {exc}") from exc
        try:
            derand = derandomization_report(config, tapes, STRATEGIES[args.strategy], args.draw_budget)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        body["derandomization"] = derand.to_json()
        run_config.update(strategy=args.strategy, tapes=args.tapes, draw_budget=args.draw_budget)
        if report.status == "UNSAT" and derand.first_violation is None:
            failure = "derandomized strategy passed every check on an UNSAT configuration"

    header = _header(args, "fwt", config, run_config)
    if args.format == "text":
        lines = list(report.narrative())
        if "derandomization" in body:
            v = body["derandomization"]["first_violation"]
            lines.append(f"strategy {args.strategy}: " + ("no violation" if v is None else
                         f"{v['kind']} violation at quadruple {v['quadruple']} (triple {v['triple']}, w {v['w']}): {v['detail']}"))
        _emit(args, _text(lines))
    else:
        _emit(args, _dump({"meta": header, **body}))
    if failure:
        raise VerificationFailure(failure)
    return EXIT_OK


def cmd_twin(args) -> int:
    config = _load(args)
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    if not 0 <= args.triple < config.n_triples:
        raise UsageError(f"--triple must be in 0..{config.n_triples - 1}")
    members = config.triple_members(args.triple)
    w_id = members[0] if args.w is None else args.w
    if not 0 <= w_id < config.n_rays:
        raise UsageError(f"--w must be in 0..{config.n_rays - 1}")

    frame = [r.to_float() for r in config.triple_rays(args.triple)]
    run = sample_run(frame, config.rays[w_id].to_float(), args.n, args.seed, triple_id=args.triple, w_id=w_id)
    body = {
        "triple": args.triple,
        "triple_members": list(members),
        "w": w_id,
        "w_is_member": w_id in members,
        "n": args.n,
        "prng": "numpy PCG64",
        "cells": run.cells_json(),
        "all_within_3sigma": all(c["within_3sigma"] for c in run.cells_json()),
        "b_marginal_exact": run.exact.marginal_b(),
    }
    failure = None
    if w_id in members:
        pos = members.index(w_id)
        agree = run.agreements(pos)
        body["exact_disagreement"] = twin_disagreement(run.exact, pos)
        body["agreements"] = agree
        if agree != args.n:
            failure = f"TWIN: only {agree}/{args.n} runs agreed"

    if args.log:
        try:
            Path(args.log).write_text(run.log_csv(), encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot write log {args.log}: {exc}") from exc
    header = _header(args, "twin", config, {"n": args.n, "triple": args.triple, "w": w_id, "log": args.log})
    if args.format == "csv":
        _emit(args, run.log_csv())
    elif args.format == "text":
        lines = [f"triple {args.triple} {list(members)}, w = {w_id}, n = {args.n}, seed = {args.seed}"]
        for c in body["cells"]:
            lines.append(f"a={''.join(map(str, c['a']))} b={c['b']}  exact={c['exact']:.6f}  "
                         f"empirical={c['empirical']:.6f}  {'ok' if c['within_3sigma'] else 'OUTSIDE 3 sigma'}")
        if "agreements" in body:
            lines.append(f"agreement {body['agreements']}/{args.n}")
        _emit(args, _text(lines))
    else:
        _emit(args, _dump({"meta": header, **body}))
    if failure:
        raise VerificationFailure(failure)
    return EXIT_OK


def cmd_perturb(args) -> int:
    config = _load(args)
    try:
        report = perturbation_check(config, args.epsilon, args.trials, args.seed, workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    header = _header(args, "perturb", config, {"epsilon": args.epsilon, "trials": args.trials})
    if args.format == "text":
        _emit(args, _text([f"epsilon {args.epsilon}: structure preserved in "
                           f"{args.trials - len(report.violations)}/{args.trials} trials"]))
    else:
        _emit(args, _dump({"meta": header, **report.to_json()}))
    return EXIT_OK


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", default=None, help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv", "text"), default="json")
    common.add_argument("--seed", type=int, default=42, help="PRNG seed (default 42)")
    common.add_argument("--no-timestamp", action="store_true", help="omit generated_at for byte-reproducible output")
    common.add_argument("--config", default=None, help="import a configuration JSON instead of the Peres set")

    parser = argparse.ArgumentParser(prog="ksverify", description="Machine checks for the Peres 33-ray Kochen-Specker argument")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="emit the ray configuration")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("verify", parents=[common], help="decide 101-colorability")
    p.add_argument("--certify", action="store_true", help="write and re-verify an UNSAT certificate")
    p.add_argument("--certificate", default="ks_certificate.jsonl", help="certificate path (with --certify)")
    p.add_argument("--wlog", action="store_true", help="prune symmetric cases (signed coordinate permutations)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("fwt", parents=[common], help="check the free-will reduction")
    p.add_argument("--derandomize", action="store_true", help="also evaluate a stochastic strategy on fixed tapes")
    p.add_argument("--tapes", default=None, help="tapes JSON (default: generated from --seed)")
    p.add_argument("--write-tapes", default=None, help="save the tapes used")
    p.add_argument("--strategy", choices=sorted(STRATEGIES), default="constant")
    p.add_argument("--draw-budget", type=int, default=DEFAULT_DRAW_BUDGET)
    p.set_defaults(func=cmd_fwt)

    p = sub.add_parser("twin", parents=[common], help="sample the twinned experiment")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--triple", type=int, default=0, help="triple index (internal triples first)")
    p.add_argument("--w", type=int, default=None, help="ray index for B (default: the triple's first member)")
    p.add_argument("--log", default=None, help="write the per-run CSV log here")
    p.set_defaults(func=cmd_twin)

    p = sub.add_parser("perturb", parents=[common], help="jitter the rays and recheck orthogonality")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_perturb)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ksverify {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VerificationFailure as exc:
        print(f"ksverify {args.command}: verification failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (CertificateError, ConfigurationError) as exc:
        print(f"ksverify {args.command}: verification failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
