"""Command line entry point.

Exit codes: 0 all requested properties match expectations, 1 a property
failed, 2 an instance could not be parsed, 3 a hypothesis of a requested
check was not met.  With several instances the most severe code wins, in the
order 2, 3, 1.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .algebra import Tolerance
from .corpus import GENERATOR_KINDS, GeneratorError, default_corpus, generate
from .gelfand import NotHomomorphic, RetractionError, extract_retraction, unitise_and_extract
from .instances import Instance, InstanceError, Report, certificate_to_dict, load_instance, save_instance
from .jordan import (
    expectation_formulas_check,
    jordan_homomorphism_certificate_cstar,
    positive_unital_projection_certificate,
    triple_homomorphism_certificate,
)
from .maps import is_idempotent
from .verify import central_test, homomorphic_certificate, verify_expectation

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_HYPOTHESIS = 0, 1, 2, 3

TOL_PROFILES = {
    "default": Tolerance(),
    "strict": Tolerance(eq_tol=1e-12, psd_tol=1e-11, rank_tol=1e-12),
    "loose": Tolerance(eq_tol=1e-7, psd_tol=1e-6, rank_tol=1e-7),
}
TOL_ENV = "NCRETRACT_TOL_PROFILE"

_STATUS_CODE = {"pass": EXIT_OK, "fail": EXIT_FAIL, "parse": EXIT_PARSE, "hypothesis": EXIT_HYPOTHESIS}
_SEVERITY = ("parse", "hypothesis", "fail", "pass")


class UsageError(ValueError):
    pass


def profile_tolerance(env=None) -> Tolerance:
    name = (env if env is not None else os.environ).get(TOL_ENV, "default").strip().lower() or "default"
    if name not in TOL_PROFILES:
        raise UsageError(f"{TOL_ENV}={name!r}; choose from {sorted(TOL_PROFILES)}")
    return TOL_PROFILES[name]


def parse_expect(items) -> dict[str, bool]:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        val = val.strip().lower()
        if not sep or not key or val not in ("true", "false", "1", "0", "yes", "no"):
            raise UsageError(f"--expect takes name=true|false, got {item!r}")
        out[key.strip()] = val in ("true", "1", "yes")
    return out


def collect_paths(paths) -> list[Path]:
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(p.glob("*.json")))
        else:
            out.append(p)
    return out


def _resolve(inst: Instance, opts: dict) -> tuple[Tolerance, int]:
    base = inst.tolerance if inst.tolerance != Tolerance() else Tolerance.from_dict(opts["profile"])
    over = {k: v for k, v in (("eq_tol", opts.get("tol_eq")), ("psd_tol", opts.get("tol_psd"))) if v is not None}
    tol = Tolerance(**{**base.to_dict(), **over})
    seed = opts["seed"] if opts.get("seed") is not None else inst.seed
    return tol, seed


def _judge(entry: dict, name: str, holds: bool, expected: bool, cert=None):
    entry["properties"][name] = {"holds": bool(holds), "expected": expected, "matched": bool(holds) == expected}
    if cert is not None:
        entry["certificates"][name] = certificate_to_dict(cert)


def verify_instance(path: str, opts: dict) -> tuple[dict, float]:
    """Run the requested checks on one instance file; returns (report entry, seconds)."""
    t0 = time.perf_counter()
    entry = {"file": Path(path).name, "name": Path(path).stem, "status": "pass", "properties": {},
             "certificates": {}, "notes": []}
    try:
        inst = load_instance(path)
        entry["name"], entry["kind"] = inst.name, inst.kind
        tol, seed = _resolve(inst, opts)
        E = inst.build()
    except InstanceError as exc:
        entry.update(status="parse", error=str(exc))
        return entry, time.perf_counter() - t0
    entry["seed"] = seed
    entry["tolerance"] = tol.to_dict()
    expect = {**inst.expect, **opts.get("expect", {})}
    # for an expectation, the Jordan and triple variants coincide with homomorphy
    for k in ("jordan", "triple", "positive_unital_jordan"):
        if k not in expect and "homomorphic" in expect:
            expect[k] = expect["homomorphic"]
    want = lambda k: expect.get(k, True)  # noqa: E731

    ce = verify_expectation(E, tol, seed)
    _judge(entry, "expectation", ce.holds, want("expectation"), ce)
    requested = ["homomorphic"]
    if opts.get("jordan"):
        requested += ["jordan", "formulas", "positive_unital_jordan"]
    if opts.get("triple"):
        requested.append("triple")
    if opts.get("central"):
        requested.append("central")
    if opts.get("retraction"):
        requested.append("retraction")
    hypothesis = []

    if ce.holds:
        hom = homomorphic_certificate(E, tol, seed, check_hypothesis=False)
        _judge(entry, "homomorphic", hom.holds, want("homomorphic"), hom)
    else:
        # downstream checks assume a conditional expectation
        asked = [k for k in requested if k in expect and k != "triple"]
        if asked:
            hypothesis.append("not a conditional expectation: " + ", ".join(asked))
        entry["notes"].append("skipped: " + ", ".join(requested))

    if ce.holds and opts.get("jordan"):
        jc = jordan_homomorphism_certificate_cstar(E, tol, seed, check_hypothesis=False)
        _judge(entry, "jordan", jc.holds, want("jordan"), jc)
        fc = expectation_formulas_check(E, tol, seed)
        _judge(entry, "formulas", fc.holds, want("formulas"), fc)
        if fc.reason == "HypothesisViolation" and "formulas" not in expect:
            hypothesis.append("formulas: " + ", ".join(fc.extra.get("missing", [])))
        pu = positive_unital_projection_certificate(E, tol, seed)
        if pu.reason == "HypothesisViolation":
            entry["notes"].append("positive_unital_jordan: hypotheses not met (" +
                                  ", ".join(pu.extra.get("missing", [])) + ")")
            entry["certificates"]["positive_unital_jordan"] = certificate_to_dict(pu)
            if "positive_unital_jordan" in expect:
                _judge(entry, "positive_unital_jordan", False, expect["positive_unital_jordan"])
        else:
            _judge(entry, "positive_unital_jordan", pu.holds, want("positive_unital_jordan"), pu)
    if opts.get("triple"):
        # meaningful for any idempotent map, not only expectations
        if E.is_endomorphism and is_idempotent(E, tol):
            tc = triple_homomorphism_certificate(E, tol, seed)
            _judge(entry, "triple", tc.holds, want("triple"), tc)
        elif "triple" in expect:
            hypothesis.append("triple: map is not idempotent")
    if opts.get("central"):
        e = inst.projection()
        if e is None:
            hypothesis.append("central: instance carries no projection")
        else:
            cc = central_test(e, tol, seed)
            _judge(entry, "central", cc.holds, want("central"), cc)
    if opts.get("retraction") and ce.holds:
        if not E.domain.is_commutative:
            hypothesis.append("retraction: algebra is not commutative")
        else:
            info = _extract(inst, E, tol, seed)
            entry["retraction"] = info
            _judge(entry, "retraction", info["status"] == "extracted", want("retraction"))

    if not all(p["matched"] for p in entry["properties"].values()):
        entry["status"] = "fail"
    elif hypothesis:
        entry["status"] = "hypothesis"
    if hypothesis:
        entry["hypothesis"] = hypothesis
    return entry, time.perf_counter() - t0


def _extract(inst: Instance, E, tol: Tolerance, seed: int) -> dict:
    space = inst.space
    try:
        if space is not None and space.basepoint is not None:
            res = unitise_and_extract(E, space.finite_part, tol, seed, omega=space.basepoint)
            return {"status": "extracted", "support": list(res.extraction.support),
                    "rho": [[p, res.rho(p)] for p in res.compactified.points], "basepoint": space.basepoint}
        res = extract_retraction(E, space, tol, seed)
        return {"status": "extracted", "support": list(res.support),
                "tau": [[p, res.tau(p)] for p in res.support] if res.tau is not None else []}
    except NotHomomorphic as exc:
        return {"status": "NotHomomorphic", "gap": exc.gap, "certificate": certificate_to_dict(exc.certificate)}
    except RetractionError as exc:
        return {"status": type(exc).__name__, "error": str(exc)}


def run_verify(paths, opts: dict, jobs: int = 1) -> Report:
    files = [str(p) for p in collect_paths(paths)]
    if jobs > 1 and len(files) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(verify_instance, files, [opts] * len(files)))
    else:
        results = [verify_instance(f, opts) for f in files]
    report = Report(seed=opts.get("seed"))
    for entry, dt in results:
        report.instances.append(entry)
        report.timing[entry["file"]] = dt
    return report


def exit_code(report: Report) -> int:
    statuses = {e["status"] for e in report.instances}
    for s in _SEVERITY:
        if s in statuses:
            return _STATUS_CODE[s]
    return EXIT_OK


# ---------------------------------------------------------------------------
# subcommands


def _opts(args) -> dict:
    return {
        "profile": profile_tolerance().to_dict(),
        "tol_eq": args.tol_eq,
        "tol_psd": args.tol_psd,
        "seed": args.seed,
        "expect": parse_expect(getattr(args, "expect", None)),
        "jordan": getattr(args, "jordan", False),
        "triple": getattr(args, "triple", False),
        "central": getattr(args, "central", False),
        "retraction": getattr(args, "retraction", False),
    }


def _emit(report: Report, args, out) -> None:
    text = report.body_json() if args.no_timing else report.to_json()
    if args.report:
        Path(args.report).write_text(text)
    if args.json:
        out.write(text)
        return
    for e in report.instances:
        props = " ".join(f"{k}={'Holds' if v['holds'] else 'Fails'}" + ("" if v["matched"] else "(!)")
                         for k, v in e["properties"].items())
        line = f"{e['status'].upper():10s} {e['name']}  {props}"
        if "error" in e:
            line += f"  error: {e['error']}"
        if "hypothesis" in e:
            line += "  hypothesis: " + "; ".join(e["hypothesis"])
        out.write(line.rstrip() + "\n")
    s = report.summary()
    out.write(f"{s['instances']} instances: {s['passed']} passed, {s['failed']} failed, "
              f"{s['hypothesis_violations']} hypothesis violations, {s['parse_errors']} parse errors\n")


def cmd_verify(args, out=sys.stdout) -> int:
    report = run_verify(args.paths, _opts(args), args.jobs)
    _emit(report, args, out)
    return exit_code(report)


def cmd_generate(args, out=sys.stdout) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    seed = 0 if args.seed is None else args.seed
    try:
        if args.kind == "corpus":
            insts = default_corpus(seed)
        else:
            sig = [int(v) for v in args.signature.split(",")] if args.signature else None
            insts = generate(args.kind, args.count, seed, size=args.size, signature=sig)
    except (GeneratorError, ValueError) as exc:
        out.write(f"error: {exc}\n")
        return EXIT_PARSE
    for inst in insts:
        save_instance(inst, outdir / f"{inst.name}.json")
    out.write(f"wrote {len(insts)} instances to {outdir}\n")
    return EXIT_OK


def _single(args, out):
    try:
        inst = load_instance(args.path)
        tol, seed = _resolve(inst, _opts(args))
        return inst, inst.build(), tol, seed
    except InstanceError as exc:
        out.write(json.dumps({"status": "parse", "error": str(exc)}) + "\n")
        return None


def _dump(obj, out):
    out.write(json.dumps(obj, indent=1, sort_keys=True, default=str) + "\n")


def cmd_extract_retraction(args, out=sys.stdout) -> int:
    got = _single(args, out)
    if got is None:
        return EXIT_PARSE
    inst, E, tol, seed = got
    if not E.domain.is_commutative:
        _dump({"status": "hypothesis", "error": "algebra is not commutative"}, out)
        return EXIT_HYPOTHESIS
    ce = verify_expectation(E, tol, seed)
    if not ce.holds:
        _dump({"status": "hypothesis", "error": f"not a conditional expectation ({ce.reason})"}, out)
        return EXIT_HYPOTHESIS
    info = _extract(inst, E, tol, seed)
    info.pop("certificate", None) if not args.verbose else None
    _dump({"name": inst.name, **info}, out)
    return EXIT_OK if info["status"] == "extracted" else EXIT_FAIL


def cmd_central_test(args, out=sys.stdout) -> int:
    got = _single(args, out)
    if got is None:
        return EXIT_PARSE
    inst, _E, tol, seed = got
    e = inst.projection()
    if e is None:
        _dump({"status": "parse", "error": "instance carries no projection (use a central or corner map)"}, out)
        return EXIT_PARSE
    cert = central_test(e, tol, seed)
    expected = parse_expect(args.expect).get("central", True)
    _dump({"name": inst.name, "certificate": certificate_to_dict(cert)}, out)
    return EXIT_OK if cert.holds == expected else EXIT_FAIL


def cmd_gap(args, out=sys.stdout) -> int:
    got = _single(args, out)
    if got is None:
        return EXIT_PARSE
    inst, E, tol, seed = got
    ce = verify_expectation(E, tol, seed)
    if not ce.holds:
        _dump({"status": "hypothesis", "error": f"not a conditional expectation ({ce.reason})"}, out)
        return EXIT_HYPOTHESIS
    cert = homomorphic_certificate(E, tol, seed, check_hypothesis=False)
    res = {"name": inst.name, "verdict": cert.verdict, "gap": cert.scalars.get("gap", 0.0)}
    if args.witness:
        res["witness"] = certificate_to_dict(cert)["witness"].get("x")
        res["scalars"] = cert.scalars
    _dump(res, out)
    expected = parse_expect(args.expect).get("homomorphic", True)
    return EXIT_OK if cert.holds == expected else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-eq", type=float, default=None, help="equality tolerance")
    common.add_argument("--tol-psd", type=float, default=None, help="positivity tolerance")
    common.add_argument("--seed", type=int, default=None, help="seed for sampled checks")
    common.add_argument("--expect", action="append", metavar="NAME=BOOL", default=[],
                        help="expected verdict of a property (repeatable)")

    p = argparse.ArgumentParser(prog="ncretract", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ncretract {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="verify instance files or directories")
    v.add_argument("paths", nargs="+")
    v.add_argument("--jordan", action="store_true", help="Jordan homomorphism, formula chains, positive-unital test")
    v.add_argument("--triple", action="store_true", help="triple homomorphism certificate")
    v.add_argument("--central", action="store_true", help="centrality test for the instance projection")
    v.add_argument("--retraction", action="store_true", help="extract a retraction (commutative instances)")
    v.add_argument("--report", help="write the JSON report here")
    v.add_argument("--json", action="store_true", help="print the JSON report instead of a summary")
    v.add_argument("--no-timing", action="store_true", help="omit elapsed times from the report")
    v.add_argument("--jobs", type=int, default=1)
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("generate", parents=[common], help="write seeded instance files")
    g.add_argument("kind", choices=GENERATOR_KINDS + ("corpus",))
    g.add_argument("--out", required=True)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--size", type=int, default=None)
    g.add_argument("--signature", default=None, help="block sizes, e.g. 2,3")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("extract-retraction", parents=[common], help="recover L and tau")
    r.add_argument("path")
    r.add_argument("--verbose", action="store_true", help="include the failing certificate")
    r.set_defaults(func=cmd_extract_retraction)

    c = sub.add_parser("central-test", parents=[common], help="centrality of the instance projection")
    c.add_argument("path")
    c.set_defaults(func=cmd_central_test)

    n = sub.add_parser("gap", parents=[common], help="norm gap of the homomorphism certificate")
    n.add_argument("path")
    n.add_argument("--witness", action="store_true", help="print the witness element")
    n.set_defaults(func=cmd_gap)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except UsageError as exc:
        out.write(f"error: {exc}\n")
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
