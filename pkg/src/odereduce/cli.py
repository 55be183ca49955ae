"""Command-line frontend: load a problem file, run a pipeline, write reports."""

from __future__ import annotations

import argparse
import fnmatch
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Optional

from . import __version__
from .errors import InternalVerificationFailed, OdeReduceError, ProblemFileError, VerifyError
from .pipeline import (Outcome, exact_check_spec, exact_integrate_spec, functional_spec,
                       jsonable, reduce_spec, solve_spec, verify_spec)
from .problemfile import load_problem

EXIT_PASS = 0
EXIT_INPUT = 1
EXIT_FAIL = 2


def corpus_dir() -> Path:
    return Path(str(resources.files("odereduce") / "corpus"))


def corpus_files(pattern: Optional[str] = None) -> list[Path]:
    files = sorted(corpus_dir().glob("*.prob"))
    if pattern:
        files = [f for f in files if fnmatch.fnmatch(f.stem, pattern)]
    return files


def resolve(path: str) -> Path:
    """A problem file path, or the name of a bundled corpus entry."""
    p = Path(path)
    if p.exists():
        return p
    bundled = corpus_dir() / f"{p.stem if p.suffix == '.prob' else p.name}.prob"
    return bundled if bundled.exists() else p


def _dump(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=False) + "\n"


def write_outcome(out: Outcome, outdir: Path, timestamp: bool) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    report = dict(out.report)
    if timestamp:
        report["generated_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    path = outdir / f"{out.name}.report.json"
    path.write_text(_dump(report))
    if out.csv is not None:
        (outdir / f"{out.name}.traj.csv").write_text(out.csv)
    for suffix, text in (out.extra_files or {}).items():
        (outdir / f"{out.name}.{suffix}").write_text(text)
    return path


def error_object(exc: Exception, command: str, source: Optional[str] = None) -> dict:
    if isinstance(exc, OdeReduceError):
        err = exc.to_dict()
    else:
        err = {"type": type(exc).__name__, "message": str(exc)}
    out = {"command": command, "error": err, "pass": False}
    if source:
        out["source"] = source
    return out


def _run(command: str, args: argparse.Namespace) -> Outcome:
    spec = load_problem(resolve(args.file))
    if command == "reduce":
        return reduce_spec(spec)
    if command == "solve":
        return solve_spec(spec, args.tol, args.grid)
    if command == "exact check":
        return exact_check_spec(spec)
    if command == "exact integrate":
        return exact_integrate_spec(spec, args.tol, args.grid)
    if command == "verify":
        return verify_spec(spec, args.solution, args.grid)
    if command == "functional":
        return functional_spec(spec, args.y, args.eta, force=args.force)
    raise ProblemFileError(f"unknown command {command!r}", operation="cli")


def run_single(command: str, args: argparse.Namespace) -> int:
    outdir = Path(args.out)
    try:
        out = _run(command, args)
    except OdeReduceError as exc:
        err = error_object(exc, command, args.file)
        sys.stdout.write(_dump(err))
        stem = Path(args.file).name.split(".")[0]
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / f"{stem}.error.json").write_text(_dump(err))
        return EXIT_FAIL if _is_check_failure(exc) else EXIT_INPUT
    path = write_outcome(out, outdir, not args.no_timestamp)
    sys.stdout.write(_dump({"name": out.name, "command": command, "pass": out.passed,
                            "report": str(path)}))
    return EXIT_PASS if out.passed else EXIT_FAIL


def _is_check_failure(exc: OdeReduceError) -> bool:
    """Errors raised by a failed check; everything else is an input problem."""
    return isinstance(exc, (VerifyError, InternalVerificationFailed))


def corpus_entry(path: str, tol: float, grid: Optional[int]) -> tuple[str, Optional[Outcome],
                                                                    Optional[dict]]:
    """Run one bundled problem; quasi-linear entries use the exact-integrate pipeline."""
    name = Path(path).name.split(".")[0]
    try:
        spec = load_problem(path)
        if spec.kind == "quasilinear":
            return name, exact_integrate_spec(spec, tol, grid), None
        return name, solve_spec(spec, tol, grid), None
    except OdeReduceError as exc:
        return name, None, error_object(exc, "corpus", path)


def run_corpus(args: argparse.Namespace) -> int:
    files = corpus_files(args.filter)
    if not files:
        sys.stdout.write(_dump(error_object(
            ProblemFileError(f"no corpus entry matches {args.filter!r}", operation="corpus"),
            "corpus")))
        return EXIT_INPUT
    outdir = Path(args.out)
    jobs = max(1, args.jobs or 1)
    todo = [str(f) for f in files]
    if jobs == 1:
        results = [corpus_entry(f, args.tol, args.grid) for f in todo]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(corpus_entry, todo, [args.tol] * len(todo),
                                    [args.grid] * len(todo)))
    summary = []
    status = EXIT_PASS
    for name, out, err in results:
        if err is not None:
            outdir.mkdir(parents=True, exist_ok=True)
            (outdir / f"{name}.error.json").write_text(_dump(err))
            summary.append({"name": name, "pass": False, "error": err["error"]})
            status = max(status, EXIT_FAIL)
            continue
        write_outcome(out, outdir, not args.no_timestamp)
        summary.append({"name": name, "command": out.command, "pass": out.passed})
        if not out.passed:
            status = max(status, EXIT_FAIL)
    doc = {"corpus": summary, "passed": sum(s["pass"] for s in summary), "total": len(summary)}
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "corpus.summary.json").write_text(_dump(doc))
    for s in summary:
        print(f"{'PASS' if s['pass'] else 'FAIL'}  {s['name']}")
    print(f"{doc['passed']}/{doc['total']} corpus entries pass")
    return status


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-9,
                        help="integrator tolerance for RK checks (default 1e-9)")
    common.add_argument("--out", default="./out", help="output directory (default ./out)")
    common.add_argument("--grid", type=int, default=None,
                        help="residual grid points (default 257 or the problem file's value)")
    common.add_argument("--jobs", type=int, default=1, help="parallel corpus workers")
    common.add_argument("--no-timestamp", action="store_true",
                        help="omit generated_at so reports are byte-reproducible")

    p = argparse.ArgumentParser(prog="odereduce", description=__doc__)
    p.add_argument("--version", action="version", version=f"odereduce {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    for name, text in (("reduce", "reduce a problem and report the transformed equation"),
                       ("solve", "solve a problem and verify the solution")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("file")

    ex = sub.add_parser("exact", help="exactness tools for quasi-linear problems")
    exsub = ex.add_subparsers(dest="action", required=True)
    for name, text in (("check", "classify exact / not-exact / exact-after-mu"),
                       ("integrate", "build the first integral and check conservation")):
        s = exsub.add_parser(name, parents=[common], help=text)
        s.add_argument("file")

    v = sub.add_parser("verify", parents=[common], help="residual-check a candidate solution")
    v.add_argument("file")
    v.add_argument("--solution", required=True, help="candidate y(x) expression")

    f = sub.add_parser("functional", parents=[common],
                       help="stationarity of Q[y] under a perturbation")
    f.add_argument("file")
    f.add_argument("--y", required=True, help="candidate extremal y(x)")
    f.add_argument("--eta", required=True, help="perturbation vanishing at the endpoints")
    f.add_argument("--force", action="store_true",
                   help="evaluate even when y fails the Euler-Lagrange precondition")

    c = sub.add_parser("corpus", parents=[common], help="run the bundled example corpus")
    c.add_argument("--filter", default=None, help="glob on entry names, e.g. 'ex4*'")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_PASS
    if args.command == "corpus":
        return run_corpus(args)
    command = f"exact {args.action}" if args.command == "exact" else args.command
    return run_single(command, args)


if __name__ == "__main__":
    sys.exit(main())
