"""Command-line entry point: ``ftlab run | verify | emit-fig``.

Exit codes: 0 when every check passes, 1 when any check fails, 2 for usage,
format or budget errors. ``FTLAB_THREADS`` caps the worker count.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .ensemble import SCENARIOS, EnsembleConfig, emit_fig, run_ensemble, verify_instance, write_csv
from .errors import FtlabError, PreconditionError

log = logging.getLogger("ftlab")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ftlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ftlab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="sample a seeded ensemble and check every relation")
    r.add_argument("--sites", type=int, default=3)
    r.add_argument("--scenario", choices=SCENARIOS, default="random")
    r.add_argument("--samples", type=int, default=1000)
    r.add_argument("--seed", type=int, default=42)
    r.add_argument("--local-dim", type=int, default=2)
    r.add_argument("--env-dim", type=int, default=2)
    r.add_argument("--no-quasi", action="store_true", help="skip the quasi-probability relations")
    r.add_argument("--dump-dist", action="store_true", help="write every distribution as JSONL")
    r.add_argument("--budget", type=int, default=None, help="max enumerated terms per instance")
    r.add_argument("--out", required=True, help="results CSV")

    v = sub.add_parser("verify", help="check one instance file")
    v.add_argument("--instance", required=True)
    v.add_argument("--report", required=True, help="JSON report path")
    v.add_argument("--no-quasi", action="store_true")

    f = sub.add_parser("emit-fig", help="turn a results CSV into plot-ready data")
    f.add_argument("--results", required=True)
    f.add_argument("--which", choices=("ift", "moments"), required=True)
    f.add_argument("--out", required=True)
    return p


def _run(args) -> int:
    kw = dict(
        sites=args.sites, local_dim=args.local_dim, env_dim=args.env_dim, samples=args.samples,
        scenario=args.scenario, seed=args.seed, compute_quasi=not args.no_quasi,
        dump_distributions=args.dump_dist, out=args.out,
    )
    if args.budget is not None:
        kw["budget"] = args.budget
    cfg = EnsembleConfig(**kw)
    records = run_ensemble(cfg)
    with open(args.out, "w", newline="") as fh:
        write_csv(records, cfg, fh)
    bad = [r.sample_id for r in records if r.failed or not r.report.all_pass]
    log.info("%d samples, %d with a failing check", len(records), len(bad))
    if bad:
        print(f"{len(bad)} of {len(records)} samples failed a check (first: {bad[:10]})", file=sys.stderr)
    return 1 if bad else 0


def _verify(args) -> int:
    try:
        report = verify_instance(args.instance, args.report, compute_quasi=not args.no_quasi)
    except PreconditionError as exc:
        Path(args.report).write_text(json.dumps({"instance_id": Path(args.instance).stem, "error": str(exc)}))
        print(f"error: {exc}", file=sys.stderr)
        return 1
    failing = [k for k, ok in report.passes.items() if not ok]
    if failing:
        print(f"failing checks: {', '.join(failing)}", file=sys.stderr)
    return 1 if failing else 0


def _emit(args) -> int:
    summary = emit_fig(args.results, args.which, args.out)
    print(json.dumps(summary, indent=2))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": _run, "verify": _verify, "emit-fig": _emit}
    try:
        return handlers[args.command](args)
    except FtlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
