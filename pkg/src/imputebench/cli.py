"""``impute-bench`` command line: synth, run, report."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench.report import emit_report, read_records, read_usage
from .bench.runner import RunConfig, run_benchmark
from .errors import ImputeBenchError
from .llm.pipeline import RetryPolicy
from .rng import derive_seed
from .synthgen import write_suite

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2


def _cmd_synth(args) -> int:
    manifest = write_suite(args.out, args.seed)
    print(f"wrote {manifest}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = RunConfig.from_file(args.config)
    overrides = {}
    if args.methods:
        overrides["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if args.provider:
        overrides["provider"] = args.provider
    if args.script:
        overrides["mock_script"] = str(Path(args.script).resolve())
    if args.out:
        overrides["output_dir"] = str(Path(args.out).resolve())
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.no_timing:
        overrides["record_timing"] = False
    if args.jobs:
        overrides["n_jobs"] = args.jobs
    if args.base_delay is not None:
        r = cfg.retry
        overrides["retry"] = RetryPolicy(r.max_retries, args.base_delay, r.backoff_factor)
    if overrides:
        cfg = RunConfig(**{**{k: getattr(cfg, k) for k in cfg.__dataclass_fields__}, **overrides})

    result = run_benchmark(cfg)
    out = cfg.resolve(cfg.output_dir)
    seeds = {name: derive_seed(cfg.master_seed, "folds", name)
             for name in sorted({r.dataset for r in result.records})}
    emit_report(result.records, result.ledgers, out, config=cfg.to_dict(), seeds=seeds,
                failures=result.failures, timing=cfg.record_timing)
    print(f"{len(result.records)} records, {len(result.failures)} failures -> {out}")
    return EXIT_OK if result.ok else EXIT_PARTIAL


def _cmd_report(args) -> int:
    records = read_records(args.records)
    usage = Path(args.usage) if args.usage else Path(args.records).with_name("usage.csv")
    ledgers = read_usage(usage) if usage.exists() else {}
    emit_report(records, ledgers, args.out)
    print(f"report for {len(records)} records -> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="impute-bench", description="Missing-data imputation benchmark harness")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write the nine synthetic datasets and a manifest")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_synth)

    r = sub.add_parser("run", help="run an experiment grid from a TOML/JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--provider", help="'mock', a builtin profile name, or a profile file")
    r.add_argument("--script", help="mock behaviour script, one token per line")
    r.add_argument("--methods", help="comma-separated subset of mean,knn,mice,softimpute,missforest,llm")
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.add_argument("--jobs", type=int)
    r.add_argument("--base-delay", type=float, help="retry backoff base delay in seconds")
    r.add_argument("--no-timing", action="store_true", help="record zero runtimes for byte-reproducible output")
    r.set_defaults(func=_cmd_run)

    rep = sub.add_parser("report", help="rebuild summary tables from records.csv")
    rep.add_argument("--records", required=True)
    rep.add_argument("--usage")
    rep.add_argument("--out", required=True)
    rep.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ImputeBenchError, OSError, ValueError) as exc:
        print(f"impute-bench: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
