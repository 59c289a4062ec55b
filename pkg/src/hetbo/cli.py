"""Command-line entry points: run, ablate, summarize."""

from __future__ import annotations

import argparse
import csv
import logging
from dataclasses import replace
from pathlib import Path

from .harness import (
    ExperimentConfig,
    RunRecord,
    run_ablation,
    run_experiment,
    summarize,
    write_records_csv,
    write_summary_csv,
)


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_json(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["base_seed"] = args.seed
    if getattr(args, "replications", None) is not None:
        overrides["replications"] = args.replications
    if getattr(args, "out", None) is not None:
        overrides["output_dir"] = args.out
    if getattr(args, "jobs", None) is not None:
        overrides["jobs"] = args.jobs
    return replace(config, **overrides) if overrides else config


def _cmd_run(args) -> int:
    config = _load_config(args)
    records = run_experiment(config)
    out = Path(config.output_dir)
    write_records_csv(records, out / "records.csv")
    write_summary_csv(summarize(records), out / "summary.csv")
    print(f"wrote {out / 'records.csv'} and {out / 'summary.csv'}")
    return 0


def _cmd_ablate(args) -> int:
    config = _load_config(args)
    levels = [int(s) for s in args.levels.split(",")]
    run_ablation(config, levels)
    print(f"wrote per-level records and summaries to {config.output_dir}")
    return 0


def _read_records_csv(path) -> list[RunRecord]:
    import numpy as np

    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        xcols = [c for c in reader.fieldnames if c.startswith("x_")]
        for row in reader:
            records.append(RunRecord(
                method=row["method"],
                replication=int(row["replication"]),
                iteration=int(row["iteration"]),
                x=np.array([float(row[c]) for c in xcols]),
                y=float(row["y"]),
                best_so_far=float(row["best_so_far"]),
            ))
    return records


def _cmd_summarize(args) -> int:
    records = []
    for path in sorted(Path(args.indir).glob("records*.csv")):
        records.extend(_read_records_csv(path))
    if not records:
        raise SystemExit(f"no records*.csv files under {args.indir}")
    write_summary_csv(summarize(records), args.out)
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = argparse.ArgumentParser(prog="hetbo",
                                     description="Transfer-learning BO benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--replications", type=int)
    p_run.add_argument("--out")
    p_run.add_argument("--jobs", type=int)
    p_run.set_defaults(func=_cmd_run)

    p_abl = sub.add_parser("ablate", help="sweep source-trial counts")
    p_abl.add_argument("--config", required=True)
    p_abl.add_argument("--levels", required=True, help="comma-separated, e.g. 10,30,50")
    p_abl.add_argument("--seed", type=int)
    p_abl.add_argument("--replications", type=int)
    p_abl.add_argument("--out")
    p_abl.add_argument("--jobs", type=int)
    p_abl.set_defaults(func=_cmd_ablate)

    p_sum = sub.add_parser("summarize", help="summarize stored records")
    p_sum.add_argument("--in", dest="indir", required=True)
    p_sum.add_argument("--out", required=True)
    p_sum.set_defaults(func=_cmd_summarize)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
