"""Seeded benchmark harness: replication loop, CSV persistence, summaries.

Every random stream is derived from (base_seed, replication, role) through a
64-bit splitmix-style mixer, so replications are independent work units and
every method inside a replication shares the same initial target points and
the same source data.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .acquisition import suggest
from .benchmarks import Problem, hartmann_heterogeneous, load_tabular
from .errors import FitFailed, InsufficientReplications, NotPositiveDefinite, SchemaError
from .models import ModelKind, ObservationSet, build_model

log = logging.getLogger(__name__)

METHODS = (
    "RANDOM",
    "VANILLA",
    "CONDITIONAL_MTGP",
    "COMMON_PARAMS_MTGP",
    "IMPUTED_MTGP_FIXED",
    "IMPUTED_MTGP_LEARNED",
)


@dataclass(frozen=True)
class ExperimentConfig:
    problem: object  # benchmark name or {"tabular": path, ...}
    methods: tuple[str, ...] = METHODS
    n_init: int = 4
    budget: int = 30
    source_trials_per_task: int = 30
    replications: int = 20
    base_seed: int = 0
    output_dir: str = "results"
    n_restarts: int = 2
    jobs: int = 1

    def __post_init__(self):
        if self.budget < 1 or self.replications < 1 or self.n_init < 1:
            raise ValueError("budget, replications and n_init must be >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods: {bad}")
        object.__setattr__(self, "methods", tuple(self.methods))

    @staticmethod
    def from_json(path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (json.JSONDecodeError, OSError) as exc:
            raise SchemaError(f"cannot read config {path}: {exc}") from exc
        known = {
            "problem", "methods", "n_init", "budget", "source_trials_per_task",
            "replications", "base_seed", "output_dir", "n_restarts", "jobs",
        }
        kwargs = {k: v for k, v in raw.items() if k in known}
        if "problem" not in kwargs:
            raise SchemaError("config needs a 'problem' entry")
        if "methods" in kwargs:
            kwargs["methods"] = tuple(kwargs["methods"])
        return ExperimentConfig(**kwargs)


@dataclass(frozen=True)
class RunRecord:
    method: str
    replication: int
    iteration: int
    x: np.ndarray
    y: float
    best_so_far: float


def _mix64(v: int) -> int:
    """splitmix64 finalizer."""
    v = (v + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    v = ((v ^ (v >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    v = ((v ^ (v >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return (v ^ (v >> 31)) & 0xFFFFFFFFFFFFFFFF


def derive_seed(base_seed: int, replication: int, role: str) -> int:
    """Independent deterministic stream id for (base_seed, replication, role)."""
    state = _mix64(base_seed & 0xFFFFFFFFFFFFFFFF)
    state = _mix64((state + replication) & 0xFFFFFFFFFFFFFFFF)
    for b in role.encode("utf-8"):
        state = _mix64(state ^ b)
    return state


def resolve_problem(spec) -> Problem:
    if spec == "hartmann_heterogeneous":
        return hartmann_heterogeneous()
    if isinstance(spec, dict) and "tabular" in spec:
        return load_tabular(
            spec["tabular"],
            target_task_id=int(spec["target_task_id"]),
            source_task_ids=[int(s) for s in spec["source_task_ids"]],
        )
    raise SchemaError(f"unknown problem spec {spec!r}")


def _run_replication(config: ExperimentConfig, r: int) -> list[RunRecord]:
    problem = resolve_problem(config.problem)
    target = problem.tasks[problem.target_task]
    d = target.dim

    init_rng = np.random.default_rng(derive_seed(config.base_seed, r, "init"))
    init_x = init_rng.uniform(size=(config.n_init, d))
    init_y = [problem.evaluate(x) for x in init_x]

    source_obs = {
        t: problem.source_generator(
            t, config.source_trials_per_task,
            derive_seed(config.base_seed, r, f"source-{t}"),
        )
        for t in problem.source_tasks
    }

    records: list[RunRecord] = []
    for method in config.methods:
        rng_m = np.random.default_rng(
            derive_seed(config.base_seed, r, f"method-{method}")
        )
        obs = {t: list(v) for t, v in source_obs.items()}
        obs[problem.target_task] = list(zip(init_x, init_y))
        data = ObservationSet(observations=obs, target_task=problem.target_task)

        best = np.inf
        for it, (x, y) in enumerate(zip(init_x, init_y)):
            best = min(best, y)
            records.append(RunRecord(method, r, it, np.asarray(x), y, best))

        for it in range(config.budget):
            iteration = config.n_init + it
            x = None
            if method != "RANDOM":
                try:
                    model = build_model(
                        ModelKind[method], list(problem.tasks), data,
                        seed=derive_seed(config.base_seed, r, f"fit-{method}-{it}"),
                        n_restarts=config.n_restarts,
                    )
                    z = suggest(
                        model, model.acquisition_dim,
                        seed=derive_seed(config.base_seed, r, f"acq-{method}-{it}"),
                    )
                    x = model.lift(z, rng_m)
                except (FitFailed, NotPositiveDefinite) as exc:
                    log.warning("replication %d method %s iteration %d: %s; "
                                "falling back to random", r, method, iteration, exc)
            if x is None:
                x = rng_m.uniform(size=d)
            y = problem.evaluate(x)
            data = data.with_added(problem.target_task, x, y)
            best = min(best, y)
            records.append(RunRecord(method, r, iteration, np.asarray(x), y, best))
    return records


def run_experiment(config: ExperimentConfig) -> list[RunRecord]:
    """Run all replications (optionally in parallel) and return sorted records."""
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            chunks = list(pool.map(_run_replication,
                                   [config] * config.replications,
                                   range(config.replications)))
    else:
        chunks = [_run_replication(config, r) for r in range(config.replications)]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda rec: (rec.method, rec.replication, rec.iteration))
    return records


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def records_to_csv_text(records: list[RunRecord]) -> str:
    if not records:
        return "method,replication,iteration,y,best_so_far\n"
    d = len(records[0].x)
    header = "method,replication,iteration,y,best_so_far," \
        + ",".join(f"x_{k}" for k in range(d))
    lines = [header]
    for rec in records:
        lines.append(",".join([
            rec.method, str(rec.replication), str(rec.iteration),
            _fmt(rec.y), _fmt(rec.best_so_far),
            *(_fmt(c) for c in rec.x),
        ]))
    return "\n".join(lines) + "\n"


def write_records_csv(records: list[RunRecord], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(records_to_csv_text(records), encoding="utf-8")


@dataclass(frozen=True)
class SummaryRow:
    method: str
    iteration: int
    mean_best: float
    se2: float


def summarize(records: list[RunRecord]) -> list[SummaryRow]:
    """Mean best-so-far and two-standard-error half-width per method/iteration."""
    reps = {rec.replication for rec in records}
    if len(reps) < 2:
        raise InsufficientReplications("need at least 2 replications")
    by_key: dict[tuple[str, int], list[float]] = {}
    for rec in records:
        by_key.setdefault((rec.method, rec.iteration), []).append(rec.best_so_far)
    rows = []
    for (method, iteration), vals in sorted(by_key.items()):
        arr = np.asarray(vals, dtype=float)
        se = float(np.std(arr, ddof=1) / np.sqrt(len(arr)))
        rows.append(SummaryRow(method, iteration, float(np.mean(arr)), 2.0 * se))
    return rows


def summary_to_csv_text(rows: list[SummaryRow]) -> str:
    lines = ["method,iteration,mean_best,se2"]
    for row in rows:
        lines.append(f"{row.method},{row.iteration},"
                     f"{_fmt(row.mean_best)},{_fmt(row.se2)}")
    return "\n".join(lines) + "\n"


def write_summary_csv(rows: list[SummaryRow], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(summary_to_csv_text(rows), encoding="utf-8")


def run_ablation(config: ExperimentConfig,
                 source_trial_levels: list[int]) -> dict[int, list[RunRecord]]:
    """Re-run the experiment once per source-trial level, same base seed."""
    if not source_trial_levels:
        raise ValueError("source_trial_levels must be non-empty")
    out_dir = Path(config.output_dir)
    results = {}
    for level in source_trial_levels:
        cfg = replace(config, source_trials_per_task=level)
        records = run_experiment(cfg)
        results[level] = records
        write_records_csv(records, out_dir / f"records_src{level}.csv")
        write_summary_csv(summarize(records), out_dir / f"summary_src{level}.csv")
    return results
