"""Benchmark problems: heterogeneous Hartmann6 and a tabular loader.

All problem coordinates are in normalized [0,1] space; outcomes are
oriented so lower is better.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import EmptyTable, OutOfBounds, SchemaError, UnknownTaskId
from .spaces import Parameter, TaskSpec

HARTMANN6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
HARTMANN6_A = np.array([
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
])
HARTMANN6_P = 1e-4 * np.array([
    [1312, 1696, 5569, 124, 8283, 5886],
    [2329, 4135, 8307, 3736, 1004, 9991],
    [2348, 1451, 3522, 2883, 3047, 6650],
    [4047, 8828, 8732, 5743, 1091, 381],
])
HARTMANN6_OPTIMUM = -3.32237
HARTMANN6_ARGMIN = np.array(
    [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573]
)


@dataclass(frozen=True)
class Problem:
    """A target function with source tasks that supply transfer data."""

    name: str
    tasks: tuple[TaskSpec, ...]
    target_task: int
    evaluate: Callable[[np.ndarray], float]
    source_generator: Callable[[int, int, int], list[tuple[np.ndarray, float]]]
    optimum_value: float | None = None

    @property
    def source_tasks(self) -> list[int]:
        return [t.task_index for t in self.tasks if t.task_index != self.target_task]


def hartmann6(x) -> float:
    """Standard four-term Hartmann function on [0,1]^6."""
    x = np.asarray(x, dtype=float)
    if x.shape != (6,):
        raise OutOfBounds(f"expected a 6-vector, got shape {x.shape}")
    if np.any(x < 0) or np.any(x > 1):
        raise OutOfBounds(f"point {x} outside [0,1]^6")
    inner = np.sum(HARTMANN6_A * (x - HARTMANN6_P) ** 2, axis=1)
    return float(-np.sum(HARTMANN6_ALPHA * np.exp(-inner)))


# transcription guard: the tabulated argmin must reproduce the known optimum
assert abs(hartmann6(HARTMANN6_ARGMIN) - HARTMANN6_OPTIMUM) < 1e-4


def _unit_params(ids) -> tuple[Parameter, ...]:
    return tuple(Parameter(global_id=g, name=f"x{g}", lower=0.0, upper=1.0)
                 for g in ids)


def hartmann_heterogeneous() -> Problem:
    """Hartmann6 target with one 4D source whose last two inputs are held at 0."""
    source = TaskSpec(task_index=0, parameters=_unit_params(range(1, 5)))
    target = TaskSpec(task_index=1, parameters=_unit_params(range(1, 7)))

    def source_eval(x4: np.ndarray) -> float:
        return hartmann6(np.concatenate([x4, [0.0, 0.0]]))

    def source_generator(task_index: int, n_trials: int, seed: int):
        if task_index != 0:
            raise UnknownTaskId(f"task {task_index} is not a source task")
        rng = np.random.default_rng(seed)
        xs = rng.uniform(size=(n_trials, 4))
        return [(x, source_eval(x)) for x in xs]

    return Problem(
        name="hartmann_heterogeneous",
        tasks=(source, target),
        target_task=1,
        evaluate=hartmann6,
        source_generator=source_generator,
        optimum_value=HARTMANN6_OPTIMUM,
    )


def load_tabular(path, target_task_id: int, source_task_ids: list[int]) -> Problem:
    """Generic offline benchmark from a JSON table.

    Schema: ``{"tasks": [{"task_index", "parameter_ids", "rows":
    [{"x": [...], "y": ...}]}]}`` with coordinates pre-normalized to [0,1].
    Target evaluation is nearest-neighbor (L2) lookup; source data are rows
    sampled without replacement.
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        entries = {int(t["task_index"]): t for t in raw["tasks"]}
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise SchemaError(f"bad tabular benchmark file {path}: {exc}") from exc

    wanted = [*source_task_ids, target_task_id]
    for tid in wanted:
        if tid not in entries:
            raise UnknownTaskId(f"task id {tid} not in {path}")

    tables: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    task_specs = []
    for new_index, tid in enumerate(wanted):
        entry = entries[tid]
        try:
            ids = [int(g) for g in entry["parameter_ids"]]
            rows = entry["rows"]
            X = np.asarray([r["x"] for r in rows], dtype=float)
            y = np.asarray([r["y"] for r in rows], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad task entry {tid} in {path}: {exc}") from exc
        if len(rows) == 0:
            raise EmptyTable(f"task id {tid} has no rows")
        if X.ndim != 2 or X.shape[1] != len(ids):
            raise SchemaError(f"task id {tid}: row width != number of parameters")
        tables[new_index] = (X, y)
        task_specs.append(TaskSpec(task_index=new_index, parameters=_unit_params(ids)))

    target_index = len(source_task_ids)
    Xt, yt = tables[target_index]

    def evaluate(x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        d2 = np.sum((Xt - x) ** 2, axis=1)
        return float(yt[int(np.argmin(d2))])

    def source_generator(task_index: int, n_trials: int, seed: int):
        if task_index == target_index or task_index not in tables:
            raise UnknownTaskId(f"task {task_index} is not a source task")
        X, y = tables[task_index]
        rng = np.random.default_rng(seed)
        take = min(n_trials, len(y))
        idx = rng.choice(len(y), size=take, replace=False)
        return [(X[i], float(y[i])) for i in idx]

    return Problem(
        name=f"tabular:{Path(path).name}",
        tasks=tuple(task_specs),
        target_task=target_index,
        evaluate=evaluate,
        source_generator=source_generator,
        optimum_value=float(np.min(yt)),
    )
