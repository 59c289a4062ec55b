"""Heterogeneous search spaces and their canonical subset partition.

Each parameter carries a global integer id that identifies it across tasks.
A family of tasks induces a partition of the union of all parameter ids into
blocks, where two ids share a block exactly when they appear in the same set
of tasks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConflictingParameterDefinition, MissingParameter, UnknownTask


@dataclass(frozen=True)
class Parameter:
    """A continuous box parameter identified globally by an integer id."""

    global_id: int
    name: str
    lower: float
    upper: float

    def __post_init__(self):
        if self.global_id < 1:
            raise ValueError(f"global_id must be >= 1, got {self.global_id}")
        if not self.lower < self.upper:
            raise ValueError(
                f"parameter {self.global_id}: lower ({self.lower}) must be "
                f"< upper ({self.upper})"
            )


@dataclass(frozen=True)
class TaskSpec:
    """One task's search space: an ordered tuple of parameters."""

    task_index: int
    parameters: tuple[Parameter, ...]

    def __post_init__(self):
        if not self.parameters:
            raise ValueError("a task needs at least one parameter")
        object.__setattr__(self, "parameters", tuple(self.parameters))
        ids = [p.global_id for p in self.parameters]
        if len(set(ids)) != len(ids):
            raise ValueError(f"task {self.task_index} has duplicate global_ids")

    @property
    def global_ids(self) -> frozenset[int]:
        return frozenset(p.global_id for p in self.parameters)

    @property
    def dim(self) -> int:
        return len(self.parameters)

    def index_of(self, global_id: int) -> int:
        for k, p in enumerate(self.parameters):
            if p.global_id == global_id:
                return k
        raise MissingParameter(
            f"global_id {global_id} not in task {self.task_index}"
        )


@dataclass(frozen=True)
class SubsetPartition:
    """Partition of the universal id set into blocks of co-occurring ids.

    ``blocks[j]`` holds the ids of block j sorted ascending; blocks are
    ordered by their smallest id.  ``membership[i][j]`` is True when block j
    is a subset of task i's parameter set.
    """

    blocks: tuple[tuple[int, ...], ...]
    membership: tuple[tuple[bool, ...], ...]

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    def contains(self, task_index: int, block_index: int) -> bool:
        if not 0 <= task_index < len(self.membership):
            raise UnknownTask(f"task index {task_index}")
        return self.membership[task_index][block_index]


def _check_consistency(tasks: list[TaskSpec]) -> None:
    seen: dict[int, Parameter] = {}
    for task in tasks:
        for p in task.parameters:
            prev = seen.get(p.global_id)
            if prev is None:
                seen[p.global_id] = p
            elif (prev.name, prev.lower, prev.upper) != (p.name, p.lower, p.upper):
                raise ConflictingParameterDefinition(
                    f"global_id {p.global_id} declared as {prev} and {p}"
                )


def universal_set(tasks: list[TaskSpec]) -> frozenset[int]:
    """Union of all tasks' global ids, checking cross-task consistency."""
    if not tasks:
        raise ValueError("tasks must be non-empty")
    _check_consistency(tasks)
    out: set[int] = set()
    for task in tasks:
        out |= task.global_ids
    return frozenset(out)


def common_parameters(tasks: list[TaskSpec]) -> frozenset[int]:
    """Intersection of all tasks' global ids (may be empty)."""
    if not tasks:
        raise ValueError("tasks must be non-empty")
    out = set(tasks[0].global_ids)
    for task in tasks[1:]:
        out &= task.global_ids
    return frozenset(out)


def build_partition(tasks: list[TaskSpec]) -> SubsetPartition:
    """Split the universal id set into maximal blocks of co-occurring ids.

    Processes tasks one at a time, refining the current blocks against each
    task's id set; the result is the coarsest partition in which every block
    is either inside or disjoint from every task.  Block order is made
    canonical by sorting on each block's smallest id.
    """
    universal_set(tasks)  # consistency check
    blocks: list[set[int]] = [set(tasks[0].global_ids)]
    for task in tasks[1:]:
        idx_set = set(task.global_ids)
        new_blocks: list[set[int]] = []
        for sub in blocks:
            common = idx_set & sub
            remaining = sub - common
            if common:
                new_blocks.append(common)
                idx_set -= common
            if remaining:
                new_blocks.append(remaining)
        if idx_set:
            new_blocks.append(idx_set)
        blocks = new_blocks

    ordered = tuple(
        tuple(sorted(b)) for b in sorted(blocks, key=min)
    )
    membership = tuple(
        tuple(set(b) <= task.global_ids for b in ordered) for task in tasks
    )
    return SubsetPartition(blocks=ordered, membership=membership)


def project(x, task: TaskSpec, ids) -> np.ndarray:
    """Coordinates of ``x`` at the requested global ids, ascending by id."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != task.dim:
        raise MissingParameter(
            f"point has {x.shape[-1]} coordinates, task {task.task_index} "
            f"has {task.dim} parameters"
        )
    cols = [task.index_of(g) for g in sorted(ids)]
    return x[..., cols]


def parse_task_specs(obj: list[dict]) -> list[TaskSpec]:
    """Build TaskSpecs from the experiment-config JSON layout.

    Expected shape: ``[{task_index, parameters: [{id, name, lower, upper}]}]``.
    """
    tasks = []
    for entry in obj:
        params = tuple(
            Parameter(
                global_id=int(p["id"]),
                name=str(p.get("name", f"p{p['id']}")),
                lower=float(p["lower"]),
                upper=float(p["upper"]),
            )
            for p in entry["parameters"]
        )
        tasks.append(TaskSpec(task_index=int(entry["task_index"]), parameters=params))
    return tasks
