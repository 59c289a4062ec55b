import numpy as np
import pytest

from hetbo.spaces import Parameter, TaskSpec


def make_task(task_index, ids):
    return TaskSpec(
        task_index=task_index,
        parameters=tuple(
            Parameter(global_id=g, name=f"x{g}", lower=0.0, upper=1.0)
            for g in ids
        ),
    )


@pytest.fixture
def appendix_tasks():
    """The three-task worked example: X1={1,2}, X2={1,2,3}, X3={1,2,4}."""
    return [make_task(0, [1, 2]), make_task(1, [1, 2, 3]), make_task(2, [1, 2, 4])]


def random_task_family(rng: np.random.Generator, max_tasks=5, max_params=12):
    """Random family of tasks over a shared id pool, each task non-empty."""
    n_tasks = int(rng.integers(2, max_tasks + 1))
    pool = list(range(1, max_params + 1))
    tasks = []
    for i in range(n_tasks):
        k = int(rng.integers(1, max_params + 1))
        ids = sorted(rng.choice(pool, size=k, replace=False).tolist())
        tasks.append(make_task(i, ids))
    return tasks


def partition_oracle(tasks):
    """Equivalence-class brute force: ids grouped by the exact set of tasks
    containing them; canonical order by smallest id."""
    universe = set()
    for t in tasks:
        universe |= t.global_ids
    groups = {}
    for g in universe:
        key = frozenset(i for i, t in enumerate(tasks) if g in t.global_ids)
        groups.setdefault(key, set()).add(g)
    return tuple(sorted((tuple(sorted(b)) for b in groups.values()),
                        key=lambda b: b[0]))
