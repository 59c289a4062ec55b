"""GP model variants for transfer across heterogeneous search spaces.

Five strategies share the gp-core engine: a single-task GP on the target
data, a multi-task GP with the conditional kernel, two imputed multi-task
GPs over the union space (missing coordinates fixed at the range center or
learned as hyperparameters), and a multi-task GP restricted to the
parameters common to every task.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import gp
from .errors import EmptyTargetData, NoCommonParameters
from .kernels import BlockProjector, ConditionalKernel, ICMKernel, UnionKernel
from .spaces import TaskSpec, build_partition, common_parameters, project, universal_set


class ModelKind(enum.Enum):
    VANILLA = "VANILLA"
    CONDITIONAL_MTGP = "CONDITIONAL_MTGP"
    IMPUTED_MTGP_FIXED = "IMPUTED_MTGP_FIXED"
    IMPUTED_MTGP_LEARNED = "IMPUTED_MTGP_LEARNED"
    COMMON_PARAMS_MTGP = "COMMON_PARAMS_MTGP"


@dataclass
class ObservationSet:
    """Per-task (x, y) observations in normalized [0,1] coordinates."""

    observations: dict[int, list[tuple[np.ndarray, float]]]
    target_task: int

    def __post_init__(self):
        for t, obs in self.observations.items():
            checked = []
            for x, y in obs:
                x = np.asarray(x, dtype=float)
                if np.any(x < -1e-12) or np.any(x > 1 + 1e-12):
                    raise ValueError(f"task {t}: point {x} outside [0,1]")
                if not np.isfinite(y):
                    raise ValueError(f"task {t}: non-finite outcome {y}")
                checked.append((x, float(y)))
            self.observations[t] = checked

    def n_total(self) -> int:
        return sum(len(v) for v in self.observations.values())

    def target_observations(self) -> list[tuple[np.ndarray, float]]:
        return list(self.observations.get(self.target_task, []))

    def with_added(self, task: int, x, y) -> "ObservationSet":
        obs = {t: list(v) for t, v in self.observations.items()}
        obs.setdefault(task, []).append((np.asarray(x, dtype=float), float(y)))
        return ObservationSet(observations=obs, target_task=self.target_task)


def _stack(observations: dict[int, list], task_order) -> tuple[list, np.ndarray, np.ndarray]:
    points, tasks_idx, ys = [], [], []
    for t in task_order:
        for x, y in observations.get(t, []):
            points.append(np.asarray(x, dtype=float))
            tasks_idx.append(t)
            ys.append(y)
    return points, np.asarray(tasks_idx, dtype=int), np.asarray(ys, dtype=float)


class _ConditionalGramCache:
    """Data-dependent, parameter-independent pieces of the conditional Gram.

    For each block: a row-membership mask and the per-dimension squared
    coordinate differences, so a Gram evaluation for new hyperparameters is
    a handful of dense numpy ops.
    """

    def __init__(self, projector: BlockProjector, points, tasks_idx, y):
        self.points = points
        self.tasks_idx = np.asarray(tasks_idx, dtype=int)
        self.y = y
        self.blocks = []
        for bi in range(projector.partition.block_count):
            A, mask = projector.block_projection(points, tasks_idx, bi)
            diff2 = (A[:, None, :] - A[None, :, :]) ** 2  # (n, n, d)
            self.blocks.append((np.outer(mask, mask), diff2))

    def gram(self, block_params, B: np.ndarray) -> np.ndarray:
        n = len(self.points)
        K = np.zeros((n, n))
        # lengthscale underflow during fit excursions is rejected later via
        # the optimizer's non-finite-likelihood penalty
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for bp, (mask2, diff2) in zip(block_params, self.blocks):
                r2 = diff2 @ (1.0 / bp.lengthscales**2)
                K += mask2 * (bp.output_scale * np.exp(-0.5 * r2))
        return K * B[np.ix_(self.tasks_idx, self.tasks_idx)]


class ConditionalModelSpec:
    """Conditional-kernel ICM over the raw per-task coordinates.

    With a single task this degenerates to a plain SE GP (one block, B=[[1]]),
    which is exactly the vanilla model.
    """

    def __init__(self, tasks: list[TaskSpec]):
        self.tasks = list(tasks)
        self.partition = build_partition(self.tasks)
        self.projector = BlockProjector(self.partition, self.tasks)
        self.structure = gp.ParamStructure(
            block_dims=tuple(len(b) for b in self.partition.blocks),
            num_tasks=len(self.tasks),
            task_cov_mode="correlation",
        )
        self._cache_for = None
        self._cache = None

    def build_kernel(self, params: gp.ModelParams):
        cond = ConditionalKernel(self.partition, self.tasks,
                                 list(params.block_params), projector=self.projector)
        return ICMKernel(cond, params.task_cov)

    def _cached(self, data: ObservationSet) -> _ConditionalGramCache:
        if self._cache_for is not data:
            points, tasks_idx, y = _stack(data.observations, range(len(self.tasks)))
            self._cache = _ConditionalGramCache(self.projector, points, tasks_idx, y)
            self._cache_for = data
        return self._cache

    def training_set(self, params, data: ObservationSet):
        c = self._cached(data)
        return c.points, c.tasks_idx, c.y

    def training_gram(self, params, data: ObservationSet):
        c = self._cached(data)
        return c.gram(params.block_params, params.task_cov.matrix), c.y

    def predict_input(self, params, x, task: int):
        return np.asarray(x, dtype=float)


class UnionModelSpec:
    """Single SE kernel over the union space with imputed missing coordinates."""

    def __init__(self, tasks: list[TaskSpec], learned: bool, fill: float = 0.5):
        self.tasks = list(tasks)
        self.union_ids = tuple(sorted(universal_set(self.tasks)))
        self.fill = fill
        self._pos = {g: k for k, g in enumerate(self.union_ids)}
        missing = []
        for task in self.tasks:
            for g in self.union_ids:
                if g not in task.global_ids:
                    missing.append((task.task_index, g))
        self.missing_keys = tuple(sorted(missing))
        self.structure = gp.ParamStructure(
            block_dims=(len(self.union_ids),),
            num_tasks=len(self.tasks),
            task_cov_mode="full",
            imputed_keys=self.missing_keys if learned else (),
        )

    def embed(self, params: gp.ModelParams, x, task: int) -> np.ndarray:
        spec = self.tasks[task]
        x = np.asarray(x, dtype=float)
        z = np.full(len(self.union_ids), self.fill)
        for k, p in enumerate(spec.parameters):
            z[self._pos[p.global_id]] = x[k]
        for (t, g) in self.missing_keys:
            if t == task:
                z[self._pos[g]] = params.imputed_values.get((t, g), self.fill)
        return z

    def build_kernel(self, params: gp.ModelParams):
        return UnionKernel(params.block_params[0], params.task_cov)

    def _cached(self, data: ObservationSet):
        if getattr(self, "_cache_for", None) is not data:
            points, tasks_idx, y = _stack(data.observations, range(len(self.tasks)))
            Z0 = np.full((len(points), len(self.union_ids)), self.fill)
            for r, (x, t) in enumerate(zip(points, tasks_idx)):
                spec = self.tasks[t]
                for k, p in enumerate(spec.parameters):
                    Z0[r, self._pos[p.global_id]] = x[k]
            # (rows, column) slots to overwrite with each imputed value
            slots = []
            for key in self.missing_keys:
                t, g = key
                rows = np.nonzero(tasks_idx == t)[0]
                slots.append((key, rows, self._pos[g]))
            self._cache = (Z0, slots, np.asarray(tasks_idx, dtype=int), y)
            self._cache_for = data
        return self._cache

    def _embedded_matrix(self, params, data: ObservationSet) -> np.ndarray:
        Z0, slots, _, _ = self._cached(data)
        Z = Z0.copy()
        for key, rows, col in slots:
            Z[rows, col] = params.imputed_values.get(key, self.fill)
        return Z

    def training_set(self, params, data: ObservationSet):
        _, _, tasks_idx, y = self._cached(data)
        Z = self._embedded_matrix(params, data)
        return list(Z), tasks_idx, y

    def training_gram(self, params, data: ObservationSet):
        _, _, tasks_idx, y = self._cached(data)
        Z = self._embedded_matrix(params, data)
        bp = params.block_params[0]
        # extreme lengthscale excursions during fitting can overflow here;
        # the resulting non-finite likelihood is rejected by the optimizer
        with np.errstate(over="ignore", invalid="ignore"):
            Zs = Z / bp.lengthscales
            sq = np.sum(Zs**2, axis=1)
            r2 = sq[:, None] + sq[None, :] - 2.0 * Zs @ Zs.T
            np.maximum(r2, 0.0, out=r2)
            K = bp.output_scale * np.exp(-0.5 * r2)
        B = params.task_cov.matrix
        return K * B[np.ix_(tasks_idx, tasks_idx)], y

    def predict_input(self, params, x, task: int):
        return self.embed(params, x, task)


class CommonParamsModelSpec:
    """Standard ICM MTGP on the subspace of parameters shared by all tasks."""

    def __init__(self, tasks: list[TaskSpec]):
        self.tasks = list(tasks)
        self.common_ids = tuple(sorted(common_parameters(self.tasks)))
        if not self.common_ids:
            raise NoCommonParameters("tasks share no parameters")
        # every projected task has the same id set, so the partition is one block
        self.projected_tasks = [
            TaskSpec(
                task_index=t.task_index,
                parameters=tuple(
                    p for g in self.common_ids for p in t.parameters
                    if p.global_id == g
                ),
            )
            for t in self.tasks
        ]
        self.partition = build_partition(self.projected_tasks)
        self.projector = BlockProjector(self.partition, self.projected_tasks)
        self.structure = gp.ParamStructure(
            block_dims=(len(self.common_ids),),
            num_tasks=len(self.tasks),
            task_cov_mode="correlation",
        )
        self._cache_for = None
        self._cache = None

    def _project(self, x, task: int) -> np.ndarray:
        return project(x, self.tasks[task], self.common_ids)

    def build_kernel(self, params: gp.ModelParams):
        cond = ConditionalKernel(
            self.partition, self.projected_tasks, list(params.block_params),
            projector=self.projector,
        )
        return ICMKernel(cond, params.task_cov)

    def _cached(self, data: ObservationSet) -> _ConditionalGramCache:
        if self._cache_for is not data:
            points, tasks_idx, y = _stack(data.observations, range(len(self.tasks)))
            projected = [self._project(x, t) for x, t in zip(points, tasks_idx)]
            self._cache = _ConditionalGramCache(
                self.projector, projected, tasks_idx, y
            )
            self._cache_for = data
        return self._cache

    def training_set(self, params, data: ObservationSet):
        c = self._cached(data)
        return c.points, c.tasks_idx, c.y

    def training_gram(self, params, data: ObservationSet):
        c = self._cached(data)
        return c.gram(params.block_params, params.task_cov.matrix), c.y

    def predict_input(self, params, x, task: int):
        x = np.asarray(x, dtype=float)
        if x.shape[0] == len(self.common_ids):
            return x  # already in the common subspace
        return self._project(x, task)


@dataclass
class FittedModel:
    """A fitted strategy with its cached GP state."""

    kind: ModelKind
    tasks: list[TaskSpec]
    spec: object
    params: gp.ModelParams
    state: gp.GPState
    data: ObservationSet
    predict_task: int  # task index used for target predictions inside the spec

    def predict(self, x_star) -> gp.Posterior:
        m, v = gp.predict_state(self.state, [np.asarray(x_star, dtype=float)],
                                self.predict_task)
        return gp.Posterior(mean=float(m[0]), variance=float(v[0]))

    def predict_batch(self, x_stars) -> tuple[np.ndarray, np.ndarray]:
        return gp.predict_state(self.state, list(x_stars), self.predict_task)

    @property
    def acquisition_dim(self) -> int:
        """Dimension of the space the acquisition function searches over."""
        if self.kind is ModelKind.COMMON_PARAMS_MTGP:
            return len(self.spec.common_ids)
        return self.data_target_spec.dim

    @property
    def data_target_spec(self) -> TaskSpec:
        return self.tasks[self.data.target_task]

    def lift(self, z, rng: np.random.Generator | None = None) -> np.ndarray:
        """Map an acquisition-space point to a full target-space point.

        For the common-parameters model the non-common target coordinates are
        sampled uniformly (once per suggested point); identity otherwise.
        """
        z = np.asarray(z, dtype=float)
        if self.kind is not ModelKind.COMMON_PARAMS_MTGP:
            return z
        target = self.data_target_spec
        full = (rng.uniform(size=target.dim) if rng is not None
                else np.full(target.dim, 0.5))
        common = set(self.spec.common_ids)
        # `project` orders common coordinates by ascending global id, so z
        # fills the target slots in that same order
        order = sorted(range(target.dim),
                       key=lambda k: target.parameters[k].global_id)
        zi = 0
        for k in order:
            if target.parameters[k].global_id in common:
                full[k] = z[zi]
                zi += 1
        return full


def _make_spec(kind: ModelKind, tasks: list[TaskSpec]):
    if kind in (ModelKind.VANILLA, ModelKind.CONDITIONAL_MTGP):
        return ConditionalModelSpec(tasks)
    if kind is ModelKind.IMPUTED_MTGP_FIXED:
        return UnionModelSpec(tasks, learned=False)
    if kind is ModelKind.IMPUTED_MTGP_LEARNED:
        return UnionModelSpec(tasks, learned=True)
    if kind is ModelKind.COMMON_PARAMS_MTGP:
        return CommonParamsModelSpec(tasks)
    raise ValueError(f"unknown model kind {kind}")


def build_model(kind: ModelKind, tasks: list[TaskSpec], data: ObservationSet,
                seed: int, n_restarts: int = 2,
                params: gp.ModelParams | None = None) -> FittedModel:
    """Fit (or assemble with frozen ``params``) one of the five strategies."""
    if not data.target_observations():
        raise EmptyTargetData(f"target task {data.target_task} has no data")

    if kind is ModelKind.VANILLA:
        target = tasks[data.target_task]
        solo = TaskSpec(task_index=0, parameters=target.parameters)
        solo_data = ObservationSet(
            observations={0: data.target_observations()}, target_task=0
        )
        spec = ConditionalModelSpec([solo])
        fit_tasks, fit_data, predict_task = [solo], solo_data, 0
    else:
        spec = _make_spec(kind, tasks)
        fit_tasks, fit_data, predict_task = list(tasks), data, data.target_task

    if params is None:
        params = gp.fit_map(fit_data, spec, seed=seed, n_restarts=n_restarts)
    state = gp.make_state(params, fit_data, spec)
    return FittedModel(
        kind=kind, tasks=fit_tasks, spec=spec, params=params,
        state=state, data=fit_data, predict_task=predict_task,
    )


def predict(model: FittedModel, x_star) -> gp.Posterior:
    """Posterior at a target-space point (projected first where needed)."""
    return model.predict(x_star)
