"""Kernels over heterogeneous search spaces.

The conditional kernel sums one ARD squared-exponential base kernel per
partition block, counting only blocks present in both inputs' tasks.  The
multi-task variants multiply by a task-covariance matrix B.  The union-space
kernel is a single SE kernel over the full union of parameters (inputs are
pre-imputed by the models layer).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite, UnknownTask
from .spaces import SubsetPartition, TaskSpec, project

JITTER_START = 1e-6
JITTER_MAX = 1e-2


@dataclass(frozen=True)
class BlockKernelParams:
    """ARD lengthscales and signal variance of one base SE kernel."""

    lengthscales: np.ndarray
    output_scale: float

    def __post_init__(self):
        ls = np.asarray(self.lengthscales, dtype=float)
        object.__setattr__(self, "lengthscales", ls)
        if np.any(ls <= 0) or self.output_scale <= 0:
            raise ValueError("lengthscales and output_scale must be positive")


@dataclass(frozen=True)
class TaskCovariance:
    """Task covariance B = L Lᵀ (+ optional diagonal jitter)."""

    factor: np.ndarray
    jitter: np.ndarray | None = None

    def __post_init__(self):
        L = np.asarray(self.factor, dtype=float)
        object.__setattr__(self, "factor", L)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError("factor must be square")
        if np.any(np.diag(L) <= 0):
            raise ValueError("factor diagonal must be strictly positive")

    @property
    def matrix(self) -> np.ndarray:
        B = self.factor @ self.factor.T
        if self.jitter is not None:
            B = B + np.diag(np.asarray(self.jitter, dtype=float))
        return B

    @property
    def num_tasks(self) -> int:
        return self.factor.shape[0]


def se_kernel(u, v, params: BlockKernelParams) -> float:
    """ARD squared-exponential kernel value between two sub-vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    d = params.lengthscales.shape[0]
    if u.shape != (d,) or v.shape != (d,):
        raise DimensionMismatch(
            f"expected vectors of length {d}, got {u.shape} and {v.shape}"
        )
    r2 = np.sum(((u - v) / params.lengthscales) ** 2)
    return float(params.output_scale * np.exp(-0.5 * r2))


class BlockProjector:
    """Extracts each partition block's coordinates from raw task-space points."""

    def __init__(self, partition: SubsetPartition, tasks: list[TaskSpec]):
        self.partition = partition
        self.tasks = list(tasks)
        # column positions of each block's ids within each member task
        self._cols = []
        for ti, task in enumerate(self.tasks):
            per_block = []
            for bi, block in enumerate(partition.blocks):
                if partition.membership[ti][bi]:
                    per_block.append([task.index_of(g) for g in block])
                else:
                    per_block.append(None)
            self._cols.append(per_block)

    def block_projection(self, pts, tasks_idx, bi: int) -> tuple[np.ndarray, np.ndarray]:
        """Projected coordinates and membership mask for one block.

        Rows whose task lacks the block are left at zero and masked out;
        point lists are ragged across tasks, so rows are grouped by task.
        """
        n = len(pts)
        d = len(self.partition.blocks[bi])
        A = np.zeros((n, d))
        mask = np.zeros(n, dtype=bool)
        tasks_idx = np.asarray(tasks_idx)
        for t in np.unique(tasks_idx):
            cols = self._cols[int(t)][bi]
            if cols is None:
                continue
            rows = np.nonzero(tasks_idx == t)[0]
            block = np.asarray([pts[r] for r in rows], dtype=float)[:, cols]
            A[rows] = block
            mask[rows] = True
        return A, mask


class ConditionalKernel:
    """Sum of per-block SE kernels over blocks shared by both tasks."""

    def __init__(self, partition: SubsetPartition, tasks: list[TaskSpec],
                 block_params: list[BlockKernelParams],
                 projector: BlockProjector | None = None):
        if len(block_params) != partition.block_count:
            raise DimensionMismatch(
                f"need {partition.block_count} block params, got {len(block_params)}"
            )
        self.partition = partition
        self.tasks = list(tasks)
        self.block_params = list(block_params)
        self.projector = projector or BlockProjector(partition, self.tasks)

    def _check_task(self, i: int) -> None:
        if not 0 <= i < len(self.tasks):
            raise UnknownTask(f"task index {i}")

    def __call__(self, x, i: int, xp, ip: int) -> float:
        self._check_task(i)
        self._check_task(ip)
        x = np.asarray(x, dtype=float)
        xp = np.asarray(xp, dtype=float)
        total = 0.0
        for bi, block in enumerate(self.partition.blocks):
            if self.partition.membership[i][bi] and self.partition.membership[ip][bi]:
                u = project(x, self.tasks[i], block)
                v = project(xp, self.tasks[ip], block)
                total += se_kernel(u, v, self.block_params[bi])
        return total

    def cross(self, pts_a, tasks_a, pts_b, tasks_b) -> np.ndarray:
        """Gram block between two point sets, vectorized per partition block."""
        na, nb = len(pts_a), len(pts_b)
        K = np.zeros((na, nb))
        for bi in range(self.partition.block_count):
            A, mask_a = self.projector.block_projection(pts_a, tasks_a, bi)
            B, mask_b = self.projector.block_projection(pts_b, tasks_b, bi)
            if not (mask_a.any() and mask_b.any()):
                continue
            ls = self.block_params[bi].lengthscales
            As = A / ls
            Bs = B / ls
            r2 = (
                np.sum(As**2, axis=1)[:, None]
                + np.sum(Bs**2, axis=1)[None, :]
                - 2.0 * As @ Bs.T
            )
            np.maximum(r2, 0.0, out=r2)
            Kb = self.block_params[bi].output_scale * np.exp(-0.5 * r2)
            K += Kb * np.outer(mask_a, mask_b)
        return K

    def diag(self, pts, tasks_idx) -> np.ndarray:
        """k(x,x) per point: sum of member blocks' output scales (SE at r=0)."""
        scales = np.array([bp.output_scale for bp in self.block_params])
        member = np.asarray(self.partition.membership, dtype=float)
        return member[np.asarray(tasks_idx, dtype=int)] @ scales


class ICMKernel:
    """Conditional kernel scaled by the task covariance: K_c · B."""

    def __init__(self, conditional: ConditionalKernel, task_cov: TaskCovariance):
        if task_cov.num_tasks != len(conditional.tasks):
            raise DimensionMismatch("task covariance size must match task count")
        self.conditional = conditional
        self.task_cov = task_cov
        self._B = task_cov.matrix

    def __call__(self, x, i: int, xp, ip: int) -> float:
        return self.conditional(x, i, xp, ip) * self._B[i, ip]

    def cross(self, pts_a, tasks_a, pts_b, tasks_b) -> np.ndarray:
        Kc = self.conditional.cross(pts_a, tasks_a, pts_b, tasks_b)
        return Kc * self._B[np.ix_(tasks_a, tasks_b)]

    def diag(self, pts, tasks_idx) -> np.ndarray:
        tasks_idx = np.asarray(tasks_idx, dtype=int)
        return self.conditional.diag(pts, tasks_idx) * self._B[tasks_idx, tasks_idx]


class UnionKernel:
    """Single SE kernel over the union space, scaled by B[i, i']."""

    def __init__(self, params: BlockKernelParams, task_cov: TaskCovariance):
        self.params = params
        self.task_cov = task_cov
        self._B = task_cov.matrix

    def __call__(self, z, i: int, zp, ip: int) -> float:
        return se_kernel(z, zp, self.params) * self._B[i, ip]

    def cross(self, pts_a, tasks_a, pts_b, tasks_b) -> np.ndarray:
        ls = self.params.lengthscales
        A = np.asarray(pts_a, dtype=float) / ls
        B = np.asarray(pts_b, dtype=float) / ls
        if A.shape[1] != ls.shape[0] or B.shape[1] != ls.shape[0]:
            raise DimensionMismatch("union-space points must have |U| coordinates")
        r2 = (
            np.sum(A**2, axis=1)[:, None]
            + np.sum(B**2, axis=1)[None, :]
            - 2.0 * A @ B.T
        )
        np.maximum(r2, 0.0, out=r2)
        K = self.params.output_scale * np.exp(-0.5 * r2)
        return K * self._B[np.ix_(np.asarray(tasks_a), np.asarray(tasks_b))]

    def diag(self, pts, tasks_idx) -> np.ndarray:
        tasks_idx = np.asarray(tasks_idx, dtype=int)
        return self.params.output_scale * self._B[tasks_idx, tasks_idx]


def kernel_matrix(kernel, points, tasks_idx, points_b=None, tasks_b=None) -> np.ndarray:
    """Cross-covariance matrix; uses the kernel's vectorized path if present."""
    if points_b is None:
        points_b, tasks_b = points, tasks_idx
    tasks_idx = np.asarray(tasks_idx, dtype=int)
    tasks_b = np.asarray(tasks_b, dtype=int)
    if hasattr(kernel, "cross"):
        return kernel.cross(points, tasks_idx, points_b, tasks_b)
    K = np.empty((len(points), len(points_b)))
    for a, xa in enumerate(points):
        for b, xb in enumerate(points_b):
            K[a, b] = kernel(xa, tasks_idx[a], xb, tasks_b[b])
    return K


def gram(points_with_tasks, kernel, noise_variance: float,
         same_observations: bool = True) -> np.ndarray:
    """Full Gram matrix of a set of (point, task) pairs.

    With ``same_observations`` the noise variance plus a jitter is added to
    the diagonal; the jitter starts at 1e-6 and escalates tenfold until the
    matrix is Cholesky-factorizable, up to 1e-2.
    """
    points = [p for p, _ in points_with_tasks]
    tasks_idx = [t for _, t in points_with_tasks]
    K = kernel_matrix(kernel, points, tasks_idx)
    K = 0.5 * (K + K.T)
    if not same_observations:
        return K
    n = K.shape[0]
    jitter = JITTER_START
    while True:
        Kn = K + (noise_variance + jitter) * np.eye(n)
        try:
            np.linalg.cholesky(Kn)
            return Kn
        except np.linalg.LinAlgError:
            jitter *= 10.0
            if jitter > JITTER_MAX:
                raise NotPositiveDefinite(
                    f"Gram matrix indefinite even with jitter {JITTER_MAX}"
                )


def conditional_kernel(x, i, xp, ip, partition, params, tasks) -> float:
    """Functional form of :class:`ConditionalKernel`."""
    return ConditionalKernel(partition, tasks, params)(x, i, xp, ip)


def icm_kernel(x, i, xp, ip, partition, params, task_cov, tasks) -> float:
    """Functional form of :class:`ICMKernel`."""
    cond = ConditionalKernel(partition, tasks, params)
    return ICMKernel(cond, task_cov)(x, i, xp, ip)


def union_kernel(z, zp, params, task_cov, i, ip) -> float:
    """Functional form of :class:`UnionKernel`."""
    return UnionKernel(params, task_cov)(z, i, zp, ip)


def cholesky_with_jitter(K: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, escalating diagonal jitter on failure."""
    try:
        return np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        pass
    n = K.shape[0]
    jitter = JITTER_START
    while jitter <= JITTER_MAX:
        try:
            return np.linalg.cholesky(K + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NotPositiveDefinite("Cholesky failed after jitter escalation")
