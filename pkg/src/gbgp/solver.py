"""Outer projection loop and proximal block-coordinate inner solvers.

One outer iteration head-projects every block gradient to pick a small
search space, minimizes the objective restricted to that space with an
accelerated block-coordinate pass (serial, or randomized across blocks
for the parallel variant), then tail-projects the intermediate solution
back onto the connected-subgraph constraint set.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .graph import BlockPartition, Graph, SupportSet
from .objectives import ObjectiveSpec
from .projections import MAX_SEARCH_ITERATIONS, head_project, tail_project

__all__ = [
    "SolverConfig",
    "IterateRecord",
    "DetectionResult",
    "gbgp_solve",
    "bcd_solve",
    "parallel_bcd_solve",
    "proximal_block_update",
    "estimate_step_size",
    "momentum_next",
    "momentum_weight",
    "theta_next",
]

_STEP_FLOOR = 1e-12


def momentum_next(rho: float) -> float:
    """Momentum sequence: rho_{t+1} = (1 + sqrt(1 + 4 rho_t^2)) / 2."""
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * rho * rho))


def momentum_weight(rho: float) -> float:
    """Extrapolation weight omega_t = (rho_t - 1) / rho_t, in [0, 1)."""
    return (rho - 1.0) / rho


def theta_next(theta: float) -> float:
    """Sampling sequence: theta_{t+1} = (sqrt(theta^4+4 theta^2)-theta^2)/2."""
    return 0.5 * (math.sqrt(theta**4 + 4.0 * theta**2) - theta**2)


@dataclass
class SolverConfig:
    """Knobs for the outer loop and the inner solvers."""

    budgets: int | Sequence[int] = 10
    outer_tol: float = 1e-3
    inner_tol: float = 1e-3
    max_outer_iters: int = 30
    max_inner_cycles: int = 100
    step_mode: str = "backtracking"
    step_size: float = 1.0
    head_capacity_mode: str = "2s"
    num_components: int = 1
    parallel: int = 0
    seed: int = 0
    max_search_iterations: int = MAX_SEARCH_ITERATIONS
    keep_x_history: bool = False

    def __post_init__(self):
        # outer_tol 0 disables the convergence exit (fixed-iteration runs)
        if self.outer_tol < 0 or self.inner_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.step_mode not in ("fixed", "backtracking"):
            raise ValueError(f"unknown step mode {self.step_mode!r}")
        if self.step_size <= 0:
            raise ValueError("step size must be positive")
        if self.parallel < 0:
            raise ValueError("parallel worker count must be >= 0")
        if self.num_components < 1:
            raise ValueError("num_components must be >= 1")

    def budget_for(self, k: int, block_size: int) -> int:
        if isinstance(self.budgets, (int, np.integer)):
            budget = int(self.budgets)
        else:
            budget = int(self.budgets[k])
        if budget < 1:
            raise ValueError(f"budget for block {k} must be >= 1")
        if budget > block_size:
            raise ValueError(
                f"budget {budget} infeasible for block {k} of {block_size} nodes"
            )
        return budget


@dataclass
class IterateRecord:
    """Per-outer-iteration bookkeeping used by invariant checks."""

    iteration: int
    head_sets: list[frozenset]
    omega_sets: list[frozenset]
    tail_sets: list[frozenset]
    support_after: list[frozenset]
    delta: float
    objective: float


@dataclass
class DetectionResult:
    """Final supports plus the convergence trail of the outer loop."""

    supports: list[SupportSet]
    x_final: np.ndarray
    outer_iters: int
    converged: bool
    history: list[tuple[int, float, float, float]] = field(default_factory=list)
    iterates: list[IterateRecord] = field(default_factory=list)
    wall_times: dict = field(default_factory=dict)
    x_history: list[np.ndarray] = field(default_factory=list)

    def support_nodes(self) -> set[int]:
        out: set[int] = set()
        for support in self.supports:
            out.update(support.nodes)
        return out


def proximal_block_update(
    objective: ObjectiveSpec,
    k: int,
    y_hat: np.ndarray,
    alpha: float,
    omega_local: np.ndarray,
) -> np.ndarray:
    """Closed-form proximal step on block k around the point ``y_hat``.

    Gradient step with size alpha, entries outside the allowed support
    zeroed, then clipped to the box [0, 1].
    """
    if alpha <= 0:
        raise ValueError("step size must be positive")
    grad = objective.block_gradient(y_hat, k)
    x_k = y_hat[objective.partition.block_nodes[k]] - alpha * grad
    x_k[~omega_local] = 0.0
    np.clip(x_k, 0.0, 1.0, out=x_k)
    return x_k


def estimate_step_size(
    objective: ObjectiveSpec,
    k: int,
    y_hat: np.ndarray,
    omega_local: np.ndarray,
    mode: str = "backtracking",
    initial: float = 1.0,
) -> tuple[float, np.ndarray]:
    """Step size for block k plus the accepted proximal update.

    Fixed mode passes the configured value through. Backtracking halves
    from the initial value until the quadratic upper bound holds:
    F(x+) <= F(y) + <grad, x+ - y> + ||x+ - y||^2 / (2 alpha).
    """
    if mode == "fixed":
        return initial, proximal_block_update(objective, k, y_hat, initial, omega_local)
    nodes_k = objective.partition.block_nodes[k]
    grad = objective.block_gradient(y_hat, k)
    y_k = y_hat[nodes_k]
    f_y = objective.local_value(y_hat, k)
    alpha = initial
    trial = y_hat.copy()
    while True:
        x_k = y_k - alpha * grad
        x_k[~omega_local] = 0.0
        np.clip(x_k, 0.0, 1.0, out=x_k)
        trial[nodes_k] = x_k
        step = x_k - y_k
        bound = f_y + float(grad @ step) + float(step @ step) / (2.0 * alpha)
        if objective.local_value(trial, k) <= bound + 1e-12:
            return alpha, x_k
        alpha *= 0.5
        if alpha < _STEP_FLOOR:
            raise RuntimeError(
                f"backtracking underflow on block {k}: no step above {_STEP_FLOOR}"
            )


_POOL_GRAPHS: list[Graph] = []


def _pool_init(graphs: list[Graph]) -> None:
    global _POOL_GRAPHS
    _POOL_GRAPHS = graphs


def _pool_project(task: tuple) -> tuple[int, object]:
    kind, k, values, budget, kwargs = task
    project = head_project if kind == "head" else tail_project
    return k, project(values, _POOL_GRAPHS[k], budget, block_id=k, **kwargs)


def _box_projected_gradient(grad: np.ndarray, x_k: np.ndarray) -> np.ndarray:
    """Zero out gradient components that point outside the box [0, 1].

    At a coordinate pinned to 0 only a negative gradient permits
    movement, at 1 only a positive one; the head projection should see
    only mass it can actually act on.
    """
    out = grad.copy()
    out[(x_k <= 0.0) & (grad > 0.0)] = 0.0
    out[(x_k >= 1.0) & (grad < 0.0)] = 0.0
    return out


def _as_local_masks(partition: BlockPartition, omegas: list[set[int]]) -> list[np.ndarray]:
    masks = []
    for k in range(partition.num_blocks):
        mask = np.zeros(len(partition.block_nodes[k]), dtype=bool)
        if omegas[k]:
            mask[sorted(omegas[k])] = True
        masks.append(mask)
    return masks


def bcd_solve(
    objective: ObjectiveSpec,
    omegas: list[set[int]],
    x_init: np.ndarray,
    config: SolverConfig,
    trace: Optional[list] = None,
) -> np.ndarray:
    """Cyclic accelerated proximal block-coordinate descent.

    Visits blocks in index order; each visit extrapolates the block
    iterate, takes one proximal step restricted to the block's allowed
    support, and advances the momentum sequence rho. Momentum restarts
    (one plain step) whenever the extrapolated step would increase the
    objective, which keeps the iteration monotone under backtracking.
    When given, ``trace`` collects the objective value after each visit.
    """
    if not any(omegas):
        raise ValueError("all blocks have empty allowed supports")
    partition = objective.partition
    K = partition.num_blocks
    masks = _as_local_masks(partition, omegas)
    x = x_init.copy()
    for k in range(K):
        x_k = x[partition.block_nodes[k]]
        x_k[~masks[k]] = 0.0
        np.clip(x_k, 0.0, 1.0, out=x_k)
        x[partition.block_nodes[k]] = x_k
    prev_blocks = [x[partition.block_nodes[k]].copy() for k in range(K)]
    rho = 1.0
    for _cycle in range(config.max_inner_cycles):
        cycle_delta = 0.0
        for k in range(K):
            if not masks[k].any():
                rho = momentum_next(rho)
                continue
            nodes_k = partition.block_nodes[k]
            omega_t = momentum_weight(rho)
            x_k = x[nodes_k]
            y_k = x_k + omega_t * (x_k - prev_blocks[k])
            y_hat = x.copy()
            y_hat[nodes_k] = y_k

            if config.step_mode == "fixed":
                new_k = proximal_block_update(
                    objective, k, y_hat, config.step_size, masks[k]
                )
            else:
                f_before = objective.local_value(x, k)
                _, new_k = estimate_step_size(
                    objective, k, y_hat, masks[k], "backtracking", config.step_size
                )
                trial = x.copy()
                trial[nodes_k] = new_k
                if objective.local_value(trial, k) > f_before + 1e-12 and omega_t > 0:
                    # momentum overshot: restart from the unextrapolated point
                    _, new_k = estimate_step_size(
                        objective, k, x, masks[k], "backtracking", config.step_size
                    )
            prev_blocks[k] = x_k.copy()
            cycle_delta += float(np.linalg.norm(new_k - x_k))
            x[nodes_k] = new_k
            rho = momentum_next(rho)
            if trace is not None:
                trace.append(objective.value(x))
        if cycle_delta <= config.inner_tol:
            break
    return x


def parallel_bcd_solve(
    objective: ObjectiveSpec,
    omegas: list[set[int]],
    x_init: np.ndarray,
    config: SolverConfig,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Randomized accelerated block-coordinate descent over block subsets.

    Each round samples blocks independently with probability tau/K,
    updates their z-components through the proximal subproblem with
    curvature weight K*theta/(2*tau) (scaled by the per-block step
    size), then mixes the update into the accelerated iterate. With a
    fixed seed the trajectory is reproducible for any tau.
    """
    if not any(omegas):
        raise ValueError("all blocks have empty allowed supports")
    partition = objective.partition
    K = partition.num_blocks
    tau = max(1, config.parallel)
    tau = min(tau, K)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    masks = _as_local_masks(partition, omegas)

    x = x_init.copy()
    for k in range(K):
        x_k = x[partition.block_nodes[k]]
        x_k[~masks[k]] = 0.0
        np.clip(x_k, 0.0, 1.0, out=x_k)
        x[partition.block_nodes[k]] = x_k

    # per-block curvature estimates, frozen for the whole inner solve
    alphas = np.full(K, config.step_size)
    if config.step_mode == "backtracking":
        for k in range(K):
            if masks[k].any():
                alphas[k], _ = estimate_step_size(
                    objective, k, x, masks[k], "backtracking", config.step_size
                )

    z = x.copy()
    theta = tau / K
    max_rounds = max(1, math.ceil(config.max_inner_cycles * K / tau))
    for _round in range(max_rounds):
        y = (1.0 - theta) * x + theta * z
        sampled = [k for k in range(K) if rng.random() < tau / K]
        z_new = z.copy()
        for k in sampled:
            if not masks[k].any():
                continue
            nodes_k = partition.block_nodes[k]
            step = (tau * alphas[k]) / (K * theta)
            grad = objective.block_gradient(y, k)
            z_k = z[nodes_k] - step * grad
            z_k[~masks[k]] = 0.0
            np.clip(z_k, 0.0, 1.0, out=z_k)
            z_new[nodes_k] = z_k
        x_new = y + (K / tau) * theta * (z_new - z)
        delta = float(np.linalg.norm(x_new - x))
        x, z = x_new, z_new
        theta = theta_next(theta)
        if delta <= config.inner_tol:
            break
    np.clip(x, 0.0, 1.0, out=x)
    for k in range(K):
        x_k = x[partition.block_nodes[k]]
        x_k[~masks[k]] = 0.0
        x[partition.block_nodes[k]] = x_k
    return x


def gbgp_solve(
    objective: ObjectiveSpec,
    config: SolverConfig,
    x0: Optional[np.ndarray] = None,
) -> DetectionResult:
    """Head-project, minimize restricted, tail-project until converged.

    Returns the per-block tail supports of the final iteration together
    with the continuous iterate and convergence history.
    """
    partition = objective.partition
    K = partition.num_blocks
    block_graphs = [partition.block_graph(k) for k in range(K)]
    budgets = [
        config.budget_for(k, len(partition.block_nodes[k])) if len(partition.block_nodes[k]) else 0
        for k in range(K)
    ]
    rng = np.random.default_rng(config.seed)

    pool = None
    if config.parallel >= 2 and K > 1:
        workers = min(config.parallel, os.cpu_count() or 1, K)
        if workers >= 2:
            pool = ProcessPoolExecutor(
                max_workers=workers, initializer=_pool_init, initargs=(block_graphs,)
            )

    def project_blocks(kind: str, tasks: list[tuple]) -> dict:
        if pool is None:
            out = {}
            for task in tasks:
                _, k, values, budget, kwargs = task
                project = head_project if kind == "head" else tail_project
                out[k] = project(values, block_graphs[k], budget, block_id=k, **kwargs)
            return out
        chunk = max(1, math.ceil(len(tasks) / pool._max_workers))
        return dict(pool.map(_pool_project, tasks, chunksize=chunk))

    x = objective.initial_x() if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    history: list[tuple[int, float, float, float]] = []
    iterates: list[IterateRecord] = []
    wall = {"head": 0.0, "inner": 0.0, "tail": 0.0}
    converged = False
    tail_supports: list[SupportSet] = [SupportSet(k, ()) for k in range(K)]
    outer = 0
    head_mults: list[Optional[float]] = [None] * K
    tail_mults: list[Optional[float]] = [None] * K
    x_history: list[np.ndarray] = []

    try:
        for outer in range(1, config.max_outer_iters + 1):
            iter_start = time.perf_counter()
            f_x = objective.value(x)
            if not np.isfinite(f_x):
                raise RuntimeError(f"objective is non-finite at outer iteration {outer}")

            t0 = time.perf_counter()
            head_tasks = []
            for k in range(K):
                nodes_k = partition.block_nodes[k]
                if len(nodes_k) == 0:
                    continue
                grad_k = _box_projected_gradient(
                    objective.block_gradient(x, k), x[nodes_k]
                )
                head_tasks.append(
                    (
                        "head",
                        k,
                        grad_k,
                        budgets[k],
                        dict(
                            num_components=config.num_components,
                            capacity_mode=config.head_capacity_mode,
                            max_iterations=config.max_search_iterations,
                            initial_multiplier=head_mults[k],
                        ),
                    )
                )
            head_outcomes = project_blocks("head", head_tasks)
            head_sets: list[set[int]] = []
            omega_sets: list[set[int]] = []
            for k in range(K):
                nodes_k = partition.block_nodes[k]
                if len(nodes_k) == 0:
                    head_sets.append(set())
                    omega_sets.append(set())
                    continue
                outcome = head_outcomes[k]
                head_mults[k] = outcome.multiplier
                gamma = set(outcome.support.nodes)
                supp = set(np.flatnonzero(x[nodes_k] != 0.0).tolist())
                head_sets.append(gamma)
                omega_sets.append(gamma | supp)
            wall["head"] += time.perf_counter() - t0

            t0 = time.perf_counter()
            if config.parallel >= 2 and K > 1:
                b = parallel_bcd_solve(objective, omega_sets, x, config, rng)
            else:
                b = bcd_solve(objective, omega_sets, x, config)
            wall["inner"] += time.perf_counter() - t0

            t0 = time.perf_counter()
            tail_tasks = []
            for k in range(K):
                nodes_k = partition.block_nodes[k]
                if len(nodes_k) == 0:
                    continue
                tail_tasks.append(
                    (
                        "tail",
                        k,
                        b[nodes_k],
                        budgets[k],
                        dict(
                            num_components=config.num_components,
                            max_iterations=config.max_search_iterations,
                            initial_multiplier=tail_mults[k],
                        ),
                    )
                )
            tail_outcomes = project_blocks("tail", tail_tasks)
            x_new = np.zeros_like(x)
            tail_sets: list[set[int]] = []
            new_supports: list[SupportSet] = []
            for k in range(K):
                nodes_k = partition.block_nodes[k]
                if len(nodes_k) == 0:
                    tail_sets.append(set())
                    new_supports.append(SupportSet(k, ()))
                    continue
                outcome = tail_outcomes[k]
                tail_mults[k] = outcome.multiplier
                psi = list(outcome.support.nodes)
                tail_sets.append(set(psi))
                b_k = b[nodes_k]
                kept = np.zeros_like(b_k)
                kept[psi] = b_k[psi]
                x_new[nodes_k] = kept
                new_supports.append(SupportSet(k, partition.to_global(k, psi)))
            wall["tail"] += time.perf_counter() - t0

            delta = sum(
                float(np.linalg.norm(x_new[partition.block_nodes[k]] - x[partition.block_nodes[k]]))
                for k in range(K)
            )
            wall_ms = (time.perf_counter() - iter_start) * 1e3
            history.append((outer, delta, f_x, wall_ms))
            iterates.append(
                IterateRecord(
                    iteration=outer,
                    head_sets=[frozenset(s) for s in head_sets],
                    omega_sets=[frozenset(s) for s in omega_sets],
                    tail_sets=[frozenset(s) for s in tail_sets],
                    support_after=[
                        frozenset(np.flatnonzero(x_new[partition.block_nodes[k]] != 0.0).tolist())
                        for k in range(K)
                    ],
                    delta=delta,
                    objective=f_x,
                )
            )
            x = x_new
            tail_supports = new_supports
            if config.keep_x_history:
                x_history.append(x.copy())
            if config.outer_tol > 0 and delta <= config.outer_tol:
                converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown()

    return DetectionResult(
        supports=tail_supports,
        x_final=x,
        outer_iters=outer,
        converged=converged,
        history=history,
        iterates=iterates,
        wall_times=wall,
        x_history=x_history,
    )
