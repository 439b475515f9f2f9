"""Finite-difference audit of the adjoint gradient.

Draws random (initial state, control sequence) pairs on a scenario's horizon
problem and compares the adjoint gradient against central differences of the
cost, component by component.  The error is relative to max(1, |reference|)
so near-zero components are judged on absolute error.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .ocp import ShootingProblem
from .scenario import ScenarioConfig


@dataclass(frozen=True)
class AuditResult:
    horizon: int
    probes: int
    max_rel_err: float


def central_difference_gradient(cost, u: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central differences with the step scaled per component magnitude."""
    g = np.empty_like(u)
    for i in range(u.shape[0]):
        h = step * max(1.0, abs(u[i]))
        up = u.copy()
        up[i] += h
        dn = u.copy()
        dn[i] -= h
        g[i] = (cost(up) - cost(dn)) / (2.0 * h)
    return g


def _random_state(rng: np.random.Generator) -> np.ndarray:
    x = np.empty(8)
    x[0:2] = rng.uniform(-3.0, 3.0, 2)
    x[2] = rng.uniform(0.2, 2.5)
    x[3:6] = rng.uniform(-1.0, 1.0, 3)
    x[6:8] = rng.uniform(-0.3, 0.3, 2)
    return x


def audit_scenario(scenario: ScenarioConfig,
                   horizons: Sequence[int] = (1, 5, 40),
                   n_probes: int = 100,
                   seed: int = 0,
                   fd_step: float = 1e-6) -> list[AuditResult]:
    """Spread ``n_probes`` random probes across the given horizons and return
    the worst relative error for each."""
    rng = np.random.default_rng(seed)
    results = []
    counts = [n_probes // len(horizons)] * len(horizons)
    for i in range(n_probes - sum(counts)):
        counts[i] += 1
    for horizon, count in zip(horizons, counts):
        cfg = replace(scenario.ocp, horizon=horizon)
        lower, upper = cfg.input_box()
        worst = 0.0
        for _ in range(count):
            x0 = _random_state(rng)
            u = rng.uniform(lower, upper)
            problem = ShootingProblem(cfg, x0)
            _, g_adj = problem.cost_and_grad(u)
            g_fd = central_difference_gradient(problem.cost, u, fd_step)
            rel = np.abs(g_adj - g_fd) / np.maximum(1.0, np.abs(g_fd))
            worst = max(worst, float(rel.max()))
        results.append(AuditResult(horizon=horizon, probes=count, max_rel_err=worst))
    return results
