"""Numerical solution of the reformulated Volterra equation.

Both solvers work with the same discrete operator ``T_h``: product
trapezoidal quadrature for the outer kernel of order ``beta`` and for each
inner Riemann-Liouville integral. ``picard_solve`` iterates ``v <- T_h v``
on the whole grid; ``step_solve`` marches node by node, where the only
unknown at ``t_i`` is ``v(t_i)`` itself.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import Grid, GridFunction, gamma
from .errors import ConvergenceError, HypothesisError, UnsupportedCaseError
from .problem import (
    HypothesisReport,
    ProblemSpec,
    VolterraProblem,
    CaseTag,
    check_hypotheses,
    classify,
    reconstruct_u,
    reformulate,
)

__all__ = [
    "SolverConfig",
    "ConvergenceLog",
    "DiscreteOperator",
    "Solution",
    "picard_solve",
    "step_solve",
    "solve_ivp",
]

log = logging.getLogger(__name__)

MODES = ("picard", "step")


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-8
    max_iterations: int = 200
    damping: float = 0.5
    mode: str = "picard"

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class ConvergenceLog:
    """Iteration history.

    For Picard mode ``updates[k]`` is ``max|v_{k+1} - v_k|``. For step mode
    it holds the final fixed-point gap at each node. ``ball_radii[k]`` is
    ``max|v_k - P|`` for every iterate, starting from ``v_0 = P``.
    """

    mode: str
    updates: list = field(default_factory=list)
    ball_radii: list = field(default_factory=list)
    residual: float = float("nan")
    converged: bool = False
    iterations: int = 0
    message: str = ""


class DiscreteOperator:
    """``T_h v = P + J^beta_h f(t, J^gamma_h v, ...)`` on a fixed grid."""

    def __init__(self, vp: VolterraProblem, grid: Grid):
        self.vp = vp
        self.grid = grid
        self.t = grid.nodes
        self.P = vp.forcing(self.t)
        self.outer = grid.weights(vp.outer_order) / gamma(vp.outer_order)
        self.inner = [
            None if g == 0 else grid.weights(g) / gamma(g) for g in vp.inner_orders
        ]

    def arguments(self, v: np.ndarray) -> list:
        return [v if W is None else W @ v for W in self.inner]

    def integrand(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(self.vp.rhs(self.t, *self.arguments(v)), dtype=float)

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self.P + self.outer @ self.integrand(v)

    def defect(self, v: np.ndarray) -> float:
        return float(np.max(np.abs(v - self(v))))


def picard_solve(vp: VolterraProblem, grid: Grid, cfg: SolverConfig = SolverConfig()):
    """Successive substitution ``v_{k+1} = T_h v_k`` from ``v_0 = P``.

    Returns ``(v, log)``. Failure to converge within ``cfg.max_iterations``
    is reported through ``log.converged``, not raised.
    """
    T = DiscreteOperator(vp, grid)
    v = T.P.copy()
    clog = ConvergenceLog(mode="picard", ball_radii=[0.0])
    for k in range(cfg.max_iterations):
        new = T(v)
        if not np.all(np.isfinite(new)):
            clog.message = f"iterate {k + 1} is not finite"
            break
        upd = float(np.max(np.abs(new - v)))
        v = new
        clog.updates.append(upd)
        clog.ball_radii.append(float(np.max(np.abs(v - T.P))))
        clog.iterations = k + 1
        if upd <= cfg.tolerance:
            clog.converged = True
            break
    else:
        clog.message = f"no convergence after {cfg.max_iterations} iterations"
    if np.all(np.isfinite(v)):
        clog.residual = T.defect(v)
        return GridFunction(grid, v), clog
    raise ConvergenceError(clog.message or "Picard iteration diverged")


def step_solve(vp: VolterraProblem, grid: Grid, cfg: SolverConfig = SolverConfig()):
    """March over the nodes, solving for ``v(t_i)`` by damped fixed-point iteration.

    Raises :class:`ConvergenceError` naming the node where the local
    iteration fails to converge.
    """
    T = DiscreteOperator(vp, grid)
    t, P = T.t, T.P
    n = t.size
    f = vp.rhs
    d = cfg.damping
    v = np.zeros(n)
    g = np.zeros(n)
    clog = ConvergenceLog(mode="step")

    def args_at(i, x):
        out = []
        for j, W in enumerate(T.inner):
            out.append(x if W is None else hist_y[j] + W[i, i] * x)
        return out

    for i in range(n):
        hist_y = [0.0 if W is None else float(W[i, :i] @ v[:i]) for W in T.inner]
        hist_g = float(T.outer[i, :i] @ g[:i])
        diag = T.outer[i, i]
        x = v[i - 1] if i else P[0]
        gap = np.inf
        for it in range(cfg.max_iterations):
            gx = P[i] + hist_g + diag * f(t[i], *args_at(i, x))
            gap = abs(gx - x)
            clog.iterations += 1
            if gap <= cfg.tolerance:
                x = gx
                break
            x = x + d * (gx - x)
        else:
            raise ConvergenceError(
                f"node {i} (t={t[i]:.6g}) did not converge: gap {gap:.3e}", node=i
            )
        v[i] = x
        g[i] = f(t[i], *args_at(i, x))
        clog.updates.append(float(gap))
    clog.converged = True
    clog.residual = T.defect(v)
    clog.ball_radii = [0.0, float(np.max(np.abs(v - P)))]
    return GridFunction(grid, v), clog


@dataclass
class Solution:
    u: GridFunction
    v: GridFunction
    log: ConvergenceLog
    case: CaseTag
    hypotheses: HypothesisReport | None
    problem: VolterraProblem

    def __iter__(self):
        # allows ``u, v, log = solve_ivp(...)``
        return iter((self.u, self.v, self.log))


def solve_ivp(spec: ProblemSpec, grid: Grid, cfg: SolverConfig = SolverConfig(), *,
              force: bool = False, fractional_reconstruction: bool = False,
              hypothesis_tol: float = 1e-12) -> Solution:
    """Classify, check hypotheses, reformulate, solve for ``v`` and rebuild ``u``."""
    tag = classify(spec)
    report = None
    if tag.supported:
        report = check_hypotheses(spec, tag, hypothesis_tol)
        if not report.satisfied:
            names = ", ".join(h.name for h in report.violations())
            if not force:
                raise HypothesisError(f"{tag}: hypotheses violated: {names}", report)
            log.warning("%s: proceeding despite violated hypotheses: %s", tag, names)
    elif not force:
        raise UnsupportedCaseError(str(tag))
    vp = reformulate(spec, tag, force=force,
                     fractional_reconstruction=fractional_reconstruction)
    if cfg.mode == "picard":
        v, clog = picard_solve(vp, grid, cfg)
    else:
        v, clog = step_solve(vp, grid, cfg)
    u = reconstruct_u(v, vp)
    return Solution(u, v, clog, tag, report, vp)
