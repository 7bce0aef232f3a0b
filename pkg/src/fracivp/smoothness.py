"""Numerical regularity diagnostics near ``t = 0``.

Two instruments:

* the ``C^1`` test for ``F(t) = int_0^t (t - s)**(-beta) g(s) ds``, which is
  continuously differentiable exactly when ``g(0) == 0``;
* a power-law fit of ``m``-th Newton divided differences against ``t`` on
  the first nodes of a graded grid. A clearly negative slope means the
  ``m``-th derivative blows up at the origin, so ``u`` is not ``C^m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import GridFunction
from .problem import ProblemSpec, rhs_along

__all__ = [
    "SmoothnessReport",
    "c1_criterion",
    "singular_exponent",
    "smoothness_report",
    "DEFAULT_WINDOW",
    "DEFAULT_MARGIN",
]

DEFAULT_WINDOW = (2, 32)
DEFAULT_MARGIN = 0.1
C1_TOL = 1e-12


def c1_criterion(g, beta: float, tolerance: float = C1_TOL):
    """Return ``(verdict, g(0))``; ``verdict`` is True iff ``|g(0)| <= tolerance``."""
    if not 0 < beta < 1:
        raise ValueError(f"kernel exponent must lie in (0, 1), got {beta}")
    g0 = float(g.values[0])
    return abs(g0) <= tolerance, g0


def _divided_differences(x, y, m):
    d = np.asarray(y, dtype=float)
    for k in range(1, m + 1):
        d = (d[1:] - d[:-1]) / (x[k:] - x[:-k])
    return d


def singular_exponent(u: GridFunction, m: int, window=DEFAULT_WINDOW):
    """Fit ``|u^(m)(t)| ~ C t**rho`` near 0; returns ``(rho, stderr)``.

    ``window = (first, last)`` selects the stencils that start at those
    node indices; each stencil is placed at its median node. If every
    difference in the window is negligible the derivative vanishes there
    and ``(inf, 0.0)`` is returned.
    """
    if m < 1:
        raise ValueError("derivative order must be >= 1")
    x = u.grid.nodes
    lo, hi = window
    lo = max(lo, 1)
    if hi + m >= x.size:
        raise ValueError("window runs past the end of the grid")
    if hi - lo + 1 < 8:
        raise ValueError("window must contain at least 8 nodes")
    d = _divided_differences(x, u.values, m) * math.factorial(m)
    idx = np.arange(lo, hi + 1)
    D = np.abs(d[idx])
    scale = np.max(np.abs(u.values)) / u.grid.T**m
    at = np.array([np.median(x[i:i + m + 1]) for i in idx])
    keep = D > 1e-8 * scale
    if keep.sum() < 3:
        return math.inf, 0.0
    lx, ly = np.log(at[keep]), np.log(D[keep])
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope = coef[0]
    resid = ly - A @ coef
    dof = max(len(lx) - 2, 1)
    stderr = math.sqrt(resid @ resid / dof / np.sum((lx - lx.mean()) ** 2))
    return float(slope), float(stderr)


@dataclass(frozen=True)
class SmoothnessReport:
    order: int
    g_at_zero: float
    c1_verdict: bool
    c1_beta: float | None        # None: a_n is an integer and the C^1 test does not apply
    singular_exponent: float
    exponent_stderr: float
    cm_verdict: bool
    window: tuple = DEFAULT_WINDOW
    margin: float = DEFAULT_MARGIN

    def as_dict(self) -> dict:
        return {
            "order": self.order,
            "g_at_zero": self.g_at_zero,
            "c1_verdict": self.c1_verdict,
            "c1_beta": self.c1_beta,
            "singular_exponent": self.singular_exponent,
            "exponent_stderr": self.exponent_stderr,
            "cm_verdict": self.cm_verdict,
            "window": list(self.window),
            "margin": self.margin,
        }


def _integrand(u: GridFunction, spec: ProblemSpec) -> GridFunction:
    g = rhs_along(u, spec, 0.0).values.copy()
    # derivative arguments at t = 0 are known exactly
    y0 = []
    for a in spec.orders[:-1]:
        if float(a).is_integer():
            y0.append(spec.initial_values[int(a)])
        else:
            y0.append(0.0)
    g[0] = spec.rhs(0.0, *y0)
    return GridFunction(u.grid, g)


def cm_from_exponent(rho: float, margin: float = DEFAULT_MARGIN) -> bool:
    return rho >= -margin


def smoothness_report(u: GridFunction, spec: ProblemSpec, window=DEFAULT_WINDOW,
                      margin: float = DEFAULT_MARGIN, tolerance: float = C1_TOL) -> SmoothnessReport:
    """Check ``u in C^{ceil(a_n)}`` near 0 and the ``C^1`` test on ``f`` along ``u``."""
    m = math.ceil(spec.top)
    rho, se = singular_exponent(u, m, window)
    g = _integrand(u, spec)
    beta = m - spec.top
    if 0 < beta < 1:
        c1, g0 = c1_criterion(g, beta, tolerance)
        c1_beta = beta
    else:
        c1, g0, c1_beta = True, float(g.values[0]), None
    return SmoothnessReport(
        order=m,
        g_at_zero=g0,
        c1_verdict=c1,
        c1_beta=c1_beta,
        singular_exponent=rho,
        exponent_stderr=se,
        cm_verdict=cm_from_exponent(rho, margin),
        window=tuple(window),
        margin=margin,
    )
