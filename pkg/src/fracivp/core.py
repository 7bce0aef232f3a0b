"""Fractional calculus primitives on (graded) grids.

Riemann-Liouville integrals are discretized by product integration: the
sampled function is replaced by its piecewise-linear interpolant, which is
then integrated exactly against the weakly singular kernel ``(t - s)**(delta - 1)``.
Caputo derivatives are built from Newton divided differences followed by a
Riemann-Liouville integral of the complementary order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GridTooCoarseError

__all__ = [
    "gamma",
    "rgamma",
    "Grid",
    "GridFunction",
    "Samples",
    "graded_grid",
    "rl_power_rule",
    "quad_weights",
    "rl_integral",
    "nodal_derivative",
    "caputo_derivative",
]

# Lanczos approximation, g = 7, nine terms.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_MAX_EXACT = 30
_FACTORIALS = np.array([float(math.factorial(k)) for k in range(_MAX_EXACT)])


def _lanczos(x: np.ndarray) -> np.ndarray:
    # valid for x >= 0.5
    z = x - 1.0
    acc = np.full_like(z, _LANCZOS_COEF[0])
    for k, c in enumerate(_LANCZOS_COEF[1:], start=1):
        acc = acc + c / (z + k)
    t = z + _LANCZOS_G + 0.5
    return _SQRT_2PI * np.exp((z + 0.5) * np.log(t) - t) * acc


def gamma(x):
    """Gamma function for positive real arguments.

    Accepts a scalar or an array and returns the same shape. Uses the
    Lanczos approximation on ``x >= 0.5`` and the reflection formula below.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        bad = arr[~(np.isfinite(arr) & (arr > 0.0))].ravel()[0]
        raise DomainError(f"gamma is only defined here for x > 0, got {bad!r}")
    out = np.empty_like(arr)
    hi = arr >= 0.5
    out[hi] = _lanczos(arr[hi])
    lo = ~hi
    if np.any(lo):
        xl = arr[lo]
        out[lo] = math.pi / (np.sin(math.pi * xl) * _lanczos(1.0 - xl))
    # exact factorials at small positive integers
    ints = (arr == np.round(arr)) & (arr <= _MAX_EXACT)
    if np.any(ints):
        out[ints] = _FACTORIALS[arr[ints].astype(int) - 1]
    if out.ndim == 0:
        return float(out)
    return out


def rgamma(x: float) -> float:
    """Reciprocal gamma for any real scalar; zero at the poles 0, -1, -2, ..."""
    if x > 0:
        return 1.0 / gamma(x)
    if float(x).is_integer():
        return 0.0
    # reflection: 1/Gamma(x) = sin(pi x) Gamma(1 - x) / pi
    return math.sin(math.pi * x) * gamma(1.0 - x) / math.pi


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing nodes on ``[0, T]`` with ``nodes[0] == 0``."""

    nodes: np.ndarray
    grading: float = 1.0
    _weights: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("a grid needs at least 2 nodes")
        if nodes[0] != 0.0:
            raise ValueError("grid must start at 0")
        if not np.all(np.isfinite(nodes)) or np.any(np.diff(nodes) <= 0.0):
            raise ValueError("grid nodes must be finite and strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    def __len__(self) -> int:
        return self.nodes.size

    def weights(self, beta: float) -> np.ndarray:
        """Cached :func:`quad_weights` table for this grid."""
        key = float(beta)
        if key not in self._weights:
            w = quad_weights(key, self)
            w.setflags(write=False)
            self._weights[key] = w
        return self._weights[key]


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise ValueError(
                f"expected {self.grid.nodes.size} values, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @classmethod
    def sample(cls, grid: Grid, fn) -> "GridFunction":
        return cls(grid, fn(grid.nodes))


@dataclass(frozen=True, eq=False)
class Samples:
    """Values on a tail ``nodes >= epsilon`` of a grid (no start-at-0 rule)."""

    nodes: np.ndarray
    values: np.ndarray
    epsilon: float = 0.0


def graded_grid(T: float, N: int, r: float = 2.0) -> Grid:
    """Nodes ``T * (j / N)**r`` for ``j = 0..N``."""
    if not T > 0:
        raise ValueError("T must be positive")
    if N < 2:
        raise ValueError("N must be at least 2")
    if r < 1:
        raise ValueError("grading exponent must be >= 1")
    j = np.arange(N + 1, dtype=float)
    nodes = T * (j / N) ** r
    nodes[-1] = T
    return Grid(nodes, grading=float(r))


def rl_power_rule(delta: float, mu: float) -> tuple[float, float]:
    """``J^delta t^mu = c t^(mu + delta)``; returns ``(c, mu + delta)``."""
    if mu <= -1:
        raise DomainError(f"power rule needs mu > -1, got {mu}")
    if delta < 0:
        raise DomainError(f"integration order must be >= 0, got {delta}")
    if delta == 0:
        return 1.0, float(mu)
    return gamma(mu + 1.0) / gamma(mu + 1.0 + delta), float(mu + delta)


def _rel_pow_diff(p, r):
    # (b**p - a**p) / b**p with a = b (1 - r), accurate for small r
    with np.errstate(divide="ignore"):
        return -np.expm1(p * np.log1p(-r))


def quad_weights(beta: float, grid: Grid, block: int = 256) -> np.ndarray:
    """Product-trapezoidal weight table for the kernel ``(t_i - s)**(beta - 1)``.

    Row ``i`` satisfies ``W[i] @ phi(nodes) == int_0^{t_i} (t_i - s)**(beta-1) phi(s) ds``
    for every ``phi`` that is piecewise linear on the grid. Entries above
    the diagonal are zero. The kernel is not divided by ``Gamma(beta)``.
    """
    if not beta > 0:
        raise DomainError(f"kernel order must be positive, got {beta}")
    t = grid.nodes
    n = t.size
    h = np.diff(t)
    W = np.zeros((n, n))
    for lo in range(1, n, block):
        hi = min(n, lo + block)
        ti = t[lo:hi, None]
        b = ti - t[None, :-1]              # distance to left cell end
        mask = b > 0
        b = np.where(mask, b, 1.0)
        r = np.minimum(h[None, :] / b, 1.0)
        e0 = _rel_pow_diff(beta, r)
        e1 = _rel_pow_diff(beta + 1.0, r)
        bb = b**beta
        full = bb * e0 / beta                       # int over cell of kernel
        right = bb * b / h[None, :] * (e0 / beta - e1 / (beta + 1.0))
        left = full - right
        left = np.where(mask, left, 0.0)
        right = np.where(mask, right, 0.0)
        W[lo:hi, :-1] += left
        W[lo:hi, 1:] += right
    return W


def rl_integral(f: GridFunction, delta: float) -> GridFunction:
    """Riemann-Liouville integral of order ``delta`` at every grid node."""
    if not delta > 0:
        raise DomainError(f"integration order must be positive, got {delta}")
    W = f.grid.weights(delta)
    return GridFunction(f.grid, (W @ f.values) / gamma(delta))


def _divided_differences(x: np.ndarray, y: np.ndarray, order: int) -> list:
    tables = [np.asarray(y, dtype=float)]
    for k in range(1, order + 1):
        prev = tables[-1]
        tables.append((prev[1:] - prev[:-1]) / (x[k:] - x[:-k]))
    return tables


def nodal_derivative(nodes, values, p: int) -> np.ndarray:
    """``p``-th derivative at every node from a local Newton interpolant.

    Each node uses the ``p + 2`` nodes closest to centered around it; the
    result is exact for polynomials of degree ``<= p + 1``.
    """
    x = np.asarray(nodes, dtype=float)
    y = np.asarray(values, dtype=float)
    if p == 0:
        return y.copy()
    n = x.size
    width = p + 2
    if n < width:
        raise GridTooCoarseError(
            f"order-{p} differences need at least {width} nodes, grid has {n}"
        )
    dd = _divided_differences(x, y, p + 1)
    idx = np.arange(n)
    start = np.clip(idx - (p + 1) // 2, 0, n - width)
    spread = np.zeros(n)
    for k in range(p + 1):
        spread += x - x[start + k]
    return math.factorial(p) * (dd[p][start] + dd[p + 1][start] * spread)


def caputo_derivative(u: GridFunction, beta: float, epsilon: float | None = None) -> Samples:
    """Caputo derivative ``J^(ceil(beta) - beta) u^(ceil(beta))`` on ``nodes >= epsilon``.

    ``epsilon`` defaults to the first node after 0; values closer to the
    origin are dropped because non-smooth ``u`` make them unreliable.
    """
    if not beta > 0:
        raise DomainError(f"derivative order must be positive, got {beta}")
    p = math.ceil(beta)
    grid = u.grid
    if len(grid) < p + 2:
        raise GridTooCoarseError(
            f"Caputo derivative of order {beta} needs at least {p + 2} nodes"
        )
    deriv = nodal_derivative(grid.nodes, u.values, p)
    if p != beta:
        deriv = rl_integral(GridFunction(grid, deriv), p - beta).values
    if epsilon is None:
        epsilon = float(grid.nodes[1])
    keep = grid.nodes >= epsilon
    return Samples(grid.nodes[keep].copy(), deriv[keep], float(epsilon))
