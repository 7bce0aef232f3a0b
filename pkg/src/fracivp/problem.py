"""Multi-term Caputo initial value problems and their Volterra reformulation.

The problem is ``D^{a_n} u = f(t, D^{a_1} u, ..., D^{a_{n-1}} u)`` with
``u^(i)(0)`` prescribed for ``i < ceil(a_n)``. Depending on which of
``a_{n-1}`` and ``a_n`` are integers, the problem is equivalent (for
solutions in ``C^{ceil(a_n)}``) to a Volterra equation for ``v = u^(m)``::

    v(t) = P(t) + J^beta f(t, J^gamma_1 v, ..., J^gamma_{n-1} v)(t)

from which ``u`` is recovered by ``m``-fold integration.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as _expr
from .core import GridFunction, Samples, caputo_derivative, rl_integral
from .errors import UnsupportedCaseError

__all__ = [
    "ProblemSpec",
    "Case",
    "CaseTag",
    "Hypothesis",
    "HypothesisReport",
    "VolterraProblem",
    "classify",
    "check_hypotheses",
    "reformulate",
    "reconstruct_u",
    "residual",
    "rhs_along",
    "NO_GUARANTEE",
]

HYPOTHESIS_TOL = 1e-12
NO_GUARANTEE = "no equivalence guarantee"


def _is_int(x: float) -> bool:
    return float(x).is_integer()


@dataclass(frozen=True)
class ProblemSpec:
    """An IVP ``D^{a_n} u = f(t, D^{a_1} u, ...)`` on ``[0, horizon]``.

    ``rhs`` may be given as source text; it is parsed with arity ``n - 1``.
    The ``y_j`` arguments of the right-hand side are ``D^{a_j} u`` in
    increasing order of ``a_j``.
    """

    orders: tuple
    initial_values: tuple
    horizon: float
    rhs: _expr.Expression

    def __post_init__(self):
        orders = tuple(float(a) for a in self.orders)
        init = tuple(float(c) for c in self.initial_values)
        if len(orders) < 2:
            raise ValueError("need at least two orders a_1 < ... < a_n")
        if orders[0] < 0:
            raise ValueError("orders must be non-negative")
        if any(b <= a for a, b in zip(orders, orders[1:])):
            raise ValueError(f"orders must be strictly increasing, got {orders}")
        if not all(math.isfinite(a) for a in orders + init):
            raise ValueError("orders and initial values must be finite")
        need = math.ceil(orders[-1])
        if len(init) != need:
            raise ValueError(
                f"order {orders[-1]} needs exactly {need} initial values, got {len(init)}"
            )
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError("horizon must be positive")
        rhs = self.rhs
        if isinstance(rhs, str):
            rhs = _expr.parse(rhs, len(orders) - 1)
        if rhs.arity != len(orders) - 1:
            raise ValueError(
                f"rhs arity {rhs.arity} does not match {len(orders) - 1} derivative arguments"
            )
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "initial_values", init)
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "rhs", rhs)

    @property
    def n(self) -> int:
        return len(self.orders)

    @property
    def top(self) -> float:
        return self.orders[-1]

    @property
    def sub(self) -> float:
        """Second highest order ``a_{n-1}``."""
        return self.orders[-2]


class Case(enum.Enum):
    A = "CaseA"
    B = "CaseB"
    C = "CaseC"
    UNSUPPORTED = "Unsupported"


@dataclass(frozen=True)
class CaseTag:
    case: Case
    reason: str = ""

    @property
    def supported(self) -> bool:
        return self.case is not Case.UNSUPPORTED

    def __str__(self):
        if self.supported:
            return self.case.value
        return f"{self.case.value}: {self.reason}"


def classify(spec: ProblemSpec) -> CaseTag:
    """Sort the problem into one of the three equivalence cases."""
    sub, top = spec.sub, spec.top
    sub_int, top_int = _is_int(sub), _is_int(top)
    csub = math.ceil(sub)
    if sub == 0:
        return CaseTag(Case.UNSUPPORTED, "a_{n-1} = 0 leaves no derivative to substitute")
    if not sub_int and not top_int:
        if csub + 1 < top:
            return CaseTag(Case.A)
        return CaseTag(
            Case.UNSUPPORTED,
            f"ceil(a_(n-1)) + 1 = {csub + 1:g} >= a_n = {top:g} (needs ceil(a_(n-1)) + 1 < a_n)",
        )
    if sub_int and not top_int:
        if sub + 1 < top:
            return CaseTag(Case.B)
        return CaseTag(
            Case.UNSUPPORTED,
            f"a_(n-1) + 1 = {sub + 1:g} >= a_n = {top:g} (needs a_(n-1) + 1 < a_n)",
        )
    if not sub_int and top_int:
        if csub + 1 <= top:
            return CaseTag(Case.C)
        return CaseTag(
            Case.UNSUPPORTED,
            f"ceil(a_(n-1)) + 1 = {csub + 1:g} > a_n = {top:g} (needs ceil(a_(n-1)) + 1 <= a_n)",
        )
    return CaseTag(Case.UNSUPPORTED, "a_(n-1) and a_n are both integers")


@dataclass(frozen=True)
class Hypothesis:
    name: str
    satisfied: bool
    measured: float | None = None
    note: str = ""


@dataclass(frozen=True)
class HypothesisReport:
    case: CaseTag
    items: tuple
    tolerance: float = HYPOTHESIS_TOL

    @property
    def satisfied(self) -> bool:
        return all(h.satisfied for h in self.items)

    def violations(self):
        return [h for h in self.items if not h.satisfied]


def check_hypotheses(spec: ProblemSpec, tag: CaseTag, tol: float = HYPOTHESIS_TOL) -> HypothesisReport:
    """Evaluate the algebraic hypotheses required by ``tag``."""
    if not tag.supported:
        raise UnsupportedCaseError(f"no hypotheses to check: {tag}")
    k = spec.n - 1
    f = spec.rhs
    items = []
    if tag.case is Case.A:
        val = f(0.0, *([0.0] * k))
        items.append(Hypothesis("f(0, 0, ..., 0) = 0", abs(val) <= tol, val))
        idx = math.ceil(spec.sub)
        u0 = spec.initial_values[idx]
        items.append(Hypothesis(f"u0^({idx}) = 0", abs(u0) <= tol, u0))
        items.append(Hypothesis("f continuously differentiable", True, None,
                                "assumed, not verified"))
    elif tag.case is Case.B:
        idx = int(spec.sub)
        args = [0.0] * (k - 1) + [spec.initial_values[idx]]
        val = f(0.0, *args)
        note = ""
        if k > 1:
            note = "zeros assumed in all slots except the last"
        items.append(Hypothesis(f"f(0, ..., u0^({idx})) = 0", abs(val) <= tol, val, note))
        items.append(Hypothesis("f continuously differentiable", True, None,
                                "assumed, not verified"))
    else:
        ts = np.linspace(0.0, spec.horizon, 11)
        count = 0
        for ys in itertools.product((-1.0, 0.0, 1.0), repeat=k):
            f(ts, *[np.full_like(ts, y) for y in ys])
            count += ts.size
        items.append(Hypothesis("f continuous", True, float(count),
                                "evaluated on a sample lattice; continuity assumed"))
    return HypothesisReport(tag, tuple(items), tol)


@dataclass(frozen=True)
class VolterraProblem:
    """``v = P + J^beta f(t, J^gamma_1 v, ...)`` with ``u`` recovered from ``v``.

    ``forcing_poly[i]`` is the coefficient of ``t**i`` in ``P``. An inner
    order of 0 means the corresponding argument is ``v`` itself.
    """

    case: CaseTag
    reconstruction_order: float
    forcing_poly: tuple
    outer_order: float
    inner_orders: tuple
    rhs: _expr.Expression
    lower_initials: tuple
    horizon: float
    forced: bool = False
    fractional: bool = False
    notes: tuple = field(default=())

    def __post_init__(self):
        if not self.outer_order > 0:
            raise ValueError(f"outer order must be positive, got {self.outer_order}")
        if any(g < 0 for g in self.inner_orders):
            raise ValueError(f"inner orders must be >= 0, got {self.inner_orders}")

    @property
    def watermark(self) -> str:
        return NO_GUARANTEE if self.forced else ""

    def forcing(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for i, c in enumerate(self.forcing_poly):
            out = out + c * t**i
        return out

    def orders(self) -> tuple:
        m = self.reconstruction_order
        return tuple(m - g for g in self.inner_orders) + (m + self.outer_order,)

    def initial_values(self) -> tuple:
        tail = tuple(c * math.factorial(i) for i, c in enumerate(self.forcing_poly))
        return self.lower_initials + tail


def reformulate(spec: ProblemSpec, tag: CaseTag, *, force: bool = False,
                fractional_reconstruction: bool = False) -> VolterraProblem:
    """Build the Volterra equation for ``v = u^(m)``.

    Unsupported problems are rejected unless ``force`` is set; forced
    reformulations carry the "no equivalence guarantee" watermark. When
    ``ceil(a_{n-1}) == ceil(a_n)`` the forced form integrates ``v`` to
    the fractional order ``a_{n-1}``, which additionally requires
    ``fractional_reconstruction``.
    """
    sub, top = spec.sub, spec.top
    u0 = spec.initial_values
    notes = []
    fractional = False
    if tag.case in (Case.A, Case.C):
        m = math.ceil(sub)
    elif tag.case is Case.B:
        m = int(sub)
    else:
        if not force:
            raise UnsupportedCaseError(f"cannot reformulate: {tag}")
        notes.append(NO_GUARANTEE)
        if math.ceil(sub) < math.ceil(top):
            m = math.ceil(sub)
        else:
            if not fractional_reconstruction:
                raise UnsupportedCaseError(
                    "ceil(a_(n-1)) == ceil(a_n): forcing this problem needs "
                    "fractional reconstruction"
                )
            m = sub
            fractional = not _is_int(sub)
    if fractional:
        forcing = ()
        lower = u0[: math.ceil(m)]
        notes.append(f"fractional reconstruction of order {m:g}")
    else:
        forcing = tuple(u0[i + m] / math.factorial(i) for i in range(len(u0) - m))
        lower = u0[:m]
    inner = tuple(m - a for a in spec.orders[:-1])
    return VolterraProblem(
        case=tag,
        reconstruction_order=float(m),
        forcing_poly=forcing,
        outer_order=top - m,
        inner_orders=inner,
        rhs=spec.rhs,
        lower_initials=tuple(lower),
        horizon=spec.horizon,
        forced=not tag.supported,
        fractional=fractional,
        notes=tuple(notes),
    )


def reconstruct_u(v: GridFunction, vp: VolterraProblem) -> GridFunction:
    """``u = sum_{i} t^i/i! u0^(i) + J^m v``."""
    t = v.grid.nodes
    poly = np.zeros_like(t)
    for i, c in enumerate(vp.lower_initials):
        poly += c * t**i / math.factorial(i)
    m = vp.reconstruction_order
    if m == 0:
        return GridFunction(v.grid, poly + v.values)
    return GridFunction(v.grid, poly + rl_integral(v, m).values)


def _derivative_args(u: GridFunction, orders, epsilon):
    args = []
    for a in orders:
        if a == 0:
            keep = u.grid.nodes >= epsilon
            args.append(u.values[keep])
        else:
            args.append(caputo_derivative(u, a, epsilon).values)
    return args


def rhs_along(u: GridFunction, spec: ProblemSpec, epsilon: float) -> Samples:
    """``f(t, D^{a_1} u(t), ...)`` at nodes ``>= epsilon``."""
    keep = u.grid.nodes >= epsilon
    t = u.grid.nodes[keep]
    args = _derivative_args(u, spec.orders[:-1], epsilon)
    return Samples(t, np.asarray(spec.rhs(t, *args), dtype=float), epsilon)


def residual(u: GridFunction, spec: ProblemSpec, epsilon: float | None = None) -> Samples:
    """``D^{a_n} u - f(t, D^{a_1} u, ..., D^{a_{n-1}} u)`` on nodes ``>= epsilon``."""
    if epsilon is None:
        epsilon = float(u.grid.nodes[1])
    lhs = caputo_derivative(u, spec.top, epsilon)
    rhs = rhs_along(u, spec, epsilon)
    return Samples(lhs.nodes, lhs.values - rhs.values, epsilon)
