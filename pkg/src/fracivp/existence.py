"""Local existence certificates.

For a radius ``k`` the ball ``B = {v : ||v - P|| <= k}`` is mapped into
itself by the Volterra operator on ``[0, h]`` as soon as
``M h**theta / Gamma(theta + 1) <= k``, where ``M`` bounds ``|f|`` on the
box ``G`` that the inner arguments of ``f`` can reach from ``B`` and
``theta`` is the outer kernel order. That gives::

    h = I                                          if M == 0
    h = min(I, (k * Gamma(theta + 1) / M) ** (1 / theta))   otherwise
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import gamma, graded_grid
from .errors import DomainError
from .problem import CaseTag, ProblemSpec, VolterraProblem, classify, reformulate
from .solver import SolverConfig, picard_solve

__all__ = [
    "ExistenceCertificate",
    "SupEstimate",
    "g_box",
    "sup_estimate",
    "existence_interval",
    "certify",
    "ball_shadow",
]


def _volterra(spec, tag, force, fractional_reconstruction) -> VolterraProblem:
    return reformulate(spec, tag, force=force,
                       fractional_reconstruction=fractional_reconstruction)


def _box_from(vp: VolterraProblem, horizon: float, k: float) -> float:
    poly = sum(horizon**i * abs(c) for i, c in enumerate(vp.forcing_poly))
    radius = k + poly
    # one bound per inner argument; the cube uses the largest
    return max(horizon**g / gamma(g + 1.0) * radius for g in vp.inner_orders)


def g_box(spec: ProblemSpec, tag: CaseTag, k: float, *, force: bool = False,
          fractional_reconstruction: bool = False) -> float:
    """Half-width of the cube in which the arguments of ``f`` stay for ``v`` in ``B``."""
    if not k > 0:
        raise ValueError(f"radius k must be positive, got {k}")
    vp = _volterra(spec, tag, force, fractional_reconstruction)
    return _box_from(vp, spec.horizon, k)


@dataclass(frozen=True)
class SupEstimate:
    M: float                 # max |f| over the lattice
    M_signed: float          # max f over the lattice
    samples: int             # points per axis of the finest lattice
    points: int              # lattice points evaluated
    skipped: int = 0         # points where f is undefined (skip mode only)


def _lattice_sizes(samples: int):
    sizes = []
    s = samples
    while s >= 2:
        sizes.append(s)
        s = (s + 1) // 2 if s > 2 else 1
    return sizes


def sup_estimate(rhs, horizon: float, v_bound: float, samples: int = 101, *,
                 on_domain_error: str = "raise") -> SupEstimate:
    """Lattice estimate of ``sup |f|`` over ``[0, I] x [-b, b]^k``.

    The maximum is taken over the uniform lattice with ``samples`` points
    per axis together with its successively halved lattices, so doubling
    ``samples`` can never lower the estimate. With
    ``on_domain_error="skip"`` points where ``f`` is undefined are dropped
    and counted; otherwise the first one raises.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples per axis")
    if on_domain_error not in ("raise", "skip"):
        raise ValueError("on_domain_error must be 'raise' or 'skip'")
    k = rhs.arity
    best_abs, best = 0.0, -math.inf
    points = skipped = 0
    for s in _lattice_sizes(samples):
        ts = np.linspace(0.0, horizon, s)
        ys = np.linspace(-v_bound, v_bound, s)
        # one lattice row (fixed y-tuple, all t) per evaluation
        for combo in itertools.product(ys, repeat=k):
            points += s
            try:
                vals = rhs(ts, *[np.full(s, y) for y in combo])
            except DomainError:
                vals = []
                for t in ts:
                    try:
                        vals.append(rhs(float(t), *combo))
                    except DomainError as exc:
                        if on_domain_error == "raise":
                            point = (float(t),) + tuple(float(y) for y in combo)
                            raise DomainError(
                                f"f undefined on the lattice: {exc}", point=point
                            ) from exc
                        skipped += 1
                vals = np.asarray(vals, dtype=float)
            if vals.size:
                best_abs = max(best_abs, float(np.max(np.abs(vals))))
                best = max(best, float(np.max(vals)))
    return SupEstimate(best_abs, best, samples, points, skipped)


@dataclass(frozen=True)
class ExistenceCertificate:
    """Guaranteed existence interval ``[0, h]`` for radius ``k``.

    ``h`` follows the ball-invariance inequality with ``theta`` equal to
    the outer kernel order. ``theta_statement``/``h_statement`` use the
    integer-ceiling exponent ``ceil(a_n) - m`` for comparison, and
    ``M_signed`` records ``sup f`` next to the ``sup |f|`` that ``h`` uses.
    """

    case: str
    k: float
    box_bound: float
    M: float
    theta: float
    h: float
    horizon: float
    sample_count: int = 0
    M_signed: float | None = None
    M_source: str = "lattice"
    skipped_points: int = 0
    theta_statement: float | None = None
    h_statement: float | None = None
    forcing_poly: tuple = ()
    watermark: str = ""
    notes: tuple = field(default=())

    def as_dict(self) -> dict:
        return {
            "case": self.case,
            "k": self.k,
            "box_bound": self.box_bound,
            "M": self.M,
            "M_signed": self.M_signed,
            "M_source": self.M_source,
            "theta": self.theta,
            "h": self.h,
            "theta_statement": self.theta_statement,
            "h_statement": self.h_statement,
            "horizon": self.horizon,
            "sample_count": self.sample_count,
            "skipped_points": self.skipped_points,
            "watermark": self.watermark,
            "notes": list(self.notes),
        }


def _h(horizon, k, M, theta):
    if M == 0:
        return horizon
    return min(horizon, (k * gamma(theta + 1.0) / M) ** (1.0 / theta))


def existence_interval(spec: ProblemSpec, tag: CaseTag, k: float, M: float, *,
                       force: bool = False, fractional_reconstruction: bool = False,
                       sup: SupEstimate | None = None) -> ExistenceCertificate:
    """Certificate for radius ``k`` given a bound ``M >= sup |f|`` over the box."""
    if not k > 0:
        raise ValueError(f"radius k must be positive, got {k}")
    if not M >= 0:
        raise ValueError(f"M must be non-negative, got {M}")
    vp = _volterra(spec, tag, force, fractional_reconstruction)
    theta = vp.outer_order
    if vp.fractional:
        theta_stmt = theta
    else:
        theta_stmt = math.ceil(spec.top) - vp.reconstruction_order
    notes = list(vp.notes)
    if len(vp.inner_orders) > 1:
        notes.append("box is the cube over the largest per-argument bound")
    return ExistenceCertificate(
        case=str(tag),
        k=float(k),
        box_bound=_box_from(vp, spec.horizon, k),
        M=float(M),
        theta=theta,
        h=_h(spec.horizon, k, M, theta),
        horizon=spec.horizon,
        sample_count=sup.points if sup else 0,
        M_signed=sup.M_signed if sup else None,
        M_source="lattice" if sup else "user",
        skipped_points=sup.skipped if sup else 0,
        theta_statement=theta_stmt,
        h_statement=_h(spec.horizon, k, M, theta_stmt),
        forcing_poly=vp.forcing_poly,
        watermark=vp.watermark,
        notes=tuple(notes),
    )


def certify(spec: ProblemSpec, k: float = 1.0, samples: int = 101, *,
            bound: float | None = None, force: bool = False,
            fractional_reconstruction: bool = False,
            on_domain_error: str = "raise") -> ExistenceCertificate:
    """Classify, build the box, estimate ``M`` (unless ``bound`` is given) and compute ``h``."""
    tag = classify(spec)
    box = g_box(spec, tag, k, force=force,
                fractional_reconstruction=fractional_reconstruction)
    if bound is not None:
        return existence_interval(spec, tag, k, bound, force=force,
                                  fractional_reconstruction=fractional_reconstruction)
    sup = sup_estimate(spec.rhs, spec.horizon, box, samples,
                       on_domain_error=on_domain_error)
    return existence_interval(spec, tag, k, sup.M, force=force,
                              fractional_reconstruction=fractional_reconstruction,
                              sup=sup)


def ball_shadow(spec: ProblemSpec, cert: ExistenceCertificate, N: int = 512, r: float = 2.0,
                cfg: SolverConfig = SolverConfig(), *, force: bool = False,
                fractional_reconstruction: bool = False) -> float:
    """Largest ``max|v_k - P|`` over all Picard iterates on ``[0, h]``, divided by ``k``."""
    vp = _volterra(spec, classify(spec), force, fractional_reconstruction)
    _, clog = picard_solve(vp, graded_grid(cert.h, N, r), cfg)
    return max(clog.ball_radii) / cert.k
