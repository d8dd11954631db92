"""Closed-form quantities: critical density, the implicit recursion and its root.

``g(u, v)`` is the recursion for the origin-visit probability with the trivial
factor ``(1 - v)`` removed: assembling the recursion from the blockade term,
the ``s``/``r`` terms and the change-of-measure relation gives
``(1 - v) * g(u, v) = 0``. The compact ``f1, f2, f3`` below are that
assembly. A shorter display form that drops part of the coalescence terms is
kept in :func:`g_display_eval`; the two agree whenever ``b = 0``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import ReactionParams

SCAN_POINTS = 2048
DEFAULT_TOL = 1e-12


class TheoryError(ArithmeticError):
    pass


class DegenerateDenominator(TheoryError):
    pass


class UnsupportedRatio(TheoryError):
    pass


class NoRootFound(TheoryError):
    pass


def pc_closed_form(params: ReactionParams) -> float:
    a, b, al, be = params.as_tuple()
    num = (1 - be) ** 2 - b * (1 - al)
    den = 4 - (a + b) * (1 - al) - be * (3 - al - be) - 3 * al
    if abs(den) < 1e-12:
        raise DegenerateDenominator(f"critical-density denominator vanishes for {params}")
    pc = num / den
    if not 0 < pc < 1:
        warnings.warn(f"critical density formula gives {pc:.6g} outside (0, 1) for {params}", RuntimeWarning)
    return pc


@dataclass(frozen=True)
class GParts:
    f1: float
    f2: float
    f3: float
    g: float


def g_eval(params: ReactionParams, u, v) -> GParts:
    """Evaluate the recursion ``g(u, v) = -v + (f1 + f2) / f3`` (array-friendly)."""
    a, b, al, be = params.as_tuple()
    c, xi = params.c, params.xi
    w = (be * v - 1) ** 2
    f1 = u * v * (((1 - al) * c - be * xi) * v + 2 * xi)
    f2 = w * (a * v - 2 * v - 1) + b * (1 - al) * v ** 2 * ((1 + be) * v - 1) + u
    f3 = w * (a - 2) + b * (1 - al) * v * ((1 + be) * v - 2)
    if np.any(np.asarray(f3) == 0):
        raise TheoryError(f"f3 vanishes at u={u}, v={v} for {params}")
    return GParts(f1, f2, f3, -v + (f1 + f2) / f3)


def g_display_eval(params: ReactionParams, u, v) -> GParts:
    """The recursion with the shorter display form of ``f1, f2, f3``.

    Agrees with :func:`g_eval` when ``b = 0``; for ``b > 0`` it does not vanish at
    ``(p_c, 1)`` and is kept only for comparison.
    """
    a, b, al, be = params.as_tuple()
    f1 = u * v * (-v * (-al * a + a + al + be * (al + be) * (b * v ** 2 - 1) - b * be * v * (v + 2) + b + be - 1)
                  - 2 * (al + be - 1))
    f2 = (be * v - 1) ** 2 * (v * (a + b * (v - 1) * v - 2) - 1) + u
    f3 = (be * v - 1) ** 2 * (a + b * (v - 2) * v - 2)
    return GParts(f1, f2, f3, -v + (f1 + f2) / f3)


def g(params: ReactionParams, u, v):
    return g_eval(params, u, v).g


class Branch(enum.Enum):
    SUBCRITICAL_ONE = "subcritical-one"
    SUPERCRITICAL_ROOT = "supercritical-root"


@dataclass(frozen=True)
class QSolution:
    p: float
    q: float
    branch: Branch
    residual: float


def _bisect(fun, lo: float, hi: float, f_lo: float, tol: float) -> float:
    # run to machine resolution; tol only bounds the bracket width we accept
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = fun(mid)
        if f_mid == 0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo < tol * 1e-3:
            break
    return 0.5 * (lo + hi)


def roots_in_unit_interval(params: ReactionParams, p: float, tol: float = DEFAULT_TOL,
                           points: int = SCAN_POINTS) -> list[float]:
    """All sign changes of ``g(p, .)`` on [0, 1], refined by bisection."""
    grid = np.linspace(0.0, 1.0, points + 1)
    vals = g(params, p, grid)
    roots = []
    for k in range(points):
        v0, v1 = vals[k], vals[k + 1]
        if v0 == 0:
            roots.append(float(grid[k]))
        elif v0 * v1 < 0:
            roots.append(_bisect(lambda v: g(params, p, v), float(grid[k]), float(grid[k + 1]), float(v0), tol))
    if vals[-1] == 0:
        roots.append(1.0)
    return roots


def solve_q(params: ReactionParams, p: float, tol: float = DEFAULT_TOL, continuation_steps: int = 256) -> QSolution:
    """Probability that the origin is visited in the one-sided system.

    ``q = 1`` for ``p <= p_c``; above ``p_c`` the root of ``g(p, .)`` in (0, 1)
    reached by continuation from ``q(1) = 0``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    pc = pc_closed_form(params)
    if p <= pc:
        return QSolution(p, 1.0, Branch.SUBCRITICAL_ONE, 0.0)
    if p == 1.0:
        return QSolution(p, 0.0, Branch.SUPERCRITICAL_ROOT, abs(float(g(params, 1.0, 0.0))))
    roots = roots_in_unit_interval(params, p, tol)
    if not roots:
        raise NoRootFound(f"no sign change of g({p}, v) on [0, 1] for {params}; p_c = {pc}")
    if len(roots) == 1:
        q = roots[0]
    else:
        q = 0.0
        for pp in np.linspace(1.0, p, continuation_steps + 1)[1:]:
            candidates = roots_in_unit_interval(params, float(pp), tol)
            if not candidates:
                raise NoRootFound(f"continuation lost the branch at p={pp} for {params}")
            q = min(candidates, key=lambda r: abs(r - q))
    residual = abs(float(g(params, p, q)))
    if residual >= max(tol, 1e-12):
        raise NoRootFound(f"root refinement stalled at q={q} (|g|={residual:.3g}) for {params}, p={p}")
    return QSolution(p, float(q), Branch.SUPERCRITICAL_ROOT, residual)


def q_curve(params: ReactionParams, ps, tol: float = DEFAULT_TOL) -> list[QSolution]:
    return [solve_q(params, float(p), tol) for p in ps]


def rec2_closed(params: ReactionParams, p: float, q: float) -> float:
    """P(origin visited and the first particle is a blockade)."""
    return (params.alpha * p * q + params.xi * p * q ** 2) / (1 - params.beta * q)


def s_parts(params: ReactionParams, p: float, p_hat: float, q: float) -> tuple[float, float]:
    """(weak, mutual) pieces of ``s``."""
    al, be, xi = params.alpha, params.beta, params.xi
    s_w = (p + p_hat) * be * q ** 2 * (xi * q + al) / (2 * (1 - be * q) ** 2)
    s_mu = (p + p_hat) * xi * q ** 2 / (2 * (1 - be * q))
    return s_w, s_mu


def r_parts(params: ReactionParams, p: float, p_hat: float, q: float) -> tuple[float, float]:
    """(weak, mutual) pieces of ``r``."""
    be, xi = params.beta, params.xi
    r_w = (p + p_hat) * be * q * (1 - q) * (2 + xi * q) / (2 * (1 - be * q) ** 2)
    r_mu = (p + p_hat) * xi * q * (1 - q) * (2 - be * q) / (2 * (1 - be * q) ** 2)
    return r_w, r_mu


def s_closed(params: ReactionParams, p: float, p_hat: float, q: float) -> float:
    """P(origin visited and the first right arrow is destroyed by a blockade)."""
    return (p + p_hat) * (1 - params.alpha) * (1 - params.beta) * q ** 2 / (2 * (1 - params.beta * q) ** 2)


def r_closed(params: ReactionParams, p: float, p_hat: float, q: float) -> float:
    """P(origin not visited and the first right arrow is destroyed by a blockade).

    Equals the sum of :func:`r_parts`; the factor is ``1 - alpha``.
    """
    return (p + p_hat) * (1 - params.alpha) * q * (1 - q) / (1 - params.beta * q) ** 2


def S_closed(beta: float, q: float) -> float:
    x = beta * q
    if not 0 <= x < 1:
        raise TheoryError("need 0 <= beta*q < 1")
    return 0.5 * (x / (1 - x)) ** 2


def triple_sum_closed(beta: float, q: float) -> float:
    x = beta * q
    if not 0 <= x < 1:
        raise TheoryError("need 0 <= beta*q < 1")
    return x ** 2 / (2 * (1 - x))


def hatp_from_mutual(params: ReactionParams, p_mutual: float) -> float:
    """Coalescence probability of the first right arrow from its mutual-annihilation probability."""
    if params.c == 0:
        raise UnsupportedRatio("c = 0: estimate the coalescence probability directly")
    return params.b / params.c * p_mutual


def recursion_rhs(params: ReactionParams, p: float, q: float) -> float:
    """Right-hand side of the recursion for ``q`` assembled term by term.

    ``p_hat`` is eliminated through its change-of-measure relation; the fixed
    point ``q = recursion_rhs(p, q)`` is equivalent to ``(1 - q) g(p, q) = 0``.
    Requires ``c > 0`` and ``p > 0``.
    """
    a, b = params.a, params.b
    c = params.c
    if c == 0 or p == 0:
        raise UnsupportedRatio("term-by-term recursion needs c > 0 and p > 0")
    blockade_term = rec2_closed(params, p, q)
    denom = 1 + a / (2 * c) + b / c
    # p_hat = (b/c) * M,  M = ((1-p)/2 - s - r) / denom, s and r linear in p_hat
    unit_s = s_closed(params, 1.0, 0.0, q)
    unit_r = r_closed(params, 1.0, 0.0, q)
    k = (b / c) / denom
    p_hat = k * ((1 - p) / 2 - p * (unit_s + unit_r)) / (1 + k * (unit_s + unit_r))
    s = s_closed(params, p, p_hat, q)
    r = r_closed(params, p, p_hat, q)
    m = ((1 - p) / 2 - s - r) / denom
    return (1 - p) / 2 + blockade_term + (q + a / (2 * c) + (b / c) * blockade_term / p) * m + s


def truncation_index(beta: float, bound: float = 1e-6) -> int:
    """Smallest K with beta^K (K+1) / (1-beta)^2 < bound."""
    if beta == 0:
        return 1
    k = 1
    while beta ** k * (k + 1) / (1 - beta) ** 2 >= bound:
        k += 1
    return k


def truncation_bound(beta: float, k: int) -> float:
    return 0.0 if beta == 0 else beta ** k * (k + 1) / (1 - beta) ** 2
