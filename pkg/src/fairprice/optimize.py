"""One-dimensional revenue maximization and the scalarized welfare objective."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .demand import eval_demand
from .errors import (
    DegenerateDemandError,
    MissingFieldError,
    PreconditionError,
    UpwardSlopeError,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PriceInterval:
    """Closed price interval searched by the 1-D maximizers."""

    lo: float
    hi: float
    grid_n: int = 4096

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise PreconditionError("price interval needs lo < hi")
        if self.grid_n < 64:
            raise PreconditionError("grid_n must be at least 64")


def monopoly_price_linear(dbar: float, beta: float) -> float:
    """Unconstrained revenue maximizer of ``p * (dbar + beta p)``.

    Requires a strictly negative slope; the optimum is ``-dbar / (2 beta)``.
    """
    if beta >= 0.0:
        raise UpwardSlopeError(f"price slope {beta:g} is not negative")
    return -dbar / (2.0 * beta)


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-8):
    """Maximize a unimodal scalar function on [lo, hi].

    Returns ``(argmax, value)``; endpoints are checked as well so a maximizer
    on the boundary is not missed.
    """
    a, b = float(lo), float(hi)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    candidates = [(x, f(x)), (lo, f(lo)), (hi, f(hi))]
    return max(candidates, key=lambda t: t[1])


def maximize_revenue_1d(curve, interval: PriceInterval, tol: float = 1e-8,
                        shift: float = 0.0, unimodal: bool = False):
    """Maximize ``(p - shift) * curve(p)`` over the interval.

    ``curve`` maps price to model-scale demand; ``shift`` is a unit cost.
    A coarse 64-point probe first rejects curves with no positive revenue
    anywhere on the interval. With ``unimodal=True`` the search is a single
    golden-section pass; otherwise a dense grid locates the best bracket and
    golden section refines it, which is robust to multiple local peaks.

    Returns ``(price, value)``.
    """

    def objective(p):
        return (p - shift) * curve(p)

    probe = np.linspace(interval.lo, interval.hi, 64)
    probe_vals = np.array([objective(p) for p in probe])
    if not np.any(probe_vals > 0.0):
        raise DegenerateDemandError(
            "objective is nonpositive across the whole price interval")
    if unimodal:
        return golden_section_max(objective, interval.lo, interval.hi, tol)
    grid = np.linspace(interval.lo, interval.hi, interval.grid_n)
    vals = np.array([objective(p) for p in grid])
    k = int(np.argmax(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    if lo == hi:
        return float(grid[k]), float(vals[k])
    return golden_section_max(objective, lo, hi, tol)


@dataclass(frozen=True)
class ScalarizationWeights:
    """Weights of the scalarized objective: revenue + access + outcomes.

    ``access_weight`` multiplies the sum of per-group expected take-up,
    ``outcome_weight`` multiplies the mean downstream outcome, ``parity_cap``
    and ``unit_cost`` parameterize the two reported constraint slacks.
    """

    access_weight: float = 0.0
    outcome_weight: float = 0.0
    parity_cap: float = math.inf
    unit_cost: float = 0.0


def scalarized_objective(policy, model, population, weights: ScalarizationWeights,
                         outcome=None):
    """Evaluate a policy against the scalarized objective on a population.

    Expectations run over the discrete support when the population has one,
    otherwise over its records. The value is

        E[P D] + access_weight * sum_g E[D | A=g] + outcome_weight * E[Y]

    and two slacks are reported alongside (nonnegative means satisfied):
    ``parity`` is ``parity_cap - max pairwise |E[P|a] - E[P|b]|`` and
    ``break_even`` is ``E[(P - unit_cost) D]``. ``outcome`` is a callable
    ``(x, a, p) -> expected outcome`` and is required iff outcome_weight != 0.

    Returns ``(value, slacks_dict)``.
    """
    if weights.outcome_weight != 0.0 and outcome is None:
        raise MissingFieldError(
            "outcome_weight is nonzero but no outcome model was given")

    rows = []  # (joint weight, group, x, price)
    if population.support is not None and population.membership is not None:
        joint = population.joint_weights()
        for i, x in enumerate(population.support):
            for k, g in enumerate(population.groups):
                w = float(joint[i, k])
                if w > 0.0:
                    rows.append((w, g, x, policy.price(x, g)))
    elif population.records:
        total = sum(r.weight for r in population.records)
        for r in population.records:
            rows.append((r.weight / total, r.group, r.covariates,
                         policy.price(r.covariates, r.group)))
    else:
        raise MissingFieldError("population has neither support nor records")

    revenue = 0.0
    margin = 0.0
    outcome_mean = 0.0
    group_mass = {g: 0.0 for g in population.groups}
    group_demand = {g: 0.0 for g in population.groups}
    group_price = {g: 0.0 for g in population.groups}
    for w, g, x, p in rows:
        d = eval_demand(model, x, g, p)
        revenue += w * p * d
        margin += w * (p - weights.unit_cost) * d
        group_mass[g] += w
        group_demand[g] += w * d
        group_price[g] += w * p
        if outcome is not None:
            outcome_mean += w * float(outcome(x, g, p))

    access = sum(group_demand[g] / group_mass[g]
                 for g in population.groups if group_mass[g] > 0.0)
    value = revenue + weights.access_weight * access
    if outcome is not None:
        value += weights.outcome_weight * outcome_mean

    means = [group_price[g] / group_mass[g]
             for g in population.groups if group_mass[g] > 0.0]
    disparity = max(means) - min(means) if len(means) > 1 else 0.0
    slacks = {
        "parity": (math.inf if math.isinf(weights.parity_cap)
                   else weights.parity_cap - disparity),
        "break_even": margin,
    }
    return value, slacks
