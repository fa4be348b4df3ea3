"""Fairness audits over pricing records and fitted models.

Record-level metrics (mean-price gaps, distributional tests, take-up parity,
concordance bounds) work directly on observed data; the decomposition tools
explain *why* two pricing rules diverge through a first-order expansion of
their first-order conditions.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .demand import PartiallyLinearDemand, eval_demand, demand_gradient
from .errors import (
    DecompositionError,
    InvalidRecordError,
    MissingFieldError,
    NoComputableMetricError,
    NoQualifyingPairsError,
    PreconditionError,
)
from .optimize import PriceInterval, maximize_revenue_1d
from .util import json_dumps_stable, worker_limit

_PAIR_CHUNK = 256


# ---------------------------------------------------------------------------
# report container
# ---------------------------------------------------------------------------


@dataclass
class AuditReport:
    """Bundle of audit metrics with stable serialization.

    ``metrics`` maps metric name to a value dict; metrics that could not be
    computed carry ``{"error": <code>}`` instead, and building a report in
    which nothing was computable raises.
    """

    n_records: int
    groups: tuple
    metrics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json_dumps_stable({
            "n_records": self.n_records,
            "groups": list(self.groups),
            "metrics": self.metrics,
        })

    def to_csv_rows(self) -> list:
        """Flatten to (metric, key, value) rows, header included."""
        rows = [("metric", "key", "value")]
        for name in sorted(self.metrics):
            value = self.metrics[name]
            if isinstance(value, dict):
                for key in sorted(value, key=str):
                    inner = value[key]
                    if isinstance(inner, dict):
                        for k2 in sorted(inner, key=str):
                            rows.append((name, f"{key}.{k2}", inner[k2]))
                    else:
                        rows.append((name, str(key), inner))
            else:
                rows.append((name, "", value))
        return rows


# ---------------------------------------------------------------------------
# record-level disparity metrics
# ---------------------------------------------------------------------------


def _group_arrays(records, fields=("price",)):
    by_group = {}
    for r in records:
        row = []
        for name in fields:
            v = getattr(r, name)
            if v is None:
                raise MissingFieldError(f"record {r.id}: {name} missing")
            row.append(float(v))
        by_group.setdefault(r.group, []).append(row + [r.weight])
    return {g: np.asarray(rows, dtype=float) for g, rows in by_group.items()}


def marginal_price_disparity(records) -> dict:
    """Weighted mean offered price per group and the largest pairwise gap."""
    if not records:
        raise MissingFieldError("no records")
    data = _group_arrays(records, ("price",))
    means = {}
    counts = {}
    for g, arr in sorted(data.items()):
        w = arr[:, -1]
        means[g] = float(arr[:, 0] @ w / w.sum())
        counts[g] = int(arr.shape[0])
    values = list(means.values())
    return {
        "price_mean": means,
        "count": counts,
        "max_gap": float(max(values) - min(values)) if len(values) > 1 else 0.0,
    }


def _weighted_ecdf_stat(x1, w1, x2, w2) -> float:
    pool = np.unique(np.concatenate([x1, x2]))
    order1 = np.argsort(x1, kind="stable")
    order2 = np.argsort(x2, kind="stable")
    c1 = np.concatenate([[0.0], np.cumsum(w1[order1])])
    c2 = np.concatenate([[0.0], np.cumsum(w2[order2])])
    f1 = c1[np.searchsorted(x1[order1], pool, side="right")] / c1[-1]
    f2 = c2[np.searchsorted(x2[order2], pool, side="right")] / c2[-1]
    return float(np.max(np.abs(f1 - f2)))


def two_sample_distribution_test(x1, w1, x2, w2, alpha: float = 0.05) -> dict:
    """Two-sample Kolmogorov-Smirnov test with weighted ECDFs.

    The rejection threshold uses the asymptotic quantile
    ``sqrt(-ln(alpha/2)/2) * sqrt((n1+n2)/(n1 n2))`` with effective sample
    sizes ``(sum w)^2 / sum w^2``.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    if x1.size == 0 or x2.size == 0:
        raise MissingFieldError("both samples must be nonempty")
    stat = _weighted_ecdf_stat(x1, w1, x2, w2)
    n1 = float(w1.sum() ** 2 / (w1 ** 2).sum())
    n2 = float(w2.sum() ** 2 / (w2 ** 2).sum())
    c = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    threshold = c * math.sqrt((n1 + n2) / (n1 * n2))
    return {
        "statistic": stat,
        "threshold": threshold,
        "reject": bool(stat > threshold),
        "alpha": alpha,
    }


def distributional_parity_stat(records, alpha: float = 0.05) -> dict:
    """KS distance between the two groups' offered-price distributions."""
    data = _group_arrays(records, ("price",))
    if len(data) != 2:
        raise PreconditionError(
            f"distributional parity compares exactly two groups, got {len(data)}")
    (ga, arr_a), (gb, arr_b) = sorted(data.items())
    out = two_sample_distribution_test(
        arr_a[:, 0], arr_a[:, -1], arr_b[:, 0], arr_b[:, -1], alpha)
    out["groups"] = [ga, gb]
    return out


def _strata(records):
    buckets = {}
    for r in records:
        key = tuple(float(v) for v in r.covariates)
        buckets.setdefault(key, []).append(r)
    return buckets


def conditional_parity_gap(records) -> dict:
    """Mean-price gap between groups within each exact covariate stratum.

    Strata where some group is absent are skipped; the summary value is the
    largest absolute within-stratum gap. Raises when no stratum is computable.
    """
    if not records:
        raise MissingFieldError("no records")
    groups = sorted({r.group for r in records})
    if len(groups) != 2:
        raise PreconditionError(
            f"conditional parity compares exactly two groups, got {len(groups)}")
    per_stratum = {}
    for key, rows in sorted(_strata(records).items()):
        means = {}
        for g in groups:
            sel = [(r.price, r.weight) for r in rows if r.group == g]
            if not sel:
                break
            arr = np.asarray(sel, dtype=float)
            if np.any(np.isnan(arr[:, 0])):
                raise MissingFieldError("price missing inside a stratum")
            means[g] = float(arr[:, 0] @ arr[:, 1] / arr[:, 1].sum())
        if len(means) == 2:
            per_stratum[str(key)] = means[groups[0]] - means[groups[1]]
    if not per_stratum:
        raise NoComputableMetricError(
            "no covariate stratum contains both groups")
    max_abs = max(abs(v) for v in per_stratum.values())
    return {"groups": groups, "per_stratum": per_stratum,
            "max_abs_gap": float(max_abs)}


def takeup_conditional_parity(records, alpha: float = 0.05) -> dict:
    """Per-stratum KS test on prices *among purchasers*.

    A stratum with no purchases at all reports ``None``; a stratum where
    purchases exist but one group has none is an error, because silently
    skipping it would hide exactly the asymmetric take-up the metric is
    meant to expose.
    """
    if not records:
        raise MissingFieldError("no records")
    for r in records:
        if r.demand is None:
            raise MissingFieldError(f"record {r.id}: demand missing")
    groups = sorted({r.group for r in records})
    if len(groups) != 2:
        raise PreconditionError(
            f"take-up parity compares exactly two groups, got {len(groups)}")
    out = {}
    worst = 0.0
    for key, rows in sorted(_strata(records).items()):
        buyers = [r for r in rows if float(r.demand) > 0.0]
        if not buyers:
            out[str(key)] = None
            continue
        samples = {}
        for g in groups:
            sel = [(float(r.price), r.weight) for r in buyers if r.group == g]
            samples[g] = np.asarray(sel, dtype=float).reshape(-1, 2)
        if any(samples[g].shape[0] == 0 for g in groups):
            raise NoComputableMetricError(
                f"stratum {key}: purchases exist but not for every group")
        test = two_sample_distribution_test(
            samples[groups[0]][:, 0], samples[groups[0]][:, 1],
            samples[groups[1]][:, 0], samples[groups[1]][:, 1], alpha)
        out[str(key)] = test["statistic"]
        worst = max(worst, test["statistic"])
    return {"groups": groups, "per_stratum": out, "max_statistic": worst,
            "alpha": alpha}


def access_metrics(records=None, policy=None, model=None, population=None) -> dict:
    """Per-group take-up and mean price, empirical or model-implied.

    Pass ``records`` alone for the empirical version (observed demand), or
    the ``policy``+``model``+``population`` triple for the model-implied
    version. Model-implied take-up is reported on the model's own scale,
    without clamping. Mixing the two input styles is rejected.
    """
    empirical = records is not None
    implied = policy is not None or model is not None or population is not None
    if empirical and implied:
        raise MissingFieldError(
            "pass records alone or policy+model+population, not both")
    out = {}
    if empirical:
        if not records:
            raise MissingFieldError("no records")
        for r in records:
            if r.demand is None:
                raise MissingFieldError(f"record {r.id}: demand missing")
        for g in sorted({r.group for r in records}):
            rows = [(float(r.demand), float(r.price), r.weight)
                    for r in records if r.group == g]
            arr = np.asarray(rows, dtype=float)
            w = arr[:, 2]
            out[g] = {
                "access": float(arr[:, 0] @ w / w.sum()),
                "price_mean": float(arr[:, 1] @ w / w.sum()),
                "weight": float(w.sum()),
            }
        return out
    if policy is None or model is None or population is None:
        raise MissingFieldError(
            "model-implied access needs policy, model, and population")
    if population.support is not None and population.membership is not None:
        joint = population.joint_weights()
        cells = [(float(joint[i, k]), g, population.support[i])
                 for i in range(population.support.shape[0])
                 for k, g in enumerate(population.groups)]
    elif population.records:
        total = sum(r.weight for r in population.records)
        cells = [(r.weight / total, r.group, r.covariates)
                 for r in population.records]
    else:
        raise MissingFieldError("population has neither support nor records")
    stats = {g: [0.0, 0.0, 0.0] for g in population.groups}
    for mass, g, x in cells:
        if mass <= 0.0:
            continue
        p = policy.price(x, g)
        d = eval_demand(model, x, g, p)
        stats[g][0] += mass
        stats[g][1] += mass * d
        stats[g][2] += mass * p
    for g in population.groups:
        mass, dsum, psum = stats[g]
        if mass > 0.0:
            out[g] = {"access": dsum / mass, "price_mean": psum / mass,
                      "weight": mass}
    return out


# ---------------------------------------------------------------------------
# concordance pair estimators
# ---------------------------------------------------------------------------


def _pair_records(records, need_valuation=False):
    if not records:
        raise MissingFieldError("no records")
    p, d, v, w, g = [], [], [], [], []
    for r in records:
        if r.price is None:
            raise MissingFieldError(f"record {r.id}: price missing")
        if not need_valuation:
            if r.demand is None:
                raise MissingFieldError(f"record {r.id}: demand missing")
            if float(r.demand) not in (0.0, 1.0):
                raise InvalidRecordError(
                    f"record {r.id}: demand must be 0 or 1 for pair metrics")
            d.append(float(r.demand))
        else:
            if r.valuation is None:
                raise MissingFieldError(f"record {r.id}: valuation missing")
            v.append(float(r.valuation))
        p.append(float(r.price))
        w.append(float(r.weight))
        g.append(r.group)
    groups = sorted(set(g))
    labels = np.asarray(g)
    return (np.asarray(p), np.asarray(d) if d else None,
            np.asarray(v) if v else None, np.asarray(w), labels, groups)


def _chunked_pair_sums(idx_a, idx_b, kernel):
    """Sum kernel(chunk_a, idx_b) over chunks of idx_a, order-deterministic.

    Each kernel call returns a tuple of scalars; tuples are summed in chunk
    order so the result does not depend on thread scheduling.
    """
    chunks = [idx_a[s:s + _PAIR_CHUNK] for s in range(0, idx_a.size, _PAIR_CHUNK)]
    workers = worker_limit()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(lambda c: kernel(c, idx_b), chunks))
    else:
        partials = [kernel(c, idx_b) for c in chunks]
    totals = None
    for part in partials:
        totals = part if totals is None else tuple(
            t + q for t, q in zip(totals, part))
    return totals


def concordance_lower_bound(records) -> dict:
    """Observable lower bound on cross-group valuation concordance.

    Over cross-group record pairs with strictly different prices, counts the
    share where the cheaper offer was declined and the pricier one accepted:
    whenever demand comes from a threshold rule on latent valuations, that
    pattern certifies the pricier buyer valued the product more, so the
    share can never exceed the true concordance rate. Pairs with tied prices
    are excluded and reported.
    """
    p, d, _, w, labels, groups = _pair_records(records)
    unit_weights = bool(np.all(w == 1.0))

    qualifying = 0.0
    certified = 0.0
    tied = 0.0
    total = 0.0
    for ai in range(len(groups)):
        for bi in range(ai + 1, len(groups)):
            idx_a = np.where(labels == groups[ai])[0]
            idx_b = np.where(labels == groups[bi])[0]

            def kernel(chunk, other):
                pa = p[chunk][:, None]
                pb = p[other][None, :]
                da = d[chunk][:, None]
                db = d[other][None, :]
                if unit_weights:
                    ww = 1
                    pair_mass = float(chunk.size * other.size)
                else:
                    ww = w[chunk][:, None] * w[other][None, :]
                    pair_mass = float(np.sum(ww))
                low_a = pa < pb
                low_b = pb < pa
                cert = (np.sum((low_a & (da == 0.0) & (db == 1.0)) * ww)
                        + np.sum((low_b & (db == 0.0) & (da == 1.0)) * ww))
                qual = np.sum(low_a * ww) + np.sum(low_b * ww)
                return (float(qual), float(cert),
                        pair_mass - float(qual), pair_mass)

            part = _chunked_pair_sums(idx_a, idx_b, kernel)
            if part is not None:
                qualifying += part[0]
                certified += part[1]
                tied += part[2]
                total += part[3]
    if qualifying <= 0.0:
        raise NoQualifyingPairsError(
            "no cross-group pair has strictly different prices")
    return {
        "bound": certified / qualifying,
        "qualifying_pairs": qualifying,
        "excluded_ties": tied,
        "total_pairs": total,
    }


def concordance_oracle(records) -> dict:
    """True cross-group concordance rate, computable only with valuations.

    Among cross-group pairs with strictly different prices, the share where
    the higher-priced record also has the strictly higher valuation.
    """
    p, _, v, w, labels, groups = _pair_records(records, need_valuation=True)
    unit_weights = bool(np.all(w == 1.0))
    qualifying = 0.0
    concordant = 0.0
    for ai in range(len(groups)):
        for bi in range(ai + 1, len(groups)):
            idx_a = np.where(labels == groups[ai])[0]
            idx_b = np.where(labels == groups[bi])[0]

            def kernel(chunk, other):
                pa = p[chunk][:, None]
                pb = p[other][None, :]
                va = v[chunk][:, None]
                vb = v[other][None, :]
                ww = 1 if unit_weights else w[chunk][:, None] * w[other][None, :]
                low_a = pa < pb
                low_b = pb < pa
                conc = (np.sum((low_a & (va < vb)) * ww)
                        + np.sum((low_b & (vb < va)) * ww))
                qual = np.sum(low_a * ww) + np.sum(low_b * ww)
                return float(qual), float(conc)

            part = _chunked_pair_sums(idx_a, idx_b, kernel)
            if part is not None:
                qualifying += part[0]
                concordant += part[1]
    if qualifying <= 0.0:
        raise NoQualifyingPairsError(
            "no cross-group pair has strictly different prices")
    return {"concordance": concordant / qualifying,
            "qualifying_pairs": qualifying}


# ---------------------------------------------------------------------------
# price-gap decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecompositionReport:
    """First-order account of why two pricing rules post different prices.

    The gap ``price_estimated - price_true`` is predicted by
    ``-(T1 + p_true (T2 + T3)) / (grad_est(p_est) + grad_est(p_true))`` where
    T1 is the demand-level error at the true optimum, T2 the slope error
    there, and T3 the slope shift of the estimated curve between the two
    optima. When all three terms share a sign the gap direction is certain;
    otherwise it is reported indeterminate.
    """

    price_true: float
    price_estimated: float
    gap: float
    predicted_gap: float
    residual: float
    term_level: float
    term_slope_error: float
    term_slope_shift: float
    denominator: float
    sign: str


def _decompose_curves(curve_est, grad_est, curve_true, interval, t3_tol=1e-12):
    """Solve both pricing problems and return (t1, t3, p_est, p_true, den)."""
    p_est, _ = maximize_revenue_1d(curve_est, interval)
    p_true, _ = maximize_revenue_1d(curve_true, interval)
    grad_est_at_true = grad_est(p_true)
    grad_est_at_est = grad_est(p_est)
    t3 = grad_est_at_est - grad_est_at_true
    if abs(t3) < t3_tol:
        raise DecompositionError(
            "estimated demand slope does not move between the two optima; "
            "the decomposition is inapplicable (e.g. linear estimated demand)")
    t1 = curve_est(p_true) - curve_true(p_true)
    denominator = grad_est_at_est + grad_est_at_true
    return t1, t3, p_est, p_true, denominator


def _finish_decomposition(t1, t2, t3, p_est, p_true, denominator):
    predicted = -(t1 + p_true * (t2 + t3)) / denominator
    gap = p_est - p_true
    terms = (t1, t2, t3)
    if all(t > 0.0 for t in terms):
        sign = "positive"
    elif all(t < 0.0 for t in terms):
        sign = "negative"
    else:
        sign = "indeterminate"
    return DecompositionReport(
        price_true=float(p_true), price_estimated=float(p_est),
        gap=float(gap), predicted_gap=float(predicted),
        residual=float(gap - predicted), term_level=float(t1),
        term_slope_error=float(t2), term_slope_shift=float(t3),
        denominator=float(denominator), sign=sign)


def suboptimality_decomposition(estimated, true, x, group,
                                interval: PriceInterval) -> DecompositionReport:
    """Decompose the price gap caused by optimizing an estimated demand curve.

    ``estimated`` and ``true`` are demand models; both revenue problems are
    solved on ``interval`` and the gap between their optima is explained by
    the level error, slope error, and slope shift of the estimated curve.
    Linear estimated demand (constant slope) is rejected: its slope-shift
    term is identically zero and the expansion degenerates.
    """
    if isinstance(estimated, PartiallyLinearDemand):
        raise DecompositionError(
            "estimated demand is linear in price; slope-shift term vanishes")

    def curve_est(p):
        return eval_demand(estimated, x, group, p)

    def curve_true(p):
        return eval_demand(true, x, group, p)

    def grad_est(p):
        return demand_gradient(estimated, x, group, p)

    t1, t3, p_est, p_true, den = _decompose_curves(
        curve_est, grad_est, curve_true, interval)
    t2 = grad_est(p_true) - demand_gradient(true, x, group, p_true)
    return _finish_decomposition(t1, t2, t3, p_est, p_true, den)


def attribute_gap_decomposition(model, population, x_index: int, group: str,
                                interval: PriceInterval | None = None
                                ) -> DecompositionReport:
    """Explain the gap between group-aware and group-blind prices at a point.

    The group-aware pricer sees ``D(p | x, a)``; the blind pricer sees the
    membership mixture ``sum_g P(g|x) D(p | x, g)``. Treating the group-aware
    curve as the 'estimate' of the mixture, the same expansion attributes
    their price gap to level, slope, and slope-shift differences. Needs a
    curved demand family.
    """
    if isinstance(model, PartiallyLinearDemand):
        raise DecompositionError(
            "attribute gap decomposition needs a curved demand family")
    if population.support is None or population.membership is None:
        raise MissingFieldError("population needs a support with membership")
    x = population.support[x_index]
    mixture = {g: float(population.membership[x_index, k])
               for k, g in enumerate(population.groups)}
    if interval is None:
        centers = [model.location(x, g) if hasattr(model, "location") else 0.0
                   for g in population.groups]
        spread = getattr(model, "scale", 1.0)
        hi = max(max(centers) + 10.0 * spread, 10.0 * spread)
        interval = PriceInterval(0.0, float(hi))

    def curve_est(p):
        return eval_demand(model, x, group, p)

    def curve_true(p):
        return eval_demand(model, x, mixture, p)

    def grad_est(p):
        return demand_gradient(model, x, group, p)

    t1, t3, p_est, p_true, den = _decompose_curves(
        curve_est, grad_est, curve_true, interval)
    t2 = grad_est(p_true) - demand_gradient(model, x, mixture, p_true)
    return _finish_decomposition(t1, t2, t3, p_est, p_true, den)


# ---------------------------------------------------------------------------
# audit driver
# ---------------------------------------------------------------------------


#: every metric run_audit knows, in report order
AUDIT_METRIC_NAMES = (
    "marginal_price_disparity",
    "distributional_parity",
    "conditional_parity_gap",
    "takeup_conditional_parity",
    "access",
    "concordance_lower_bound",
    "concordance_oracle",
)


def run_audit(records, alpha: float = 0.05, metrics=None) -> AuditReport:
    """Run record-level audit metrics, tolerating per-metric failures.

    ``metrics`` selects a subset of ``AUDIT_METRIC_NAMES`` (default all).
    Metrics that cannot be computed from the given records are reported as
    ``{"error": <code>}``. If nothing at all is computable the audit raises.
    """
    attempts = {
        "marginal_price_disparity": lambda: marginal_price_disparity(records),
        "distributional_parity": lambda: distributional_parity_stat(records, alpha),
        "conditional_parity_gap": lambda: conditional_parity_gap(records),
        "takeup_conditional_parity": lambda: takeup_conditional_parity(records, alpha),
        "access": lambda: access_metrics(records=records),
        "concordance_lower_bound": lambda: concordance_lower_bound(records),
        "concordance_oracle": lambda: concordance_oracle(records),
    }
    selected = AUDIT_METRIC_NAMES if metrics is None else tuple(metrics)
    unknown = [m for m in selected if m not in attempts]
    if unknown:
        raise MissingFieldError(
            f"unknown audit metric(s) {unknown}; "
            f"choose from {list(AUDIT_METRIC_NAMES)}")
    metrics = {}
    computed = 0
    from .errors import FairPriceError

    for name in selected:
        try:
            metrics[name] = attempts[name]()
            computed += 1
        except FairPriceError as exc:
            metrics[name] = {"error": exc.code}
    if computed == 0:
        raise NoComputableMetricError(
            "none of the audit metrics could be computed from these records")
    groups = tuple(sorted({r.group for r in records})) if records else ()
    return AuditReport(n_records=len(records), groups=groups, metrics=metrics)
