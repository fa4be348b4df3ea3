"""Scenario simulation, record CSV I/O, pricing experiments, and kernel OPE.

A scenario file is a flat ``key = value`` text format ('#' starts a comment):

    n = 4000
    groups = a, b
    covariate.x1 = choice(0:0.5, 1:0.5)
    membership.intercept = 0.8
    membership.x1 = -1.6
    demand = latent
    noise = logistic
    scale = 0.4
    loc.a.intercept = 2.0
    loc.a.x1 = 0.5
    loc.b.intercept = 1.3
    loc.b.x1 = 0.5
    price_levels = 0.8, 1.2, 1.6, 2.0

``membership.*`` are logit coefficients for P(first group | x). Covariates may
be ``normal(m, s)``, ``uniform(lo, hi)``, ``choice(v:p, ...)`` or
``constant(v)``; when all are discrete the generated population carries the
exact covariate support with exact membership probabilities, so analytic
solvers and sampled records see the same world.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .demand import (
    CSV_LEADING_COLUMNS,
    CSV_TRAILING_COLUMNS,
    LatentValuationModel,
    LogisticDemand,
    Population,
    Record,
    eval_demand,
)
from .errors import (
    ConfigError,
    EmptyWeightError,
    InvalidRecordError,
    MissingFieldError,
)
from .optimize import PriceInterval, maximize_revenue_1d
from .policies import ConstantPolicy, GroupPolicy, LinearPolicy, TabularPolicy
from .util import fmt_float, parse_optional_float


# ---------------------------------------------------------------------------
# scenario configuration
# ---------------------------------------------------------------------------


@dataclass
class CovariateSpec:
    """One covariate sampler: kind plus its parameters."""

    name: str
    kind: str
    params: tuple

    @property
    def discrete(self) -> bool:
        return self.kind in ("choice", "constant")

    def values_and_probs(self):
        if self.kind == "constant":
            return [self.params[0]], [1.0]
        if self.kind == "choice":
            values, probs = zip(*self.params)
            return list(values), list(probs)
        raise ConfigError(f"covariate {self.name} is continuous")

    def sample(self, rng):
        if self.kind == "normal":
            return float(rng.normal(self.params[0], self.params[1]))
        if self.kind == "uniform":
            return float(rng.uniform(self.params[0], self.params[1]))
        if self.kind == "constant":
            return float(self.params[0])
        values, probs = self.values_and_probs()
        return float(values[rng.choice(len(values), p=probs)])


def _parse_sampler(name, text, line):
    text = text.strip()
    open_paren = text.find("(")
    if open_paren < 0 or not text.endswith(")"):
        raise ConfigError(f"covariate {name}: expected kind(args), got {text!r}",
                          line)
    kind = text[:open_paren].strip()
    body = text[open_paren + 1:-1].strip()
    try:
        if kind == "normal":
            m, s = (float(t) for t in body.split(","))
            if s <= 0:
                raise ValueError("scale must be positive")
            return CovariateSpec(name, "normal", (m, s))
        if kind == "uniform":
            lo, hi = (float(t) for t in body.split(","))
            if not lo < hi:
                raise ValueError("needs lo < hi")
            return CovariateSpec(name, "uniform", (lo, hi))
        if kind == "constant":
            return CovariateSpec(name, "constant", (float(body),))
        if kind == "choice":
            pairs = []
            for item in body.split(","):
                v, p = item.split(":")
                pairs.append((float(v), float(p)))
            total = sum(p for _, p in pairs)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"choice probabilities sum to {total:g}, not 1")
            if len({v for v, _ in pairs}) != len(pairs):
                raise ValueError("choice values must be distinct")
            return CovariateSpec(name, "choice", tuple(pairs))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"covariate {name}: {exc}", line) from None
    raise ConfigError(f"covariate {name}: unknown sampler kind {kind!r}", line)


@dataclass
class ScenarioConfig:
    """Validated scenario: population shape, demand model, and logging menu."""

    n: int
    groups: tuple
    covariates: list
    membership_intercept: float
    membership_coefs: dict
    demand_kind: str
    price_levels: tuple
    noise: str = "logistic"
    scale: float = 1.0
    loc: dict = field(default_factory=dict)
    beta: float | None = None
    gamma: dict = field(default_factory=dict)
    intercept: float = 0.0
    unit_cost: float = 0.0
    surplus_weight: float | None = None

    @property
    def covariate_names(self) -> list:
        return [c.name for c in self.covariates]

    @property
    def all_discrete(self) -> bool:
        return all(c.discrete for c in self.covariates)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    @classmethod
    def from_text(cls, text) -> "ScenarioConfig":
        raw = {}
        lines = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"expected key = value, got {body!r}", lineno)
            key, value = (part.strip() for part in body.split("=", 1))
            if not key:
                raise ConfigError("empty key", lineno)
            if key in raw:
                raise ConfigError(f"duplicate key {key!r}", lineno)
            raw[key] = value
            lines[key] = lineno

        def take(key, default=None, required=False):
            if key in raw:
                return raw.pop(key)
            if required:
                raise ConfigError(f"missing required key {key!r}")
            return default

        def as_float(key, text_value):
            try:
                return float(text_value)
            except ValueError:
                raise ConfigError(f"{key}: expected a number, got {text_value!r}",
                                  lines.get(key)) from None

        try:
            n = int(take("n", required=True))
        except ValueError:
            raise ConfigError("n: expected an integer", lines.get("n")) from None
        if n <= 0:
            raise ConfigError("n must be positive", lines.get("n"))
        groups = tuple(t.strip() for t in take("groups", required=True).split(","))
        if len(groups) != 2 or len(set(groups)) != 2 or not all(groups):
            raise ConfigError("groups must name exactly two distinct labels",
                              lines.get("groups"))

        covariates = []
        for key in [k for k in list(raw) if k.startswith("covariate.")]:
            name = key.split(".", 1)[1]
            covariates.append(_parse_sampler(name, raw.pop(key), lines[key]))
        if not covariates:
            raise ConfigError("at least one covariate.<name> entry is required")

        membership_intercept = as_float(
            "membership.intercept", take("membership.intercept", "0"))
        membership_coefs = {}
        for key in [k for k in list(raw) if k.startswith("membership.")]:
            name = key.split(".", 1)[1]
            if name not in {c.name for c in covariates}:
                raise ConfigError(f"membership.{name}: unknown covariate",
                                  lines[key])
            membership_coefs[name] = as_float(key, raw.pop(key))

        demand_kind = take("demand", required=True)
        if demand_kind not in ("latent", "logistic"):
            raise ConfigError(f"demand must be 'latent' or 'logistic', "
                              f"got {demand_kind!r}", lines.get("demand"))

        levels_text = take("price_levels", required=True)
        try:
            levels = tuple(float(t) for t in levels_text.split(","))
        except ValueError:
            raise ConfigError("price_levels: expected comma-separated numbers",
                              lines.get("price_levels")) from None
        if len(levels) < 2 or len(set(levels)) != len(levels) or \
                list(levels) != sorted(levels):
            raise ConfigError(
                "price_levels must be at least two distinct ascending values",
                lines.get("price_levels"))
        if levels[0] < 0:
            raise ConfigError("price_levels must be nonnegative",
                              lines.get("price_levels"))

        unit_cost = as_float("unit_cost", take("unit_cost", "0"))
        surplus_raw = take("outcome.surplus_weight")
        surplus_weight = (None if surplus_raw is None
                          else as_float("outcome.surplus_weight", surplus_raw))

        noise = take("noise", "logistic")
        scale = as_float("scale", take("scale", "1"))
        loc = {}
        beta = None
        gamma = {}
        intercept = 0.0
        if demand_kind == "latent":
            for g in groups:
                loc_icpt = take(f"loc.{g}.intercept", required=True)
                coefs = {}
                for key in [k for k in list(raw) if k.startswith(f"loc.{g}.")]:
                    name = key.split(".", 2)[2]
                    if name not in {c.name for c in covariates}:
                        raise ConfigError(f"{key}: unknown covariate", lines[key])
                    coefs[name] = as_float(key, raw.pop(key))
                loc[g] = (as_float(f"loc.{g}.intercept", loc_icpt), coefs)
        else:
            beta = as_float("beta", take("beta", required=True))
            if beta >= 0:
                raise ConfigError("beta must be negative", lines.get("beta"))
            intercept = as_float("intercept", take("intercept", "0"))
            for key in [k for k in list(raw) if k.startswith("gamma.")]:
                name = key.split(".", 1)[1]
                if name not in {c.name for c in covariates}:
                    raise ConfigError(f"{key}: unknown covariate", lines[key])
                gamma[name] = as_float(key, raw.pop(key))
            if surplus_weight is not None:
                raise ConfigError(
                    "outcome.surplus_weight needs latent demand",
                    lines.get("outcome.surplus_weight"))

        if raw:
            stray = sorted(raw)[0]
            raise ConfigError(f"unknown key {stray!r}", lines.get(stray))

        config = cls(n=n, groups=groups, covariates=covariates,
                     membership_intercept=membership_intercept,
                     membership_coefs=membership_coefs,
                     demand_kind=demand_kind, price_levels=levels,
                     noise=noise, scale=scale, loc=loc, beta=beta,
                     gamma=gamma, intercept=intercept, unit_cost=unit_cost,
                     surplus_weight=surplus_weight)
        config.build_model()  # validate model parameters eagerly
        return config

    def membership_prob(self, x) -> float:
        """P(first group | x) from the logit membership rule."""
        z = self.membership_intercept
        for name, coef in self.membership_coefs.items():
            z += coef * x[self.covariate_names.index(name)]
        return float(expit(z))

    def build_model(self):
        names = self.covariate_names
        if self.demand_kind == "latent":
            loc = {}
            for g in self.groups:
                intercept, coefs = self.loc[g]
                vec = np.array([coefs.get(nm, 0.0) for nm in names])
                loc[g] = (intercept, vec)
            return LatentValuationModel(loc=loc, noise=self.noise,
                                        scale=self.scale)
        vec = np.array([self.gamma.get(nm, 0.0) for nm in names])
        return LogisticDemand(gamma=vec, beta=self.beta,
                              intercept=self.intercept)


# ---------------------------------------------------------------------------
# population generation and interaction logging
# ---------------------------------------------------------------------------


def _exact_support(config: ScenarioConfig):
    pairs_per_cov = []
    for spec in config.covariates:
        values, probs = spec.values_and_probs()
        pairs_per_cov.append(list(zip(values, probs)))
    points, masses = [], []
    for combo in itertools.product(*pairs_per_cov):
        points.append([value for value, _ in combo])
        masses.append(math.prod(prob for _, prob in combo))
    support = np.asarray(points, dtype=float)
    masses = np.asarray(masses, dtype=float)
    membership = np.zeros((support.shape[0], 2))
    for i, x in enumerate(support):
        q = config.membership_prob(x)
        membership[i] = (q, 1.0 - q)
    return support, masses, membership


def generate_population(config: ScenarioConfig, rng) -> Population:
    """Draw ``n`` customers: covariates, group, and (latent) valuation.

    Prices, demand, and outcomes are attached later by
    :func:`log_interactions`. When every covariate is discrete the returned
    population also carries the exact support, masses, and membership
    probabilities of the generating process.
    """
    model = config.build_model()
    width = max(6, len(str(config.n)))
    records = []
    for i in range(config.n):
        x = np.array([spec.sample(rng) for spec in config.covariates])
        q = config.membership_prob(x)
        group = config.groups[0] if rng.random() < q else config.groups[1]
        valuation = None
        if config.demand_kind == "latent":
            eps = float(model.family.sample(rng))
            valuation = model.location(x, group) + model.scale * eps
        records.append(Record(id=f"r{i:0{width}d}", group=group, covariates=x,
                              valuation=valuation))
    if config.all_discrete:
        support, masses, membership = _exact_support(config)
        return Population(groups=config.groups, records=records,
                          support=support, masses=masses,
                          membership=membership, unit_cost=config.unit_cost)
    total = len(records)
    rho = {g: sum(1 for r in records if r.group == g) / total
           for g in config.groups}
    if min(rho.values()) == 0.0:
        # keep priors valid even if a tiny sample missed a group entirely
        rho = {g: max(v, 1.0 / (2 * total)) for g, v in rho.items()}
        z = sum(rho.values())
        rho = {g: v / z for g, v in rho.items()}
    return Population(groups=config.groups, records=records, rho=rho,
                      unit_cost=config.unit_cost)


def log_interactions(config: ScenarioConfig, population: Population, rng,
                     policy=None) -> Population:
    """Assign a price to every record and realize demand (and outcomes).

    Without a policy, prices are drawn uniformly from the scenario's price
    levels (the logging menu). Latent records buy iff their stored valuation
    covers the price; logistic records draw a Bernoulli take-up. The realized
    consumer surplus, scaled by ``outcome.surplus_weight``, lands in the
    outcome column when configured.
    """
    model = config.build_model()
    levels = config.price_levels
    for r in population.records:
        if policy is None:
            p = float(levels[int(rng.integers(len(levels)))])
        else:
            p = float(policy.price(r.covariates, r.group))
        r.price = p
        if config.demand_kind == "latent":
            r.demand = float(r.valuation >= p)
        else:
            rate = eval_demand(model, r.covariates, r.group, p)
            r.demand = float(rng.random() < rate)
        if config.surplus_weight is not None:
            r.outcome = (config.surplus_weight * max(r.valuation - p, 0.0)
                         * r.demand)
    return population


def simulate(config: ScenarioConfig, seed: int):
    """Generate a population and log one interaction per customer.

    Returns ``(model, population)``; all randomness flows from ``seed``.
    """
    rng = np.random.default_rng(seed)
    population = generate_population(config, rng)
    log_interactions(config, population, rng)
    return config.build_model(), population


# ---------------------------------------------------------------------------
# record CSV I/O
# ---------------------------------------------------------------------------


def write_records_csv(path, records) -> None:
    """Write records with header id,group,x1..xk,price,demand,outcome,valuation,weight."""
    if not records:
        raise MissingFieldError("no records to write")
    k = records[0].covariates.size
    header = (list(CSV_LEADING_COLUMNS)
              + [f"x{j + 1}" for j in range(k)]
              + list(CSV_TRAILING_COLUMNS))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in records:
            row = [r.id, r.group]
            row += [fmt_float(v) for v in r.covariates]
            row += [fmt_float(r.price), fmt_float(r.demand),
                    fmt_float(r.outcome), fmt_float(r.valuation),
                    fmt_float(r.weight)]
            writer.writerow(row)


def read_records_csv(path) -> list:
    """Read records written by :func:`write_records_csv` (empty cell = missing)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidRecordError("empty records file") from None
        k = len(header) - len(CSV_LEADING_COLUMNS) - len(CSV_TRAILING_COLUMNS)
        expected = (list(CSV_LEADING_COLUMNS)
                    + [f"x{j + 1}" for j in range(k)]
                    + list(CSV_TRAILING_COLUMNS))
        if k < 0 or header != expected:
            raise InvalidRecordError(
                f"unexpected header {header!r}; expected id,group,x1..xk,"
                "price,demand,outcome,valuation,weight")
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise InvalidRecordError(
                    f"line {lineno}: expected {len(expected)} cells, "
                    f"got {len(row)}")
            rid, group = row[0], row[1]
            covs = [parse_optional_float(c) for c in row[2:2 + k]]
            if any(c is None for c in covs):
                raise InvalidRecordError(f"line {lineno}: missing covariate")
            price, demand, outcome, valuation, weight = (
                parse_optional_float(c) for c in row[2 + k:])
            records.append(Record(
                id=rid, group=group, covariates=np.asarray(covs),
                price=price, demand=demand, outcome=outcome,
                valuation=valuation,
                weight=1.0 if weight is None else weight))
    return records


# ---------------------------------------------------------------------------
# pricing experiment: uniform vs per-group vs personalized
# ---------------------------------------------------------------------------


def _population_cells(population: Population):
    if population.support is not None and population.membership is not None:
        joint = population.joint_weights()
        return [(float(joint[i, k]), g, population.support[i])
                for i in range(population.support.shape[0])
                for k, g in enumerate(population.groups)
                if joint[i, k] > 0.0]
    if not population.records:
        raise MissingFieldError("population has neither support nor records")
    total = sum(r.weight for r in population.records)
    return [(r.weight / total, r.group, r.covariates)
            for r in population.records]


def _histogram(prices, weights, lo, hi, bins=25):
    # shared edges across policies keep the histograms comparable
    counts, edges = np.histogram(np.asarray(prices, dtype=float), bins=bins,
                                 range=(lo, hi),
                                 weights=np.asarray(weights, dtype=float))
    return {"edges": [float(e) for e in edges],
            "counts": [float(c) for c in counts]}


def run_pricing_experiment(model, population: Population,
                           interval: PriceInterval,
                           unit_cost: float | None = None) -> dict:
    """Price one market three ways and compare revenue and access.

    Modes: ``uniform`` (one price), ``group`` (one price per group), and
    ``personalized`` (one price per population cell). Every mode maximizes
    expected margin ``(p - unit_cost) * D`` under the same demand model.
    Returns a dict mode -> {policy, revenue, margin, access, price_mean,
    histogram}.
    """
    cost = population.unit_cost if unit_cost is None else float(unit_cost)
    cells = _population_cells(population)

    def aggregate(curve_cells):
        def curve(p):
            return sum(w * eval_demand(model, x, g, p)
                       for w, g, x in curve_cells)
        return curve

    out = {}

    uniform_price, _ = maximize_revenue_1d(aggregate(cells), interval,
                                           shift=cost)
    out["uniform"] = ConstantPolicy(uniform_price)

    group_prices = {}
    for g in sorted({c[1] for c in cells}):
        sub = [c for c in cells if c[1] == g]
        price, _ = maximize_revenue_1d(aggregate(sub), interval, shift=cost)
        group_prices[g] = price
    out["group"] = GroupPolicy(prices=group_prices)

    if population.support is not None and population.membership is not None:
        table = {}
        joint = population.joint_weights()
        for i, x in enumerate(population.support):
            for k, g in enumerate(population.groups):
                if joint[i, k] > 0.0:
                    def cell_curve(p, x=x, g=g):
                        return eval_demand(model, x, g, p)
                    price, _ = maximize_revenue_1d(cell_curve, interval,
                                                   shift=cost)
                    table[(i, g)] = price
        out["personalized"] = TabularPolicy(support=population.support,
                                            table=table)
    else:
        # record-level personalization: memoize identical (x, g) cells
        cache = {}
        support_rows = []
        table = {}
        for w, g, x in cells:
            key = (tuple(float(v) for v in x), g)
            if key not in cache:
                def cell_curve(p, x=x, g=g):
                    return eval_demand(model, x, g, p)
                price, _ = maximize_revenue_1d(cell_curve, interval,
                                               shift=cost)
                cache[key] = price
        seen = {}
        for (xt, g), price in cache.items():
            if xt not in seen:
                seen[xt] = len(support_rows)
                support_rows.append(list(xt))
            table[(seen[xt], g)] = price
        out["personalized"] = TabularPolicy(
            support=np.asarray(support_rows), table=table)

    report = {}
    for mode, policy in out.items():
        revenue = 0.0
        margin = 0.0
        stats = {}
        prices, weights = [], []
        for w, g, x in cells:
            p = policy.price(x, g)
            d = eval_demand(model, x, g, p)
            revenue += w * p * d
            margin += w * (p - cost) * d
            acc = stats.setdefault(g, [0.0, 0.0, 0.0])
            acc[0] += w
            acc[1] += w * d
            acc[2] += w * p
            prices.append(p)
            weights.append(w)
        report[mode] = {
            "policy": policy,
            "revenue": float(revenue),
            "margin": float(margin),
            "access": {g: s[1] / s[0] for g, s in sorted(stats.items())},
            "price_mean": {g: s[2] / s[0] for g, s in sorted(stats.items())},
            "histogram": _histogram(prices, weights, interval.lo,
                                    interval.hi),
        }
    return report


# ---------------------------------------------------------------------------
# kernel off-policy evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OPEConfig:
    """Kernel off-policy evaluation settings.

    ``bandwidth`` is measured relative to the logged price range, so the
    effective kernel width in price units is ``bandwidth * range``.
    ``level_masses`` maps logged price level -> behavior probability; omit it
    to plug in the empirical level frequencies.
    """

    bandwidth: float = 0.3
    kernel: str = "epanechnikov"
    level_masses: dict | None = None
    self_normalize: bool = True

    def __post_init__(self):
        if not (self.bandwidth > 0.0):
            raise MissingFieldError("bandwidth must be positive")
        if self.kernel != "epanechnikov":
            raise MissingFieldError(f"unknown kernel {self.kernel!r}")


def _epanechnikov(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def _ope_arrays(records, policy, config: OPEConfig):
    if not records:
        raise MissingFieldError("no records")
    p = np.empty(len(records))
    d = np.empty(len(records))
    w = np.empty(len(records))
    target = np.empty(len(records))
    for i, r in enumerate(records):
        if r.price is None or r.demand is None:
            raise MissingFieldError(f"record {r.id}: price or demand missing")
        p[i] = r.price
        d[i] = float(r.demand)
        w[i] = r.weight
        target[i] = policy.price(r.covariates, r.group)
    width = float(p.max() - p.min())
    if width <= 0.0:
        raise MissingFieldError(
            "logged prices carry no variation; off-policy weights undefined")
    if config.level_masses is not None:
        masses = np.array([config.level_masses.get(float(v), 0.0) for v in p])
        if np.any(masses <= 0.0):
            bad = float(p[int(np.argmin(masses))])
            raise MissingFieldError(
                f"logged price {bad:g} has no behavior mass")
    else:
        levels, inverse = np.unique(p, return_inverse=True)
        freq = np.bincount(inverse, weights=w)
        masses = (freq / w.sum())[inverse]
    h = config.bandwidth * width
    kernel_weights = _epanechnikov((target - p) / h) / h
    imp = w * kernel_weights / masses
    return imp, p, d, target, width


def ope_value(records, policy, config: OPEConfig | None = None) -> float:
    """Kernel-smoothed off-policy estimate of a policy's expected revenue.

    Each record is weighted by kernel proximity of its logged price to the
    policy's price for that customer, divided by the behavior probability of
    the logged level; the revenue signal is ``target price x logged demand``.
    Self-normalization (the default) divides by the summed weights. Raises
    when every kernel weight vanishes (policy prices too far from the data).
    """
    config = config or OPEConfig()
    imp, _, d, target, _ = _ope_arrays(records, policy, config)
    total = float(imp.sum())
    if total <= 0.0:
        raise EmptyWeightError(
            "no logged interaction falls inside the kernel window of the "
            "target policy")
    signal = target * d
    if config.self_normalize:
        return float((imp * signal).sum() / total)
    return float((imp * signal).sum() / len(records))


def ope_bootstrap_se(records, policy, config: OPEConfig | None = None,
                     n_boot: int = 200, seed: int = 0) -> float:
    """Bootstrap standard error of :func:`ope_value` over record resamples."""
    config = config or OPEConfig()
    rng = np.random.default_rng(seed)
    n = len(records)
    values = []
    for _ in range(n_boot):
        idx = rng.integers(0, n, size=n)
        sample = [records[i] for i in idx]
        try:
            values.append(ope_value(sample, policy, config))
        except EmptyWeightError:
            continue
    if len(values) < 2:
        raise EmptyWeightError("bootstrap produced no usable resamples")
    return float(np.std(np.asarray(values), ddof=1))


# ---------------------------------------------------------------------------
# off-policy linear policy search
# ---------------------------------------------------------------------------


@dataclass
class PolicySearchResult:
    policy: LinearPolicy
    value: float
    trace: list
    starts: int


def optimize_linear_policy(records, config: OPEConfig | None = None,
                           clip_lo: float | None = None,
                           clip_hi: float | None = None,
                           n_starts: int = 16, n_halvings: int = 6,
                           seed: int = 0) -> PolicySearchResult:
    """Maximize the OPE value over clipped linear pricing policies.

    Coordinate pattern search from multiple starts. The first starts are
    deterministic flat policies pinned at each observed price level (so the
    search result is never worse than the best constant policy); remaining
    starts draw random coefficients from ``seed``. Steps begin at 10% of the
    clip range and halve ``n_halvings`` times. Ties keep the earliest start.
    """
    config = config or OPEConfig()
    if not records:
        raise MissingFieldError("no records")
    prices = sorted({float(r.price) for r in records if r.price is not None})
    if not prices:
        raise MissingFieldError("records carry no logged prices")
    lo = min(prices) if clip_lo is None else float(clip_lo)
    hi = max(prices) if clip_hi is None else float(clip_hi)
    dim = records[0].covariates.size

    def evaluate(vec):
        policy = LinearPolicy(theta=vec[1:], intercept=vec[0],
                              clip_lo=lo, clip_hi=hi)
        try:
            return ope_value(records, policy, config)
        except EmptyWeightError:
            return -math.inf

    rng = np.random.default_rng(seed)
    starts = [np.concatenate([[lvl], np.zeros(dim)]) for lvl in prices]
    while len(starts) < n_starts:
        vec = np.concatenate([
            [rng.uniform(lo, hi)],
            rng.normal(0.0, 0.25 * (hi - lo), size=dim)])
        starts.append(vec)
    starts = starts[:max(n_starts, len(prices))]

    step0 = 0.1 * (hi - lo)
    best_vec, best_val = None, -math.inf
    trace = []
    for si, start in enumerate(starts):
        vec = start.copy()
        val = evaluate(vec)
        step = step0
        for _ in range(n_halvings + 1):
            improved = True
            while improved:
                improved = False
                best_move, best_move_val = None, val
                for k in range(vec.size):
                    for sign in (1.0, -1.0):
                        cand = vec.copy()
                        cand[k] += sign * step
                        cand_val = evaluate(cand)
                        if cand_val > best_move_val + 1e-15:
                            best_move, best_move_val = cand, cand_val
                if best_move is not None:
                    vec, val = best_move, best_move_val
                    improved = True
            step *= 0.5
        trace.append({"start": si, "value": val})
        if val > best_val + 1e-12:
            best_vec, best_val = vec, val
    if best_vec is None or not math.isfinite(best_val):
        raise EmptyWeightError("no starting policy produced usable weights")
    policy = LinearPolicy(theta=best_vec[1:], intercept=float(best_vec[0]),
                          clip_lo=lo, clip_hi=hi)
    return PolicySearchResult(policy=policy, value=float(best_val),
                              trace=trace, starts=len(starts))
