"""Demand primitives: records, populations, and the three demand families.

The package works with three response models:

* ``PartiallyLinearDemand`` -- expected demand ``dbar(x, a) + beta_a * p`` with a
  strictly negative per-group slope. Values are model-scale reals and are NOT
  clamped to [0, 1]; clamping happens only when Bernoulli outcomes are drawn.
* ``LogisticDemand`` -- take-up probability ``sigmoid(gamma . x + beta * p + c)``.
  The group label is not an input; groups differ only through their covariates.
* ``LatentValuationModel`` -- a buyer values the product at
  ``V = loc(x, a) + scale * eps`` with ``eps`` from a log-concave noise family,
  and purchases iff ``V >= p``.

Records travel as CSV with header ``id,group,x1,...,xk,price,demand,outcome,
valuation,weight`` (UTF-8, '.' decimal, empty cell = missing); the reader and
writer live in :mod:`fairprice.sim`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, ndtr

from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    InvalidRecordError,
    MissingFieldError,
    MissingSupportError,
    PerfectSeparationError,
    SingularDesignError,
    UnknownGroupError,
    UpwardSlopeError,
)

CSV_LEADING_COLUMNS = ("id", "group")
CSV_TRAILING_COLUMNS = ("price", "demand", "outcome", "valuation", "weight")

_SQRT_2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# noise families for the latent-valuation model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseFamily:
    """Standardized (location 0, scale 1) log-concave noise distribution.

    ``pdf_prime`` is the derivative of the density, needed for analytic
    revenue curvature. ``sample`` draws from the numpy generator passed in.
    """

    name: str
    cdf: callable
    pdf: callable
    pdf_prime: callable
    sample: callable

    def survival(self, z):
        return 1.0 - self.cdf(z)


def _normal_cdf(z):
    return ndtr(z)


def _normal_pdf(z):
    return np.exp(-0.5 * np.square(z)) / _SQRT_2PI


def _logistic_cdf(z):
    return expit(z)


def _logistic_pdf(z):
    s = expit(z)
    return s * (1.0 - s)


def _logistic_pdf_prime(z):
    s = expit(z)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


def _exponential_cdf(z):
    z = np.asarray(z, dtype=float)
    return np.where(z < 0.0, 0.0, -np.expm1(-np.clip(z, 0.0, None)))


def _exponential_pdf(z):
    z = np.asarray(z, dtype=float)
    return np.where(z < 0.0, 0.0, np.exp(-np.clip(z, 0.0, None)))


def _exponential_pdf_prime(z):
    z = np.asarray(z, dtype=float)
    return np.where(z < 0.0, 0.0, -np.exp(-np.clip(z, 0.0, None)))


def _laplace_cdf(z):
    z = np.asarray(z, dtype=float)
    return np.where(z < 0.0, 0.5 * np.exp(np.clip(z, None, 0.0)),
                    1.0 - 0.5 * np.exp(-np.clip(z, 0.0, None)))


def _laplace_pdf(z):
    return 0.5 * np.exp(-np.abs(z))


def _laplace_pdf_prime(z):
    z = np.asarray(z, dtype=float)
    return -np.sign(z) * 0.5 * np.exp(-np.abs(z))


def _gumbel_cdf(z):
    return np.exp(-np.exp(-np.asarray(z, dtype=float)))


def _gumbel_pdf(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-z - np.exp(-z))


def _gumbel_pdf_prime(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-z - np.exp(-z)) * (np.exp(-z) - 1.0)


NOISE_FAMILIES: dict[str, NoiseFamily] = {
    "normal": NoiseFamily(
        "normal", _normal_cdf, _normal_pdf,
        lambda z: -np.asarray(z, dtype=float) * _normal_pdf(z),
        lambda rng, size=None: rng.standard_normal(size),
    ),
    "logistic": NoiseFamily(
        "logistic", _logistic_cdf, _logistic_pdf, _logistic_pdf_prime,
        lambda rng, size=None: rng.logistic(0.0, 1.0, size),
    ),
    "exponential": NoiseFamily(
        "exponential", _exponential_cdf, _exponential_pdf, _exponential_pdf_prime,
        lambda rng, size=None: rng.exponential(1.0, size),
    ),
    "laplace": NoiseFamily(
        "laplace", _laplace_cdf, _laplace_pdf, _laplace_pdf_prime,
        lambda rng, size=None: rng.laplace(0.0, 1.0, size),
    ),
    "gumbel": NoiseFamily(
        "gumbel", _gumbel_cdf, _gumbel_pdf, _gumbel_pdf_prime,
        lambda rng, size=None: rng.gumbel(0.0, 1.0, size),
    ),
}


# ---------------------------------------------------------------------------
# records and populations
# ---------------------------------------------------------------------------


@dataclass
class Record:
    """One customer interaction.

    Optional fields are ``None`` when unobserved. ``weight`` is a positive
    sampling weight used by every record-level expectation.
    """

    id: str
    group: str
    covariates: np.ndarray
    price: float | None = None
    demand: float | None = None
    outcome: float | None = None
    valuation: float | None = None
    weight: float = 1.0

    def __post_init__(self):
        self.covariates = np.asarray(self.covariates, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.covariates)):
            raise InvalidRecordError(f"record {self.id}: non-finite covariate")
        if not (self.weight > 0.0):
            raise InvalidRecordError(f"record {self.id}: weight must be positive")


@dataclass
class Population:
    """A reference population: group priors plus, optionally, a discrete support.

    ``support`` rows are covariate vectors with point masses ``masses`` and
    per-point group membership probabilities ``membership`` (rows sum to one).
    The group priors ``rho`` must be the membership-weighted masses; they are
    computed when omitted and validated when given. Record lists are optional
    and used by record-level estimators; the analytic solvers only touch the
    support.
    """

    groups: tuple
    records: list = field(default_factory=list)
    support: np.ndarray | None = None
    masses: np.ndarray | None = None
    membership: np.ndarray | None = None
    rho: dict | None = None
    unit_cost: float = 0.0

    def __post_init__(self):
        self.groups = tuple(str(g) for g in self.groups)
        if len(set(self.groups)) != len(self.groups):
            raise InvalidRecordError("duplicate group labels")
        if self.support is not None:
            self.support = np.atleast_2d(np.asarray(self.support, dtype=float))
            self.masses = np.asarray(self.masses, dtype=float).reshape(-1)
            if self.masses.shape[0] != self.support.shape[0]:
                raise DimensionMismatchError("one mass per support point required")
            if np.any(self.masses < -1e-12) or abs(self.masses.sum() - 1.0) > 1e-9:
                raise InvalidRecordError("support masses must be nonnegative and sum to 1")
            if self.membership is not None:
                self.membership = np.asarray(self.membership, dtype=float)
                if self.membership.shape != (self.support.shape[0], len(self.groups)):
                    raise DimensionMismatchError(
                        "membership must be (n_support, n_groups)")
                if np.any(self.membership < -1e-12):
                    raise InvalidRecordError("membership probabilities must be >= 0")
                rowsums = self.membership.sum(axis=1)
                if np.any(np.abs(rowsums - 1.0) > 1e-9):
                    raise InvalidRecordError("membership rows must sum to 1")
                implied = self.masses @ self.membership
                if self.rho is None:
                    self.rho = {g: float(implied[k]) for k, g in enumerate(self.groups)}
                else:
                    for k, g in enumerate(self.groups):
                        if abs(self.rho.get(g, np.nan) - implied[k]) > 1e-7:
                            raise InvalidRecordError(
                                f"rho[{g}] inconsistent with support membership")
        if self.rho is not None:
            missing = [g for g in self.groups if g not in self.rho]
            if missing:
                raise UnknownGroupError(f"rho missing groups {missing}")
            total = sum(self.rho[g] for g in self.groups)
            if abs(total - 1.0) > 1e-9:
                raise InvalidRecordError("group priors must sum to 1")
        for r in self.records:
            if r.group not in self.groups:
                raise UnknownGroupError(f"record {r.id}: unknown group {r.group!r}")

    # -- convenience accessors -------------------------------------------

    @classmethod
    def from_support(cls, groups, support, masses, membership, unit_cost=0.0):
        return cls(groups=tuple(groups), support=support, masses=masses,
                   membership=membership, unit_cost=unit_cost)

    @classmethod
    def from_records(cls, records, groups=None, unit_cost=0.0):
        if groups is None:
            groups = tuple(sorted({r.group for r in records}))
        total = sum(r.weight for r in records)
        rho = {g: sum(r.weight for r in records if r.group == g) / total
               for g in groups}
        return cls(groups=tuple(groups), records=list(records), rho=rho,
                   unit_cost=unit_cost)

    def group_index(self, group: str) -> int:
        try:
            return self.groups.index(group)
        except ValueError:
            raise UnknownGroupError(f"unknown group {group!r}") from None

    def joint_weights(self) -> np.ndarray:
        """P(X = x_i, A = g) over the support, shape (n_support, n_groups)."""
        if self.support is None or self.membership is None:
            raise MissingSupportError(
                "population has no discrete support with membership probabilities")
        return self.masses[:, None] * self.membership

    def rho_vector(self) -> np.ndarray:
        return np.array([self.rho[g] for g in self.groups], dtype=float)


# ---------------------------------------------------------------------------
# demand models
# ---------------------------------------------------------------------------


@dataclass
class PartiallyLinearDemand:
    """Expected demand ``dbar(x, a) + beta_a * p``, unclamped.

    ``baseline`` holds the intercept term ``dbar``: with ``baseline_form ==
    "linear"`` it maps group -> (intercept, coefficient vector); with
    ``"table"`` it maps group -> {covariate tuple -> value} over a discrete
    support. Slopes must be strictly negative per group unless
    ``allow_upward`` is set (used only to carry an explicitly overridden fit).
    """

    beta: dict
    baseline: dict
    baseline_form: str = "linear"
    allow_upward: bool = False

    def __post_init__(self):
        if self.baseline_form not in ("linear", "table"):
            raise InvalidRecordError(f"unknown baseline form {self.baseline_form!r}")
        for g, b in self.beta.items():
            if g not in self.baseline:
                raise UnknownGroupError(f"baseline missing group {g!r}")
            if b >= 0.0 and not self.allow_upward:
                raise UpwardSlopeError(
                    f"group {g!r}: price slope {b:g} is not negative")

    @property
    def group_labels(self) -> tuple:
        return tuple(self.beta.keys())

    def dbar(self, x, group) -> float:
        """Baseline expected demand at zero price for one group or a mixture."""
        if isinstance(group, dict):
            return sum(w * self.dbar(x, g) for g, w in group.items())
        if group not in self.beta:
            raise UnknownGroupError(f"unknown group {group!r}")
        if self.baseline_form == "linear":
            intercept, coefs = self.baseline[group]
            x = np.asarray(x, dtype=float).reshape(-1)
            coefs = np.asarray(coefs, dtype=float).reshape(-1)
            if coefs.size != x.size:
                raise DimensionMismatchError(
                    f"baseline expects {coefs.size} covariates, got {x.size}")
            return float(intercept + coefs @ x)
        key = tuple(float(v) for v in np.asarray(x, dtype=float).reshape(-1))
        table = self.baseline[group]
        if key not in table:
            raise DimensionMismatchError(
                f"covariate point {key} not in baseline table for group {group!r}")
        return float(table[key])

    def slope(self, group) -> float:
        if isinstance(group, dict):
            return float(sum(w * self.slope(g) for g, w in group.items()))
        if group not in self.beta:
            raise UnknownGroupError(f"unknown group {group!r}")
        return float(self.beta[group])


@dataclass
class LogisticDemand:
    """Take-up probability ``sigmoid(gamma . x + beta * p + intercept)``."""

    gamma: np.ndarray
    beta: float
    intercept: float = 0.0

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float).reshape(-1)
        self.beta = float(self.beta)
        self.intercept = float(self.intercept)

    def linear_index(self, x, p) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.gamma.size:
            raise DimensionMismatchError(
                f"model expects {self.gamma.size} covariates, got {x.size}")
        return float(self.gamma @ x + self.beta * p + self.intercept)


@dataclass
class LatentValuationModel:
    """Valuation ``V = loc(x, a) + scale * noise``; purchase iff ``V >= p``.

    ``loc`` maps group -> (intercept, coefficient vector). The noise family
    must be one of the log-concave families in ``NOISE_FAMILIES`` so revenue
    under the implied demand curve is well behaved.
    """

    loc: dict
    noise: str = "logistic"
    scale: float = 1.0

    def __post_init__(self):
        if self.noise not in NOISE_FAMILIES:
            raise InvalidRecordError(
                f"unknown noise family {self.noise!r}; "
                f"choose from {sorted(NOISE_FAMILIES)}")
        if not (self.scale > 0.0):
            raise InvalidRecordError("noise scale must be positive")
        self.scale = float(self.scale)

    @property
    def family(self) -> NoiseFamily:
        return NOISE_FAMILIES[self.noise]

    def location(self, x, group) -> float:
        if isinstance(group, dict):
            return sum(w * self.location(x, g) for g, w in group.items())
        if group not in self.loc:
            raise UnknownGroupError(f"unknown group {group!r}")
        intercept, coefs = self.loc[group]
        x = np.asarray(x, dtype=float).reshape(-1)
        coefs = np.asarray(coefs, dtype=float).reshape(-1)
        if coefs.size != x.size:
            raise DimensionMismatchError(
                f"location expects {coefs.size} covariates, got {x.size}")
        return float(intercept + coefs @ x)


DemandModel = (PartiallyLinearDemand, LogisticDemand, LatentValuationModel)


def _check_price(model, p) -> float:
    p = float(p)
    if not math.isfinite(p):
        raise InvalidRecordError("price must be finite")
    if not isinstance(model, PartiallyLinearDemand) and p < 0.0:
        raise InvalidRecordError("price must be nonnegative for this demand family")
    return p


def eval_demand(model, x, group, p) -> float:
    """Model-scale expected demand at price ``p``.

    ``group`` may be a label or a {label: weight} mixture (used for
    attribute-blind evaluation). Partially linear values are not clamped;
    logistic and latent values are probabilities by construction.
    """
    p = _check_price(model, p)
    if isinstance(model, PartiallyLinearDemand):
        if isinstance(group, dict):
            return float(sum(
                w * (model.dbar(x, g) + model.beta[g] * p)
                for g, w in group.items()))
        return model.dbar(x, group) + model.slope(group) * p
    if isinstance(model, LogisticDemand):
        return float(expit(model.linear_index(x, p)))
    if isinstance(model, LatentValuationModel):
        if isinstance(group, dict):
            return float(sum(w * eval_demand(model, x, g, p)
                             for g, w in group.items()))
        z = (p - model.location(x, group)) / model.scale
        fam = model.family
        if model.noise == "normal":
            return float(ndtr(-z))
        if model.noise == "logistic":
            return float(expit(-z))
        if model.noise == "gumbel":
            return float(-np.expm1(-np.exp(-z)))
        return float(1.0 - fam.cdf(z))
    raise TypeError(f"not a demand model: {type(model).__name__}")


def demand_gradient(model, x, group, p) -> float:
    """Analytic d demand / d price at ``p`` (mixtures sum their components)."""
    p = _check_price(model, p)
    if isinstance(model, PartiallyLinearDemand):
        return model.slope(group)
    if isinstance(model, LogisticDemand):
        s = expit(model.linear_index(x, p))
        return float(model.beta * s * (1.0 - s))
    if isinstance(model, LatentValuationModel):
        if isinstance(group, dict):
            return float(sum(w * demand_gradient(model, x, g, p)
                             for g, w in group.items()))
        z = (p - model.location(x, group)) / model.scale
        return float(-model.family.pdf(z) / model.scale)
    raise TypeError(f"not a demand model: {type(model).__name__}")


def demand_curvature(model, x, group, p) -> float:
    """Analytic d^2 demand / d price^2 at ``p``."""
    p = _check_price(model, p)
    if isinstance(model, PartiallyLinearDemand):
        return 0.0
    if isinstance(model, LogisticDemand):
        s = expit(model.linear_index(x, p))
        return float(model.beta ** 2 * s * (1.0 - s) * (1.0 - 2.0 * s))
    if isinstance(model, LatentValuationModel):
        if isinstance(group, dict):
            return float(sum(w * demand_curvature(model, x, g, p)
                             for g, w in group.items()))
        z = (p - model.location(x, group)) / model.scale
        return float(-model.family.pdf_prime(z) / model.scale ** 2)
    raise TypeError(f"not a demand model: {type(model).__name__}")


def implied_demand_curve(model: LatentValuationModel, x, group):
    """The survival curve ``p -> P(V >= p | x, a)`` of a latent model."""
    if not isinstance(model, LatentValuationModel):
        raise TypeError("implied_demand_curve needs a LatentValuationModel")

    def curve(p):
        return eval_demand(model, x, group, p)

    return curve


def sample_valuation(model: LatentValuationModel, x, group, rng) -> float:
    """One latent valuation draw ``loc(x, a) + scale * eps``."""
    if not isinstance(model, LatentValuationModel):
        raise TypeError("sample_valuation needs a LatentValuationModel")
    eps = float(model.family.sample(rng))
    return model.location(x, group) + model.scale * eps


def sample_demand(model, x, group, p, rng) -> int:
    """One realized purchase indicator at price ``p``.

    Latent models threshold a fresh valuation draw (purchase iff V >= p).
    The probabilistic families draw a single uniform and compare it with the
    clamped take-up rate, so a caller holding the rng can couple draws.
    """
    p = _check_price(model, p)
    if isinstance(model, LatentValuationModel):
        return int(sample_valuation(model, x, group, rng) >= p)
    rate = eval_demand(model, x, group, p)
    rate = min(1.0, max(0.0, rate))
    return int(rng.random() < rate)


def sample_demand_curve(model, x, group, prices, rng) -> np.ndarray:
    """Purchase indicators for one customer across several candidate prices.

    A single latent draw (valuation, or uniform threshold for the
    probabilistic families) is shared, so the result is nonincreasing in
    price by construction.
    """
    prices = np.asarray(prices, dtype=float).reshape(-1)
    for p in prices:
        _check_price(model, p)
    if isinstance(model, LatentValuationModel):
        v = sample_valuation(model, x, group, rng)
        return (v >= prices).astype(int)
    u = rng.random()
    rates = np.array([
        min(1.0, max(0.0, eval_demand(model, x, group, p))) for p in prices])
    return (u < rates).astype(int)


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


@dataclass
class FitDiagnostics:
    """Optimizer trace summary returned next to a fitted model."""

    n_records: int
    iterations: int
    gradient_norm: float
    log_likelihood: float | None = None
    std_errors: np.ndarray | None = None
    residual_sum_squares: dict | None = None


def _design_matrix(records, require_demand=True):
    if not records:
        raise MissingFieldError("no records to fit")
    dim = records[0].covariates.size
    rows, y, w = [], [], []
    for r in records:
        if r.covariates.size != dim:
            raise DimensionMismatchError(
                f"record {r.id}: expected {dim} covariates, got {r.covariates.size}")
        if r.price is None:
            raise MissingFieldError(f"record {r.id}: price missing")
        if require_demand:
            if r.demand is None:
                raise MissingFieldError(f"record {r.id}: demand missing")
            y.append(float(r.demand))
        rows.append(np.concatenate([r.covariates, [r.price, 1.0]]))
        w.append(r.weight)
    return np.asarray(rows), np.asarray(y), np.asarray(w), dim


def fit_logistic(records, max_iter=500, grad_tol=1e-8):
    """Maximum-likelihood logistic demand via damped Newton iterations.

    The price enters as one more covariate; coefficients are reported as
    (gamma, beta, intercept). Raises PerfectSeparationError when the
    likelihood is unbounded, SingularDesignError when some coefficient is
    unidentified, and ConvergenceError (with the final gradient norm) when
    the iteration cap is hit.

    Returns
    -------
    (LogisticDemand, FitDiagnostics)
    """
    X, y, w, dim = _design_matrix(records)
    if np.any((y != 0.0) & (y != 1.0)):
        raise InvalidRecordError("demand must be 0 or 1 for a logistic fit")
    if np.all(y == y[0]):
        raise PerfectSeparationError(
            "perfect separation: all demand outcomes identical; "
            "coefficients diverge")
    spread = np.ptp(X[:, :-1], axis=0)
    dead = np.where(spread == 0.0)[0]
    if dead.size:
        names = [f"x{j + 1}" if j < dim else "price" for j in dead]
        raise SingularDesignError(
            f"column(s) {', '.join(names)} carry no variation; "
            "coefficient unidentified")

    def loglik(eta):
        return float(w @ (y * eta - np.logaddexp(0.0, eta)))

    coef = np.zeros(X.shape[1])
    eta = X @ coef
    ll = loglik(eta)
    grad_norm = math.inf
    for iteration in range(1, max_iter + 1):
        mu = expit(eta)
        grad = X.T @ (w * (y - mu))
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < grad_tol:
            info = X.T @ (X * (w * mu * (1.0 - mu))[:, None])
            se = np.sqrt(np.diag(np.linalg.inv(info)))
            model = LogisticDemand(gamma=coef[:dim], beta=coef[dim],
                                   intercept=coef[dim + 1])
            return model, FitDiagnostics(
                n_records=len(records), iterations=iteration - 1,
                gradient_norm=grad_norm, log_likelihood=ll, std_errors=se)
        margins = (2.0 * y - 1.0) * eta
        if np.all(margins > 0.0) and float(np.max(np.abs(eta))) > 30.0:
            raise PerfectSeparationError(
                "perfect separation: a covariate direction splits the "
                "outcomes; likelihood unbounded")
        weights = w * mu * (1.0 - mu)
        hessian = X.T @ (X * weights[:, None])
        try:
            step = np.linalg.solve(hessian, grad)
        except np.linalg.LinAlgError:
            raise SingularDesignError(
                "singular information matrix; some coefficient unidentified"
            ) from None
        scale = 1.0
        for _ in range(40):
            cand = coef + scale * step
            eta_cand = X @ cand
            ll_cand = loglik(eta_cand)
            if ll_cand > ll - 1e-12:
                break
            scale *= 0.5
        coef, eta, ll = cand, eta_cand, ll_cand
    raise ConvergenceError(
        f"logistic fit did not converge in {max_iter} iterations "
        f"(gradient norm {grad_norm:.3e})", gradient_norm=grad_norm)


def fit_partially_linear(records, allow_upward=False):
    """Per-group least squares of demand on (price, covariates, intercept).

    A fitted nonnegative price slope raises UpwardSlopeError unless the
    caller explicitly opts in with ``allow_upward`` (the returned model then
    carries the override flag). Groups with rank-deficient designs, e.g. no
    price variation, raise SingularDesignError.
    """
    X, y, w, dim = _design_matrix(records)
    groups = sorted({r.group for r in records})
    labels = np.array([r.group for r in records])
    beta, baseline, rss = {}, {}, {}
    for g in groups:
        rows = labels == g
        Xg = np.column_stack([X[rows, dim], X[rows, :dim], np.ones(rows.sum())])
        yg = y[rows]
        sw = np.sqrt(w[rows])
        if np.ptp(Xg[:, 0]) == 0.0:
            raise SingularDesignError(
                f"group {g!r}: no price variation; slope unidentified")
        coef, _, rank, _ = np.linalg.lstsq(Xg * sw[:, None], yg * sw, rcond=None)
        if rank < Xg.shape[1]:
            raise SingularDesignError(
                f"group {g!r}: rank-deficient design ({rank} < {Xg.shape[1]})")
        slope = float(coef[0])
        if slope >= 0.0 and not allow_upward:
            raise UpwardSlopeError(
                f"group {g!r}: fitted price slope {slope:.6g} is not negative; "
                "demand must fall in price")
        beta[g] = slope
        baseline[g] = (float(coef[-1]), np.asarray(coef[1:-1], dtype=float))
        resid = yg - Xg @ coef
        rss[g] = float(w[rows] @ resid ** 2)
    model = PartiallyLinearDemand(beta=beta, baseline=baseline,
                                  baseline_form="linear",
                                  allow_upward=allow_upward)
    diag = FitDiagnostics(n_records=len(records), iterations=1,
                          gradient_norm=0.0, residual_sum_squares=rss)
    return model, diag


# ---------------------------------------------------------------------------
# model and population (de)serialization
# ---------------------------------------------------------------------------


def model_to_dict(model) -> dict:
    """JSON-ready description of a demand model."""
    if isinstance(model, PartiallyLinearDemand):
        if model.baseline_form == "linear":
            baseline = {g: {"intercept": float(icpt),
                            "coefs": [float(c) for c in np.atleast_1d(coefs)]}
                        for g, (icpt, coefs) in model.baseline.items()}
        else:
            baseline = {g: [{"x": [float(v) for v in key], "value": float(val)}
                            for key, val in sorted(table.items())]
                        for g, table in model.baseline.items()}
        return {"kind": "partially_linear",
                "baseline_form": model.baseline_form,
                "beta": {g: float(b) for g, b in model.beta.items()},
                "baseline": baseline,
                "allow_upward": model.allow_upward}
    if isinstance(model, LogisticDemand):
        return {"kind": "logistic",
                "gamma": [float(v) for v in model.gamma],
                "beta": model.beta,
                "intercept": model.intercept}
    if isinstance(model, LatentValuationModel):
        return {"kind": "latent", "noise": model.noise, "scale": model.scale,
                "loc": {g: {"intercept": float(icpt),
                            "coefs": [float(c) for c in np.atleast_1d(coefs)]}
                        for g, (icpt, coefs) in model.loc.items()}}
    raise TypeError(f"not a demand model: {type(model).__name__}")


def model_from_dict(data: dict):
    """Inverse of :func:`model_to_dict`."""
    kind = data.get("kind")
    if kind == "partially_linear":
        form = data.get("baseline_form", "linear")
        if form == "linear":
            baseline = {g: (float(entry["intercept"]),
                            np.asarray(entry["coefs"], dtype=float))
                        for g, entry in data["baseline"].items()}
        else:
            baseline = {g: {tuple(float(v) for v in row["x"]): float(row["value"])
                            for row in rows}
                        for g, rows in data["baseline"].items()}
        return PartiallyLinearDemand(
            beta={g: float(b) for g, b in data["beta"].items()},
            baseline=baseline, baseline_form=form,
            allow_upward=bool(data.get("allow_upward", False)))
    if kind == "logistic":
        return LogisticDemand(gamma=np.asarray(data["gamma"], dtype=float),
                              beta=float(data["beta"]),
                              intercept=float(data.get("intercept", 0.0)))
    if kind == "latent":
        loc = {g: (float(entry["intercept"]),
                   np.asarray(entry["coefs"], dtype=float))
               for g, entry in data["loc"].items()}
        return LatentValuationModel(loc=loc,
                                    noise=data.get("noise", "logistic"),
                                    scale=float(data.get("scale", 1.0)))
    raise MissingFieldError(f"unknown model kind {kind!r}")


def population_to_dict(population: Population) -> dict:
    """JSON-ready description of a population's support side (not records)."""
    out = {"groups": list(population.groups),
           "unit_cost": population.unit_cost}
    if population.support is not None:
        out["support"] = [[float(v) for v in row] for row in population.support]
        out["masses"] = [float(v) for v in population.masses]
        out["membership"] = [[float(v) for v in row]
                             for row in population.membership]
    if population.rho is not None:
        out["rho"] = {g: float(v) for g, v in population.rho.items()}
    return out


def population_from_dict(data: dict, records=None) -> Population:
    """Inverse of :func:`population_to_dict`; records may be attached."""
    if "groups" not in data:
        raise MissingFieldError("population description needs 'groups'")
    return Population(
        groups=tuple(data["groups"]),
        records=list(records) if records else [],
        support=np.asarray(data["support"], dtype=float)
        if data.get("support") is not None else None,
        masses=np.asarray(data["masses"], dtype=float)
        if data.get("masses") is not None else None,
        membership=np.asarray(data["membership"], dtype=float)
        if data.get("membership") is not None else None,
        rho=dict(data["rho"]) if data.get("rho") is not None else None,
        unit_cost=float(data.get("unit_cost", 0.0)))
