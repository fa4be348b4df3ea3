import numpy as np
import pytest

import fairprice as fp
from fairprice.demand import NOISE_FAMILIES

from oracles import central_difference


def test_noise_families_pdf_matches_cdf_derivative():
    zs = np.linspace(-4.5, 4.5, 37)
    for name, fam in NOISE_FAMILIES.items():
        for z in zs:
            if name == "exponential" and abs(z) < 0.05:
                continue  # density kink at the origin
            num = central_difference(lambda t: float(fam.cdf(t)), z, 1e-5)
            assert abs(num - float(fam.pdf(z))) < 5e-6, (name, z)


def test_noise_families_pdf_prime_matches_pdf_derivative():
    for name, fam in NOISE_FAMILIES.items():
        for z in np.linspace(-4.0, 4.0, 33):
            if name in ("exponential", "laplace") and abs(z) < 0.05:
                continue
            num = central_difference(lambda t: float(fam.pdf(t)), z, 1e-5)
            assert abs(num - float(fam.pdf_prime(z))) < 5e-6, (name, z)


def test_noise_samples_follow_cdf():
    # seeded draw; compare empirical CDF at a few quantiles
    rng = np.random.default_rng(42)
    for name, fam in NOISE_FAMILIES.items():
        draws = fam.sample(rng, 20_000)
        for z in (-1.0, 0.0, 1.0):
            emp = float(np.mean(draws <= z))
            assert abs(emp - float(fam.cdf(z))) < 0.02, name


def _linear_model():
    return fp.PartiallyLinearDemand(
        beta={"a": -1.0, "b": -0.5},
        baseline={"a": (2.0, np.array([0.5])), "b": (1.0, np.array([-0.25]))})


def test_partially_linear_eval_and_slope():
    m = _linear_model()
    x = [2.0]
    assert fp.eval_demand(m, x, "a", 1.5) == pytest.approx(2.0 + 1.0 - 1.5)
    assert fp.eval_demand(m, x, "b", 1.0) == pytest.approx(1.0 - 0.5 - 0.5)
    assert fp.demand_gradient(m, x, "a", 0.7) == -1.0
    assert fp.demand_curvature(m, x, "b", 0.7) == 0.0
    # values are model scale: no clamping to [0, 1]
    assert fp.eval_demand(m, x, "a", 0.0) == pytest.approx(3.0)
    assert fp.eval_demand(m, x, "a", 10.0) < 0.0


def test_partially_linear_negative_prices_allowed():
    m = _linear_model()
    assert fp.eval_demand(m, [0.0], "a", -1.0) == pytest.approx(3.0)


def test_mixture_group_is_weighted_average():
    m = _linear_model()
    mix = {"a": 0.3, "b": 0.7}
    x = [1.0]
    p = 0.8
    want = 0.3 * fp.eval_demand(m, x, "a", p) + 0.7 * fp.eval_demand(m, x, "b", p)
    assert fp.eval_demand(m, x, mix, p) == pytest.approx(want)
    want_g = 0.3 * (-1.0) + 0.7 * (-0.5)
    assert fp.demand_gradient(m, x, mix, p) == pytest.approx(want_g)


def test_upward_slope_rejected_at_construction():
    with pytest.raises(fp.UpwardSlopeError):
        fp.PartiallyLinearDemand(beta={"a": 0.1},
                                 baseline={"a": (1.0, np.array([]))})


def test_unknown_group_raises():
    m = _linear_model()
    with pytest.raises(fp.UnknownGroupError):
        fp.eval_demand(m, [0.0], "zz", 1.0)


def test_logistic_demand_gradient_and_curvature_match_fd():
    m = fp.LogisticDemand(gamma=[0.4, -0.2], beta=-1.3, intercept=0.6)
    x = [1.0, 2.0]
    for p in (0.1, 0.9, 2.5):
        g = central_difference(lambda t: fp.eval_demand(m, x, None, t), p, 1e-5)
        c = central_difference(
            lambda t: fp.demand_gradient(m, x, None, t), p, 1e-5)
        assert abs(g - fp.demand_gradient(m, x, None, p)) < 1e-8
        assert abs(c - fp.demand_curvature(m, x, None, p)) < 1e-7


def test_logistic_rejects_negative_price():
    m = fp.LogisticDemand(gamma=[0.0], beta=-1.0)
    with pytest.raises(fp.InvalidRecordError):
        fp.eval_demand(m, [0.0], None, -0.5)


@pytest.mark.parametrize("noise", sorted(NOISE_FAMILIES))
def test_latent_demand_derivatives_match_fd(noise):
    m = fp.LatentValuationModel(loc={"g": (2.0, np.array([0.5]))},
                                noise=noise, scale=0.7)
    x = [1.0]
    for p in (0.5, 1.8, 3.2):
        g = central_difference(lambda t: fp.eval_demand(m, x, "g", t), p, 1e-5)
        assert abs(g - fp.demand_gradient(m, x, "g", p)) < 1e-6, (noise, p)
        c = central_difference(
            lambda t: fp.demand_gradient(m, x, "g", t), p, 1e-5)
        assert abs(c - fp.demand_curvature(m, x, "g", p)) < 1e-5, (noise, p)


def test_latent_demand_is_survival_probability():
    m = fp.LatentValuationModel(loc={"g": (1.0, np.array([]))},
                                noise="normal", scale=0.5)
    assert fp.eval_demand(m, [], "g", 0.0) > 0.97
    assert fp.eval_demand(m, [], "g", 1.0) == pytest.approx(0.5)
    assert fp.eval_demand(m, [], "g", 30.0) >= 0.0
    # deep tail must not produce garbage
    assert fp.eval_demand(m, [], "g", 30.0) < 1e-300 or \
        fp.eval_demand(m, [], "g", 30.0) == 0.0


def test_sample_demand_curve_monotone_in_price():
    m = fp.LatentValuationModel(loc={"g": (2.0, np.array([]))},
                                noise="gumbel", scale=1.0)
    rng = np.random.default_rng(3)
    prices = np.array([0.5, 1.0, 1.5, 2.0, 3.0])
    for _ in range(200):
        buys = fp.sample_demand_curve(m, [], "g", prices, rng)
        assert np.all(np.diff(buys) <= 0)


def test_sample_demand_rate_matches_model():
    m = fp.LogisticDemand(gamma=[0.0], beta=-1.0, intercept=1.0)
    rng = np.random.default_rng(11)
    hits = sum(fp.sample_demand(m, [0.0], None, 1.0, rng) for _ in range(20_000))
    assert abs(hits / 20_000 - 0.5) < 0.02


def test_sample_valuation_location_shift():
    m = fp.LatentValuationModel(loc={"g": (5.0, np.array([]))},
                                noise="normal", scale=0.1)
    rng = np.random.default_rng(5)
    draws = [fp.sample_valuation(m, [], "g", rng) for _ in range(2000)]
    assert abs(np.mean(draws) - 5.0) < 0.02


# -- fitting ----------------------------------------------------------------


def _logistic_records(n, rng, gamma=(0.8,), beta=-1.5, intercept=0.5):
    model = fp.LogisticDemand(gamma=list(gamma), beta=beta, intercept=intercept)
    records = []
    for i in range(n):
        x = rng.normal(size=len(gamma))
        p = rng.uniform(0.2, 2.5)
        d = fp.sample_demand(model, x, None, p, rng)
        records.append(fp.Record(id=str(i), group="a" if i % 2 else "b",
                                 covariates=x, price=p, demand=float(d)))
    return records


def test_fit_logistic_recovers_coefficients():
    rng = np.random.default_rng(7)
    records = _logistic_records(6000, rng)
    model, diag = fp.fit_logistic(records)
    assert abs(model.beta - (-1.5)) < 0.15
    assert abs(model.gamma[0] - 0.8) < 0.15
    assert abs(model.intercept - 0.5) < 0.15
    assert diag.gradient_norm < 1e-8
    assert diag.std_errors is not None and np.all(diag.std_errors > 0)
    assert diag.log_likelihood < 0


def test_fit_logistic_weights_matter():
    rng = np.random.default_rng(9)
    records = _logistic_records(800, rng)
    doubled = [fp.Record(id=r.id, group=r.group, covariates=r.covariates,
                         price=r.price, demand=r.demand, weight=2.0)
               for r in records]
    m1, _ = fp.fit_logistic(records)
    m2, _ = fp.fit_logistic(doubled)
    # uniform reweighting must not move the MLE
    assert np.allclose(m1.gamma, m2.gamma, atol=1e-6)
    assert abs(m1.beta - m2.beta) < 1e-6


def test_fit_logistic_perfect_separation():
    records = [
        fp.Record(id=str(i), group="a", covariates=[float(i)], price=1.0 + i,
                  demand=float(i >= 5))
        for i in range(10)
    ]
    with pytest.raises(fp.PerfectSeparationError):
        fp.fit_logistic(records)


def test_fit_logistic_one_class():
    records = [fp.Record(id=str(i), group="a", covariates=[float(i % 3)],
                         price=1.0 + (i % 4), demand=1.0) for i in range(12)]
    with pytest.raises(fp.PerfectSeparationError):
        fp.fit_logistic(records)


def test_fit_logistic_dead_column():
    rng = np.random.default_rng(1)
    records = [fp.Record(id=str(i), group="a", covariates=[1.5],  # constant
                         price=rng.uniform(0.5, 2.0),
                         demand=float(rng.random() < 0.5)) for i in range(60)]
    with pytest.raises(fp.SingularDesignError):
        fp.fit_logistic(records)


def test_fit_logistic_rejects_nonbinary_demand():
    records = [fp.Record(id="0", group="a", covariates=[0.1], price=1.0,
                         demand=0.7),
               fp.Record(id="1", group="a", covariates=[0.9], price=1.5,
                         demand=0.0)]
    with pytest.raises(fp.InvalidRecordError):
        fp.fit_logistic(records)


def test_fit_partially_linear_recovery():
    rng = np.random.default_rng(21)
    truth = fp.PartiallyLinearDemand(
        beta={"a": -1.2, "b": -0.6},
        baseline={"a": (2.5, np.array([0.4])), "b": (1.5, np.array([0.4]))})
    records = []
    for i in range(4000):
        x = rng.normal(size=1)
        g = "a" if rng.random() < 0.5 else "b"
        p = rng.uniform(0.2, 2.0)
        d = fp.eval_demand(truth, x, g, p) + 0.05 * rng.normal()
        records.append(fp.Record(id=str(i), group=g, covariates=x,
                                 price=p, demand=d))
    model, diag = fp.fit_partially_linear(records)
    assert abs(model.beta["a"] + 1.2) < 0.02
    assert abs(model.beta["b"] + 0.6) < 0.02
    icpt_a, coefs_a = model.baseline["a"]
    assert abs(icpt_a - 2.5) < 0.02
    assert abs(coefs_a[0] - 0.4) < 0.02
    assert set(diag.residual_sum_squares) == {"a", "b"}


def test_fit_partially_linear_upward_slope():
    rng = np.random.default_rng(2)
    records = []
    for i in range(200):
        p = rng.uniform(0.5, 2.0)
        records.append(fp.Record(id=str(i), group="a",
                                 covariates=rng.normal(size=1),
                                 price=p, demand=0.5 * p + rng.normal() * 0.01))
    with pytest.raises(fp.UpwardSlopeError):
        fp.fit_partially_linear(records)
    model, _ = fp.fit_partially_linear(records, allow_upward=True)
    assert model.beta["a"] > 0


def test_fit_partially_linear_no_price_variation():
    records = [fp.Record(id=str(i), group="a", covariates=[float(i)],
                         price=1.0, demand=0.3) for i in range(10)]
    with pytest.raises(fp.SingularDesignError):
        fp.fit_partially_linear(records)


# -- populations and serialization -------------------------------------------


def test_population_rho_computed_from_support():
    pop = fp.Population(groups=("a", "b"), support=[[0.0], [1.0]],
                        masses=[0.25, 0.75],
                        membership=[[0.8, 0.2], [0.4, 0.6]])
    assert pop.rho["a"] == pytest.approx(0.25 * 0.8 + 0.75 * 0.4)
    assert pop.rho["b"] == pytest.approx(1.0 - pop.rho["a"])
    joint = pop.joint_weights()
    assert joint.sum() == pytest.approx(1.0)


def test_population_validation_errors():
    with pytest.raises(fp.InvalidRecordError):
        fp.Population(groups=("a", "b"), support=[[0.0]], masses=[0.9],
                      membership=[[0.5, 0.5]])  # masses don't sum to 1
    with pytest.raises(fp.InvalidRecordError):
        fp.Population(groups=("a", "b"), support=[[0.0]], masses=[1.0],
                      membership=[[0.7, 0.7]])  # membership row sum
    with pytest.raises(fp.InvalidRecordError):
        fp.Population(groups=("a", "b"), support=[[0.0]], masses=[1.0],
                      membership=[[0.5, 0.5]], rho={"a": 0.9, "b": 0.1})
    with pytest.raises(fp.DimensionMismatchError):
        fp.Population(groups=("a", "b"), support=[[0.0], [1.0]], masses=[1.0],
                      membership=[[0.5, 0.5]])
    with pytest.raises(fp.UnknownGroupError):
        fp.Population(groups=("a", "b"),
                      records=[fp.Record(id="0", group="zz", covariates=[0.0])],
                      rho={"a": 0.5, "b": 0.5})


def test_record_validation():
    with pytest.raises(fp.InvalidRecordError):
        fp.Record(id="0", group="a", covariates=[np.nan])
    with pytest.raises(fp.InvalidRecordError):
        fp.Record(id="0", group="a", covariates=[0.0], weight=0.0)


def test_model_dict_round_trip():
    models = [
        _linear_model(),
        fp.PartiallyLinearDemand(
            beta={"a": -1.0}, baseline={"a": {(0.0,): 2.0, (1.0,): 1.5}},
            baseline_form="table"),
        fp.LogisticDemand(gamma=[0.1, -0.2], beta=-0.9, intercept=0.3),
        fp.LatentValuationModel(loc={"a": (2.0, np.array([0.5]))},
                                noise="laplace", scale=0.4),
    ]
    for m in models:
        back = fp.model_from_dict(fp.model_to_dict(m))
        assert fp.model_to_dict(back) == fp.model_to_dict(m)


def test_population_dict_round_trip():
    pop = fp.Population(groups=("a", "b"), support=[[0.0], [1.0]],
                        masses=[0.5, 0.5],
                        membership=[[0.9, 0.1], [0.3, 0.7]], unit_cost=0.2)
    back = fp.population_from_dict(fp.population_to_dict(pop))
    assert fp.population_to_dict(back) == fp.population_to_dict(pop)


def test_model_from_dict_unknown_kind():
    with pytest.raises(fp.MissingFieldError):
        fp.model_from_dict({"kind": "mystery"})
