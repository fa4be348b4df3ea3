"""Tests for the equalized-price constraint solvers.

The reference values here come from two independent sources: a tiny instance
solved by hand, and a brute-force Lagrangian grid solver (oracles.py) that
shares no code with the implementation.
"""

import numpy as np
import pytest

import fairprice as fp

from oracles import oracle_attribute_parity, oracle_blind_parity


def _hand_model_population():
    # One covariate cell, two groups split evenly, intercepts 2 and 1,
    # shared slope -1.  Known solution at gamma=0: lambda*=1/4, both
    # prices 3/4, revenue loss exactly 1/16.
    model = fp.PartiallyLinearDemand(
        beta={"a": -1.0, "b": -1.0},
        baseline={"a": (2.0, np.array([])), "b": (1.0, np.array([]))})
    pop = fp.Population(groups=("a", "b"), support=[[]], masses=[1.0],
                        membership=[[0.5, 0.5]])
    return model, pop


def test_hand_instance_attribute_based():
    model, pop = _hand_model_population()
    sol = fp.solve_attribute_based_parity(model, pop, gamma=0.0)
    assert sol.lambda_star == pytest.approx(0.25, abs=1e-9)
    assert sol.prices[(0, "a")] == pytest.approx(0.75, abs=1e-9)
    assert sol.prices[(0, "b")] == pytest.approx(0.75, abs=1e-9)
    assert sol.achieved_disparity == pytest.approx(0.0, abs=1e-9)
    assert sol.unconstrained_disparity == pytest.approx(0.5, abs=1e-9)

    rev = fp.expected_revenue(sol.policy(), model, pop)
    # unconstrained revenue is (1/2)(1) + (1/2)(1/4) = 5/8; loss is 1/16
    assert rev == pytest.approx(0.625 - 0.0625, abs=1e-9)


def test_hand_instance_loss_equals_bound():
    model, pop = _hand_model_population()
    actual, bound = fp.revenue_loss_bound(model, pop)
    # the shared-slope bound is tight at gamma = 0
    assert actual == pytest.approx(0.0625, abs=1e-9)
    assert bound == pytest.approx(0.0625, abs=1e-9)


def test_gamma_inf_is_unconstrained():
    model, pop = _hand_model_population()
    for solve in (fp.solve_attribute_based_parity, fp.solve_attribute_blind_parity):
        sol = solve(model, pop, gamma=np.inf)
        assert sol.lambda_star == 0.0
        assert sol.achieved_disparity == pytest.approx(
            sol.unconstrained_disparity)
    sol = fp.solve_attribute_based_parity(model, pop, gamma=np.inf)
    assert sol.prices[(0, "a")] == pytest.approx(1.0)
    assert sol.prices[(0, "b")] == pytest.approx(0.5)


def test_slack_constraint_is_inactive():
    model, pop = _hand_model_population()
    sol = fp.solve_attribute_based_parity(model, pop, gamma=0.8)
    assert sol.lambda_star == 0.0  # d0 = 0.5 <= 0.8


def _random_instance(rng, m, shared_beta):
    masses = rng.dirichlet(np.ones(m))
    memb = rng.dirichlet(np.ones(2), size=m)
    support = [[float(v)] for v in rng.normal(size=m)]
    dbar = {}
    for g in ("a", "b"):
        icpt = rng.uniform(1.0, 3.0)
        coef = rng.uniform(-0.3, 0.3)
        dbar[g] = (icpt, np.array([coef]))
    if shared_beta:
        b = -rng.uniform(0.5, 2.0)
        beta = {"a": b, "b": b}
    else:
        beta = {"a": -rng.uniform(0.5, 2.0), "b": -rng.uniform(0.5, 2.0)}
    model = fp.PartiallyLinearDemand(beta=beta, baseline=dbar)
    pop = fp.Population(groups=("a", "b"), support=support,
                        masses=masses.tolist(), membership=memb.tolist())
    return model, pop


def _oracle_inputs(model, pop):
    m = len(pop.support)
    dbar = np.array([[model.dbar(pop.support[i], g) for g in pop.groups]
                     for i in range(m)])
    beta = np.array([model.beta[g] for g in pop.groups])
    joint = pop.joint_weights()
    rho = pop.rho_vector()
    return dbar, beta, joint, rho


@pytest.mark.parametrize("gamma", [0.0, 0.05, 0.3])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_attribute_based_matches_oracle(seed, gamma):
    rng = np.random.default_rng(100 + seed)
    model, pop = _random_instance(rng, m=3, shared_beta=(seed % 2 == 0))
    sol = fp.solve_attribute_based_parity(model, pop, gamma=gamma)

    dbar, beta, joint, rho = _oracle_inputs(model, pop)
    # oriented contrast: +1/rho for the solver's positive group
    pos = sol.oriented_groups[0]
    xi = np.array([(1.0 if g == pos else -1.0) / pop.rho[g]
                   for g in pop.groups])
    prices, revenue, disparity = oracle_attribute_parity(
        dbar, beta, joint, xi, gamma)

    for i in range(len(pop.support)):
        for j, g in enumerate(pop.groups):
            assert abs(sol.prices[(i, g)] - prices[i, j]) < 1e-3, (i, g)
    got_rev = fp.expected_revenue(sol.policy(), model, pop)
    assert abs(got_rev - revenue) < 1e-5
    assert abs(sol.achieved_disparity) <= gamma + 1e-7


@pytest.mark.parametrize("gamma", [0.0, 0.1])
@pytest.mark.parametrize("seed", [3, 4])
def test_attribute_blind_matches_oracle(seed, gamma):
    rng = np.random.default_rng(200 + seed)
    model, pop = _random_instance(rng, m=3, shared_beta=False)
    sol = fp.solve_attribute_blind_parity(model, pop, gamma=gamma)

    m = len(pop.support)
    memb = np.asarray(pop.membership, dtype=float)
    dbar_x = np.array([
        sum(memb[i, j] * model.dbar(pop.support[i], g)
            for j, g in enumerate(pop.groups)) for i in range(m)])
    betabar = memb @ np.array([model.beta[g] for g in pop.groups])
    pos = sol.oriented_groups[0]
    xi = np.array([(1.0 if g == pos else -1.0) / pop.rho[g]
                   for g in pop.groups])
    m_x = memb @ xi
    prices, revenue, disparity = oracle_blind_parity(
        dbar_x, betabar, m_x, np.asarray(pop.masses), gamma)

    for i in range(m):
        got = sol.prices[(i, None)]  # one price per covariate cell
        assert abs(got - prices[i]) < 1e-3
        # both group labels resolve to the cell price
        assert sol.price(pop.support[i], "a") == got
        assert sol.price(pop.support[i], "b") == got
    got_rev = fp.expected_revenue(sol.policy(), model, pop)
    assert abs(got_rev - revenue) < 1e-5
    assert abs(sol.achieved_disparity) <= gamma + 1e-7


def test_parity_weight_identities():
    pop = fp.Population(groups=("a", "b"), support=[[0.0]], masses=[1.0],
                        membership=[[0.3, 0.7]])
    xa = fp.parity_weight(pop.rho, "a", positive_group="a")
    xb = fp.parity_weight(pop.rho, "b", positive_group="a")
    assert xa == pytest.approx(1.0 / 0.3)
    assert xb == pytest.approx(-1.0 / 0.7)
    # E[xi] = 0 and E[xi^2] = 1/rho_a + 1/rho_b under the group marginal
    assert 0.3 * xa + 0.7 * xb == pytest.approx(0.0)
    assert 0.3 * xa ** 2 + 0.7 * xb ** 2 == pytest.approx(1 / 0.3 + 1 / 0.7)


def test_policy_disparity_agrees_with_solution():
    rng = np.random.default_rng(17)
    model, pop = _random_instance(rng, m=4, shared_beta=True)
    for gamma in (0.0, 0.2, np.inf):
        sol = fp.solve_attribute_based_parity(model, pop, gamma=gamma)
        gap = fp.policy_disparity(sol.policy(), pop)
        assert abs(abs(gap) - abs(sol.achieved_disparity)) < 1e-9


def test_revenue_loss_bound_holds_on_random_instances():
    for seed in range(6):
        rng = np.random.default_rng(300 + seed)
        model, pop = _random_instance(rng, m=3, shared_beta=True)
        actual, bound = fp.revenue_loss_bound(model, pop)
        assert actual <= bound + 1e-9
        assert actual >= -1e-9


def test_revenue_loss_bound_needs_shared_slope():
    rng = np.random.default_rng(5)
    model, pop = _random_instance(rng, m=2, shared_beta=False)
    with pytest.raises(fp.PreconditionError):
        fp.revenue_loss_bound(model, pop)


def test_solution_round_trips_to_json():
    import json

    model, pop = _hand_model_population()
    sol = fp.solve_attribute_based_parity(model, pop, gamma=0.0)
    blob = json.loads(sol.to_json())
    assert blob["mode"] == fp.ATTRIBUTE_BASED
    assert blob["lambda_star"] == pytest.approx(0.25)
    assert len(blob["prices"]) == 2
    assert {row["group"] for row in blob["prices"]} == {"a", "b"}


def test_parity_rejects_latent_model():
    _, pop = _hand_model_population()
    latent = fp.LatentValuationModel(loc={"a": (2.0, np.array([])),
                                          "b": (1.0, np.array([]))},
                                     noise="logistic")
    with pytest.raises(fp.PreconditionError):
        fp.solve_attribute_based_parity(latent, pop, gamma=0.0)


def test_parity_rejects_bad_gamma():
    model, pop = _hand_model_population()
    with pytest.raises(fp.MissingFieldError):
        fp.solve_attribute_based_parity(model, pop, gamma=-0.1)


def test_parity_needs_two_groups():
    model = fp.PartiallyLinearDemand(beta={"a": -1.0},
                                     baseline={"a": (2.0, np.array([]))})
    pop = fp.Population(groups=("a",), support=[[]], masses=[1.0],
                        membership=[[1.0]])
    with pytest.raises(fp.PreconditionError):
        fp.solve_attribute_based_parity(model, pop, gamma=0.0)


# -- comparing the two modes --------------------------------------------------


def _comparison_instance(rng, m=3):
    """Instance satisfying the comparison preconditions.

    Shared price slope and a group-free baseline, so the blind and
    attribute-based problems differ only through the contrast terms.
    """
    b = -rng.uniform(0.6, 1.8)
    icpt = rng.uniform(1.5, 3.0)
    coef = rng.uniform(-0.4, 0.4)
    base = (icpt, np.array([coef]))
    model = fp.PartiallyLinearDemand(
        beta={"a": b, "b": b},
        baseline={"a": base, "b": (base[0], base[1].copy())})
    masses = rng.dirichlet(np.ones(m))
    memb = rng.dirichlet(np.ones(2), size=m)
    support = [[float(v)] for v in rng.uniform(-1, 1, size=m)]
    pop = fp.Population(groups=("a", "b"), support=support,
                        masses=masses.tolist(), membership=memb.tolist())
    return model, pop


def test_compare_modes_consistency_sweep():
    # the sign prediction must agree with directly measured price gaps
    checked = 0
    for seed in range(40):
        rng = np.random.default_rng(1000 + seed)
        model, pop = _comparison_instance(rng)
        for i in range(len(pop.support)):
            try:
                rep = fp.compare_parity_modes(model, pop, x_index=i)
            except fp.UnenforceableConstraintError:
                continue
            assert rep.consistent_low, (seed, i)
            assert rep.consistent_high, (seed, i)
            if rep.ratio is not None:
                assert -1e-9 <= rep.ratio <= 1.0 + 1e-9
            checked += 1
    assert checked > 50


def test_compare_modes_blind_overcharges_high_group_at_leaning_point():
    # At the support point leaning most toward the cheaper group, the blind
    # price exceeds what attribute-based pricing charges the *other* group:
    # the blind surcharge aimed at that cell spills onto them.
    hits = 0
    for seed in range(30):
        rng = np.random.default_rng(2000 + seed)
        model, pop = _comparison_instance(rng)
        probe = fp.compare_parity_modes(model, pop, x_index=0)
        if abs(probe.lambda_attribute) < 1e-6:
            continue  # constraint not binding; nothing to compare
        idx = fp.most_group_leaning_index(pop, probe.group_low)
        rep = fp.compare_parity_modes(model, pop, x_index=idx)
        assert rep.diff_high < 1e-9, seed
        hits += 1
    assert hits >= 10


def test_compare_modes_pinned_counterexample():
    # blind pricing can *raise* the high-group price at some support point:
    # membership there leans toward the low group, so the blind surcharge
    # undershoots the attribute-based one.  Found by deterministic search.
    found = None
    for seed in range(200):
        rng = np.random.default_rng(3000 + seed)
        model, pop = _comparison_instance(rng)
        probe = fp.compare_parity_modes(model, pop, x_index=0)
        if abs(probe.lambda_attribute) < 1e-6:
            continue
        for i in range(len(pop.support)):
            rep = fp.compare_parity_modes(model, pop, x_index=i)
            if rep.diff_high > 1e-6:
                found = (seed, i, rep)
                break
        if found:
            break
    assert found is not None
    _, _, rep = found
    assert rep.predicted_high == "higher"
    assert rep.consistent_high


def test_compare_modes_requires_group_free_baseline():
    rng = np.random.default_rng(9)
    model, pop = _random_instance(rng, m=2, shared_beta=True)
    with pytest.raises(fp.PreconditionError):
        fp.compare_parity_modes(model, pop, x_index=0)


def test_most_group_leaning_index():
    pop = fp.Population(groups=("a", "b"), support=[[0.0], [1.0], [2.0]],
                        masses=[0.3, 0.3, 0.4],
                        membership=[[0.2, 0.8], [0.9, 0.1], [0.5, 0.5]])
    assert fp.most_group_leaning_index(pop, "a") == 1
    assert fp.most_group_leaning_index(pop, "b") == 0
