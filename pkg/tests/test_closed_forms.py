import math

import numpy as np
import pytest

from totem import (
    CoinProblem,
    LogisticProblem,
    Totemplex,
    TotemError,
    binomial_projection_closed_form,
    binomial_test_statistic_closed_form,
    ising_coin_generator,
    k_marginal_op,
    k_marginal_projection_closed_form,
    logistic_conditionals,
    logistic_element,
    logistic_model_distribution,
    logistic_space,
    logit_affine_fit,
    max_norm_distance,
    newton_project,
    two_coin_projection_closed_form,
    uniform,
)
from totem.closed_forms import coin_space, ising_parameters


class TestBinomialForm:
    def test_fair_coin_is_uniform(self):
        q = binomial_projection_closed_form(3, 0.5)
        np.testing.assert_allclose(q.weights, 1.0 / 8.0, atol=1e-15)

    def test_frozen_weights(self):
        q = binomial_projection_closed_form(2, 0.75)
        np.testing.assert_allclose(
            q.admissible, [0.5625, 0.1875, 0.1875, 0.0625], atol=1e-15
        )

    def test_count_shell_expectations_are_binomial(self):
        length, eta = 4, 0.3
        q = binomial_projection_closed_form(length, eta)
        for k in range(length + 1):
            expected = math.comb(length, k) * eta**k * (1 - eta) ** (length - k)
            got = k_marginal_op(q.space, k, "head").expectation(q)
            assert got == pytest.approx(expected, abs=1e-12)

    def test_boundary_rate_rejected(self):
        with pytest.raises(TotemError):
            binomial_projection_closed_form(2, 1.0)


class TestCountSpectrumForm:
    def test_binomial_spectrum_reduces_to_binomial(self):
        length, eta = 3, 0.4
        phi = [
            math.comb(length, k) * eta**k * (1 - eta) ** (length - k)
            for k in range(length + 1)
        ]
        a = k_marginal_projection_closed_form(length, phi)
        b = binomial_projection_closed_form(length, eta)
        assert max_norm_distance(a, b) < 1e-12

    def test_symmetric_spectrum_is_uniform(self):
        q = k_marginal_projection_closed_form(2, [0.25, 0.5, 0.25])
        np.testing.assert_allclose(q.weights, 0.25, atol=1e-15)

    def test_boundary_spectrum(self):
        q = k_marginal_projection_closed_form(2, [0.0, 1.0, 0.0])
        space = q.space
        assert q.weight_of(("head", "tail")) == pytest.approx(0.5)
        assert q.weight_of(("tail", "head")) == pytest.approx(0.5)
        assert q.weight_of(("head", "head")) == 0.0


class TestTwoCoinForm:
    def test_equal_rates_reduce_to_pooled_form(self):
        length = 3
        pooled = two_coin_projection_closed_form(length, 0.3, 0.55, 0.55)
        space = pooled.space
        l = np.array(
            [sum(1 for s in e[1:] if s == "head") for e in space.admissible_entities()]
        )
        phi = np.array([0.3 if e[0] == "A" else 0.7 for e in space.admissible_entities()])
        expected = phi * 0.55**l * 0.45 ** (length - l)
        np.testing.assert_allclose(pooled.admissible, expected, atol=1e-15)

    def test_frozen_single_trial(self):
        q = two_coin_projection_closed_form(1, 0.5, 0.4, 0.6)
        np.testing.assert_allclose(q.admissible, [0.2, 0.3, 0.3, 0.2], atol=1e-15)

    def test_boundary_prevalence_rejected(self):
        with pytest.raises(TotemError):
            two_coin_projection_closed_form(2, 1.0, 0.4, 0.6)


class TestBinomialStatistic:
    def test_zero_on_binomial_spectrum(self):
        length, eta = 4, 0.65
        phi = [
            math.comb(length, k) * eta**k * (1 - eta) ** (length - k)
            for k in range(length + 1)
        ]
        assert binomial_test_statistic_closed_form(length, phi, eta) == pytest.approx(
            0.0, abs=1e-14
        )

    def test_frozen_value(self):
        # direct evaluation at phi=(1/2, 0, 1/2), eta=1/2
        value = binomial_test_statistic_closed_form(2, [0.5, 0.0, 0.5], 0.5)
        assert value == pytest.approx(math.log(2), abs=1e-14)

    def test_defaults_to_spectrum_mean(self):
        phi = [0.1, 0.3, 0.4, 0.2]
        a = binomial_test_statistic_closed_form(3, phi)
        eta = (0 * 0.1 + 1 * 0.3 + 2 * 0.4 + 3 * 0.2) / 3
        b = binomial_test_statistic_closed_form(3, phi, eta)
        assert a == b


class TestIsingGenerator:
    def test_zero_coupling_is_binomial(self):
        a = ising_coin_generator(3, 0.55, 0.0)
        b = binomial_projection_closed_form(3, 0.55)
        assert max_norm_distance(a, b) == 0.0

    def test_solved_parameters_near_first_order(self):
        length, eta, kappa = 4, 0.5, 0.01
        h, j = ising_parameters(length, eta, kappa)
        h1 = math.log(eta / (1 - eta)) - 2 * kappa / (length * eta * (1 - eta) ** 2)
        j1 = kappa / (eta**2 * (1 - eta) ** 2)
        assert abs(h - h1) <= 0.1 * abs(h1)
        assert abs(j - j1) <= 0.1 * abs(j1)

    def test_realized_moments_exact(self):
        length, eta, kappa, i0, j0 = 4, 0.5, 0.02, 0, 2
        dist = ising_coin_generator(length, eta, kappa, i0, j0)
        space = dist.space
        heads = [
            np.array([1.0 if e[i] == "head" else 0.0 for e in space.admissible_entities()])
            for i in range(length)
        ]
        w = dist.admissible
        mean_rate = float(np.mean([w @ h for h in heads]))
        corr = float(w @ (heads[i0] * heads[j0]) - (w @ heads[i0]) * (w @ heads[j0]))
        assert abs(mean_rate - eta) < 1e-10
        assert abs(corr - kappa) < 1e-10

    def test_coupling_bound_enforced(self):
        with pytest.raises(TotemError, match="too large"):
            ising_coin_generator(4, 0.5, 0.2)


class TestLogistic:
    def test_saturated_single_predictor(self):
        element = logistic_element(1)
        assert element.rank == 4  # = |E*|: learn-by-heart
        space = logistic_space(1)
        f = logistic_model_distribution(1, 0.3, [0.8])
        result = newton_project(uniform(space), Totemplex(element, f))
        assert max_norm_distance(result.distribution, f) < 1e-9

    def test_rank_two_predictors(self):
        element = logistic_element(2)
        assert element.rank == 7
        assert element.kernel_dim == 1

    def test_conditionals_read_off(self):
        beta0, betas = -0.4, [1.1, -0.7]
        f = logistic_model_distribution(2, beta0, betas)
        profiles, probs = logistic_conditionals(f)
        for profile, prob in zip(profiles, probs):
            z = beta0 + sum(b * int(c) for b, c in zip(betas, profile))
            assert prob == pytest.approx(1.0 / (1.0 + math.exp(-z)), abs=1e-12)

    def test_logit_fit_recovers_coefficients(self):
        beta0, betas = 0.25, [0.9, -1.3]
        f = logistic_model_distribution(2, beta0, betas)
        profiles, probs = logistic_conditionals(f)
        b0, b, residual = logit_affine_fit(profiles, probs)
        assert residual < 1e-10
        assert b0 == pytest.approx(beta0, abs=1e-10)
        np.testing.assert_allclose(b, betas, atol=1e-10)

    def test_projection_conditionals_are_affine_in_logit(self):
        # the projected law has exactly logistic conditionals
        rng = np.random.default_rng(3)
        space = logistic_space(2)
        w = rng.gamma(3.0, size=space.n_admissible)
        from totem import Distribution

        f = Distribution.from_admissible_weights(space, w / w.sum())
        result = newton_project(uniform(space), Totemplex(logistic_element(2), f))
        profiles, probs = logistic_conditionals(result.distribution)
        _, _, residual = logit_affine_fit(profiles, probs)
        assert residual < 1e-8

    def test_zero_profile_mass_flagged_nan(self):
        space = logistic_space(1)
        from totem import Distribution

        f = Distribution.from_admissible_weights(space, [0.5, 0.0, 0.5, 0.0])
        profiles, probs = logistic_conditionals(f)
        assert math.isnan(probs[profiles.index(("1",))])


class TestReferenceUpdate:
    def test_second_day_replaces_the_rate(self):
        # projecting the day-1 fit onto a day-2 mean family = day-2 closed form
        from totem.closed_forms import coin_element

        length, eta1, eta2 = 3, 0.35, 0.7
        space = coin_space(length)
        day1 = binomial_projection_closed_form(length, eta1, space)
        day2_data = binomial_projection_closed_form(length, eta2, space)
        plex = Totemplex(coin_element(space), day2_data)
        result = newton_project(day1, plex)
        assert max_norm_distance(result.distribution, day2_data) < 1e-8


class TestProblemTypes:
    def test_coin_problem_validation(self):
        with pytest.raises(TotemError):
            CoinProblem(length=0)
        with pytest.raises(TotemError):
            CoinProblem(length=2, eta=1.5)
        with pytest.raises(TotemError):
            CoinProblem(length=2, eta_a=0.4)  # grouped needs all three

    def test_coin_problem_generators(self):
        plain = CoinProblem(length=2, eta=0.6)
        assert plain.generator().space.n_entities == 4
        grouped = CoinProblem(length=2, eta_a=0.4, eta_b=0.6, phi_a=0.5)
        assert grouped.generator().space.n_entities == 8
        coupled = CoinProblem(length=3, eta=0.5, kappa=0.01)
        assert coupled.generator().space.n_entities == 8

    def test_logistic_problem_validation(self):
        with pytest.raises(TotemError):
            LogisticProblem(m=0)
        with pytest.raises(TotemError):
            LogisticProblem(m=2, betas=(1.0,))
        assert LogisticProblem(m=2).element().rank == 7
