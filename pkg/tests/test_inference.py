import math

import numpy as np
import pytest

from totem import (
    Distribution,
    NestingError,
    Totemplex,
    TotemError,
    binomial_test_statistic_closed_form,
    calibration_experiment,
    chi2_cdf,
    chi2_sf,
    i_divergence,
    i_score,
    i_test,
    identity_op,
    k_marginal_op,
    ks_distance,
    make_element,
    marginal_op,
    sample_multinomial,
    select_element,
    uniform,
)
from totem.closed_forms import (
    binomial_projection_closed_form,
    coin_element,
    coin_space,
    k_marginal_element,
    two_coin_pooled_element,
    two_coin_projection_closed_form,
    two_coin_space,
    two_coin_split_element,
)

from helpers import random_distribution, random_space


class TestChi2Cdf:
    def test_zero(self):
        assert chi2_cdf(0.0, 3) == 0.0

    def test_two_dof_closed_form(self):
        # k=2 reduces to 1 - exp(-x/2)
        for x in np.linspace(0.0, 50.0, 101):
            assert chi2_cdf(x, 2) == pytest.approx(1.0 - math.exp(-x / 2), abs=1e-12)
        assert chi2_cdf(5.99146, 2) == pytest.approx(0.9499998863221712, abs=1e-12)

    def test_one_dof_against_quadrature(self):
        # frozen from adaptive quadrature of the chi-squared density
        assert chi2_cdf(3.84146, 1) == pytest.approx(0.9500008327209274, abs=1e-4)

    def test_monotone(self):
        xs = np.linspace(0.0, 80.0, 400)
        for k in (1, 2, 5, 10):
            values = chi2_cdf(xs, k)
            assert np.all(np.diff(values) >= 0.0)

    def test_sf_complements_cdf(self):
        for k in (1, 3, 7):
            for x in (0.1, 1.0, 10.0, 30.0):
                assert chi2_sf(x, k) == pytest.approx(1.0 - chi2_cdf(x, k), abs=1e-12)

    def test_bad_dof(self):
        with pytest.raises(TotemError):
            chi2_cdf(1.0, 0)


class TestSampling:
    def test_point_mass(self):
        space = coin_space(2)
        p = Distribution.point_mass(space, ("head", "tail"))
        counts = sample_multinomial(p, 17, seed=4)
        assert counts.sum() == 17
        assert counts[space.index_of(("head", "tail"))] == 17

    def test_seed_reproducibility(self):
        p = binomial_projection_closed_form(3, 0.6)
        a = sample_multinomial(p, 1000, seed=123)
        b = sample_multinomial(p, 1000, seed=123)
        np.testing.assert_array_equal(a, b)
        c = sample_multinomial(p, 1000, seed=124)
        assert np.any(a != c)

    def test_binomial_concentration(self):
        space = coin_space(1)
        p = Distribution(space, [0.5, 0.5])
        n = 10**6
        counts = sample_multinomial(p, n, seed=7)
        bound = 5.0 * math.sqrt(n / 4.0)
        assert abs(counts[0] - n / 2) < bound

    def test_law_of_large_numbers_over_draws(self):
        space = coin_space(2)
        p = binomial_projection_closed_form(2, 0.3, space)
        total = np.zeros(space.n_entities)
        draws = 10**4
        n = 10
        for r in range(draws):
            total += sample_multinomial(p, n, seed=1000 + r)
        mean = total / (draws * n)
        assert np.max(np.abs(mean - p.weights)) < 1e-2


class TestIScore:
    def test_learn_by_heart_scores_zero(self):
        space = coin_space(2)
        f = binomial_projection_closed_form(2, 0.7, space)
        saturated = make_element(
            [
                marginal_op(space, [d.name for d in space.domains], list(e))
                for e in space.admissible_entities()
            ],
            mode="auto-reduce",
        )
        report = i_score(uniform(space), Totemplex(saturated, f), n=100)
        assert report.kernel_dim == 0
        assert abs(report.score) < 1e-6
        assert abs(report.divergence) < 1e-9

    def test_identity_only_formula(self):
        # score = -N D(f || uniform) + (|E*|-1)/2 log N
        length, n = 3, 500
        space = coin_space(length)
        f = binomial_projection_closed_form(length, 0.7, space)
        element = make_element([identity_op(space)])
        report = i_score(uniform(space), Totemplex(element, f), n=n)
        expected = -n * i_divergence(f, uniform(space)) + 0.5 * (2**length - 1) * math.log(n)
        assert report.score == pytest.approx(expected, abs=1e-8)

    def test_gauge_invariance(self):
        # same row space, same score
        space = two_coin_space(2)
        f = two_coin_projection_closed_form(2, 0.4, 0.3, 0.6, space)
        split = two_coin_split_element(space)
        h = split.operators
        asym = make_element(
            [identity_op(space), h[0], h[2], h[3]], mode="auto-reduce"
        )
        a = i_score(uniform(space), Totemplex(split, f), n=777)
        b = i_score(uniform(space), Totemplex(asym, f), n=777)
        assert a.score == pytest.approx(b.score, abs=1e-8)


class TestSelectElement:
    def test_ranking_and_dedup(self):
        space = coin_space(2)
        f = binomial_projection_closed_form(2, 0.75, space)
        mean = coin_element(space)
        spectrum = k_marginal_element(space)
        doubled = make_element(
            [identity_op(space), spectrum.operators[0], spectrum.operators[1],
             spectrum.operators[2]],
            mode="auto-reduce",
        )
        reports = select_element(uniform(space), [mean, spectrum, doubled], f, n=10_000)
        assert len(reports) == 2  # spectrum and doubled share a row space
        assert any("equivalent row space" in r.note for r in reports)
        # data is exactly on the mean family: the bigger kernel wins
        assert reports[0].element_fingerprint == mean.fingerprint

    def test_failures_recorded_not_raised(self):
        space = coin_space(2)
        f = binomial_projection_closed_form(2, 0.75, space)
        reports = select_element(
            uniform(space), [coin_element(space)], f, n=100, max_iter=1
        )
        assert len(reports) == 1
        assert reports[0].error
        assert reports[0].score == -math.inf


class TestITest:
    def test_exact_binomial_counts_give_zero(self):
        space = coin_space(2)
        f = binomial_projection_closed_form(2, 0.5, space)
        report = i_test(
            uniform(space), coin_element(space), k_marginal_element(space), f, n=400
        )
        assert report.q_statistic == pytest.approx(0.0, abs=1e-7)
        assert report.p_value == pytest.approx(1.0, abs=1e-6)
        assert not report.reject

    def test_matches_closed_form_statistic(self):
        length, n = 3, 1200
        space = coin_space(length)
        rng = np.random.default_rng(3)
        w = rng.gamma(2.0, size=space.n_admissible)
        f = Distribution.from_admissible_weights(space, w / w.sum())
        report = i_test(
            uniform(space), coin_element(space), k_marginal_element(space), f, n=n
        )
        phi = np.array(
            [k_marginal_op(space, k, "head").expectation(f) for k in range(length + 1)]
        )
        eta = float(np.arange(length + 1) @ phi / length)
        expected = 2 * n * binomial_test_statistic_closed_form(length, phi, eta)
        assert report.q_statistic == pytest.approx(expected, abs=1e-8 * max(1, expected))
        assert report.dof == length - 1

    def test_two_coin_single_dof(self):
        space = two_coin_space(3)
        f = two_coin_projection_closed_form(3, 0.5, 0.4, 0.6, space)
        report = i_test(
            uniform(space),
            two_coin_pooled_element(space),
            two_coin_split_element(space),
            f,
            n=5000,
        )
        assert report.dof == 1
        assert report.reject  # distinct rates at N=5000 are blatant

    def test_equal_rank_rejected(self):
        space = coin_space(2)
        f = binomial_projection_closed_form(2, 0.6, space)
        with pytest.raises(NestingError, match="zero degrees"):
            i_test(uniform(space), coin_element(space), coin_element(space), f, n=10)

    def test_non_nested_rejected(self):
        space = two_coin_space(2)
        f = two_coin_projection_closed_form(2, 0.5, 0.4, 0.6, space)
        group_only = make_element(
            [identity_op(space), marginal_op(space, "group", "A")]
        )
        mean_only = coin_element(space)
        with pytest.raises(NestingError, match="not implied"):
            i_test(uniform(space), group_only, mean_only, f, n=10)

    def test_monotone_in_refinement(self):
        # adding operators to the inner element never shrinks the statistic
        length, n = 3, 800
        space = coin_space(length)
        rng = np.random.default_rng(5)
        w = rng.gamma(2.0, size=space.n_admissible)
        f = Distribution.from_admissible_weights(space, w / w.sum())
        outer = coin_element(space)
        ops = [k_marginal_op(space, k, "head") for k in range(length + 1)]
        coarse_inner = make_element(
            [identity_op(space), ops[0], success_op_of(space)], mode="auto-reduce"
        )
        fine_inner = k_marginal_element(space)
        q_coarse = i_test(uniform(space), outer, coarse_inner, f, n=n).q_statistic
        q_fine = i_test(uniform(space), outer, fine_inner, f, n=n).q_statistic
        assert q_fine >= q_coarse - 1e-10

    def test_p_value_clamped(self):
        space = two_coin_space(4)
        f = two_coin_projection_closed_form(4, 0.5, 0.05, 0.95, space)
        report = i_test(
            uniform(space),
            two_coin_pooled_element(space),
            two_coin_split_element(space),
            f,
            n=10**7,
        )
        assert report.p_value == 1e-300
        assert report.p_value_underflow


def success_op_of(space):
    from totem import success_op

    return success_op(space, "head")


class TestCalibration:
    def test_null_mean_matches_dof(self):
        # under a generator on the coarse family, E[Q] ~ dof
        length, n, reps = 2, 2000, 400
        generator = binomial_projection_closed_form(length, 0.5)
        space = generator.space
        result = calibration_experiment(
            generator,
            coin_element(space),
            k_marginal_element(space),
            n,
            reps,
            seed=42,
        )
        dof = result.dof
        assert dof == length - 1
        assert abs(result.mean_q - dof) < 3.0 * math.sqrt(2.0 * dof / reps)
        assert result.ks_distance < 0.08

    def test_reproducible(self):
        generator = binomial_projection_closed_form(2, 0.5)
        space = generator.space
        kwargs = dict(n=500, replications=50, seed=9)
        a = calibration_experiment(
            generator, coin_element(space), k_marginal_element(space), **kwargs
        )
        b = calibration_experiment(
            generator, coin_element(space), k_marginal_element(space), **kwargs
        )
        np.testing.assert_array_equal(a.q_values, b.q_values)


class TestKsDistance:
    def test_exact_sample_from_cdf_inverse(self):
        # uniform grid pushed through the inverse CDF has vanishing distance
        rng = np.random.default_rng(11)
        u = (np.arange(1, 2001) - 0.5) / 2000
        from scipy.stats import chi2 as scipy_chi2

        samples = scipy_chi2.ppf(u, df=3)
        assert ks_distance(samples, 3) < 1e-3

    def test_wrong_dof_detected(self):
        from scipy.stats import chi2 as scipy_chi2

        u = (np.arange(1, 2001) - 0.5) / 2000
        samples = scipy_chi2.ppf(u, df=3)
        assert ks_distance(samples, 6) > 0.2


class TestBicCorrespondence:
    def test_argmax_score_is_argmin_bic(self):
        # independent BIC: (D-1) log N + 2N l(f;q) - 2N l(f;f)
        from totem import cross_entropy, newton_project
        from helpers import random_element

        rng = np.random.default_rng(13)
        for _ in range(5):
            space = random_space(rng, max_attrs=3, max_levels=3)
            f = random_distribution(rng, space)
            n = 400
            ref = uniform(space)
            ranks = sorted({min(2, space.n_admissible), min(3, space.n_admissible),
                            min(4, space.n_admissible)})
            elements = [random_element(rng, space, r) for r in ranks]
            scores, bics = [], []
            for element in elements:
                plex = Totemplex(element, f)
                scores.append(i_score(ref, plex, n).score)
                q = newton_project(ref, plex).distribution
                bics.append(
                    (element.rank - 1) * math.log(n)
                    + 2 * n * cross_entropy(f, q)
                    - 2 * n * cross_entropy(f, f)
                )
            assert int(np.argmax(scores)) == int(np.argmin(bics))
