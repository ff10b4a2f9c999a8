"""Acceptance gate: every criterion at its stated tolerance.

Each test prints exactly one pass/fail line (run with ``pytest -s`` to see
them) and asserts the criterion.  Tolerances are pinned here, not
configurable.
"""

import math
import time

import numpy as np

from totem import (
    CharacteristicOperator,
    Distribution,
    Totemplex,
    binomial_projection_closed_form,
    chained_project,
    cross_entropy,
    i_divergence,
    i_score,
    identity_op,
    ipf_project,
    k_marginal_projection_closed_form,
    log_multinomial,
    log_multinomial_leading,
    logistic_conditionals,
    logistic_element,
    logistic_model_distribution,
    logit_affine_fit,
    make_element,
    marginal_op,
    max_norm_distance,
    newton_project,
    sample_multinomial,
    select_element,
    two_coin_projection_closed_form,
    uniform,
)
from totem.closed_forms import (
    coin_element,
    coin_space,
    ising_coin_generator,
    k_marginal_element,
    two_coin_pooled_element,
    two_coin_space,
    two_coin_split_element,
)
from totem.inference import calibration_experiment

from helpers import (
    random_distribution,
    random_element,
    random_feasible_point,
    random_nested_pair,
    random_space,
)


def _report(number, description, ok, detail=""):
    line = f"acceptance {number:2d} {'PASS' if ok else 'FAIL'}: {description}"
    if detail and not ok:
        line += f" [{detail}]"
    print(line)
    assert ok, f"criterion {number}: {description} {detail}"


def test_criterion_01_closed_form_oracles():
    worst = 0.0
    slowest = 0.0
    for length in range(1, 11):
        space = coin_space(length)
        ref = uniform(space)
        element = coin_element(space)
        for eta in np.arange(0.1, 0.95, 0.1):
            start = time.perf_counter()
            oracle = binomial_projection_closed_form(length, float(eta), space)
            result = newton_project(ref, Totemplex(element, oracle))
            elapsed = time.perf_counter() - start
            worst = max(worst, max_norm_distance(result.distribution, oracle))
            slowest = max(slowest, elapsed)

    rng = np.random.default_rng(101)
    for length in (1, 3, 6):
        space = coin_space(length)
        ref = uniform(space)
        element = k_marginal_element(space)
        for _ in range(3):
            phi = rng.gamma(2.0, size=length + 1)
            phi /= phi.sum()
            start = time.perf_counter()
            oracle = k_marginal_projection_closed_form(length, phi, space)
            result = newton_project(ref, Totemplex(element, oracle))
            slowest = max(slowest, time.perf_counter() - start)
            worst = max(worst, max_norm_distance(result.distribution, oracle))

    for length in (1, 3, 5):
        space = two_coin_space(length)
        ref = uniform(space)
        element = two_coin_split_element(space)
        for phi_a, eta_a, eta_b in [(0.5, 0.4, 0.6), (0.3, 0.2, 0.7), (0.7, 0.55, 0.45)]:
            start = time.perf_counter()
            oracle = two_coin_projection_closed_form(length, phi_a, eta_a, eta_b, space)
            result = newton_project(ref, Totemplex(element, oracle))
            slowest = max(slowest, time.perf_counter() - start)
            worst = max(worst, max_norm_distance(result.distribution, oracle))

    _report(
        1,
        "solver matches coin / count-spectrum / two-coin closed forms (1e-8)",
        worst < 1e-8 and slowest < 1.0,
        f"max deviation {worst:.3e}, slowest case {slowest:.3f}s",
    )


def test_criterion_02_multiplier_oracle():
    worst = 0.0
    for length in range(1, 11):
        space = coin_space(length)
        ref = uniform(space)
        element = coin_element(space)
        idx = element.labels.index("success(head)")
        for eta in np.arange(0.1, 0.95, 0.1):
            oracle = binomial_projection_closed_form(length, float(eta), space)
            result = newton_project(ref, Totemplex(element, oracle))
            expected = length * math.log(eta / (1.0 - eta))
            worst = max(worst, abs(result.multipliers[idx] - expected))
    _report(
        2,
        "success-rate multiplier equals L log(eta/(1-eta)) (1e-8)",
        worst < 1e-8,
        f"max deviation {worst:.3e}",
    )


def test_criterion_03_pythagorean_identity():
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(50):
        space = random_space(rng, max_attrs=3, max_levels=4)  # |E*| <= 64
        rank = int(rng.integers(2, min(8, space.n_admissible) + 1))
        element = random_element(rng, space, rank)
        empirical = random_distribution(rng, space)
        ref = random_distribution(rng, space)
        q = newton_project(ref, Totemplex(element, empirical)).distribution
        for _ in range(100):
            p = random_feasible_point(rng, q, element)
            gap = i_divergence(p, ref) - i_divergence(q, ref) - i_divergence(p, q)
            worst = max(worst, abs(gap))
    _report(
        3,
        "Pythagorean identity on 50 random families x 100 feasible points (1e-8)",
        worst < 1e-8,
        f"max gap {worst:.3e}",
    )


def test_criterion_04_chain_rule():
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(50):
        space = random_space(rng, max_attrs=3, max_levels=4)
        while space.n_admissible < 6:
            space = random_space(rng, max_attrs=3, max_levels=4)
        fine_rank = int(rng.integers(3, min(7, space.n_admissible) + 1))
        coarse_rank = int(rng.integers(2, fine_rank))
        coarse, fine = random_nested_pair(rng, space, coarse_rank, fine_rank)
        empirical = random_distribution(rng, space)
        ref = random_distribution(rng, space)
        stages = [Totemplex(coarse, empirical), Totemplex(fine, empirical)]
        chained = chained_project(ref, stages)
        direct = newton_project(ref, Totemplex(fine, empirical))
        worst = max(
            worst, max_norm_distance(chained.distribution, direct.distribution)
        )
    _report(
        4,
        "chained and direct projections agree on 50 random nested pairs (1e-8)",
        worst < 1e-8,
        f"max deviation {worst:.3e}",
    )


def test_criterion_05_solver_cross_checks():
    rng = np.random.default_rng(505)
    worst_ipf = 0.0
    for _ in range(50):
        space = random_space(rng, max_attrs=3, max_levels=4)
        f = random_distribution(rng, space)
        ops = [
            marginal_op(space, d.name, level)
            for d in space.domains
            for level in d.levels
        ]
        rows = np.array([op.eigenvalues for op in ops])
        targets = rows @ f.admissible
        ref = uniform(space)
        via_ipf = ipf_project(ref, rows, targets, variant="proportional")
        element = make_element(ops, mode="auto-reduce")
        via_newton = newton_project(ref, Totemplex(element, f))
        worst_ipf = max(
            worst_ipf, max_norm_distance(via_ipf.distribution, via_newton.distribution)
        )

    worst_affine = 0.0
    for _ in range(50):
        space = random_space(rng, max_attrs=3, max_levels=4)
        rank = int(rng.integers(2, min(6, space.n_admissible) + 1))
        element = random_element(rng, space, rank)
        empirical = random_distribution(rng, space)
        ref = random_distribution(rng, space)
        direct = newton_project(ref, Totemplex(element, empirical))
        mix = np.eye(rank) + 0.3 * rng.standard_normal((rank, rank))
        ops = [
            CharacteristicOperator(space, row, f"t{i}")
            for i, row in enumerate(mix @ element.matrix)
        ]
        remixed = make_element(ops, mode="auto-reduce")
        if remixed.rank != rank:  # measure-zero; count as its own draw
            continue
        redone = newton_project(ref, Totemplex(remixed, empirical))
        worst_affine = max(
            worst_affine, max_norm_distance(direct.distribution, redone.distribution)
        )
    _report(
        5,
        "IPF/Newton and reparametrized solves agree on 50 random problems (1e-8)",
        worst_ipf < 1e-8 and worst_affine < 1e-8,
        f"ipf {worst_ipf:.3e}, affine {worst_affine:.3e}",
    )


def test_criterion_06_null_calibration():
    start = time.perf_counter()
    length, n, reps = 3, 2000, 2000
    generator = binomial_projection_closed_form(length, 0.5)
    space = generator.space
    result = calibration_experiment(
        generator,
        coin_element(space),
        k_marginal_element(space),
        n,
        reps,
        seed=606,
    )
    elapsed = time.perf_counter() - start
    rejection = result.rejection_rate(0.05)
    ok = (
        result.dof == 2
        and 0.035 <= rejection <= 0.065
        and result.ks_distance < 0.05
        and elapsed < 120.0
    )
    _report(
        6,
        "fair-coin null calibration: rejection in [0.035, 0.065], KS < 0.05",
        ok,
        f"rejection {rejection:.4f}, KS {result.ks_distance:.4f}, {elapsed:.1f}s",
    )


def test_criterion_07_two_coin_power():
    length, n, reps = 5, 10_000, 200
    generator = two_coin_projection_closed_form(length, 0.5, 0.4, 0.6)
    space = generator.space
    result = calibration_experiment(
        generator,
        two_coin_pooled_element(space),
        two_coin_split_element(space),
        n,
        reps,
        seed=707,
    )
    rejection = result.rejection_rate(0.05)
    _report(
        7,
        "two-coin power at N=10^4: rejection rate >= 0.99",
        rejection >= 0.99,
        f"rejection {rejection:.4f}",
    )


def test_criterion_08_sensitivity_threshold():
    length, eta, kappa = 4, 0.5, 0.02
    n_star = length * (length - 1) * eta**2 * (1 - eta) ** 2 / (2 * kappa**2)
    generator = ising_coin_generator(length, eta, kappa)
    space = generator.space
    outer = coin_element(space)
    inner = k_marginal_element(space)
    rates = {}
    for scale, n in (("low", int(0.1 * n_star)), ("high", int(10 * n_star))):
        result = calibration_experiment(
            generator, outer, inner, n, 300, seed=808
        )
        rates[scale] = result.rejection_rate(0.05)
    ok = rates["low"] < 0.5 < rates["high"]
    _report(
        8,
        "coupled-coin rejection crosses 0.5 between 0.1 and 10 times N*",
        ok,
        f"N*={n_star:.0f}, low {rates['low']:.3f}, high {rates['high']:.3f}",
    )


def test_criterion_09_score_bic_correspondence():
    rng = np.random.default_rng(909)
    agreements = 0
    for _ in range(20):
        space = random_space(rng, max_attrs=3, max_levels=3)
        while space.n_admissible < 6:  # room for three distinct non-saturated ranks
            space = random_space(rng, max_attrs=3, max_levels=3)
        f = random_distribution(rng, space)  # strictly positive: no sampling zeros
        n = 600
        ref = uniform(space)
        elements = [random_element(rng, space, r) for r in (2, 3, 4)]
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
        if int(np.argmax(scores)) == int(np.argmin(bics)):
            agreements += 1
    _report(
        9,
        "score argmax equals independent BIC argmin on 20 problems",
        agreements == 20,
        f"{agreements}/20 agreed",
    )


def test_criterion_10_mle_efficiency():
    length, n, reps, eta = 3, 10_000, 100, 0.7
    space = coin_space(length)
    generator = binomial_projection_closed_form(length, eta, space)
    ref = uniform(space)
    identity_only = make_element([identity_op(space)])
    mean = coin_element(space)
    spectrum = k_marginal_element(space)
    saturated = make_element(
        [
            marginal_op(space, [d.name for d in space.domains], list(e))
            for e in space.admissible_entities()
        ],
        mode="auto-reduce",
    )
    wins = 0
    for r in range(reps):
        counts = sample_multinomial(generator, n, seed=1010 + r)
        f = Distribution.from_counts(space, counts, n)
        reports = select_element(
            ref, [identity_only, mean, spectrum, saturated], f, n
        )
        if reports[0].element_fingerprint == mean.fingerprint:
            wins += 1
    _report(
        10,
        "true single-rate element wins the score ranking in >= 95% of runs",
        wins >= 95,
        f"{wins}/100 wins",
    )


def test_criterion_11_stirling_consistency():
    space = coin_space(2)
    ref = Distribution.from_admissible_weights(space, [0.4, 0.3, 0.2, 0.1])
    f = np.array([0.1, 0.2, 0.3, 0.4])
    errors = []
    for n in (10**3, 10**4, 10**5):
        counts = np.zeros(space.n_entities, dtype=np.int64)
        counts[space.admissible_indices] = (f * n).astype(np.int64)
        exact = log_multinomial(counts, ref)
        truncated = log_multinomial_leading(counts, ref)
        errors.append(abs(exact - truncated))
    ok = errors[0] > errors[1] > errors[2]
    _report(
        11,
        "exact vs truncated log-multinomial error decreases over N=1e3..1e5",
        ok,
        f"errors {[f'{e:.3e}' for e in errors]}",
    )


def test_criterion_12_logistic_oracle():
    m, n = 2, 500
    beta0, betas = -0.3, (0.9, -0.6)
    generator = logistic_model_distribution(m, beta0, betas)
    space = generator.space
    counts = sample_multinomial(generator, n, seed=1212)
    f = Distribution.from_counts(space, counts, n)
    assert np.all(f.counts[space.admissible_indices].reshape(2, -1).sum(axis=0) > 0), \
        "every predictor profile must be observed"

    element = logistic_element(m, space)
    result = newton_project(uniform(space), Totemplex(element, f))
    profiles, probs = logistic_conditionals(result.distribution)
    _, _, affine_residual = logit_affine_fit(profiles, probs)

    # independent oracle: full-batch gradient descent on the logistic loss
    design = np.array([[1.0] + [float(c) for c in p] for p in profiles])
    n1 = np.zeros(len(profiles))
    n0 = np.zeros(len(profiles))
    for i, profile in enumerate(profiles):
        n1[i] = f.counts[space.index_of(("1",) + profile)]
        n0[i] = f.counts[space.index_of(("0",) + profile)]
    coef = np.zeros(m + 1)
    for _ in range(60_000):
        z = design @ coef
        sigma = 1.0 / (1.0 + np.exp(-z))
        grad = design.T @ (sigma * (n0 + n1) - n1) / n
        coef -= 1.5 * grad
    oracle_logits = design @ coef
    projected_logits = np.log(probs) - np.log(1.0 - probs)
    max_logit_error = float(np.max(np.abs(projected_logits - oracle_logits)))
    ok = max_logit_error < 1e-4 and affine_residual < 1e-8
    _report(
        12,
        "projection conditionals match gradient-descent logistic fit (1e-4)",
        ok,
        f"max logit error {max_logit_error:.3e}, affine residual {affine_residual:.3e}",
    )
