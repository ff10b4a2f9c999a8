"""Worked constructions with closed-form solutions, for use as oracles.

Bernoulli-sequence spaces admit analytic projections: fixing only the
mean success rate gives product weights ``eta^l (1-eta)^(L-l)``, fixing
the full success-count spectrum gives ``phi_k / C(L,k)`` per sequence,
and the grouped two-coin variant factorizes per group.  These closed
forms back the solver tests, the sensitivity experiments (an exactly
solved pair-coupled generator) and the logistic-regression bridge, and
every builder doubles as a data generator for simulation studies.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .distribution import Distribution
from .entity import AttributeDomain, EntitySpace
from .errors import ProjectionError, SpaceError, TotemError
from .operators import (
    identity_op,
    k_marginal_op,
    make_element,
    marginal_op,
    product_op,
    success_op,
)

__all__ = [
    "CoinProblem",
    "LogisticProblem",
    "coin_space",
    "two_coin_space",
    "coin_element",
    "k_marginal_element",
    "two_coin_pooled_element",
    "two_coin_split_element",
    "binomial_projection_closed_form",
    "k_marginal_projection_closed_form",
    "two_coin_projection_closed_form",
    "binomial_test_statistic_closed_form",
    "ising_coin_generator",
    "ising_parameters",
    "logistic_space",
    "logistic_element",
    "logistic_model_distribution",
    "logistic_conditionals",
    "logit_affine_fit",
]

SUCCESS = "head"
FAILURE = "tail"


def coin_space(length):
    """Entity space of ``length`` Bernoulli trials, levels head/tail."""
    if length < 1:
        raise SpaceError(f"need at least one trial, got {length}")
    domains = [AttributeDomain(f"s{i + 1}", (SUCCESS, FAILURE)) for i in range(length)]
    return EntitySpace(domains)


def two_coin_space(length):
    """Bernoulli trials plus a leading binary group attribute (A/B)."""
    domains = [AttributeDomain("group", ("A", "B"))]
    domains += [AttributeDomain(f"s{i + 1}", (SUCCESS, FAILURE)) for i in range(length)]
    return EntitySpace(domains)


def _success_counts(space, length):
    count = np.zeros(space.n_admissible)
    for i in range(length):
        codes = space.level_codes(f"s{i + 1}")
        count += (codes == space.attribute(f"s{i + 1}").position(SUCCESS)).astype(float)
    return np.rint(count).astype(np.int64)


def coin_element(space):
    """{identity, success rate}: the single-mean description."""
    trials = [d.name for d in space.domains if d.name.startswith("s")]
    return make_element([identity_op(space), success_op(space, SUCCESS, trials)])


def k_marginal_element(space):
    """All success-count indicators; they resolve the identity."""
    trials = [d.name for d in space.domains if d.name.startswith("s")]
    ops = [k_marginal_op(space, k, SUCCESS, trials) for k in range(len(trials) + 1)]
    return make_element(ops)


def two_coin_pooled_element(space):
    """{identity, group-A prevalence, pooled success rate}."""
    trials = [d.name for d in space.domains if d.name.startswith("s")]
    return make_element(
        [
            identity_op(space),
            marginal_op(space, "group", "A"),
            success_op(space, SUCCESS, trials),
        ]
    )


def two_coin_split_element(space):
    """Group prevalences plus per-group success rates; symmetric in A/B."""
    trials = [d.name for d in space.domains if d.name.startswith("s")]
    h = success_op(space, SUCCESS, trials)
    pa = marginal_op(space, "group", "A")
    pb = marginal_op(space, "group", "B")
    return make_element([pa, pb, product_op(h, pa), product_op(h, pb)])


def _check_rate(name, value):
    if not 0.0 < value < 1.0:
        raise TotemError(f"{name} must lie strictly inside (0, 1), got {value}")


def binomial_projection_closed_form(length, eta, space=None):
    """Product weights ``eta^l (1-eta)^(L-l)`` per sequence.

    This is the projection of the uniform reference onto the family that
    matches the mean success rate ``eta``.
    """
    _check_rate("eta", eta)
    if space is None:
        space = coin_space(length)
    l = _success_counts(space, length)
    weights = eta ** l * (1.0 - eta) ** (length - l)
    return Distribution.from_admissible_weights(space, weights)


def k_marginal_projection_closed_form(length, phi, space=None):
    """Weights ``phi_l / C(L, l)`` per sequence with ``l`` successes.

    Matches the full success-count spectrum ``phi`` exactly; a zero entry
    produces a boundary distribution with an empty count shell.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (length + 1,):
        raise TotemError(f"phi must have length {length + 1}, got {phi.shape}")
    if phi.min() < 0.0 or abs(phi.sum() - 1.0) > 1e-9:
        raise TotemError("phi must be a probability vector over success counts")
    if space is None:
        space = coin_space(length)
    l = _success_counts(space, length)
    shell = np.array([comb(length, k) for k in range(length + 1)], dtype=np.float64)
    weights = phi[l] / shell[l]
    return Distribution.from_admissible_weights(space, weights, renormalize=True)


def two_coin_projection_closed_form(length, phi_a, eta_a, eta_b, space=None):
    """Group-factorized weights ``Phi_g eta_g^l (1-eta_g)^(L-l)``."""
    _check_rate("phi_a", phi_a)
    _check_rate("eta_a", eta_a)
    _check_rate("eta_b", eta_b)
    if space is None:
        space = two_coin_space(length)
    l = _success_counts(space, length)
    in_a = space.level_codes("group") == space.attribute("group").position("A")
    eta = np.where(in_a, eta_a, eta_b)
    phi = np.where(in_a, phi_a, 1.0 - phi_a)
    weights = phi * eta ** l * (1.0 - eta) ** (length - l)
    return Distribution.from_admissible_weights(space, weights)


def binomial_test_statistic_closed_form(length, phi, eta=None):
    """Divergence of the count spectrum from its best binomial fit.

    ``sum_k phi_k log[phi_k / (C(L,k) eta^k (1-eta)^(L-k))]``; multiplied
    by ``2N`` this is the nested-test statistic comparing the spectrum
    description against the single-rate description.  ``eta`` defaults to
    the spectrum's own mean rate.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (length + 1,):
        raise TotemError(f"phi must have length {length + 1}, got {phi.shape}")
    if eta is None:
        eta = float(np.arange(length + 1) @ phi) / length
    _check_rate("eta", eta)
    total = 0.0
    for k in range(length + 1):
        if phi[k] > 0.0:
            fit = comb(length, k) * eta ** k * (1.0 - eta) ** (length - k)
            total += float(phi[k] * math.log(phi[k] / fit))
    return total


# --- pair-coupled (Ising-like) generator -----------------------------------

def _ising_weights(space, length, h, j, i0, j0):
    s = np.vstack(
        [
            (space.level_codes(f"s{i + 1}") == space.attribute(f"s{i + 1}").position(SUCCESS))
            for i in range(length)
        ]
    ).astype(np.float64)
    energy = j * s[i0] * s[j0] + h * s.sum(axis=0)
    w = np.exp(energy - energy.max())
    return w / w.sum(), s


def _ising_observables(space, length, h, j, i0, j0):
    w, s = _ising_weights(space, length, h, j, i0, j0)
    mean_rate = float((w * s.mean(axis=0)).sum())
    corr = float((w * s[i0] * s[j0]).sum() - (w * s[i0]).sum() * (w * s[j0]).sum())
    return mean_rate, corr


def ising_parameters(length, eta, kappa, i0=0, j0=1, *, tol=1e-13, max_iter=100):
    """Solve field and coupling for exact mean rate and pair correlator.

    The first-order inverse formulas
    ``h ~ log(eta/(1-eta)) - 2 kappa / (L eta (1-eta)^2)`` and
    ``J ~ kappa / (eta^2 (1-eta)^2)`` seed a damped 2-d Newton solve so
    that the built distribution has mean success rate exactly ``eta`` and
    connected correlator between trials ``i0`` and ``j0`` exactly
    ``kappa``.
    """
    _check_rate("eta", eta)
    if length < 2:
        raise TotemError("pair coupling needs at least two trials")
    if i0 == j0:
        raise TotemError("coupled trials must differ")
    bound = 0.5 * eta ** 2 * (1.0 - eta) ** 2
    if abs(kappa) > bound:
        raise TotemError(
            f"|kappa|={abs(kappa)} too large for eta={eta}; the expansion "
            f"seeding the solve is only valid up to {bound}"
        )
    space = coin_space(length)
    h = math.log(eta / (1.0 - eta)) - 2.0 * kappa / (length * eta * (1.0 - eta) ** 2)
    j = kappa / (eta ** 2 * (1.0 - eta) ** 2)

    def residual(hh, jj):
        mean_rate, corr = _ising_observables(space, length, hh, jj, i0, j0)
        return np.array([mean_rate - eta, corr - kappa])

    res = residual(h, j)
    for _ in range(max_iter):
        if np.max(np.abs(res)) <= tol:
            break
        eps = 1e-6
        jac = np.column_stack(
            [
                (residual(h + eps, j) - residual(h - eps, j)) / (2 * eps),
                (residual(h, j + eps) - residual(h, j - eps)) / (2 * eps),
            ]
        )
        try:
            step = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError as exc:
            raise ProjectionError(f"coupling solve broke down: {exc}") from exc
        scale = 1.0
        best = None
        for _ in range(30):
            trial = residual(h - scale * step[0], j - scale * step[1])
            if np.max(np.abs(trial)) < np.max(np.abs(res)):
                best = (h - scale * step[0], j - scale * step[1], trial)
                break
            scale *= 0.5
        if best is None:
            raise ProjectionError("coupling solve stalled; kappa may be out of range")
        h, j, res = best
    else:
        raise ProjectionError(
            f"coupling solve did not converge (residual {np.max(np.abs(res))!r})"
        )
    return h, j


def ising_coin_generator(length, eta, kappa, i0=0, j0=1):
    """Exactly solved generator with one coupled trial pair.

    ``kappa = 0`` recovers independent trials (the plain binomial
    product); otherwise the returned distribution has global mean success
    rate ``eta`` and connected pair correlator ``kappa`` between trials
    ``i0`` and ``j0``, both exact to solver precision.
    """
    if kappa == 0.0:
        return binomial_projection_closed_form(length, eta)
    h, j = ising_parameters(length, eta, kappa, i0, j0)
    space = coin_space(length)
    w, _ = _ising_weights(space, length, h, j, i0, j0)
    return Distribution.from_admissible_weights(space, w, renormalize=True)


# --- logistic regression -----------------------------------------------------

def logistic_space(m):
    """Binary response ``y`` followed by binary predictors ``x1..xm``."""
    if m < 1:
        raise SpaceError(f"need at least one predictor, got {m}")
    domains = [AttributeDomain("y", ("0", "1"))]
    domains += [AttributeDomain(f"x{i + 1}", ("0", "1")) for i in range(m)]
    return EntitySpace(domains)


def logistic_element(m, space=None):
    """Response prevalence, joint predictor profile, response-predictor pairs.

    After reduction the rank is ``1 + m + 2^m``: on ``2^(m+1)`` entities
    that leaves ``2^m - m - 1`` kernel directions (zero for ``m = 1``,
    the saturated case).
    """
    if space is None:
        space = logistic_space(m)
    names = [f"x{i + 1}" for i in range(m)]
    ops = [identity_op(space), marginal_op(space, "y", "1")]
    for profile in itertools.product("01", repeat=m):
        ops.append(marginal_op(space, names, profile))
    for name in names:
        ops.append(marginal_op(space, ("y", name), ("1", "1")))
    return make_element(ops, mode="auto-reduce")


def logistic_model_distribution(m, beta0, betas, space=None, profile_weights=None):
    """Joint law with logistic conditionals and given predictor profile law.

    ``P(y=1 | x) = sigma(beta0 + beta . x)``; profiles default to uniform.
    Useful as a synthetic-data generator.
    """
    betas = np.asarray(betas, dtype=np.float64)
    if betas.shape != (m,):
        raise TotemError(f"betas must have length {m}, got {betas.shape}")
    if space is None:
        space = logistic_space(m)
    names = [f"x{i + 1}" for i in range(m)]
    x = np.vstack([space.level_codes(name) for name in names]).astype(np.float64)
    y = space.level_codes("y").astype(np.float64)
    logits = beta0 + betas @ x
    p1 = 1.0 / (1.0 + np.exp(-logits))
    cond = np.where(y == 1.0, p1, 1.0 - p1)
    if profile_weights is None:
        marginal = np.full(space.n_admissible, 0.5 ** m)
    else:
        profile_weights = np.asarray(profile_weights, dtype=np.float64)
        codes = np.zeros(space.n_admissible, dtype=np.int64)
        for name in names:
            codes = codes * 2 + space.level_codes(name)
        marginal = profile_weights[codes]
    return Distribution.from_admissible_weights(space, cond * marginal, renormalize=True)


def logistic_conditionals(q):
    """Per predictor profile, ``P(y=1 | profile)`` under ``q``.

    Returns ``(profiles, probabilities)``; a profile with zero mass has
    no conditional and is reported as ``nan``.
    """
    space = q.space
    names = [d.name for d in space.domains if d.name != "y"]
    m = len(names)
    profiles = list(itertools.product("01", repeat=m))
    y = space.level_codes("y")
    codes = np.zeros(space.n_admissible, dtype=np.int64)
    for name in names:
        codes = codes * 2 + space.level_codes(name)
    w = q.admissible
    probs = np.empty(len(profiles))
    for i in range(len(profiles)):
        mass = float(w[codes == i].sum())
        if mass <= 0.0:
            probs[i] = math.nan
            continue
        on = float(w[(codes == i) & (y == 1)].sum())
        probs[i] = on / mass
    return profiles, probs


def logit_affine_fit(profiles, probs):
    """Least-squares affine fit of the conditional log-odds.

    Returns ``(beta0, betas, max_residual)``; a residual at rounding scale
    certifies that the conditionals have exact logistic form.
    """
    mask = ~np.isnan(probs)
    if not mask.any():
        raise TotemError("no defined conditionals to fit")
    design = np.array([[1.0] + [float(c) for c in p] for p, keep in
                       zip(profiles, mask) if keep])
    z = np.log(probs[mask]) - np.log(1.0 - probs[mask])
    coef, *_ = np.linalg.lstsq(design, z, rcond=None)
    residual = float(np.max(np.abs(design @ coef - z)))
    return float(coef[0]), coef[1:], residual


# --- problem descriptions -----------------------------------------------------

@dataclass(frozen=True)
class CoinProblem:
    """Bernoulli-trials study: one coin, two grouped coins, or a coupled pair."""

    length: int
    eta: float = 0.5
    eta_a: float = None
    eta_b: float = None
    phi_a: float = None
    kappa: float = 0.0
    i0: int = 0
    j0: int = 1

    def __post_init__(self):
        if self.length < 1:
            raise TotemError(f"need at least one trial, got {self.length}")
        _check_rate("eta", self.eta)
        if self.grouped:
            if None in (self.eta_a, self.eta_b, self.phi_a):
                raise TotemError("grouped problems need eta_a, eta_b and phi_a")
            _check_rate("eta_a", self.eta_a)
            _check_rate("eta_b", self.eta_b)
            _check_rate("phi_a", self.phi_a)

    @property
    def grouped(self):
        return any(v is not None for v in (self.eta_a, self.eta_b, self.phi_a))

    def space(self):
        return two_coin_space(self.length) if self.grouped else coin_space(self.length)

    def generator(self):
        """Distribution the study samples from."""
        if self.grouped:
            return two_coin_projection_closed_form(
                self.length, self.phi_a, self.eta_a, self.eta_b
            )
        if self.kappa:
            return ising_coin_generator(self.length, self.eta, self.kappa, self.i0, self.j0)
        return binomial_projection_closed_form(self.length, self.eta)


@dataclass(frozen=True)
class LogisticProblem:
    """Binary response on ``m`` binary predictors."""

    m: int
    beta0: float = 0.0
    betas: tuple = ()

    def __post_init__(self):
        if self.m < 1:
            raise TotemError(f"need at least one predictor, got {self.m}")
        if self.betas and len(self.betas) != self.m:
            raise TotemError(f"expected {self.m} coefficients, got {len(self.betas)}")

    def space(self):
        return logistic_space(self.m)

    def element(self):
        return logistic_element(self.m)

    def generator(self):
        betas = self.betas or tuple(0.0 for _ in range(self.m))
        return logistic_model_distribution(self.m, self.beta0, betas)
