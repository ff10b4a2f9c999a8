"""Shared random-problem builders for the test suite.

Everything is driven by an explicit numpy Generator so each test pins its
own seed; builders re-draw on the measure-zero degenerate cases instead
of failing.
"""

import numpy as np

from totem import (
    AttributeDomain,
    CharacteristicOperator,
    Distribution,
    EntitySpace,
    Totemplex,
    identity_op,
    kernel_basis,
    make_element,
)


def random_space(rng, max_attrs=3, max_levels=4, entity_cap=None):
    n_attrs = int(rng.integers(1, max_attrs + 1))
    domains = [
        AttributeDomain(f"a{i}", [f"v{j}" for j in range(int(rng.integers(2, max_levels + 1)))])
        for i in range(n_attrs)
    ]
    return EntitySpace(domains)


def random_distribution(rng, space, alpha=5.0):
    """Strictly positive weights over admissible entities (Dirichlet)."""
    w = rng.gamma(alpha, size=space.n_admissible) + 1e-9
    return Distribution.from_admissible_weights(space, w / w.sum())


def random_element(rng, space, rank):
    """Element of exactly the requested rank: identity plus random rows."""
    if not 1 <= rank <= space.n_admissible:
        raise ValueError(f"rank {rank} out of range")
    while True:
        ops = [identity_op(space)]
        for i in range(rank - 1):
            row = rng.standard_normal(space.n_admissible)
            ops.append(CharacteristicOperator(space, row, f"rand{i}"))
        element = make_element(ops, mode="auto-reduce")
        if element.rank == rank:
            return element


def random_nested_pair(rng, space, coarse_rank, fine_rank):
    """(coarse, fine) with every coarse operator in the fine row space."""
    fine = random_element(rng, space, fine_rank)
    while True:
        mix = rng.standard_normal((coarse_rank - 1, fine.rank))
        rows = mix @ fine.matrix
        ops = [identity_op(space)] + [
            CharacteristicOperator(space, row, f"mix{i}") for i, row in enumerate(rows)
        ]
        coarse = make_element(ops, mode="auto-reduce")
        if coarse.rank == coarse_rank:
            return coarse, fine


def random_feasible_point(rng, projection, element):
    """Random distribution matching the same expectations as ``projection``.

    Perturbs along the element's kernel and stays strictly inside the
    nonnegative orthant, so divergences from/to it remain finite.
    """
    kernel = kernel_basis(element)
    q = projection.admissible
    if not kernel:
        return Distribution.from_admissible_weights(projection.space, q, renormalize=True)
    directions = np.vstack([op.eigenvalues for op in kernel])
    v = rng.standard_normal(len(kernel)) @ directions
    negative = v < 0
    t_max = float(np.min(q[negative] / -v[negative])) if negative.any() else 1.0
    t = rng.uniform(0.05, 0.9) * t_max
    p = np.clip(q + t * v, 0.0, None)
    return Distribution.from_admissible_weights(projection.space, p, renormalize=True)


def random_totemplex(rng, space, rank, alpha=5.0):
    element = random_element(rng, space, rank)
    empirical = random_distribution(rng, space, alpha)
    return Totemplex(element, empirical)
