"""Distributions over entity spaces and their information metrics.

A :class:`Distribution` is an immutable nonnegative weight vector over the
full entity enumeration, normalized to one.  Reference distributions may
put weight on inadmissible entities (prior knowledge is declared on the
full space); distributions built from data or produced by projections are
zero there by construction.

All metrics sum over admissible entities only and accumulate with
compensated summation (`math.fsum`), so they stay exact at the 1e-12
scale even for large spaces.  Incompatible pairs (``p > 0`` where
``q == 0``) yield ``math.inf``; callers are expected to test with
``math.isinf`` before feeding results into further arithmetic.
"""

from __future__ import annotations

import json
import math
import warnings
from math import fsum, lgamma

import numpy as np

from .errors import DataError, SpaceError, TotemError

__all__ = [
    "Distribution",
    "RegularizationWarning",
    "uniform",
    "cross_entropy",
    "entropy",
    "i_divergence",
    "log_multinomial",
    "log_multinomial_leading",
    "regularize",
    "max_norm_distance",
    "distributions_equal",
    "save_distribution",
    "load_distribution",
    "distribution_to_dict",
    "distribution_from_dict",
]

#: Two distributions closer than this in max norm count as equal.
EQUALITY_TOL = 1e-10

_NORMALIZATION_TOL = 1e-12


class RegularizationWarning(UserWarning):
    """Pseudocount regularization distorts downstream test statistics."""


class Distribution:
    """Immutable probability weights over the entities of a space.

    Parameters
    ----------
    space : EntitySpace
    weights : array_like
        One nonnegative weight per entity of the full enumeration,
        summing to one within 1e-12.
    counts, n_samples : optional
        Present when the distribution came from data; frequencies are then
        the exact ratios ``counts / n_samples``.
    """

    __slots__ = ("space", "weights", "counts", "n_samples", "_admissible")

    def __init__(self, space, weights, counts=None, n_samples=None):
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (space.n_entities,):
            raise SpaceError(
                f"weight vector has shape {weights.shape}, expected ({space.n_entities},)"
            )
        if not np.all(np.isfinite(weights)):
            raise TotemError("distribution weights must be finite")
        if weights.min(initial=0.0) < -1e-12:
            raise TotemError(f"negative weight {weights.min()} in distribution")
        weights = np.where(weights < 0.0, 0.0, weights)
        total = fsum(weights.tolist())
        if abs(total - 1.0) > _NORMALIZATION_TOL:
            raise TotemError(f"weights sum to {total!r}, not 1 within {_NORMALIZATION_TOL}")
        weights.setflags(write=False)
        self.space = space
        self.weights = weights
        self.counts = None
        self.n_samples = None
        if counts is not None:
            counts = np.asarray(counts, dtype=np.int64)
            counts.setflags(write=False)
            self.counts = counts
            self.n_samples = int(counts.sum()) if n_samples is None else int(n_samples)
        adm = weights[space.admissible_indices]
        adm.setflags(write=False)
        self._admissible = adm

    @classmethod
    def from_weights(cls, space, weights, renormalize=False):
        weights = np.asarray(weights, dtype=np.float64)
        if renormalize:
            total = fsum(weights.tolist())
            if total <= 0:
                raise TotemError("cannot normalize an all-zero weight vector")
            weights = weights / total
        return cls(space, weights)

    @classmethod
    def from_admissible_weights(cls, space, weights, renormalize=False):
        """Scatter compact per-admissible weights into the full enumeration."""
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (space.n_admissible,):
            raise SpaceError(
                f"expected {space.n_admissible} admissible weights, got {weights.shape}"
            )
        full = np.zeros(space.n_entities)
        full[space.admissible_indices] = weights
        return cls.from_weights(space, full, renormalize=renormalize)

    @classmethod
    def from_counts(cls, space, counts, n_samples=None):
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (space.n_entities,):
            raise SpaceError(
                f"count vector has shape {counts.shape}, expected ({space.n_entities},)"
            )
        if counts.min(initial=0) < 0:
            raise DataError("negative count")
        n = int(counts.sum()) if n_samples is None else int(n_samples)
        if n <= 0:
            raise DataError("sample size must be positive")
        if int(counts.sum()) != n:
            raise DataError(f"counts sum to {int(counts.sum())}, expected N={n}")
        return cls(space, counts / n, counts=counts, n_samples=n)

    @classmethod
    def point_mass(cls, space, entity):
        weights = np.zeros(space.n_entities)
        weights[space.index_of(entity)] = 1.0
        return cls(space, weights)

    @property
    def admissible(self):
        """Weights restricted to admissible entities, in enumeration order."""
        return self._admissible

    def weight_of(self, entity):
        return float(self.weights[self.space.index_of(entity)])

    def restricted_to_admissible(self):
        """Drop inadmissible mass and renormalize over admissible entities."""
        total = fsum(self._admissible.tolist())
        if total <= 0:
            raise TotemError("no admissible mass to renormalize")
        return Distribution.from_admissible_weights(self.space, self._admissible / total)

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.space.same_space(other.space) and distributions_equal(self, other)

    def __repr__(self):
        return f"Distribution(space={self.space!r}, support={int(np.count_nonzero(self.weights))})"


def uniform(space, support="admissible"):
    """Equal weight on every supported entity.

    ``support="full"`` spreads mass over the whole enumeration (the
    maximally agnostic reference, which may sit on declared nullentities);
    ``support="admissible"`` spreads it over admissible entities only.
    """
    if support in ("admissible", "E*"):
        w = np.full(space.n_admissible, 1.0 / space.n_admissible)
        return Distribution.from_admissible_weights(space, w)
    if support in ("full", "E"):
        return Distribution(space, np.full(space.n_entities, 1.0 / space.n_entities))
    raise SpaceError(f"support must be 'full' or 'admissible', got {support!r}")


def _check_same_space(p, q):
    if not p.space.same_space(q.space):
        raise SpaceError("distributions live on different entity spaces")


def cross_entropy(p, q):
    """Negative expectation under ``p`` of ``log q`` over admissible entities.

    Returns ``math.inf`` when ``p`` puts weight where ``q`` has none.
    """
    _check_same_space(p, q)
    pw, qw = p.admissible, q.admissible
    mask = pw > 0.0
    if np.any(qw[mask] <= 0.0):
        return math.inf
    terms = -pw[mask] * np.log(qw[mask])
    return fsum(terms.tolist())


def entropy(p):
    """Shannon entropy over admissible entities (0 log 0 = 0)."""
    pw = p.admissible
    mask = pw > 0.0
    terms = -pw[mask] * np.log(pw[mask])
    return max(fsum(terms.tolist()), 0.0)


def i_divergence(p, q):
    """Information divergence ``sum p log(p/q)`` over admissible entities.

    Nonnegative; zero iff the distributions coincide. ``math.inf`` when
    ``p`` puts weight where ``q`` has none.
    """
    _check_same_space(p, q)
    pw, qw = p.admissible, q.admissible
    mask = pw > 0.0
    if np.any(qw[mask] <= 0.0):
        return math.inf
    terms = pw[mask] * (np.log(pw[mask]) - np.log(qw[mask]))
    return max(fsum(terms.tolist()), 0.0)


def _counts_over_full(space, counts):
    counts = np.asarray(counts, dtype=np.int64)
    if counts.shape == (space.n_admissible,):
        full = np.zeros(space.n_entities, dtype=np.int64)
        full[space.admissible_indices] = counts
        return full
    if counts.shape == (space.n_entities,):
        return counts
    raise SpaceError(
        f"count vector has shape {counts.shape}, expected ({space.n_entities},) "
        f"or ({space.n_admissible},)"
    )


def log_multinomial(counts, reference, n=None):
    """Exact log-probability of a count vector under multinomial sampling.

    ``log N! + sum_e [c_e log v_e - log c_e!]`` with the reference ``v``;
    computed through log-gamma.  Counts on reference-zero entities give
    ``-inf``.
    """
    counts = _counts_over_full(reference.space, counts)
    if counts.min(initial=0) < 0:
        raise DataError("negative count")
    total = int(counts.sum())
    if n is not None and total != int(n):
        raise DataError(f"counts sum to {total}, expected N={n}")
    if total <= 0:
        raise DataError("empty count vector")
    w = reference.weights
    mask = counts > 0
    if np.any(w[mask] <= 0.0):
        return -math.inf
    c = counts[mask].astype(np.float64)
    terms = c * np.log(w[mask]) - np.array([lgamma(x + 1.0) for x in c])
    return lgamma(total + 1.0) + fsum(terms.tolist())


def log_multinomial_leading(counts, reference):
    """Truncated large-sample form of :func:`log_multinomial`.

    ``-N D(f||v) - (k-1)/2 log(2 pi N) + k/2 * l(u; f)`` with
    ``k = |E*|``, ``f = counts/N`` and ``u`` uniform over admissible
    entities.  The dropped remainder is O(1/N).  Requires every admissible
    count positive (otherwise the ``l(u; f)`` term diverges and -inf is
    returned).
    """
    space = reference.space
    counts = _counts_over_full(space, counts)
    n = int(counts.sum())
    if n <= 0:
        raise DataError("empty count vector")
    f = Distribution.from_counts(space, counts, n)
    k = space.n_admissible
    fa = f.admissible
    if np.any(fa <= 0.0):
        return -math.inf
    div = i_divergence(f, reference)
    if math.isinf(div):
        return -math.inf
    ell_uniform = -fsum((np.log(fa) / k).tolist())
    return -n * div - 0.5 * (k - 1) * math.log(2.0 * math.pi * n) + 0.5 * k * ell_uniform


def regularize(f, lam, n=None):
    """Pseudocount-regularized copy of ``f`` over admissible entities.

    ``f_e -> (f_e + lam/N) / (1 + |E*| lam/N)``.  Emits
    :class:`RegularizationWarning`: any ``lam > 0`` modifies the data and
    with it every downstream significance statement.
    """
    if lam < 0:
        raise TotemError(f"regularization strength must be nonnegative, got {lam}")
    if n is None:
        n = f.n_samples
    if n is None:
        raise TotemError("sample size N required (distribution carries no counts)")
    if lam > 0:
        warnings.warn(
            "pseudocount regularization modifies the empirical frequencies and "
            "distorts scores and test statistics",
            RegularizationWarning,
            stacklevel=2,
        )
    k = f.space.n_admissible
    adm = (f.admissible + lam / n) / (1.0 + k * lam / n)
    return Distribution.from_admissible_weights(f.space, adm, renormalize=True)


def max_norm_distance(p, q):
    """Largest absolute weight difference over the full enumeration."""
    _check_same_space(p, q)
    return float(np.max(np.abs(p.weights - q.weights)))


def distributions_equal(p, q, tol=EQUALITY_TOL):
    return max_norm_distance(p, q) < tol


# --- serialization -------------------------------------------------------

def distribution_to_dict(dist):
    """JSON-ready document: space declaration, fingerprint, entity weights."""
    space = dist.space
    entries = [
        [list(space.entity_at(int(i))), float(dist.weights[i])]
        for i in space.admissible_indices
    ]
    for i in np.flatnonzero(~space.admissible_mask):
        if dist.weights[i] > 0.0:
            entries.append([list(space.entity_at(int(i))), float(dist.weights[i])])
    doc = {
        "format": "totem-distribution",
        "space": {
            "domains": [
                {"name": d.name, "levels": list(d.levels)} for d in space.domains
            ],
            "nullentities": [list(e) for e in space.nullentities],
        },
        "space_fingerprint": space.fingerprint,
        "weights": entries,
    }
    if dist.counts is not None:
        doc["n_samples"] = dist.n_samples
    return doc


def distribution_from_dict(doc, space=None):
    """Rebuild a distribution; verifies the fingerprint against ``space``."""
    from .entity import AttributeDomain, EntitySpace  # deferred: avoids cycle

    if doc.get("format") != "totem-distribution":
        raise DataError("not a serialized distribution document")
    if space is None:
        domains = [
            AttributeDomain(d["name"], d["levels"]) for d in doc["space"]["domains"]
        ]
        space = EntitySpace(domains, doc["space"].get("nullentities", ()))
    if space.fingerprint != doc["space_fingerprint"]:
        raise DataError(
            "space fingerprint mismatch: the document was written for a "
            "different entity space"
        )
    weights = np.zeros(space.n_entities)
    for entity, value in doc["weights"]:
        weights[space.index_of(tuple(entity))] = float(value)
    return Distribution(space, weights)


def save_distribution(dist, path):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(distribution_to_dict(dist), handle, indent=1, sort_keys=True)
        handle.write("\n")


def load_distribution(path, space=None):
    with open(path, "r", encoding="utf-8") as handle:
        return distribution_from_dict(json.load(handle), space=space)
