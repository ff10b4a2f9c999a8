"""Characteristic operators, constructing elements and their linear algebra.

A characteristic operator is diagonal in the entity basis: one real
eigenvalue per admissible entity.  An ordered, linearly independent
collection of operators (a constructing element) pins down a family of
distributions through its expectations; two elements with the same row
space describe the same family and are *equivalent for all practical
purposes* (FAPP).  Rank, reduced row-echelon form, kernels and nesting
checks below are what classification and projection build on.

Operators and elements are immutable; every function here is pure and
safe to call concurrently.
"""

from __future__ import annotations

import hashlib
from math import fsum

import numpy as np

from .errors import OperatorError, SpaceError

__all__ = [
    "PIVOT_TOL",
    "CharacteristicOperator",
    "ConstructingElement",
    "Totemplex",
    "identity_op",
    "projector_op",
    "marginal_op",
    "moment_op",
    "success_op",
    "k_marginal_op",
    "product_op",
    "make_element",
    "kernel_basis",
    "fapp_equivalent",
    "is_nested",
    "rref",
    "row_rank",
    "operator_from_spec",
]

#: Relative pivot threshold for rank / RREF / independence decisions.
#: Eigenvalue matrices mix 0/1 indicators with real moments of very
#: different scales, so the threshold is relative to the largest entry.
PIVOT_TOL = 1e-9


class CharacteristicOperator:
    """Diagonal operator: one finite eigenvalue per admissible entity."""

    __slots__ = ("space", "eigenvalues", "label")

    def __init__(self, space, eigenvalues, label=""):
        eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
        if eigenvalues.shape != (space.n_admissible,):
            raise OperatorError(
                f"expected {space.n_admissible} eigenvalues, got {eigenvalues.shape}"
            )
        if not np.all(np.isfinite(eigenvalues)):
            raise OperatorError(f"operator {label!r} has non-finite eigenvalues")
        eigenvalues.setflags(write=False)
        self.space = space
        self.eigenvalues = eigenvalues
        self.label = str(label)

    def expectation(self, dist):
        """Expectation of the operator under a distribution."""
        if not self.space.same_space(dist.space):
            raise SpaceError("operator and distribution live on different spaces")
        return fsum((dist.admissible * self.eigenvalues).tolist())

    def __mul__(self, other):
        if isinstance(other, CharacteristicOperator):
            return product_op(self, other)
        return NotImplemented

    def __repr__(self):
        return f"CharacteristicOperator({self.label!r})"


# --- builders ------------------------------------------------------------

def identity_op(space):
    """Eigenvalue one on every admissible entity (normalization row)."""
    return CharacteristicOperator(space, np.ones(space.n_admissible), "identity")


def projector_op(space, entity):
    """Indicator of a single admissible entity."""
    eig = np.zeros(space.n_admissible)
    compact = space.compact_index(entity)
    if compact < 0:
        raise OperatorError(f"entity {tuple(entity)!r} is not admissible")
    eig[compact] = 1.0
    return CharacteristicOperator(space, eig, f"projector({','.join(entity)})")


def marginal_op(space, attributes, levels):
    """Indicator of entities matching ``levels`` on the named attributes.

    ``attributes`` may be a single name or a sequence of names, with
    ``levels`` shaped accordingly.
    """
    if isinstance(attributes, str):
        attributes = (attributes,)
        levels = (levels,)
    attributes = tuple(attributes)
    levels = tuple(str(level) for level in levels)
    if len(attributes) != len(levels):
        raise OperatorError("one level required per named attribute")
    eig = np.ones(space.n_admissible)
    for name, level in zip(attributes, levels):
        domain = space.attribute(name)
        pos = domain.position(level)
        eig *= (space.level_codes(name) == pos).astype(np.float64)
    spec = ",".join(f"{a}={l}" for a, l in zip(attributes, levels))
    return CharacteristicOperator(space, eig, f"marginal({spec})")


def moment_op(space, attribute, n):
    """``n``-th power of the numeric level of ``attribute`` per entity."""
    if n < 1 or int(n) != n:
        raise OperatorError(f"moment order must be a positive integer, got {n}")
    domain = space.attribute(attribute)
    if not domain.is_numeric:
        raise OperatorError(
            f"attribute {attribute!r} has non-numeric levels; moments are undefined"
        )
    values = np.asarray(domain.numeric_values)[space.level_codes(attribute)]
    return CharacteristicOperator(space, values ** int(n), f"moment({attribute},{int(n)})")


def _trial_attributes(space, success, attributes):
    if attributes is None:
        attributes = [d.name for d in space.domains if success in d]
        if not attributes:
            raise OperatorError(f"no attribute carries the level {success!r}")
    else:
        attributes = list(attributes)
    for name in attributes:
        domain = space.attribute(name)
        if domain.size != 2:
            raise OperatorError(
                f"attribute {name!r} is not binary; success counting is undefined"
            )
        if success not in domain:
            raise OperatorError(f"attribute {name!r} has no level {success!r}")
    return attributes


def success_op(space, success, attributes=None):
    """Fraction of trial attributes set to the ``success`` level.

    By default every binary attribute whose domain contains ``success``
    counts as a trial; pass ``attributes`` to restrict (e.g. when the
    space carries an extra grouping attribute).
    """
    attributes = _trial_attributes(space, success, attributes)
    count = np.zeros(space.n_admissible)
    for name in attributes:
        pos = space.attribute(name).position(success)
        count += (space.level_codes(name) == pos).astype(np.float64)
    return CharacteristicOperator(space, count / len(attributes), f"success({success})")


def k_marginal_op(space, k, success, attributes=None):
    """Indicator of entities with exactly ``k`` trials at the success level.

    Summed over ``k = 0..L`` these operators resolve the identity.
    """
    attributes = _trial_attributes(space, success, attributes)
    length = len(attributes)
    if not 0 <= k <= length:
        raise OperatorError(f"k={k} outside [0, {length}]")
    count = np.zeros(space.n_admissible)
    for name in attributes:
        pos = space.attribute(name).position(success)
        count += (space.level_codes(name) == pos).astype(np.float64)
    eig = (np.rint(count).astype(np.int64) == int(k)).astype(np.float64)
    return CharacteristicOperator(space, eig, f"k_marginal({int(k)},{success})")


def product_op(a, b):
    """Elementwise eigenvalue product (diagonal operators commute)."""
    if not a.space.same_space(b.space):
        raise SpaceError("operators live on different spaces")
    return CharacteristicOperator(
        a.space, a.eigenvalues * b.eigenvalues, f"product({a.label},{b.label})"
    )


# --- dense linear algebra -------------------------------------------------

def _scale(matrix):
    m = float(np.max(np.abs(matrix), initial=0.0))
    return m if m > 0.0 else 1.0


def rref(matrix, tol=PIVOT_TOL):
    """Canonical reduced row-echelon form.

    Columns are processed left to right with partial row pivoting; a
    column whose remaining entries all fall below ``tol * max|entry|`` is
    skipped.  Returns ``(R, pivot_columns)`` where ``R`` keeps only the
    nonzero rows, so equal row spaces give identical output.
    """
    r = np.array(matrix, dtype=np.float64, copy=True)
    if r.ndim != 2:
        raise OperatorError("rref expects a 2-d matrix")
    n_rows, n_cols = r.shape
    thresh = tol * _scale(r)
    pivots = []
    row = 0
    for col in range(n_cols):
        if row == n_rows:
            break
        sub = np.abs(r[row:, col])
        best = int(np.argmax(sub)) + row
        if abs(r[best, col]) <= thresh:
            continue
        if best != row:
            r[[row, best]] = r[[best, row]]
        r[row] /= r[row, col]
        factors = r[:, col].copy()
        factors[row] = 0.0
        r -= np.outer(factors, r[row])
        pivots.append(col)
        row += 1
    return r[: len(pivots)], pivots


def row_rank(matrix, tol=PIVOT_TOL):
    """Rank via the pivot count of :func:`rref`."""
    return len(rref(matrix, tol)[1])


def _orthonormal_rows(matrix, tol=PIVOT_TOL):
    """Orthonormal basis of the row space by modified Gram-Schmidt.

    Re-orthogonalizes once per vector; acceptance uses the same relative
    max-entry threshold as the pivoting.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    thresh = tol * _scale(matrix)
    basis = []
    kept = []
    for i, row in enumerate(matrix):
        v = row.astype(np.float64, copy=True)
        for _ in range(2):
            for b in basis:
                v -= (b @ v) * b
        if np.max(np.abs(v), initial=0.0) > thresh:
            basis.append(v / np.linalg.norm(v))
            kept.append(i)
    return basis, kept


def _residual_against(basis, vector):
    v = np.array(vector, dtype=np.float64, copy=True)
    for _ in range(2):
        for b in basis:
            v -= (b @ v) * b
    return v


def _spans(basis, vector, tol, scale):
    return np.max(np.abs(_residual_against(basis, vector)), initial=0.0) <= tol * scale


# --- constructing elements -------------------------------------------------

class ConstructingElement:
    """Ordered, linearly independent operators over a shared space.

    The eigenvalue matrix (operators by admissible entities) has full row
    rank, and the all-ones row lies in its row space: normalization is
    always part of the description.  Build through :func:`make_element`.
    """

    __slots__ = ("space", "operators", "matrix", "_fingerprint")

    def __init__(self, space, operators, matrix):
        self.space = space
        self.operators = tuple(operators)
        matrix = np.asarray(matrix, dtype=np.float64)
        matrix.setflags(write=False)
        self.matrix = matrix
        h = hashlib.sha256()
        h.update(space.fingerprint.encode())
        h.update(matrix.tobytes())
        self._fingerprint = h.hexdigest()

    @property
    def rank(self):
        return len(self.operators)

    @property
    def labels(self):
        return tuple(op.label for op in self.operators)

    @property
    def fingerprint(self):
        return self._fingerprint

    @property
    def kernel_dim(self):
        return self.space.n_admissible - self.rank

    def expectations(self, dist):
        """Vector of operator expectations under ``dist``."""
        if not self.space.same_space(dist.space):
            raise SpaceError("element and distribution live on different spaces")
        return np.array([fsum((row * dist.admissible).tolist()) for row in self.matrix])

    def __repr__(self):
        return f"ConstructingElement(D={self.rank}, ops={list(self.labels)})"


def make_element(operators, mode="strict", tol=PIVOT_TOL):
    """Assemble a constructing element from characteristic operators.

    ``mode="strict"`` demands the given operators be linearly independent
    (and imply normalization) as stated.  ``mode="auto-reduce"`` keeps the
    earliest linearly independent operators, drops the rest, and appends
    the identity operator when the all-ones row is missing from the row
    space.
    """
    operators = list(operators)
    if not operators:
        raise OperatorError("an element needs at least one operator")
    space = operators[0].space
    for op in operators:
        if not space.same_space(op.space):
            raise SpaceError("operators live on different spaces")
        if not np.any(op.eigenvalues):
            raise OperatorError(f"zero operator {op.label!r} cannot enter an element")
    matrix = np.vstack([op.eigenvalues for op in operators])
    scale = _scale(matrix)
    basis, kept = _orthonormal_rows(matrix, tol)

    if mode == "strict":
        if len(kept) != len(operators):
            dropped = [operators[i].label for i in range(len(operators)) if i not in kept]
            raise OperatorError(
                f"operators {dropped} are linearly dependent on earlier ones "
                "(use mode='auto-reduce' to drop them)"
            )
        if not _spans(basis, np.ones(space.n_admissible), tol, max(scale, 1.0)):
            raise OperatorError(
                "the identity row is not in the element's row space; "
                "normalization must be implied (add the identity operator)"
            )
        return ConstructingElement(space, operators, matrix)

    if mode != "auto-reduce":
        raise OperatorError(f"mode must be 'strict' or 'auto-reduce', got {mode!r}")
    reduced = [operators[i] for i in kept]
    if not _spans(basis, np.ones(space.n_admissible), tol, max(scale, 1.0)):
        reduced.append(identity_op(space))
    return ConstructingElement(space, reduced, np.vstack([op.eigenvalues for op in reduced]))


def kernel_basis(element, tol=PIVOT_TOL):
    """Orthonormal operators spanning the orthogonal complement of the rows.

    Returns ``|E*| - D`` operators, each orthogonal (plain dot product on
    eigenvalue vectors) to every operator of the element and to each
    other.  Deterministic: canonical basis vectors are orthogonalized in
    enumeration order by modified Gram-Schmidt with re-orthogonalization.
    """
    n = element.space.n_admissible
    want = n - element.rank
    if want == 0:
        return []
    row_basis, _ = _orthonormal_rows(element.matrix, tol)
    basis = []
    out = []
    for j in range(n):
        if len(out) == want:
            break
        v = np.zeros(n)
        v[j] = 1.0
        for _ in range(2):
            for b in row_basis:
                v -= (b @ v) * b
            for b in basis:
                v -= (b @ v) * b
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            v /= norm
            basis.append(v)
            out.append(CharacteristicOperator(element.space, v, f"kernel{len(out)}"))
    if len(out) != want:  # cannot happen for a full-row-rank element
        raise OperatorError("kernel completion failed; element matrix is ill-conditioned")
    return out


def fapp_equivalent(a, b, tol=PIVOT_TOL):
    """True iff two elements have the same row space (identical RREF)."""
    if not a.space.same_space(b.space):
        raise SpaceError("elements live on different spaces")
    ra, pa = rref(a.matrix, tol)
    rb, pb = rref(b.matrix, tol)
    if pa != pb:
        return False
    scale = max(_scale(ra), _scale(rb))
    return bool(np.max(np.abs(ra - rb), initial=0.0) <= tol * scale)


def is_nested(outer, inner, tol=PIVOT_TOL):
    """True iff every operator of ``outer`` lies in ``inner``'s row space.

    The coarser (outer) description is then implied by the finer (inner)
    one, and the inner feasible family sits inside the outer family.
    """
    if not outer.space.same_space(inner.space):
        raise SpaceError("elements live on different spaces")
    basis, _ = _orthonormal_rows(inner.matrix, tol)
    scale = max(_scale(outer.matrix), _scale(inner.matrix))
    return all(_spans(basis, row, tol, scale) for row in outer.matrix)


class Totemplex:
    """A constructing element plus the target expectations it must match.

    Targets are the exact expectations of the element under a stored
    empirical distribution, so the constrained family is never empty (the
    empirical distribution itself belongs to it).
    """

    __slots__ = ("element", "targets", "empirical", "_fingerprint")

    def __init__(self, element, empirical):
        if not element.space.same_space(empirical.space):
            raise SpaceError("element and empirical distribution live on different spaces")
        self.element = element
        self.empirical = empirical
        targets = element.expectations(empirical)
        targets.setflags(write=False)
        self.targets = targets
        h = hashlib.sha256()
        h.update(element.fingerprint.encode())
        h.update(targets.tobytes())
        self._fingerprint = h.hexdigest()

    @property
    def space(self):
        return self.element.space

    @property
    def fingerprint(self):
        return self._fingerprint

    def __repr__(self):
        return f"Totemplex(D={self.element.rank}, targets={self.targets!r})"


# --- operator spec grammar --------------------------------------------------
#
# identity
# marginal(attr=level, ...)
# moment(attr, n)
# success(level)
# k_marginal(k, level)
# product(spec, spec)

def _split_args(text):
    args, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise OperatorError(f"unbalanced parentheses in {text!r}")
        elif ch == "," and depth == 0:
            args.append(text[start:i].strip())
            start = i + 1
    if depth != 0:
        raise OperatorError(f"unbalanced parentheses in {text!r}")
    tail = text[start:].strip()
    if tail or not args:
        args.append(tail)
    return args


def operator_from_spec(space, spec):
    """Parse one operator declaration (see module grammar) into an operator."""
    spec = spec.strip()
    if spec == "identity":
        return identity_op(space)
    if "(" not in spec or not spec.endswith(")"):
        raise OperatorError(f"cannot parse operator spec {spec!r}")
    head, body = spec.split("(", 1)
    head = head.strip()
    body = body[:-1]
    args = _split_args(body)
    if head == "marginal":
        attrs, levels = [], []
        for arg in args:
            if "=" not in arg:
                raise OperatorError(f"marginal expects attr=level pairs, got {arg!r}")
            attr, level = arg.split("=", 1)
            attrs.append(attr.strip())
            levels.append(level.strip())
        return marginal_op(space, attrs, levels)
    if head == "moment":
        if len(args) != 2:
            raise OperatorError(f"moment expects (attr, n), got {spec!r}")
        try:
            order = int(args[1])
        except ValueError:
            raise OperatorError(f"moment order {args[1]!r} is not an integer") from None
        return moment_op(space, args[0], order)
    if head == "success":
        if len(args) < 1 or not args[0]:
            raise OperatorError("success expects a level")
        attrs = args[1:] or None
        return success_op(space, args[0], attrs)
    if head == "k_marginal":
        if len(args) != 2:
            raise OperatorError(
                f"k_marginal expects (k, level) - the success level is not "
                f"inferable from k alone; got {spec!r}"
            )
        try:
            k = int(args[0])
        except ValueError:
            raise OperatorError(f"k_marginal count {args[0]!r} is not an integer") from None
        return k_marginal_op(space, k, args[1])
    if head == "product":
        if len(args) != 2:
            raise OperatorError(f"product expects two operator specs, got {spec!r}")
        return product_op(operator_from_spec(space, args[0]), operator_from_spec(space, args[1]))
    raise OperatorError(f"unknown operator kind {head!r}")
