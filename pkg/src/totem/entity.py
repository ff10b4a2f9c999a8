"""Attribute domains, entity spaces and tabular ingestion.

An entity is one fully specified configuration of all attributes.  The
entity space is the Cartesian product of the attribute domains, enumerated
row-major in declaration order so that layouts are reproducible across
runs.  Entities that are impossible a priori (structural zeros) or that a
study deliberately excludes are declared as *nullentities* and tracked
through an admissibility mask; everything downstream works on the
admissible subset.

All types here are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import csv
import hashlib
import math

import numpy as np

from .distribution import Distribution
from .errors import DataError, SpaceError

__all__ = [
    "AttributeDomain",
    "EntitySpace",
    "DataTable",
    "build_entity_space",
    "empirical_distribution",
    "ingest_csv",
]

#: Refuse to enumerate spaces larger than this unless explicitly overridden.
DEFAULT_ENTITY_CAP = 1 << 20


def _numeric_value(label):
    """Return the value of ``label`` as a decimal literal, or None.

    Only a full decimal literal counts: surrounding whitespace, ``nan`` and
    ``inf`` all disqualify the level from numeric treatment.
    """
    if label != label.strip():
        return None
    try:
        value = float(label)
    except ValueError:
        return None
    if math.isnan(value) or math.isinf(value):
        return None
    return value


class AttributeDomain:
    """An attribute with a fixed, ordered set of distinct level labels.

    The level ordering given at construction is preserved verbatim; it
    fixes the entity enumeration.  When every label is a decimal literal
    the domain carries parsed numeric values so moment operators can act
    on it.
    """

    __slots__ = ("name", "levels", "numeric_values", "_positions")

    def __init__(self, name, levels):
        name = str(name)
        if not name:
            raise SpaceError("attribute name must be nonempty")
        levels = tuple(str(level) for level in levels)
        if not levels:
            raise SpaceError(f"attribute {name!r} declares no levels")
        if len(set(levels)) != len(levels):
            raise SpaceError(f"attribute {name!r} has duplicate levels")
        self.name = name
        self.levels = levels
        self._positions = {label: i for i, label in enumerate(levels)}
        values = [_numeric_value(label) for label in levels]
        if all(v is not None for v in values):
            self.numeric_values = tuple(values)
        else:
            self.numeric_values = None

    @property
    def size(self):
        return len(self.levels)

    @property
    def is_numeric(self):
        return self.numeric_values is not None

    def position(self, label):
        """Index of ``label`` within the domain; SpaceError if unknown."""
        try:
            return self._positions[label]
        except KeyError:
            raise SpaceError(
                f"level {label!r} is not in the domain of attribute {self.name!r}"
            ) from None

    def __contains__(self, label):
        return label in self._positions

    def __eq__(self, other):
        return (
            isinstance(other, AttributeDomain)
            and self.name == other.name
            and self.levels == other.levels
        )

    def __hash__(self):
        return hash((self.name, self.levels))

    def __repr__(self):
        return f"AttributeDomain({self.name!r}, {list(self.levels)!r})"


class EntitySpace:
    """Cartesian product of attribute domains with an admissibility mask.

    Entities are enumerated row-major over the domains in declaration
    order: the last attribute varies fastest.  Declared nullentities are
    flagged inadmissible; the ``i``-th admissible entity (in enumeration
    order) occupies compact slot ``i`` in operator eigenvalue vectors.
    """

    __slots__ = (
        "domains",
        "nullentities",
        "shape",
        "n_entities",
        "admissible_mask",
        "admissible_indices",
        "n_admissible",
        "_axis_of",
        "_compact",
        "_fingerprint",
    )

    def __init__(self, domains, nullentities=(), entity_cap=DEFAULT_ENTITY_CAP):
        domains = tuple(domains)
        if not domains:
            raise SpaceError("an entity space needs at least one attribute")
        names = [d.name for d in domains]
        if len(set(names)) != len(names):
            raise SpaceError(f"duplicate attribute names in {names}")
        self.domains = domains
        self.shape = tuple(d.size for d in domains)
        n = 1
        for s in self.shape:
            n *= s
        if entity_cap is not None and n > entity_cap:
            raise SpaceError(
                f"entity space has {n} entities, above the cap {entity_cap}; "
                "pass entity_cap=None to override"
            )
        self.n_entities = n
        self._axis_of = {d.name: i for i, d in enumerate(domains)}

        mask = np.ones(n, dtype=bool)
        canonical = []
        for entity in nullentities:
            idx = self.index_of(entity)
            mask[idx] = False
            canonical.append(tuple(str(level) for level in entity))
        if not mask.any():
            raise SpaceError("all entities are declared null; nothing is admissible")
        mask.setflags(write=False)
        self.nullentities = tuple(sorted(set(canonical)))
        self.admissible_mask = mask
        self.admissible_indices = np.flatnonzero(mask)
        self.admissible_indices.setflags(write=False)
        self.n_admissible = int(mask.sum())
        compact = np.full(n, -1, dtype=np.int64)
        compact[self.admissible_indices] = np.arange(self.n_admissible)
        compact.setflags(write=False)
        self._compact = compact

        h = hashlib.sha256()
        for d in domains:
            h.update(d.name.encode())
            h.update(b"\x00")
            for level in d.levels:
                h.update(level.encode())
                h.update(b"\x01")
            h.update(b"\x02")
        for entity in self.nullentities:
            h.update("\x01".join(entity).encode())
            h.update(b"\x03")
        self._fingerprint = h.hexdigest()

    @property
    def fingerprint(self):
        """Hash of the domain declaration; used for compatibility checks."""
        return self._fingerprint

    @property
    def attribute_names(self):
        return tuple(d.name for d in self.domains)

    def axis(self, name):
        """Position of attribute ``name`` in the declaration order."""
        try:
            return self._axis_of[name]
        except KeyError:
            raise SpaceError(f"unknown attribute {name!r}") from None

    def attribute(self, name):
        return self.domains[self.axis(name)]

    def index_of(self, entity):
        """Row-major enumeration index of an entity tuple."""
        entity = tuple(entity)
        if len(entity) != len(self.domains):
            raise SpaceError(
                f"entity {entity!r} has {len(entity)} components, "
                f"expected {len(self.domains)}"
            )
        idx = 0
        for domain, label in zip(self.domains, entity):
            idx = idx * domain.size + domain.position(str(label))
        return idx

    def entity_at(self, index):
        """Entity tuple at enumeration index ``index``."""
        if not 0 <= index < self.n_entities:
            raise SpaceError(f"entity index {index} out of range")
        labels = []
        for size, domain in zip(reversed(self.shape), reversed(self.domains)):
            index, pos = divmod(index, size)
            labels.append(domain.levels[pos])
        return tuple(reversed(labels))

    def compact_index(self, entity):
        """Position of an admissible entity among admissible ones, else -1."""
        return int(self._compact[self.index_of(entity)])

    def is_admissible(self, entity):
        return bool(self.admissible_mask[self.index_of(entity)])

    def entities(self):
        """Iterate all entity tuples in enumeration order."""
        return (self.entity_at(i) for i in range(self.n_entities))

    def admissible_entities(self):
        """Iterate admissible entity tuples in enumeration order."""
        return (self.entity_at(int(i)) for i in self.admissible_indices)

    def level_codes(self, name):
        """Per-admissible-entity level position of attribute ``name``."""
        axis = self.axis(name)
        sizes_after = 1
        for s in self.shape[axis + 1 :]:
            sizes_after *= s
        codes = (self.admissible_indices // sizes_after) % self.shape[axis]
        return codes.astype(np.int64)

    def same_space(self, other):
        return self is other or self.fingerprint == other.fingerprint

    def __eq__(self, other):
        return isinstance(other, EntitySpace) and self.same_space(other)

    def __hash__(self):
        return hash(self._fingerprint)

    def __repr__(self):
        return (
            f"EntitySpace({len(self.domains)} attributes, |E|={self.n_entities}, "
            f"|E*|={self.n_admissible})"
        )


def build_entity_space(domains, nullentities=(), entity_cap=DEFAULT_ENTITY_CAP):
    """Build an :class:`EntitySpace` from domains and declared nullentities."""
    return EntitySpace(domains, nullentities, entity_cap=entity_cap)


class DataTable:
    """N records over named columns; cells are level labels (strings)."""

    __slots__ = ("column_names", "rows", "domains")

    def __init__(self, column_names, rows, domains=None):
        self.column_names = tuple(str(c) for c in column_names)
        width = len(self.column_names)
        if len(set(self.column_names)) != width:
            raise DataError(f"duplicate column names in {self.column_names}")
        out = []
        for i, row in enumerate(rows):
            row = tuple(str(cell) for cell in row)
            if len(row) != width:
                raise DataError(f"row {i} has {len(row)} cells, expected {width}")
            out.append(row)
        if not out:
            raise DataError("data table has no rows")
        self.rows = tuple(out)
        self.domains = tuple(domains) if domains is not None else None

    @property
    def n(self):
        return len(self.rows)

    def column(self, name):
        try:
            j = self.column_names.index(name)
        except ValueError:
            raise DataError(f"no column named {name!r}") from None
        return [row[j] for row in self.rows]

    def __repr__(self):
        return f"DataTable({self.n} rows x {len(self.column_names)} columns)"


def ingest_csv(path, schema="infer"):
    """Read a CSV file (UTF-8, header row) into a :class:`DataTable`.

    With ``schema="infer"`` each column's domain becomes the sorted set of
    observed values.  With an explicit list of :class:`AttributeDomain`,
    every column named by the schema must be present and every cell must
    belong to the matching domain.  Empty cells are rejected.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            table = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except (csv.Error, UnicodeDecodeError) as exc:
        raise DataError(f"unparseable CSV file {path}: {exc}") from exc
    if not table:
        raise DataError(f"{path}: empty file, expected a header row")
    header, *rows = table
    header = [h.strip() for h in header]
    if not rows:
        raise DataError(f"{path}: no data rows after the header")
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 1} has {len(row)} cells, expected {len(header)}")
        for name, cell in zip(header, row):
            if cell == "":
                raise DataError(f"{path}: empty cell in column {name!r}, row {i + 1}")

    if schema == "infer":
        domains = tuple(
            AttributeDomain(name, sorted({row[j] for row in rows}))
            for j, name in enumerate(header)
        )
        return DataTable(header, rows, domains=domains)

    domains = {d.name: d for d in schema}
    missing = [name for name in domains if name not in header]
    if missing:
        raise DataError(f"{path}: missing column(s) {missing}")
    extra = [name for name in header if name not in domains]
    if extra:
        raise DataError(f"{path}: column(s) {extra} not covered by the schema")
    for j, name in enumerate(header):
        domain = domains[name]
        for i, row in enumerate(rows):
            if row[j] not in domain:
                raise DataError(
                    f"{path}: value {row[j]!r} in column {name!r}, row {i + 1} "
                    f"is outside the declared domain {list(domain.levels)}"
                )
    return DataTable(header, rows, domains=tuple(domains[name] for name in header))


def empirical_distribution(space, data):
    """Count table records into relative frequencies over the full space.

    Every record must be an admissible entity: a positive count on a
    declared nullentity is a contradiction between the data and the space
    declaration and raises :class:`DataError`.  Entities absent from the
    data get frequency zero.  Counts and the sample size are kept on the
    returned distribution, so frequencies stay exact ratios.
    """
    names = data.column_names
    if set(names) != set(space.attribute_names):
        raise DataError(
            f"data columns {list(names)} do not match space attributes "
            f"{list(space.attribute_names)}"
        )
    column_of = {name: j for j, name in enumerate(names)}

    codes = np.empty((len(space.domains), data.n), dtype=np.int64)
    for axis, domain in enumerate(space.domains):
        j = column_of[domain.name]
        positions = domain._positions
        try:
            codes[axis] = [positions[row[j]] for row in data.rows]
        except KeyError:
            for i, row in enumerate(data.rows):
                if row[j] not in positions:
                    raise DataError(
                        f"row {i}: value {row[j]!r} is not a level of "
                        f"attribute {domain.name!r}"
                    ) from None
            raise
    flat = np.ravel_multi_index(codes, space.shape)
    counts = np.bincount(flat, minlength=space.n_entities).astype(np.int64)

    violations = counts[~space.admissible_mask]
    if violations.any():
        bad = np.flatnonzero(~space.admissible_mask)[violations > 0][0]
        raise DataError(
            f"declared nullentity {space.entity_at(int(bad))!r} observed "
            f"{int(counts[bad])} time(s) in the data"
        )
    return Distribution.from_counts(space, counts)
