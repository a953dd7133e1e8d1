"""Reference domains, partitions, profiling and the activation-ordered context store.

A reference domain stands for an entity or a set of entities that can be
referred to.  It carries a type, a cardinality, properties, and zero or more
partitions.  A partition decomposes the domain into members that are mutually
distinguishable by the value of a differentiation criterion (type, a property,
the predicate applied to them, spatial position, or a role within a group).
Within one partition at most one cell is profiled, i.e. marked as the most
prominent member; the profiled member is what pronouns and demonstratives
pick up.

The ContextModel is the per-dialogue store of domains, ordered by activation
(most recently used first).  Generic domains (open-ended conceptual classes)
live outside the activation order and are never mutated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

UNBOUNDED = math.inf

DomainId = str


class DomainError(ValueError):
    """Violation of a context-model precondition (bad id, index, or value)."""


class Source(Enum):
    DISCOURSE = "discourse"
    PERCEPTION = "perception"
    CONCEPTUAL = "conceptual"


class CriterionKind(Enum):
    TYPE = "type"
    PROPERTY = "property"
    PREDICATE = "predicate"
    POSITION = "position"
    GROUP_ROLE = "group-role"


@dataclass(frozen=True)
class DifferentiationCriterion:
    """Point of view under which the members of a partition are distinguished.

    ``detail`` holds the property name (PROPERTY), the axis or relation name
    (POSITION) or the verb lemma (PREDICATE).  ``polarity`` is used by
    PREDICATE criteria only: True for a positive predication.
    """

    kind: CriterionKind
    detail: str | None = None
    polarity: bool | None = None

    @classmethod
    def by_type(cls) -> "DifferentiationCriterion":
        return cls(CriterionKind.TYPE)

    @classmethod
    def by_property(cls, name: str) -> "DifferentiationCriterion":
        return cls(CriterionKind.PROPERTY, name)

    @classmethod
    def by_predicate(cls, lemma: str, polarity: bool = True) -> "DifferentiationCriterion":
        return cls(CriterionKind.PREDICATE, lemma, polarity)

    @classmethod
    def by_position(cls, axis: str) -> "DifferentiationCriterion":
        return cls(CriterionKind.POSITION, axis)

    @classmethod
    def by_group_role(cls) -> "DifferentiationCriterion":
        return cls(CriterionKind.GROUP_ROLE)

    def describe(self) -> str:
        if self.kind is CriterionKind.PREDICATE:
            sign = "+" if self.polarity else "-"
            return f"predicate:{self.detail}{sign}"
        if self.detail is not None:
            return f"{self.kind.value}:{self.detail}"
        return self.kind.value


@dataclass
class Cell:
    value: str
    member: DomainId


@dataclass
class Partition:
    criterion: DifferentiationCriterion
    cells: list[Cell]
    profiled: int | None = None
    stamp: int = 0

    def values(self) -> list[str]:
        return [c.value for c in self.cells]

    def profiled_member(self) -> DomainId | None:
        if self.profiled is None:
            return None
        return self.cells[self.profiled].member


@dataclass
class ReferenceDomain:
    """Attribute-value representation of an entity or set of entities."""

    id: DomainId
    type: str
    cardinality: float
    properties: dict[str, str] = field(default_factory=dict)
    partitions: list[Partition] = field(default_factory=list)
    source: Source = Source.DISCOURSE
    generic: bool = False
    residue: bool = False
    agreement: dict[str, str] = field(default_factory=dict)

    def member_ids(self) -> list[DomainId]:
        seen: list[DomainId] = []
        for part in self.partitions:
            for cell in part.cells:
                if cell.member not in seen:
                    seen.append(cell.member)
        return seen


def cardinality_text(card: float) -> str:
    return "unbounded" if card == UNBOUNDED else str(int(card))


def _initials(type_symbol: str, properties: dict[str, str]) -> str:
    letters = [str(v)[:1] for v in properties.values()] + [type_symbol[:1]]
    tag = "".join(ch for ch in letters if ch.isalpha())
    return tag or "d"


class ContextModel:
    """Activation-ordered store of reference domains for one dialogue session.

    The activation list is always a permutation of the non-generic ids in the
    store; generic domains are stored but excluded from traversal and never
    mutated.  Single writer per session: no internal locking.
    """

    def __init__(self, kb=None):
        self.kb = kb
        self.store: dict[DomainId, ReferenceDomain] = {}
        self.activation: list[DomainId] = []
        self._clock = 0

    # -- id management -------------------------------------------------

    def mint_id(self, tag: str, *, numbered: bool = True) -> DomainId:
        tag = "".join(ch for ch in tag if ch.isalnum()) or "d"
        if not numbered and "@" + tag not in self.store:
            return "@" + tag
        n = 1
        while f"@{tag}{n}" in self.store:
            n += 1
        return f"@{tag}{n}"

    def instance_id(self, type_symbol: str, properties: dict[str, str]) -> DomainId:
        return self.mint_id(_initials(type_symbol, properties).lower())

    def set_id(self, type_symbol: str, properties: dict[str, str]) -> DomainId:
        return self.mint_id(_initials(type_symbol, properties).upper())

    # -- basic access ----------------------------------------------------

    def get(self, domain_id: DomainId) -> ReferenceDomain:
        try:
            return self.store[domain_id]
        except KeyError:
            raise DomainError(f"unknown domain id {domain_id!r}") from None

    def __contains__(self, domain_id: DomainId) -> bool:
        return domain_id in self.store

    def tick(self) -> int:
        self._clock += 1
        return self._clock

    # -- operations ------------------------------------------------------

    def new_domain(
        self,
        type_symbol: str,
        cardinality: float,
        properties: dict[str, str] | None = None,
        source: Source = Source.DISCOURSE,
        *,
        generic: bool = False,
        residue: bool = False,
        agreement: dict[str, str] | None = None,
        id_: DomainId | None = None,
    ) -> DomainId:
        """Create and store a partitionless domain; non-generic ids go to the
        head of the activation list."""
        if self.kb is not None and not self.kb.has_type(type_symbol):
            raise DomainError(f"unknown type symbol {type_symbol!r}")
        if generic and cardinality != UNBOUNDED:
            raise DomainError("generic domains must have unbounded cardinality")
        if cardinality != UNBOUNDED and (cardinality <= 0 or int(cardinality) != cardinality):
            raise DomainError(f"cardinality must be a positive integer, got {cardinality!r}")
        props = dict(properties or {})
        did = id_ if id_ is not None else self.instance_id(type_symbol, props)
        if did in self.store:
            raise DomainError(f"duplicate domain id {did!r}")
        self.store[did] = ReferenceDomain(
            id=did,
            type=type_symbol,
            cardinality=cardinality,
            properties=props,
            source=source,
            generic=generic,
            residue=residue,
            agreement=dict(agreement or {}),
        )
        if not generic:
            self.activation.insert(0, did)
        return did

    def adopt(self, domain: ReferenceDomain) -> DomainId:
        """Store an externally built domain (e.g. a generic one) unchanged."""
        if domain.id in self.store:
            raise DomainError(f"duplicate domain id {domain.id!r}")
        self.store[domain.id] = domain
        if not domain.generic:
            self.activation.insert(0, domain.id)
        return domain.id

    def add_partition(
        self,
        domain_id: DomainId,
        criterion: DifferentiationCriterion,
        cells: list[tuple[str, DomainId]],
    ) -> int:
        """Append an unprofiled partition; cell values must be pairwise
        distinct and every member id must resolve in the store."""
        domain = self.get(domain_id)
        values = [v for v, _ in cells]
        if len(set(values)) != len(values):
            raise DomainError(f"duplicate criterion value in partition of {domain_id}: {values!r}")
        for _, member in cells:
            if member not in self.store:
                raise DomainError(f"dangling member id {member!r} in partition of {domain_id}")
        # group-role partitions decompose an individual into its parts, so the
        # cell count is not bounded by the cardinality of the domain itself
        if (
            criterion.kind is not CriterionKind.GROUP_ROLE
            and domain.cardinality != UNBOUNDED
            and len(cells) > domain.cardinality
        ):
            raise DomainError(
                f"partition of {domain_id} has {len(cells)} cells but cardinality "
                f"{cardinality_text(domain.cardinality)}"
            )
        part = Partition(criterion=criterion, cells=[Cell(v, m) for v, m in cells], stamp=self.tick())
        domain.partitions.append(part)
        return len(domain.partitions) - 1

    def add_cell(self, domain_id: DomainId, partition_index: int, value: str, member: DomainId) -> int:
        """Insert one cell into an existing partition, keeping values distinct."""
        domain = self.get(domain_id)
        part = self._partition(domain, partition_index)
        if member not in self.store:
            raise DomainError(f"dangling member id {member!r}")
        if domain.cardinality != UNBOUNDED and len(part.cells) + 1 > domain.cardinality:
            raise DomainError(f"partition of {domain_id} is full")
        base, n = value, 1
        while value in part.values():
            n += 1
            value = f"{base}#{n}"
        part.cells.append(Cell(value, member))
        part.stamp = self.tick()
        return len(part.cells) - 1

    def profile(self, domain_id: DomainId, partition_index: int, cell_index: int) -> None:
        """Profile one cell; any previously profiled cell of the partition is
        implicitly cleared (at most one profiled cell per partition)."""
        domain = self.get(domain_id)
        part = self._partition(domain, partition_index)
        if not 0 <= cell_index < len(part.cells):
            raise DomainError(f"cell index {cell_index} out of range for {domain_id}")
        part.profiled = cell_index
        part.stamp = self.tick()

    def clear_profile(self, domain_id: DomainId, partition_index: int) -> None:
        domain = self.get(domain_id)
        part = self._partition(domain, partition_index)
        part.profiled = None
        part.stamp = self.tick()

    def focused_element(self, domain_id: DomainId) -> DomainId | None:
        """Profiled member of the most recently updated partition, if any."""
        domain = self.get(domain_id)
        best: Partition | None = None
        for part in domain.partitions:
            if part.profiled is not None and (best is None or part.stamp > best.stamp):
                best = part
        return best.profiled_member() if best else None

    def touch(self, domain_id: DomainId) -> None:
        """Move a non-generic domain to the head of the activation list."""
        domain = self.get(domain_id)
        if domain.generic:
            raise DomainError(f"generic domain {domain_id} has no activation rank")
        self.activation.remove(domain_id)
        self.activation.insert(0, domain_id)

    def _partition(self, domain: ReferenceDomain, index: int) -> Partition:
        if not 0 <= index < len(domain.partitions):
            raise DomainError(f"partition index {index} out of range for {domain.id}")
        return domain.partitions[index]

    # -- inspection helpers ----------------------------------------------

    def snapshot(self, domain_id: DomainId):
        """Structural fingerprint of a domain (ignores activation clocks)."""
        d = self.get(domain_id)
        return (
            d.type,
            d.cardinality,
            tuple(sorted(d.properties.items())),
            tuple(
                (p.criterion, tuple((c.value, c.member) for c in p.cells), p.profiled)
                for p in d.partitions
            ),
        )

    def check_invariants(self) -> None:
        """Raise AssertionError when any structural invariant is broken."""
        non_generic = [did for did, d in self.store.items() if not d.generic]
        assert sorted(self.activation) == sorted(non_generic), "activation is not a permutation of the store"
        assert len(set(self.activation)) == len(self.activation), "duplicate id in activation"
        for did, d in self.store.items():
            if d.generic:
                assert d.cardinality == UNBOUNDED, f"generic domain {did} with bounded cardinality"
            for part in d.partitions:
                values = part.values()
                assert len(set(values)) == len(values), f"duplicate criterion values in {did}"
                if d.cardinality != UNBOUNDED and part.criterion.kind is not CriterionKind.GROUP_ROLE:
                    assert len(part.cells) <= d.cardinality, f"partition of {did} larger than cardinality"
                if part.profiled is not None:
                    assert 0 <= part.profiled < len(part.cells), f"profiled index out of range in {did}"
                for cell in part.cells:
                    assert cell.member in self.store, f"dangling member {cell.member} in {did}"
