"""Generic conceptual knowledge: type hierarchy, part-whole roles, lexicon.

The hierarchy is a single-inheritance forest of type symbols used for
subsumption tests.  Type nodes may declare parts (role, part type, count);
these back bridging references ("the roof" after a house has been talked
about).  The lexicon maps surface words to types, properties, determiner
classes, relations and verb lemmas, and is the only language-specific data
in the system: swapping the KB file swaps the language.

A KnowledgeBase is immutable after load and safe to share between sessions;
the generic-domain cache is populate-once per (type, properties) key.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .domains import (
    UNBOUNDED,
    ContextModel,
    CriterionKind,
    DifferentiationCriterion,
    DomainId,
    ReferenceDomain,
    Source,
    _initials,
)

DETERMINER_CLASSES = frozenset(
    {"indefinite", "definite", "demonstrative", "another", "other", "numeral"}
)


class KBError(ValueError):
    """Malformed knowledge-base file or unknown symbol."""


@dataclass(frozen=True)
class PartSpec:
    role: str
    type: str
    count: float  # positive int, or UNBOUNDED for an open count


@dataclass
class TypeNode:
    name: str
    parent: str | None = None
    parts: tuple[PartSpec, ...] = ()


@dataclass
class NounEntry:
    type: str | None  # None marks a semantically empty head ("one")
    number: str = "singular"
    gender: str | None = None


@dataclass
class DeterminerEntry:
    det_class: str
    count: int | None = None  # numerals only


@dataclass
class PrepositionEntry:
    relation: str
    prominent: str = "head"  # which side of the relation is the trajector
    attach: str = "verb"  # noun-attaching prepositions modify the preceding NP


@dataclass
class Lexicon:
    nouns: dict[str, NounEntry] = field(default_factory=dict)
    adjectives: dict[str, tuple[str, str]] = field(default_factory=dict)
    determiners: dict[str, DeterminerEntry] = field(default_factory=dict)
    pronouns: dict[str, dict[str, str]] = field(default_factory=dict)
    prepositions: dict[str, PrepositionEntry] = field(default_factory=dict)
    verbs: dict[str, str] = field(default_factory=dict)
    particles: tuple[str, ...] = ()
    negations: tuple[str, ...] = ()
    conjunctions: dict[str, str] = field(default_factory=dict)
    contractions: dict[str, list[str]] = field(default_factory=dict)

    def property_rank(self, name: str) -> int:
        """Position of a property in adjective-table order (ties broken by
        first appearance); unknown properties rank last."""
        seen: list[str] = []
        for prop, _ in self.adjectives.values():
            if prop not in seen:
                seen.append(prop)
        return seen.index(name) if name in seen else len(seen)


class KnowledgeBase:
    def __init__(self, nodes: dict[str, TypeNode], lexicon: Lexicon):
        self.nodes = nodes
        self.lexicon = lexicon
        self._generic_cache: dict[tuple[str, tuple[tuple[str, str], ...]], ReferenceDomain] = {}
        self._generic_ids: set[DomainId] = set()

    # -- hierarchy ---------------------------------------------------------

    def has_type(self, symbol: str) -> bool:
        return symbol in self.nodes

    def _require(self, symbol: str) -> TypeNode:
        try:
            return self.nodes[symbol]
        except KeyError:
            raise KBError(f"unknown type symbol {symbol!r}") from None

    def ancestors(self, symbol: str) -> list[str]:
        """symbol itself followed by its parents up to the root."""
        chain = [symbol]
        node = self._require(symbol)
        while node.parent is not None:
            chain.append(node.parent)
            node = self._require(node.parent)
        return chain

    def is_subtype(self, a: str, b: str) -> bool:
        """True iff a equals b or b is reachable from a via parent links."""
        self._require(b)
        return b in self.ancestors(a)

    def is_strict_subtype(self, a: str, b: str) -> bool:
        return a != b and self.is_subtype(a, b)

    def least_common_supertype(self, symbols: list[str]) -> str | None:
        if not symbols:
            return None
        common = [s for s in self.ancestors(symbols[0]) if all(self.is_subtype(x, s) for x in symbols[1:])]
        return common[0] if common else None

    def parts_of(self, symbol: str) -> tuple[PartSpec, ...]:
        """Declared parts of a type, inherited from ancestors; the nearest
        declaration of a role wins."""
        collected: dict[str, PartSpec] = {}
        for ancestor in self.ancestors(symbol):
            for part in self._require(ancestor).parts:
                collected.setdefault(part.role, part)
        return tuple(collected.values())

    # -- generic domains -----------------------------------------------------

    def generic_domain(self, type_symbol: str, properties: dict[str, str] | None = None) -> ReferenceDomain:
        """Memoized open-ended conceptual domain for a (type, properties) key.

        Distinct property sets denote distinct generic domains, so the class
        of big circles is not the class of circles.
        """
        self._require(type_symbol)
        props = dict(properties or {})
        key = (type_symbol, tuple(sorted(props.items())))
        cached = self._generic_cache.get(key)
        if cached is not None:
            return cached
        tag = _initials(type_symbol, props).upper()
        gid, n = "@" + tag, 1
        while gid in self._generic_ids:
            n += 1
            gid = f"@{tag}{n}"
        self._generic_ids.add(gid)
        domain = ReferenceDomain(
            id=gid,
            type=type_symbol,
            cardinality=UNBOUNDED,
            properties=props,
            source=Source.CONCEPTUAL,
            generic=True,
        )
        self._generic_cache[key] = domain
        return domain


def part_partition(kb: KnowledgeBase, context: ContextModel, whole: DomainId) -> int | None:
    """Materialize part members for a whole and partition it by group role.

    Returns the index of the role partition, or None when the whole's type
    declares no parts.  Calling it twice returns the existing partition; no
    duplicate part members are created.  Part counts above one materialize a
    single representative member whose cardinality records the plurality.
    """
    domain = context.get(whole)
    parts = kb.parts_of(domain.type)
    if not parts:
        return None
    roles = {p.role for p in parts}
    for index, existing in enumerate(domain.partitions):
        if existing.criterion.kind is CriterionKind.GROUP_ROLE and set(existing.values()) == roles:
            return index
    cells: list[tuple[str, DomainId]] = []
    for part in parts:
        member = context.new_domain(
            part.type,
            part.count,
            {},
            Source.CONCEPTUAL,
            id_=context.mint_id(part.role),
        )
        cells.append((part.role, member))
    return context.add_partition(whole, DifferentiationCriterion.by_group_role(), cells)


# -- loading -----------------------------------------------------------------


def _parse_count(raw) -> float:
    if raw in ("n", "N", "*"):
        return UNBOUNDED
    if isinstance(raw, int) and raw > 0:
        return raw
    raise KBError(f"part count must be a positive integer or 'n', got {raw!r}")


def _parse_noun(surface: str, raw) -> NounEntry:
    if isinstance(raw, str):
        return NounEntry(type=raw)
    if isinstance(raw, dict):
        return NounEntry(
            type=raw.get("type"),
            number=raw.get("number", "singular"),
            gender=raw.get("gender"),
        )
    raise KBError(f"bad noun entry for {surface!r}")


def _parse_determiner(surface: str, raw) -> DeterminerEntry:
    if isinstance(raw, str):
        cls, count = raw, None
    elif isinstance(raw, dict):
        cls, count = raw.get("class"), raw.get("count")
    else:
        raise KBError(f"bad determiner entry for {surface!r}")
    if cls not in DETERMINER_CLASSES:
        raise KBError(f"unknown determiner class {cls!r} for {surface!r}")
    if cls == "numeral" and not (isinstance(count, int) and count > 0):
        raise KBError(f"numeral {surface!r} needs a positive count")
    return DeterminerEntry(det_class=cls, count=count)


def _parse_preposition(surface: str, raw) -> PrepositionEntry:
    if not isinstance(raw, dict) or "relation" not in raw:
        raise KBError(f"bad preposition entry for {surface!r}")
    entry = PrepositionEntry(
        relation=raw["relation"],
        prominent=raw.get("prominent", "head"),
        attach=raw.get("attach", "verb"),
    )
    if entry.prominent not in ("head", "complement"):
        raise KBError(f"preposition {surface!r}: prominent must be head or complement")
    if entry.attach not in ("verb", "noun"):
        raise KBError(f"preposition {surface!r}: attach must be verb or noun")
    return entry


def load_kb(path: str | Path) -> KnowledgeBase:
    """Load and validate a KB file (type hierarchy plus lexicon)."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise KBError(f"cannot read KB file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise KBError(f"malformed KB file: {exc}") from exc

    nodes: dict[str, TypeNode] = {}
    for raw in data.get("types", []):
        name = raw.get("name")
        if not name:
            raise KBError("type entry without a name")
        if name in nodes:
            raise KBError(f"duplicate type name {name!r}")
        parts = tuple(
            PartSpec(role=p["role"], type=p["type"], count=_parse_count(p.get("count", 1)))
            for p in raw.get("parts", [])
        )
        nodes[name] = TypeNode(name=name, parent=raw.get("parent"), parts=parts)

    for node in nodes.values():
        if node.parent is not None and node.parent not in nodes:
            raise KBError(f"type {node.name!r} has unknown parent {node.parent!r}")
    for node in nodes.values():
        seen, current = {node.name}, node.parent
        while current is not None:
            if current in seen:
                raise KBError(f"cycle in type hierarchy at {current!r}")
            seen.add(current)
            current = nodes[current].parent
    for node in nodes.values():
        for part in node.parts:
            if part.type not in nodes:
                raise KBError(f"part type {part.type!r} of {node.name!r} is not declared")

    raw_lex = data.get("lexicon", {})
    lexicon = Lexicon(
        nouns={s: _parse_noun(s, v) for s, v in raw_lex.get("nouns", {}).items()},
        adjectives={s: (v[0], v[1]) for s, v in raw_lex.get("adjectives", {}).items()},
        determiners={s: _parse_determiner(s, v) for s, v in raw_lex.get("determiners", {}).items()},
        pronouns={s: dict(v) for s, v in raw_lex.get("pronouns", {}).items()},
        prepositions={s: _parse_preposition(s, v) for s, v in raw_lex.get("prepositions", {}).items()},
        verbs=dict(raw_lex.get("verbs", {})),
        particles=tuple(raw_lex.get("particles", [])),
        negations=tuple(raw_lex.get("negations", [])),
        conjunctions=dict(raw_lex.get("conjunctions", {})),
        contractions={s: list(v) for s, v in raw_lex.get("contractions", {}).items()},
    )
    for surface, noun in lexicon.nouns.items():
        if noun.type is not None and noun.type not in nodes:
            raise KBError(f"noun {surface!r} maps to unknown type {noun.type!r}")
    for surface, pieces in lexicon.contractions.items():
        if not pieces:
            raise KBError(f"contraction {surface!r} expands to nothing")

    return KnowledgeBase(nodes=nodes, lexicon=lexicon)
