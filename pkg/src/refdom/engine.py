"""Resolution of referring expressions against a context of reference domains.

Every expression is interpreted the same way, whatever its determiner:

1.  build — compile the expression into an underspecified domain, a pattern
    of constraints (type, cardinality, partition shape, focus) derived from
    its determiner class and descriptive content;
2.  select — walk the contextual domains in activation order and keep the
    first one compatible with the pattern, falling back to accommodation
    (perceptual grouping, then part-whole bridging for definites, a generic
    clone for indefinites) when none passes;
3.  unify — bind the pattern's requirements to the partition and cell of the
    selected domain that satisfy them;
4.  restructure — extract and profile the referent, updating the domain in a
    determiner-specific way (indefinites mint a member under a new
    predicate partition, definites re-profile an identifiable cell,
    pronouns change nothing, demonstratives re-type the focused member
    into a fresh domain).

The moves that make several expressions land in one domain rather than on
isolated antecedents are the grouping operations: prepositions, coordination
and shared predicates build complex domains over the referents just
resolved.  Creating a group transfers prominence to the group itself, so
the members' old profiles elsewhere are cleared; a coordination group is
born unfocused, which is what makes a following pronoun or demonstrative
fail with a focus violation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .domains import (
    UNBOUNDED,
    ContextModel,
    CriterionKind,
    DifferentiationCriterion,
    DomainId,
    ReferenceDomain,
    Source,
    cardinality_text,
)
from .kb import KnowledgeBase, part_partition
from .parser import DetClass, RefExpr, Utterance, parse_text
from .scene import GroupingParams, Scene, load_scene, perceptual_group


class Verdict(Enum):
    OK = "OK"
    SUBOPTIMAL = "SUBOPTIMAL"
    FAIL = "FAIL"


class PartitionReq(Enum):
    NONE = "none"
    VIRTUAL = "virtual"
    EXISTING = "existing"


class GroupTrigger(Enum):
    PREPOSITION = "preposition"
    COORDINATION = "coordination"
    ENUMERATION = "enumeration"
    SAME_PREDICATE = "same-predicate"


_STAGES = ("type", "cardinality", "partition", "focus", "exclude-profiled")
_STAGE_INDEX = {name: i for i, name in enumerate(_STAGES)}


@dataclass(frozen=True)
class CriterionPattern:
    """Preferred differentiation criterion for an existing-partition
    requirement; predicate patterns match any predicate criterion."""

    kind: CriterionKind
    prop: str | None = None

    def matches(self, criterion: DifferentiationCriterion) -> bool:
        if criterion.kind is not self.kind:
            return False
        if self.kind is CriterionKind.PROPERTY:
            return criterion.detail == self.prop
        return True

    def describe(self) -> str:
        return f"{self.kind.value}:{self.prop}" if self.prop else self.kind.value


@dataclass
class UnderspecifiedDomain:
    """Constraint pattern compiled from a referring expression."""

    det: DetClass
    type_symbol: str | None = None
    properties: dict[str, str] = field(default_factory=dict)
    cardinality_min: float = 1
    partition: PartitionReq = PartitionReq.NONE
    pattern: CriterionPattern | None = None
    focus_required: bool = False
    exclude_profiled: bool = False
    reclassify_as: str | None = None
    plural: bool = False
    agreement: dict[str, str] = field(default_factory=dict)

    def summary(self) -> dict:
        partition = self.partition.value
        if self.partition is PartitionReq.EXISTING:
            partition = f"existing({self.pattern.describe() if self.pattern else 'any'})"
        return {
            "type": self.type_symbol,
            "properties": dict(self.properties),
            "min_cardinality": cardinality_text(self.cardinality_min),
            "partition": partition,
            "focus": self.focus_required,
            "exclude_profiled": self.exclude_profiled,
            "reclassify_as": self.reclassify_as,
            "plural": self.plural,
        }


@dataclass(frozen=True)
class Binding:
    partition_index: int | None = None
    cell_index: int | None = None


@dataclass
class Compat:
    ok: bool
    reason: str | None = None
    stage: int = -1
    binding: Binding | None = None

    def outcome(self) -> str:
        return "pass" if self.ok else f"fail({self.reason})"


@dataclass
class Selection:
    domain_id: DomainId | None
    binding: Binding | None
    candidates: list[tuple[DomainId, str]]
    accommodation: str | None = None
    fail_reason: str | None = None


@dataclass
class Resolution:
    """Outcome and trace of resolving one referring expression."""

    utterance_index: int
    arg_index: int
    surface: str
    det: str
    expr: RefExpr
    usd: dict
    candidates: list[tuple[DomainId, str]]
    accommodation: str | None
    domain: DomainId | None
    referent: DomainId | None
    verdict: Verdict | None
    fresh: bool = False
    fail_reason: str | None = None
    restructure: str | None = None
    activation_head: DomainId | None = None
    passing: list[DomainId] | None = None  # ambiguity-report mode only


# ---------------------------------------------------------------------------
# build


def build_underspecified(expr: RefExpr, kb: KnowledgeBase) -> UnderspecifiedDomain:
    """Compile a referring expression into its constraint pattern."""
    mods = dict(expr.modifiers)
    plural = expr.number == "plural"

    def first_modifier_property() -> str:
        return min(mods, key=lambda name: (kb.lexicon.property_rank(name), list(mods).index(name)))

    if expr.det in (DetClass.INDEFINITE, DetClass.NUMERAL):
        minimum = expr.cardinality if expr.cardinality else (2 if plural else 1)
        return UnderspecifiedDomain(
            det=expr.det,
            type_symbol=expr.head_type,
            properties=mods,
            cardinality_min=minimum,
            partition=PartitionReq.VIRTUAL,
            plural=plural,
            agreement=dict(expr.agreement),
        )
    if expr.det is DetClass.INDEFINITE_ANOTHER:
        return UnderspecifiedDomain(
            det=expr.det,
            type_symbol=expr.head_type,
            properties=mods,
            partition=PartitionReq.EXISTING,
            pattern=CriterionPattern(CriterionKind.PREDICATE),
            exclude_profiled=True,
            agreement=dict(expr.agreement),
        )
    if expr.det in (DetClass.DEFINITE, DetClass.DEFINITE_OTHER):
        exclude = expr.det is DetClass.DEFINITE_OTHER
        if expr.is_one:
            pattern = CriterionPattern(CriterionKind.PROPERTY, first_modifier_property()) if mods else None
            return UnderspecifiedDomain(
                det=expr.det,
                type_symbol=None,
                properties=mods,
                partition=PartitionReq.EXISTING,
                pattern=pattern,
                exclude_profiled=exclude,
                agreement=dict(expr.agreement),
            )
        if plural:
            return UnderspecifiedDomain(
                det=expr.det,
                type_symbol=expr.head_type,
                properties=mods,
                cardinality_min=expr.cardinality or 2,
                partition=PartitionReq.EXISTING,
                exclude_profiled=exclude,
                plural=True,
                agreement=dict(expr.agreement),
            )
        pattern = (
            CriterionPattern(CriterionKind.PROPERTY, first_modifier_property())
            if mods
            else CriterionPattern(CriterionKind.TYPE)
        )
        return UnderspecifiedDomain(
            det=expr.det,
            type_symbol=expr.head_type,
            properties=mods,
            partition=PartitionReq.EXISTING,
            pattern=pattern,
            exclude_profiled=exclude,
            agreement=dict(expr.agreement),
        )
    if expr.det is DetClass.PRONOUN:
        return UnderspecifiedDomain(
            det=expr.det,
            partition=PartitionReq.EXISTING,
            focus_required=True,
            agreement=dict(expr.agreement),
        )
    if expr.det is DetClass.DEMONSTRATIVE:
        return UnderspecifiedDomain(
            det=expr.det,
            partition=PartitionReq.EXISTING,
            focus_required=True,
            reclassify_as=expr.head_type,
            agreement=dict(expr.agreement),
        )
    raise ValueError(f"unhandled determiner class {expr.det!r}")


# ---------------------------------------------------------------------------
# compatibility


def _cell_satisfies(
    context: ContextModel,
    kb: KnowledgeBase,
    partition,
    cell,
    type_symbol: str | None,
    properties: dict[str, str],
    *,
    allow_residue: bool,
) -> bool:
    member = context.store.get(cell.member)
    if member is None:
        return False
    if member.residue and not allow_residue:
        return False
    if type_symbol is not None and not kb.is_subtype(member.type, type_symbol):
        return False
    for name, wanted in properties.items():
        if member.properties.get(name) == wanted:
            continue
        # the cell's own criterion value may carry the distinguishing property
        if (
            partition.criterion.kind is CriterionKind.PROPERTY
            and partition.criterion.detail == name
            and cell.value == wanted
        ):
            continue
        return False
    return True


def _focused_binding(domain: ReferenceDomain) -> Binding | None:
    best_index, best_stamp = None, -1
    for index, part in enumerate(domain.partitions):
        if part.profiled is not None and part.stamp > best_stamp:
            best_index, best_stamp = index, part.stamp
    if best_index is None:
        return None
    return Binding(best_index, domain.partitions[best_index].profiled)


def _agreement_conflict(usd: UnderspecifiedDomain, member: ReferenceDomain) -> bool:
    for feature, wanted in usd.agreement.items():
        actual = member.agreement.get(feature)
        if actual is not None and actual != wanted:
            return True
    return False


def compatible(
    usd: UnderspecifiedDomain,
    domain: ReferenceDomain,
    context: ContextModel,
    kb: KnowledgeBase,
    *,
    agreement_on: bool = False,
) -> Compat:
    """Check one contextual (or generic) domain against the pattern.

    The criteria are checked in order: type, cardinality, partition, focus,
    exclusion of the profiled cell; the first violated one is reported.
    """
    T, P = usd.type_symbol, usd.properties

    def fail(reason: str) -> Compat:
        return Compat(False, reason, _STAGE_INDEX[reason if reason in _STAGE_INDEX else "focus"])

    def satisfying_cells(allow_residue: bool):
        for pi, part in enumerate(domain.partitions):
            for ci, cell in enumerate(part.cells):
                if _cell_satisfies(context, kb, part, cell, T, P, allow_residue=allow_residue):
                    yield pi, ci

    # -- type ---------------------------------------------------------------
    if usd.det in (DetClass.INDEFINITE, DetClass.NUMERAL, DetClass.INDEFINITE_ANOTHER):
        direct = kb.is_subtype(domain.type, T) and all(
            domain.properties.get(k) == v for k, v in P.items()
        )
        if not direct and next(satisfying_cells(True), None) is None:
            return fail("type")
    elif usd.plural:
        if not kb.is_subtype(domain.type, T) and not _plural_partitions(context, kb, domain, usd):
            return fail("type")
    elif usd.det in (DetClass.DEFINITE, DetClass.DEFINITE_OTHER) and T is not None:
        strict_super = kb.is_strict_subtype(T, domain.type)
        if not strict_super and next(satisfying_cells(False), None) is None:
            return fail("type")
    # pronouns, demonstratives and empty heads impose no type constraint

    # -- cardinality ----------------------------------------------------------
    if domain.cardinality < usd.cardinality_min:
        return fail("cardinality")

    # -- partition ------------------------------------------------------------
    binding: Binding | None = None
    if usd.partition is PartitionReq.EXISTING:
        if usd.det is DetClass.INDEFINITE_ANOTHER:
            binding = _another_binding(context, kb, domain, usd)
            if binding is None:
                had_any = any(
                    part.criterion.kind is CriterionKind.PREDICATE
                    and any(
                        _cell_satisfies(context, kb, part, cell, T, P, allow_residue=True)
                        for cell in part.cells
                    )
                    for part in domain.partitions
                )
                return fail("exclude-profiled" if had_any else "partition")
        elif usd.focus_required:
            if not domain.partitions:
                return fail("partition")
        elif usd.plural:
            partitions = _plural_partitions(context, kb, domain, usd)
            if not partitions:
                return fail("partition")
            binding = Binding(partitions[0], None)
        else:
            binding, excluded_only = _definite_binding(context, kb, domain, usd)
            if binding is None:
                return fail("exclude-profiled" if excluded_only else "partition")

    # -- focus ------------------------------------------------------------------
    if usd.focus_required:
        binding = _focused_binding(domain)
        if binding is None:
            return fail("focus")
        member = context.get(domain.partitions[binding.partition_index].cells[binding.cell_index].member)
        if agreement_on and _agreement_conflict(usd, member):
            return fail("agreement")

    return Compat(True, binding=binding)


def _plural_partitions(context, kb, domain, usd) -> list[int]:
    """Partitions whose non-residue members all satisfy the plural head."""
    found = []
    for pi, part in enumerate(domain.partitions):
        members = [cell for cell in part.cells if not context.get(cell.member).residue]
        if members and all(
            _cell_satisfies(context, kb, part, cell, usd.type_symbol, usd.properties, allow_residue=False)
            for cell in members
        ):
            found.append(pi)
    return found


def _another_binding(context, kb, domain, usd) -> Binding | None:
    for pi, part in enumerate(domain.partitions):
        if part.criterion.kind is not CriterionKind.PREDICATE:
            continue
        if domain.cardinality != UNBOUNDED and len(part.cells) + 1 > domain.cardinality:
            continue
        for ci, cell in enumerate(part.cells):
            if ci == part.profiled:
                continue
            if _cell_satisfies(context, kb, part, cell, usd.type_symbol, usd.properties, allow_residue=True):
                return Binding(pi, None)
    return None


def _definite_binding(context, kb, domain, usd) -> tuple[Binding | None, bool]:
    """Unique satisfying cell per partition; pattern-matching partitions are
    preferred, and among candidates an unprofiled cell is preferred.  The
    second value reports whether only the profiled-cell exclusion blocked
    the match."""
    order = list(range(len(domain.partitions)))
    if usd.pattern is not None:
        order.sort(key=lambda pi: 0 if usd.pattern.matches(domain.partitions[pi].criterion) else 1)
    candidates: list[tuple[int, int]] = []
    excluded_only = False
    for pi in order:
        part = domain.partitions[pi]
        sats = [
            ci
            for ci, cell in enumerate(part.cells)
            if _cell_satisfies(context, kb, part, cell, usd.type_symbol, usd.properties, allow_residue=False)
        ]
        if usd.exclude_profiled:
            kept = [ci for ci in sats if ci != part.profiled]
            if sats and not kept:
                excluded_only = True
            sats = kept
        if len(sats) == 1:
            candidates.append((pi, sats[0]))
    if not candidates:
        return None, excluded_only
    for pi, ci in candidates:
        if domain.partitions[pi].profiled != ci:
            return Binding(pi, ci), False
    pi, ci = candidates[0]
    return Binding(pi, ci), False


# ---------------------------------------------------------------------------
# selection (with accommodation fallbacks)


_DEFINITE_FAMILY = (DetClass.DEFINITE, DetClass.DEFINITE_OTHER)
_INDEFINITE_FAMILY = (DetClass.INDEFINITE, DetClass.NUMERAL)


def select_domain(usd: UnderspecifiedDomain, session: "Session") -> Selection:
    """First compatible domain in activation order, else accommodation.

    Fallback order for definites: perceptual grouping, then bridging via
    part-whole knowledge.  Indefinites and numerals fall back to cloning the
    generic domain of their head type.  Anything else fails.
    """
    context, kb = session.context, session.kb
    candidates: list[tuple[DomainId, str]] = []
    best_stage, best_reason = -1, None

    def attempt() -> tuple[DomainId, Binding | None] | None:
        nonlocal best_stage, best_reason
        for did in list(context.activation):
            result = compatible(usd, context.get(did), context, kb, agreement_on=session.agreement)
            candidates.append((did, result.outcome()))
            if result.ok:
                return did, result.binding
            if result.stage > best_stage:
                best_stage, best_reason = result.stage, result.reason
        return None

    found = attempt()
    if found is not None:
        return Selection(found[0], found[1], candidates)

    if usd.det in _DEFINITE_FAMILY:
        created = perceptual_group(context, kb, session.scene, session.params)
        if created:
            candidates.append(("(perceptual grouping)", "created " + ", ".join(created)))
            found = attempt()
            if found is not None:
                return Selection(found[0], found[1], candidates, accommodation="perceptual grouping")

        for did in list(context.activation):
            domain = context.get(did)
            if domain.residue or domain.cardinality != 1:
                continue
            if any(p.criterion.kind is CriterionKind.GROUP_ROLE for p in domain.partitions):
                continue
            if not kb.parts_of(domain.type):
                continue
            part_partition(kb, context, did)
            result = compatible(usd, domain, context, kb, agreement_on=session.agreement)
            candidates.append((did, result.outcome() + " after part materialization"))
            if result.ok:
                return Selection(did, result.binding, candidates, accommodation=f"bridging via parts of {did}")

    if usd.det in _INDEFINITE_FAMILY and usd.type_symbol is not None:
        generic = kb.generic_domain(usd.type_symbol, usd.properties)
        clone = context.new_domain(
            usd.type_symbol,
            UNBOUNDED,
            usd.properties,
            Source.CONCEPTUAL,
            id_=context.set_id(usd.type_symbol, usd.properties),
        )
        candidates.append((generic.id, f"generic domain cloned as {clone}"))
        return Selection(clone, None, candidates, accommodation=f"generic domain {generic.id} cloned as {clone}")

    reason = best_reason if best_reason is not None else "partition"
    return Selection(None, None, candidates, fail_reason=reason)


def unify(
    usd: UnderspecifiedDomain,
    domain: ReferenceDomain,
    context: ContextModel,
    kb: KnowledgeBase,
    *,
    agreement_on: bool = False,
) -> Binding | None:
    """Bind the pattern's requirements to the satisfying partition and cell.

    Precondition: compatibility holds.  No structural change is made; a
    virtual-partition pattern yields an empty binding.
    """
    result = compatible(usd, domain, context, kb, agreement_on=agreement_on)
    if not result.ok:
        raise ValueError(f"cannot unify with incompatible domain {domain.id}: {result.reason}")
    return result.binding


# ---------------------------------------------------------------------------
# restructuring


def _predicate_values(utterance: Utterance, expr: RefExpr) -> tuple[str, str, str, bool]:
    lemma = utterance.verb or "mention"
    positive = utterance.polarity != expr.negated
    value = lemma if positive else f"not-{lemma}"
    opposite = f"not-{lemma}" if positive else lemma
    return lemma, value, opposite, positive


def restructure(
    usd: UnderspecifiedDomain,
    selection: Selection,
    utterance: Utterance,
    expr: RefExpr,
    session: "Session",
) -> tuple[DomainId, Verdict, bool, str]:
    """Extract and profile the referent within the unified domain.

    Returns (referent, verdict, fresh, description); `fresh` records whether
    the referent id was minted by this call.
    """
    context = session.context
    domain_id, binding = selection.domain_id, selection.binding
    domain = context.get(domain_id)

    if usd.det in (DetClass.INDEFINITE, DetClass.NUMERAL):
        lemma, value, opposite, positive = _predicate_values(utterance, expr)
        count = int(usd.cardinality_min) if usd.cardinality_min != UNBOUNDED else 1
        cells: list[tuple[str, DomainId]] = []
        residue_id = None
        if domain.cardinality == UNBOUNDED or domain.cardinality - count >= 1:
            residue_card = UNBOUNDED if domain.cardinality == UNBOUNDED else domain.cardinality - count
            residue_id = context.new_domain(
                usd.type_symbol, residue_card, usd.properties, domain.source, residue=True,
                id_=context.mint_id("rest"),
            )
        referent = context.new_domain(
            usd.type_symbol, count, usd.properties, Source.DISCOURSE, agreement=usd.agreement
        )
        cells.append((value, referent))
        if residue_id is not None:
            cells.append((opposite, residue_id))
        criterion = DifferentiationCriterion.by_predicate(lemma, positive)
        pi = context.add_partition(domain_id, criterion, cells)
        context.profile(domain_id, pi, 0)
        context.touch(domain_id)
        opposed = f" opposed to {residue_id}" if residue_id else ""
        return referent, Verdict.OK, True, (
            f"minted {referent} under new {criterion.describe()} partition{opposed}; profiled"
        )

    if usd.det is DetClass.INDEFINITE_ANOTHER:
        _, value, _, _ = _predicate_values(utterance, expr)
        referent = context.new_domain(
            usd.type_symbol, 1, usd.properties, Source.DISCOURSE, agreement=usd.agreement
        )
        ci = context.add_cell(domain_id, binding.partition_index, value, referent)
        context.profile(domain_id, binding.partition_index, ci)
        context.touch(domain_id)
        return referent, Verdict.OK, True, (
            f"inserted {referent} as a new cell of the bound predicate partition; profiled"
        )

    if usd.det in _DEFINITE_FAMILY:
        if usd.plural:
            context.touch(domain_id)
            return domain_id, Verdict.OK, False, "selected the whole group domain as plural referent"
        part = domain.partitions[binding.partition_index]
        already = part.profiled == binding.cell_index
        context.profile(domain_id, binding.partition_index, binding.cell_index)
        context.touch(domain_id)
        referent = part.cells[binding.cell_index].member
        verdict = Verdict.SUBOPTIMAL if already else Verdict.OK
        note = " (cell was already profiled)" if already else ""
        return referent, verdict, False, (
            f"profiled cell {part.cells[binding.cell_index].value!r} of the bound partition{note}"
        )

    if usd.det is DetClass.PRONOUN:
        part = domain.partitions[binding.partition_index]
        referent = part.cells[binding.cell_index].member
        context.touch(domain_id)
        return referent, Verdict.OK, False, "no structural change; referent re-identified from focus"

    if usd.det is DetClass.DEMONSTRATIVE:
        part = domain.partitions[binding.partition_index]
        referent = part.cells[binding.cell_index].member
        member_type = context.get(referent).type
        context.touch(domain_id)
        new_id = context.new_domain(usd.reclassify_as, 1, {}, Source.DISCOURSE)
        pi = context.add_partition(new_id, DifferentiationCriterion.by_type(), [(member_type, referent)])
        context.profile(new_id, pi, 0)
        context.touch(new_id)
        return referent, Verdict.OK, False, (
            f"reclassified {referent} into new {usd.reclassify_as} domain {new_id}"
        )

    raise ValueError(f"unhandled determiner class {usd.det!r}")


# ---------------------------------------------------------------------------
# grouping


def group(
    trigger: GroupTrigger,
    members: list[DomainId],
    context: ContextModel,
    kb: KnowledgeBase,
    *,
    prominent: DomainId | None = None,
    relation: str | None = None,
) -> DomainId:
    """Create a complex domain over already-resolved referents.

    The partition opposes the members by type, falling back to the first
    property that distinguishes them, then to positional group roles.
    Prominence transfers to the group: the members' profiles elsewhere are
    cleared, and only a preposition trigger profiles a cell (the trajector).
    """
    ordered: list[DomainId] = []
    for member in members:
        if member not in ordered:
            ordered.append(member)
    if len(ordered) < 2:
        raise ValueError("grouping needs at least two distinct members")

    member_set = set(ordered)
    for domain in list(context.store.values()):
        if domain.generic:
            continue
        for pi, part in enumerate(domain.partitions):
            if part.profiled is not None and part.cells[part.profiled].member in member_set:
                context.clear_profile(domain.id, pi)

    types = [context.get(m).type for m in ordered]
    group_type = kb.least_common_supertype(types) or types[0]
    gid = context.new_domain(
        group_type,
        len(ordered),
        {},
        Source.DISCOURSE,
        id_=context.mint_id(group_type[:1].upper() + "G"),
    )

    if len(set(types)) == len(types):
        criterion = DifferentiationCriterion.by_type()
        values = types
    else:
        criterion = None
        shared = [
            key
            for key in context.get(ordered[0]).properties
            if all(key in context.get(m).properties for m in ordered[1:])
        ]
        for key in shared:
            vals = [context.get(m).properties[key] for m in ordered]
            if len(set(vals)) == len(vals):
                criterion = DifferentiationCriterion.by_property(key)
                values = vals
                break
        if criterion is None:
            criterion = DifferentiationCriterion.by_group_role()
            values = [f"m{i + 1}" for i in range(len(ordered))]
    pi = context.add_partition(gid, criterion, list(zip(values, ordered)))

    if trigger is GroupTrigger.PREPOSITION and prominent is not None:
        if relation is not None and len(ordered) == 2:
            roles = [("trajector" if m == prominent else "landmark") for m in ordered]
            pi2 = context.add_partition(
                gid, DifferentiationCriterion.by_position(relation), list(zip(roles, ordered))
            )
            context.profile(gid, pi2, roles.index("trajector"))
        context.profile(gid, pi, ordered.index(prominent))
    return gid


# ---------------------------------------------------------------------------
# utterance processing and sessions


def process_utterance(session: "Session", utterance: Utterance, utterance_index: int) -> list[Resolution]:
    """Resolve every argument left to right, then apply the discursive
    grouping triggers (prepositions, coordination, shared predicate)."""
    kb, context = session.kb, session.context
    resolutions: list[Resolution] = []

    for arg_index, expr in enumerate(utterance.args):
        usd = build_underspecified(expr, kb)
        base = dict(
            utterance_index=utterance_index,
            arg_index=arg_index,
            surface=expr.surface,
            det=expr.det.value,
            expr=expr,
            usd=usd.summary(),
        )
        if session.ambiguity == "report":
            passing = [
                did
                for did in list(context.activation)
                if compatible(usd, context.get(did), context, kb, agreement_on=session.agreement).ok
            ]
            resolutions.append(
                Resolution(
                    **base,
                    candidates=[(did, "pass") for did in passing],
                    accommodation=None,
                    domain=None,
                    referent=None,
                    verdict=None,
                    passing=passing,
                )
            )
            continue

        selection = select_domain(usd, session)
        if selection.domain_id is None:
            resolutions.append(
                Resolution(
                    **base,
                    candidates=selection.candidates,
                    accommodation=selection.accommodation,
                    domain=None,
                    referent=None,
                    verdict=Verdict.FAIL,
                    fail_reason=selection.fail_reason,
                    activation_head=context.activation[0] if context.activation else None,
                )
            )
            continue
        referent, verdict, fresh, description = restructure(usd, selection, utterance, expr, session)
        resolutions.append(
            Resolution(
                **base,
                candidates=selection.candidates,
                accommodation=selection.accommodation,
                domain=selection.domain_id,
                referent=referent,
                verdict=verdict,
                fresh=fresh,
                restructure=description,
                activation_head=context.activation[0] if context.activation else None,
            )
        )
        context.check_invariants()

    if session.ambiguity != "report":
        _apply_grouping(session, utterance, resolutions)
        context.check_invariants()
    return resolutions


def _apply_grouping(session: "Session", utterance: Utterance, resolutions: list[Resolution]) -> None:
    context, kb = session.context, session.kb
    referent_of = {
        r.arg_index: r.referent for r in resolutions if r.referent is not None
    }
    core = utterance.core_indices()
    grouped_sets: list[frozenset[DomainId]] = []

    def build(trigger: GroupTrigger, members: list[DomainId], prominent=None, relation=None):
        distinct = []
        for m in members:
            if m is not None and m not in distinct:
                distinct.append(m)
        if len(distinct) < 2:
            return
        gid = group(trigger, distinct, context, kb, prominent=prominent, relation=relation)
        grouped_sets.append(frozenset(distinct))
        session.groups.append((utterance.surface, trigger.value, gid))

    for link in utterance.pp_links:
        complement = referent_of.get(link.complement_index)
        if link.anchor_index is not None:
            anchor = referent_of.get(link.anchor_index)
        else:
            before = [i for i in core if i < link.complement_index and i in referent_of]
            after = [i for i in core if i in referent_of]
            anchor = referent_of[before[-1]] if before else (referent_of[after[0]] if after else None)
        if complement is None or anchor is None or complement == anchor:
            continue
        prominent = anchor if link.prominent == "head" else complement
        build(GroupTrigger.PREPOSITION, [anchor, complement], prominent=prominent, relation=link.relation)

    for coordination in utterance.coordinations:
        members = [referent_of.get(i) for i in coordination]
        build(GroupTrigger.COORDINATION, members)

    core_refs = [referent_of.get(i) for i in core]
    distinct_core = []
    for ref in core_refs:
        if ref is not None and ref not in distinct_core:
            distinct_core.append(ref)
    if len(distinct_core) >= 2 and frozenset(distinct_core) not in grouped_sets:
        build(GroupTrigger.SAME_PREDICATE, distinct_core)


_SPEAKER_PREFIX = re.compile(r"^\s*[A-Za-z][\w']{0,7}\s*:\s*")


def strip_speaker_prefix(line: str) -> str:
    return _SPEAKER_PREFIX.sub("", line)


class Session:
    """One dialogue's worth of state: context, scene, flags and trace."""

    def __init__(
        self,
        kb: KnowledgeBase,
        *,
        scene_path: str | None = None,
        params: GroupingParams | None = None,
        agreement: bool = False,
        ambiguity: str = "first",
        unknown_tokens: str = "fail",
    ):
        if ambiguity not in ("first", "report"):
            raise ValueError(f"ambiguity policy must be 'first' or 'report', got {ambiguity!r}")
        self.kb = kb
        self.params = params or GroupingParams()
        self.agreement = agreement
        self.ambiguity = ambiguity
        self.unknown_tokens = unknown_tokens
        self.context = ContextModel(kb)
        self.scene: Scene | None = None
        self.groups: list[tuple[str, str, DomainId]] = []
        self.utterances: list[Utterance] = []
        self.resolutions: list[Resolution] = []
        if scene_path is not None:
            self.scene = load_scene(scene_path, kb, self.context)
            perceptual_group(self.context, kb, self.scene, self.params)

    def process_line(self, text: str) -> list[Resolution]:
        utterance = parse_text(strip_speaker_prefix(text), self.kb.lexicon, unknown=self.unknown_tokens)
        index = len(self.utterances)
        self.utterances.append(utterance)
        resolved = process_utterance(self, utterance, index)
        self.resolutions.extend(resolved)
        return resolved

    def process_dialogue(self, lines) -> list[Resolution]:
        for line in lines:
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            self.process_line(stripped)
        return self.resolutions

    def resolution_at(self, utterance_index: int, arg_index: int) -> Resolution | None:
        for resolution in self.resolutions:
            if resolution.utterance_index == utterance_index and resolution.arg_index == arg_index:
                return resolution
        return None
