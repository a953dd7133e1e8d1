"""Visual scenes: perception-sourced domains and perceptual grouping.

Entities in a scene file seed one perception-sourced reference domain each.
Grouping follows two cues: similarity (entities sharing a key property value)
and proximity (single-link clusters under a distance threshold in scene
units).  Either cue yields a group domain typed by the members' least common
supertype and partitioned by the first criterion that tells the members
apart: their type, then a shared property, then position.  Perceptual groups
are created unprofiled; prominence only ever comes from discourse.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .domains import ContextModel, DifferentiationCriterion, DomainId, Source
from .kb import KnowledgeBase


class SceneError(ValueError):
    """Malformed scene file or unknown entity type."""


@dataclass(frozen=True)
class SceneEntity:
    id: str
    type: str
    properties: tuple[tuple[str, str], ...]
    position: tuple[float, float]

    def props(self) -> dict[str, str]:
        return dict(self.properties)


@dataclass
class GroupingParams:
    proximity_threshold: float = 1.5
    similarity_keys: tuple[str, ...] = ("color", "size")

    def __post_init__(self):
        if self.proximity_threshold <= 0:
            raise SceneError("proximity threshold must be positive")


@dataclass
class Scene:
    entities: list[SceneEntity]
    domain_of: dict[str, DomainId]  # entity id -> perception domain id


def load_scene(path: str | Path, kb: KnowledgeBase, context: ContextModel) -> Scene:
    """Seed one perception domain per entity; file order maps to activation
    order with the first entity least activated."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise SceneError(f"cannot read scene file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SceneError(f"malformed scene file: {exc}") from exc

    entities: list[SceneEntity] = []
    seen: set[str] = set()
    for raw in data.get("entities", []):
        try:
            eid, etype = raw["id"], raw["type"]
            x, y = raw["position"]
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneError(f"malformed entity entry {raw!r}") from exc
        if eid in seen:
            raise SceneError(f"duplicate entity id {eid!r}")
        if not kb.has_type(etype):
            raise SceneError(f"entity {eid!r} has unknown type {etype!r}")
        seen.add(eid)
        entities.append(
            SceneEntity(
                id=eid,
                type=etype,
                properties=tuple((k, str(v)) for k, v in raw.get("properties", {}).items()),
                position=(float(x), float(y)),
            )
        )

    domain_of: dict[str, DomainId] = {}
    for entity in entities:
        domain_of[entity.id] = context.new_domain(
            entity.type,
            1,
            entity.props(),
            Source.PERCEPTION,
            id_=context.mint_id(entity.id, numbered=False),
        )
    return Scene(entities=entities, domain_of=domain_of)


def _distance(a: SceneEntity, b: SceneEntity) -> float:
    return math.dist(a.position, b.position)


def single_link_clusters(entities: list[SceneEntity], threshold: float) -> list[list[SceneEntity]]:
    """Connected components of the pairwise distance-at-most-threshold graph,
    in first-appearance order."""
    parent = list(range(len(entities)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(entities)):
        for j in range(i + 1, len(entities)):
            if _distance(entities[i], entities[j]) <= threshold:
                parent[find(i)] = find(j)

    clusters: dict[int, list[SceneEntity]] = {}
    for i, entity in enumerate(entities):
        clusters.setdefault(find(i), []).append(entity)
    return list(clusters.values())


def _distinguishing_partition(
    kb: KnowledgeBase, members: list[SceneEntity]
) -> tuple[DifferentiationCriterion, list[str]] | None:
    """First criterion whose values are pairwise distinct across the members:
    type, then a property carried by all members, then position."""
    types = [m.type for m in members]
    if len(set(types)) == len(types):
        return DifferentiationCriterion.by_type(), types
    shared = [k for k, _ in members[0].properties if all(k in m.props() for m in members[1:])]
    for key in shared:
        values = [m.props()[key] for m in members]
        if len(set(values)) == len(values):
            return DifferentiationCriterion.by_property(key), values
    xs = [m.position[0] for m in members]
    ys = [m.position[1] for m in members]
    for axis, coords in (("horizontal", xs), ("vertical", ys)):
        if len(set(coords)) == len(coords):
            if len(members) == 2:
                labels = ["left", "right"] if axis == "horizontal" else ["lower", "upper"]
                order = sorted(range(2), key=lambda i: coords[i])
                values = ["", ""]
                for rank, idx in enumerate(order):
                    values[idx] = labels[rank]
            else:
                order = sorted(range(len(members)), key=lambda i: coords[i])
                values = [""] * len(members)
                for rank, idx in enumerate(order):
                    values[idx] = f"pos{rank + 1}"
            return DifferentiationCriterion.by_position(axis), values
    return None


def _existing_group_sets(context: ContextModel) -> set[frozenset[DomainId]]:
    found: set[frozenset[DomainId]] = set()
    for domain in context.store.values():
        if domain.source is Source.PERCEPTION and domain.partitions:
            found.add(frozenset(c.member for c in domain.partitions[0].cells))
    return found


def perceptual_group(
    context: ContextModel,
    kb: KnowledgeBase,
    scene: Scene | None,
    params: GroupingParams,
) -> list[DomainId]:
    """Create group domains for similarity classes and proximity clusters.

    Deterministic in (scene file order, params); re-running never duplicates
    an existing group over the same members.  Returns the new group ids.
    """
    if scene is None or not scene.entities:
        return []
    existing = _existing_group_sets(context)
    created: list[DomainId] = []

    candidates: list[list[SceneEntity]] = []
    for key in ("type",) + tuple(params.similarity_keys):
        classes: dict[str, list[SceneEntity]] = {}
        for entity in scene.entities:
            value = entity.type if key == "type" else entity.props().get(key)
            if value is not None:
                classes.setdefault(value, []).append(entity)
        candidates.extend(group for group in classes.values() if len(group) >= 2)
    candidates.extend(
        cluster for cluster in single_link_clusters(scene.entities, params.proximity_threshold)
        if len(cluster) >= 2
    )

    for members in candidates:
        member_ids = [scene.domain_of[m.id] for m in members]
        key = frozenset(member_ids)
        if key in existing:
            continue
        group_type = kb.least_common_supertype([m.type for m in members])
        if group_type is None:
            continue
        partition = _distinguishing_partition(kb, members)
        if partition is None:
            continue
        criterion, values = partition
        gid = context.new_domain(
            group_type,
            len(members),
            {},
            Source.PERCEPTION,
            id_=context.mint_id(group_type[:1].upper() + "G"),
        )
        context.add_partition(gid, criterion, list(zip(values, member_ids)))
        existing.add(key)
        created.append(gid)
    return created
