from __future__ import annotations

import itertools
import json
import math
import random

import pytest

from refdom import ContextModel, CriterionKind, SceneError, load_scene, perceptual_group
from refdom.domains import Source
from refdom.scene import GroupingParams, SceneEntity, single_link_clusters

from conftest import scene_path


def write_scene(tmp_path, entities):
    path = tmp_path / "scene.json"
    path.write_text(json.dumps({"entities": entities}), encoding="utf-8")
    return path


def test_load_scene_seeds_perception_domains(kb_en):
    ctx = ContextModel(kb_en)
    scene = load_scene(scene_path("two_figures.json"), kb_en, ctx)
    assert set(scene.domain_of) == {"c1", "t1"}
    assert ctx.activation == ["@t1", "@c1"]  # first entity least activated
    circle = ctx.get("@c1")
    assert circle.source is Source.PERCEPTION and circle.cardinality == 1


def test_load_scene_empty_leaves_context_unchanged(kb_en, tmp_path):
    ctx = ContextModel(kb_en)
    scene = load_scene(write_scene(tmp_path, []), kb_en, ctx)
    assert not scene.entities and not ctx.store and not ctx.activation


def test_load_scene_rejects_unknown_type(kb_en, tmp_path):
    path = write_scene(tmp_path, [{"id": "z", "type": "ZORP", "properties": {}, "position": [0, 0]}])
    ctx = ContextModel(kb_en)
    with pytest.raises(SceneError, match="unknown type"):
        load_scene(path, kb_en, ctx)


def test_load_scene_rejects_duplicate_ids(kb_en, tmp_path):
    path = write_scene(
        tmp_path,
        [
            {"id": "c1", "type": "CIRCLE", "properties": {}, "position": [0, 0]},
            {"id": "c1", "type": "CIRCLE", "properties": {}, "position": [1, 1]},
        ],
    )
    ctx = ContextModel(kb_en)
    with pytest.raises(SceneError, match="duplicate"):
        load_scene(path, kb_en, ctx)


def test_load_scene_rejects_malformed_entity(kb_en, tmp_path):
    path = write_scene(tmp_path, [{"id": "c1", "type": "CIRCLE"}])
    ctx = ContextModel(kb_en)
    with pytest.raises(SceneError, match="malformed"):
        load_scene(path, kb_en, ctx)


def test_proximity_group_over_mixed_types_partitions_by_type(kb_en):
    ctx = ContextModel(kb_en)
    scene = load_scene(scene_path("two_figures.json"), kb_en, ctx)
    created = perceptual_group(ctx, kb_en, scene, GroupingParams(proximity_threshold=1.5))
    assert len(created) == 1
    group = ctx.get(created[0])
    assert group.type == "FIGURE" and group.cardinality == 2
    assert group.source is Source.PERCEPTION
    partition = group.partitions[0]
    assert partition.criterion.kind is CriterionKind.TYPE
    assert dict((c.value, c.member) for c in partition.cells) == {"CIRCLE": "@c1", "TRIANGLE": "@t1"}
    assert partition.profiled is None  # perceptual groups carry no prominence


def test_distant_unalike_entities_form_no_group(kb_en, tmp_path):
    path = write_scene(
        tmp_path,
        [
            {"id": "c1", "type": "CIRCLE", "properties": {}, "position": [0, 0]},
            {"id": "b1", "type": "BLOCK", "properties": {}, "position": [50, 50]},
        ],
    )
    ctx = ContextModel(kb_en)
    scene = load_scene(path, kb_en, ctx)
    assert perceptual_group(ctx, kb_en, scene, GroupingParams(proximity_threshold=1.5)) == []


def brute_force_value_classes(entities, key):
    """Oracle: maximal subsets of entities sharing a value for the key."""
    classes = {}
    for entity in entities:
        value = dict(entity.properties).get(key)
        if value is not None:
            classes.setdefault(value, []).append(entity.id)
    return {frozenset(ids) for ids in classes.values() if len(ids) >= 2}


def test_similarity_grouping_matches_value_class_oracle(kb_en, tmp_path):
    path = write_scene(
        tmp_path,
        [
            {"id": "r1", "type": "BLOCK", "properties": {"color": "red"}, "position": [0, 0]},
            {"id": "r2", "type": "BLOCK", "properties": {"color": "red"}, "position": [20, 0]},
            {"id": "r3", "type": "BLOCK", "properties": {"color": "red"}, "position": [40, 0]},
            {"id": "b1", "type": "BLOCK", "properties": {"color": "blue"}, "position": [60, 0]},
        ],
    )
    ctx = ContextModel(kb_en)
    scene = load_scene(path, kb_en, ctx)
    created = perceptual_group(ctx, kb_en, scene, GroupingParams(proximity_threshold=1.5, similarity_keys=("color",)))

    expected_color_sets = brute_force_value_classes(scene.entities, "color")
    assert expected_color_sets == {frozenset({"r1", "r2", "r3"})}

    member_sets = set()
    for gid in created:
        cells = ctx.get(gid).partitions[0].cells
        member_sets.add(frozenset(c.member.lstrip("@") for c in cells))
    # one group for the whole type class, one per color class with >= 2 members
    assert frozenset({"r1", "r2", "r3", "b1"}) in member_sets
    assert frozenset({"r1", "r2", "r3"}) in member_sets
    assert len(member_sets) == 2


def test_same_type_same_color_pairs_partition_by_position(kb_en, tmp_path):
    path = write_scene(
        tmp_path,
        [
            {"id": "a", "type": "BLOCK", "properties": {"color": "red"}, "position": [0, 0]},
            {"id": "b", "type": "BLOCK", "properties": {"color": "red"}, "position": [1, 0]},
        ],
    )
    ctx = ContextModel(kb_en)
    scene = load_scene(path, kb_en, ctx)
    created = perceptual_group(ctx, kb_en, scene, GroupingParams(similarity_keys=("color",)))
    assert len(created) == 1
    partition = ctx.get(created[0]).partitions[0]
    assert partition.criterion.kind is CriterionKind.POSITION
    assert dict((c.value, c.member) for c in partition.cells) == {"left": "@a", "right": "@b"}


def test_regrouping_is_idempotent(kb_en):
    ctx = ContextModel(kb_en)
    scene = load_scene(scene_path("two_figures.json"), kb_en, ctx)
    params = GroupingParams()
    first = perceptual_group(ctx, kb_en, scene, params)
    second = perceptual_group(ctx, kb_en, scene, params)
    assert len(first) == 1 and second == []


def test_grouping_is_deterministic(kb_en):
    structures = []
    for _ in range(2):
        ctx = ContextModel(kb_en)
        scene = load_scene(scene_path("colored_blocks.json"), kb_en, ctx)
        created = perceptual_group(ctx, kb_en, scene, GroupingParams())
        structures.append([(gid, ctx.snapshot(gid)) for gid in created])
    assert structures[0] == structures[1]


def brute_force_clusters(entities, threshold):
    """Oracle: transitive closure of the pairwise distance relation."""
    ids = [e.id for e in entities]
    linked = {eid: {eid} for eid in ids}
    for a, b in itertools.combinations(entities, 2):
        if math.dist(a.position, b.position) <= threshold:
            merged = linked[a.id] | linked[b.id]
            for eid in merged:
                linked[eid] = merged
    return {frozenset(group) for group in linked.values()}


def test_single_link_clustering_matches_transitive_closure_oracle(kb_en):
    rng = random.Random(23)
    for _ in range(200):
        count = rng.randint(1, 6)
        entities = [
            SceneEntity(
                id=f"e{i}",
                type="BLOCK",
                properties=(),
                position=(rng.uniform(0, 6), rng.uniform(0, 6)),
            )
            for i in range(count)
        ]
        threshold = rng.uniform(0.5, 4.0)
        clusters = single_link_clusters(entities, threshold)
        got = {frozenset(e.id for e in cluster) for cluster in clusters}
        assert got == brute_force_clusters(entities, threshold)
