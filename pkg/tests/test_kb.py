from __future__ import annotations

import json
import random

import pytest

from refdom import ContextModel, CriterionKind, KBError, load_kb, part_partition
from refdom.domains import UNBOUNDED, Source
from refdom.kb import KnowledgeBase, Lexicon, TypeNode


def write_kb(tmp_path, data):
    path = tmp_path / "kb.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_load_kb_fixture_with_parts(kb_en):
    parts = kb_en.parts_of("HOUSE")
    roles = {p.role: p for p in parts}
    assert set(roles) == {"roof", "windows"}
    assert roles["roof"].count == 1 and roles["roof"].type == "ROOF"
    assert roles["windows"].count == UNBOUNDED


def test_load_kb_rejects_self_parent(tmp_path):
    with pytest.raises(KBError, match="cycle"):
        load_kb(write_kb(tmp_path, {"types": [{"name": "A", "parent": "A"}], "lexicon": {}}))


def test_load_kb_rejects_longer_cycle(tmp_path):
    data = {"types": [{"name": "A", "parent": "B"}, {"name": "B", "parent": "A"}], "lexicon": {}}
    with pytest.raises(KBError, match="cycle"):
        load_kb(write_kb(tmp_path, data))


def test_load_kb_rejects_unknown_parent(tmp_path):
    with pytest.raises(KBError, match="unknown parent"):
        load_kb(write_kb(tmp_path, {"types": [{"name": "A", "parent": "Z"}], "lexicon": {}}))


def test_load_kb_rejects_duplicate_type(tmp_path):
    with pytest.raises(KBError, match="duplicate"):
        load_kb(write_kb(tmp_path, {"types": [{"name": "A"}, {"name": "A"}], "lexicon": {}}))


def test_load_kb_rejects_dangling_part_type(tmp_path):
    data = {
        "types": [{"name": "HOUSE", "parts": [{"role": "roof", "type": "ROOF", "count": 1}]}],
        "lexicon": {},
    }
    with pytest.raises(KBError, match="not declared"):
        load_kb(write_kb(tmp_path, data))


def test_load_kb_rejects_noun_with_unknown_type(tmp_path):
    data = {"types": [{"name": "A"}], "lexicon": {"nouns": {"thing": "B"}}}
    with pytest.raises(KBError, match="unknown type"):
        load_kb(write_kb(tmp_path, data))


def test_is_subtype(kb_en):
    assert kb_en.is_subtype("CIRCLE", "FIGURE")
    assert not kb_en.is_subtype("FIGURE", "CIRCLE")
    assert kb_en.is_subtype("CIRCLE", "CIRCLE")
    with pytest.raises(KBError):
        kb_en.is_subtype("CIRCLE", "ZORP")
    with pytest.raises(KBError):
        kb_en.is_subtype("ZORP", "FIGURE")


def test_least_common_supertype(kb_en):
    assert kb_en.least_common_supertype(["CIRCLE", "LINE"]) == "FIGURE"
    assert kb_en.least_common_supertype(["CIRCLE", "BLOCK"]) == "OBJECT"
    assert kb_en.least_common_supertype(["CIRCLE"]) == "CIRCLE"


def test_subtype_is_a_partial_order_on_random_forests():
    rng = random.Random(3)
    for _ in range(150):
        names = [f"T{i}" for i in range(rng.randint(1, 10))]
        nodes = {}
        for i, name in enumerate(names):
            parent = rng.choice(names[:i]) if i and rng.random() < 0.7 else None
            nodes[name] = TypeNode(name=name, parent=parent)
        kb = KnowledgeBase(nodes, Lexicon())

        # brute-force reachability oracle over parent links
        reach = {a: {a} for a in names}
        for a in names:
            node = nodes[a]
            while node.parent is not None:
                reach[a].add(node.parent)
                node = nodes[node.parent]

        for a in names:
            assert kb.is_subtype(a, a)
            for b in names:
                assert kb.is_subtype(a, b) == (b in reach[a])
                if kb.is_subtype(a, b) and kb.is_subtype(b, a):
                    assert a == b
                for c in names:
                    if kb.is_subtype(a, b) and kb.is_subtype(b, c):
                        assert kb.is_subtype(a, c)


def test_generic_domain_memoization(kb_en):
    big = kb_en.generic_domain("CIRCLE", {"size": "big"})
    again = kb_en.generic_domain("CIRCLE", {"size": "big"})
    plain = kb_en.generic_domain("CIRCLE", {})
    assert big.id == again.id and big is again
    assert plain.id != big.id
    assert big.generic and big.cardinality == UNBOUNDED and not big.partitions
    assert big.source is Source.CONCEPTUAL
    with pytest.raises(KBError):
        kb_en.generic_domain("ZORP", {})


def test_generic_domains_never_enter_activation(kb_en):
    ctx = ContextModel(kb_en)
    generic = kb_en.generic_domain("LINE", {"size": "small"})
    ctx.adopt(generic)
    assert generic.id in ctx.store and generic.id not in ctx.activation
    ctx.check_invariants()


def test_part_partition_materializes_roles(kb_en):
    ctx = ContextModel(kb_en)
    house = ctx.new_domain("HOUSE", 1, {}, Source.DISCOURSE)
    index = part_partition(kb_en, ctx, house)
    assert index == 0
    partition = ctx.get(house).partitions[0]
    assert partition.criterion.kind is CriterionKind.GROUP_ROLE
    assert partition.values() == ["roof", "windows"]
    assert partition.profiled is None
    roof = ctx.get(partition.cells[0].member)
    windows = ctx.get(partition.cells[1].member)
    assert roof.type == "ROOF" and roof.cardinality == 1
    assert windows.type == "WINDOW" and windows.cardinality == UNBOUNDED


def test_part_partition_absent_without_parts(kb_en):
    ctx = ContextModel(kb_en)
    marble = ctx.new_domain("MARBLE", 1, {}, Source.DISCOURSE)
    assert part_partition(kb_en, ctx, marble) is None


def test_part_partition_is_idempotent(kb_en):
    ctx = ContextModel(kb_en)
    house = ctx.new_domain("HOUSE", 1, {}, Source.DISCOURSE)
    first = part_partition(kb_en, ctx, house)
    count = len(ctx.store)
    second = part_partition(kb_en, ctx, house)
    assert first == second
    assert len(ctx.store) == count
    roles = [c.value for c in ctx.get(house).partitions[first].cells]
    assert len(roles) == len(set(roles))
