"""Reference resolution over structured reference domains.

Referring expressions are interpreted by accessing and restructuring
reference domains rather than by linking to antecedents: indefinites,
definites, demonstratives, pronouns, one-anaphora and "another" all run
through the same build / select / unify / restructure pipeline over an
activation-ordered context fed by discourse, perception and conceptual
knowledge.
"""

from .domains import (
    UNBOUNDED,
    Cell,
    ContextModel,
    CriterionKind,
    DifferentiationCriterion,
    DomainError,
    DomainId,
    Partition,
    ReferenceDomain,
    Source,
)
from .engine import (
    Binding,
    GroupTrigger,
    Resolution,
    Selection,
    Session,
    UnderspecifiedDomain,
    Verdict,
    build_underspecified,
    compatible,
    group,
    process_utterance,
    restructure,
    select_domain,
    unify,
)
from .kb import KBError, KnowledgeBase, Lexicon, TypeNode, load_kb, part_partition
from .parser import (
    DetClass,
    ParseError,
    RefExpr,
    TokenError,
    Utterance,
    parse_text,
    parse_utterance,
    tokenize,
)
from .scene import GroupingParams, Scene, SceneEntity, SceneError, load_scene, perceptual_group

__version__ = "0.1.0"

__all__ = [
    "UNBOUNDED",
    "Binding",
    "Cell",
    "ContextModel",
    "CriterionKind",
    "DetClass",
    "DifferentiationCriterion",
    "DomainError",
    "DomainId",
    "GroupTrigger",
    "GroupingParams",
    "KBError",
    "KnowledgeBase",
    "Lexicon",
    "ParseError",
    "Partition",
    "RefExpr",
    "ReferenceDomain",
    "Resolution",
    "Scene",
    "SceneEntity",
    "SceneError",
    "Selection",
    "Session",
    "Source",
    "TokenError",
    "TypeNode",
    "UnderspecifiedDomain",
    "Utterance",
    "Verdict",
    "build_underspecified",
    "compatible",
    "group",
    "load_kb",
    "load_scene",
    "parse_text",
    "parse_utterance",
    "part_partition",
    "perceptual_group",
    "process_utterance",
    "restructure",
    "select_domain",
    "tokenize",
    "unify",
]
