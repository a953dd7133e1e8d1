from __future__ import annotations

import pytest

from refdom import DetClass, ParseError, TokenError, parse_text, parse_utterance, tokenize
from refdom.parser import TokKind, ast_signature, render_utterance


def kinds(tokens):
    return [t.kind for t in tokens]


def test_tokenize_imperative(kb_en):
    tokens = tokenize("take a big horizontal line", kb_en.lexicon)
    assert kinds(tokens) == [TokKind.VERB, TokKind.DET, TokKind.ADJ, TokKind.ADJ, TokKind.NOUN]
    assert [t.surface for t in tokens] == ["take", "a", "big", "horizontal", "line"]


def test_tokenize_negation_and_preposition(kb_en):
    tokens = tokenize("don't stick it on the circle", kb_en.lexicon)
    assert kinds(tokens) == [
        TokKind.NEG,
        TokKind.VERB,
        TokKind.PRO,
        TokKind.PREP,
        TokKind.DET,
        TokKind.NOUN,
    ]


def test_tokenize_empty_string(kb_en):
    assert tokenize("", kb_en.lexicon) == []


def test_tokenize_unknown_token_policy(kb_en):
    with pytest.raises(TokenError):
        tokenize("take the gizmo", kb_en.lexicon)
    tokens = tokenize("take the gizmo", kb_en.lexicon, unknown="skip")
    assert kinds(tokens) == [TokKind.VERB, TokKind.DET]


def test_tokenize_multiword_preposition(kb_en):
    tokens = tokenize("put it on the top of the triangles", kb_en.lexicon)
    assert kinds(tokens) == [
        TokKind.VERB,
        TokKind.PRO,
        TokKind.PREP,
        TokKind.DET,
        TokKind.NOUN,
    ]
    assert tokens[2].payload.relation == "on-top-of"


def test_tokenize_french_contraction(kb_fr):
    tokens = tokenize("au rond", kb_fr.lexicon)
    assert kinds(tokens) == [TokKind.PREP, TokKind.AMBIG, TokKind.NOUN]
    assert [t.surface for t in tokens] == ["à", "le", "rond"]


def test_parse_pronoun_with_plural_pp_object(kb_en):
    utt = parse_text("put it on the top of the triangles", kb_en.lexicon)
    assert utt.verb == "put" and utt.polarity
    assert [a.det for a in utt.args] == [DetClass.PRONOUN, DetClass.DEFINITE]
    triangles = utt.args[1]
    assert triangles.head_type == "TRIANGLE" and triangles.number == "plural"
    assert len(utt.pp_links) == 1
    link = utt.pp_links[0]
    assert (link.relation, link.complement_index, link.anchor_index) == ("on-top-of", 1, None)


def test_parse_coordination_of_two_indefinites(kb_en):
    utt = parse_text("take a big horizontal line and a small square", kb_en.lexicon)
    assert [a.det for a in utt.args] == [DetClass.INDEFINITE, DetClass.INDEFINITE]
    assert utt.coordinations == [[0, 1]]
    assert utt.args[0].modifiers == {"size": "big", "orientation": "horizontal"}
    assert utt.args[1].modifiers == {"size": "small"}


def test_parse_empty_head(kb_en):
    utt = parse_text("the red one", kb_en.lexicon)
    assert utt.verb is None
    expr = utt.args[0]
    assert expr.det is DetClass.DEFINITE and expr.is_one
    assert expr.head_type is None and expr.modifiers == {"color": "red"}


def test_parse_another_and_definite_other(kb_en):
    another = parse_text("take another big horizontal line", kb_en.lexicon).args[0]
    assert another.det is DetClass.INDEFINITE_ANOTHER
    other = parse_text("take the other line", kb_en.lexicon).args[0]
    assert other.det is DetClass.DEFINITE_OTHER and other.head_type == "LINE"


def test_parse_numeral(kb_en):
    expr = parse_text("take two figures", kb_en.lexicon).args[0]
    assert expr.det is DetClass.NUMERAL and expr.cardinality == 2
    assert expr.number == "plural" and expr.head_type == "FIGURE"


def test_parse_declarative_with_subject_and_predicative(kb_en):
    utt = parse_text("the block is big", kb_en.lexicon)
    assert utt.verb == "be" and utt.subject_index == 0
    assert utt.predicative == [("size", "big")]


def test_parse_but_not_keeps_per_argument_negation(kb_en):
    utt = parse_text("the green block supports the big pyramid but not the red one", kb_en.lexicon)
    assert utt.verb == "support" and utt.polarity
    assert [a.det for a in utt.args] == [DetClass.DEFINITE, DetClass.DEFINITE, DetClass.DEFINITE]
    assert utt.args[2].is_one and utt.args[2].negated
    assert utt.coordinations == [[1, 2]]


def test_parse_french_clitic_and_contraction(kb_fr):
    utt = parse_text("tu ne la colles pas au rond hein", kb_fr.lexicon)
    assert utt.verb == "coller" and not utt.polarity
    assert [a.det for a in utt.args] == [DetClass.PRONOUN, DetClass.DEFINITE]
    assert utt.args[1].head_type == "CIRCLE"
    assert utt.pp_links[0].relation == "at" and utt.pp_links[0].anchor_index is None


def test_parse_french_fronted_pp(kb_fr):
    utt = parse_text("et à gauche de ce rond tu vas prendre une petite barre", kb_fr.lexicon)
    assert utt.verb == "prendre"
    assert [a.det for a in utt.args] == [DetClass.DEMONSTRATIVE, DetClass.INDEFINITE]
    assert utt.pp_links[0].relation == "left-of"
    assert utt.pp_links[0].complement_index == 0 and utt.pp_links[0].anchor_index is None


def test_determiner_pronoun_homograph_resolved_by_lookahead(kb_fr):
    clitic = parse_text("tu la prends", kb_fr.lexicon)
    assert clitic.args[0].det is DetClass.PRONOUN
    determiner = parse_text("tu prends la barre", kb_fr.lexicon)
    assert determiner.args[0].det is DetClass.DEFINITE
    assert determiner.args[0].head_type == "LINE"


def test_noun_attached_preposition(kb_en):
    utt = parse_text("take the line on the left of the circle", kb_en.lexicon)
    link = utt.pp_links[0]
    assert link.anchor_index == 0 and link.complement_index == 1
    anchor = utt.args[0]
    assert anchor.complement is not None
    assert anchor.complement.relation == "left-of"
    assert anchor.complement.expr is utt.args[1]


def test_parse_error_reports_position(kb_en):
    with pytest.raises(ParseError) as info:
        parse_text("take the", kb_en.lexicon)
    assert "token" in str(info.value)


def test_empty_head_requires_definite(kb_en):
    with pytest.raises(ParseError):
        parse_text("take a one", kb_en.lexicon)


def test_parse_is_deterministic(kb_en):
    text = "take a big horizontal line and a small square"
    first = parse_text(text, kb_en.lexicon)
    second = parse_text(text, kb_en.lexicon)
    assert ast_signature(first) == ast_signature(second)


ROUND_TRIP_EN = [
    "take a big horizontal line",
    "take a big horizontal line and a small square",
    "put it on the top of the triangles",
    "take the red one",
    "take another big horizontal line",
    "take the other line",
    "take two figures",
    "the block supports the pyramid",
    "the block is big",
    "take the line on the left of the circle",
    "don't stick it on the circle",
    "the green block supports the big pyramid but not the red one",
]

ROUND_TRIP_FR = [
    "prendre un gros rond",
    "à gauche de ce rond prendre une petite barre",
    "ne la colles pas au rond",
]


@pytest.mark.parametrize("text", ROUND_TRIP_EN)
def test_round_trip_english(kb_en, text):
    first = parse_text(text, kb_en.lexicon)
    rendered = render_utterance(first, kb_en.lexicon)
    second = parse_text(rendered, kb_en.lexicon)
    assert ast_signature(first) == ast_signature(second)


@pytest.mark.parametrize("text", ROUND_TRIP_FR)
def test_round_trip_french(kb_fr, text):
    first = parse_text(text, kb_fr.lexicon)
    rendered = render_utterance(first, kb_fr.lexicon)
    second = parse_text(rendered, kb_fr.lexicon)
    assert ast_signature(first) == ast_signature(second)
