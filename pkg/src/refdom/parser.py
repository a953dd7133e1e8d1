"""Tokenizer and parser for referring expressions in task-oriented utterances.

Both stages are lexicon-driven: the tokenizer classifies surface words
against the KB lexicon (longest multi-word match first, contractions
expanded, discourse particles dropped), and the parser builds a
predicate-argument structure with every referring expression classified by
determiner class.  The grammar is deterministic with one token of lookahead;
the only lexical ambiguity handled is determiner-versus-pronoun homography
(French "la"), resolved by peeking at the following token.

Utterance shapes covered::

    [conj] [pre]* VERB [post]*      pre  := NEG | ARG | PREP ARG
                                    post := NEG | ARG | PREP ARG
                                            | CONJ [NEG] ARG | ADJ
    ARG := PRO | DET [other] [NUM] ADJ* (NOUN | empty-head) | NUM NOUN

A preposition attaches to the nearest preceding argument when the lexicon
marks it noun-attaching, otherwise to the verb.  "another" yields its own
determiner class; "other" after a definite article upgrades it; coordination
("and", adversative "but [not]") records argument groups, with the negation
kept per argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .kb import DeterminerEntry, Lexicon, NounEntry, PrepositionEntry


class TokenError(ValueError):
    """A surface word the lexicon does not know."""


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at token {position})")
        self.position = position


class TokKind(Enum):
    VERB = "V"
    DET = "DET"
    ADJ = "ADJ"
    NOUN = "N"
    PRO = "PRO"
    PREP = "P"
    CONJ = "CONJ"
    NEG = "NEG"
    AMBIG = "DET/PRO"  # determiner-pronoun homographs


@dataclass
class Token:
    kind: TokKind
    surface: str
    payload: object = None


class DetClass(Enum):
    INDEFINITE = "indefinite"
    INDEFINITE_ANOTHER = "another"
    DEFINITE = "definite"
    DEFINITE_OTHER = "definite-other"
    DEMONSTRATIVE = "demonstrative"
    PRONOUN = "pronoun"
    NUMERAL = "numeral"


@dataclass
class RefExpr:
    det: DetClass
    head_type: str | None = None  # None for pronouns and empty heads
    is_one: bool = False  # semantically empty head ("the red one")
    modifiers: dict[str, str] = field(default_factory=dict)
    number: str = "singular"
    cardinality: int | None = None
    agreement: dict[str, str] = field(default_factory=dict)
    complement: "Complement | None" = None  # noun-attached PP
    negated: bool = False  # argument under "but not"
    surface: str = ""


@dataclass
class Complement:
    relation: str
    expr: RefExpr
    prominent: str


@dataclass
class PPLink:
    relation: str
    prominent: str
    complement_index: int
    anchor_index: int | None  # argument index, or None when verb-attached


@dataclass
class Utterance:
    verb: str | None
    polarity: bool
    args: list[RefExpr]
    pp_links: list[PPLink] = field(default_factory=list)
    coordinations: list[list[int]] = field(default_factory=list)
    subject_index: int | None = None
    predicative: list[tuple[str, str]] = field(default_factory=list)
    surface: str = ""

    def core_indices(self) -> list[int]:
        """Arguments of the verb itself (not complements of a preposition)."""
        pp = {link.complement_index for link in self.pp_links}
        return [i for i in range(len(self.args)) if i not in pp]


_STRIP = ".,!?;:()\"«»"


def _words(text: str) -> list[str]:
    out = []
    for raw in text.lower().split():
        word = raw.strip(_STRIP)
        if word:
            out.append(word)
    return out


def _multiword_table(lexicon: Lexicon) -> list[tuple[list[str], str]]:
    entries = [key for key in lexicon.prepositions if " " in key]
    entries += [key for key in lexicon.verbs if " " in key]
    return sorted(([e.split(), e] for e in entries), key=lambda pair: -len(pair[0]))


def tokenize(text: str, lexicon: Lexicon, *, unknown: str = "fail") -> list[Token]:
    """Lowercase, strip punctuation, expand contractions, and classify.

    ``unknown`` is the policy for words missing from the lexicon: "fail"
    raises TokenError, "skip" drops them.
    """
    if unknown not in ("fail", "skip"):
        raise ValueError(f"unknown-token policy must be 'fail' or 'skip', got {unknown!r}")
    words: list[str] = []
    for word in _words(text):
        words.extend(lexicon.contractions.get(word, [word]))

    multi = _multiword_table(lexicon)
    tokens: list[Token] = []
    i = 0
    while i < len(words):
        surface = None
        for parts, joined in multi:
            if words[i : i + len(parts)] == parts:
                surface = joined
                i += len(parts)
                break
        if surface is None:
            surface = words[i]
            i += 1

        if surface in lexicon.negations:
            tokens.append(Token(TokKind.NEG, surface))
        elif surface in lexicon.particles:
            continue
        elif surface in lexicon.conjunctions:
            tokens.append(Token(TokKind.CONJ, surface, lexicon.conjunctions[surface]))
        elif surface in lexicon.determiners and surface in lexicon.pronouns:
            tokens.append(
                Token(TokKind.AMBIG, surface, (lexicon.determiners[surface], lexicon.pronouns[surface]))
            )
        elif surface in lexicon.determiners:
            tokens.append(Token(TokKind.DET, surface, lexicon.determiners[surface]))
        elif surface in lexicon.pronouns:
            tokens.append(Token(TokKind.PRO, surface, lexicon.pronouns[surface]))
        elif surface in lexicon.prepositions:
            tokens.append(Token(TokKind.PREP, surface, lexicon.prepositions[surface]))
        elif surface in lexicon.adjectives:
            tokens.append(Token(TokKind.ADJ, surface, lexicon.adjectives[surface]))
        elif surface in lexicon.nouns:
            tokens.append(Token(TokKind.NOUN, surface, lexicon.nouns[surface]))
        elif surface in lexicon.verbs:
            tokens.append(Token(TokKind.VERB, surface, lexicon.verbs[surface]))
        elif unknown == "fail":
            raise TokenError(f"unknown token {surface!r}")
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token | None:
        index = self.pos + ahead
        return self.tokens[index] if index < len(self.tokens) else None

    def take(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def fail(self, message: str):
        raise ParseError(message, self.pos)

    # ------------------------------------------------------------------

    def parse(self) -> Utterance:
        utt = Utterance(verb=None, polarity=True, args=[])
        utt.surface = " ".join(t.surface for t in self.tokens)
        while self.peek() is not None and self.peek().kind is TokKind.CONJ:
            self.take()

        # pre-verbal field: negation, subject or clitic arguments, fronted PPs
        while self.peek() is not None and self.peek().kind is not TokKind.VERB:
            kind = self._effective_kind(self.peek())
            if kind is TokKind.NEG:
                self.take()
                utt.polarity = False
            elif kind is TokKind.PREP:
                self._parse_pp(utt)
            elif kind in (TokKind.DET, TokKind.PRO):
                index = self._parse_arg(utt)
                if utt.subject_index is None:
                    utt.subject_index = index
            else:
                self.fail(f"unexpected {self.peek().kind.value} token {self.peek().surface!r} before the verb")

        if self.peek() is not None:
            utt.verb = self.take().payload

        while self.peek() is not None:
            kind = self._effective_kind(self.peek())
            if kind is TokKind.NEG:
                self.take()
                utt.polarity = False
            elif kind is TokKind.ADJ:
                utt.predicative.append(self.take().payload)
            elif kind in (TokKind.DET, TokKind.PRO):
                self._parse_arg(utt)
            elif kind is TokKind.PREP:
                self._parse_pp(utt)
            elif kind is TokKind.CONJ:
                self._parse_coordination(utt)
            else:
                self.fail(f"unexpected {self.peek().kind.value} token {self.peek().surface!r}")
        return utt

    # ------------------------------------------------------------------

    def _effective_kind(self, token: Token) -> TokKind:
        """Resolve determiner-pronoun homographs: a determiner must be
        followed by adjectives or a noun."""
        if token.kind is not TokKind.AMBIG:
            return token.kind
        after = self.peek(1)
        if after is not None and after.kind in (TokKind.ADJ, TokKind.NOUN):
            return TokKind.DET
        return TokKind.PRO

    def _parse_pp(self, utt: Utterance) -> None:
        prep: PrepositionEntry = self.take().payload
        nxt = self.peek()
        if nxt is None or self._effective_kind(nxt) not in (TokKind.DET, TokKind.PRO):
            self.fail(f"preposition {prep.relation!r} without a complement")
        anchor = None
        if prep.attach == "noun" and utt.args:
            anchor = len(utt.args) - 1
        index = self._parse_arg(utt)
        link = PPLink(prep.relation, prep.prominent, index, anchor)
        utt.pp_links.append(link)
        if anchor is not None:
            utt.args[anchor].complement = Complement(prep.relation, utt.args[index], prep.prominent)

    def _parse_coordination(self, utt: Utterance) -> None:
        self.take()
        negated = False
        while self.peek() is not None and self.peek().kind is TokKind.NEG:
            self.take()
            negated = True
        nxt = self.peek()
        if nxt is None or self._effective_kind(nxt) not in (TokKind.DET, TokKind.PRO):
            self.fail("coordination without a following argument")
        previous = len(utt.args) - 1
        if previous < 0:
            self.fail("coordination with no preceding argument")
        index = self._parse_arg(utt)
        utt.args[index].negated = negated
        if utt.coordinations and previous in utt.coordinations[-1]:
            utt.coordinations[-1].append(index)
        else:
            utt.coordinations.append([previous, index])

    def _parse_arg(self, utt: Utterance) -> int:
        start = self.pos
        token = self.take()
        kind = token.kind
        if kind is TokKind.AMBIG:
            kind = TokKind.DET if self.peek() is not None and self.peek().kind in (TokKind.ADJ, TokKind.NOUN) else TokKind.PRO
            payload = token.payload[0] if kind is TokKind.DET else token.payload[1]
        else:
            payload = token.payload

        if kind is TokKind.PRO:
            agreement = dict(payload or {})
            expr = RefExpr(
                det=DetClass.PRONOUN,
                number=agreement.get("number", "singular"),
                agreement=agreement,
            )
        elif kind is TokKind.DET:
            expr = self._parse_nominal(token, payload)
        else:
            self.fail(f"expected a referring expression, found {token.surface!r}")
        expr.surface = " ".join(t.surface for t in self.tokens[start : self.pos])
        utt.args.append(expr)
        return len(utt.args) - 1

    def _parse_nominal(self, det_token: Token, entry: DeterminerEntry) -> RefExpr:
        classes = {
            "indefinite": DetClass.INDEFINITE,
            "definite": DetClass.DEFINITE,
            "demonstrative": DetClass.DEMONSTRATIVE,
            "another": DetClass.INDEFINITE_ANOTHER,
            "numeral": DetClass.NUMERAL,
        }
        if entry.det_class == "other":
            self.fail(f"{det_token.surface!r} cannot introduce an expression")
        det = classes[entry.det_class]
        cardinality = entry.count if det is DetClass.NUMERAL else None

        if det is DetClass.DEFINITE and self.peek() is not None and self.peek().kind is TokKind.DET:
            follower: DeterminerEntry = self.peek().payload
            if follower.det_class == "other":
                self.take()
                det = DetClass.DEFINITE_OTHER
        if self.peek() is not None and self.peek().kind is TokKind.DET:
            follower = self.peek().payload
            if follower.det_class == "numeral":
                self.take()
                cardinality = follower.count

        modifiers: dict[str, str] = {}
        while self.peek() is not None and self.peek().kind is TokKind.ADJ:
            prop, value = self.take().payload
            modifiers[prop] = value

        if self.peek() is None or self.peek().kind is not TokKind.NOUN:
            self.fail(f"determiner {det_token.surface!r} without a head noun")
        noun: NounEntry = self.take().payload

        is_one = noun.type is None
        if is_one and det not in (DetClass.DEFINITE, DetClass.DEFINITE_OTHER):
            self.fail("semantically empty head requires a definite determiner")
        number = noun.number
        if cardinality is not None and cardinality > 1:
            number = "plural"
        agreement = {}
        if noun.gender:
            agreement["gender"] = noun.gender
        agreement["number"] = number
        return RefExpr(
            det=det,
            head_type=noun.type,
            is_one=is_one,
            modifiers=modifiers,
            number=number,
            cardinality=cardinality,
            agreement=agreement,
        )


def parse_utterance(tokens: list[Token]) -> Utterance:
    return _Parser(tokens).parse()


def parse_text(text: str, lexicon: Lexicon, *, unknown: str = "fail") -> Utterance:
    return parse_utterance(tokenize(text, lexicon, unknown=unknown))


# -- canonical rendering (round-trip support) ---------------------------------


def _first(mapping, predicate) -> str | None:
    for surface, value in mapping.items():
        if predicate(value):
            return surface
    return None


def render_utterance(utt: Utterance, lexicon: Lexicon) -> str:
    """Render an AST back to a canonical surface form over the same lexicon.

    The canonical order is subject, negation, verb, then the remaining
    arguments in parse order with their prepositions and coordinations.
    """
    pieces: list[str] = []
    pp_of = {link.complement_index: link for link in utt.pp_links}
    coord_heads = {group[i]: group[i - 1] for group in utt.coordinations for i in range(1, len(group))}

    def render_arg(index: int) -> str:
        expr = utt.args[index]
        if expr.det is DetClass.PRONOUN:
            surface = None
            for cand, entry in lexicon.pronouns.items():
                if all(expr.agreement.get(k) == v for k, v in entry.items()):
                    surface = cand
                    break
            return _require(surface, "pronoun")
        words: list[str] = []
        if expr.det is DetClass.NUMERAL:
            words.append(_require(_first(lexicon.determiners, lambda d: d.det_class == "numeral" and d.count == expr.cardinality), "numeral"))
        else:
            class_name = {
                DetClass.INDEFINITE: "indefinite",
                DetClass.INDEFINITE_ANOTHER: "another",
                DetClass.DEFINITE: "definite",
                DetClass.DEFINITE_OTHER: "definite",
                DetClass.DEMONSTRATIVE: "demonstrative",
            }[expr.det]
            words.append(_require(_first(lexicon.determiners, lambda d: d.det_class == class_name), class_name))
            if expr.det is DetClass.DEFINITE_OTHER:
                words.append(_require(_first(lexicon.determiners, lambda d: d.det_class == "other"), "other"))
            if expr.cardinality is not None:
                words.append(_require(_first(lexicon.determiners, lambda d: d.det_class == "numeral" and d.count == expr.cardinality), "numeral"))
        for prop, value in expr.modifiers.items():
            words.append(_require(_first(lexicon.adjectives, lambda a: a == (prop, value)), f"{prop}={value}"))
        gender = expr.agreement.get("gender")

        def noun_matches(entry: NounEntry) -> bool:
            if (entry.type is None) != expr.is_one:
                return False
            if not expr.is_one and entry.type != expr.head_type:
                return False
            if entry.number != expr.number:
                return False
            return gender is None or entry.gender == gender

        surface = _first(lexicon.nouns, noun_matches)
        if surface is None:
            surface = _first(
                lexicon.nouns,
                lambda entry: (entry.type is None) == expr.is_one
                and (expr.is_one or entry.type == expr.head_type)
                and entry.number == expr.number,
            )
        words.append(_require(surface, f"noun for {expr.head_type}"))
        return " ".join(words)

    if utt.subject_index is not None:
        pieces.append(render_arg(utt.subject_index))
    if not utt.polarity:
        negs = list(lexicon.negations)
        pieces.append(_require(negs[0] if negs else None, "negation"))
    if utt.verb is not None:
        pieces.append(_require(_first(lexicon.verbs, lambda lemma: lemma == utt.verb), utt.verb))
    for prop, value in utt.predicative:
        pieces.append(_require(_first(lexicon.adjectives, lambda a: a == (prop, value)), f"{prop}={value}"))
    for index in range(len(utt.args)):
        if index == utt.subject_index:
            continue
        if index in coord_heads:
            conj = _first(lexicon.conjunctions, lambda c: c == ("but" if utt.args[index].negated else "and"))
            if conj is None:
                conj = next(iter(lexicon.conjunctions), None)
            pieces.append(_require(conj, "conjunction"))
            if utt.args[index].negated:
                negs = list(lexicon.negations)
                pieces.append(_require(negs[0] if negs else None, "negation"))
        if index in pp_of:
            pieces.append(
                _require(
                    _first(lexicon.prepositions, lambda p: p.relation == pp_of[index].relation),
                    pp_of[index].relation,
                )
            )
        pieces.append(render_arg(index))
    return " ".join(pieces)


def _require(surface: str | None, what: str) -> str:
    if surface is None:
        raise ValueError(f"lexicon has no surface form for {what}")
    return surface


def ast_signature(utt: Utterance):
    """Position-independent structural fingerprint used by round-trip tests."""

    def expr_sig(expr: RefExpr):
        return (
            expr.det.value,
            expr.head_type,
            expr.is_one,
            tuple(sorted(expr.modifiers.items())),
            expr.number,
            expr.cardinality,
            expr.negated,
        )

    return (
        utt.verb,
        utt.polarity,
        tuple(expr_sig(a) for a in utt.args),
        tuple((l.relation, l.prominent, l.complement_index, l.anchor_index) for l in utt.pp_links),
        tuple(tuple(group) for group in utt.coordinations),
        utt.subject_index,
        tuple(sorted(utt.predicative)),
    )
