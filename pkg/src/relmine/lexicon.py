"""Concept dictionary and multi-pattern mention detection.

Terms are stored tokenized (same tokenizer as the corpus) in a token
trie; matching is leftmost-longest non-overlapping, case-insensitive,
with ties between concepts sharing a term broken toward the smaller CUI.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from .corpus import tokenize
from .errors import FormatError, ValidationError

# Coarse semantic groups accepted by default; loaders may pass their own set.
DEFAULT_SEMANTIC_GROUPS = frozenset(
    {
        "ACTI", "ANAT", "CHEM", "CONC", "DEVI", "DISO", "GENE", "GEOG",
        "LIVB", "OBJC", "OCCU", "ORGA", "PHEN", "PHYS", "PROC",
    }
)

_LEXICON_COLUMNS = ["cui", "preferred_name", "semantic_type", "semantic_group", "synonyms"]

# Trie terminal marker; token strings never contain NUL.
_TERM = "\x00"


@dataclass(frozen=True)
class Concept:
    cui: str
    preferred_name: str
    synonyms: tuple[str, ...]
    semantic_type: str
    semantic_group: str

    def terms(self) -> tuple[str, ...]:
        return (self.preferred_name,) + self.synonyms


@dataclass(frozen=True)
class Mention:
    """A matched concept occurrence as a token span [start, end)."""

    cui: str
    token_span: tuple[int, int]

    @property
    def start(self) -> int:
        return self.token_span[0]

    @property
    def end(self) -> int:
        return self.token_span[1]


@dataclass
class Lexicon:
    """Concept dictionary plus a compiled token-trie matcher.

    Immutable after construction; concurrent find_mentions calls are safe.
    """

    concepts: dict[str, Concept] = field(default_factory=dict)
    allowed_groups: frozenset[str] = DEFAULT_SEMANTIC_GROUPS
    _trie: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._trie = {}
        for concept in self.concepts.values():
            for term in concept.terms():
                self._add_term(term, concept.cui)

    def _add_term(self, term: str, cui: str) -> None:
        tokens = tokenize(term)
        if not tokens:
            raise ValidationError(f"concept {cui}: term {term!r} tokenizes to nothing")
        node = self._trie
        for tok in tokens:
            node = node.setdefault(tok, {})
        # Tie rule: the lexicographically smaller CUI owns a shared term.
        existing = node.get(_TERM)
        if existing is None or cui < existing:
            node[_TERM] = cui

    def __len__(self) -> int:
        return len(self.concepts)

    def __contains__(self, cui: str) -> bool:
        return cui in self.concepts

    def get(self, cui: str) -> Concept | None:
        return self.concepts.get(cui)

    def group_of(self, cui: str) -> str:
        concept = self.concepts.get(cui)
        if concept is None:
            raise ValidationError(f"cui '{cui}' not in lexicon")
        return concept.semantic_group

    def concepts_in_group(self, group: str) -> list[Concept]:
        """Concepts of one semantic group, ordered by CUI."""
        return sorted(
            (c for c in self.concepts.values() if c.semantic_group == group),
            key=lambda c: c.cui,
        )


def build_lexicon(concepts, allowed_groups=DEFAULT_SEMANTIC_GROUPS) -> Lexicon:
    """Assemble a Lexicon from Concept values, validating uniqueness and groups."""
    table: dict[str, Concept] = {}
    for concept in concepts:
        if concept.cui in table:
            raise ValidationError(f"duplicate cui '{concept.cui}'")
        if concept.semantic_group not in allowed_groups:
            raise ValidationError(
                f"cui '{concept.cui}': unknown semantic_group '{concept.semantic_group}'"
            )
        table[concept.cui] = concept
    return Lexicon(concepts=table, allowed_groups=frozenset(allowed_groups))


def load_lexicon(path, allowed_groups=DEFAULT_SEMANTIC_GROUPS) -> Lexicon:
    """Load a lexicon TSV: cui, preferred_name, semantic_type,
    semantic_group, synonyms (pipe-separated). Header row required."""
    concepts = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("lexicon file is empty; header row required") from None
        if [h.strip() for h in header] != _LEXICON_COLUMNS:
            raise FormatError(
                f"lexicon header must be {_LEXICON_COLUMNS}, got {header}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(_LEXICON_COLUMNS):
                raise FormatError(
                    f"line {line_no}: expected {len(_LEXICON_COLUMNS)} columns, got {len(row)}"
                )
            cui, name, sem_type, group, synonyms = (c.strip() for c in row)
            if not cui or not name:
                raise FormatError(f"line {line_no}: cui and preferred_name required")
            concepts.append(
                Concept(
                    cui=cui,
                    preferred_name=name,
                    synonyms=tuple(s.strip() for s in synonyms.split("|") if s.strip()),
                    semantic_type=sem_type,
                    semantic_group=group,
                )
            )
    return build_lexicon(concepts, allowed_groups)


def find_mentions(sentence_tokens, lexicon: Lexicon) -> list[Mention]:
    """Leftmost-longest non-overlapping concept matches in a token sequence.

    Case-insensitive; output is sorted by start index. Where two concepts
    share the identical longest term at a position, the smaller CUI wins.
    """
    if not lexicon.concepts:
        raise ValidationError("find_mentions requires a nonempty lexicon")
    tokens = [t.lower() for t in sentence_tokens]
    mentions: list[Mention] = []
    trie = lexicon._trie
    i = 0
    n = len(tokens)
    while i < n:
        node = trie
        best_end = -1
        best_cui = None
        j = i
        while j < n:
            node = node.get(tokens[j])
            if node is None:
                break
            j += 1
            cui = node.get(_TERM)
            if cui is not None:
                best_end = j
                best_cui = cui
        if best_cui is not None:
            mentions.append(Mention(cui=best_cui, token_span=(i, best_end)))
            i = best_end
        else:
            i += 1
    return mentions
