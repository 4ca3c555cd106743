"""Corpus ingestion: documents, sections, tokenized sentences.

Documents are normalized into a title, per-section heading paths, and
tokenized sentences so downstream samplers can use both in-sentence and
title-to-sentence entity pairs. Sentence order and character spans into
the source text are preserved.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

from .errors import FormatError

logger = logging.getLogger(__name__)

# Sentences longer than this are truncated at ingestion (keeps encoder
# cost bounded; truncation is logged).
MAX_SENTENCE_TOKENS = 128

HEADING_SEPARATOR = "/"

# Word runs (with internal hyphens kept intact) or single punctuation marks.
_TOKEN_RE = re.compile(r"\w+(?:-\w+)*|[^\w\s]")

# Trailing abbreviations that never end a sentence.
_ABBREVIATIONS = ("e.g.", "i.e.", "dr.", "vs.", "fig.")

_SENTENCE_END = ".!?"


def tokenize(text: str) -> list[str]:
    """Lowercase and split text into word and punctuation tokens.

    Splits on Unicode whitespace, separates punctuation characters into
    their own tokens, and keeps hyphenated words intact. Deterministic;
    empty input yields an empty list.
    """
    return _TOKEN_RE.findall(text.lower())


def _ends_with_abbreviation(text: str, dot_index: int) -> bool:
    head = text[: dot_index + 1].lower()
    for abbr in _ABBREVIATIONS:
        if head.endswith(abbr):
            before = dot_index - len(abbr)
            if before < 0 or text[before].isspace() or not text[before].isalnum():
                return True
    return False


def split_sentences(text: str) -> list[str]:
    """Split text into sentences at ``. ``, ``! `` or ``? `` boundaries.

    A boundary is accepted only when followed (after whitespace) by an
    uppercase letter or the end of the text, and the terminator is not
    part of a known abbreviation such as "e.g." or "fig.". The outputs
    are verbatim substrings of the input in source order.
    """
    sentences: list[str] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in _SENTENCE_END and i + 1 < n and text[i + 1].isspace():
            if ch != "." or not _ends_with_abbreviation(text, i):
                k = i + 1
                while k < n and text[k].isspace():
                    k += 1
                if k >= n or text[k].isupper():
                    sentences.append(text[start : i + 1])
                    start = k
                    i = k
                    continue
        i += 1
    tail = text[start:]
    if tail.strip():
        sentences.append(tail)
    return sentences


@dataclass(frozen=True)
class Sentence:
    """One tokenized sentence with its character span in the source text.

    ``source_char_span`` indexes the owning section's raw text; the
    spanned substring tokenizes back to ``tokens`` (modulo truncation at
    MAX_SENTENCE_TOKENS).
    """

    tokens: tuple[str, ...]
    source_char_span: tuple[int, int]


@dataclass(frozen=True)
class Section:
    heading_path: tuple[str, ...]
    sentences: tuple[Sentence, ...]


@dataclass(frozen=True)
class Document:
    doc_id: str
    title_tokens: tuple[str, ...]
    sections: tuple[Section, ...]


def heading_path_string(section: Section) -> list[str]:
    """Tokenized heading path, outermost first, levels joined by '/'."""
    joined = f" {HEADING_SEPARATOR} ".join(section.heading_path)
    return tokenize(joined)


@dataclass
class CorpusStore:
    """Immutable-after-build collection of documents, indexed by doc_id."""

    documents: tuple[Document, ...] = ()
    _by_id: dict[str, Document] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._by_id = {doc.doc_id: doc for doc in self.documents}

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def get(self, doc_id: str) -> Document | None:
        return self._by_id.get(doc_id)

    def sentence_count(self) -> int:
        return sum(
            len(sec.sentences) for doc in self.documents for sec in doc.sections
        )

    def save(self, path) -> None:
        """Serialize to JSONL, one document per line (deterministic bytes)."""
        with open(path, "w", encoding="utf-8") as fh:
            for doc in self.documents:
                record = {
                    "doc_id": doc.doc_id,
                    "title_tokens": list(doc.title_tokens),
                    "sections": [
                        {
                            "heading_path": list(sec.heading_path),
                            "sentences": [
                                {
                                    "tokens": list(s.tokens),
                                    "span": list(s.source_char_span),
                                }
                                for s in sec.sentences
                            ],
                        }
                        for sec in doc.sections
                    ],
                }
                fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False))
                fh.write("\n")

    @classmethod
    def load(cls, path) -> "CorpusStore":
        docs = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                docs.append(
                    Document(
                        doc_id=rec["doc_id"],
                        title_tokens=tuple(rec["title_tokens"]),
                        sections=tuple(
                            Section(
                                heading_path=tuple(sec["heading_path"]),
                                sentences=tuple(
                                    Sentence(
                                        tokens=tuple(s["tokens"]),
                                        source_char_span=tuple(s["span"]),
                                    )
                                    for s in sec["sentences"]
                                ),
                            )
                            for sec in rec["sections"]
                        ),
                    )
                )
        return cls(documents=tuple(docs))


def _build_section(headings, text: str) -> Section:
    sentences = []
    cursor = 0
    for raw in split_sentences(text):
        start = text.index(raw, cursor)
        cursor = start + len(raw)
        tokens = tokenize(raw)
        if not tokens:
            continue
        if len(tokens) > MAX_SENTENCE_TOKENS:
            logger.warning(
                "truncating %d-token sentence to %d tokens",
                len(tokens),
                MAX_SENTENCE_TOKENS,
            )
            tokens = tokens[:MAX_SENTENCE_TOKENS]
        sentences.append(
            Sentence(tokens=tuple(tokens), source_char_span=(start, cursor))
        )
    return Section(heading_path=tuple(headings), sentences=tuple(sentences))


def _parse_jsonl_doc(record: dict, line_no: int) -> Document:
    for key in ("doc_id", "title", "sections"):
        if key not in record:
            raise FormatError(f"line {line_no}: missing required field '{key}'")
    sections = []
    for sec in record["sections"]:
        if "headings" not in sec or "text" not in sec:
            raise FormatError(
                f"line {line_no}: section needs 'headings' and 'text' fields"
            )
        sections.append(_build_section(sec["headings"], sec["text"]))
    return Document(
        doc_id=record["doc_id"],
        title_tokens=tuple(tokenize(record["title"])),
        sections=tuple(sections),
    )


def ingest_corpus(path, format: str = "jsonl-docs") -> CorpusStore:
    """Read a corpus file into a CorpusStore.

    The only supported format is "jsonl-docs": one JSON object per line
    with fields doc_id (string), title (string) and sections (array of
    {headings: array of string, text: string}). Processing is streaming,
    one document at a time. Malformed records and duplicate doc_ids
    raise FormatError naming the line.
    """
    if format != "jsonl-docs":
        raise FormatError(f"unknown corpus format '{format}'")
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise FormatError(f"line {line_no}: expected a JSON object")
            doc = _parse_jsonl_doc(record, line_no)
            if doc.doc_id in seen:
                raise FormatError(f"line {line_no}: duplicate doc_id '{doc.doc_id}'")
            seen.add(doc.doc_id)
            docs.append(doc)
    return CorpusStore(documents=tuple(docs))
