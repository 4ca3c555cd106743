"""Synthetic corpora, lexicons, triplets and embeddings.

Everything is generated from pseudowords so entity mentions are exact
and unambiguous, letting tests compare the pipeline against exhaustive
oracles. Three worlds are provided: a mixed-structure world for oracle
equivalence checks, a cue-phrase world where middle text determines the
label, and a fusion world where half the signal lives in the concept
embeddings.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import CorpusStore, ingest_corpus
from .embeddings import CuiEmbeddingTable, WordEmbeddingTable
from .lexicon import Concept, Lexicon, build_lexicon
from .triplets import RelationSchema, Triplet, TripletStore

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"

# Cue phrases (middle text) per relation for the cue and fusion worlds.
CUE_TOKENS = {
    "assoc": ("commonly", "accompanies"),
    "causes": ("frequently", "provokes"),
    "caused_by": ("typically", "follows"),
    "rel_x": ("mirrors", "closely"),
    "rel_y": ("precedes", "onset"),
}
NEUTRAL_MIDDLE = ("appears", "alongside")

_FILLERS = (
    "during", "routine", "review", "cohort", "analysis", "followup",
    "registry", "records", "cases", "series", "adult", "patients",
    "clinic", "visits", "summary", "notes",
)
_POOL_MIDDLES = (
    ("measured", "beside"),
    ("stored", "near"),
    ("scheduled", "after"),
    ("logged", "with"),
)


class _WordFactory:
    """Unique deterministic pseudowords, avoiding reserved vocabulary."""

    def __init__(self, rng, reserved=()):
        self._rng = rng
        self._used = set(reserved)

    def word(self, syllables: int = 2) -> str:
        while True:
            w = "".join(
                _CONSONANTS[self._rng.integers(len(_CONSONANTS))]
                + _VOWELS[self._rng.integers(len(_VOWELS))]
                for _ in range(syllables)
            )
            if w not in self._used:
                self._used.add(w)
                return w


def _sentence_text(tokens) -> str:
    text = " ".join(tokens)
    return text[0].upper() + text[1:] + "."


@dataclass
class SyntheticWorld:
    """A generated corpus plus everything the pipeline needs around it."""

    seed: int
    concepts: list[Concept]
    schema_dict: dict
    doc_records: list[dict]
    triplet_list: list[Triplet]
    hierarchy: list[tuple[str, str]]
    cui_vectors: dict[str, np.ndarray]
    cui_dim: int
    irrelevant_groups: tuple[str, ...]
    lexicon: Lexicon = field(init=False)
    schema: RelationSchema = field(init=False)

    def __post_init__(self) -> None:
        self.lexicon = build_lexicon(self.concepts)
        self.schema = RelationSchema.from_dict(self.schema_dict)

    def triplet_store(self) -> TripletStore:
        return TripletStore(self.triplet_list)

    def cui_table(self) -> CuiEmbeddingTable:
        return CuiEmbeddingTable(
            vectors={k: v.copy() for k, v in self.cui_vectors.items()},
            dim=self.cui_dim,
            hierarchy=tuple(self.hierarchy),
        )

    def write(self, out_dir) -> dict[str, str]:
        """Write lexicon/corpus/triplets/hierarchy/cui files under out_dir."""
        import os

        paths = {
            "lexicon": os.path.join(out_dir, "lexicon.tsv"),
            "corpus": os.path.join(out_dir, "corpus.jsonl"),
            "triplets": os.path.join(out_dir, "triplets.tsv"),
            "hierarchy": os.path.join(out_dir, "hierarchy.tsv"),
            "cui_embeddings": os.path.join(out_dir, "cuis.vec"),
        }
        with open(paths["lexicon"], "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
            writer.writerow(["cui", "preferred_name", "semantic_type", "semantic_group", "synonyms"])
            for c in self.concepts:
                writer.writerow(
                    [c.cui, c.preferred_name, c.semantic_type, c.semantic_group, "|".join(c.synonyms)]
                )
        with open(paths["corpus"], "w", encoding="utf-8") as fh:
            for rec in self.doc_records:
                fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False))
                fh.write("\n")
        with open(paths["triplets"], "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
            writer.writerow(["head_cui", "relation", "tail_cui", "source"])
            for t in self.triplet_list:
                writer.writerow([t.head_cui, t.relation, t.tail_cui, t.source])
        with open(paths["hierarchy"], "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
            writer.writerow(["child_cui", "parent_cui"])
            for child, parent in self.hierarchy:
                writer.writerow([child, parent])
        self.cui_table().save(paths["cui_embeddings"])
        return paths

    def ingest(self, tmp_dir) -> CorpusStore:
        import os

        path = os.path.join(tmp_dir, "corpus.jsonl")
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.doc_records:
                fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False))
                fh.write("\n")
        return ingest_corpus(path)


def random_word_table(corpus: CorpusStore, d_e: int = 24, seed: int = 0) -> WordEmbeddingTable:
    """Frozen random vectors for every token in the corpus (plus titles
    and headings); enough signal for linear encoders on synthetic data."""
    from .corpus import heading_path_string

    tokens = set()
    for doc in corpus:
        tokens.update(doc.title_tokens)
        for section in doc.sections:
            tokens.update(heading_path_string(section))
            for sentence in section.sentences:
                tokens.update(sentence.tokens)
    rng = np.random.default_rng(seed)
    vectors = {tok: rng.normal(0.0, 0.5, size=d_e) for tok in sorted(tokens)}
    return WordEmbeddingTable(vectors=vectors, dim=d_e)


def _make_concepts(factory, prefix, group, sem_type, count, rng, synonym_rate=0.2):
    concepts = []
    for i in range(count):
        n_tokens = 1 + int(rng.random() < 0.35)
        name = " ".join(factory.word() for _ in range(n_tokens))
        synonyms = ()
        if rng.random() < synonym_rate:
            synonyms = (factory.word(3),)
        concepts.append(
            Concept(
                cui=f"{prefix}{i:04d}",
                preferred_name=name,
                synonyms=synonyms,
                semantic_type=sem_type,
                semantic_group=group,
            )
        )
    return concepts


def _filler_phrase(rng, lo=1, hi=4) -> list[str]:
    n = int(rng.integers(lo, hi + 1))
    return [_FILLERS[int(rng.integers(len(_FILLERS)))] for _ in range(n)]


def _pool_sentence(rng, pool_concepts) -> list[str]:
    a = pool_concepts[int(rng.integers(len(pool_concepts)))]
    b = pool_concepts[int(rng.integers(len(pool_concepts)))]
    while b.cui == a.cui:
        b = pool_concepts[int(rng.integers(len(pool_concepts)))]
    middle = _POOL_MIDDLES[int(rng.integers(len(_POOL_MIDDLES)))]
    return (
        a.preferred_name.split()
        + list(middle)
        + b.preferred_name.split()
        + _filler_phrase(rng, 1, 2)
    )


def make_oracle_world(
    seed: int = 0,
    n_diso: int = 30,
    n_anat: int = 10,
    n_chem: int = 10,
    n_triplets: int = 30,
    n_sentences: int = 1000,
    d_k: int = 8,
) -> SyntheticWorld:
    """Mixed-structure world for oracle equivalence: entity pairs in and
    out of the triplet set, repeated mentions, entity titles for
    long-distance instances, and chemical pairs for the negative pool."""
    rng = np.random.default_rng(seed)
    factory = _WordFactory(rng, reserved=set(_FILLERS) | {w for c in CUE_TOKENS.values() for w in c})
    diso = _make_concepts(factory, "D", "DISO", "disorder", n_diso, rng)
    anat = _make_concepts(factory, "A", "ANAT", "body_part", n_anat, rng)
    chem = _make_concepts(factory, "H", "CHEM", "substance", n_chem, rng)
    concepts = diso + anat + chem

    schema_dict = {
        "relations": [
            {"label": "assoc", "directed": False, "head_group": "DISO", "tail_group": "DISO"},
            {"label": "causes", "directed": True, "head_group": "DISO", "tail_group": "DISO", "inverse_of": "caused_by"},
            {"label": "caused_by", "directed": True, "head_group": "DISO", "tail_group": "DISO", "inverse_of": "causes"},
            {"label": "site", "directed": True, "head_group": "DISO", "tail_group": "ANAT"},
        ]
    }

    counts = {"assoc": 12, "causes": 8, "caused_by": 4, "site": n_triplets - 24}
    triplet_list: list[Triplet] = []
    seen_pairs = set()
    for label, count in counts.items():
        made = 0
        while made < count:
            h = diso[int(rng.integers(len(diso)))]
            pool = anat if label == "site" else diso
            t = pool[int(rng.integers(len(pool)))]
            if h.cui == t.cui or (h.cui, t.cui) in seen_pairs:
                continue
            seen_pairs.add((h.cui, t.cui))
            triplet_list.append(Triplet(h.cui, label, t.cui, source="synthetic"))
            made += 1

    hierarchy = []
    for i in range(1, len(anat)):
        parent = anat[int(rng.integers(i))]
        hierarchy.append((anat[i].cui, parent.cui))

    def entity_tokens(concept) -> list[str]:
        terms = concept.terms()
        return terms[int(rng.integers(len(terms)))].split()

    doc_records = []
    sentences_left = n_sentences
    doc_no = 0
    while sentences_left > 0:
        per_doc = min(8, sentences_left)
        sentences_left -= per_doc
        titled = rng.random() < 0.4
        if titled:
            title_concept = diso[int(rng.integers(len(diso)))]
            title = title_concept.preferred_name
        else:
            title = " ".join(_filler_phrase(rng, 2, 3))
        sections = []
        half = (per_doc + 1) // 2
        for sec_no, count in enumerate((half, per_doc - half)):
            if count <= 0:
                continue
            texts = []
            for _ in range(count):
                kind = rng.random()
                if kind < 0.30:
                    t = triplet_list[int(rng.integers(len(triplet_list)))]
                    a = self_or(rng, self_tokens=entity_tokens(self_concept(t.head_cui, concepts)))
                    b = entity_tokens(self_concept(t.tail_cui, concepts))
                    first, second = (a, b) if rng.random() < 0.7 else (b, a)
                    tokens = (
                        _filler_phrase(rng, 0, 2)
                        + first
                        + _filler_phrase(rng, 1, 3)
                        + second
                        + _filler_phrase(rng, 0, 2)
                    )
                elif kind < 0.40:
                    a = concepts[int(rng.integers(len(concepts)))]
                    b = concepts[int(rng.integers(len(concepts)))]
                    tokens = (
                        entity_tokens(a)
                        + _filler_phrase(rng, 1, 3)
                        + entity_tokens(b)
                        + _filler_phrase(rng, 0, 2)
                    )
                elif kind < 0.55:
                    a = concepts[int(rng.integers(len(concepts)))]
                    tokens = _filler_phrase(rng, 1, 2) + entity_tokens(a) + _filler_phrase(rng, 1, 3)
                elif kind < 0.70:
                    tokens = _pool_sentence(rng, chem)
                elif kind < 0.75:
                    a = concepts[int(rng.integers(len(concepts)))]
                    tokens = (
                        entity_tokens(a)
                        + _filler_phrase(rng, 1, 2)
                        + entity_tokens(a)
                        + _filler_phrase(rng, 0, 2)
                    )
                else:
                    tokens = _filler_phrase(rng, 4, 8)
                texts.append(_sentence_text(tokens))
            headings = [] if not titled and sec_no == 0 else [_FILLERS[sec_no]]
            sections.append({"headings": headings, "text": " ".join(texts)})
        doc_records.append({"doc_id": f"doc{doc_no:04d}", "title": title, "sections": sections})
        doc_no += 1

    cui_vectors = {
        c.cui: np.asarray(rng.normal(0.0, 0.5, size=d_k)) for c in concepts
    }
    return SyntheticWorld(
        seed=seed,
        concepts=concepts,
        schema_dict=schema_dict,
        doc_records=doc_records,
        triplet_list=triplet_list,
        hierarchy=hierarchy,
        cui_vectors=cui_vectors,
        cui_dim=d_k,
        irrelevant_groups=("CHEM",),
    )


def self_concept(cui: str, concepts):
    for c in concepts:
        if c.cui == cui:
            return c
    raise KeyError(cui)


def self_or(rng, self_tokens):
    return self_tokens


def make_cue_world(
    seed: int = 0,
    pairs_per_relation: int = 12,
    sentences_per_pair: int = 6,
    n_diso: int = 30,
    n_chem: int = 10,
    n_proc: int = 8,
    n_pool_sentences: int = 140,
    long_distance_fraction: float = 0.2,
    tail_first_fraction: float = 0.3,
    d_k: int = 12,
) -> SyntheticWorld:
    """Cue-phrase world: the middle text determines the relation.

    'causes' triplets emit a fraction of tail-first sentences using the
    'caused_by' cue, exercising inverse-label reassignment.
    """
    rng = np.random.default_rng(seed)
    factory = _WordFactory(rng, reserved=set(_FILLERS) | {w for c in CUE_TOKENS.values() for w in c})
    diso = _make_concepts(factory, "D", "DISO", "disorder", n_diso, rng)
    chem = _make_concepts(factory, "H", "CHEM", "substance", n_chem, rng)
    proc = _make_concepts(factory, "P", "PROC", "procedure", n_proc, rng)
    concepts = diso + chem + proc

    schema_dict = {
        "relations": [
            {"label": "assoc", "directed": False, "head_group": "DISO", "tail_group": "DISO"},
            {"label": "causes", "directed": True, "head_group": "DISO", "tail_group": "DISO", "inverse_of": "caused_by"},
            {"label": "caused_by", "directed": True, "head_group": "DISO", "tail_group": "DISO", "inverse_of": "causes"},
        ]
    }

    triplet_list: list[Triplet] = []
    seen_pairs: set[frozenset] = set()
    for label in ("assoc", "causes", "caused_by"):
        made = 0
        while made < pairs_per_relation:
            h = diso[int(rng.integers(len(diso)))]
            t = diso[int(rng.integers(len(diso)))]
            pair = frozenset((h.cui, t.cui))
            if h.cui == t.cui or pair in seen_pairs:
                continue
            seen_pairs.add(pair)
            triplet_list.append(Triplet(h.cui, label, t.cui, source="synthetic"))
            made += 1

    by_cui = {c.cui: c for c in concepts}
    doc_records = []
    for doc_no, triplet in enumerate(triplet_list):
        head = by_cui[triplet.head_cui]
        tail = by_cui[triplet.tail_cui]
        texts = []
        for _ in range(sentences_per_pair):
            long_form = rng.random() < long_distance_fraction
            cue = list(CUE_TOKENS[triplet.relation])
            if long_form:
                tokens = ["this", "condition"] + cue + tail.preferred_name.split() + _filler_phrase(rng, 1, 2)
            elif triplet.relation == "causes" and rng.random() < tail_first_fraction:
                tokens = (
                    tail.preferred_name.split()
                    + list(CUE_TOKENS["caused_by"])
                    + head.preferred_name.split()
                    + _filler_phrase(rng, 1, 2)
                )
            else:
                tokens = (
                    head.preferred_name.split()
                    + cue
                    + tail.preferred_name.split()
                    + _filler_phrase(rng, 1, 2)
                )
            texts.append(_sentence_text(tokens))
        doc_records.append(
            {
                "doc_id": f"doc{doc_no:04d}",
                "title": head.preferred_name,
                "sections": [{"headings": ["overview"], "text": " ".join(texts)}],
            }
        )

    pool_concepts = chem + proc
    pool_texts = [
        _sentence_text(_pool_sentence(rng, pool_concepts)) for _ in range(n_pool_sentences)
    ]
    for i in range(0, len(pool_texts), 10):
        doc_records.append(
            {
                "doc_id": f"pool{i // 10:04d}",
                "title": " ".join(_filler_phrase(rng, 2, 3)),
                "sections": [{"headings": [], "text": " ".join(pool_texts[i : i + 10])}],
            }
        )

    cui_vectors = {c.cui: np.asarray(rng.normal(0.0, 0.3, size=d_k)) for c in concepts}
    return SyntheticWorld(
        seed=seed,
        concepts=concepts,
        schema_dict=schema_dict,
        doc_records=doc_records,
        triplet_list=triplet_list,
        hierarchy=[],
        cui_vectors=cui_vectors,
        cui_dim=d_k,
        irrelevant_groups=("CHEM", "PROC"),
    )


def make_fusion_world(
    seed: int = 0,
    pairs_per_half_relation: int = 10,
    sentences_per_pair: int = 5,
    n_neutral_diso: int = 40,
    n_chem: int = 12,
    n_pool_sentences: int = 130,
    d_k: int = 8,
) -> SyntheticWorld:
    """World where half the positive pairs are labeled by a textual cue
    and half only by the head entity's concept-embedding direction.

    Text-half pairs use per-relation cue middles and carry noise concept
    vectors; cui-half pairs share one neutral middle but their heads'
    vectors point along a relation-specific axis.
    """
    rng = np.random.default_rng(seed)
    factory = _WordFactory(
        rng,
        reserved=set(_FILLERS) | set(NEUTRAL_MIDDLE) | {w for c in CUE_TOKENS.values() for w in c},
    )
    neutral = _make_concepts(factory, "D", "DISO", "disorder", n_neutral_diso, rng)
    carriers_x = _make_concepts(factory, "X", "DISO", "disorder", pairs_per_half_relation, rng)
    carriers_y = _make_concepts(factory, "Y", "DISO", "disorder", pairs_per_half_relation, rng)
    chem = _make_concepts(factory, "H", "CHEM", "substance", n_chem, rng)
    concepts = neutral + carriers_x + carriers_y + chem

    schema_dict = {
        "relations": [
            {"label": "rel_x", "directed": False, "head_group": "DISO", "tail_group": "DISO"},
            {"label": "rel_y", "directed": False, "head_group": "DISO", "tail_group": "DISO"},
        ]
    }

    triplet_list: list[Triplet] = []
    used: set[frozenset] = set()

    def add_pair(head, label):
        while True:
            t = neutral[int(rng.integers(len(neutral)))]
            pair = frozenset((head.cui, t.cui))
            if t.cui != head.cui and pair not in used:
                used.add(pair)
                triplet_list.append(Triplet(head.cui, label, t.cui, source="synthetic"))
                return

    for label, carriers in (("rel_x", carriers_x), ("rel_y", carriers_y)):
        for _ in range(pairs_per_half_relation):  # text half
            h = neutral[int(rng.integers(len(neutral)))]
            add_pair(h, label)
        for carrier in carriers:  # cui half
            add_pair(carrier, label)

    by_cui = {c.cui: c for c in concepts}
    doc_records = []
    for doc_no, triplet in enumerate(triplet_list):
        head = by_cui[triplet.head_cui]
        tail = by_cui[triplet.tail_cui]
        cui_half = head.cui[0] in ("X", "Y")
        middle = list(NEUTRAL_MIDDLE) if cui_half else list(CUE_TOKENS[triplet.relation])
        texts = []
        for _ in range(sentences_per_pair):
            tokens = (
                head.preferred_name.split()
                + middle
                + tail.preferred_name.split()
                + _filler_phrase(rng, 1, 2)
            )
            texts.append(_sentence_text(tokens))
        doc_records.append(
            {
                "doc_id": f"doc{doc_no:04d}",
                "title": " ".join(_filler_phrase(rng, 2, 3)),
                "sections": [{"headings": [], "text": " ".join(texts)}],
            }
        )
    pool_texts = [_sentence_text(_pool_sentence(rng, chem)) for _ in range(n_pool_sentences)]
    for i in range(0, len(pool_texts), 10):
        doc_records.append(
            {
                "doc_id": f"pool{i // 10:04d}",
                "title": " ".join(_filler_phrase(rng, 2, 3)),
                "sections": [{"headings": [], "text": " ".join(pool_texts[i : i + 10])}],
            }
        )

    cui_vectors = {}
    for c in concepts:
        vec = rng.normal(0.0, 0.05, size=d_k)
        if c.cui.startswith("X"):
            vec[0] += 3.0
        elif c.cui.startswith("Y"):
            vec[1] += 3.0
        cui_vectors[c.cui] = np.asarray(vec)
    return SyntheticWorld(
        seed=seed,
        concepts=concepts,
        schema_dict=schema_dict,
        doc_records=doc_records,
        triplet_list=triplet_list,
        hierarchy=[],
        cui_vectors=cui_vectors,
        cui_dim=d_k,
        irrelevant_groups=("CHEM",),
    )
