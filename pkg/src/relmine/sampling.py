"""Bag generation: distant-supervision positives, synthesized negatives,
and leak-free dataset assembly.

An Instance is one labeled sentence occurrence; all instances of one
entity pair and label form a Bag. E1/E2 follow surface order inside the
sentence (for title-to-sentence instances E1 is the title mention), and
every instance carries the five-part decomposition
(head_text, e1, middle_text, e2, tail_text) used for negative synthesis.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .corpus import CorpusStore, heading_path_string, tokenize
from .embeddings import WordEmbeddingTable
from .errors import FormatError, ValidationError
from .lexicon import Lexicon, Mention, find_mentions
from .triplets import NA_LABEL, RelationSchema, TripletStore

logger = logging.getLogger(__name__)

BAGS_FORMAT_VERSION = 1
DATASET_FORMAT_VERSION = 1

SHORT = "short"
LONG = "long"


def group_mask_token(semantic_group: str) -> str:
    return f"[GRP:{semantic_group}]"


@dataclass(frozen=True)
class Instance:
    """One labeled sentence occurrence.

    For short-distance instances both mention spans index
    sentence_tokens and e1 is the surface-first mention; for
    long-distance instances e1 is the title mention (span indexing
    title_tokens) and e2 is in the sentence. decomposition is the
    (head_text, e1_tokens, middle_text, e2_tokens, tail_text) split;
    for long-distance instances head_text is empty and e1_tokens is the
    title entity, prefixed to the sentence at encoding time.
    """

    doc_id: str
    section_index: int
    sentence_index: int
    title_tokens: tuple[str, ...]
    heading_tokens: tuple[str, ...]
    sentence_tokens: tuple[str, ...]
    e1: Mention
    e2: Mention
    e1_group: str
    e2_group: str
    distance: str
    decomposition: tuple[tuple[str, ...], ...]

    def signature(self) -> tuple:
        """Location + span identity, used for oracle comparisons."""
        return (
            self.doc_id,
            self.section_index,
            self.sentence_index,
            self.distance,
            self.e1.cui,
            self.e1.token_span,
            self.e2.cui,
            self.e2.token_span,
        )


@dataclass(frozen=True)
class Bag:
    """All instances of one ordered entity pair under one label."""

    head_cui: str
    tail_cui: str
    label: str
    instances: tuple[Instance, ...]

    def __post_init__(self) -> None:
        if not self.instances:
            raise ValidationError("bag must contain at least one instance")

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.head_cui, self.label, self.tail_cui)

    @property
    def pair(self) -> frozenset:
        return frozenset((self.head_cui, self.tail_cui))


def decompose(sentence_tokens, e1_span, e2_span):
    """Split a sentence into (head, e1, middle, e2, tail) by two spans.

    The earlier span is treated as the E1 position. Concatenating the
    five parts reproduces the input; overlapping spans are an error.
    """
    a, b = sorted((tuple(e1_span), tuple(e2_span)))
    if a[1] > b[0]:
        raise ValidationError(f"overlapping entity spans {e1_span} and {e2_span}")
    tokens = tuple(sentence_tokens)
    return (
        tokens[: a[0]],
        tokens[a[0] : a[1]],
        tokens[a[1] : b[0]],
        tokens[b[0] : b[1]],
        tokens[b[1] :],
    )


def mask_instance(instance: Instance, lexicon: Lexicon) -> list[str]:
    """Masked token sequence: entity spans replaced by group mask tokens.

    Returns the decomposition concatenation with e1/e2 replaced by single
    "[GRP:<semantic_group>]" tokens. For long-distance instances this is
    the masked title entity prefixed to the masked sentence.
    """
    head, _, middle, _, tail = instance.decomposition
    m1 = group_mask_token(lexicon.group_of(instance.e1.cui))
    m2 = group_mask_token(lexicon.group_of(instance.e2.cui))
    return list(head) + [m1] + list(middle) + [m2] + list(tail)


def _nearest_pair(first: list[Mention], second: list[Mention]):
    """Closest (gap, then leftmost) pair of mentions from two lists."""
    best = None
    best_key = None
    for m1 in first:
        for m2 in second:
            lo, hi = (m1, m2) if m1.start < m2.start else (m2, m1)
            key = (hi.start - lo.end, lo.start, hi.start)
            if best_key is None or key < best_key:
                best_key = key
                best = (m1, m2)
    return best


def _short_instance(doc, sec_idx, sent_idx, sentence, m_first, m_second, lexicon):
    """Build a short-distance instance; m_first must start before m_second."""
    section = doc.sections[sec_idx]
    return Instance(
        doc_id=doc.doc_id,
        section_index=sec_idx,
        sentence_index=sent_idx,
        title_tokens=doc.title_tokens,
        heading_tokens=tuple(heading_path_string(section)),
        sentence_tokens=sentence.tokens,
        e1=m_first,
        e2=m_second,
        e1_group=lexicon.group_of(m_first.cui),
        e2_group=lexicon.group_of(m_second.cui),
        distance=SHORT,
        decomposition=decompose(sentence.tokens, m_first.token_span, m_second.token_span),
    )


def _long_instance(doc, sec_idx, sent_idx, sentence, title_mention, body_mention, lexicon):
    section = doc.sections[sec_idx]
    tokens = sentence.tokens
    span = body_mention.token_span
    decomposition = (
        (),
        doc.title_tokens[title_mention.start : title_mention.end],
        tokens[: span[0]],
        tokens[span[0] : span[1]],
        tokens[span[1] :],
    )
    return Instance(
        doc_id=doc.doc_id,
        section_index=sec_idx,
        sentence_index=sent_idx,
        title_tokens=doc.title_tokens,
        heading_tokens=tuple(heading_path_string(section)),
        sentence_tokens=tokens,
        e1=title_mention,
        e2=body_mention,
        e1_group=lexicon.group_of(title_mention.cui),
        e2_group=lexicon.group_of(body_mention.cui),
        distance=LONG,
        decomposition=decomposition,
    )


class _BagAccumulator:
    def __init__(self):
        self._instances: dict[tuple[str, str, str], list[Instance]] = {}

    def add(self, head: str, label: str, tail: str, instance: Instance) -> None:
        self._instances.setdefault((head, label, tail), []).append(instance)

    def bags(self) -> list[Bag]:
        return [
            Bag(head_cui=h, tail_cui=t, label=l, instances=tuple(insts))
            for (h, l, t), insts in sorted(self._instances.items())
        ]


def generate_positive_bags(
    corpus: CorpusStore,
    lexicon: Lexicon,
    triplets: TripletStore,
    schema: RelationSchema,
) -> list[Bag]:
    """Distant-supervision positives: one bag per triplet with instances.

    Every sentence mentioning both entities of a triplet yields one
    short-distance instance (nearest mention pair, ties leftmost). When
    the head is mentioned in a document title, body sentences mentioning
    only the tail yield long-distance instances. For directed labels with
    a declared inverse, an instance whose surface order is tail-before-
    head is assigned to the inverse label's bag for the swapped pair.
    Bags are returned sorted by (head, label, tail).
    """
    # cui -> list of (doc index, section index, sentence index, mention)
    sentence_hits: dict[str, list[tuple[int, int, int, Mention]]] = {}
    title_hits: dict[str, list[tuple[int, Mention]]] = {}
    docs = list(corpus)
    for d, doc in enumerate(docs):
        for mention in find_mentions(doc.title_tokens, lexicon) if doc.title_tokens else []:
            title_hits.setdefault(mention.cui, []).append((d, mention))
        for s, section in enumerate(doc.sections):
            for i, sentence in enumerate(section.sentences):
                for mention in find_mentions(sentence.tokens, lexicon):
                    sentence_hits.setdefault(mention.cui, []).append((d, s, i, mention))

    acc = _BagAccumulator()
    for triplet in triplets:
        spec = schema.spec_for(triplet.relation)
        head_locs = sentence_hits.get(triplet.head_cui, ())
        tail_locs = sentence_hits.get(triplet.tail_cui, ())
        head_by_sent: dict[tuple[int, int, int], list[Mention]] = {}
        for d, s, i, m in head_locs:
            head_by_sent.setdefault((d, s, i), []).append(m)
        tail_by_sent: dict[tuple[int, int, int], list[Mention]] = {}
        for d, s, i, m in tail_locs:
            tail_by_sent.setdefault((d, s, i), []).append(m)

        shared = sorted(set(head_by_sent) & set(tail_by_sent))
        for d, s, i in shared:
            doc = docs[d]
            sentence = doc.sections[s].sentences[i]
            m_head, m_tail = _nearest_pair(head_by_sent[(d, s, i)], tail_by_sent[(d, s, i)])
            if m_head.start < m_tail.start:
                inst = _short_instance(doc, s, i, sentence, m_head, m_tail, lexicon)
                acc.add(triplet.head_cui, triplet.relation, triplet.tail_cui, inst)
            else:
                inst = _short_instance(doc, s, i, sentence, m_tail, m_head, lexicon)
                if spec.directed and spec.inverse_of is not None:
                    acc.add(triplet.tail_cui, spec.inverse_of, triplet.head_cui, inst)
                else:
                    acc.add(triplet.head_cui, triplet.relation, triplet.tail_cui, inst)

        # Long distance: head in the title, tail in a body sentence that
        # does not itself mention the head (those produced short instances).
        for d, title_mention in title_hits.get(triplet.head_cui, ()):
            for key in sorted(k for k in tail_by_sent if k[0] == d):
                if key in head_by_sent:
                    continue
                _, s, i = key
                doc = docs[d]
                sentence = doc.sections[s].sentences[i]
                body_mention = min(tail_by_sent[key], key=lambda m: m.start)
                inst = _long_instance(doc, s, i, sentence, title_mention, body_mention, lexicon)
                acc.add(triplet.head_cui, triplet.relation, triplet.tail_cui, inst)
            break  # leftmost title mention only
    return acc.bags()


def build_negative_pool(
    corpus: CorpusStore,
    lexicon: Lexicon,
    schema: RelationSchema,
    irrelevant_groups,
    pool_size: int,
    seed: int = 0,
) -> list[Bag]:
    """NA-labeled bags from sentences pairing entities of irrelevant groups.

    irrelevant_groups must be disjoint from every slot group in the
    schema, so the pooled pairs cannot express a target relation. The
    pool is uniformly subsampled to pool_size bags with the given seed;
    a smaller pool is returned whole with a warning.
    """
    irrelevant = set(irrelevant_groups)
    clash = irrelevant & schema.slot_groups()
    if clash:
        raise ValidationError(
            f"irrelevant_groups overlap schema slot groups: {sorted(clash)}"
        )
    acc = _BagAccumulator()
    for d, doc in enumerate(corpus):
        for s, section in enumerate(doc.sections):
            for i, sentence in enumerate(section.sentences):
                mentions = [
                    m
                    for m in find_mentions(sentence.tokens, lexicon)
                    if lexicon.group_of(m.cui) in irrelevant
                ]
                if len(mentions) < 2:
                    continue
                pairs = [
                    (a, b)
                    for ai, a in enumerate(mentions)
                    for b in mentions[ai + 1 :]
                    if a.cui != b.cui
                ]
                if not pairs:
                    continue
                first, second = min(
                    pairs, key=lambda p: (p[1].start - p[0].end, p[0].start, p[1].start)
                )
                inst = _short_instance(doc, s, i, sentence, first, second, lexicon)
                acc.add(first.cui, NA_LABEL, second.cui, inst)
    bags = acc.bags()
    if len(bags) <= pool_size:
        if len(bags) < pool_size:
            logger.warning(
                "negative pool has %d bags, %d requested; returning all",
                len(bags),
                pool_size,
            )
        return bags
    rng = np.random.default_rng(seed)
    chosen = sorted(rng.choice(len(bags), size=pool_size, replace=False).tolist())
    return [bags[i] for i in chosen]


def generate_type1_negatives(
    positives,
    pool,
    lexicon: Lexicon,
    schema: RelationSchema,
    seed: int = 0,
) -> list[Bag]:
    """Middle-text replacement negatives, one per positive instance.

    Each positive instance keeps its head/tail text, takes the middle
    text of a uniform-random pool instance, and swaps both entities for
    random lexicon entities of the original entities' semantic groups
    (always two distinct concepts). Output bags are NA-labeled, grouped
    by the replaced entity pair.
    """
    if not pool:
        raise ValidationError("type 1 generation requires a nonempty donor pool")
    donors = [inst for bag in pool for inst in bag.instances]
    required_groups = set()
    for bag in positives:
        for inst in bag.instances:
            required_groups.add(inst.e1_group)
            required_groups.add(inst.e2_group)
    by_group = {g: lexicon.concepts_in_group(g) for g in sorted(required_groups)}
    for group, concepts in by_group.items():
        if len(concepts) < 2:
            raise ValidationError(
                f"lexicon has {len(concepts)} entities in group '{group}'; need >= 2"
            )
    rng = np.random.default_rng(seed)
    acc = _BagAccumulator()
    for bag in positives:
        for inst in bag.instances:
            donor = donors[int(rng.integers(len(donors)))]
            donor_middle = donor.decomposition[2]
            g1 = by_group[inst.e1_group]
            g2 = by_group[inst.e2_group]
            e1_concept = g1[int(rng.integers(len(g1)))]
            e2_concept = g2[int(rng.integers(len(g2)))]
            while e2_concept.cui == e1_concept.cui:
                e2_concept = g2[int(rng.integers(len(g2)))]
            head, _, _, _, tail = inst.decomposition
            e1_tokens = tuple(tokenize(e1_concept.preferred_name))
            e2_tokens = tuple(tokenize(e2_concept.preferred_name))
            sentence = head + e1_tokens + donor_middle + e2_tokens + tail
            e1_start = len(head)
            e2_start = e1_start + len(e1_tokens) + len(donor_middle)
            e1 = Mention(cui=e1_concept.cui, token_span=(e1_start, e1_start + len(e1_tokens)))
            e2 = Mention(cui=e2_concept.cui, token_span=(e2_start, e2_start + len(e2_tokens)))
            negative = Instance(
                doc_id=inst.doc_id,
                section_index=inst.section_index,
                sentence_index=inst.sentence_index,
                title_tokens=inst.title_tokens,
                heading_tokens=inst.heading_tokens,
                sentence_tokens=sentence,
                e1=e1,
                e2=e2,
                e1_group=e1_concept.semantic_group,
                e2_group=e2_concept.semantic_group,
                distance=SHORT,
                decomposition=(head, e1_tokens, donor_middle, e2_tokens, tail),
            )
            acc.add(e1.cui, NA_LABEL, e2.cui, negative)
    return acc.bags()


def sentence_embedding(tokens, word_table: WordEmbeddingTable) -> np.ndarray:
    """Unweighted mean of in-vocabulary token vectors (zeros if none)."""
    vecs = [word_table.get(t) for t in tokens]
    vecs = [v for v in vecs if v is not None]
    if not vecs:
        return np.zeros(word_table.dim, dtype=np.float64)
    return np.mean(np.stack(vecs), axis=0)


def bag_embedding(bag: Bag, word_table: WordEmbeddingTable) -> np.ndarray:
    """Mean of the bag's per-sentence embeddings (unmasked tokens)."""
    embs = [sentence_embedding(inst.sentence_tokens, word_table) for inst in bag.instances]
    return np.mean(np.stack(embs), axis=0)


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValidationError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def select_type2_negatives(
    pool,
    positives,
    k: int,
    word_table: WordEmbeddingTable,
) -> list[Bag]:
    """Hardest pool bags: top-k by maximum cosine similarity to any
    positive bag embedding, descending, ties kept in pool order."""
    if k > len(pool):
        logger.warning("pool has %d bags, %d requested; returning all", len(pool), k)
        k = len(pool)
    pos_embs = [bag_embedding(b, word_table) for b in positives]
    scores = []
    for bag in pool:
        emb = bag_embedding(bag, word_table)
        best = max((cosine_similarity(emb, p) for p in pos_embs), default=0.0)
        scores.append(best)
    order = sorted(range(len(pool)), key=lambda i: -scores[i])
    return [pool[i] for i in order[:k]]


@dataclass
class Dataset:
    """Labeled bags with a per-bag train/test split.

    No unordered entity pair appears in both splits, and the
    positive:negative bag ratio stays within [0.9, 1.1].
    """

    bags: tuple[Bag, ...]
    split: tuple[str, ...]
    negative_kind: str
    seed: int
    label_order: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.bags) != len(self.split):
            raise ValidationError("split must assign every bag")
        train_pairs = {b.pair for b, s in zip(self.bags, self.split) if s == "train"}
        test_pairs = {b.pair for b, s in zip(self.bags, self.split) if s == "test"}
        leak = train_pairs & test_pairs
        if leak:
            raise ValidationError(f"entity pair(s) in both splits: {sorted(map(sorted, leak))}")
        n_pos = sum(1 for b in self.bags if b.label != NA_LABEL)
        n_neg = len(self.bags) - n_pos
        if n_neg:
            ratio = n_pos / n_neg
            if not 0.9 <= ratio <= 1.1:
                raise ValidationError(f"positive:negative ratio {ratio:.3f} outside [0.9, 1.1]")

    def bags_in(self, split: str) -> list[Bag]:
        return [b for b, s in zip(self.bags, self.split) if s == split]

    def positive_keys(self) -> set[tuple[str, str, str]]:
        return {b.key for b in self.bags if b.label != NA_LABEL}


def _subsample(bags, count: int, rng) -> list[Bag]:
    if len(bags) <= count:
        return list(bags)
    chosen = sorted(rng.choice(len(bags), size=count, replace=False).tolist())
    return [bags[i] for i in chosen]


def _split_units(bags, split_fraction: float, rng) -> list[str]:
    """Assign bags to train/test at the unordered-pair level, keeping
    per-label train counts within one bag of split_fraction."""
    units: dict[frozenset, list[int]] = {}
    for idx, bag in enumerate(bags):
        units.setdefault(bag.pair, []).append(idx)
    unit_keys = sorted(units, key=lambda p: sorted(p))
    rng.shuffle(unit_keys)
    unit_keys.sort(key=lambda p: -len(units[p]))

    label_total: dict[str, int] = {}
    for bag in bags:
        label_total[bag.label] = label_total.get(bag.label, 0) + 1
    target = {l: split_fraction * c for l, c in label_total.items()}
    train_count = {l: 0 for l in label_total}

    assignment: dict[frozenset, str] = {}
    for key in unit_keys:
        labels = [bags[i].label for i in units[key]]
        stay = sum(abs(train_count[l] - target[l]) for l in set(labels))
        moved = dict(train_count)
        for l in labels:
            moved[l] += 1
        go = sum(abs(moved[l] - target[l]) for l in set(labels))
        if go <= stay:
            assignment[key] = "train"
            train_count = moved
        else:
            assignment[key] = "test"

    # Local repair: flip whole units while any label strays more than one
    # bag from its target.
    for _ in range(len(unit_keys)):
        deviation = {l: train_count[l] - target[l] for l in label_total}
        if max(abs(d) for d in deviation.values()) <= 1.0:
            break
        best_key = None
        best_gain = 0.0
        for key in unit_keys:
            sign = -1 if assignment[key] == "train" else 1
            labels = [bags[i].label for i in units[key]]
            before = sum(abs(deviation[l]) for l in set(labels))
            after = 0.0
            delta: dict[str, float] = {}
            for l in labels:
                delta[l] = delta.get(l, 0.0) + sign
            for l in set(labels):
                after += abs(deviation[l] + delta[l])
            gain = before - after
            if gain > best_gain + 1e-9:
                best_gain = gain
                best_key = key
        if best_key is None:
            break
        sign = -1 if assignment[best_key] == "train" else 1
        assignment[best_key] = "test" if sign < 0 else "train"
        for i in units[best_key]:
            train_count[bags[i].label] += sign

    return [assignment[bag.pair] for bag in bags]


def assemble_datasets(
    positives,
    type1_negs,
    type2_negs,
    kind: str,
    split_fraction: float = 0.8,
    seed: int = 0,
) -> Dataset:
    """Combine positives with one negative flavor (or a half/half mix)
    at ~1:1 and split train/test at the entity-pair level."""
    if kind not in ("type1", "type2", "mix"):
        raise ValidationError(f"unknown negative kind '{kind}'")
    positives = list(positives)
    if not positives:
        raise ValidationError("no positive bags supplied")
    n_pos = len(positives)
    minimum = math.ceil(n_pos / 1.1)
    rng = np.random.default_rng(seed)
    if kind == "type1":
        negatives = _subsample(list(type1_negs), n_pos, rng)
    elif kind == "type2":
        negatives = _subsample(list(type2_negs), n_pos, rng)
    else:
        n1 = (n_pos + 1) // 2
        negatives = _subsample(list(type1_negs), n1, rng)
        negatives += _subsample(list(type2_negs), n_pos - n1, rng)
    if len(negatives) < minimum:
        raise ValidationError(
            f"insufficient negatives for kind '{kind}': have {len(negatives)}, "
            f"need at least {minimum} for {n_pos} positives"
        )
    bags = tuple(positives) + tuple(negatives)
    split = _split_units(bags, split_fraction, rng)
    labels = sorted({b.label for b in bags} - {NA_LABEL}) + [NA_LABEL]
    return Dataset(
        bags=bags,
        split=tuple(split),
        negative_kind=kind,
        seed=seed,
        label_order=tuple(labels),
    )


# --- serialization -------------------------------------------------------


def _mention_to_dict(m: Mention) -> dict:
    return {"cui": m.cui, "span": list(m.token_span)}


def _mention_from_dict(d: dict) -> Mention:
    return Mention(cui=d["cui"], token_span=tuple(d["span"]))


def _instance_to_dict(inst: Instance) -> dict:
    return {
        "doc_id": inst.doc_id,
        "section_index": inst.section_index,
        "sentence_index": inst.sentence_index,
        "title_tokens": list(inst.title_tokens),
        "heading_tokens": list(inst.heading_tokens),
        "sentence_tokens": list(inst.sentence_tokens),
        "e1": _mention_to_dict(inst.e1),
        "e2": _mention_to_dict(inst.e2),
        "e1_group": inst.e1_group,
        "e2_group": inst.e2_group,
        "distance": inst.distance,
        "decomposition": [list(part) for part in inst.decomposition],
    }


def _instance_from_dict(d: dict) -> Instance:
    return Instance(
        doc_id=d["doc_id"],
        section_index=d["section_index"],
        sentence_index=d["sentence_index"],
        title_tokens=tuple(d["title_tokens"]),
        heading_tokens=tuple(d["heading_tokens"]),
        sentence_tokens=tuple(d["sentence_tokens"]),
        e1=_mention_from_dict(d["e1"]),
        e2=_mention_from_dict(d["e2"]),
        e1_group=d["e1_group"],
        e2_group=d["e2_group"],
        distance=d["distance"],
        decomposition=tuple(tuple(part) for part in d["decomposition"]),
    )


def _bag_to_dict(bag: Bag) -> dict:
    return {
        "head_cui": bag.head_cui,
        "tail_cui": bag.tail_cui,
        "label": bag.label,
        "instances": [_instance_to_dict(i) for i in bag.instances],
    }


def _bag_from_dict(d: dict) -> Bag:
    return Bag(
        head_cui=d["head_cui"],
        tail_cui=d["tail_cui"],
        label=d["label"],
        instances=tuple(_instance_from_dict(i) for i in d["instances"]),
    )


def save_bags(bags, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format_version": BAGS_FORMAT_VERSION, "content": "bags"}, sort_keys=True))
        fh.write("\n")
        for bag in bags:
            fh.write(json.dumps(_bag_to_dict(bag), sort_keys=True, ensure_ascii=False))
            fh.write("\n")


def load_bags(path) -> list[Bag]:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("content") != "bags":
            raise FormatError(f"not a bags file: {path}")
        if header.get("format_version") != BAGS_FORMAT_VERSION:
            raise FormatError(f"unsupported bags format_version {header.get('format_version')}")
        return [_bag_from_dict(json.loads(line)) for line in fh if line.strip()]


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "format_version": DATASET_FORMAT_VERSION,
            "content": "dataset",
            "negative_kind": dataset.negative_kind,
            "seed": dataset.seed,
            "label_order": list(dataset.label_order),
        }
        fh.write(json.dumps(header, sort_keys=True))
        fh.write("\n")
        for bag, split in zip(dataset.bags, dataset.split):
            record = _bag_to_dict(bag)
            record["split"] = split
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False))
            fh.write("\n")


def load_dataset(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("content") != "dataset":
            raise FormatError(f"not a dataset file: {path}")
        if header.get("format_version") != DATASET_FORMAT_VERSION:
            raise FormatError(
                f"unsupported dataset format_version {header.get('format_version')}"
            )
        bags = []
        split = []
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            split.append(record.pop("split"))
            bags.append(_bag_from_dict(record))
    return Dataset(
        bags=tuple(bags),
        split=tuple(split),
        negative_kind=header["negative_kind"],
        seed=header["seed"],
        label_order=tuple(header["label_order"]),
    )
