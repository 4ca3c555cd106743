"""Relation triplets: acquisition, hierarchy extension, and filtering."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

from .corpus import tokenize
from .errors import FormatError, ValidationError
from .lexicon import Lexicon, find_mentions

logger = logging.getLogger(__name__)

# Reserved label for synthesized non-relation samples.
NA_LABEL = "NA"

_TRIPLET_COLUMNS = ["head_cui", "relation", "tail_cui", "source"]
_HIERARCHY_COLUMNS = ["child_cui", "parent_cui"]


@dataclass(frozen=True)
class Triplet:
    head_cui: str
    relation: str
    tail_cui: str
    source: str = ""

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.head_cui, self.relation, self.tail_cui)


@dataclass(frozen=True)
class RelationSpec:
    label: str
    directed: bool
    head_group: str
    tail_group: str
    inverse_of: str | None = None


@dataclass
class RelationSchema:
    """The declared relation labels, their direction, allowed semantic
    groups for head/tail slots, and inverse pairings. The reserved NA
    label is always present and carries no slot constraint."""

    relations: tuple[RelationSpec, ...]

    def __post_init__(self) -> None:
        seen = set()
        by_label = {}
        for spec in self.relations:
            if spec.label == NA_LABEL:
                raise ValidationError("NA is reserved and cannot be declared")
            if spec.label in seen:
                raise ValidationError(f"duplicate relation label '{spec.label}'")
            seen.add(spec.label)
            by_label[spec.label] = spec
        for spec in self.relations:
            if spec.inverse_of is None:
                continue
            if not spec.directed:
                raise ValidationError(
                    f"undirected relation '{spec.label}' cannot declare an inverse"
                )
            other = by_label.get(spec.inverse_of)
            if other is None:
                raise ValidationError(
                    f"relation '{spec.label}': unknown inverse '{spec.inverse_of}'"
                )
            if other.inverse_of != spec.label:
                raise ValidationError(
                    f"inverse_of must be symmetric: {spec.label} <-> {spec.inverse_of}"
                )
        self._by_label = by_label

    @property
    def labels(self) -> list[str]:
        """All labels including the reserved NA, in declaration order."""
        return [spec.label for spec in self.relations] + [NA_LABEL]

    def spec_for(self, label: str) -> RelationSpec:
        spec = self._by_label.get(label)
        if spec is None:
            raise ValidationError(f"unknown relation label '{label}'")
        return spec

    def has_label(self, label: str) -> bool:
        return label in self._by_label

    def slot_groups(self) -> set[str]:
        groups: set[str] = set()
        for spec in self.relations:
            groups.add(spec.head_group)
            groups.add(spec.tail_group)
        return groups

    @classmethod
    def from_dict(cls, data: dict) -> "RelationSchema":
        if "relations" not in data:
            raise ValidationError("schema definition needs a 'relations' list")
        specs = []
        for entry in data["relations"]:
            for key in ("label", "directed", "head_group", "tail_group"):
                if key not in entry:
                    raise ValidationError(f"relation entry missing '{key}': {entry}")
            unknown = set(entry) - {
                "label", "directed", "head_group", "tail_group", "inverse_of",
            }
            if unknown:
                raise ValidationError(
                    f"unknown relation field(s) {sorted(unknown)} in {entry}"
                )
            specs.append(
                RelationSpec(
                    label=entry["label"],
                    directed=bool(entry["directed"]),
                    head_group=entry["head_group"],
                    tail_group=entry["tail_group"],
                    inverse_of=entry.get("inverse_of"),
                )
            )
        return cls(relations=tuple(specs))


@dataclass(frozen=True)
class SemiStructuredPage:
    """A parsed template page: title plus (heading, list entries) sections."""

    title: str
    sections: tuple[tuple[str, tuple[str, ...]], ...]


class TripletStore:
    """Deduplicated ordered collection of triplets."""

    def __init__(self, triplets=()):
        self._triplets: list[Triplet] = []
        self._keys: set[tuple[str, str, str]] = set()
        for t in triplets:
            self.add(t)

    def add(self, triplet: Triplet) -> bool:
        """Add unless the (head, relation, tail) key is already present."""
        if triplet.head_cui == triplet.tail_cui:
            raise ValidationError(
                f"self-loop triplet {triplet.head_cui} -> {triplet.tail_cui}"
            )
        if triplet.key in self._keys:
            return False
        self._keys.add(triplet.key)
        self._triplets.append(triplet)
        return True

    def __len__(self) -> int:
        return len(self._triplets)

    def __iter__(self):
        return iter(self._triplets)

    def __contains__(self, key) -> bool:
        if isinstance(key, Triplet):
            key = key.key
        return key in self._keys

    def keys(self) -> set[tuple[str, str, str]]:
        return set(self._keys)


def load_triplets(path, schema: RelationSchema) -> TripletStore:
    """Load a triplet TSV (head_cui, relation, tail_cui, source; header
    row required). Rows with head == tail are skipped with a warning;
    unknown or reserved labels raise."""
    store = TripletStore()
    skipped = 0
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("triplet file is empty; header row required") from None
        if [h.strip() for h in header] != _TRIPLET_COLUMNS:
            raise FormatError(f"triplet header must be {_TRIPLET_COLUMNS}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(_TRIPLET_COLUMNS):
                raise FormatError(
                    f"line {line_no}: expected {len(_TRIPLET_COLUMNS)} columns, got {len(row)}"
                )
            head, relation, tail, source = (c.strip() for c in row)
            if relation == NA_LABEL:
                raise FormatError(f"line {line_no}: label NA is reserved")
            if not schema.has_label(relation):
                raise FormatError(f"line {line_no}: unknown relation '{relation}'")
            if head == tail:
                skipped += 1
                logger.warning("line %d: skipping self-loop triplet %s", line_no, head)
                continue
            store.add(Triplet(head, relation, tail, source))
    if skipped:
        logger.warning("skipped %d self-loop triplet row(s)", skipped)
    return store


def _match_heading(heading: str, patterns: dict[str, str]) -> str | None:
    """Case-insensitive exact or prefix ('pat*') heading match."""
    lowered = heading.strip().lower()
    for pattern, label in patterns.items():
        p = pattern.strip().lower()
        if p.endswith("*"):
            if lowered.startswith(p[:-1]):
                return label
        elif lowered == p:
            return label
    return None


def extract_from_semistructured(
    page: SemiStructuredPage,
    heading_to_relation: dict[str, str],
    lexicon: Lexicon,
    max_entry_tokens: int = 15,
) -> list[Triplet]:
    """Extract triplets from a template page.

    The first lexicon mention in the title supplies the head entity, a
    matched section heading supplies the relation, and mentions in that
    section's list entries supply the tails. Entries longer than
    max_entry_tokens are skipped as likely complex statements. Pages
    whose title has no lexicon mention are skipped with a diagnostic.
    """
    if not heading_to_relation:
        raise ValidationError("heading_to_relation mapping is empty")
    title_mentions = find_mentions(tokenize(page.title), lexicon)
    if not title_mentions:
        logger.warning("skipping page %r: no lexicon mention in title", page.title)
        return []
    head = title_mentions[0].cui
    out: list[Triplet] = []
    seen: set[tuple[str, str, str]] = set()
    for heading, entries in page.sections:
        label = _match_heading(heading, heading_to_relation)
        if label is None:
            continue
        for entry in entries:
            entry_tokens = tokenize(entry)
            if len(entry_tokens) > max_entry_tokens:
                continue
            for mention in find_mentions(entry_tokens, lexicon):
                if mention.cui == head:
                    continue
                key = (head, label, mention.cui)
                if key in seen:
                    continue
                seen.add(key)
                out.append(
                    Triplet(head, label, mention.cui, source=f"page:{page.title}")
                )
    return out


def _check_acyclic(parents: dict[str, list[str]]) -> None:
    """Raise ValidationError listing one cycle if the edge set has one."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color: dict[str, int] = {}
    for root in sorted(parents):
        if color.get(root, WHITE) != WHITE:
            continue
        stack = [(root, iter(parents.get(root, ())))]
        path = [root]
        color[root] = GRAY
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                state = color.get(nxt, WHITE)
                if state == GRAY:
                    cycle = path[path.index(nxt):] + [nxt]
                    raise ValidationError(
                        "hierarchy contains a cycle: " + " -> ".join(cycle)
                    )
                if state == WHITE:
                    color[nxt] = GRAY
                    stack.append((nxt, iter(parents.get(nxt, ()))))
                    path.append(nxt)
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()
                path.pop()


def _ancestor_sets(parents: dict[str, list[str]]) -> dict[str, set[str]]:
    memo: dict[str, set[str]] = {}

    def ancestors(node: str) -> set[str]:
        cached = memo.get(node)
        if cached is not None:
            return cached
        memo[node] = set()  # placeholder; graph is acyclic by now
        acc: set[str] = set()
        for parent in parents.get(node, ()):
            acc.add(parent)
            acc |= ancestors(parent)
        memo[node] = acc
        return acc

    for node in parents:
        ancestors(node)
    return memo


def extend_by_hierarchy(
    triplets: TripletStore,
    relation: str,
    hierarchy,
) -> TripletStore:
    """Extend one relation along the transitive closure of a hierarchy.

    For every stored (D, relation, A) and every A' reachable from A
    through (child, parent) edges, adds (D, relation, A'). Input triplets
    are retained; the hierarchy must be acyclic.
    """
    parents: dict[str, list[str]] = {}
    for child, parent in hierarchy:
        parents.setdefault(child, []).append(parent)
    _check_acyclic(parents)
    ancestors = _ancestor_sets(parents)
    out = TripletStore(triplets)
    for t in list(triplets):
        if t.relation != relation:
            continue
        for ancestor in sorted(ancestors.get(t.tail_cui, ())):
            if ancestor == t.head_cui:
                continue
            out.add(Triplet(t.head_cui, relation, ancestor, source="hierarchy"))
    return out


def load_hierarchy(path) -> list[tuple[str, str]]:
    """Load (child_cui, parent_cui) edges from TSV with a header row."""
    edges: list[tuple[str, str]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("hierarchy file is empty; header row required") from None
        if [h.strip() for h in header] != _HIERARCHY_COLUMNS:
            raise FormatError(
                f"hierarchy header must be {_HIERARCHY_COLUMNS}, got {header}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise FormatError(f"line {line_no}: expected 2 columns, got {len(row)}")
            edges.append((row[0].strip(), row[1].strip()))
    return edges


def filter_by_schema(
    triplets: TripletStore,
    schema: RelationSchema,
    lexicon: Lexicon,
    banned_semantic_types=frozenset(),
) -> TripletStore:
    """Drop triplets whose entities violate the relation's slot groups or
    carry a banned semantic type. Every CUI must be in the lexicon."""
    banned = set(banned_semantic_types)
    out = TripletStore()
    for t in triplets:
        head = lexicon.get(t.head_cui)
        tail = lexicon.get(t.tail_cui)
        if head is None:
            raise ValidationError(f"cui '{t.head_cui}' missing from lexicon")
        if tail is None:
            raise ValidationError(f"cui '{t.tail_cui}' missing from lexicon")
        if head.semantic_type in banned or tail.semantic_type in banned:
            continue
        spec = schema.spec_for(t.relation)
        if head.semantic_group != spec.head_group:
            continue
        if tail.semantic_group != spec.tail_group:
            continue
        out.add(t)
    return out


def save_triplets(store: TripletStore, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(_TRIPLET_COLUMNS)
        for t in store:
            writer.writerow([t.head_cui, t.relation, t.tail_cui, t.source])
