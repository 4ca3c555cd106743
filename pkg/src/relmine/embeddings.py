"""Word and concept embedding tables.

Word vectors come from a text file or from the built-in skip-gram
trainer; concept (CUI) vectors come from a text file plus a hypernym
fallback ladder over a (child, parent) hierarchy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .corpus import CorpusStore, heading_path_string
from .errors import FormatError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_WORD_DIM = 128
DEFAULT_CUI_DIM = 1000


def _write_table(path, vectors: dict[str, np.ndarray], dim: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vectors)} {dim}\n")
        for key, vec in vectors.items():
            fh.write(key + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def _read_table(path) -> tuple[dict[str, np.ndarray], int]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FormatError("embedding file needs a '<count> <dim>' header line")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise FormatError("embedding header must hold two integers") from None
        vectors: dict[str, np.ndarray] = {}
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            key = parts[0]
            if len(parts) - 1 != dim:
                raise FormatError(
                    f"entry '{key}' has {len(parts) - 1} values, expected {dim}"
                )
            vectors[key] = np.array([float(x) for x in parts[1:]], dtype=np.float64)
    if len(vectors) != count:
        raise FormatError(f"header declared {count} entries, file has {len(vectors)}")
    return vectors, dim


@dataclass
class WordEmbeddingTable:
    """token -> vector(d_e) mapping; all vectors share one dimension."""

    vectors: dict[str, np.ndarray]
    dim: int = DEFAULT_WORD_DIM

    def __post_init__(self) -> None:
        for token, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise ValidationError(
                    f"token '{token}' has shape {vec.shape}, expected ({self.dim},)"
                )

    def get(self, token: str) -> np.ndarray | None:
        return self.vectors.get(token)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def save(self, path) -> None:
        _write_table(path, self.vectors, self.dim)


def load_word_embeddings(path) -> WordEmbeddingTable:
    vectors, dim = _read_table(path)
    return WordEmbeddingTable(vectors=vectors, dim=dim)


@dataclass
class CuiEmbeddingTable:
    """cui -> vector(d_k) mapping with a hypernym fallback ladder.

    Lookups for uncovered CUIs walk (child, parent) edges breadth-first
    and return the first covered ancestor at minimal depth (ties broken
    toward the smaller CUI); with no covered ancestor, the mean of all
    stored vectors is returned. Lookups are memoized.
    """

    vectors: dict[str, np.ndarray]
    dim: int = DEFAULT_CUI_DIM
    hierarchy: tuple[tuple[str, str], ...] = ()
    global_mean: np.ndarray = field(init=False)
    _parents: dict[str, list[str]] = field(init=False, repr=False)
    _cache: dict[str, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for cui, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise ValidationError(
                    f"cui '{cui}' has shape {vec.shape}, expected ({self.dim},)"
                )
        if self.vectors:
            self.global_mean = np.mean(
                np.stack(list(self.vectors.values())), axis=0
            )
        else:
            logger.warning("empty CUI table: global mean falls back to zeros")
            self.global_mean = np.zeros(self.dim, dtype=np.float64)
        self._parents = {}
        for child, parent in self.hierarchy:
            self._parents.setdefault(child, []).append(parent)
        self._cache = {}

    def lookup(self, cui: str) -> np.ndarray:
        """Total lookup: exact entry, nearest covered ancestor, or global mean."""
        exact = self.vectors.get(cui)
        if exact is not None:
            return exact
        cached = self._cache.get(cui)
        if cached is not None:
            return cached
        result = self._ascend(cui)
        self._cache[cui] = result
        return result

    def _ascend(self, cui: str) -> np.ndarray:
        visited = {cui}
        frontier = [cui]
        while frontier:
            next_level: list[str] = []
            for node in frontier:
                for parent in self._parents.get(node, ()):
                    if parent not in visited:
                        visited.add(parent)
                        next_level.append(parent)
            covered = sorted(p for p in next_level if p in self.vectors)
            if covered:
                return self.vectors[covered[0]]
            frontier = next_level
        return self.global_mean

    def save(self, path) -> None:
        _write_table(path, self.vectors, self.dim)


def load_cui_embeddings(path, hierarchy=()) -> CuiEmbeddingTable:
    vectors, dim = _read_table(path)
    return CuiEmbeddingTable(vectors=vectors, dim=dim, hierarchy=tuple(hierarchy))


def cui_embedding(cui: str, table: CuiEmbeddingTable) -> np.ndarray:
    """Vector for a CUI with hypernym/global-mean fallback (total function)."""
    return table.lookup(cui)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _token_streams(corpus: CorpusStore):
    for doc in corpus:
        if doc.title_tokens:
            yield doc.title_tokens
        for section in doc.sections:
            heading = heading_path_string(section)
            if heading:
                yield heading
            for sentence in section.sentences:
                yield sentence.tokens


def train_skipgram(
    corpus: CorpusStore,
    d_e: int = DEFAULT_WORD_DIM,
    window: int = 5,
    negatives: int = 5,
    epochs: int = 5,
    seed: int = 0,
    learning_rate: float = 0.025,
    min_count: int = 1,
) -> WordEmbeddingTable:
    """Train skip-gram word vectors with negative sampling.

    Noise words are drawn from the unigram distribution raised to 0.75.
    Single-threaded with a fixed update order, so results are
    deterministic for a given seed; epochs=0 returns the seeded random
    initialization.
    """
    streams = [list(s) for s in _token_streams(corpus)]
    counts: dict[str, int] = {}
    for tokens in streams:
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
    vocab = sorted(tok for tok, c in counts.items() if c >= min_count)
    if not vocab:
        raise ValidationError("corpus has no tokens above min_count; vocabulary empty")
    index = {tok: i for i, tok in enumerate(vocab)}
    V = len(vocab)

    rng = np.random.default_rng(seed)
    w_in = (rng.random((V, d_e)) - 0.5) / d_e
    w_out = np.zeros((V, d_e), dtype=np.float64)

    freq = np.array([counts[tok] for tok in vocab], dtype=np.float64) ** 0.75
    noise_cdf = np.cumsum(freq / freq.sum())

    for _ in range(epochs):
        for tokens in streams:
            ids = [index[t] for t in tokens if t in index]
            for pos, center in enumerate(ids):
                lo = max(0, pos - window)
                hi = min(len(ids), pos + window + 1)
                contexts = [ids[k] for k in range(lo, hi) if k != pos]
                if not contexts:
                    continue
                v = w_in[center]
                grad_v = np.zeros(d_e)
                for ctx in contexts:
                    draws = np.searchsorted(noise_cdf, rng.random(negatives))
                    targets = [ctx] + [int(d) for d in draws if int(d) != ctx]
                    labels = np.zeros(len(targets))
                    labels[0] = 1.0
                    u = w_out[targets]
                    scores = _sigmoid(u @ v)
                    g = learning_rate * (labels - scores)
                    grad_v += g @ u
                    w_out[targets] += np.outer(g, v)
                w_in[center] += grad_v
    vectors = {tok: w_in[index[tok]].copy() for tok in vocab}
    return WordEmbeddingTable(vectors=vectors, dim=d_e)
