"""Documents to unit-length TF-IDF vectors, plus the on-disk formats."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from sskm.sparsevec import SparseVector, normalize

MATRIX_MAGIC = "%%sparse-unit-matrix"
DEFAULT_MAX_DF = 0.5

_TOKEN_RE = re.compile(r"[^\W_]+")


class CorpusFormatError(ValueError):
    """Malformed JSONL or matrix file; the message names the offending line."""


def tokenize(text: str) -> list[str]:
    """Lowercase and split on every non-alphanumeric character."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Vocabulary:
    term_to_dim: dict[Hashable, int]
    doc_freq: list[int]
    n_docs: int

    def __len__(self):
        return len(self.doc_freq)

    @property
    def terms(self) -> list:
        out = [None] * len(self.term_to_dim)
        for t, d in self.term_to_dim.items():
            out[d] = t
        return out

    def idf(self, dim: int) -> float:
        return math.log(self.n_docs / self.doc_freq[dim])

    def save(self, path) -> None:
        payload = {"n_docs": self.n_docs, "terms": self.terms, "doc_freq": self.doc_freq}
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path) -> Vocabulary:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        terms = payload["terms"]
        return cls({t: i for i, t in enumerate(terms)}, list(payload["doc_freq"]),
                   int(payload["n_docs"]))


def build_vocabulary(docs: Sequence[Sequence[Hashable]],
                     stop_words: Iterable[Hashable] = (),
                     max_df_ratio: float = DEFAULT_MAX_DF) -> Vocabulary:
    """Count document frequencies and assign dims in first-occurrence order.

    Terms listed in ``stop_words`` or appearing in more than
    ``max_df_ratio * n_docs`` documents are dropped.
    """
    if not docs:
        raise ValueError("empty corpus")
    if not 0.0 < max_df_ratio <= 1.0:
        raise ValueError(f"max_df_ratio must be in (0, 1], got {max_df_ratio}")
    stop = set(stop_words)
    df: Counter = Counter()
    for doc in docs:
        # dict keeps first-occurrence order, Counter.update preserves it
        df.update(dict.fromkeys(doc, 1))
    n = len(docs)
    term_to_dim: dict[Hashable, int] = {}
    doc_freq: list[int] = []
    for term, count in df.items():
        if term in stop or count / n > max_df_ratio:
            continue
        term_to_dim[term] = len(doc_freq)
        doc_freq.append(count)
    if not doc_freq:
        raise ValueError("empty vocabulary")
    return Vocabulary(term_to_dim, doc_freq, n)


def tfidf_weights(doc: Sequence[Hashable], vocab: Vocabulary) -> SparseVector:
    """Unnormalized ``tf * ln(n_docs / df)`` weights; zero weights are left out."""
    tf: Counter = Counter()
    for term in doc:
        dim = vocab.term_to_dim.get(term)
        if dim is not None:
            tf[dim] += 1
    dims = []
    weights = []
    for dim in sorted(tf):
        w = tf[dim] * vocab.idf(dim)
        if w != 0.0:
            dims.append(dim)
            weights.append(w)
    return SparseVector(dims, weights, len(vocab))


def vectorize(doc: Sequence[Hashable], vocab: Vocabulary) -> SparseVector | None:
    """Unit-length TF-IDF vector, or None when no weighted term remains."""
    v = tfidf_weights(doc, vocab)
    if v.nnz == 0:
        return None
    return normalize(v)


@dataclass
class CorpusMatrix:
    """Unit-length document vectors (CSR rows) with their ids.

    ``dropped`` records ids of documents that vectorized to nothing.
    """

    matrix: sp.csr_matrix
    doc_ids: list[str]
    dropped: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.matrix = as_csr(self.matrix)
        if len(self.doc_ids) != self.matrix.shape[0]:
            raise ValueError("doc_ids length does not match the number of rows")

    def __len__(self):
        return self.matrix.shape[0]

    @property
    def dims(self) -> int:
        return self.matrix.shape[1]

    @property
    def vectors(self) -> list[SparseVector]:
        m = self.matrix
        return [SparseVector(m.indices[m.indptr[i]:m.indptr[i + 1]],
                             m.data[m.indptr[i]:m.indptr[i + 1]], self.dims)
                for i in range(m.shape[0])]

    @classmethod
    def from_vectors(cls, vectors: Sequence[SparseVector], doc_ids=None,
                     n_dims: int | None = None, dropped=()) -> CorpusMatrix:
        if n_dims is None:
            n_dims = max((v.n_dims for v in vectors), default=0)
        indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([v.nnz for v in vectors])
        indices = (np.concatenate([v.dims for v in vectors]) if vectors
                   else np.empty(0, np.int64))
        data = (np.concatenate([v.weights for v in vectors]) if vectors
                else np.empty(0))
        m = sp.csr_matrix((data, indices, indptr), shape=(len(vectors), n_dims))
        if doc_ids is None:
            doc_ids = [str(i) for i in range(len(vectors))]
        return cls(m, list(doc_ids), list(dropped))

    def __eq__(self, other):
        if not isinstance(other, CorpusMatrix):
            return NotImplemented
        a, b = self.matrix, other.matrix
        return (a.shape == b.shape
                and np.array_equal(a.indptr, b.indptr)
                and np.array_equal(a.indices, b.indices)
                and np.array_equal(a.data, b.data)
                and self.doc_ids == other.doc_ids
                and self.dropped == other.dropped)


def as_csr(m) -> sp.csr_matrix:
    """float64 CSR with sorted dims per row."""
    m = sp.csr_matrix(m, dtype=np.float64)
    if not m.has_sorted_indices:
        m = m.sorted_indices()
    return m


def csr_arrays(m: sp.csr_matrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(indptr, indices, data)`` as int64/int64/float64 arrays for the kernels.

    scipy may shrink index arrays to int32, so the cast happens here.
    """
    return (m.indptr.astype(np.int64, copy=False),
            m.indices.astype(np.int64, copy=False),
            m.data.astype(np.float64, copy=False))


def build_corpus(docs: Sequence[tuple[str, Sequence[Hashable]]],
                 stop_words: Iterable[Hashable] = (),
                 max_df_ratio: float = DEFAULT_MAX_DF) -> tuple[CorpusMatrix, Vocabulary]:
    """Vectorize ``(doc_id, tokens)`` pairs against their own vocabulary."""
    vocab = build_vocabulary([toks for _, toks in docs], stop_words, max_df_ratio)
    kept, ids, dropped = [], [], []
    for doc_id, toks in docs:
        v = vectorize(toks, vocab)
        if v is None:
            dropped.append(doc_id)
        else:
            kept.append(v)
            ids.append(doc_id)
    if not kept:
        raise ValueError("every document vectorized to an empty vector")
    return CorpusMatrix.from_vectors(kept, ids, len(vocab), dropped), vocab


def load_jsonl(path) -> list[tuple[str, str]]:
    """Read ``{"id": ..., "text": ...}`` objects, one per line; blank lines skipped."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise CorpusFormatError(f"line {lineno}: expected a JSON object")
            for key in ("id", "text"):
                if not isinstance(obj.get(key), str):
                    raise CorpusFormatError(f"line {lineno}: missing string field {key!r}")
            out.append((obj["id"], obj["text"]))
    return out


def load_stop_words(path) -> set[str]:
    with open(path, encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}


def ids_path(path) -> Path:
    return Path(str(path) + ".ids")


def dropped_path(path) -> Path:
    return Path(str(path) + ".dropped")


def write_matrix(path, corpus: CorpusMatrix) -> None:
    """Write the coordinate text file plus ``.ids`` (and ``.dropped``) sidecars."""
    m = corpus.matrix
    for doc_id in corpus.doc_ids + corpus.dropped:
        if "\n" in doc_id or "\r" in doc_id:
            raise ValueError(f"document id {doc_id!r} contains a line break")
    rows = np.repeat(np.arange(m.shape[0]), np.diff(m.indptr))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{MATRIX_MAGIC} {m.shape[0]} {m.shape[1]} {m.nnz}\n")
        fh.writelines(f"{r} {d} {w:.17g}\n"
                      for r, d, w in zip(rows.tolist(), m.indices.tolist(), m.data.tolist()))
    ids_path(path).write_text("".join(f"{i}\n" for i in corpus.doc_ids), encoding="utf-8")
    if corpus.dropped:
        dropped_path(path).write_text("".join(f"{i}\n" for i in corpus.dropped),
                                      encoding="utf-8")
    elif dropped_path(path).exists():
        dropped_path(path).unlink()


def load_matrix(path, unit_tol: float = 1e-9) -> CorpusMatrix:
    """Parse a file written by :func:`write_matrix`, validating every entry."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != MATRIX_MAGIC:
            raise CorpusFormatError(f"line 1: expected '{MATRIX_MAGIC} <rows> <dims> <nnz>'")
        try:
            n_rows, n_dims, nnz = (int(t) for t in header[1:])
        except ValueError:
            raise CorpusFormatError("line 1: header counts must be integers") from None
        indptr = np.zeros(n_rows + 1, dtype=np.int64)
        indices = np.empty(nnz, dtype=np.int64)
        data = np.empty(nnz, dtype=np.float64)
        n = 0
        prev = (-1, -1)
        for lineno, line in enumerate(fh, 2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise CorpusFormatError(f"line {lineno}: expected 'row dim weight'")
            try:
                r, d, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise CorpusFormatError(f"line {lineno}: unparsable entry") from None
            if not (0 <= r < n_rows and 0 <= d < n_dims):
                raise CorpusFormatError(
                    f"line {lineno}: entry ({r}, {d}) out of bounds for {n_rows}x{n_dims}")
            if (r, d) <= prev:
                raise CorpusFormatError(f"line {lineno}: entries must be sorted by row, dim")
            if w == 0.0 or not math.isfinite(w):
                raise CorpusFormatError(f"line {lineno}: weight must be finite and nonzero")
            if n >= nnz:
                raise CorpusFormatError(f"line {lineno}: more entries than header nnz={nnz}")
            indices[n] = d
            data[n] = w
            indptr[r + 1] += 1
            n += 1
            prev = (r, d)
    if n != nnz:
        raise CorpusFormatError(f"header declares nnz={nnz} but file has {n} entries")
    np.cumsum(indptr, out=indptr)
    m = sp.csr_matrix((data, indices, indptr), shape=(n_rows, n_dims))
    norms = np.sqrt(np.asarray(m.multiply(m).sum(axis=1)).ravel())
    bad = np.flatnonzero(np.abs(norms - 1.0) > unit_tol)
    if bad.size:
        raise CorpusFormatError(f"row {bad[0]} is not unit length (norm {norms[bad[0]]!r})")
    ids = ids_path(path).read_text(encoding="utf-8").splitlines()
    if len(ids) != n_rows:
        raise CorpusFormatError(f"{ids_path(path)} has {len(ids)} ids for {n_rows} rows")
    dp = dropped_path(path)
    dropped = dp.read_text(encoding="utf-8").splitlines() if dp.exists() else []
    return CorpusMatrix(m, ids, dropped)


def zipf_token_docs(n_docs: int, n_terms: int, avg_nnz: float, zipf_s: float = 1.0,
                    seed: int = 0) -> list[tuple[str, list[int]]]:
    """Draw token lists whose terms follow a Zipf law over ``n_terms`` ranks.

    Each document gets ``1 + Poisson(avg_nnz - 1)`` distinct terms (capped at
    ``n_terms``); tokens are drawn with replacement until that many distinct
    terms appear, so frequent terms also get higher term frequencies.
    """
    if n_docs < 1 or n_terms < 1 or avg_nnz < 1:
        raise ValueError("n_docs, n_terms and avg_nnz must be positive")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(1.0 / np.arange(1, n_terms + 1) ** zipf_s)
    cdf /= cdf[-1]
    lengths = np.minimum(1 + rng.poisson(avg_nnz - 1, size=n_docs), n_terms)
    docs = []
    for i, length in enumerate(lengths.tolist()):
        tokens: list[int] = []
        distinct: set[int] = set()
        while len(distinct) < length:
            batch = np.searchsorted(cdf, rng.random(2 * length), side="right")
            for t in np.minimum(batch, n_terms - 1).tolist():
                tokens.append(t)
                distinct.add(t)
                if len(distinct) == length:
                    break
        docs.append((f"doc{i}", tokens))
    return docs


def synthetic_corpus(n_docs: int, n_terms: int, avg_nnz: float, zipf_s: float = 1.0,
                     seed: int = 0, max_df_ratio: float = DEFAULT_MAX_DF) -> CorpusMatrix:
    """Zipf token documents pushed through the regular TF-IDF pipeline."""
    docs = zipf_token_docs(n_docs, n_terms, avg_nnz, zipf_s, seed)
    corpus, _ = build_corpus(docs, max_df_ratio=max_df_ratio)
    return corpus


def parse_synthetic_spec(spec: str) -> dict:
    """Parse ``"N,V,avg_nnz,zipf_s,seed"`` into keyword arguments."""
    parts = spec.split(",")
    if len(parts) != 5:
        raise ValueError("synthetic spec must be N,V,avg_nnz,zipf_s,seed")
    n, v, avg, s, seed = parts
    return {"n_docs": int(n), "n_terms": int(v), "avg_nnz": float(avg),
            "zipf_s": float(s), "seed": int(seed)}
