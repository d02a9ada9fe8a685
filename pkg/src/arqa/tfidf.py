"""Hashed n-gram TF-IDF index with exact cosine top-k search.

N-grams are hashed into ``hash_bins`` (a power of two) bins.  Each token is
hashed with a keyed 64-bit BLAKE2b digest; an n-gram hash folds its token
hashes left to right through a splitmix64 mixer, so the hash of an n-gram is
a function of its space-joined string alone.  Document rows hold raw tf times
smoothed idf, L2-normalized.
"""

from __future__ import annotations

import functools
import hashlib
import json
import math
import struct
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .analysis import AnalyzerConfig, analyze_terms

DEFAULT_HASH_BINS = 1 << 24
DEFAULT_HASH_SEED = 0x51A0_7F1D
MIN_HASH_BINS = 1 << 10

MAGIC = b"SQTF"
FORMAT_VERSION = 1
UNITS = ("article", "paragraph")

_U64 = np.uint64
_MASK64 = (1 << 64) - 1
_FOLD_MUL = 0x100000001B3


class IndexFormatError(Exception):
    """Base class for index file problems."""


class BadMagicError(IndexFormatError):
    pass


class VersionMismatchError(IndexFormatError):
    pass


class TruncatedIndexError(IndexFormatError):
    pass


class ChecksumError(IndexFormatError):
    pass


# -- hashing ---------------------------------------------------------------

@functools.lru_cache(maxsize=1 << 21)
def token_hash(token: str, seed: int = DEFAULT_HASH_SEED) -> int:
    key = (seed & _MASK64).to_bytes(8, "little")
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little")


def _mix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _mix64_np(x: np.ndarray) -> np.ndarray:
    x = x + _U64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> _U64(27))) * _U64(0x94D049BB133111EB)
    return x ^ (x >> _U64(31))


def ngram_hash(ngram: str, seed: int = DEFAULT_HASH_SEED) -> int:
    """64-bit hash of a space-joined n-gram (reference, scalar version)."""
    toks = ngram.split(" ")
    h = token_hash(toks[0], seed)
    for tok in toks[1:]:
        h = _mix64((h * _FOLD_MUL + token_hash(tok, seed)) & _MASK64)
    return h


def ngram_bin(ngram: str, hash_bins: int, seed: int = DEFAULT_HASH_SEED) -> int:
    return ngram_hash(ngram, seed) & (hash_bins - 1)


def token_hashes(text: str, cfg: AnalyzerConfig, seed: int = DEFAULT_HASH_SEED) -> np.ndarray:
    return np.fromiter((token_hash(t, seed) for t in analyze_terms(text, cfg)), dtype=_U64)


def ngram_bins(th: np.ndarray, ngram_range: Sequence[int], hash_bins: int) -> np.ndarray:
    """Bins of every n-gram (lo..hi) of a token-hash sequence, in n-major order."""
    lo, hi = ngram_range
    mask = _U64(hash_bins - 1)
    parts = []
    g = th
    with np.errstate(over="ignore"):
        for n in range(1, hi + 1):
            if n > 1:
                g = _mix64_np(g[:-1] * _U64(_FOLD_MUL) + th[n - 1:])
            if g.size == 0:
                break
            if n >= lo:
                parts.append(g & mask)
    if not parts:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(parts).astype(np.int64)


def _row_features(th: np.ndarray, ngram_range, hash_bins) -> tuple[np.ndarray, np.ndarray]:
    bins, counts = np.unique(ngram_bins(th, ngram_range, hash_bins), return_counts=True)
    return bins, counts.astype(np.float64)


def _featurize_chunk(args):
    texts, cfg, seed, hash_bins = args
    return [_row_features(token_hashes(t, cfg, seed), cfg.ngram_range, hash_bins) for t in texts]


# -- data types -------------------------------------------------------------

@dataclass(frozen=True)
class SparseVector:
    bins: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return int(self.bins.size)

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.bins.tolist(), self.weights.tolist()))


@dataclass(frozen=True)
class RetrievalHit:
    doc_id: str
    score: float


@dataclass(eq=False)
class TfidfIndex:
    analyzer: AnalyzerConfig
    hash_bins: int
    hash_seed: int
    idf: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    doc_ids: list[str]
    unit: str = "article"
    _csc: sp.csc_matrix | None = field(default=None, init=False, repr=False)
    _row_of: dict[str, int] | None = field(default=None, init=False, repr=False)

    @property
    def ngram_range(self) -> tuple[int, int]:
        return self.analyzer.ngram_range

    @property
    def analyzer_hash(self) -> bytes:
        return self.analyzer.digest()

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n_docs, self.hash_bins))

    def row(self, i: int) -> SparseVector:
        s, e = self.indptr[i], self.indptr[i + 1]
        return SparseVector(self.indices[s:e].copy(), self.data[s:e].copy())

    def row_of(self, doc_id: str) -> int:
        if self._row_of is None:
            self._row_of = {d: i for i, d in enumerate(self.doc_ids)}
        return self._row_of[doc_id]

    def _columns(self) -> sp.csc_matrix:
        if self._csc is None:
            self._csc = self.matrix().tocsc()
        return self._csc


# -- build / query ----------------------------------------------------------

def _check_bins(hash_bins: int) -> None:
    if hash_bins < MIN_HASH_BINS or hash_bins & (hash_bins - 1) or hash_bins > 1 << 32:
        raise ValueError(f"hash_bins must be a power of two in [2^10, 2^32], got {hash_bins}")


def build_index(
    docs: Iterable[tuple[str, str]],
    cfg: AnalyzerConfig | None = None,
    hash_bins: int = DEFAULT_HASH_BINS,
    *,
    unit: str = "article",
    seed: int = DEFAULT_HASH_SEED,
    workers: int = 1,
    warn_empty: bool = True,
) -> TfidfIndex:
    cfg = cfg or AnalyzerConfig()
    _check_bins(hash_bins)
    if unit not in UNITS:
        raise ValueError(f"unknown unit {unit!r}")
    doc_ids: list[str] = []
    texts: list[str] = []
    for doc_id, text in docs:
        doc_ids.append(doc_id)
        texts.append(text)
    if not doc_ids:
        raise ValueError("cannot build an index over zero documents")

    if workers > 1 and len(texts) > 1:
        size = max(1, math.ceil(len(texts) / (workers * 4)))
        chunks = [(texts[i:i + size], cfg, seed, hash_bins) for i in range(0, len(texts), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [r for part in pool.map(_featurize_chunk, chunks) for r in part]
    else:
        rows = _featurize_chunk((texts, cfg, seed, hash_bins))
    return assemble_index(doc_ids, rows, cfg, hash_bins, unit=unit, seed=seed, warn_empty=warn_empty)


def build_index_from_token_hashes(
    doc_ids: Sequence[str],
    hashes: Sequence[np.ndarray],
    cfg: AnalyzerConfig,
    hash_bins: int,
    *,
    unit: str = "article",
    seed: int = DEFAULT_HASH_SEED,
    warn_empty: bool = True,
) -> TfidfIndex:
    """Build from pre-analyzed documents (token hash arrays from `token_hashes`)."""
    _check_bins(hash_bins)
    if not doc_ids:
        raise ValueError("cannot build an index over zero documents")
    rows = [_row_features(th, cfg.ngram_range, hash_bins) for th in hashes]
    return assemble_index(list(doc_ids), rows, cfg, hash_bins, unit=unit, seed=seed, warn_empty=warn_empty)


def assemble_index(doc_ids, rows, cfg, hash_bins, *, unit, seed, warn_empty=True) -> TfidfIndex:
    n = len(rows)
    lens = np.fromiter((b.size for b, _ in rows), dtype=np.int64, count=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(lens, out=indptr[1:])
    if indptr[-1]:
        indices = np.concatenate([b for b, _ in rows])
        tf = np.concatenate([c for _, c in rows])
    else:
        indices = np.empty(0, dtype=np.int64)
        tf = np.empty(0, dtype=np.float64)

    empty = np.flatnonzero(lens == 0)
    if warn_empty and empty.size:
        shown = ", ".join(doc_ids[i] for i in empty[:5])
        warnings.warn(f"{empty.size} document(s) produced no features and will never match: {shown}", stacklevel=3)

    idf = np.zeros(hash_bins, dtype=np.float64)
    present, df = np.unique(indices, return_counts=True)
    idf[present] = np.log((1.0 + n) / (1.0 + df)) + 1.0

    data = tf * idf[indices]
    row_of_nnz = np.repeat(np.arange(n), lens)
    norms = np.sqrt(np.bincount(row_of_nnz, weights=data * data, minlength=n))
    if data.size:
        data /= norms[row_of_nnz]
    return TfidfIndex(
        analyzer=cfg,
        hash_bins=hash_bins,
        hash_seed=seed,
        idf=idf,
        indptr=indptr,
        indices=indices,
        data=data,
        doc_ids=list(doc_ids),
        unit=unit,
    )


def vectorize_query(question: str, index: TfidfIndex) -> SparseVector:
    th = token_hashes(question, index.analyzer, index.hash_seed)
    bins, tf = _row_features(th, index.ngram_range, index.hash_bins)
    w = tf * index.idf[bins]
    keep = w > 0
    bins, w = bins[keep], w[keep]
    if w.size:
        w = w / math.sqrt(float(np.dot(w, w)))
    return SparseVector(bins, w)


def score_all(index: TfidfIndex, q: SparseVector) -> np.ndarray:
    """Cosine score of every row against a unit query vector."""
    if len(q) == 0:
        return np.zeros(index.n_docs)
    scores = index._columns()[:, q.bins] @ q.weights
    return np.clip(np.asarray(scores).ravel(), 0.0, 1.0)


def rank_rows(scores: np.ndarray, k: int) -> np.ndarray:
    """Rows with positive score, best first, ties by ascending row; at most k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    pos = np.flatnonzero(scores > 0)
    if pos.size > k:
        kth = np.partition(scores[pos], pos.size - k)[pos.size - k]
        pos = pos[scores[pos] >= kth]
    order = np.lexsort((pos, -scores[pos]))
    return pos[order][:k]


def top_k(index: TfidfIndex, q: SparseVector, k: int) -> list[RetrievalHit]:
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(q) == 0:
        return []
    scores = score_all(index, q)
    return [RetrievalHit(index.doc_ids[r], float(scores[r])) for r in rank_rows(scores, k)]


# -- persistence ------------------------------------------------------------

_HEAD = struct.Struct("<4sH")
# seed, bins, ngram lo, ngram hi, unit, analyzer sha256, rows, nnz, config length, payload length
_FIXED = struct.Struct("<QQBBB32sQQIQ")
_U32 = struct.Struct("<I")


def save_index(index: TfidfIndex, path: str | Path) -> None:
    """Layout: magic, version, fixed header, header CRC32, then the payload
    (analyzer config JSON, idf, CSR arrays, doc-id table) and its CRC32."""
    cfg_blob = json.dumps(index.analyzer.to_dict(), ensure_ascii=False, sort_keys=True).encode("utf-8")
    ids = bytearray()
    for doc_id in index.doc_ids:
        raw = doc_id.encode("utf-8")
        ids += _U32.pack(len(raw)) + raw
    payload = b"".join([
        cfg_blob,
        index.idf.astype("<f8").tobytes(),
        index.indptr.astype("<i8").tobytes(),
        index.indices.astype("<u4").tobytes(),
        index.data.astype("<f8").tobytes(),
        bytes(ids),
    ])
    header = _HEAD.pack(MAGIC, FORMAT_VERSION) + _FIXED.pack(
        index.hash_seed & _MASK64,
        index.hash_bins,
        index.ngram_range[0],
        index.ngram_range[1],
        UNITS.index(index.unit),
        index.analyzer_hash,
        index.n_docs,
        int(index.indices.size),
        len(cfg_blob),
        len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(_U32.pack(zlib.crc32(header)))
        fh.write(payload)
        fh.write(_U32.pack(zlib.crc32(payload)))


class _Reader:
    def __init__(self, buf: bytes, pos: int = 0):
        self.buf = buf
        self.pos = pos

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedIndexError(f"index file truncated while reading {what}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out


def load_index(path: str | Path, expected_analyzer_hash: bytes | None = None) -> TfidfIndex:
    buf = Path(path).read_bytes()
    r = _Reader(buf)
    magic, version = _HEAD.unpack(r.take(_HEAD.size, "magic"))
    if magic != MAGIC:
        raise BadMagicError(f"{path}: not an index file (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    fixed = r.take(_FIXED.size, "header")
    (head_crc,) = _U32.unpack(r.take(4, "header checksum"))
    if zlib.crc32(buf[: _HEAD.size + _FIXED.size]) != head_crc:
        raise ChecksumError(f"{path}: header checksum mismatch")
    seed, bins, lo, hi, unit, a_hash, rows, nnz, cfg_len, payload_len = _FIXED.unpack(fixed)

    # lengths are trusted from here on, so size problems are truncation
    expected = r.pos + payload_len + 4
    if len(buf) < expected:
        raise TruncatedIndexError(f"{path}: file has {len(buf)} bytes, header promises {expected}")
    if len(buf) > expected:
        raise IndexFormatError(f"{path}: {len(buf) - expected} trailing bytes after checksum")
    (body_crc,) = _U32.unpack(buf[-4:])
    if zlib.crc32(buf[r.pos:-4]) != body_crc:
        raise ChecksumError(f"{path}: payload checksum mismatch")

    body = _Reader(buf[:-4], r.pos)
    cfg = AnalyzerConfig.from_dict(json.loads(body.take(cfg_len, "analyzer config").decode("utf-8")))
    if cfg.digest() != a_hash or cfg.ngram_range != (lo, hi):
        raise ChecksumError(f"{path}: analyzer config does not match its recorded hash")
    if expected_analyzer_hash is not None and expected_analyzer_hash != a_hash:
        warnings.warn(f"{path}: index was built with a different analyzer configuration", stacklevel=2)
    if unit >= len(UNITS):
        raise IndexFormatError(f"{path}: unknown unit code {unit}")

    idf = np.frombuffer(body.take(8 * bins, "idf"), dtype="<f8").astype(np.float64)
    indptr = np.frombuffer(body.take(8 * (rows + 1), "row offsets"), dtype="<i8").astype(np.int64)
    indices = np.frombuffer(body.take(4 * nnz, "column indices"), dtype="<u4").astype(np.int64)
    data = np.frombuffer(body.take(8 * nnz, "weights"), dtype="<f8").astype(np.float64)
    doc_ids = []
    for _ in range(rows):
        (n,) = _U32.unpack(body.take(4, "doc-id table"))
        doc_ids.append(body.take(n, "doc-id table").decode("utf-8"))
    if body.pos != len(body.buf):
        raise IndexFormatError(f"{path}: payload length disagrees with its contents")

    return TfidfIndex(
        analyzer=cfg,
        hash_bins=int(bins),
        hash_seed=int(seed),
        idf=idf,
        indptr=indptr,
        indices=indices,
        data=data,
        doc_ids=doc_ids,
        unit=UNITS[unit],
    )
