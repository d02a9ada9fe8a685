"""Pre-trained word vectors in the plain-text interchange format.

First line ``<count> <dim>``, then one ``<token> <f1> ... <fdim>`` per line.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

import numpy as np

from .analysis import normalize_chars


class VectorFileError(ValueError):
    pass


class WordVectors:
    def __init__(self, vocab: dict[str, int], matrix: np.ndarray):
        self.vocab = vocab
        self.matrix = matrix
        self._norm_vocab: dict[str, int] = {}
        for tok, i in vocab.items():
            self._norm_vocab.setdefault(normalize_chars(tok), i)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.vocab)

    def lookup(self, token: str) -> int | None:
        i = self.vocab.get(token)
        if i is None:
            i = self._norm_vocab.get(normalize_chars(token))
        return i

    def sum_vector(self, tokens: Iterable[str]) -> np.ndarray:
        """Sum of token vectors; out-of-vocabulary tokens contribute zero."""
        out = np.zeros(self.dim)
        for tok in tokens:
            i = self.lookup(tok)
            if i is not None:
                out += self.matrix[i]
        return out


def load_vectors(path: str | Path) -> WordVectors:
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        if len(head) != 2 or not all(h.isdigit() for h in head):
            raise VectorFileError(f"{path}: first line must be '<count> <dim>'")
        count, dim = int(head[0]), int(head[1])
        vocab: dict[str, int] = {}
        rows = np.zeros((count, dim))
        n = 0
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").rstrip().split(" ")
            if not parts or parts == [""]:
                continue
            if len(parts) != dim + 1:
                raise VectorFileError(f"{path}:{lineno}: expected token + {dim} values, got {len(parts)} fields")
            if n >= count:
                raise VectorFileError(f"{path}:{lineno}: more vectors than declared ({count})")
            try:
                rows[n] = [float(x) for x in parts[1:]]
            except ValueError:
                raise VectorFileError(f"{path}:{lineno}: non-numeric vector component") from None
            vocab.setdefault(parts[0], n)
            n += 1
    if n != count:
        raise VectorFileError(f"{path}: declared {count} vectors, found {n}")
    return WordVectors(vocab, rows)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0 when either vector is zero."""
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))
