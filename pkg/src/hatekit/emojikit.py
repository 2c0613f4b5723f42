"""Emoji descriptions and embedding-table lookup with mean pooling.

Two resources back the emoji features: a TSV registry mapping each emoji
grapheme to a short textual description (e.g. "🙏" -> "folded hands"), and
word2vec-style embedding tables. The same EmbeddingTable type and ``pool``
operation serve both the emoji vectors and the word vectors used for
hashtag segments and description text.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, PipelineError


class MalformedRegistry(InputError):
    pass


class NotFound(PipelineError):
    pass


class MalformedHeader(InputError):
    pass


class DimensionMismatch(InputError):
    def __init__(self, path: str, line_no: int, expected: int, got: int):
        super().__init__(f"{path}:{line_no}: expected {expected} values, got {got}")
        self.line_no = line_no


class MalformedRow(InputError):
    pass


@dataclass(frozen=True)
class EmojiRegistry:
    descriptions: dict[str, str]

    def __contains__(self, emoji: str) -> bool:
        return emoji in self.descriptions


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]
    name: str = ""

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __getitem__(self, token: str) -> np.ndarray:
        return self.vectors[token]

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass
class PooledVector:
    values: np.ndarray
    present: bool


def load_descriptions(path: str) -> EmojiRegistry:
    """Read an ``emoji<TAB>description`` TSV; later duplicates overwrite."""
    descriptions: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1].strip():
                raise MalformedRegistry(f"{path}:{line_no}: expected emoji<TAB>description")
            descriptions[parts[0]] = parts[1].strip()
    return EmojiRegistry(descriptions=descriptions)


def describe(emoji: str, registry: EmojiRegistry) -> str:
    try:
        return registry.descriptions[emoji]
    except KeyError:
        raise NotFound(f"no description for {emoji!r}") from None


def load_embedding_table(path: str, name: str = "") -> EmbeddingTable:
    """Read a word2vec-style text table: ``<count> <dim>`` header, then
    ``<token> <f_1> ... <f_dim>`` rows. Every row is length-checked and
    must contain only finite values."""
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise MalformedHeader(f"{path}: header must be '<count> <dim>'")
        try:
            _count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise MalformedHeader(f"{path}: non-integer header {header!r}") from None
        if dim < 1:
            raise MalformedHeader(f"{path}: dim must be positive")
        for line_no, line in enumerate(fh, start=2):
            fields = line.split()
            if not fields:
                continue
            token, raw_values = fields[0], fields[1:]
            if len(raw_values) != dim:
                raise DimensionMismatch(path, line_no, dim, len(raw_values))
            try:
                vec = np.array([float(v) for v in raw_values], dtype=np.float64)
            except ValueError:
                raise MalformedRow(f"{path}:{line_no}: non-numeric value") from None
            if not np.all(np.isfinite(vec)):
                raise MalformedRow(f"{path}:{line_no}: non-finite value")
            vectors[token] = vec
    return EmbeddingTable(dim=dim, vectors=vectors, name=name or path)


def save_embedding_table(table: EmbeddingTable, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table.vectors)} {table.dim}\n")
        for token, vec in table.vectors.items():
            fh.write(token + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def pool(items: list[str], table: EmbeddingTable) -> PooledVector:
    """Mean of the vectors of the items found in the table.

    Items without a vector are skipped and the mean renormalized over the
    found count, so one OOV emoji does not shrink the signal. The found
    items are summed in sorted order, which makes the result exactly
    permutation-invariant. An empty or all-absent list yields a zero
    vector with ``present=False``.
    """
    found = sorted(item for item in items if item in table.vectors)
    if not found:
        return PooledVector(values=np.zeros(table.dim), present=False)
    acc = np.zeros(table.dim)
    for item in found:
        acc = acc + table.vectors[item]
    return PooledVector(values=acc / len(found), present=True)


def describe_all(emojis: list[str], registry: EmojiRegistry) -> list[str]:
    """Description words for the emojis that have one (unknowns skipped)."""
    words: list[str] = []
    for e in emojis:
        desc = registry.descriptions.get(e)
        if desc:
            words.extend(desc.split())
    return words
