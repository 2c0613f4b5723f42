"""Hashtag word segmentation by unigram likelihood.

A hashtag like "IPL2019Final" is split into constituent words by
maximizing the product of unigram probabilities over all segmentations,
subject to forced boundaries: a lower-to-upper case transition or a
letter/digit transition is always a split point. Out-of-vocabulary words
get probability 1 / (total * 10^len), so unknown words are penalized
exponentially in their length.

Candidate comparison uses exact rational arithmetic (Fraction) rather than
float log scores: the Viterbi search and the exhaustive test oracle must
agree bit-for-bit, including on mathematically tied segmentations, where
the tie-break is fewer tokens first, then the lexicographically smallest
token list. The reported ``log_prob`` is computed once, at the end, as the
left-to-right float sum of ``score_word`` over the chosen tokens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import InputError, PipelineError

DEFAULT_MAX_WORD_LEN = 20

# 2^(n-1) candidate segmentations stay tractable up to this length
BRUTE_FORCE_LIMIT = 22


class MalformedLexicon(InputError):
    def __init__(self, path: str, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.line_no = line_no


class EmptyLexicon(InputError):
    pass


class InputTooLong(PipelineError):
    pass


@dataclass(frozen=True)
class Lexicon:
    counts: dict[str, int]
    total: int
    max_word_len: int = DEFAULT_MAX_WORD_LEN

    def __post_init__(self):
        if self.total != sum(self.counts.values()):
            raise ValueError("lexicon total does not match the sum of counts")
        if self.total < 1:
            raise ValueError("lexicon must contain at least one count")
        if self.max_word_len < 1:
            raise ValueError("max_word_len must be positive")

    @classmethod
    def from_counts(cls, counts: dict[str, int], max_word_len: int = DEFAULT_MAX_WORD_LEN) -> "Lexicon":
        folded: dict[str, int] = {}
        for token, count in counts.items():
            folded[token.casefold()] = folded.get(token.casefold(), 0) + count
        return cls(counts=folded, total=sum(folded.values()), max_word_len=max_word_len)


@dataclass
class Segmentation:
    tokens: list[str]
    log_prob: float

    @property
    def score(self) -> float:
        return self.log_prob


def load_lexicon(path: str, max_word_len: int = DEFAULT_MAX_WORD_LEN) -> Lexicon:
    """Read a ``token<TAB>count`` file; ``#``-prefixed lines are comments."""
    counts: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise MalformedLexicon(path, line_no, "expected token<TAB>count")
            token, raw_count = parts[0].strip().casefold(), parts[1].strip()
            if not token or any(ch.isspace() for ch in token):
                raise MalformedLexicon(path, line_no, f"bad token {parts[0]!r}")
            try:
                count = int(raw_count)
            except ValueError:
                raise MalformedLexicon(path, line_no, f"bad count {raw_count!r}") from None
            if count < 1:
                raise MalformedLexicon(path, line_no, "count must be >= 1")
            counts[token] = counts.get(token, 0) + count
    if not counts:
        raise EmptyLexicon(f"{path}: no lexicon entries")
    return Lexicon(counts=counts, total=sum(counts.values()), max_word_len=max_word_len)


def word_prob(word: str, lexicon: Lexicon) -> Fraction:
    """Exact unigram probability; OOV words get 1 / (total * 10^len)."""
    return Fraction(*_prob_pair(word, lexicon))


def _prob_pair(word: str, lexicon: Lexicon) -> tuple[int, int]:
    """(numerator, denominator) without normalization; exact and cheap.

    Candidate comparison cross-multiplies these pairs, so the search never
    touches floats (and never pays Fraction's gcd) yet stays exact.
    """
    count = lexicon.counts.get(word.casefold())
    if count is not None:
        return count, lexicon.total
    return 1, lexicon.total * 10 ** len(word)


def score_word(word: str, lexicon: Lexicon) -> float:
    """Log-probability of a word (float mirror of :func:`word_prob`)."""
    count = lexicon.counts.get(word.casefold())
    if count is not None:
        return math.log(count / lexicon.total)
    return -(math.log(lexicon.total) + len(word) * math.log(10.0))


def forced_boundaries(raw: str) -> list[int]:
    """Mandatory split positions: lower->UPPER and letter<->digit transitions."""
    cuts = []
    for i in range(1, len(raw)):
        a, b = raw[i - 1], raw[i]
        if a.islower() and b.isupper():
            cuts.append(i)
        elif (a.isalpha() and b.isdigit()) or (a.isdigit() and b.isalpha()):
            cuts.append(i)
    return cuts


@dataclass
class _Candidate:
    num: int
    den: int
    tokens: tuple[str, ...]


def _better(a: _Candidate, b: Optional[_Candidate]) -> bool:
    """Maximize probability; tie-break fewer tokens, then lexicographic."""
    if b is None:
        return True
    left, right = a.num * b.den, b.num * a.den
    if left != right:
        return left > right
    if len(a.tokens) != len(b.tokens):
        return len(a.tokens) < len(b.tokens)
    return a.tokens < b.tokens


def _finish(tokens: tuple[str, ...], lexicon: Lexicon) -> Segmentation:
    log_prob = 0.0
    for tok in tokens:
        log_prob += score_word(tok, lexicon)
    return Segmentation(tokens=list(tokens), log_prob=log_prob)


def segment(raw: str, lexicon: Lexicon) -> Segmentation:
    """Best-scoring segmentation of a hashtag (leading ``#`` already stripped).

    Pieces never cross a forced boundary, and pieces longer than
    ``lexicon.max_word_len`` are admitted only when they span a whole
    forced chunk.
    """
    if not raw:
        raise ValueError("cannot segment an empty string")
    n = len(raw)
    cuts = set(forced_boundaries(raw))

    best: list[Optional[_Candidate]] = [None] * (n + 1)
    best[0] = _Candidate(1, 1, ())
    for i in range(1, n + 1):
        j = i - 1
        while j >= 0:
            if best[j] is not None and _piece_ok(j, i, n, cuts, lexicon.max_word_len):
                word = raw[j:i]
                num, den = _prob_pair(word, lexicon)
                cand = _Candidate(best[j].num * num, best[j].den * den,
                                  best[j].tokens + (word,))
                if _better(cand, best[i]):
                    best[i] = cand
            if j in cuts:
                break  # pieces cannot start left of the nearest forced cut
            j -= 1
    return _finish(best[n].tokens, lexicon)


def _piece_ok(j: int, i: int, n: int, cuts: set[int], max_word_len: int) -> bool:
    if any(k in cuts for k in range(j + 1, i)):
        return False
    if i - j <= max_word_len:
        return True
    # an over-length piece is admissible only as a whole forced chunk
    return (j == 0 or j in cuts) and (i == n or i in cuts)


def brute_force_segment(raw: str, lexicon: Lexicon) -> Segmentation:
    """Exhaustive-enumeration oracle; agrees with :func:`segment` exactly."""
    if not raw:
        raise ValueError("cannot segment an empty string")
    if len(raw) > BRUTE_FORCE_LIMIT:
        raise InputTooLong(f"brute force enumeration capped at {BRUTE_FORCE_LIMIT} chars")
    n = len(raw)
    forced = set(forced_boundaries(raw))
    free = [i for i in range(1, n) if i not in forced]
    pair = {(a, b): _prob_pair(raw[a:b], lexicon)
            for a in range(n) for b in range(a + 1, n + 1)}

    best: Optional[_Candidate] = None
    for mask in range(1 << len(free)):
        cuts = sorted(forced | {free[k] for k in range(len(free)) if mask >> k & 1})
        bounds = [0] + cuts + [n]
        if any(
            not _piece_ok(a, b, n, forced, lexicon.max_word_len)
            for a, b in zip(bounds, bounds[1:])
        ):
            continue
        num = den = 1
        for a, b in zip(bounds, bounds[1:]):
            pn, pd = pair[a, b]
            num *= pn
            den *= pd
        cand = _Candidate(num, den, tuple(raw[a:b] for a, b in zip(bounds, bounds[1:])))
        if _better(cand, best):
            best = cand
    return _finish(best.tokens, lexicon)
