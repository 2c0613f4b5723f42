"""Tweet cleaning: entity extraction, tokenization, and script filtering.

Entity extraction runs ordered passes over the raw text (URLs, mentions,
hashtags, emojis/smileys, reserved words, numbers); each pass claims
character spans so that later passes cannot re-match inside them, which
keeps ``#`` fragments inside URLs from being misread as hashtags. The one
exception to the order is the reserved token ``@RT``, which is recognized
ahead of the mention pass (otherwise it would come out as a mention of
user "RT").

All functions here are pure; they can be called concurrently.
"""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import PipelineError

log = logging.getLogger(__name__)

# Tokenizer split symbols, in addition to Unicode whitespace.
SPLIT_SYMBOLS = ":,;-_"

# Fixed ASCII emoticon inventory (plus case variants of the letter forms).
SMILEYS = (
    ":-)", ":-(",
    ":)", ":(", ";)",
    ":D", ":d", ":P", ":p",
    "xD", "xd", "XD", "Xd",
)

RESERVED_TOKENS = ("@RT", "RT", "FAV")


class Language(enum.Enum):
    EN = "en"
    HI = "hi"
    MR = "mr"
    MULTI = "multi"


class Script(enum.Enum):
    LATIN = "latin"
    DEVANAGARI = "devanagari"
    ARABIC = "arabic"
    EMOJI = "emoji"
    OTHER = "other"


class AllContentRemoved(PipelineError):
    """Every character of the post belonged to an entity.

    Warning-level: the cleaned post (with an empty token list) is attached
    as ``.result`` so callers can keep the row anyway.
    """

    def __init__(self, result: "CleanPost"):
        super().__init__("all content removed as entities")
        self.result = result


class TransliteratorFailure(PipelineError):
    """A transliterator plug-in raised; the row is kept untransliterated."""


@dataclass(frozen=True)
class RawPost:
    text: str
    language: Language

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("post text is empty after trimming")
        if not isinstance(self.language, Language):
            raise ValueError(f"unsupported language: {self.language!r}")


@dataclass
class PostEntities:
    hashtags: list[str] = field(default_factory=list)
    mentions: list[str] = field(default_factory=list)
    urls: list[str] = field(default_factory=list)
    emojis: list[str] = field(default_factory=list)
    smileys: list[str] = field(default_factory=list)
    reserved: list[str] = field(default_factory=list)
    numbers: list[str] = field(default_factory=list)


@dataclass
class CleanPost:
    tokens: list[str]
    entities: PostEntities
    source: RawPost


@dataclass(frozen=True)
class ScriptSpan:
    start: int
    end: int  # exclusive character offset
    script: Script


# --- entity grammar -------------------------------------------------------

_URL_RE = re.compile(r"https?://\S+")
_MENTION_RE = re.compile(r"@[A-Za-z0-9_]{1,15}")
_HASHTAG_RE = re.compile(r"#[^#\s]+")
_NUMBER_RE = re.compile(r"[0-9]+")

# An emoji grapheme: a regional-indicator pair, a pictographic codepoint
# with optional skin tone and variation selector, or any FE0F-qualified
# character; units may be chained with ZWJ.
_EMOJI_UNIT = (
    "(?:[\U0001F1E6-\U0001F1FF]{2}"
    "|[\U0001F300-\U0001FAFF☀-➿\U0001F1E6-\U0001F1FF]"
    "[\U0001F3FB-\U0001F3FF]?️?"
    "|[^\\s️‍]️)"
)
_EMOJI_RE = re.compile(f"{_EMOJI_UNIT}(?:‍{_EMOJI_UNIT})*")

_EMOJI_EXTRA_CODEPOINTS = frozenset({0xFE0F, 0x200D}) | frozenset(range(0x1F3FB, 0x1F400))


def _is_emoji_char(ch: str) -> bool:
    o = ord(ch)
    return (
        0x1F300 <= o <= 0x1FAFF
        or 0x2600 <= o <= 0x27BF
        or 0x1F1E6 <= o <= 0x1F1FF
        or o in _EMOJI_EXTRA_CODEPOINTS
    )


@dataclass(frozen=True)
class _Span:
    start: int
    end: int
    kind: str
    value: str


def _scan(text: str) -> list[_Span]:
    """Run the ordered extraction passes; return claimed spans sorted by start.

    Each pass sees the text with previously claimed spans masked out to
    spaces, so a later pattern can match right up to an earlier entity's
    boundary but never across it.
    """
    masked = list(text)
    spans: list[_Span] = []

    def claim(a: int, b: int, kind: str, value: str):
        for i in range(a, b):
            masked[i] = " "
        spans.append(_Span(a, b, kind, value))

    def current() -> str:
        return "".join(masked)

    # 1. URLs
    for m in _URL_RE.finditer(current()):
        claim(m.start(), m.end(), "url", m.group())

    # 2. reserved @RT (would otherwise be eaten by the mention pass)
    snapshot = current()
    for m in re.finditer(r"@RT", snapshot):
        if _standalone(snapshot, m.start(), m.end()):
            claim(m.start(), m.end(), "reserved", "RT")

    # 3. mentions
    for m in _MENTION_RE.finditer(current()):
        claim(m.start(), m.end(), "mention", m.group()[1:])

    # 4. hashtags
    for m in _HASHTAG_RE.finditer(current()):
        claim(m.start(), m.end(), "hashtag", m.group().lstrip("#"))

    # 5. emojis, then smileys
    for m in _EMOJI_RE.finditer(current()):
        claim(m.start(), m.end(), "emoji", m.group())
    _scan_smileys(current(), claim)

    # 6. remaining reserved words (RT, FAV)
    snapshot = current()
    for word in (w for w in RESERVED_TOKENS if not w.startswith("@")):
        for m in re.finditer(re.escape(word), snapshot):
            if _standalone(snapshot, m.start(), m.end()):
                claim(m.start(), m.end(), "reserved", word)

    # 7. standalone numbers
    snapshot = current()
    for m in _NUMBER_RE.finditer(snapshot):
        a, b = m.start(), m.end()
        if a > 0 and snapshot[a - 1].isalnum():
            continue
        if b < len(snapshot) and snapshot[b].isalnum():
            continue
        claim(a, b, "number", m.group())

    spans.sort(key=lambda s: s.start)
    return spans


def _standalone(text: str, a: int, b: int) -> bool:
    before_ok = a == 0 or text[a - 1].isspace()
    after_ok = b == len(text) or text[b].isspace() or text[b] in SPLIT_SYMBOLS
    return before_ok and after_ok


def _scan_smileys(text: str, claim):
    by_length = sorted(SMILEYS, key=len, reverse=True)
    i = 0
    while i < len(text):
        hit = None
        for s in by_length:
            j = i + len(s)
            if text[i:j] != s:
                continue
            # letter-led/-final emoticons need a non-alphanumeric boundary
            if s[0].isalpha() and i > 0 and text[i - 1].isalnum():
                continue
            if s[-1].isalpha() and j < len(text) and text[j].isalnum():
                continue
            hit = (i, j, s)
            break
        if hit:
            claim(hit[0], hit[1], "smiley", hit[2])
            i = hit[1]
        else:
            i += 1


def _entities_from(spans: list[_Span]) -> PostEntities:
    ents = PostEntities()
    buckets = {
        "hashtag": ents.hashtags,
        "mention": ents.mentions,
        "url": ents.urls,
        "emoji": ents.emojis,
        "smiley": ents.smileys,
        "reserved": ents.reserved,
        "number": ents.numbers,
    }
    for span in spans:
        buckets[span.kind].append(span.value)
    return ents


def extract_entities(text: str) -> PostEntities:
    """Extract every entity of the grammar, in left-to-right source order."""
    return _entities_from(_scan(text))


def tokenize(text: str) -> list[str]:
    """Split on Unicode whitespace and on ``: , ; - _``; drop empty pieces."""
    pieces = re.split(rf"[\s{re.escape(SPLIT_SYMBOLS)}]+", text)
    return [p for p in pieces if p]


def clean(post: RawPost) -> CleanPost:
    """Extract entities, remove their spans, and tokenize the remainder.

    Raises AllContentRemoved (carrying the result) when nothing but
    entities was found; callers that want to keep such rows catch it and
    use ``err.result``.
    """
    spans = _scan(post.text)
    entities = _entities_from(spans)
    chars = list(post.text)
    for span in spans:
        for i in range(span.start, span.end):
            chars[i] = " "
    tokens = tokenize("".join(chars))
    result = CleanPost(tokens=tokens, entities=entities, source=post)
    if not tokens:
        raise AllContentRemoved(result)
    return result


# --- script handling ------------------------------------------------------

def _char_script(ch: str) -> Script:
    o = ord(ch)
    if 0x0900 <= o <= 0x097F:
        return Script.DEVANAGARI
    if 0x0600 <= o <= 0x06FF or 0x0750 <= o <= 0x077F:
        return Script.ARABIC
    if _is_emoji_char(ch):
        return Script.EMOJI
    if o <= 0x024F and ch.isalpha():
        return Script.LATIN
    return Script.OTHER


def detect_scripts(text: str) -> list[ScriptSpan]:
    """Classify maximal same-script runs of non-whitespace characters."""
    spans: list[ScriptSpan] = []
    start = None
    current = None
    for i, ch in enumerate(text):
        if ch.isspace():
            if start is not None:
                spans.append(ScriptSpan(start, i, current))
                start = None
            continue
        s = _char_script(ch)
        if start is None:
            start, current = i, s
        elif s != current:
            spans.append(ScriptSpan(start, i, current))
            start, current = i, s
    if start is not None:
        spans.append(ScriptSpan(start, len(text), current))
    return spans


def token_script(token: str) -> Script:
    """Majority script of a token's characters (ties: enum definition order)."""
    counts: dict[Script, int] = {}
    for ch in token:
        s = _char_script(ch)
        counts[s] = counts.get(s, 0) + 1
    order = list(Script)
    return max(counts, key=lambda s: (counts[s], -order.index(s)))


def filter_script(tokens: list[str], script: Script) -> list[str]:
    """Keep tokens whose majority-character script equals ``script``."""
    return [t for t in tokens if token_script(t) == script]


# --- transliteration ------------------------------------------------------

Transliterator = Callable[[str, Language], str]


def identity_transliterator(token: str, target: Language) -> str:
    return token


def transliterate(
    tokens: list[str],
    target_language: Language,
    transliterator: Optional[Transliterator] = None,
) -> list[str]:
    """Apply a transliterator plug-in token-wise (identity by default).

    If the plug-in raises, the row is kept untransliterated and a warning
    is logged.
    """
    if transliterator is None:
        transliterator = identity_transliterator
    try:
        return [transliterator(tok, target_language) for tok in tokens]
    except Exception as exc:  # plug-in contract: total function; be defensive
        log.warning("transliterator failed (%s); keeping row untransliterated", exc)
        return list(tokens)


def prepare_tokens(
    post: CleanPost,
    transliterator: Optional[Transliterator] = None,
) -> list[str]:
    """Language-aware token filtering used by the featurization pipeline.

    For Hindi and Marathi posts, Arabic-script tokens are dropped and
    Latin-script tokens are passed through the transliterator (identity by
    default). English posts are returned unchanged.
    """
    lang = post.source.language
    if lang not in (Language.HI, Language.MR):
        return list(post.tokens)
    kept = [t for t in post.tokens if token_script(t) != Script.ARABIC]
    latin = [t for t in kept if token_script(t) == Script.LATIN]
    if latin:
        mapped = dict(zip(latin, transliterate(latin, lang, transliterator)))
        kept = [mapped.get(t, t) for t in kept]
    return kept
