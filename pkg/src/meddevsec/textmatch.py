"""Text normalization and keyword matching shared by every analytic module.

All matching in this package is keyword matching with token boundaries, never
stemming or embedding similarity.  Centralizing the rules here keeps search,
medical filtering, cue classification, and lexicon lookup consistent: a term
matches at a position only when the characters on both sides are not
alphanumeric, so "android" matches "Android 13" but not "polyandroid".
"""

from __future__ import annotations

import re
import unicodedata

_WORD_RE = re.compile(r"[a-z0-9]+(?:[-'][a-z0-9]+)*")
_WS_RE = re.compile(r"\s+")

# Words carrying no retrieval signal; kept deliberately small so summary
# tokens stay faithful to the source text.
STOPWORDS = frozenset(
    "a an and are as at be by for from has have in is it of on or that the to via with".split()
)


def normalize_term(term: str) -> str:
    """Lowercase, trim, and collapse internal whitespace."""
    return _WS_RE.sub(" ", term.strip().lower())


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens, hyphen/apostrophe compounds kept whole."""
    return _WORD_RE.findall(text.lower())


def content_tokens(text: str) -> list[str]:
    """Deduplicated tokens minus stopwords, original order preserved."""
    seen: set[str] = set()
    out: list[str] = []
    for tok in tokenize(text):
        if tok in STOPWORDS or tok in seen:
            continue
        seen.add(tok)
        out.append(tok)
    return out


def _boundary_pattern(term: str) -> re.Pattern[str]:
    escaped = re.escape(normalize_term(term))
    return re.compile(r"(?<![a-z0-9])" + escaped + r"(?![a-z0-9])")


_PATTERN_CACHE: dict[str, re.Pattern[str]] = {}


def term_in_text(term: str, text: str) -> bool:
    """Case-insensitive token-boundary containment of ``term`` in ``text``."""
    key = normalize_term(term)
    if not key:
        return False
    pat = _PATTERN_CACHE.get(key)
    if pat is None:
        pat = _boundary_pattern(key)
        _PATTERN_CACHE[key] = pat
    return pat.search(text.lower()) is not None


def any_term_in_text(terms: list[str] | tuple[str, ...] | frozenset[str], text: str) -> bool:
    return any(term_in_text(t, text) for t in terms)


def strip_punctuation(text: str) -> str:
    """Remove unicode punctuation, collapse the gaps to single spaces."""
    chars = [" " if unicodedata.category(c).startswith("P") else c for c in text]
    return _WS_RE.sub(" ", "".join(chars)).strip()


def normalize_name(name: str, acronyms: dict[str, str] | None = None) -> str:
    """Device-name normalization used by regulatory cross-referencing.

    Lowercase, punctuation stripped, whitespace collapsed; tokens found in the
    ``acronyms`` table are expanded so abbreviated listings and spelled-out
    narratives land on the same key.
    """
    flat = strip_punctuation(name.lower())
    if not acronyms:
        return flat
    return " ".join(acronyms.get(tok, tok) for tok in flat.split())


def head_token(term: str) -> str:
    """First whitespace-delimited word of a normalized term."""
    norm = normalize_term(term)
    return norm.split(" ", 1)[0] if norm else ""
