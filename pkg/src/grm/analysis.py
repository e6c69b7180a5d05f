"""Text analysis: tokenization, stopword removal and Porter stemming.

The analysis chain is fixed and deterministic: split on any non-alphanumeric
character, lowercase, drop stopwords, then stem.  The same chain is applied
to collection documents, queries and generated documents so that every stage
of the pipeline shares one vocabulary.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

from .errors import ConfigError

# The standard 33-term English IR stopword list.  Extend via
# AnalyzerConfig(stopwords=...) rather than editing this constant; the
# index records a hash of the active list so mismatches are detected.
DEFAULT_STOPWORDS: frozenset[str] = frozenset(
    """
    a an and are as at be but by for if in into is it no not of on or such
    that the their then there these they this to was will with
    """.split()
)

_TOKEN = re.compile(r"[a-z0-9]+")
_TOKEN_CASED = re.compile(r"[A-Za-z0-9]+")


# ---------------------------------------------------------------------------
# Porter stemmer (original 1980 algorithm)
# ---------------------------------------------------------------------------
#
# Implemented directly from the published rule tables; later revisions of
# the algorithm (e.g. the extra -logi rule) are intentionally not included.
# Words of length <= 2 are returned unchanged, matching the reference
# implementations.

_VOWELS = frozenset("aeiou")


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        # y is a vowel when preceded by a consonant
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Count VC sequences: the m of [C](VC)^m[V]."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        vowel = not _is_consonant(stem, i)
        if prev_vowel and not vowel:
            m += 1
        prev_vowel = vowel
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(word: str) -> bool:
    # consonant-vowel-consonant where the final consonant is not w, x or y
    if len(word) < 3:
        return False
    return (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


def _replace_longest(word: str, rules: tuple[tuple[str, str], ...], min_measure: int) -> str:
    """Apply the longest-matching suffix rule whose stem passes m > min_measure.

    Only the longest matching suffix is attempted; if its condition fails the
    word is left unchanged (standard longest-match semantics).
    """
    best: tuple[str, str] | None = None
    for suffix, replacement in rules:
        if word.endswith(suffix) and (best is None or len(suffix) > len(best[0])):
            best = (suffix, replacement)
    if best is None:
        return word
    stem = word[: len(word) - len(best[0])]
    if _measure(stem) > min_measure:
        return stem + best[1]
    return word


_STEP2_RULES = (
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
)

_STEP3_RULES = (
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
)

_STEP4_SUFFIXES = (
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
)


def _step1a(w: str) -> str:
    if w.endswith("sses"):
        return w[:-2]
    if w.endswith("ies"):
        return w[:-2]
    if w.endswith("ss"):
        return w
    if w.endswith("s"):
        return w[:-1]
    return w


def _step1b(w: str) -> str:
    if w.endswith("eed"):
        stem = w[:-3]
        if _measure(stem) > 0:
            return stem + "ee"
        return w
    removed = False
    if w.endswith("ed"):
        stem = w[:-2]
        if _has_vowel(stem):
            w = stem
            removed = True
    elif w.endswith("ing"):
        stem = w[:-3]
        if _has_vowel(stem):
            w = stem
            removed = True
    if removed:
        if w.endswith(("at", "bl", "iz")):
            return w + "e"
        if _ends_double_consonant(w) and w[-1] not in "lsz":
            return w[:-1]
        if _measure(w) == 1 and _ends_cvc(w):
            return w + "e"
    return w


def _step1c(w: str) -> str:
    if w.endswith("y") and _has_vowel(w[:-1]):
        return w[:-1] + "i"
    return w


def _step4(w: str) -> str:
    best = ""
    for suffix in _STEP4_SUFFIXES:
        if w.endswith(suffix) and len(suffix) > len(best):
            best = suffix
    if not best:
        return w
    stem = w[: len(w) - len(best)]
    if _measure(stem) <= 1:
        return w
    if best == "ion" and not stem.endswith(("s", "t")):
        return w
    return stem


def _step5(w: str) -> str:
    if w.endswith("e"):
        stem = w[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            w = stem
    if w.endswith("ll") and _measure(w) > 1:
        w = w[:-1]
    return w


def porter_stem(word: str) -> str:
    """Stem one lowercase word with the original Porter algorithm."""
    if len(word) <= 2:
        return word
    w = _step1a(word)
    w = _step1b(w)
    w = _step1c(w)
    w = _replace_longest(w, _STEP2_RULES, 0)
    w = _replace_longest(w, _STEP3_RULES, 0)
    w = _step4(w)
    w = _step5(w)
    return w


# ---------------------------------------------------------------------------
# Analyzer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnalyzerConfig:
    """Analysis chain settings.

    ``stopwords`` must be lowercase terms and are removed before stemming.
    ``stemmer`` is "porter" or "none".  ``lowercase=False`` keeps token case
    (diagnostic use only; the stopword filter then misses capitalized forms).
    """

    stopwords: frozenset[str] = field(default_factory=lambda: DEFAULT_STOPWORDS)
    stemmer: str = "porter"
    lowercase: bool = True

    def __post_init__(self) -> None:
        if self.stemmer not in ("porter", "none"):
            raise ConfigError(f"analyzer.stemmer: unknown stemmer {self.stemmer!r}")
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))

    def stopword_sha256(self) -> str:
        joined = "\n".join(sorted(self.stopwords))
        return hashlib.sha256(joined.encode("utf-8")).hexdigest()


def analyze(text: str, config: AnalyzerConfig | None = None) -> list[str]:
    """Turn raw text into index terms.

    Deterministic: same text and config always yield the same sequence.
    Empty or all-stopword input yields an empty list.
    """
    if config is None:
        config = AnalyzerConfig()
    if config.lowercase:
        tokens = _TOKEN.findall(text.lower())
    else:
        tokens = _TOKEN_CASED.findall(text)
    tokens = [t for t in tokens if t not in config.stopwords]
    if config.stemmer == "porter":
        tokens = [porter_stem(t) for t in tokens]
    return tokens


def load_stopwords(path: str) -> frozenset[str]:
    """Read a stopword file: one lowercase term per line, '#' comments."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            term = line.strip()
            if term and not term.startswith("#"):
                words.add(term.lower())
    return frozenset(words)
