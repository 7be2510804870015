"""Tokenization and lexical utilities shared across the pipeline.

The default tokenizer treats maximal runs of letters/digits as one token and
every other non-space character (punctuation, symbols, underscore) as a
single-character token. It is deterministic and dependency-free, which keeps
chunk arithmetic and index builds reproducible.
"""

from __future__ import annotations

import re

from .errors import ConfigurationError

DEFAULT_TOKENIZER = "simple"

# Alnum runs first (unicode letters/digits, underscore excluded), then any
# other non-space character as a single one-char token.
_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]|_")
# Indexable terms: the alnum runs only; punctuation is never indexed.
_TERM_RE = re.compile(r"[^\W_]+")

_KNOWN_TOKENIZERS = frozenset({DEFAULT_TOKENIZER})

# Fixed stop-word list used by the lexical overlap scorer. Versioned so that
# stored scores can be traced back to the list that produced them.
STOPWORDS_VERSION = "1"
STOP_WORDS = frozenset(
    """
    a an the is are was were be been being am of in on at to for with by from
    as and or not no it its this that these those there their they them he she
    his her him we us our you your i me my do does did done have has had having
    will would shall can could should may might must about into onto over under
    between during than then so such but if while what which who whom whose
    when where why how all any each very s t d ll re ve also just only
    """.split()
)


def _check_tokenizer(tokenizer_id: str) -> None:
    if tokenizer_id not in _KNOWN_TOKENIZERS:
        raise ConfigurationError(f"unknown tokenizer_id: {tokenizer_id!r}")


def token_spans(text: str, tokenizer_id: str = DEFAULT_TOKENIZER) -> list[tuple[int, int]]:
    """Return half-open character spans of every token, in order."""
    _check_tokenizer(tokenizer_id)
    return [m.span() for m in _TOKEN_RE.finditer(text)]


def tokenize(text: str, tokenizer_id: str = DEFAULT_TOKENIZER) -> list[str]:
    _check_tokenizer(tokenizer_id)
    return _TOKEN_RE.findall(text)


def count_tokens(text: str, tokenizer_id: str = DEFAULT_TOKENIZER) -> int:
    """Number of tokens in ``text`` under the named tokenization scheme."""
    _check_tokenizer(tokenizer_id)
    return sum(1 for _ in _TOKEN_RE.finditer(text))


def index_terms(text: str) -> list[str]:
    """Lowercased alnum terms for sparse indexing. Punctuation is dropped."""
    return [m.group(0).lower() for m in _TERM_RE.finditer(text)]


def content_terms(text: str) -> set[str]:
    """Distinct index terms minus stop words."""
    return {t for t in index_terms(text) if t not in STOP_WORDS}
