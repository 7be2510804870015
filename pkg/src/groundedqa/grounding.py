"""Citation-grounded answer generation with per-sentence verification.

Each draft is split into sentences; every sentence must be supported by a
cited snippet (score >= threshold under the verifier) or the draft is
regenerated with the failing sentences fed back into the prompt. The loop is
bounded. On exhaustion, standard mode keeps the best draft with verdicts
attached; strict mode replaces every unsupported sentence with the abstention
marker so that all remaining text is verified.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import ConfigurationError, ProviderError
from .retrieval import Snippet

ABSTENTION_MARKER = "N/A"

MODES = ("standard", "strict")

_CITATION_RE = re.compile(r"\[(\d+)\]")
_TERMINAL_RE = re.compile(r"[.?!]+")
_NEXT_SENTENCE_RE = re.compile(r"\s+[\"'(\[]?[A-Z0-9]")
_TRAILING_WORD_RE = re.compile(r"([A-Za-z]+(?:\.[A-Za-z]+)*)$")

# Tokens that commonly precede a period without ending the sentence.
ABBREVIATIONS = frozenset(
    """
    fig figs eq eqs sec secs no nos vol vols mr mrs ms dr prof st jr sr inc
    ltd co corp dept est approx vs etc al e.g i.e cf resp
    """.split()
)


@dataclass
class Sentence:
    text: str
    start: int
    end: int
    citations: list[str] = field(default_factory=list)
    verdict: str = "unsupported"
    score: float = 0.0

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "start": self.start,
            "end": self.end,
            "citations": list(self.citations),
            "verdict": self.verdict,
            "score": self.score,
        }

    @classmethod
    def from_dict(cls, rec: Mapping) -> "Sentence":
        return cls(
            text=rec["text"],
            start=rec["start"],
            end=rec["end"],
            citations=list(rec["citations"]),
            verdict=rec["verdict"],
            score=rec["score"],
        )


@dataclass
class Draft:
    text: str
    sentences: list[Sentence]
    generation_round: int


@dataclass(frozen=True)
class GroundingConfig:
    max_rounds: int = 3
    support_threshold: float = 0.5
    mode: str = "standard"

    def __post_init__(self) -> None:
        if self.max_rounds < 1:
            raise ConfigurationError(f"max_rounds must be >= 1, got {self.max_rounds}")
        if not 0.0 < self.support_threshold <= 1.0:
            raise ConfigurationError(
                f"support_threshold must be in (0, 1], got {self.support_threshold}"
            )
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class GroundedAnswer:
    sentences: list[Sentence]
    mode: str
    rounds_used: int
    support_rate: float

    @property
    def text(self) -> str:
        return " ".join(s.text for s in self.sentences)

    @property
    def abstained_count(self) -> int:
        return sum(1 for s in self.sentences if s.verdict == "abstained")

    def to_dict(self) -> dict:
        return {
            "sentences": [s.to_dict() for s in self.sentences],
            "mode": self.mode,
            "rounds_used": self.rounds_used,
            "support_rate": self.support_rate,
        }

    @classmethod
    def from_dict(cls, rec: Mapping) -> "GroundedAnswer":
        return cls(
            sentences=[Sentence.from_dict(s) for s in rec["sentences"]],
            mode=rec["mode"],
            rounds_used=rec["rounds_used"],
            support_rate=rec["support_rate"],
        )


def segment_sentences(text: str) -> list[tuple[int, int]]:
    """Split on terminal punctuation followed by whitespace plus an
    uppercase letter or digit, guarded against common abbreviations.

    Returns half-open character spans trimmed to non-whitespace; together the
    spans cover all non-whitespace text.
    """
    spans: list[tuple[int, int]] = []
    start = 0
    for m in _TERMINAL_RE.finditer(text):
        end = m.end()
        if end >= len(text):
            break
        if not _NEXT_SENTENCE_RE.match(text, end):
            continue
        word = _TRAILING_WORD_RE.search(text, start, m.start())
        if word and word.group(1).lower() in ABBREVIATIONS:
            continue
        span = _trim(text, start, end)
        if span:
            spans.append(span)
        start = end
    span = _trim(text, start, len(text))
    if span:
        spans.append(span)
    return spans


def _trim(text: str, start: int, end: int) -> tuple[int, int] | None:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    return (start, end) if start < end else None


def strip_citation_markers(text: str) -> str:
    return _CITATION_RE.sub(" ", text)


def parse_citations(sentence_text: str, snippets: Sequence[Snippet]) -> list[str]:
    """Resolve [n] markers to chunk_ids of the round's snippet list.

    Markers outside 1..len(snippets) resolve to nothing.
    """
    cited: list[str] = []
    for match in _CITATION_RE.finditer(sentence_text):
        n = int(match.group(1))
        if 1 <= n <= len(snippets):
            chunk_id = snippets[n - 1].chunk_id
            if chunk_id not in cited:
                cited.append(chunk_id)
    return cited


def _compact(text: str) -> str:
    return " ".join(text.split())


def build_draft_prompt(
    query: str,
    snippets: Sequence[Snippet],
    round_no: int = 1,
    prior_failures: Sequence[str] = (),
) -> str:
    lines = [
        "Answer the question using only the numbered snippets below.",
        "Cite every sentence with [n] markers referring to snippet numbers.",
        f"QUESTION: {_compact(query)}",
    ]
    for i, snippet in enumerate(snippets, start=1):
        lines.append(f"SNIPPET [{i}]: {_compact(snippet.text)}")
    if round_no > 1 and prior_failures:
        lines.append("REVISE UNSUPPORTED CLAIMS:")
        lines.extend(f"- {_compact(s)}" for s in prior_failures)
    return "\n".join(lines)


def draft_answer(
    query: str,
    snippets: Sequence[Snippet],
    llm_provider,
    round_no: int = 1,
    prior_failures: Sequence[str] = (),
) -> Draft:
    """One drafting call; provider failures propagate as retryable errors."""
    prompt = build_draft_prompt(query, snippets, round_no, prior_failures)
    text = llm_provider.generate(prompt)
    sentences = [
        Sentence(
            text=text[s:e],
            start=s,
            end=e,
            citations=parse_citations(text[s:e], snippets),
        )
        for s, e in segment_sentences(text)
    ]
    return Draft(text=text, sentences=sentences, generation_round=round_no)


def verify_sentence(
    sentence: Sentence,
    snippets: Sequence[Snippet],
    verifier_provider,
    threshold: float,
    mode: str = "standard",
) -> str:
    """Set and return the sentence verdict (mutates verdict and score).

    Supported iff the max verifier score over the cited snippets reaches the
    threshold (inclusive). Uncited sentences are scored over all snippets in
    standard mode and are unsupported outright in strict mode. Verifier
    failures fail closed.
    """
    by_id = {s.chunk_id: s for s in snippets}
    claim = strip_citation_markers(sentence.text)
    if sentence.citations:
        passages = [by_id[c].text for c in sentence.citations if c in by_id]
    elif mode == "strict":
        sentence.verdict = "unsupported"
        sentence.score = 0.0
        return sentence.verdict
    else:
        passages = [s.text for s in snippets]
    try:
        scores = verifier_provider.verify(claim, passages) if passages else []
    except ProviderError:
        scores = []
    sentence.score = max(scores) if scores else 0.0
    sentence.verdict = "supported" if sentence.score >= threshold else "unsupported"
    return sentence.verdict


def _abstained_answer(mode: str) -> GroundedAnswer:
    marker = Sentence(text=ABSTENTION_MARKER, start=0, end=len(ABSTENTION_MARKER), verdict="abstained")
    return GroundedAnswer(sentences=[marker], mode=mode, rounds_used=0, support_rate=0.0)


def grounded_generate(
    query: str,
    snippets: Sequence[Snippet],
    config: GroundingConfig,
    llm_provider,
    verifier_provider,
) -> GroundedAnswer:
    """Draft/verify loop, at most ``config.max_rounds`` drafting calls.

    Exits early once every sentence is supported. On exhaustion the best
    draft wins (highest support rate, earliest round on ties); strict mode
    then replaces each unsupported sentence with the abstention marker.
    """
    if not snippets:
        return _abstained_answer(config.mode)

    best: Draft | None = None
    best_rate = -1.0
    prior_failures: list[str] = []
    rounds_used = 0
    for round_no in range(1, config.max_rounds + 1):
        rounds_used = round_no
        draft = draft_answer(query, snippets, llm_provider, round_no, prior_failures)
        supported = 0
        for sentence in draft.sentences:
            if (
                verify_sentence(
                    sentence, snippets, verifier_provider, config.support_threshold, config.mode
                )
                == "supported"
            ):
                supported += 1
        rate = supported / len(draft.sentences) if draft.sentences else 0.0
        if draft.sentences and supported == len(draft.sentences):
            return GroundedAnswer(
                sentences=draft.sentences, mode=config.mode, rounds_used=round_no, support_rate=1.0
            )
        if rate > best_rate:
            best, best_rate = draft, rate
        prior_failures = [s.text for s in draft.sentences if s.verdict != "supported"]

    assert best is not None
    sentences = best.sentences
    if config.mode == "strict":
        sentences = [
            s
            if s.verdict == "supported"
            else Sentence(
                text=ABSTENTION_MARKER,
                start=s.start,
                end=s.end,
                citations=[],
                verdict="abstained",
                score=s.score,
            )
            for s in sentences
        ]
    supported = sum(1 for s in sentences if s.verdict == "supported")
    rate = supported / len(sentences) if sentences else 0.0
    return GroundedAnswer(
        sentences=sentences, mode=config.mode, rounds_used=rounds_used, support_rate=rate
    )
