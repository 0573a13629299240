"""Corpus ingestion: sentence segmentation, tokenization, document sets.

A dataset is a JSON-lines file. Each line describes one document set:

    {"set_id": "d30001", "documents": ["raw text", ...],
     "references": ["manual summary", ...], "budget_bytes": 665}

``budget_bytes`` is optional; when present it overrides whatever budget the
caller configured for that set.

Segmentation and tokenization are deterministic, rule based and stemming
free. The abbreviation table and the edge punctuation set live in
``structsum/data`` and are documented in docs/tokenization.md.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path


class DatasetError(ValueError):
    """A dataset file violates the expected schema."""


def _load_wordlist(name: str) -> frozenset[str]:
    text = resources.files("structsum.data").joinpath(name).read_text("utf-8")
    words = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.append(line)
    return frozenset(words)


#: Chunks ending in a period that do not terminate a sentence.
ABBREVIATIONS: frozenset[str] = _load_wordlist("abbreviations.txt")

# Characters stripped from both ends of a whitespace-delimited chunk before
# normalization. Interior punctuation (hyphens, periods in acronyms) stays.
EDGE_PUNCTUATION = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~“”‘’«»–—…¡¿"

_LEADING_QUOTES = "\"'([{«“‘"

# A sentence boundary is terminal punctuation followed by whitespace and an
# uppercase letter or digit.
_BOUNDARY = re.compile(r"([.!?])(\s+)(?=[A-Z0-9])")


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Load a stopword list; ``None`` selects the packaged default."""
    if path is None:
        return _load_wordlist("stopwords.txt")
    words = []
    for line in Path(path).read_text("utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.append(line.lower())
    return frozenset(words)


def _is_abbreviation(text: str, period_end: int) -> bool:
    # The chunk is the maximal run of non-whitespace ending at the period.
    i = period_end - 1
    while i > 0 and not text[i - 1].isspace():
        i -= 1
    chunk = text[i:period_end]
    if chunk in ABBREVIATIONS:
        return True
    return chunk.lstrip(_LEADING_QUOTES) in ABBREVIATIONS


def segment_sentences(raw_document: str) -> list[str]:
    """Split a document into sentences.

    Splits occur on ``.!?`` followed by whitespace and an uppercase letter
    or digit, unless the chunk ending at a period is in the abbreviation
    table. Text without terminal punctuation comes back as one sentence.
    Joining the output with single spaces and collapsing whitespace
    reproduces the whitespace-collapsed input.
    """
    if not raw_document.strip():
        raise ValueError("cannot segment an empty document")
    pieces: list[str] = []
    start = 0
    for m in _BOUNDARY.finditer(raw_document):
        if m.group(1) == "." and _is_abbreviation(raw_document, m.end(1)):
            continue
        pieces.append(raw_document[start:m.end(1)])
        start = m.end(2)
    pieces.append(raw_document[start:])
    return [p.strip() for p in pieces if p.strip()]


@dataclass(frozen=True)
class Token:
    surface: str
    normalized: str
    is_stopword: bool
    is_capitalized: bool
    length: int


def tokenize(raw_sentence: str, stopword_list: frozenset[str] = frozenset()) -> list[Token]:
    """Whitespace-split, strip edge punctuation, lowercase. No stemming.

    Chunks whose normalized form is empty (pure punctuation) are dropped.
    ``is_capitalized`` refers to the surface form after edge stripping.
    """
    out: list[Token] = []
    for chunk in raw_sentence.split():
        core = chunk.strip(EDGE_PUNCTUATION)
        normalized = core.lower()
        if not normalized:
            continue
        out.append(
            Token(
                surface=chunk,
                normalized=normalized,
                is_stopword=normalized in stopword_list,
                is_capitalized=core[:1].isupper(),
                length=len(normalized),
            )
        )
    return out


@dataclass(frozen=True)
class Sentence:
    """One sentence of one document, with its byte cost."""

    id: int
    doc_id: int
    position_in_doc: int
    text: str
    tokens: tuple[Token, ...]
    cost: int

    def word_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for t in self.tokens:
            counts[t.normalized] = counts.get(t.normalized, 0) + 1
        return counts


@dataclass
class VocabStats:
    """Per-word statistics over one document set."""

    sentence_freq: int = 0
    doc_freq: int = 0
    total_count: int = 0
    max_in_sentence: int = 0
    earliest_position: int = 10 ** 9
    ever_capitalized: bool = False
    is_stopword: bool = False


@dataclass
class DocumentSet:
    """All sentences of one multi-document cluster. Immutable once built."""

    set_id: str
    sentences: tuple[Sentence, ...]
    num_docs: int
    vocabulary: dict[str, VocabStats]
    budget_bytes: int | None = None

    @property
    def num_sentences(self) -> int:
        return len(self.sentences)


@dataclass
class ReferenceSet:
    """Manual summaries for one set; ``target`` is filled by make_target."""

    set_id: str
    references: tuple[tuple[Token, ...], ...]
    target: object | None = None


def build_document_set(
    set_id: str,
    documents: list[str],
    stopwords: frozenset[str],
    budget_bytes: int | None = None,
) -> DocumentSet:
    """Segment and tokenize raw documents into a DocumentSet.

    Sentences that tokenize to nothing are dropped; ids stay contiguous but
    position_in_doc keeps the pre-drop index so positional features keep
    their meaning.
    """
    sentences: list[Sentence] = []
    num_docs = 0
    for doc_id, raw in enumerate(documents):
        if not raw or not raw.strip():
            continue
        num_docs += 1
        for pos, text in enumerate(segment_sentences(raw)):
            tokens = tokenize(text, stopwords)
            if not tokens:
                continue
            sentences.append(
                Sentence(
                    id=len(sentences),
                    doc_id=doc_id,
                    position_in_doc=pos,
                    text=text,
                    tokens=tuple(tokens),
                    cost=len(text.encode("utf-8")),
                )
            )
    if not sentences:
        raise DatasetError(f"set {set_id!r} contains zero sentences")

    vocab: dict[str, VocabStats] = {}
    seen_in_doc: dict[str, set[int]] = {}
    for s in sentences:
        counts = s.word_counts()
        for t in s.tokens:
            st = vocab.get(t.normalized)
            if st is None:
                st = vocab[t.normalized] = VocabStats(is_stopword=t.is_stopword)
                seen_in_doc[t.normalized] = set()
            st.total_count += 1
            if t.is_capitalized:
                st.ever_capitalized = True
        for w, c in counts.items():
            st = vocab[w]
            st.sentence_freq += 1
            st.max_in_sentence = max(st.max_in_sentence, c)
            st.earliest_position = min(st.earliest_position, s.position_in_doc)
            seen_in_doc[w].add(s.doc_id)
    for w, docs in seen_in_doc.items():
        vocab[w].doc_freq = len(docs)

    return DocumentSet(
        set_id=set_id,
        sentences=tuple(sentences),
        num_docs=num_docs,
        vocabulary=vocab,
        budget_bytes=budget_bytes,
    )


def load_dataset(
    path: str | Path,
    stopwords: frozenset[str] | None = None,
) -> list[tuple[DocumentSet, ReferenceSet]]:
    """Load a JSON-lines dataset. See the module docstring for the schema."""
    if stopwords is None:
        stopwords = load_stopwords()
    out: list[tuple[DocumentSet, ReferenceSet]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            try:
                set_id = record["set_id"]
                documents = record["documents"]
                references = record["references"]
            except (KeyError, TypeError) as exc:
                raise DatasetError(f"line {lineno}: missing field {exc}") from exc
            if not references:
                raise DatasetError(f"no references for set {set_id!r} (line {lineno})")
            x = build_document_set(
                set_id, list(documents), stopwords, record.get("budget_bytes")
            )
            refs = tuple(tuple(tokenize(r, stopwords)) for r in references)
            if any(not r for r in refs):
                raise DatasetError(f"empty reference for set {set_id!r} (line {lineno})")
            out.append((x, ReferenceSet(set_id=set_id, references=refs)))
    if not out:
        raise DatasetError(f"{path}: dataset is empty")
    return out
