"""Split document text into contiguous character-span chunks.

Two strategies: fixed-size windows, and sentence-boundary packing
("semantic"). Both produce spans that tile the document text exactly, so
concatenating chunk texts reproduces the document byte-for-byte. Offsets
count Unicode scalar values, not bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .corpus import Document
from .errors import ValidationError

SENTENCE_TERMINATORS = ".!?"

# Separator placed between a generated context and the chunk text whenever
# a contextualized chunk is embedded, indexed, or presented to a reranker.
CONTEXT_SEPARATOR = "\n\n"

FIXED_WINDOW = "fixed_window"
SEMANTIC = "semantic"


@dataclass(frozen=True)
class ChunkSpan:
    doc_id: str
    index: int
    start: int  # inclusive
    end: int  # exclusive

    def __post_init__(self):
        if self.start < 0 or self.start >= self.end:
            raise ValidationError(f"invalid span [{self.start}, {self.end})")
        if self.index < 0:
            raise ValidationError(f"negative chunk index {self.index}")


@dataclass(frozen=True)
class Chunk:
    """A document slice, optionally carrying generated context to prepend."""

    span: ChunkSpan
    text: str
    context: str | None = None

    @property
    def effective_text(self) -> str:
        """Text as embedded/indexed: context + separator + chunk text when contextualized."""
        if self.context:
            return self.context + CONTEXT_SEPARATOR + self.text
        return self.text

    def with_context(self, context: str) -> "Chunk":
        return replace(self, context=context)


@dataclass(frozen=True)
class SegmenterConfig:
    strategy: str = FIXED_WINDOW
    window_chars: int = 512
    max_chunk_chars: int = 512

    def __post_init__(self):
        if self.strategy not in (FIXED_WINDOW, SEMANTIC):
            raise ValidationError(f"unknown segmentation strategy {self.strategy!r}")
        if self.window_chars <= 0 or self.max_chunk_chars <= 0:
            raise ValidationError("chunk size limits must be positive")


def sentence_spans(text: str) -> list[tuple[int, int]]:
    """Character spans of sentences.

    A sentence ends after a terminator (. ! ?) followed by whitespace; the
    terminator and the whole trailing whitespace run attach to the sentence.
    The final sentence runs to the end of the text regardless of terminator.
    """
    spans: list[tuple[int, int]] = []
    n = len(text)
    start = 0
    i = 0
    while i < n:
        if text[i] in SENTENCE_TERMINATORS and i + 1 < n and text[i + 1].isspace():
            j = i + 1
            while j < n and text[j].isspace():
                j += 1
            spans.append((start, j))
            start = j
            i = j
        else:
            i += 1
    if start < n:
        spans.append((start, n))
    return spans


def first_sentence(text: str) -> str:
    spans = sentence_spans(text)
    if not spans:
        return ""
    s, e = spans[0]
    return text[s:e].strip()


def segment_fixed(text: str, window_chars: int, doc_id: str = "") -> list[ChunkSpan]:
    """Equal-size windows; all spans except possibly the last have exactly window_chars."""
    if not text:
        raise ValidationError("cannot segment empty text")
    if window_chars <= 0:
        raise ValidationError(f"window_chars must be positive, got {window_chars}")
    n = len(text)
    return [
        ChunkSpan(doc_id=doc_id, index=i, start=start, end=min(start + window_chars, n))
        for i, start in enumerate(range(0, n, window_chars))
    ]


def segment_semantic(text: str, max_chunk_chars: int, doc_id: str = "") -> list[ChunkSpan]:
    """Greedily pack whole sentences into chunks of at most max_chunk_chars.

    Sentences longer than the limit are hard-split at the limit so the
    tiling invariant holds. Whitespace-only chunks are merged into a
    neighbour when that stays within the limit; a whitespace-only chunk
    that cannot be absorbed is kept (it embeds to the zero sentinel).
    """
    if not text:
        raise ValidationError("cannot segment empty text")
    if max_chunk_chars <= 0:
        raise ValidationError(f"max_chunk_chars must be positive, got {max_chunk_chars}")

    pieces: list[tuple[int, int]] = []
    for s, e in sentence_spans(text):
        if e - s <= max_chunk_chars:
            pieces.append((s, e))
        else:
            for p in range(s, e, max_chunk_chars):
                pieces.append((p, min(p + max_chunk_chars, e)))

    packed: list[list[int]] = []
    for s, e in pieces:
        if packed and e - packed[-1][0] <= max_chunk_chars:
            packed[-1][1] = e
        else:
            packed.append([s, e])

    merged: list[list[int]] = []
    for s, e in packed:
        if merged and text[s:e].isspace() and e - merged[-1][0] <= max_chunk_chars:
            merged[-1][1] = e  # absorb into preceding chunk
        else:
            merged.append([s, e])
    # A leading whitespace-only chunk is absorbed into the one that follows.
    while (len(merged) > 1 and text[merged[0][0]:merged[0][1]].isspace()
           and merged[1][1] - merged[0][0] <= max_chunk_chars):
        merged[1][0] = merged[0][0]
        merged.pop(0)

    return [
        ChunkSpan(doc_id=doc_id, index=i, start=s, end=e) for i, (s, e) in enumerate(merged)
    ]


def segment(doc: Document, cfg: SegmenterConfig) -> list[ChunkSpan]:
    if cfg.strategy == FIXED_WINDOW:
        return segment_fixed(doc.text, cfg.window_chars, doc_id=doc.id)
    return segment_semantic(doc.text, cfg.max_chunk_chars, doc_id=doc.id)


def check_spans(spans: list[ChunkSpan], text_len: int, require_tiling: bool = False) -> None:
    """Validate that spans are in-bounds, sorted, and non-overlapping."""
    prev_end = 0
    for i, span in enumerate(spans):
        if span.end > text_len:
            raise ValidationError(
                f"span [{span.start}, {span.end}) exceeds text length {text_len}"
            )
        if span.start < prev_end:
            raise ValidationError(f"span {i} overlaps or is out of order")
        if require_tiling and span.start != prev_end:
            raise ValidationError(f"gap before span {i} at offset {span.start}")
        prev_end = span.end
    if require_tiling and prev_end != text_len:
        raise ValidationError(f"spans end at {prev_end}, text has length {text_len}")


def slice_chunks(doc: Document, spans: list[ChunkSpan]) -> list[Chunk]:
    """Materialise spans as Chunk objects; context starts absent."""
    check_spans(spans, len(doc.text))
    chunks = []
    for span in spans:
        if span.doc_id and span.doc_id != doc.id:
            raise ValidationError(f"span for doc {span.doc_id!r} applied to doc {doc.id!r}")
        chunks.append(Chunk(span=span, text=doc.text[span.start:span.end]))
    return chunks
