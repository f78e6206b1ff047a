"""Enrich chunks with document-situating context before indexing.

Each chunk gets a short generated summary that anchors it in its source
document (which company, which period, ...). The context is prepended to
the chunk wherever the chunk is embedded, indexed sparsely, or shown to a
reranker, so lexical search can match terms that the bare chunk lacks.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol

from .corpus import Document
from .errors import ConfigError, ProviderError, ValidationError
from .segmenter import Chunk, first_sentence

logger = logging.getLogger(__name__)

# Document first, then the chunk, then a terse instruction; mirrors the
# widely used contextual-embedding prompt shape.
DEFAULT_PROMPT_TEMPLATE = (
    "<document>\n{document}\n</document>\n"
    "Here is the chunk we want to situate within the whole document:\n"
    "<chunk>\n{chunk}\n</chunk>\n"
    "Give a short succinct context to situate this chunk within the overall "
    "document for the purposes of improving search retrieval of the chunk. "
    "Answer only with the succinct context and nothing else."
)


@dataclass(frozen=True)
class ContextPrompt:
    template: str = DEFAULT_PROMPT_TEMPLATE
    max_context_tokens: int = 128

    def __post_init__(self):
        for placeholder in ("{document}", "{chunk}"):
            if self.template.count(placeholder) != 1:
                raise ConfigError(
                    f"prompt template must contain {placeholder} exactly once"
                )
        if self.max_context_tokens < 1:
            raise ConfigError("max_context_tokens must be >= 1")


def build_prompt(prompt: ContextPrompt, doc: Document, chunk: Chunk) -> str:
    """Substitute both placeholders in a single pass.

    Single-pass means placeholder-looking text inside the document or chunk
    is copied verbatim, never re-substituted.
    """
    out: list[str] = []
    rest = prompt.template
    while rest:
        doc_pos = rest.find("{document}")
        chunk_pos = rest.find("{chunk}")
        positions = [(p, name) for p, name in ((doc_pos, "document"), (chunk_pos, "chunk"))
                     if p != -1]
        if not positions:
            out.append(rest)
            break
        pos, name = min(positions)
        out.append(rest[:pos])
        out.append(doc.text if name == "document" else chunk.text)
        rest = rest[pos + len(name) + 2:]
    return "".join(out)


class ContextProvider(Protocol):
    """Produces the context string for one chunk of one document."""

    name: str

    def generate_context(self, doc: Document, chunk: Chunk, prompt: ContextPrompt) -> str: ...


class MockContextualizer:
    """Deterministic context: the document title plus its first sentence.

    Stands in for an LLM in tests and offline runs. It reproduces the
    mechanism that makes contextual retrieval work: every chunk gains the
    document-identifying lexical material an ambiguous chunk is missing.
    """

    name = "mock-contextualizer"

    def generate_context(self, doc: Document, chunk: Chunk, prompt: ContextPrompt) -> str:
        return f"Document: {doc.title}. {first_sentence(doc.text)}"


class LlmContextualizer:
    """Renders the prompt and asks a text-generation provider for the context."""

    def __init__(self, generator, prompt_name: str = "llm"):
        self._generator = generator
        self.name = f"llm-contextualizer({prompt_name})"

    def generate_context(self, doc: Document, chunk: Chunk, prompt: ContextPrompt) -> str:
        rendered = build_prompt(prompt, doc, chunk)
        return self._generator.generate(rendered, max_tokens=prompt.max_context_tokens)


@dataclass
class ContextualizeResult:
    chunks: list[Chunk]
    fallback_count: int = 0  # empty generations replaced by the mock context
    failed_count: int = 0  # provider failures; chunk left uncontextualized

    @property
    def degraded(self) -> bool:
        return self.failed_count > 0


def contextualize(
    provider: ContextProvider,
    doc: Document,
    chunks: list[Chunk],
    prompt: ContextPrompt = ContextPrompt(),
    max_in_flight: int = 4,
    retries: int = 2,
    backoff: float = 0.1,
) -> ContextualizeResult:
    """Populate every chunk's context field, preserving order and spans.

    Empty generations fall back to the mock context (flagged); a provider
    that keeps failing leaves the chunk uncontextualized and marks the
    result degraded. Requests run in parallel up to max_in_flight.
    """
    for chunk in chunks:
        if chunk.span.doc_id != doc.id:
            raise ValidationError(
                f"chunk of doc {chunk.span.doc_id!r} passed with doc {doc.id!r}"
            )
    mock = MockContextualizer()

    def worker(chunk: Chunk) -> tuple[Chunk, str]:
        attempt = 0
        while True:
            try:
                context = provider.generate_context(doc, chunk, prompt).strip()
                break
            except ProviderError as e:
                if attempt >= retries or not e.retryable:
                    logger.warning("contextualizer failed for %s#%d: %s",
                                   doc.id, chunk.span.index, e)
                    return chunk, "failed"
                time.sleep(backoff * (2 ** attempt))
                attempt += 1
        if not context:
            context = mock.generate_context(doc, chunk, prompt)
            return chunk.with_context(context), "fallback"
        return chunk.with_context(context), "ok"

    if max_in_flight > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            outcomes = list(pool.map(worker, chunks))
    else:
        outcomes = [worker(c) for c in chunks]

    result = ContextualizeResult(chunks=[c for c, _ in outcomes])
    result.fallback_count = sum(1 for _, status in outcomes if status == "fallback")
    result.failed_count = sum(1 for _, status in outcomes if status == "failed")
    return result
