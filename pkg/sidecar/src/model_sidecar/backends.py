"""Model backends behind the HTTP API.

The default backend is fully deterministic and needs no downloads: hashed
bucket embeddings with a context-mixing term, term-overlap reranking, and
an echo generator. A transformers-backed alternative can be selected at
startup when the optional model dependencies (and weights) are available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tokenizer import surface, token_spans

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3


def _fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass
class TokenRow:
    start: int
    end: int
    special: bool
    vector: list[float]


@dataclass
class EmbedResult:
    dim: int
    truncated: bool
    tokens: list[TokenRow]


@dataclass
class BackendInfo:
    embed_model: str
    rerank_model: str
    generate_model: str
    dim: int
    max_tokens: int
    max_concurrency: int


class PromptTooLong(Exception):
    def __init__(self, limit: int):
        super().__init__(f"prompt exceeds the {limit}-token context limit")
        self.limit = limit


@dataclass
class DeterministicConfig:
    dim: int = 64
    alpha: float = 0.5
    max_tokens: int = 8192
    context_limit: int = 32768
    max_concurrency: int = 4
    seed: int = 0  # reserved; the backend has no randomness


class DeterministicBackend:
    """Pure-function stand-in for real models.

    Embedding: each token maps to a one-hot basis vector at bucket
    fnv1a64(lowercased token) % dim, blended with the mean bucket vector of
    the whole input by weight alpha. A zero-width BOS marker is emitted
    first and flagged special so clients exercise their exclusion logic.
    Reranking scores a document by the fraction of distinct query terms it
    contains. Generation echoes the first max_tokens tokens of the prompt.
    """

    def __init__(self, config: DeterministicConfig | None = None):
        self.config = config or DeterministicConfig()

    def info(self) -> BackendInfo:
        cfg = self.config
        return BackendInfo(
            embed_model=f"hash-embed-dim{cfg.dim}-alpha{cfg.alpha:g}",
            rerank_model="overlap-rerank",
            generate_model="echo-generate",
            dim=cfg.dim,
            max_tokens=cfg.max_tokens,
            max_concurrency=cfg.max_concurrency,
        )

    def _bucket(self, token: str) -> int:
        return _fnv1a_64(token.lower().encode("utf-8")) % self.config.dim

    def embed(self, text: str) -> EmbedResult:
        cfg = self.config
        spans = token_spans(text)
        truncated = len(spans) > cfg.max_tokens
        if truncated:
            spans = spans[: cfg.max_tokens]
        rows = [TokenRow(start=0, end=0, special=True, vector=[0.0] * cfg.dim)]
        if spans:
            base = np.zeros((len(spans), cfg.dim))
            for i, span in enumerate(spans):
                base[i, self._bucket(surface(text, span))] = 1.0
            mixed = (1.0 - cfg.alpha) * base + cfg.alpha * base.mean(axis=0)
            for span, vector in zip(spans, mixed):
                rows.append(TokenRow(start=span[0], end=span[1], special=False,
                                     vector=[float(x) for x in vector]))
        return EmbedResult(dim=cfg.dim, truncated=truncated, tokens=rows)

    def rerank(self, query: str, documents: list[str]) -> list[float]:
        query_terms = {w.lower() for w in query.split()}
        query_terms = {w.strip(".,;:!?") for w in query_terms} - {""}
        if not query_terms:
            return [0.0] * len(documents)
        scores = []
        for doc in documents:
            doc_terms = {w.lower().strip(".,;:!?") for w in doc.split()}
            scores.append(len(query_terms & doc_terms) / len(query_terms))
        return scores

    def generate(self, prompt: str, max_tokens: int) -> str:
        words = prompt.split()
        if len(words) > self.config.context_limit:
            raise PromptTooLong(self.config.context_limit)
        return " ".join(words[:max_tokens])


@dataclass
class TransformersConfig:
    embed_model: str = "sentence-transformers/all-MiniLM-L6-v2"
    rerank_model: str = "cross-encoder/ms-marco-MiniLM-L6-v2"
    generate_model: str = "distilgpt2"
    device: str = "cpu"
    max_concurrency: int = 1
    seed: int = 0


class TransformersBackend:
    """Wraps small open checkpoints; loaded lazily on first use.

    Generation is greedy, so outputs are deterministic for a fixed model
    revision. Any load failure surfaces as NOT-LOADED (the API returns 503)
    rather than crashing the service.
    """

    def __init__(self, config: TransformersConfig | None = None):
        self.config = config or TransformersConfig()
        self._embedder = None
        self._reranker = None
        self._generator = None
        self._dim: int | None = None
        self._max_tokens: int | None = None

    def _load_embedder(self):
        if self._embedder is None:
            import torch
            from transformers import AutoModel, AutoTokenizer

            torch.manual_seed(self.config.seed)
            tokenizer = AutoTokenizer.from_pretrained(self.config.embed_model)
            model = AutoModel.from_pretrained(self.config.embed_model)
            model.to(self.config.device).eval()
            self._embedder = (tokenizer, model)
            self._dim = int(model.config.hidden_size)
            self._max_tokens = int(tokenizer.model_max_length)
        return self._embedder

    def info(self) -> BackendInfo:
        self._load_embedder()
        return BackendInfo(
            embed_model=self.config.embed_model,
            rerank_model=self.config.rerank_model,
            generate_model=self.config.generate_model,
            dim=self._dim or 0,
            max_tokens=self._max_tokens or 0,
            max_concurrency=self.config.max_concurrency,
        )

    def embed(self, text: str) -> EmbedResult:
        import torch

        tokenizer, model = self._load_embedder()
        encoded = tokenizer(text, return_offsets_mapping=True, return_tensors="pt",
                            truncation=True)
        offsets = encoded.pop("offset_mapping")[0].tolist()
        special_mask = tokenizer.get_special_tokens_mask(
            encoded["input_ids"][0].tolist(), already_has_special_tokens=True)
        with torch.no_grad():
            hidden = model(**{k: v.to(self.config.device) for k, v in encoded.items()})
        vectors = hidden.last_hidden_state[0].cpu().numpy()
        rows = []
        for (start, end), special, vector in zip(offsets, special_mask, vectors):
            is_special = bool(special) or start == end
            rows.append(TokenRow(start=0 if is_special else int(start),
                                 end=0 if is_special else int(end),
                                 special=is_special,
                                 vector=[float(x) for x in vector]))
        truncated = len(tokenizer(text)["input_ids"]) > (self._max_tokens or 1 << 30)
        return EmbedResult(dim=int(vectors.shape[1]), truncated=truncated, tokens=rows)

    def rerank(self, query: str, documents: list[str]) -> list[float]:
        import torch
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        if self._reranker is None:
            tokenizer = AutoTokenizer.from_pretrained(self.config.rerank_model)
            model = AutoModelForSequenceClassification.from_pretrained(
                self.config.rerank_model)
            model.to(self.config.device).eval()
            self._reranker = (tokenizer, model)
        tokenizer, model = self._reranker
        encoded = tokenizer([query] * len(documents), documents, padding=True,
                            truncation=True, return_tensors="pt")
        with torch.no_grad():
            logits = model(**{k: v.to(self.config.device) for k, v in encoded.items()}).logits
        return [float(x) for x in logits.squeeze(-1).cpu().numpy()]

    def generate(self, prompt: str, max_tokens: int) -> str:
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer

        if self._generator is None:
            tokenizer = AutoTokenizer.from_pretrained(self.config.generate_model)
            model = AutoModelForCausalLM.from_pretrained(self.config.generate_model)
            model.to(self.config.device).eval()
            self._generator = (tokenizer, model)
        tokenizer, model = self._generator
        encoded = tokenizer(prompt, return_tensors="pt")
        limit = int(getattr(model.config, "max_position_embeddings", 1 << 30))
        if encoded["input_ids"].shape[1] > limit:
            raise PromptTooLong(limit)
        if max_tokens == 0:
            return ""
        with torch.no_grad():
            out = model.generate(
                encoded["input_ids"].to(self.config.device),
                max_new_tokens=max_tokens, do_sample=False,
                pad_token_id=tokenizer.eos_token_id)
        new_tokens = out[0][encoded["input_ids"].shape[1]:]
        return tokenizer.decode(new_tokens, skip_special_tokens=True)
