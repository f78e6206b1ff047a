"""HTTP clients for the model sidecar's embed / rerank / generate endpoints.

The sidecar speaks plain JSON over HTTP:
  GET  /v1/info      -> {"models": {...}, "dim": int, "max_tokens": int,
                         "max_concurrency": int}
  POST /v1/embed     {"texts": [...], "mode": "tokens"} ->
                     {"results": [{"dim": int, "truncated": bool,
                       "tokens": [{"start": int, "end": int, "special": bool}],
                       "vectors": [[...], ...]}]}
  POST /v1/rerank    {"query": str, "documents": [...]} -> {"scores": [...]}
  POST /v1/generate  {"prompt": str, "max_tokens": int} -> {"text": str}

Tokens flagged ``special`` (zero-width BOS/EOS markers) are excluded from
pooling on this side.
"""

from __future__ import annotations

import logging
import time

import numpy as np
import requests

from .embedding import EmbeddingProviderInfo, TokenEmbeddingMatrix
from .errors import ProviderError, ValidationError

logger = logging.getLogger(__name__)

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class _SidecarClient:
    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 2,
                 backoff: float = 0.2, session: requests.Session | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._session = session or requests.Session()

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        url = f"{self.endpoint}{path}"
        attempt = 0
        while True:
            try:
                response = self._session.request(method, url, json=payload,
                                                 timeout=self.timeout)
            except requests.RequestException as e:
                if attempt >= self.retries:
                    raise ProviderError(f"{url}: {e}") from e
                time.sleep(self.backoff * (2 ** attempt))
                attempt += 1
                continue
            if response.status_code in _RETRYABLE_STATUS and attempt < self.retries:
                time.sleep(self.backoff * (2 ** attempt))
                attempt += 1
                continue
            if response.status_code != 200:
                raise ProviderError(
                    f"{url}: HTTP {response.status_code}: {response.text[:200]}",
                    retryable=response.status_code in _RETRYABLE_STATUS,
                )
            return response.json()

    def ping(self) -> None:
        """Raise ProviderError if the sidecar is unreachable."""
        self._request("GET", "/v1/info")


class RemoteEmbedder(_SidecarClient):
    """Token-level embedding provider backed by the sidecar /v1/embed endpoint."""

    def __init__(self, endpoint: str, **kwargs):
        super().__init__(endpoint, **kwargs)
        self._info: EmbeddingProviderInfo | None = None

    def info(self) -> EmbeddingProviderInfo:
        if self._info is None:
            data = self._request("GET", "/v1/info")
            self._info = EmbeddingProviderInfo(
                name=str(data.get("models", {}).get("embed", "remote")),
                dim=int(data["dim"]),
                max_tokens=int(data["max_tokens"]),
            )
        return self._info

    def embed_tokens(self, text: str, doc_id: str = "") -> TokenEmbeddingMatrix:
        if not text:
            raise ValidationError("cannot embed empty text")
        data = self._request("POST", "/v1/embed", {"texts": [text], "mode": "tokens"})
        results = data.get("results", [])
        if len(results) != 1:
            raise ProviderError(f"expected 1 embedding result, got {len(results)}",
                                retryable=False)
        result = results[0]
        offsets: list[tuple[int, int]] = []
        rows: list[list[float]] = []
        for token, vector in zip(result["tokens"], result["vectors"]):
            if token.get("special", False):
                continue  # zero-width BOS/EOS markers stay out of pooling
            offsets.append((int(token["start"]), int(token["end"])))
            rows.append(vector)
        if not offsets:
            raise ValidationError("degenerate input: provider returned no real tokens")
        return TokenEmbeddingMatrix(
            doc_id=doc_id,
            tokens=offsets,
            vectors=np.asarray(rows, dtype=np.float64),
            truncated=bool(result.get("truncated", False)),
        )


class RemoteReranker(_SidecarClient):
    """Cross-encoder scores from the sidecar /v1/rerank endpoint."""

    name = "remote-reranker"

    def score(self, query: str, documents: list[str]) -> list[float]:
        data = self._request("POST", "/v1/rerank", {"query": query, "documents": documents})
        scores = data.get("scores")
        if not isinstance(scores, list) or len(scores) != len(documents):
            raise ProviderError("reranker response malformed", retryable=False)
        return [float(s) for s in scores]


class RemoteGenerator(_SidecarClient):
    """Text generation via the sidecar /v1/generate endpoint."""

    name = "remote-generator"

    def generate(self, prompt: str, max_tokens: int) -> str:
        data = self._request("POST", "/v1/generate",
                             {"prompt": prompt, "max_tokens": max_tokens})
        return str(data.get("text", ""))
