"""model_sidecar: HTTP service for token embeddings, reranking, and generation."""

from .app import create_app
from .backends import (DeterministicBackend, DeterministicConfig, TransformersBackend,
                       TransformersConfig)

__version__ = "0.1.0"
