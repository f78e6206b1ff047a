"""Start the sidecar: ``model-sidecar --port 8601``.

The default backend is the deterministic one. Pass ``--backend
transformers`` (with the ``models`` extra installed and weights available)
to serve real checkpoints.
"""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .backends import (DeterministicBackend, DeterministicConfig, TransformersBackend,
                       TransformersConfig)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Model sidecar HTTP service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8601)
    parser.add_argument("--backend", choices=["deterministic", "transformers"],
                        default="deterministic")
    parser.add_argument("--seed", type=int, default=0, help="Decoding seed (greedy anyway).")
    parser.add_argument("--dim", type=int, default=64,
                        help="Deterministic backend embedding dimension.")
    parser.add_argument("--alpha", type=float, default=0.5,
                        help="Deterministic backend context-mixing weight.")
    parser.add_argument("--max-tokens", type=int, default=8192,
                        help="Deterministic backend token limit per text.")
    parser.add_argument("--embed-model", default=TransformersConfig.embed_model)
    parser.add_argument("--rerank-model", default=TransformersConfig.rerank_model)
    parser.add_argument("--generate-model", default=TransformersConfig.generate_model)
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv: list[str] | None = None) -> None:
    args = build_parser().parse_args(argv)
    if args.backend == "transformers":
        backend = TransformersBackend(TransformersConfig(
            embed_model=args.embed_model,
            rerank_model=args.rerank_model,
            generate_model=args.generate_model,
            device=args.device,
            seed=args.seed,
        ))
    else:
        backend = DeterministicBackend(DeterministicConfig(
            dim=args.dim, alpha=args.alpha, max_tokens=args.max_tokens, seed=args.seed))
    uvicorn.run(create_app(backend), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
