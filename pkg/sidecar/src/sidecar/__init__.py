"""Provider sidecar: real or mock embeddings and translation over NDJSON."""

__version__ = "0.1.0"
