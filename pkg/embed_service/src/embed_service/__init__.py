"""Embedding microservice speaking the /v1/embed + /v1/health protocol."""

__version__ = "0.1.0"
