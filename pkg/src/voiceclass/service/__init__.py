"""Live classification service: WebSocket streaming plus a model-info API."""

from .app import create_app

__all__ = ["create_app"]
