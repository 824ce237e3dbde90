"""HTTP service surface for the audit engine."""

from .app import app, create_app

__all__ = ["app", "create_app"]
