"""Local HTTP service exposing pattern editing and simulated playback."""

from .app import create_app

__all__ = ["create_app"]
