"""embedsvc: a minimal HTTP service exposing a frozen transformer
encoder for query embedding."""

from .app import create_app
from .encoder import Encoder

__version__ = "0.1.0"

__all__ = ["Encoder", "create_app"]
