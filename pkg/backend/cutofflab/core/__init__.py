"""Core functionality for the cut-off laboratory"""

from .config import settings, get_settings
from .logging_config import setup_logging

__all__ = ["settings", "get_settings", "setup_logging"]
