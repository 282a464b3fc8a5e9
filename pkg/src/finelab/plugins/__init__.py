"""Plugins shipped with finelab registries."""

from __future__ import annotations

from .guard import GuardPlugin
from .trace import TracePlugin
from .validate import ValidatePlugin

__all__ = ["GuardPlugin", "TracePlugin", "ValidatePlugin"]
