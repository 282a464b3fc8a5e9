"""
Trace plugin.

Reports step calls, their results and wall time through the ``finelab.steps``
logger, with composable display flags.
"""

from __future__ import annotations

import logging
import reprlib
import time
from typing import TYPE_CHECKING, Any, Callable, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..core import StepPlugin, StepRegistry

if TYPE_CHECKING:
    from ..core import StepEntry

_short = reprlib.Repr()
_short.maxstring = 60
_short.maxother = 60
_short.maxlist = 4
_short.maxtuple = 4


class TraceConfig(BaseModel):
    """
    Configuration model for TracePlugin.

    Boolean fields can be set via flags:
        flags='enabled,after,time'  ->  enabled=True, after=True, time=True
        flags='print,log:off'       ->  print=True, log=False
    """

    model_config = ConfigDict(extra="forbid")

    enabled: bool = Field(default=False, description="Enable plugin")
    print: bool = Field(default=False, description="Use print() for output")
    log: bool = Field(default=True, description="Use Python logging")
    before: bool = Field(default=True, description="Show input parameters")
    after: bool = Field(default=False, description="Show return value")
    time: bool = Field(default=False, description="Show execution time")


class TracePlugin(StepPlugin):
    """
    Registry plugin reporting each step as it runs.

    Examples:
        >>> steps = StepRegistry("steps").plug("trace", flags="print,enabled,after")
        >>> @steps
        ... def add(a, b):
        ...     return a + b
        >>> steps["add"](2, 3)
        → add(2, 3)
        ← add() → 5
        5

    Per-step configuration:

        >>> steps.trace.configure["quarter-bound"].flags = "time"
    """

    config_model = TraceConfig

    def __init__(self, name: Optional[str] = None, logger: Optional[logging.Logger] = None, **kwargs):
        super().__init__(name=name or "trace", **kwargs)
        self._logger = logger or logging.getLogger("finelab.steps")

    def _output(self, message: str, cfg: dict, level: str = "info") -> None:
        # Falls back to print() when logging has not been configured.
        if cfg.get("print"):
            print(message)
        elif cfg.get("log"):
            if self._logger.hasHandlers():
                getattr(self._logger, level)(message)
            else:
                print(message)

    @staticmethod
    def _format_args(args: tuple, kwargs: dict) -> str:
        parts = [_short.repr(a) for a in args]
        parts.extend(f"{k}={_short.repr(v)}" for k, v in kwargs.items())
        return ", ".join(parts)

    def wrap_handler(
        self, registry: StepRegistry, entry: "StepEntry", call_next: Callable
    ) -> Callable:
        step = entry.name

        def traced(*args: Any, **kwargs: Any):
            cfg = self.get_config(step)
            if not cfg.get("enabled", True):
                return call_next(*args, **kwargs)
            if cfg.get("before"):
                self._output(f"→ {step}({self._format_args(args, kwargs)})", cfg)
            start = time.perf_counter() if cfg.get("time") else None

            def elapsed() -> str:
                return f" ({time.perf_counter() - start:.4f}s)" if start is not None else ""

            try:
                result = call_next(*args, **kwargs)
            except Exception as exc:
                if cfg.get("after"):
                    msg = f"✗ {step}() raised {type(exc).__name__}: {exc}{elapsed()}"
                    self._output(msg, cfg, level="error")
                raise
            if cfg.get("after"):
                self._output(f"← {step}() → {_short.repr(result)}{elapsed()}", cfg)
            return result

        return traced


StepRegistry.register_plugin("trace", TracePlugin)
