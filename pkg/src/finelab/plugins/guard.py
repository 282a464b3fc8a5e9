"""
Guard plugin.

Labels failures with the step that raised them. A FineLabError raised inside a
step keeps its type and gets ``step`` set when it has none; any other
exception is wrapped into StepFailed so callers only ever see FineLabError.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Any, Callable, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..core import StepPlugin, StepRegistry
from ..errors import FineLabError, StepFailed

if TYPE_CHECKING:
    from ..core import StepEntry

logger = logging.getLogger("finelab.steps")


class GuardConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    enabled: bool = Field(default=True, description="Enable plugin")
    wrap_foreign: bool = Field(default=True, description="Wrap non-finelab exceptions")


class GuardPlugin(StepPlugin):
    """Attach the failing step's name to exceptions escaping a step."""

    config_model = GuardConfig

    def __init__(self, name: Optional[str] = None, **kwargs: Any):
        super().__init__(name=name or "guard", **kwargs)

    def wrap_handler(
        self, registry: StepRegistry, entry: "StepEntry", call_next: Callable
    ) -> Callable:
        step = entry.name

        def guarded(*args: Any, **kwargs: Any):
            try:
                return call_next(*args, **kwargs)
            except FineLabError as exc:
                if exc.step is None:
                    exc.step = step
                logger.debug("step %s failed: %s", exc.step, exc)
                raise
            except Exception as exc:
                if not self.get_config(step).get("wrap_foreign"):
                    raise
                logger.debug("step %s raised %s", step, type(exc).__name__)
                raise StepFailed(step, exc) from exc

        return guarded


StepRegistry.register_plugin("guard", GuardPlugin)
