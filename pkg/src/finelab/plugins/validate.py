"""
Argument validation plugin.

Builds a pydantic model from a handler's type hints at registration time and
validates every call against it. ``Annotated[float, Field(gt=0)]`` style hints
carry range constraints; violations surface as ParameterError.
"""

from __future__ import annotations

import inspect
from typing import TYPE_CHECKING, Any, Callable, Optional, get_type_hints

from pydantic import ConfigDict, ValidationError, create_model

from ..core import StepPlugin, StepRegistry
from ..errors import ParameterError

if TYPE_CHECKING:
    from ..core import StepEntry


class ValidatePlugin(StepPlugin):
    """
    Validate handler arguments from type hints.

        formulas = StepRegistry("formulas").plug("validate")

        @formulas
        def two_constant_bound(omega: Annotated[float, Field(ge=0, le=1)], ...):
            ...
    """

    def __init__(self, name: Optional[str] = None, **config: Any):
        super().__init__(name=name or "validate", **config)

    def on_decore(self, registry: StepRegistry, func: Callable, entry: "StepEntry") -> None:
        try:
            hints = get_type_hints(func, include_extras=True)
        except Exception:
            entry.metadata["validate"] = {"enabled": False}
            return
        hints.pop("return", None)
        if not hints:
            entry.metadata["validate"] = {"enabled": False}
            return

        sig = inspect.signature(func)
        fields = {}
        for param_name, hint in hints.items():
            param = sig.parameters.get(param_name)
            if param is None or param.default is inspect.Parameter.empty:
                fields[param_name] = (hint, ...)
            else:
                fields[param_name] = (hint, param.default)

        model = create_model(  # type: ignore[call-overload]
            f"{func.__name__}_Args",
            __config__=ConfigDict(arbitrary_types_allowed=True),
            **fields,
        )
        entry.metadata["validate"] = {
            "enabled": True,
            "model": model,
            "hints": hints,
            "signature": sig,
        }

    def wrap_handler(
        self, registry: StepRegistry, entry: "StepEntry", call_next: Callable
    ) -> Callable:
        meta = entry.metadata.get("validate", {})
        if not meta.get("enabled", False):
            return call_next

        model = meta["model"]
        hints = meta["hints"]
        sig = meta["signature"]

        def validated(*args: Any, **kwargs: Any):
            bound = sig.bind(*args, **kwargs)
            bound.apply_defaults()
            to_check = {k: v for k, v in bound.arguments.items() if k in hints}
            try:
                checked = model(**to_check)
            except ValidationError as exc:
                problems = "; ".join(
                    f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
                )
                raise ParameterError(f"invalid arguments for {entry.name}: {problems}") from exc
            final = dict(bound.arguments)
            final.update({k: getattr(checked, k) for k in to_check})
            return call_next(**final)

        return validated


StepRegistry.register_plugin("validate", ValidatePlugin)
