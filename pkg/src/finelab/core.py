"""
StepRegistry - named step registry with a plugin chain.

Pipelines, certification steps and bound formulas are registered by logical
name on a StepRegistry. Each registry carries an ordered stack of plugins
(tracing, failure labelling, argument validation) that wrap every handler at
registration time.

Key features:
- Optional prefix-based name normalization (``step_thinness`` -> ``thinness``).
- Explicit alias via ``@registry("alias")``.
- Name collision detection.
- Plugins with on_decore + wrap_handler hooks, enabled per registry and per step.
- Handler retrieval via ``registry.get(name)`` or ``registry[name]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Type

from smartseeds import SmartOptions, extract_kwargs

# ============================================================
# DATA STRUCTURES
# ============================================================


@dataclass
class StepEntry:
    """Metadata for a registered step."""

    name: str  # logical registered name
    func: Callable  # original function
    registry: "StepRegistry"  # owning registry
    plugins: List[str]  # ordered plugin names
    metadata: Dict[str, Any] = field(default_factory=dict)


# ============================================================
# CONFIGURATION PROXIES
# ============================================================


class StepConfigProxy:
    """
    Proxy for per-step configuration access.

        steps.trace.configure['quarter-bound'].flags = 'time'
    """

    def __init__(self, plugin: "StepPlugin", step_names: str):
        object.__setattr__(self, "_plugin", plugin)
        object.__setattr__(self, "_step_names", [s.strip() for s in step_names.split(",")])

    @property
    def flags(self) -> str:
        cfg = self._plugin.get_config(self._step_names[0])
        return ",".join(k for k, v in cfg.items() if isinstance(v, bool) and v)

    @flags.setter
    def flags(self, value: str):
        self._plugin._update_config(*self._step_names, flags=value)

    def __getattr__(self, name: str):
        if name.startswith("_"):
            return object.__getattribute__(self, name)
        return self._plugin.get_config(self._step_names[0]).get(name)

    def __setattr__(self, name: str, value: Any):
        if name.startswith("_"):
            object.__setattr__(self, name, value)
        else:
            self._plugin._update_config(*self._step_names, **{name: value})


class ConfigureProxy:
    """
    Proxy for plugin configuration (global and per-step).

        steps.trace.configure.flags = 'enabled,time'
        steps.trace.configure['normalization'].flags = 'enabled:off'
    """

    def __init__(self, plugin: "StepPlugin"):
        object.__setattr__(self, "_plugin", plugin)

    @property
    def flags(self) -> str:
        cfg = self._plugin._global_config
        return ",".join(k for k, v in cfg.items() if isinstance(v, bool) and v)

    @flags.setter
    def flags(self, value: str):
        self._plugin._update_config(flags=value)

    def __getattr__(self, name: str):
        if name.startswith("_"):
            return object.__getattribute__(self, name)
        return self._plugin._global_config.get(name)

    def __setattr__(self, name: str, value: Any):
        if name.startswith("_"):
            object.__setattr__(self, name, value)
        else:
            self._plugin._update_config(**{name: value})

    def __getitem__(self, step_names: str) -> StepConfigProxy:
        return StepConfigProxy(self._plugin, step_names)


# ============================================================
# PLUGIN BASE
# ============================================================


class StepPlugin:
    """
    Base class for registry plugins with pydantic configuration support.

    Plugins have two hooks:

    - on_decore(registry, func, entry):
        Called once at registration time. It can mutate entry.metadata.
    - wrap_handler(registry, entry, call_next):
        Returns a wrapper callable that must call call_next.

    Subclasses may define ``config_model`` (a pydantic BaseModel); its boolean
    fields can then be set with a flags string such as ``'enabled,time:off'``.
    """

    config_model: Optional[Type[Any]] = None

    def __init__(
        self,
        name: Optional[str] = None,
        flags: Optional[str] = None,
        step_config: Optional[Dict[str, Any]] = None,
        **config: Any,
    ):
        """
        Args:
            name: Plugin instance name (default: class name)
            flags: Flags string for boolean parameters ('flag1,flag2:off')
            step_config: Per-step overrides, keyed by step name or 'a,b'
            **config: Additional config parameters
        """
        self.name = name or self.__class__.__name__
        if flags:
            config.update(self._parse_flags(flags))
        if self.config_model is not None:
            self._global_config = self.config_model(**config).model_dump()
        else:
            self._global_config = dict(config)
        self._step_configs: Dict[str, Dict[str, Any]] = {}
        for names, cfg in (step_config or {}).items():
            parsed = self._parse_flags(cfg) if isinstance(cfg, str) else dict(cfg)
            for step_name in names.split(","):
                if step_name.strip():
                    self._step_configs[step_name.strip()] = parsed

    def _bool_fields(self) -> set:
        if self.config_model is None:
            return set()
        return {
            name
            for name, info in self.config_model.model_fields.items()
            if info.annotation in (bool, Optional[bool])
        }

    def _parse_flags(self, flags: str) -> Dict[str, bool]:
        """
        Parse a flags string.

        'a,b' -> a=True, b=True; 'a:off' -> a=False. Unknown flags are ignored
        when a config_model is defined.
        """
        bool_fields = self._bool_fields()
        result = {}
        for flag in flags.split(","):
            flag = flag.strip()
            if not flag:
                continue
            value = not flag.endswith(":off")
            key = flag.replace(":off", "").strip()
            if not bool_fields or key in bool_fields:
                result[key] = value
        return result

    def _update_config(self, *step_names: str, flags: Optional[str] = None, **config: Any):
        if flags:
            config.update(self._parse_flags(flags))
        if not step_names:
            self._global_config.update(config)
            return
        for name in step_names:
            self._step_configs.setdefault(name, {}).update(config)

    @property
    def configure(self) -> ConfigureProxy:
        return ConfigureProxy(self)

    def get_config(self, step_name: Optional[str] = None) -> Dict[str, Any]:
        """Return the global configuration merged with the step's overrides."""
        merged = dict(self._global_config)
        if step_name and step_name in self._step_configs:
            merged.update(self._step_configs[step_name])
        return merged

    def is_enabled_for(self, step_name: Optional[str] = None) -> bool:
        return bool(self.get_config(step_name).get("enabled", True))

    def on_decore(self, registry: "StepRegistry", func: Callable, entry: StepEntry) -> None:
        return None

    def wrap_handler(
        self, registry: "StepRegistry", entry: StepEntry, call_next: Callable
    ) -> Callable:
        return call_next


# ============================================================
# STEP REGISTRY
# ============================================================


class StepRegistry:
    """
    Decorator + handler registry + plugin container.

        steps = StepRegistry("steps", prefix="step_").plug("guard").plug("trace")

        @steps
        def step_thinness(...):      # registered as "thinness"
            ...

        @steps("quarter-bound")
        def step_quarter(...):       # registered as "quarter-bound"
            ...

        steps["thinness"](...)
        steps.get("missing", default_handler=fallback)
    """

    _global_plugin_registry: Dict[str, Type[StepPlugin]] = {}

    @classmethod
    def register_plugin(cls, name: str, plugin_class: Type[StepPlugin]) -> None:
        """Register a plugin globally so it can be referenced by string name."""
        if not isinstance(plugin_class, type) or not issubclass(plugin_class, StepPlugin):
            raise TypeError("plugin_class must be a StepPlugin subclass")
        cls._global_plugin_registry[name] = plugin_class

    @classmethod
    def registered_plugins(cls) -> Dict[str, Type[StepPlugin]]:
        return dict(cls._global_plugin_registry)

    @extract_kwargs(get=True)
    def __init__(
        self,
        name: Optional[str] = None,
        *,
        prefix: str = "",
        get_kwargs: Optional[Dict[str, Any]] = None,
    ):
        self.name = name
        self.prefix = prefix
        self.get_kwargs = get_kwargs or {}
        self._plugins: List[StepPlugin] = []
        self._entries: Dict[str, StepEntry] = {}

    # --------------------------------------------------------
    # Handler retrieval
    # --------------------------------------------------------
    def get(self, name: str, **options: Any) -> Callable:
        """
        Get a handler by name.

        Args:
            name: Registered step name.
            **options: Overrides of the registry's get defaults:
                - default_handler: fallback callable when the name is unknown

        Raises:
            NotImplementedError: If the name is unknown and no default_handler is set.
        """
        opts = SmartOptions(incoming=options, defaults=self.get_kwargs)
        entry = self._entries.get(name)
        if entry is not None:
            return entry.metadata["wrapped"]
        default = getattr(opts, "default_handler", None)
        if default is not None:
            return default
        raise NotImplementedError(f"Step '{name}' not found in registry {self.name!r}")

    def __getitem__(self, name: str) -> Callable:
        return self.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def names(self) -> List[str]:
        """Registered names in registration order."""
        return list(self._entries)

    # --------------------------------------------------------
    # Plugin management
    # --------------------------------------------------------
    def plug(self, plugin: Any, **config: Any) -> "StepRegistry":
        """Attach a plugin instance, class, or registered name."""
        if isinstance(plugin, str):
            try:
                plugin_class = self._global_plugin_registry[plugin]
            except KeyError:
                available = ", ".join(sorted(self._global_plugin_registry))
                raise ValueError(
                    f"Unknown plugin name {plugin!r}. Registered plugins: {available or 'none'}"
                )
            config.setdefault("name", plugin)
            p = plugin_class(**config)
        elif isinstance(plugin, type) and issubclass(plugin, StepPlugin):
            p = plugin(**config)
        elif isinstance(plugin, StepPlugin):
            p = plugin
            p._update_config(**config)
        else:
            raise TypeError("plugin must be StepPlugin subclass or instance")
        if self._entries:
            raise ValueError(f"Registry {self.name!r} already has steps; plug plugins first")
        self._plugins.append(p)
        return self

    def iter_plugins(self) -> List[StepPlugin]:
        return list(self._plugins)

    def plugin(self, name: str) -> Optional[StepPlugin]:
        for p in self._plugins:
            if p.name == name:
                return p
        return None

    def __getattr__(self, name: str) -> StepPlugin:
        if name.startswith("_"):
            raise AttributeError(name)
        plugin = self.plugin(name)
        if plugin is not None:
            return plugin
        raise AttributeError(
            f"'{type(self).__name__}' object has no attribute '{name}' "
            f"and no plugin named '{name}' is attached"
        )

    # --------------------------------------------------------
    # Registration
    # --------------------------------------------------------
    def _normalize_name(self, func_name: str, alias: Optional[str]) -> str:
        if alias:
            name = alias
        elif self.prefix and func_name.startswith(self.prefix):
            name = func_name[len(self.prefix) :].replace("_", "-")
        else:
            name = func_name
        if name in self._entries:
            raise ValueError(f"Step name collision in registry {self.name!r}: {name!r}")
        return name

    def _decorate(self, func: Callable, *, alias: Optional[str] = None) -> Callable:
        entry = StepEntry(
            name=self._normalize_name(func.__name__, alias),
            func=func,
            registry=self,
            plugins=[p.name for p in self._plugins],
        )
        for plugin in self._plugins:
            plugin.on_decore(self, func, entry)

        wrapped = entry.func
        for plugin in reversed(self._plugins):

            def make_layer(plg: StepPlugin, call_next: Callable) -> Callable:
                wrapped_call = plg.wrap_handler(self, entry, call_next)

                def layer(*args, **kwargs):
                    if not plg.is_enabled_for(entry.name):
                        return call_next(*args, **kwargs)
                    return wrapped_call(*args, **kwargs)

                return layer

            wrapped = make_layer(plugin, wrapped)

        setattr(wrapped, "__finelab_step__", entry)
        entry.metadata["wrapped"] = wrapped
        self._entries[entry.name] = entry
        return wrapped

    def __call__(self, *args, **kwargs):
        """
        Decorator usage only: ``@registry`` or ``@registry("alias")``.

        For retrieval use ``registry.get(name)`` or ``registry[name]``.
        """
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return self._decorate(args[0])
        if len(args) == 1 and isinstance(args[0], str) and not kwargs:
            alias = args[0]

            def decorator(func: Callable) -> Callable:
                return self._decorate(func, alias=alias)

            return decorator
        raise TypeError(
            "StepRegistry() supports only decorator usage: @registry or @registry('alias'). "
            "For retrieval use registry.get('name') or registry['name']"
        )

    # --------------------------------------------------------
    # Introspection
    # --------------------------------------------------------
    def describe(self) -> Dict[str, Any]:
        """Return a dictionary describing this registry."""
        return {
            "name": self.name,
            "prefix": self.prefix,
            "plugins": [p.name for p in self._plugins],
            "steps": {
                name: {
                    "plugins": entry.plugins,
                    "metadata_keys": [k for k in entry.metadata if k != "wrapped"],
                }
                for name, entry in self._entries.items()
            },
        }
