"""
Tests for StepRegistry: registration, retrieval and the plugin chain.
"""

import unittest

from finelab.core import StepEntry, StepPlugin, StepRegistry


class CountPlugin(StepPlugin):
    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        self.calls = 0

    def wrap_handler(self, registry, entry, call_next):
        def wrapper(*args, **kwargs):
            self.calls += 1
            return call_next(*args, **kwargs)

        return wrapper


class MetaPlugin(StepPlugin):
    def on_decore(self, registry, func, entry):
        entry.metadata["decorated"] = True


class OrderPlugin(StepPlugin):
    def __init__(self, log, **kwargs):
        super().__init__(**kwargs)
        self.log = log

    def wrap_handler(self, registry, entry, call_next):
        def wrapper(*args, **kwargs):
            self.log.append(self.name)
            return call_next(*args, **kwargs)

        return wrapper


class TestRegistration(unittest.TestCase):
    """Prefix stripping, aliases and collisions."""

    def test_prefix_is_stripped_and_dashed(self):
        """Test step_arc_selection registers as arc-selection."""
        steps = StepRegistry("steps", prefix="step_")

        @steps
        def step_arc_selection(x):
            return x

        self.assertIn("arc-selection", steps)
        self.assertNotIn("step_arc_selection", steps)
        self.assertEqual(steps["arc-selection"](3), 3)

    def test_alias_wins(self):
        """Test an explicit alias replaces the derived name."""
        steps = StepRegistry("steps", prefix="step_")

        @steps("quarter-bound")
        def step_quarter(x):
            return 2 * x

        self.assertEqual(steps.names(), ["quarter-bound"])
        self.assertEqual(steps["quarter-bound"](2), 4)

    def test_name_without_prefix_kept(self):
        """Test functions not carrying the prefix keep their name."""
        steps = StepRegistry("steps", prefix="step_")

        @steps
        def two_constant_bound():
            return 1

        self.assertIn("two_constant_bound", steps)

    def test_collision_raises(self):
        """Test registering the same logical name twice."""
        steps = StepRegistry("steps", prefix="step_")

        @steps
        def step_thinness():
            return 1

        with self.assertRaises(ValueError) as cm:

            @steps("thinness")
            def other():
                return 2

        self.assertIn("collision", str(cm.exception))

    def test_registration_order(self):
        """Test names() keeps registration order."""
        steps = StepRegistry("steps", prefix="step_")
        for name in ("c", "a", "b"):
            steps(name)(lambda: None)
        self.assertEqual(steps.names(), ["c", "a", "b"])

    def test_call_with_bad_arguments(self):
        """Test direct calls that are not decorator usage."""
        steps = StepRegistry("steps")
        with self.assertRaises(TypeError):
            steps(1, 2)
        with self.assertRaises(TypeError):
            steps("name", extra=True)

    def test_entry_attached_to_wrapper(self):
        """Test the wrapped handler exposes its entry."""
        steps = StepRegistry("steps")

        @steps
        def run():
            return 1

        entry = getattr(run, "__finelab_step__")
        self.assertIsInstance(entry, StepEntry)
        self.assertEqual(entry.name, "run")
        self.assertIs(entry.registry, steps)


class TestRetrieval(unittest.TestCase):
    """get(), __getitem__ and default handlers."""

    def test_get_unknown_raises(self):
        """Test unknown names without a fallback."""
        steps = StepRegistry("steps")
        with self.assertRaises(NotImplementedError) as cm:
            steps.get("missing")
        self.assertIn("missing", str(cm.exception))

    def test_get_with_default_handler(self):
        """Test a per-call fallback."""
        steps = StepRegistry("steps")
        handler = steps.get("missing", default_handler=lambda: "fallback")
        self.assertEqual(handler(), "fallback")

    def test_get_with_init_default(self):
        """Test get_default_handler collected from the constructor."""
        steps = StepRegistry("steps", get_default_handler=lambda: "init")
        self.assertEqual(steps.get("missing")(), "init")

    def test_runtime_default_overrides_init(self):
        """Test per-call options win over constructor defaults."""
        steps = StepRegistry("steps", get_default_handler=lambda: "init")
        self.assertEqual(steps.get("missing", default_handler=lambda: "runtime")(), "runtime")

    def test_registered_step_beats_default(self):
        """Test the default is only used for unknown names."""
        steps = StepRegistry("steps", get_default_handler=lambda: "init")

        @steps
        def run():
            return "run"

        self.assertEqual(steps.get("run")(), "run")


class TestPlugins(unittest.TestCase):
    """Plugin attachment and chain order."""

    def test_plug_class_and_count(self):
        """Test wrap_handler runs on every call."""
        steps = StepRegistry("steps").plug(CountPlugin, name="count")

        @steps
        def run(x):
            return x + 1

        self.assertEqual(steps["run"](1), 2)
        self.assertEqual(steps["run"](2), 3)
        self.assertEqual(steps.count.calls, 2)

    def test_on_decore_mutates_metadata(self):
        """Test on_decore runs once at registration."""
        steps = StepRegistry("steps").plug(MetaPlugin)

        @steps
        def run():
            return None

        self.assertIn("decorated", steps.describe()["steps"]["run"]["metadata_keys"])

    def test_first_plugin_is_outermost(self):
        """Test plugins wrap in attachment order."""
        log = []
        steps = StepRegistry("steps").plug(OrderPlugin(log, name="outer")).plug(OrderPlugin(log, name="inner"))

        @steps
        def run():
            log.append("run")

        steps["run"]()
        self.assertEqual(log, ["outer", "inner", "run"])

    def test_disabled_plugin_is_skipped(self):
        """Test enabled:off bypasses a plugin for one step."""
        steps = StepRegistry("steps").plug(CountPlugin, name="count")

        @steps
        def a():
            return "a"

        @steps
        def b():
            return "b"

        steps.count.configure["a"].enabled = False
        steps["a"]()
        steps["b"]()
        self.assertEqual(steps.count.calls, 1)

    def test_plug_after_registration_rejected(self):
        """Test plugins must be attached before steps."""
        steps = StepRegistry("steps")

        @steps
        def run():
            return None

        with self.assertRaises(ValueError):
            steps.plug(CountPlugin)

    def test_unknown_plugin_name(self):
        """Test plug() with an unregistered name lists the catalogue."""
        with self.assertRaises(ValueError) as cm:
            StepRegistry("steps").plug("not-a-plugin")
        self.assertIn("Unknown plugin name", str(cm.exception))

    def test_plug_rejects_foreign_objects(self):
        """Test non-plugin classes and objects."""

        class NotAPlugin:
            pass

        with self.assertRaises(TypeError):
            StepRegistry("steps").plug(NotAPlugin)
        with self.assertRaises(TypeError):
            StepRegistry("steps").plug(42)

    def test_register_plugin_type_check(self):
        """Test the global catalogue only accepts StepPlugin subclasses."""
        with self.assertRaises(TypeError):
            StepRegistry.register_plugin("bad", object)

    def test_register_and_plug_by_name(self):
        """Test the global catalogue resolves names."""
        StepRegistry.register_plugin("count-test", CountPlugin)
        steps = StepRegistry("steps").plug("count-test")
        self.assertIsNotNone(steps.plugin("count-test"))
        self.assertIn("count-test", StepRegistry.registered_plugins())

    def test_missing_plugin_attribute(self):
        """Test attribute access for a plugin that is not attached."""
        steps = StepRegistry("steps")
        with self.assertRaises(AttributeError) as cm:
            steps.trace
        self.assertIn("no plugin named", str(cm.exception))

    def test_describe(self):
        """Test describe() lists plugins and steps."""
        steps = StepRegistry("steps", prefix="step_").plug(MetaPlugin, name="meta")

        @steps
        def step_one():
            return 1

        desc = steps.describe()
        self.assertEqual(desc["name"], "steps")
        self.assertEqual(desc["prefix"], "step_")
        self.assertEqual(desc["plugins"], ["meta"])
        self.assertEqual(desc["steps"]["one"]["plugins"], ["meta"])


class TestConfiguration(unittest.TestCase):
    """Flags strings and configure proxies."""

    def test_flags_without_model(self):
        """Test flags parse into booleans when no model is set."""
        plugin = StepPlugin(flags="a,b:off")
        self.assertEqual(plugin.get_config(), {"a": True, "b": False})

    def test_step_config_with_commas(self):
        """Test step_config keys naming several steps."""
        plugin = StepPlugin(flags="enabled", step_config={"x,y": "enabled:off"})
        self.assertFalse(plugin.is_enabled_for("x"))
        self.assertFalse(plugin.is_enabled_for("y"))
        self.assertTrue(plugin.is_enabled_for("z"))

    def test_configure_proxies(self):
        """Test global and per-step assignment through configure."""
        plugin = StepPlugin()
        plugin.configure.level = 3
        plugin.configure["a, b"].level = 5
        self.assertEqual(plugin.configure.level, 3)
        self.assertEqual(plugin.configure["a"].level, 5)
        self.assertEqual(plugin.get_config("b")["level"], 5)
        self.assertEqual(plugin.get_config("c")["level"], 3)

    def test_flags_property(self):
        """Test flags read back as the enabled booleans."""
        plugin = StepPlugin()
        plugin.configure.flags = "x,y"
        self.assertEqual(set(plugin.configure.flags.split(",")), {"x", "y"})
        plugin.configure["s"].flags = "y:off"
        self.assertEqual(plugin.configure["s"].flags, "x")


if __name__ == "__main__":
    unittest.main()
