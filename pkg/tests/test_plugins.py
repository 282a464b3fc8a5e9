"""
Tests for the trace, guard and validate plugins.
"""

from __future__ import annotations

import logging
from typing import Annotated

import pytest
from pydantic import Field, ValidationError

from finelab.core import StepRegistry
from finelab.errors import CircleSelectionError, FineLabError, ParameterError, StepFailed
from finelab.plugins import GuardPlugin, TracePlugin, ValidatePlugin


class TestTraceFlags:
    """Flag parsing on the trace configuration model."""

    def test_defaults(self):
        """Test the plugin starts disabled, logging inputs only."""
        cfg = TracePlugin()._global_config
        assert cfg["enabled"] is False
        assert cfg["log"] is True
        assert cfg["print"] is False
        assert cfg["before"] is True
        assert cfg["after"] is False
        assert cfg["time"] is False

    def test_composed_flags(self):
        """Test several flags in one string."""
        cfg = TracePlugin(flags="print,enabled,before:off,after,time")._global_config
        assert cfg["print"] is True
        assert cfg["before"] is False
        assert cfg["after"] is True
        assert cfg["time"] is True

    def test_unknown_flags_ignored(self):
        """Test flags naming no boolean field are dropped."""
        cfg = TracePlugin(flags="enabled,bogus")._global_config
        assert "bogus" not in cfg

    def test_unknown_keyword_rejected(self):
        """Test extra=forbid on the configuration model."""
        with pytest.raises(ValidationError):
            TracePlugin(colour="red")


class TestTraceOutput:
    """What the trace plugin writes."""

    def test_print_before_and_after(self, capsys):
        """Test print mode shows the call and its result."""
        steps = StepRegistry("steps").plug("trace", flags="print,enabled,after")

        @steps
        def add(a, b):
            return a + b

        assert steps["add"](2, 3) == 5
        out = capsys.readouterr().out
        assert "→ add(2, 3)" in out
        assert "← add() → 5" in out

    def test_disabled_is_silent(self, capsys):
        """Test nothing is written while the plugin is disabled."""
        steps = StepRegistry("steps").plug("trace", flags="print")

        @steps
        def run():
            return 1

        steps["run"]()
        assert capsys.readouterr().out == ""

    def test_time_flag(self, capsys):
        """Test elapsed time is appended to the result line."""
        steps = StepRegistry("steps").plug("trace", flags="print,enabled,before:off,after,time")

        @steps
        def run():
            return None

        steps["run"]()
        out = capsys.readouterr().out
        assert out.startswith("← run()")
        assert "s)" in out

    def test_error_reported(self, capsys):
        """Test exceptions are reported and re-raised."""
        steps = StepRegistry("steps").plug("trace", flags="print,enabled,after")

        @steps
        def boom():
            raise RuntimeError("bad")

        with pytest.raises(RuntimeError):
            steps["boom"]()
        assert "✗ boom() raised RuntimeError: bad" in capsys.readouterr().out

    def test_logger_used_when_configured(self, caplog):
        """Test log mode goes through the given logger."""
        logger = logging.getLogger("finelab.test.trace")
        steps = StepRegistry("steps").plug(TracePlugin, flags="enabled", logger=logger)

        @steps
        def run(x):
            return x

        with caplog.at_level(logging.INFO, logger="finelab.test.trace"):
            steps["run"](7)
        assert any("→ run(7)" in r.getMessage() for r in caplog.records)

    def test_per_step_flags(self, capsys):
        """Test per-step configuration overrides the global flags."""
        steps = StepRegistry("steps").plug("trace", flags="print,enabled")

        @steps
        def quiet():
            return 1

        @steps
        def loud():
            return 2

        steps.trace.configure["quiet"].flags = "enabled:off"
        steps["quiet"]()
        steps["loud"]()
        out = capsys.readouterr().out
        assert "quiet" not in out
        assert "→ loud()" in out

    def test_long_arguments_shortened(self, capsys):
        """Test large arguments are summarized."""
        steps = StepRegistry("steps").plug("trace", flags="print,enabled")

        @steps
        def run(values):
            return len(values)

        steps["run"](list(range(1000)))
        assert "..." in capsys.readouterr().out


class TestGuard:
    """Failure labelling."""

    def test_finelab_error_gets_step(self):
        """Test an unlabelled error is tagged with the step name."""
        steps = StepRegistry("steps", prefix="step_").plug("guard")

        @steps
        def step_convergence():
            raise ParameterError("no")

        with pytest.raises(ParameterError) as info:
            steps["convergence"]()
        assert info.value.step == "convergence"

    def test_own_label_kept(self):
        """Test errors carrying a label keep it."""
        steps = StepRegistry("steps", prefix="step_").plug("guard")

        @steps
        def step_normalization():
            raise CircleSelectionError("circle meets U")

        with pytest.raises(CircleSelectionError) as info:
            steps["normalization"]()
        assert info.value.step == "circle-selection"

    def test_foreign_error_wrapped(self):
        """Test non-finelab exceptions become StepFailed."""
        steps = StepRegistry("steps").plug(GuardPlugin)

        @steps
        def run():
            raise ZeroDivisionError("zero")

        with pytest.raises(StepFailed) as info:
            steps["run"]()
        assert info.value.step == "run"
        assert isinstance(info.value.cause, ZeroDivisionError)
        assert isinstance(info.value, FineLabError)

    def test_wrap_foreign_off(self):
        """Test wrap_foreign:off lets foreign errors through."""
        steps = StepRegistry("steps").plug("guard", flags="wrap_foreign:off")

        @steps
        def run():
            raise KeyError("k")

        with pytest.raises(KeyError):
            steps["run"]()

    def test_guard_outside_trace(self, capsys):
        """Test the label survives a trace layer underneath."""
        steps = StepRegistry("steps").plug("guard").plug("trace", flags="print,enabled,after")

        @steps
        def run():
            raise ParameterError("p")

        with pytest.raises(ParameterError) as info:
            steps["run"]()
        assert info.value.step == "run"
        assert "✗ run()" in capsys.readouterr().out


class TestValidate:
    """Argument validation from type hints."""

    @pytest.fixture
    def formulas(self):
        formulas = StepRegistry("formulas").plug(ValidatePlugin)

        @formulas
        def scaled(x: Annotated[float, Field(gt=0)], factor: int = 2) -> float:
            return x * factor

        return formulas

    def test_valid_call(self, formulas):
        """Test a valid call passes through with coerced values."""
        assert formulas["scaled"](1.5) == 3.0
        assert formulas["scaled"](1.5, factor="3") == 4.5

    def test_range_violation(self, formulas):
        """Test a constraint violation becomes ParameterError."""
        with pytest.raises(ParameterError) as info:
            formulas["scaled"](-1.0)
        assert "scaled" in str(info.value)
        assert "x" in str(info.value)

    def test_type_violation(self, formulas):
        """Test a non-numeric argument."""
        with pytest.raises(ParameterError):
            formulas["scaled"]("abc")

    def test_unhinted_handler_untouched(self):
        """Test handlers without hints are not validated."""
        formulas = StepRegistry("formulas").plug("validate")

        @formulas
        def raw(x):
            return x

        assert formulas["raw"]("anything") == "anything"
        assert formulas.describe()["steps"]["raw"]["metadata_keys"] == ["validate"]
