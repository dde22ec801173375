"""Config parsing and validation."""

import pytest

from itflow.config import ExperimentSpec, SweepSpec, parse_config_text
from itflow.errors import ConfigError


BASE = """
model.L = 6
generator.variant = per_term
integrator.epsilon = 0.05
integrator.tau_max = 1.0
"""


class TestParsing:
    def test_basic_types(self):
        cfg = parse_config_text(
            """
            # a comment
            model.L = 8            # trailing comment
            model.lambda_z = 2.0
            generator.variant = naive
            truncation.schedule = [[0.0, null]]
            output.dir = out/run1
            engine.merge_coupled = true
            """
        )
        assert cfg["model.L"] == 8
        assert cfg["model.lambda_z"] == 2.0
        assert cfg["generator.variant"] == "naive"
        assert cfg["truncation.schedule"] == [[0.0, None]]
        assert cfg["output.dir"] == "out/run1"
        assert cfg["engine.merge_coupled"] is True

    def test_duplicate_key(self):
        with pytest.raises(ConfigError):
            parse_config_text("model.L = 4\nmodel.L = 6\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError):
            parse_config_text("model.L 4\n")


class TestExperimentSpec:
    def test_minimal(self):
        spec = ExperimentSpec.from_mapping(parse_config_text(BASE))
        assert spec.length == 6
        assert spec.variant.kind == "per_term"
        assert spec.schedule.active_width(0.0) is None
        assert spec.stride == 1
        assert spec.prune_tol == 1e-12

    def test_required_keys(self):
        with pytest.raises(ConfigError, match="model.L"):
            ExperimentSpec.from_mapping({"integrator.epsilon": 0.1, "integrator.tau_max": 1.0})

    def test_unknown_key(self):
        cfg = parse_config_text(BASE + "mystery.knob = 3\n")
        with pytest.raises(ConfigError, match="mystery.knob"):
            ExperimentSpec.from_mapping(cfg)

    def test_naive_rejects_truncation(self):
        cfg = parse_config_text(BASE.replace("per_term", "naive"))
        cfg["truncation.schedule"] = [[0.0, 3]]
        with pytest.raises(ConfigError, match="naive"):
            ExperimentSpec.from_mapping(cfg)

    def test_gauge_on_non_gauged_variant(self):
        cfg = parse_config_text(BASE + "generator.u1 = 2.0\n")
        with pytest.raises(ConfigError):
            ExperimentSpec.from_mapping(cfg)

    def test_schedule_width_beyond_chain(self):
        cfg = parse_config_text(BASE)
        cfg["truncation.schedule"] = [[0.0, 7]]
        with pytest.raises(ConfigError, match="chain length"):
            ExperimentSpec.from_mapping(cfg)

    def test_bad_epsilon_and_horizon(self):
        cfg = parse_config_text(BASE)
        cfg["integrator.epsilon"] = -0.1
        with pytest.raises(ConfigError):
            ExperimentSpec.from_mapping(cfg)
        cfg = parse_config_text(BASE)
        cfg["integrator.tau_max"] = 0.01
        with pytest.raises(ConfigError):
            ExperimentSpec.from_mapping(cfg)

    def test_mapping_roundtrip(self):
        spec = ExperimentSpec.from_mapping(parse_config_text(BASE))
        again = ExperimentSpec.from_mapping(spec.mapping())
        assert again == spec


class TestSweepSpec:
    def test_axes_and_points(self):
        sweep = SweepSpec.from_mapping(
            parse_config_text(
                BASE + "sweep.integrator.epsilon = [0.1, 0.05]\nsweep.model.L = [4, 6]\n"
            )
        )
        pts = sweep.points()
        assert len(pts) == 4
        # declaration order: epsilon is the outer axis
        assert pts[0][0] == {"integrator.epsilon": 0.1, "model.L": 4}
        assert pts[1][0] == {"integrator.epsilon": 0.1, "model.L": 6}
        assert pts[3][0] == {"integrator.epsilon": 0.05, "model.L": 6}
        assert pts[3][1]["model.L"] == 6

    def test_empty_axes_single_point(self):
        sweep = SweepSpec.from_mapping(parse_config_text(BASE))
        assert len(sweep.points()) == 1

    def test_unknown_axis(self):
        with pytest.raises(ConfigError):
            SweepSpec.from_mapping(parse_config_text(BASE + "sweep.not.a.key = [1]\n"))

    def test_point_cap(self):
        big = BASE + "sweep.model.L = " + str(list(range(2, 300))) + "\n"
        with pytest.raises(ConfigError, match="cap"):
            SweepSpec.from_mapping(parse_config_text(big))

    def test_base_validated_eagerly(self):
        with pytest.raises(ConfigError):
            SweepSpec.from_mapping(parse_config_text("model.L = 1\n" + BASE.replace("model.L = 6\n", "")))
