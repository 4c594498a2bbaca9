import json
import math
from pathlib import Path

import pytest

from core.config import get_settings
from core.exceptions import ConfigurationError, DataNotFoundError
from core.parsing import apply_overrides, parse_config, parse_config_dict, serialize_config


def write_config(path, payload):
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


class TestParseConfig:
    def test_defaults_filled_in(self, tmp_path):
        config = parse_config(write_config(tmp_path / "c.json", {"experiment": "analytic-curves"}))
        assert config.experiment == "analytic-curves"
        assert config.protocol.m == 2
        assert config.chain.epsilon == pytest.approx(1e-4)
        assert config.seed is None

    def test_serialized_config_parses_back(self):
        config = parse_config_dict(
            {"experiment": "combined-figure5", "seed": 3, "protocol": {"kappa": 0.01, "t_rec": 12.5}}
        )
        assert parse_config_dict(json.loads(serialize_config(config))) == config

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataNotFoundError):
            parse_config(str(tmp_path / "absent.json"))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{\"experiment\": ", encoding="utf-8")
        with pytest.raises(ConfigurationError) as exc:
            parse_config(str(path))
        assert exc.value.details["line"] == 1

    def test_root_must_be_object(self):
        with pytest.raises(ConfigurationError):
            parse_config_dict(["analytic-curves"])

    def test_negative_kappa_reported_by_field(self):
        with pytest.raises(ConfigurationError) as exc:
            parse_config_dict({"experiment": "combined-figure5", "protocol": {"kappa": -1.0}})
        assert "protocol.kappa" in exc.value.details["errors"]

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigurationError):
            parse_config_dict({"experiment": "combined-figure5", "protocol": {"kapa": 0.1}})

    def test_unknown_experiment_rejected(self):
        with pytest.raises(ConfigurationError):
            parse_config_dict({"experiment": "figure-6"})

    def test_odd_m_rejected(self):
        with pytest.raises(ConfigurationError):
            parse_config_dict({"experiment": "combined-figure5", "protocol": {"m": 3}})

    def test_code_phase(self):
        assert parse_config_dict({"experiment": "jumpcode-recovery", "code": {"phase": math.pi}}).code.phase == math.pi
        with pytest.raises(ConfigurationError):
            parse_config_dict({"experiment": "jumpcode-recovery", "code": {"phase": 1.0}})

    def test_explicit_chain_needs_both_lists(self):
        with pytest.raises(ConfigurationError):
            parse_config_dict({"experiment": "combined-figure5", "chain": {"detunings": [0.1, 0.2]}})
        config = parse_config_dict(
            {"experiment": "combined-figure5", "chain": {"detunings": [0.1, 0.2], "couplings_z": [0.05]}}
        )
        assert config.chain.couplings_z == [0.05]


class TestApplyOverrides:
    def test_command_line_wins(self):
        config = parse_config_dict({"experiment": "analytic-curves", "seed": 7, "threads": 2, "output_dir": "a"})
        resolved = apply_overrides(config, seed=3, threads=4, output_dir="b")
        assert (resolved.seed, resolved.threads, resolved.output_dir) == (3, 4, "b")

    def test_config_wins_over_settings(self):
        config = parse_config_dict({"experiment": "analytic-curves", "seed": 7, "threads": 2, "output_dir": "a"})
        resolved = apply_overrides(config)
        assert (resolved.seed, resolved.threads, resolved.output_dir) == (7, 2, "a")

    def test_settings_fill_the_rest(self):
        settings = get_settings()
        resolved = apply_overrides(parse_config_dict({"experiment": "analytic-curves"}))
        assert resolved.seed == settings.master_seed
        assert resolved.threads == settings.threads
        assert resolved.output_dir == settings.output_dir

    def test_seed_zero_is_kept(self):
        resolved = apply_overrides(parse_config_dict({"experiment": "analytic-curves", "seed": 9}), seed=0)
        assert resolved.seed == 0

    def test_invalid_override(self):
        with pytest.raises(ConfigurationError):
            apply_overrides(parse_config_dict({"experiment": "analytic-curves"}), threads=100)


CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    assert parse_config(str(path)).experiment.replace("-", "_") == path.stem
