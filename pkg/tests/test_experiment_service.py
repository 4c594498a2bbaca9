import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from core.exceptions import ValidationError
from core.schema import ExperimentConfig
from services.experiment_service import ExperimentService


def make_config(tmp_path, experiment, seed=5, **sections):
    return ExperimentConfig.model_validate(
        {"experiment": experiment, "seed": seed, "threads": 1, "output_dir": str(tmp_path), **sections}
    )


def read(path):
    return pd.read_csv(path)


def meta(path):
    return json.loads(Path(path).with_name(Path(path).stem + ".meta.json").read_text(encoding="utf-8"))


class TestJumpcodeRecovery:
    def test_every_qubit_recovered(self, tmp_path):
        config = make_config(tmp_path, "jumpcode-recovery", code={"n_logical_values": [1, 2]})
        (path,) = ExperimentService(config).run()
        frame = read(path)
        assert len(frame) == 4 + 6
        np.testing.assert_allclose(frame["fidelity"], 1.0, atol=1e-10)
        assert meta(path)["diagnostics"]["min_fidelity"] == pytest.approx(1.0, abs=1e-10)

    def test_phase_pi(self, tmp_path):
        config = make_config(tmp_path, "jumpcode-recovery", code={"n_logical_values": [3], "phase": np.pi})
        (path,) = ExperimentService(config).run()
        np.testing.assert_allclose(read(path)["fidelity"], 1.0, atol=1e-10)

    def test_four_qubit_variant(self, tmp_path):
        config = make_config(tmp_path, "jumpcode-recovery", code={"variant": "FOUR_QUBIT"})
        (path,) = ExperimentService(config).run()
        frame = read(path)
        assert frame["n_physical"].tolist() == [4, 4, 4, 4]
        np.testing.assert_allclose(frame["fidelity"], 1.0, atol=1e-10)

    def test_rerun_is_byte_identical(self, tmp_path):
        first = ExperimentService(make_config(tmp_path / "a", "jumpcode-recovery")).run()[0]
        second = ExperimentService(make_config(tmp_path / "b", "jumpcode-recovery")).run()[0]
        assert Path(first).read_bytes() == Path(second).read_bytes()


class TestConstantsCheck:
    def test_closed_forms_match_brute_force(self, tmp_path):
        config = make_config(tmp_path, "constants-check", analytics={"n_p_values": [4, 6], "draws": 2})
        (path,) = ExperimentService(config).run()
        frame = read(path)
        assert len(frame) == 4
        np.testing.assert_allclose(frame["c1_closed"], frame["c1_brute"], rtol=1e-8)
        np.testing.assert_allclose(frame["c2_closed"], frame["c2_brute"], rtol=1e-8)
        np.testing.assert_allclose(frame["parity_closed"], frame["parity_counted"], atol=1e-12)
        assert np.all(frame["c3_state"] >= frame["c3_lower"] * (1 - 1e-9))

    def test_seed_changes_draws(self, tmp_path):
        sections = {"analytics": {"n_p_values": [4], "draws": 1}}
        first = read(ExperimentService(make_config(tmp_path / "a", "constants-check", seed=1, **sections)).run()[0])
        second = read(ExperimentService(make_config(tmp_path / "b", "constants-check", seed=2, **sections)).run()[0])
        assert first["c2_closed"][0] != second["c2_closed"][0]


class TestAnalyticCurves:
    def test_models_and_grid(self, tmp_path):
        config = make_config(tmp_path, "analytic-curves", analytics={"points": 11, "draws": 3, "n_q": 4})
        (path,) = ExperimentService(config).run()
        frame = read(path)
        assert set(frame["model"]) == {
            "p_no_decay", "f_jumpcode", "f_coherent", "f_coherent_c3_upper", "f_id_heuristic", "f_id_c3_upper",
        }
        assert len(frame) == 6 * 11
        np.testing.assert_allclose(frame.loc[frame["time"] == 0.0, "fidelity"], 1.0)

    def test_decay_law_curve_when_requested(self, tmp_path):
        config = make_config(
            tmp_path, "analytic-curves", analytics={"points": 5, "draws": 1, "n_q": 4, "t_c": 100.0, "sigma": 0.5}
        )
        frame = read(ExperimentService(config).run()[0])
        assert "frahm" in set(frame["model"])


class TestParec:
    def test_correlation_matrix_artifacts(self, tmp_path):
        config = make_config(tmp_path, "correlation-matrix", parec={"n_q": 2, "samples": 20})
        paths = ExperimentService(config).run()
        assert [Path(p).name for p in paths] == [
            "correlation_matrix_gue.csv",
            "correlation_matrix_parec.csv",
            "correlation_matrix_parec_expected.csv",
        ]
        gue = read(paths[0])
        diagonal = gue.loc[gue["j"] == gue["k"], "value"]
        np.testing.assert_allclose(diagonal, 1.0, atol=1e-9)

    def test_sampling_can_be_disabled(self, tmp_path):
        config = make_config(tmp_path, "correlation-matrix", parec={"n_q": 2, "samples": 0})
        assert len(ExperimentService(config).run()) == 1

    def test_parec_fidelity_curves(self, tmp_path):
        config = make_config(tmp_path, "parec-fidelity", parec={"n_q": 2, "iterations": 5, "samples": 3})
        (path,) = ExperimentService(config).run()
        frame = read(path)
        assert set(frame["model"]) == {"parec_off", "parec_on", "bound"}
        assert len(frame) == 15
        assert isinstance(meta(path)["diagnostics"]["bound_respected"], bool)


class TestDecoupling:
    def test_nrd_memory_trace(self, tmp_path):
        config = make_config(
            tmp_path, "nrd-memory", decoupling={"n_q": 1, "dt": 0.01, "steps": 20, "realizations": 4}
        )
        (path,) = ExperimentService(config).run()
        frame = read(path)
        assert list(frame.columns) == ["step", "time", "fidelity", "fidelity_stderr", "prediction"]
        assert len(frame) == 21
        assert frame["fidelity"][0] == pytest.approx(1.0)

    def test_decouple_scaling_kinds(self, tmp_path):
        config = make_config(
            tmp_path,
            "decouple-scaling",
            decoupling={"n_q": 1, "dt": 0.01, "steps": 16, "realizations": 2, "kinds": ["PDD", "NRD"]},
        )
        (path,) = ExperimentService(config).run()
        assert set(read(path)["model"]) == {"PDD", "NRD"}
        assert set(meta(path)["diagnostics"]["kinds"]) == {"PDD", "NRD"}


class TestService:
    def test_unknown_experiment(self, tmp_path):
        config = ExperimentConfig.model_construct(experiment="figure-6", seed=1, threads=1, output_dir=str(tmp_path))
        with pytest.raises(ValidationError):
            ExperimentService(config).run()

    def test_child_seeds_differ_by_stream(self, tmp_path):
        service = ExperimentService(make_config(tmp_path, "analytic-curves"))
        assert service.child_seed(0) != service.child_seed(1)
        assert service.child_seed(0) == ExperimentService(make_config(tmp_path, "analytic-curves")).child_seed(0)

    def test_settings_fill_missing_values(self, output_dir):
        config = ExperimentConfig.model_validate({"experiment": "analytic-curves"})
        service = ExperimentService(config)
        assert service.output_dir == str(output_dir)
        assert service.seed == service.settings.master_seed


class TestCombinedConfigFields:
    def test_logical_qubits_set_code_size(self, tmp_path):
        config = make_config(
            tmp_path,
            "combined-figure5",
            code={"n_logical": 2},
            protocol={"kappa": 0.01, "total_time": 10.0, "grid_points": 3},
            ensemble={"trajectories": 2},
        )
        paths = ExperimentService(config).run()
        overlay = meta(paths[-1])["diagnostics"]
        assert overlay["n_logical"] == 2
        assert overlay["n_physical"] == 6
        assert overlay["t_rec"] == pytest.approx(9.5)
        assert "final_purity" not in meta(paths[3])["diagnostics"]

    def test_stored_states_report_purity(self, tmp_path):
        config = make_config(
            tmp_path,
            "combined-figure5",
            code={"n_logical": 2},
            protocol={"kappa": 0.01, "total_time": 4.0, "grid_points": 3},
            ensemble={"trajectories": 3, "store_states": True},
        )
        paths = ExperimentService(config).run()
        purity = meta(paths[3])["diagnostics"]["final_purity"]
        assert 0.0 <= purity <= 1.0 + 1e-9


@pytest.mark.slow
class TestCombinedFigure5:
    def test_writes_every_curve(self, tmp_path):
        config = make_config(
            tmp_path,
            "combined-figure5",
            protocol={"kappa": 0.01, "total_time": 20.0, "grid_points": 5},
            ensemble={"trajectories": 4},
        )
        paths = ExperimentService(config).run()
        assert [Path(p).stem for p in paths] == [
            "combined_figure5_unprotected",
            "combined_figure5_decoupling_only",
            "combined_figure5_jumpcode_only",
            "combined_figure5_combined",
            "combined_figure5_analytic",
        ]
        combined = read(paths[3])
        assert len(combined) == 5
        assert combined["fidelity_mean"][0] == pytest.approx(1.0)
        overlay = meta(paths[4])["diagnostics"]
        assert overlay["t_rec"] == pytest.approx(12.5)
        assert "caption_ordering" in overlay
