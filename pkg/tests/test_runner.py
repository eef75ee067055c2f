import json

import numpy as np
import pandas as pd
import pytest

import polaring.main
from polaring.errors import ConfigError, ExclusionBudgetExceeded, OutputExistsError, TrajectoryAborted
from polaring.observables.transport import SteadyStateSummary
from polaring.runner.config import THREADS_ENV, RunConfig, load_config, resolve_threads, split_unit
from polaring.runner.ensemble import EnsembleScheduler, run_ensemble
from polaring.runner.experiments import ExperimentResult, run_direct
from polaring.runner.figures import FIGURE_ALIASES, FIGURES, figure_names, reproduce_figure, resolve_figure
from polaring.runner.output import EXCLUDED, MANIFEST_NAME, OK, OutputWriter, RunManifest, deviation_statistics
from polaring.events import JOURNAL_NAME, EventEmitter, EventType

SMALL = {
    "integrator.t_max_fs": 20.0,
    "run.ensemble_size": 4,
    "run.batch_size": 2,
    "disorder.sigma_e_cm1": 100.0,
}


def small_config(tmp_path, name="run", **overrides) -> RunConfig:
    return RunConfig().with_overrides({**SMALL, "run.output_dir": str(tmp_path / name), **overrides})


class TestConfig:
    def test_defaults(self):
        config = load_config()
        assert config.geometry.n_sites == 16
        assert config.bath.omega0_cm1 == 1670.0
        assert config.integrator.dt_fs == 0.05
        assert config.sink_spec() is None
        assert config.is_clean

    def test_load_toml(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('[disorder]\nsigma_j_cm1 = 150\n\n[spectra]\nt_w_fs = [0, 100]\n', encoding="utf-8")
        config = load_config(path)
        assert config.disorder.sigma_j_cm1 == 150.0
        assert config.spectra.t_w_fs == (0.0, 100.0)
        assert config.disorder.sigma == 150.0

    def test_shipped_configs_load(self):
        from pathlib import Path

        for path in sorted((Path(__file__).parent.parent / "configs").glob("*.toml")):
            assert isinstance(load_config(path), RunConfig)

    def test_split_unit(self):
        assert split_unit("radius_angstrom") == ("radius", "angstrom")
        assert split_unit("dipole_constant_cm1_angstrom3") == ("dipole_constant", "cm1_angstrom3")
        assert split_unit("huang_rhys") == ("huang_rhys", None)

    def test_unit_mismatch(self):
        with pytest.raises(ConfigError, match="unit mismatch") as info:
            RunConfig.from_dict({"geometry": {"radius_nm": 2.3}})
        assert info.value.section == "geometry"
        assert info.value.key == "radius_nm"
        assert info.value.unit == "angstrom"

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            RunConfig.from_dict({"run": {"bogus": 1}})

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown section"):
            RunConfig.from_dict({"plots": {}})

    def test_type_errors(self):
        with pytest.raises(ConfigError, match="integer"):
            RunConfig.from_dict({"run": {"ensemble_size": 2.5}})
        with pytest.raises(ConfigError, match="number"):
            RunConfig.from_dict({"bath": {"huang_rhys": "large"}})

    @pytest.mark.parametrize(
        "data",
        [
            {"disorder": {"sigma_e_cm1": -5.0}},
            {"bath": {"bandwidth_w": 1.5}},
            {"geometry": {"n_sites": 7}},
            {"initial": {"site": 16}},
            {"sink": {"site": 20}},
            {"integrator": {"dt_fs": 1.0}},
            {"run": {"experiment": "fit"}},
            {"spectra": {"t_w_fs": [-1.0]}},
            {"analysis": {"ipr_exponent": 3}},
        ],
    )
    def test_out_of_range(self, data):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(data)

    def test_duplicate_key(self, tmp_path):
        path = tmp_path / "dup.toml"
        path.write_text("[run]\nseed = 1\nseed = 2\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.toml")

    def test_overrides_skip_none_and_revalidate(self):
        config = RunConfig().with_overrides({"disorder.sigma_e_cm1": 50.0, "bath.huang_rhys": None})
        assert config.disorder.sigma_e_cm1 == 50.0
        assert config.bath.huang_rhys == 0.5
        with pytest.raises(ConfigError):
            config.with_overrides({"disorder.sigma_e_cm1": -1.0})
        with pytest.raises(ConfigError):
            config.with_overrides({"nowhere.key": 1})

    def test_config_hash(self):
        a = RunConfig().with_overrides({"run.seed": 7})
        b = RunConfig.from_dict(json.loads(a.canonical_json()))
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != RunConfig().config_hash()

    def test_resolve_threads(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "3")
        assert resolve_threads(RunConfig()) == 3
        assert resolve_threads(RunConfig().with_overrides({"run.threads": 2})) == 2
        monkeypatch.setenv(THREADS_ENV, "many")
        with pytest.raises(ConfigError):
            resolve_threads(RunConfig())
        monkeypatch.delenv(THREADS_ENV)
        assert resolve_threads(RunConfig()) >= 1


class TestScheduler:
    def test_batches(self):
        assert EnsembleScheduler(batch_size=4).batches(10) == [range(0, 4), range(4, 8), range(8, 10)]

    def test_ordered_payloads(self):
        outcome = EnsembleScheduler(threads=4, batch_size=3).run(lambda r: (list(r), {}), 10)
        assert [i for batch in outcome.payloads for i in batch] == list(range(10))
        assert outcome.status == [OK] * 10

    def test_failed_batch_is_excluded(self):
        def task(indices):
            if 2 in indices:
                raise RuntimeError("boom")
            return list(indices), {}

        outcome = EnsembleScheduler(threads=2, batch_size=2).run(task, 6)
        assert sorted(outcome.excluded) == [2, 3]
        assert outcome.status == [OK, OK, EXCLUDED, EXCLUDED, OK, OK]
        assert outcome.n_ok == 4
        assert outcome.over_budget(0.01)
        assert not outcome.over_budget(0.5)

    def test_events(self):
        seen = []
        emitter = EventEmitter()
        emitter.add_handler(seen.append)
        EnsembleScheduler(batch_size=2, emitter=emitter).run(lambda r: (None, {r.start: "dropped"}), 4)
        kinds = [e.type for e in seen]
        assert kinds.count(EventType.BATCH_FINISHED) == 2
        assert kinds.count(EventType.REALIZATION_EXCLUDED) == 2

    @pytest.mark.parametrize("kwargs", [{"threads": 0}, {"batch_size": 0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            EnsembleScheduler(**kwargs)


class TestOutput:
    def test_refuses_non_empty_directory(self, tmp_path):
        (tmp_path / "old.csv").write_text("x\n", encoding="utf-8")
        with pytest.raises(OutputExistsError):
            OutputWriter(tmp_path)
        assert OutputWriter(tmp_path, force=True).root == tmp_path

    def test_force_removes_previous_run_files(self, tmp_path):
        old = OutputWriter(tmp_path / "out")
        old.write_columns("observables.csv", {"time_fs": [0.0], "norm": [1.0]})
        old.write_manifest(RunManifest("dynamics", "h", "0", "", "", 0.0, [OK], files=old.checksums()))
        (tmp_path / "out" / JOURNAL_NAME).write_text("{}\n", encoding="utf-8")
        (tmp_path / "out" / "notes.txt").write_text("keep me\n", encoding="utf-8")

        OutputWriter(tmp_path / "out", force=True)
        remaining = sorted(p.name for p in (tmp_path / "out").iterdir())
        assert remaining == ["notes.txt"]

    def test_force_ignores_entries_outside_the_run(self, tmp_path):
        (tmp_path / "outside.csv").write_text("x\n", encoding="utf-8")
        run = tmp_path / "out"
        run.mkdir()
        (run / MANIFEST_NAME).write_text(json.dumps({"files": {"../outside.csv": "0"}}), encoding="utf-8")
        OutputWriter(run, force=True)
        assert (tmp_path / "outside.csv").exists()
        assert not (run / MANIFEST_NAME).exists()

    def test_grid_is_long_format(self, tmp_path):
        writer = OutputWriter(tmp_path / "out")
        writer.write_grid("g.csv", np.array([0.0, 1.0]), np.arange(6.0).reshape(3, 2), "site", "value")
        frame = pd.read_csv(tmp_path / "out" / "g.csv")
        assert list(frame.columns) == ["time_fs", "site", "value"]
        assert frame["value"].tolist() == [0.0, 2.0, 4.0, 1.0, 3.0, 5.0]
        assert list(writer.checksums()) == ["g.csv"]

    def test_deviation_statistics(self):
        assert deviation_statistics([None, None]) == {"mean": None, "max": None, "count": 0}
        stats = deviation_statistics([0.1, None, 0.3])
        assert stats["count"] == 2
        assert stats["mean"] == pytest.approx(0.2)
        assert stats["max"] == pytest.approx(0.3)


class TestExperiments:
    def test_dynamics_run(self, tmp_path):
        config = small_config(tmp_path)
        manifest, result = run_ensemble(config, threads=1)
        root = tmp_path / "run"
        for name in ("n_k.csv", "xi_n.csv", "populations.csv", MANIFEST_NAME, JOURNAL_NAME):
            assert (root / name).exists()
        for stem in ("L_c", "ipr", "L_s", "msd", "e_total", "deviation", "norm"):
            assert f"trajectory_{stem}.csv" in manifest.files
        assert "observables.csv" not in manifest.files
        assert JOURNAL_NAME not in manifest.files
        assert manifest.realization_status == [OK] * 4
        assert manifest.config_hash == config.config_hash()
        assert manifest.deviation_stats["count"] == 4

        norm = pd.read_csv(root / "trajectory_norm.csv")
        assert list(norm.columns) == ["time_fs", "norm"]
        assert norm["norm"].to_numpy() == pytest.approx(1.0, abs=1e-8)
        assert norm["time_fs"].iloc[-1] == pytest.approx(20.0)
        coherence = pd.read_csv(root / "trajectory_L_c.csv")
        assert list(coherence.columns) == ["time_fs", "L_c_sites"]
        assert len(coherence) == len(norm)

        journal = [json.loads(line) for line in (root / JOURNAL_NAME).read_text(encoding="utf-8").splitlines()]
        assert journal[0]["type"] == "run_started"
        assert journal[-1]["type"] == "run_finished"

        with pytest.raises(OutputExistsError):
            run_ensemble(config, threads=1)
        run_ensemble(config, force=True, threads=1)

    def test_thread_count_does_not_change_outputs(self, tmp_path):
        one, _ = run_ensemble(small_config(tmp_path, "one"), threads=1)
        two, _ = run_ensemble(small_config(tmp_path, "two"), threads=2)
        assert one.files == two.files

    def test_statics_run(self, tmp_path):
        config = small_config(tmp_path, **{"run.experiment": "statics", "analysis.min_spacings": 20})
        manifest, result = run_ensemble(config, threads=1)
        assert set(manifest.files) >= {"ipr_vs_energy.csv", "brody_map.csv", "clean_spectrum.csv"}
        clean = pd.read_csv(tmp_path / "run" / "clean_spectrum.csv")
        assert len(clean) == 16
        assert clean["L_s"].sum() == pytest.approx(16.0)

        ipr = pd.read_csv(tmp_path / "run" / "ipr_vs_energy.csv")
        assert list(ipr.columns)[:3] == ["sigma", "energy_cm1", "ipr"]
        assert (ipr["sigma"] == 100.0).all()
        brody = pd.read_csv(tmp_path / "run" / "brody_map.csv")
        assert {"sigma", "window_lo", "window_hi", "beta", "class"} <= set(brody.columns)

    def test_transfer_needs_sink(self, tmp_path):
        with pytest.raises(ConfigError, match="sink"):
            run_direct(small_config(tmp_path, **{"run.experiment": "transfer"}))

    def test_transfer_run(self):
        config = RunConfig().with_overrides({
            **SMALL,
            "run.experiment": "transfer",
            "sink.gamma_omega0": 0.1,
        })
        result = run_direct(config)
        series = result.data["series"]
        assert series["p_sink"][0] == pytest.approx(0.0)
        assert series["p_sink"][-1] > 0.0
        assert series["p_sink"] + series["norm"] == pytest.approx(np.ones(series.times.size), abs=1e-8)
        assert 0.0 < result.data["transfer"]["p_sink_final"] < 1.0

    def test_msd_run(self):
        result = run_direct(RunConfig().with_overrides({**SMALL, "run.experiment": "msd"}))
        fit = result.data["msd_fit"]
        assert fit.n_points > 2
        assert fit.diffusion_coefficient > 0.0
        assert result.data["series"]["msd_nm2"][0] == pytest.approx(0.0)

    def test_spectra_run(self, tmp_path):
        config = small_config(tmp_path, **{
            "run.experiment": "spectra",
            "run.ensemble_size": 2,
            "bath.huang_rhys": 0.0,
            "spectra.t_max_fs": 20.0,
            "spectra.step_fs": 2.0,
        })
        manifest, result = run_ensemble(config, threads=1)
        assert {"spectrum2d.csv", "spectra_summary.csv", "absorption.csv"} <= set(manifest.files)
        spectrum = result.data["spectra"][0]
        assert spectrum.n_members == 2
        omega, intensity = result.data["absorption"]
        assert intensity.max() == pytest.approx(1.0)

    def test_exclusion_budget(self, tmp_path, monkeypatch):
        from polaring.runner import experiments

        original = experiments.propagate_ensemble
        calls = []

        def first_batch_fails(*args, **kwargs):
            calls.append(1)
            if len(calls) == 1:
                raise FloatingPointError("overflow")
            return original(*args, **kwargs)

        monkeypatch.setattr(experiments, "propagate_ensemble", first_batch_fails)
        with pytest.raises(ExclusionBudgetExceeded):
            run_ensemble(small_config(tmp_path), threads=1)
        manifest = json.loads((tmp_path / "run" / MANIFEST_NAME).read_text(encoding="utf-8"))
        assert manifest["realization_status"] == [EXCLUDED, EXCLUDED, OK, OK]
        assert "realization_excluded" in (tmp_path / "run" / JOURNAL_NAME).read_text(encoding="utf-8")

    def test_every_realization_excluded(self, tmp_path, monkeypatch):
        def broken(*args, **kwargs):
            raise FloatingPointError("overflow")

        monkeypatch.setattr("polaring.runner.experiments.propagate_ensemble", broken)
        with pytest.raises(TrajectoryAborted):
            run_ensemble(small_config(tmp_path), threads=1)
        assert "run_failed" in (tmp_path / "run" / JOURNAL_NAME).read_text(encoding="utf-8")


def fake_steady_run(calls):
    """Stands in for run_ensemble: writes a steady-state table and a manifest, and counts runs."""

    def run(config, force=False, threads=None, emitter=None):
        calls.append(config.run.output_dir)
        writer = OutputWriter(config.run.output_dir, force=force)
        writer.write_columns("steady_state.csv", {
            "window_lo_fs": [150.0],
            "window_hi_fs": [300.0],
            "sigma_over_J": [0.18],
            "assc_sites": [6.5],
            "ass_ipr_sites": [5.25],
        })
        manifest = RunManifest("dynamics", config.config_hash(), "0", "", "", 0.0, [OK], files=writer.checksums())
        writer.write_manifest(manifest)
        steady = SteadyStateSummary(6.5, 5.25, (150.0, 300.0), 0.18)
        return manifest, ExperimentResult("dynamics", None, [], {"steady_state": steady})

    return run


class TestFigures:
    def test_names(self):
        assert figure_names() == [f"fig{i}" for i in range(2, 11)]
        assert FIGURE_ALIASES["coherence-grid"] == "fig4"
        assert FIGURE_ALIASES["localization"] == "fig2"
        assert resolve_figure("msd") is FIGURES["fig10"]
        assert resolve_figure("fig6").alias == "sink-transfer"

    def test_unknown_name(self, tmp_path):
        with pytest.raises(ValueError, match="valid names: fig2"):
            reproduce_figure("fig11", output_dir=tmp_path)

    def test_grid_sizes(self):
        assert len(FIGURES["fig2"].cells()) == 36
        assert len(FIGURES["fig4"].cells()) == 32
        assert len(FIGURES["fig6"].cells()) == 12
        assert FIGURES["fig2"].ensemble_size == 10_000
        assert FIGURES["fig9"].ensemble_size == 200
        transfer = FIGURES["fig6"].cells()[0]
        assert transfer.overrides["sink.gamma_omega0"] == 0.1
        assert transfer.overrides["initial.site"] == 8

    def test_cells_validate(self):
        base = RunConfig()
        for spec in FIGURES.values():
            for cell in spec.cells():
                base.with_overrides(cell.overrides)

    def test_coherence_and_ipr_grids_share_runs(self, tmp_path, monkeypatch):
        calls = []
        monkeypatch.setattr("polaring.runner.figures.run_ensemble", fake_steady_run(calls))

        fig4 = reproduce_figure("fig4", output_dir=tmp_path, ensemble_size=2)
        assert len(calls) == 32
        fig5 = reproduce_figure("ipr-grid", output_dir=tmp_path, ensemble_size=2)
        assert len(calls) == 32
        assert fig5.name == "fig5"

        assc = pd.read_csv(fig4.tables["assc"])
        ass_ipr = pd.read_csv(fig5.tables["ass_ipr"])
        assert "ass_ipr_sites" not in assc.columns
        assert "assc_sites" not in ass_ipr.columns
        assert (assc["assc_sites"] == 6.5).all()
        assert (ass_ipr["ass_ipr_sites"] == 5.25).all()
        assert assc["cell"].tolist() == ass_ipr["cell"].tolist()
        assert fig4.tables["assc"].parent == tmp_path / "fig4"

        reproduce_figure("fig5", output_dir=tmp_path, ensemble_size=2, force=True)
        assert len(calls) == 64

    def test_changed_cell_file_is_not_reused(self, tmp_path, monkeypatch):
        calls = []
        monkeypatch.setattr("polaring.runner.figures.run_ensemble", fake_steady_run(calls))
        reproduce_figure("fig4", output_dir=tmp_path, ensemble_size=2)
        first = FIGURES["fig4"].cells()[0].label
        (tmp_path / "steady-grid" / first / "steady_state.csv").write_text("tampered\n", encoding="utf-8")
        with pytest.raises(OutputExistsError):
            reproduce_figure("fig5", output_dir=tmp_path, ensemble_size=2)

    @pytest.mark.slow
    def test_energy_components(self, tmp_path):
        base = RunConfig().with_overrides({"integrator.record_stride": 200})
        bundle = reproduce_figure("energy-components", base=base, output_dir=tmp_path, ensemble_size=2, threads=1)
        assert len(bundle.cells) == 2
        assert bundle.root == tmp_path / "fig8"
        drift = pd.read_csv(bundle.tables["energy_drift"])
        assert drift["huang_rhys"].tolist() == [0.5, 1.0]
        assert (drift["e_total_drift_omega0"] < 0.05).all()
        assert (bundle.root / drift["cell"][0] / MANIFEST_NAME).exists()


class TestMain:
    def test_bad_value_exits_2(self, tmp_path, capsys):
        code = polaring.main.main(["dynamics", "--sigma-e", "-5", "-o", str(tmp_path / "out"), "-q"])
        assert code == polaring.main.EXIT_CONFIG
        assert "sigma_e_cm1" in capsys.readouterr().err

    def test_exclusions_exit_3(self, tmp_path, monkeypatch):
        def over_budget(*args, **kwargs):
            raise ExclusionBudgetExceeded("3 of 4 realizations excluded")

        monkeypatch.setattr(polaring.main, "run_ensemble", over_budget)
        assert polaring.main.main(["dynamics", "-o", str(tmp_path / "out"), "-q"]) == polaring.main.EXIT_EXCLUSIONS

    @pytest.mark.parametrize("name", ["fig4", "coherence-grid", "fig10"])
    def test_figure_accepts_numbers_and_aliases(self, name):
        args = polaring.main.build_parser().parse_args(["figure", name, "-n", "10"])
        assert args.name == name
        assert args.ensemble == 10

    def test_figure_rejects_unknown_name(self):
        with pytest.raises(SystemExit):
            polaring.main.build_parser().parse_args(["figure", "fig1"])

    def test_existing_output_exits_1(self, tmp_path):
        (tmp_path / "out").mkdir()
        (tmp_path / "out" / "trajectory_L_c.csv").write_text("x\n", encoding="utf-8")
        args = ["dynamics", "--tmax", "5", "-o", str(tmp_path / "out"), "-q"]
        assert polaring.main.main(args) == polaring.main.EXIT_FAILED

    def test_dump_model(self, tmp_path):
        out = tmp_path / "model"
        assert polaring.main.main(["dump-model", "--sigma-e", "100", "-o", str(out), "-q"]) == polaring.main.EXIT_OK
        k = pd.read_csv(out / "exciton_matrix.csv")
        assert len(k) == 256
        matrix = k["k_cm1"].to_numpy().reshape(16, 16)
        assert np.allclose(matrix, matrix.T)
        assert (out / "phonon_bath.csv").exists()

    def test_dynamics_command(self, tmp_path):
        out = tmp_path / "cli"
        args = ["dynamics", "--tmax", "5", "-n", "2", "--sigma-j", "50", "-j", "1", "-o", str(out), "-q"]
        assert polaring.main.main(args) == polaring.main.EXIT_OK
        manifest = json.loads((out / MANIFEST_NAME).read_text(encoding="utf-8"))
        assert manifest["experiment"] == "dynamics"
        assert manifest["realization_status"] == [OK, OK]
