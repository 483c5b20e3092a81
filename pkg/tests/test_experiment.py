import json
import math

import numpy as np
import pytest

from hosc import experiment as ex
from hosc.codecs import read_image, write_wav
from hosc.experiment import (
    EXIT_DIVERGED,
    EXIT_OK,
    ConfigError,
    SweepAborted,
    SweepRow,
    aggregate_rows,
    config_hash,
    enumerate_sweep,
    load_run_input,
    read_sweep_csv,
    read_trace,
    resolve_config,
    resolve_sweep,
    run_dir_for,
    run_fit,
    run_sweep,
    write_sweep_csv,
)
from hosc.signals import multitone

TINY = {
    "version": 1,
    "signal": {"builtin": "checkerboard", "size": 8, "squares": 2},
    "activation": {"kind": "hosc", "beta": 14, "omega0": 30},
    "net": {"hidden_layers": 1, "width": 16},
    "train": {"epochs": 20, "log_every": 5},
}


def tiny(**over):
    raw = json.loads(json.dumps(TINY))
    for section, vals in over.items():
        raw[section].update(vals)
    return raw


class TestResolve:
    def test_defaults_filled(self):
        cfg = resolve_config({"version": 1, "signal": {"builtin": "checker_gradient"}, "activation": {"kind": "hosc"}})
        assert cfg["net"] == {"hidden_layers": 3, "width": 256, "output_linear": True, "fourier_frequencies": 0, "init_seed": 0}
        assert cfg["train"]["lr"] == 5e-4
        assert cfg["signal"] == {"builtin": "checker_gradient", "size": 64}

    def test_gaussian_lr(self):
        assert resolve_config(tiny(activation={"kind": "gaussian", "beta": 1}))["train"]["lr"] == 5e-3

    @pytest.mark.parametrize(
        "raw",
        [
            {**TINY, "extra": 1},
            tiny(net={"depth": 3}),
            tiny(train={"epochs": 0}),
            tiny(train={"epochs": 2.5}),
            tiny(activation={"kind": "relu"}),
            tiny(activation={"beta": -1}),
            tiny(activation={"beta": True}),
            {**TINY, "version": 2},
            {k: v for k, v in TINY.items() if k != "signal"},
            tiny(signal={"path": "x.ppm"}),
            tiny(signal={"builtin": "noise"}),
            tiny(net={"output_linear": "yes"}),
        ],
    )
    def test_rejected(self, raw):
        with pytest.raises(ConfigError):
            resolve_config(raw)

    def test_path_resolved_against_config_dir(self, tmp_path):
        cfg = resolve_config({**TINY, "signal": {"path": "tone.wav"}}, tmp_path)
        assert cfg["signal"]["path"] == str((tmp_path / "tone.wav").resolve())
        with pytest.raises(ConfigError):
            resolve_config({**TINY, "signal": {"path": "tone.mp3"}}, tmp_path)

    def test_hash_is_key_order_free(self):
        a = resolve_config(TINY)
        b = resolve_config(dict(reversed(list(TINY.items()))))
        assert config_hash(a) == config_hash(b)

    def test_distinct_configs_distinct_dirs(self, tmp_path):
        dirs = {run_dir_for(resolve_config(tiny(activation={"beta": b})), tmp_path) for b in (1, 2, 14)}
        assert len(dirs) == 3


class TestFit:
    def test_artifacts_and_manifest(self, tmp_path):
        res = run_fit(resolve_config(TINY), tmp_path)
        m = res.manifest
        assert res.exit_code == EXIT_OK
        assert m["format"] == "hosc-manifest" and m["version"] == 1
        assert m["config_hash"] == config_hash(m["config"])
        assert m["outcome"] == {"status": "completed", "epoch": None}
        assert m["final"]["epoch"] == 20
        assert m["best_mse"] <= m["final"]["mse"] + 1e-15
        assert m["input_sha256"] is None
        on_disk = json.loads((res.run_dir / "manifest.json").read_text())
        assert on_disk == m
        assert read_image(res.run_dir / "reconstruction.pgm").pixels.shape == (8, 8, 1)
        assert [r["epoch"] for r in read_trace(res.run_dir / "trace.csv")] == [1, 5, 10, 15, 20]

    def test_rerun_from_manifest_is_identical(self, tmp_path):
        res = run_fit(resolve_config(TINY), tmp_path)
        first = (res.run_dir / "trace.csv").read_bytes()
        cfg = load_run_input(res.run_dir / "manifest.json")
        again = run_fit(cfg, tmp_path)
        assert again.run_dir == res.run_dir
        assert (again.run_dir / "trace.csv").read_bytes() == first
        assert again.manifest["final"] == res.manifest["final"]

    def test_divergence_is_an_outcome(self, tmp_path):
        cfg = resolve_config(tiny(activation={"kind": "scaled_sine"}, train={"lr": 1e200}))
        res = run_fit(cfg, tmp_path)
        assert res.exit_code == EXIT_DIVERGED
        assert res.manifest["outcome"]["status"] == "diverged"
        assert res.manifest["final"] is None
        assert set(res.manifest["artifacts"]) == {"trace"}
        trace = read_trace(res.run_dir / "trace.csv")
        assert all(math.isfinite(r["mse"]) for r in trace)

    def test_wav_input_digest(self, tmp_path):
        write_wav(tmp_path / "tone.wav", multitone(800, 0.1))
        cfg = resolve_config({**tiny(train={"epochs": 3}), "signal": {"path": "tone.wav"}}, tmp_path)
        res = run_fit(cfg, tmp_path / "out")
        assert len(res.manifest["input_sha256"]) == 64
        assert res.manifest["artifacts"]["reconstruction"] == "reconstruction.wav"

    def test_env_output_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("HOSC_OUTPUT_ROOT", str(tmp_path / "env"))
        res = run_fit(resolve_config(tiny(train={"epochs": 2})))
        assert res.run_dir.parent == tmp_path / "env"


SWEEP = {"version": 1, "base": TINY, "axis": {"beta": [1, 5, 14]}}


class TestSweep:
    def test_rows_and_aggregates(self, tmp_path):
        path, rows = run_sweep(resolve_sweep(SWEEP), tmp_path)
        runs = [r for r in rows if r.row == "run"]
        aggs = [r for r in rows if r.row == "aggregate"]
        assert [r.beta for r in runs] == [1.0, 5.0, 14.0]
        assert len(aggs) == 3 and all(a.runs == 1 and a.mse_std is None for a in aggs)
        assert read_sweep_csv(path) == rows

    def test_seeds_give_std(self, tmp_path):
        spec = resolve_sweep({**SWEEP, "axis": {"beta": [2]}, "seeds": [0, 1, 2]})
        pts = enumerate_sweep(spec)
        assert [p.config["net"]["init_seed"] for p in pts] == [0, 1, 2]
        _, rows = run_sweep(spec, tmp_path)
        agg = rows[-1]
        mses = [r.mse for r in rows[:3]]
        assert agg.runs == 3
        assert agg.mse == pytest.approx(np.mean(mses), rel=1e-12)
        assert agg.mse_std == pytest.approx(np.std(mses, ddof=1), rel=1e-9)

    def test_axis_order(self):
        spec = resolve_sweep({**SWEEP, "axis": {"beta": [1, 2], "activation": ["hosc", "sine"]}})
        assert [(p.activation, p.beta) for p in enumerate_sweep(spec)] == [("hosc", 1), ("hosc", 2), ("sine", 1), ("sine", 2)]

    def test_empty_axis(self):
        with pytest.raises(ConfigError):
            resolve_sweep({**SWEEP, "axis": {}})
        with pytest.raises(ConfigError):
            resolve_sweep({**SWEEP, "axis": {"beta": []}})
        with pytest.raises(ConfigError):
            resolve_sweep({**SWEEP, "axis": {"width": [1]}})

    def test_partial_results_on_failure(self, tmp_path, monkeypatch):
        real = ex.run_fit
        calls = []

        def flaky(cfg, root=None, verbose=None):
            calls.append(cfg)
            if len(calls) == 2:
                raise OSError("disk full")
            return real(cfg, root, verbose)

        monkeypatch.setattr(ex, "run_fit", flaky)
        with pytest.raises(SweepAborted) as exc:
            run_sweep(resolve_sweep(SWEEP), tmp_path)
        rows = read_sweep_csv(exc.value.partial)
        assert [(r.row, r.beta) for r in rows] == [("run", 1.0), ("aggregate", 1.0)]

    def test_aggregate_statuses(self):
        def row(seed, outcome, mse):
            return SweepRow("run", "hosc", 30.0, 1.0, seed, 1, mse, None, None if mse is None else 20.0, None, outcome)

        assert aggregate_rows([row(0, "completed", 0.1), row(1, "diverged", None)])[0].outcome == "partial"
        assert aggregate_rows([row(0, "diverged", None)])[0].outcome == "diverged"
        agg = aggregate_rows([row(0, "completed", 0.1), row(1, "completed", 0.3)])[0]
        assert agg.mse == pytest.approx(0.2) and agg.outcome == "completed"

    def test_csv_round_trip_special_values(self, tmp_path):
        rows = [SweepRow("aggregate", "hosc", 30.0, 0.1, None, 2, 0.0, 0.0, math.inf, None, "completed")]
        write_sweep_csv(tmp_path / "r.csv", rows)
        assert read_sweep_csv(tmp_path / "r.csv") == rows
