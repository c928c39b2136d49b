"""End-to-end tests of the command line on small synthetic corpora."""

import json

import pandas as pd
import pytest

from cli import main
from src.basis.polynomial import BasisSpec
from src.ebayes.marginal import HyperParams
from src.noisemodel.covariance import EgoNoiseParams
from src.regress.metrics import TABLE_COLUMNS
from src.regress.posterior import PriorParams


def _synth(tmp_path, name, **settings):
    config = tmp_path / f"{name}.json"
    config.write_text(json.dumps(settings))
    output = tmp_path / name
    assert main(["synth", "--config", str(config), "--output-dir", str(output)]) == 0
    return output / "corpus.csv"


def test_help_without_command(capsys):
    assert main([]) == 0
    assert "synth" in capsys.readouterr().out


def test_synth_is_idempotent(tmp_path):
    config = tmp_path / "synth.json"
    config.write_text(json.dumps({"n_trajectories": 10, "samples": 20, "seed": 3}))
    for name in ("a", "b"):
        assert main(["synth", "--config", str(config), "--output-dir", str(tmp_path / name)]) == 0
    for file_name in ("corpus.csv", "corpus_truth.json"):
        assert (tmp_path / "a" / file_name).read_bytes() == (tmp_path / "b" / file_name).read_bytes()


def test_synth_invalid_json_reports_location(tmp_path, capsys):
    config = tmp_path / "broken.json"
    config.write_text('{\n  "n_trajectories": 10,\n  "samples": \n}\n')
    assert main(["synth", "--config", str(config), "--output-dir", str(tmp_path / "out")]) == 2
    assert f"{config}:4" in capsys.readouterr().err
    assert not (tmp_path / "out" / "corpus.csv").exists()


def test_clean_synthetic_corpus_has_no_outliers(tmp_path):
    corpus = _synth(tmp_path, "agents", n_trajectories=30, samples=50, object_class="agent", seed=1)
    output = tmp_path / "clean"
    assert main(["clean", "--input", str(corpus), "--class", "agent", "--output-dir", str(output)]) == 0

    report = json.loads((output / "outliers.json").read_text())
    assert report["n_trajectories"] == 30
    assert all(count == 0 for count in report["counts"].values())
    assert pd.read_csv(output / "clean.csv")["object_id"].nunique() == 1
    assert len(pd.read_csv(output / "clean.csv")) == 30 * 50


def test_clean_counts_injected_jumps(tmp_path):
    corpus = _synth(tmp_path, "jumps", n_trajectories=100, samples=50, object_class="agent", seed=2,
                    outlier_rates={"jump": 0.1})
    truth = json.loads((tmp_path / "jumps" / "corpus_truth.json").read_text())
    injected = sum("jump" in tr["outliers"] for tr in truth["trajectories"])
    output = tmp_path / "clean"
    assert main(["clean", "--input", str(corpus), "--class", "agent", "--output-dir", str(output)]) == 0
    report = json.loads((output / "outliers.json").read_text())
    assert report["counts"]["rts"] == injected


def test_clean_missing_input(tmp_path, capsys):
    output = tmp_path / "out"
    assert main(["clean", "--input", str(tmp_path / "nope.csv"), "--output-dir", str(output)]) == 2
    assert "nope.csv" in capsys.readouterr().err
    assert not output.exists() or not any(output.iterdir())


def test_fit_ego_writes_scores_and_hyperparameters(tmp_path):
    corpus = _synth(tmp_path, "ego", n_trajectories=40, samples=20, degree=2, object_class="ego", seed=4)
    output = tmp_path / "fit"
    argv = ["fit", "--input", str(corpus), "--class", "ego", "--degree-range", "1..3", "--output-dir", str(output)]
    assert main(argv) == 0

    scores = pd.read_csv(output / "scores_ego_T5.csv")
    assert list(scores["n"]) == [1, 2, 3]
    hyper = json.loads((output / "hyper_ego_T5.json").read_text())
    assert set(hyper["noise"]) == {"sigma_diag", "sigma_cov"}
    assert hyper["class"] == "ego"
    for n in (1, 2, 3):
        assert (output / f"hyper_ego_T5_n{n}.json").exists()


def test_fit_agent_noise_table(tmp_path):
    corpus = _synth(tmp_path, "agent", n_trajectories=40, samples=30, degree=2, object_class="agent", seed=5)
    output = tmp_path / "fit"
    argv = ["fit", "--input", str(corpus), "--class", "agent", "--degree", "2", "--output-dir", str(output)]
    assert main(argv) == 0

    hyper = json.loads((output / "hyper_agent_T5.json").read_text())
    assert set(hyper["noise"]) == {"sigma_alpha", "beta0", "beta1", "beta2", "sigma_c"}
    noise = pd.read_csv(output / "noise_agent_T5.csv")
    assert {"sigma_r@10m", "sigma_r@20m", "sigma_r@40m"} <= set(noise["parameter"])


def test_fit_bic_uses_nominal_samples_per_horizon(tmp_path):
    corpus = _synth(tmp_path, "ego", n_trajectories=20, samples=20, degree=1, object_class="ego", seed=7)
    output = tmp_path / "fit"
    argv = ["fit", "--input", str(corpus), "--class", "ego", "--degree", "1", "--criterion", "paper-aic",
            "--output-dir", str(output)]
    assert main(argv) == 0
    assert list(pd.read_csv(output / "scores_ego_T5.csv")["nominal_m"]) == [50]
    assert main(argv + ["--sample-rate", "4"]) == 0
    assert list(pd.read_csv(output / "scores_ego_T5.csv")["nominal_m"]) == [20]


def test_fit_requires_class_and_degree(tmp_path):
    corpus = _synth(tmp_path, "ego", n_trajectories=3, samples=20, object_class="ego")
    assert main(["fit", "--input", str(corpus), "--degree", "2", "--output-dir", str(tmp_path)]) == 2
    assert main(["fit", "--input", str(corpus), "--class", "ego", "--output-dir", str(tmp_path)]) == 2


@pytest.fixture
def exact_hyper(tmp_path):
    spec = BasisSpec("bernstein", 2)
    hyper = HyperParams(noise=EgoNoiseParams(1e-9, 0.0), prior=PriorParams.isotropic(spec, 100.0), spec=spec)
    path = tmp_path / "hyper.json"
    path.write_text(json.dumps(hyper.to_json()))
    return path


def test_evaluate_zero_noise_fit_is_exact(tmp_path, exact_hyper):
    corpus = _synth(tmp_path, "exact", n_trajectories=20, samples=30, degree=2, object_class="ego",
                    noise="zero", seed=6)
    output = tmp_path / "eval"
    argv = ["evaluate", "--input", str(corpus), "--hyper", str(exact_hyper), "--basis", "bernstein",
            "--output-dir", str(output)]
    assert main(argv) == 0

    table = pd.read_csv(output / "errors_ego_T5_n2.csv")
    assert list(table.columns) == TABLE_COLUMNS
    assert (table[["ade_lon", "ade_lat"]] < 1e-9).all().all()
    per_trajectory = pd.read_csv(output / "errors_per_trajectory_ego_T5_n2.csv")
    assert len(per_trajectory) == 20
    assert (per_trajectory["ade"] < 1e-9).all()
    quantiles = pd.read_csv(output / "quantiles_ego_T5_n2.csv")
    assert list(quantiles["quantile"]) == [0.25, 0.5, 0.75, 0.999]


def test_evaluate_mismatched_hyperparameters(tmp_path, exact_hyper, capsys):
    corpus = _synth(tmp_path, "exact", n_trajectories=3, samples=20, object_class="ego", noise="zero")
    argv = ["evaluate", "--input", str(corpus), "--hyper", str(exact_hyper), "--basis", "bernstein",
            "--horizon", "4", "--output-dir", str(tmp_path / "eval")]
    assert main(argv) == 4
    assert "horizon" in capsys.readouterr().err
    argv = ["evaluate", "--input", str(corpus), "--hyper", str(exact_hyper), "--basis", "bernstein",
            "--degree", "3", "--output-dir", str(tmp_path / "eval")]
    assert main(argv) == 4


def test_config_command(capsys):
    assert main(["config", "--class", "agent", "--horizon", "3", "--criterion", "paper-aic"]) == 0
    out = capsys.readouterr().out
    assert "Class: agent" in out
    assert "Horizon: 3 s" in out
    assert "Criterion: paper-aic" in out
    assert "Sample Rate: 10 Hz (30 samples per horizon)" in out
