"""Tests for degrees of freedom, information criteria and the degree scan."""

import json

import numpy as np
import pytest

from src.basis.polynomial import BasisSpec
from src.ebayes.optimizer import OptimizerConfig
from src.ebayes.selection import SCORE_COLUMNS, ModelScore, ScanResult, dof, scan_degrees, score
from src.synth.generator import SynthConfig, generate
from src.utils.errors import ArgumentError


def _score(n, aic, bic, aic_conventional=None):
    return ModelScore(n=n, log_type2=0.0, aic=aic, bic=bic, dof=1,
                      aic_conventional=aic if aic_conventional is None else aic_conventional,
                      bic_conventional=bic, n_trajectories=1, nominal_m=50.0)


def _ego_corpus(degree, seed, n=200, m=50):
    cfg = SynthConfig(n_trajectories=n, samples=m, degree=degree, object_class="ego", noise="a2",
                      prior="wiggly", seed=seed)
    return generate(cfg)[0]


def test_dof_examples():
    assert dof(BasisSpec("monomial", 5), "ego") == 2 + 78
    assert dof(BasisSpec("bernstein", 6), "agent") == 5 + 105


def test_dof_formula():
    for n in range(10):
        P = 2 * (n + 1)
        assert dof(BasisSpec("monomial", n), "ego") == 2 + P * (P + 1) // 2
        assert dof(BasisSpec("monomial", n), "agent") == 5 + P * (P + 1) // 2


def test_criterion_names_map_to_score_fields():
    s = _score(2, aic=-1.0, bic=-3.0, aic_conventional=-50.0)
    assert s.criterion("paper-aic") == -1.0
    assert s.criterion("aic") == -50.0
    assert s.criterion("bic") == -3.0


def test_selected_is_argmax_per_criterion():
    result = ScanResult(scores=[_score(1, -10.0, -12.0), _score(2, -4.0, -9.0), _score(3, -5.0, -11.0)])
    assert result.selected == {"paper-aic": 2, "aic": 2, "bic": 2}
    result.scores.append(_score(4, -3.0, -20.0))
    assert result.selected["paper-aic"] == 4
    assert result.selected["bic"] == 2
    assert ScanResult().selected == {}


def test_scan_result_files(tmp_path):
    result = ScanResult(scores=[_score(1, -10.0, -12.0), _score(2, -4.0, -9.0)])
    csv_path, json_path = result.write(tmp_path / "scores.csv", tmp_path / "scores.json")
    lines = csv_path.read_text().splitlines()
    assert lines[0].split(",") == SCORE_COLUMNS
    assert len(lines) == 3
    data = json.loads(json_path.read_text())
    assert data["selected"]["paper-aic"] == 2
    assert [s["n"] for s in data["scores"]] == [1, 2]


def test_empty_degree_range():
    with pytest.raises(ArgumentError):
        scan_degrees([], [], BasisSpec("monomial", 1), "ego")


def test_score_normalization():
    corpus = _ego_corpus(degree=1, seed=2, n=40, m=20)
    result = scan_degrees(corpus, [1], BasisSpec("monomial", 1), "ego")
    s = result.scores[0]
    assert s.n_trajectories == 40
    assert s.nominal_m == 20
    assert s.aic == pytest.approx(s.log_type2 / 40 - s.dof)
    assert s.bic == pytest.approx(s.log_type2 / 40 - 0.5 * s.dof * np.log(20))
    assert s.aic_conventional == pytest.approx(s.log_type2 - s.dof)
    assert s.bic_conventional == pytest.approx(s.log_type2 - 0.5 * s.dof * np.log(40))
    # m >= 8 makes the BIC penalty the larger one
    assert s.bic <= s.aic
    assert score(corpus, result.hypers[1], nominal_m=5).nominal_m == 5


@pytest.mark.parametrize("true_degree", [2, 3])
def test_scan_recovers_generating_degree(true_degree):
    corpus = _ego_corpus(degree=true_degree, seed=true_degree)
    cfg = OptimizerConfig(method="lbfgs")
    result = scan_degrees(corpus, range(1, 6), BasisSpec("monomial", 1), "ego", cfg)
    assert [s.n for s in result.scores] == [1, 2, 3, 4, 5]
    assert set(result.hypers) == {1, 2, 3, 4, 5}
    assert result.selected["paper-aic"] == true_degree
    assert result.selected["bic"] == true_degree
    assert result.best("bic").degree == true_degree


@pytest.mark.slow
@pytest.mark.parametrize("true_degree", [2, 3, 5])
def test_scan_recovery_rate(true_degree):
    cfg = OptimizerConfig(method="lbfgs", threads=4)
    hits = 0
    for seed in range(20):
        corpus = _ego_corpus(degree=true_degree, seed=100 + seed)
        result = scan_degrees(corpus, range(1, 9), BasisSpec("monomial", 1), "ego", cfg)
        hits += result.selected["paper-aic"] == true_degree
    assert hits >= 19
