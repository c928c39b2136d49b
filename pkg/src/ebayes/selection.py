"""Information-criterion model selection over the basis degree."""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.basis.polynomial import BasisSpec
from src.ebayes.marginal import CorpusObjective, HyperParams
from src.ebayes.optimizer import OptimizerConfig, fit_hyperparams
from src.noisemodel.covariance import AgentNoiseParams, EgoNoiseParams
from src.utils.errors import ArgumentError
from src.utils.logging_utils import get_logger

logger = get_logger(__name__)

CRITERIA = ("paper-aic", "aic", "bic")

SCORE_COLUMNS = ["n", "log_type2", "aic", "bic", "dof", "aic_conventional", "bic_conventional",
                 "n_trajectories", "nominal_m"]


@dataclass(frozen=True)
class ModelScore:
    """
    Criteria of one fitted degree.

    `aic` / `bic` normalize the log-likelihood per trajectory and penalize with the
    unscaled dof (BIC with log of the per-trajectory sample count); the
    conventional variants use the summed log-likelihood and log of the total
    number of trajectories.
    """

    n: int
    log_type2: float
    aic: float
    bic: float
    dof: int
    aic_conventional: float
    bic_conventional: float
    n_trajectories: int
    nominal_m: float

    def criterion(self, name: str) -> float:
        return {"paper-aic": self.aic, "aic": self.aic_conventional, "bic": self.bic}[name]


def noise_dof(object_class: str) -> int:
    return EgoNoiseParams.n_params if str(getattr(object_class, "value", object_class)) == "ego" \
        else AgentNoiseParams.n_params


def dof(spec: BasisSpec, object_class: str) -> int:
    """dof(theta) + P(P+1)/2 with P = (n+1)d free entries of Sigma_w."""
    P = spec.n_coefficients
    return noise_dof(object_class) + P * (P + 1) // 2


def score(corpus: Sequence, hyper: HyperParams, nominal_m: Optional[float] = None, threads: int = 1) -> ModelScore:
    """
    Score fitted hyperparameters on a corpus.

    Args:
        corpus: Trajectories or observation bundles the hyperparameters were fitted on
        hyper: Fitted hyperparameters
        nominal_m: Samples per trajectory in the BIC term (median of the corpus if None)
        threads: Worker threads

    Returns:
        ModelScore
    """
    objective = CorpusObjective(corpus, hyper.spec, hyper.object_class, threads=threads)
    log_type2, _, _, N = objective.evaluate(hyper.noise.natural(), hyper.prior.chol, with_grad=False)
    m = float(np.median(objective.sample_counts)) if nominal_m is None else float(nominal_m)
    k = dof(hyper.spec, hyper.object_class)

    return ModelScore(
        n=hyper.degree,
        log_type2=log_type2,
        aic=log_type2 / N - k,
        bic=log_type2 / N - 0.5 * k * np.log(m),
        dof=k,
        aic_conventional=log_type2 - k,
        bic_conventional=log_type2 - 0.5 * k * np.log(N),
        n_trajectories=N,
        nominal_m=m,
    )


@dataclass
class ScanResult:
    """Scores and fits of a degree scan plus the selected degree per criterion."""

    scores: List[ModelScore] = field(default_factory=list)
    hypers: Dict[int, HyperParams] = field(default_factory=dict)

    @property
    def selected(self) -> Dict[str, int]:
        if not self.scores:
            return {}
        return {name: max(self.scores, key=lambda s: s.criterion(name)).n for name in CRITERIA}

    def best(self, criterion: str = "paper-aic") -> HyperParams:
        return self.hypers[self.selected[criterion]]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(s) for s in self.scores], columns=SCORE_COLUMNS)

    def to_json(self) -> Dict:
        return {"scores": [asdict(s) for s in self.scores], "selected": self.selected}

    def write(self, csv_path: str, json_path: str):
        csv_path, json_path = Path(csv_path), Path(json_path)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(csv_path, index=False, lineterminator="\n", float_format=lambda v: repr(float(v)))
        with open(json_path, 'w', encoding='utf-8') as f:
            json.dump(self.to_json(), f, indent=2)
        return csv_path, json_path


def scan_degrees(corpus: Sequence, degrees: Sequence[int], base_spec: BasisSpec, object_class: str,
                 cfg: Optional[OptimizerConfig] = None, nominal_m: Optional[float] = None) -> ScanResult:
    """
    Fit and score every degree independently.

    Args:
        corpus: Trajectories or observation bundles of one class and horizon
        degrees: Degrees to fit
        base_spec: Basis family, dimension and horizon (its degree is ignored)
        object_class: "ego" or "agent"
        cfg: Optimizer settings
        nominal_m: Samples per trajectory in the BIC term

    Returns:
        ScanResult
    """
    degrees = list(degrees)
    if not degrees:
        raise ArgumentError("Degree range is empty")
    cfg = cfg or OptimizerConfig()

    result = ScanResult()
    for n in degrees:
        spec = base_spec.with_degree(n)
        hyper = fit_hyperparams(corpus, spec, object_class, cfg)
        result.hypers[n] = hyper
        result.scores.append(score(corpus, hyper, nominal_m, threads=cfg.threads))

    selected = result.selected
    logger.info(f"Selected degrees: {selected}")
    if selected["bic"] > selected["paper-aic"]:
        logger.info("BIC selected a higher degree than AIC")
    return result
