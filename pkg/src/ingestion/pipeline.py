"""Pipeline from a canonical CSV corpus to fitted, scored and evaluated trajectories."""

import zlib
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import Config, RunConfig
from src.basis.polynomial import BasisSpec
from src.ebayes.marginal import HyperParams
from src.ebayes.optimizer import OptimizerConfig
from src.ebayes.selection import ScanResult, scan_degrees
from src.noisemodel.covariance import AgentNoiseParams, sample_covariances, sigma_r_table
from src.regress.metrics import ErrorReport, ade
from src.regress.posterior import PosteriorFit, posterior
from src.trajdata import csv_io
from src.trajdata.frames import (TrajectoryObservations, heading_source, observations, smoothed_in_frame,
                                 to_local_frame)
from src.trajdata.outliers import OutlierReport, classify_outliers
from src.trajdata.smoother import SmootherConfig, rts_smooth
from src.trajdata.trajectory import TrackedTrajectory, canonical_order
from src.trajdata.windowing import window
from src.utils.errors import ConfigMismatchError, TrajectoryToolkitError
from src.utils.file_utils import validate_input_file
from src.utils.logging_utils import get_logger

logger = get_logger(__name__)


def window_seed(seed: int, key: str) -> int:
    """Per-trajectory window seed that does not depend on corpus order."""
    return (int(seed) * 1_000_003 + zlib.crc32(key.encode("utf-8"))) % (2 ** 32)


class TrajectoryPipeline:
    """Step-by-step processing of one corpus for one run configuration."""

    def __init__(self, run: RunConfig):
        self.config = Config
        self.run = run
        self.smoother = SmootherConfig(**run.smoother)
        self.processed = []
        self.failed = []

    def load(self) -> List[TrackedTrajectory]:
        """
        Step 1: validate and ingest the input corpus.

        Returns:
            Trajectories in canonical order, filtered to the run's class if one is set
        """
        print("Step 1: Loading trajectories...")
        file_info = validate_input_file(self.run.input_path, ['.csv'])
        print(f"  Input: {file_info['name']} ({file_info['size_mb']} MB)")

        trajectories = csv_io.ingest(file_info['path'])
        if self.run.object_class is not None:
            trajectories = [tr for tr in trajectories if tr.object_class == self.run.object_class]
        trajectories = canonical_order(trajectories)
        print(f"  ✓ Loaded {len(trajectories)} trajectories")
        return trajectories

    def cut_windows(self, trajectories: Sequence[TrackedTrajectory]) -> List[TrackedTrajectory]:
        """Step 2: cut windows of the run horizon."""
        print(f"\nStep 2: Cutting {self.run.window_mode} windows of {self.run.horizon:g} s...")
        windows = []
        for traj in trajectories:
            windows.extend(window(traj, self.run.horizon, self.run.window_mode,
                                  rng_seed=window_seed(self.run.seed, traj.key),
                                  tolerance=self.smoother.duration_tolerance))
        print(f"  ✓ {len(windows)} windows from {len(trajectories)} trajectories")
        return windows

    def clean(self, windows: Sequence[TrackedTrajectory]) -> Tuple[List[TrackedTrajectory], OutlierReport]:
        """Step 3: outlier classification."""
        print("\nStep 3: Classifying outliers...")
        clean, report = classify_outliers(windows, self.smoother, threads=self.run.threads)
        for category, count in report.counts.items():
            print(f"  {category:<12} {count:>7}  ({report.percentages[category]:.2f}%)")
        print(f"  ✓ Kept {len(clean)} of {report.n_trajectories} windows")
        return clean, report

    def to_observations(self, traj: TrackedTrajectory) -> TrajectoryObservations:
        """Smooth, move to the fitting frame and collect the numeric bundle."""
        smoothed = rts_smooth(traj, self.smoother)
        if self.run.frame == "world":
            return observations(traj, heading_source(traj, smoothed))
        local = to_local_frame(traj, smoothed, self.config.MIN_SPEED_HEADING)
        headings = heading_source(local, smoothed_in_frame(smoothed, local.local_transform))
        return observations(local, headings)

    def prepare(self, windows: Sequence[TrackedTrajectory]) -> List[TrajectoryObservations]:
        """
        Build observation bundles, collecting failures instead of aborting.

        Args:
            windows: Windows of one class and horizon

        Returns:
            Observation bundles of the windows that could be prepared
        """
        print("\nPreparing observations...")
        prepared = []
        for traj in windows:
            try:
                prepared.append(self.to_observations(traj))
            except TrajectoryToolkitError as e:
                logger.warning(f"{traj.key}: {e}")
                self.failed.append({'key': traj.key, 'error': str(e)})
        print(f"  ✓ {len(prepared)} prepared, {len(self.failed)} failed")
        return prepared

    def base_spec(self) -> BasisSpec:
        return BasisSpec(self.run.basis_family, min(self.run.degrees()), 2, self.run.horizon)

    def fit(self, prepared: Sequence[TrajectoryObservations]) -> ScanResult:
        """Fit and score every requested degree."""
        degrees = list(self.run.degrees())
        print(f"\nFitting {self.run.object_class} hyperparameters for degrees {degrees[0]}..{degrees[-1]}...")
        cfg = OptimizerConfig.from_dict(self.run.optimizer, threads=self.run.threads, seed=self.run.seed)
        result = scan_degrees(prepared, degrees, self.base_spec(), self.run.object_class, cfg,
                              nominal_m=self.run.nominal_samples())
        for s in result.scores:
            print(f"  n={s.n:<3} log p={s.log_type2:>14.3f}  AIC={s.aic:>12.3f}  BIC={s.bic:>12.3f}  dof={s.dof}")
        print(f"  ✓ Selected degrees: {result.selected}")
        return result

    def check_hyper(self, hyper: HyperParams):
        """Reject hyperparameters fitted for another class, horizon, basis or degree."""
        problems = []
        if self.run.object_class is not None and hyper.object_class != self.run.object_class:
            problems.append(f"class {hyper.object_class} != {self.run.object_class}")
        if not np.isclose(hyper.spec.horizon, self.run.horizon):
            problems.append(f"horizon {hyper.spec.horizon:g} != {self.run.horizon:g}")
        if hyper.spec.family.value != self.run.basis_family:
            problems.append(f"basis {hyper.spec.family.value} != {self.run.basis_family}")
        if self.run.degree is not None and hyper.degree != self.run.degree:
            problems.append(f"degree {hyper.degree} != {self.run.degree}")
        if self.run.degree_range is not None and hyper.degree not in self.run.degrees():
            problems.append(f"degree {hyper.degree} outside {self.run.degree_range}")
        if problems:
            raise ConfigMismatchError("Hyperparameters do not match the run: " + "; ".join(problems))

    def evaluate(self, prepared: Sequence[TrajectoryObservations],
                 hyper: HyperParams) -> Tuple[List[PosteriorFit], ErrorReport]:
        """Posterior fit of every trajectory and the pooled representation error."""
        print(f"\nEvaluating degree {hyper.degree} posterior fits...")
        fits, kept = [], []
        for i, obs in enumerate(prepared, 1):
            try:
                covs = sample_covariances(hyper.noise, obs.positions, obs.ego_positions, obs.frame_angle)
                fits.append(posterior(obs.positions, obs.tau, covs, hyper.prior, hyper.spec, key=obs.key))
                kept.append(obs)
                self.processed.append({'key': obs.key, 'm': obs.m})
            except TrajectoryToolkitError as e:
                logger.warning(f"{obs.key}: {e}")
                self.failed.append({'key': obs.key, 'error': str(e)})
        report = ade(fits, kept)
        print(f"  ✓ ADE {report.ade:.4f} m (lon {report.ade_lon:.4f} | lat {report.ade_lat:.4f}), "
              f"99.9% {report.p999:.4f} m")
        return fits, report

    def show_final_summary(self, outputs: Optional[Sequence[Path]] = None):
        """Show the final processing summary."""
        print("\n" + "=" * 80)
        print("PIPELINE SUMMARY")
        print("=" * 80)

        print(f"Successfully processed: {len(self.processed)} trajectories")
        print(f"Failed to process: {len(self.failed)} trajectories")

        if self.failed:
            print("\nFailed trajectories:")
            for failed in self.failed[:20]:
                print(f"  ✗ {failed['key']} - {failed['error']}")
            if len(self.failed) > 20:
                print(f"  ... and {len(self.failed) - 20} more")

        for path in outputs or []:
            print(f"  → {path}")
        print("Pipeline completed.")


def noise_summary_rows(hyper: HyperParams) -> List[Dict]:
    """Noise parameters with the range standard deviation at the tabulated distances."""
    rows = [{"parameter": name, "value": value} for name, value in hyper.noise.to_dict().items()]
    if isinstance(hyper.noise, AgentNoiseParams):
        rows.extend({"parameter": name, "value": value} for name, value in sigma_r_table(hyper.noise).items())
    return rows
