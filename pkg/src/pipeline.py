"""
End-to-end orchestration: simulate or ingest quotes, cluster every rolling
window, fit surfaces and per-regime ISVM curves, and evaluate the fits.

Every stage reads the previous stage's files from the run directory, so each
stage can be rerun on its own.

端到端管線編排：模擬或讀取報價、逐窗口聚類、擬合曲面與各狀態 ISVM 曲線並評估。
"""

import os
import sys
import glob
import json
import warnings
from collections import OrderedDict
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

# Add parent directory to path to import config.py
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
import config
from src.errors import DataError, InsufficientPanelError, NumericalError, PipelineError
from src import market_data as md
from src import icc
from src import isvm
from src import evaluation
from src.surface import fit_surfaces, write_coefficients
from src.synth import simulate_market, write_truth, read_truth
from src.logger import RunLogger
from src.performance_monitor import PerformanceMonitor, effective_threads, get_system_info

STAGES = ("simulate", "cluster", "fit", "evaluate")

# Library failures reported as numerical failures (exit code 4)
NUMERICAL_FAILURES = (FloatingPointError, ZeroDivisionError, np.linalg.LinAlgError)


class PipelineRun:
    """
    One run directory and the stages that fill it.

    單次管線運行。
    """

    def __init__(self, cfg: config.PipelineConfig, logger: Optional[RunLogger] = None,
                 progress: bool = False):
        self.cfg = cfg
        self.output_dir = cfg.output_dir
        self.hash = config.config_hash(cfg)
        self.threads = effective_threads(cfg.threads)
        self.progress = progress
        os.makedirs(self.output_dir, exist_ok=True)
        self.logger = logger or RunLogger(self.output_dir, run_name=os.path.basename(os.path.normpath(self.output_dir)))
        self.monitor = PerformanceMonitor()
        self.spec = md.RollingWindowSpec.from_minutes(cfg.window.window_length_minutes, cfg.window.step_minutes,
                                                      cfg.window.sampling_interval_minutes)
        self._observations: Optional[List[md.IvObservation]] = None
        self._failed_marker = os.path.join(self.output_dir, "FAILED")
        if os.path.exists(self._failed_marker):
            os.remove(self._failed_marker)

    # ----- paths -----

    def path(self, *parts: str) -> str:
        return os.path.join(self.output_dir, *parts)

    @property
    def quotes_path(self) -> str:
        if self.cfg.source.kind == "file":
            return self.cfg.source.path
        return self.path("quotes.csv")

    @staticmethod
    def window_name(index: int) -> str:
        return f"window_{index:03d}"

    # ----- stage wrapper -----

    def _run_stage(self, stage: str, func):
        self.logger.log_stage_start(stage)
        caught: List[warnings.WarningMessage] = []
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                with self.monitor.time_operation(stage):
                    try:
                        details = func() or {}
                    except NUMERICAL_FAILURES as e:
                        raise NumericalError(f"{type(e).__name__}: {e}") from e
        except PipelineError as e:
            self._fail_stage(stage, caught, e.category, str(e))
            raise
        except Exception as e:
            self._fail_stage(stage, caught, "unexpected error", f"{type(e).__name__}: {e}")
            raise
        self._log_warnings(caught)
        self.logger.log_stage_end(stage, status="ok", **details)
        return details

    def _log_warnings(self, caught) -> None:
        for w in caught or []:
            self.logger.log_warning(str(w.message))

    def _fail_stage(self, stage: str, caught, category: str, message: str) -> None:
        self._log_warnings(caught)
        self.logger.log_stage_end(stage, status="failed", error=message, category=category)
        self.logger.flush()
        with open(self._failed_marker, "w") as f:
            f.write(f"stage: {stage}\n{category}: {message}\n")

    # ----- shared inputs -----

    def observations(self) -> List[md.IvObservation]:
        if self._observations is None:
            if not os.path.isfile(self.quotes_path):
                raise DataError(f"quote file not found: {self.quotes_path} (run the simulate stage first)")
            quotes = md.read_quotes(self.quotes_path)
            self._observations = md.normalize(quotes, self.cfg.r, self.cfg.d)
        return self._observations

    def windows(self) -> Tuple[pd.DatetimeIndex, List[Tuple[int, int]]]:
        obs = self.observations()
        first = min(o.timestamp for o in obs)
        last = max(o.timestamp for o in obs)
        grid = md.sampling_grid(first, last + self.spec.sampling_interval, self.spec.sampling_interval)
        slices = md.rolling_windows(grid, self.spec)
        if not slices:
            raise InsufficientPanelError(
                f"data covers {len(grid)} sampling timestamps, fewer than one window of {md.window_count(self.spec)}")
        return grid, slices

    def window_observations(self, grid: pd.DatetimeIndex, bounds: Tuple[int, int]) -> List[md.IvObservation]:
        start, end = grid[bounds[0]], grid[bounds[1] - 1]
        return [o for o in self.observations() if start <= o.timestamp <= end]

    # ----- stages -----

    def simulate(self) -> Dict:
        def stage():
            if self.cfg.source.kind != "synthetic":
                self.logger.log_text("source is a quote file; nothing to simulate")
                return {"skipped": True}
            emitted, schedule = simulate_market(self.cfg.source.synthetic, self.cfg.window.sampling_interval_minutes,
                                                self.cfg.r, self.cfg.d)
            md.write_quotes(self.path("quotes.csv"), emitted.quotes, self.hash)
            write_truth(self.path("truth.json"), emitted, schedule, self.hash)
            self._observations = None
            return {"quotes": len(emitted.quotes), "timestamps": len(emitted.timestamps)}
        return self._run_stage("simulate", stage)

    def cluster(self) -> Dict:
        def stage():
            grid, slices = self.windows()
            clu = self.cfg.clustering
            switches = []
            for w, bounds in enumerate(slices):
                name = self.window_name(w)
                window_obs = self.window_observations(grid, bounds)
                liquid = md.filter_for_clustering(window_obs, tuple(clu.moneyness_band), clu.max_tau_days)
                panel = md.build_panel(liquid, self.spec, self.cfg.window.missing_threshold, start=grid[bounds[0]])
                md.write_panel(panel, self.path("panels", f"{name}.csv"), self.hash)
                if clu.k == 1:
                    continue

                icc_cfg = icc.IccConfig(k=clu.k, lambda_=clu.lambda_, gain_kind=clu.gain_kind,
                                        max_iterations=clu.max_iterations, seed=clu.seed,
                                        min_cluster_size=clu.min_cluster_size, lambda_decay=clu.lambda_decay,
                                        paper_exact_gain=clu.paper_exact_gain, assignment=clu.assignment,
                                        euclidean_warm_start=clu.euclidean_warm_start)
                assignment = icc.canonical_relabel(icc.fit_with_annealing(panel, icc_cfg))
                icc.write_assignment(assignment, panel.timestamps, self.path("regimes", f"{name}_labels.csv"),
                                     self.hash, panel.asset_ids)
                self.logger.log_text(
                    f"{name} | assets {panel.n_assets} | sizes {assignment.cluster_sizes().tolist()} "
                    f"| switches {assignment.n_switches} | lambda {assignment.lambda_used:.4g}")
                switches.append(assignment.n_switches)
            return {"windows": len(slices), "clustered": clu.k > 1, "switches": switches}
        return self._run_stage("cluster", stage)

    def _labels_for(self, name: str) -> Dict[pd.Timestamp, int]:
        path = self.path("regimes", f"{name}_labels.csv")
        if not os.path.isfile(path):
            raise DataError(f"labels file not found: {path} (run the cluster stage first)")
        frame = icc.read_assignment(path)
        return dict(zip(frame["timestamp"], frame["label"]))

    def fit(self) -> Dict:
        def stage():
            grid, slices = self.windows()
            settings = self.cfg.isvm
            clustered = self.cfg.clustering.k > 1
            obs = self.observations()

            v_by_timestamp = md.instantaneous_vols(obs)
            surface_obs = md.filter_for_isvm(obs, tuple(settings.tau_range_days), v_by_timestamp)
            groups = md.group_by_timestamp(surface_obs)
            coefficients, skipped = fit_surfaces(groups, self.threads)
            write_coefficients(coefficients, self.path("surfaces.csv"), self.hash)
            targets = self._targets_frame(coefficients, v_by_timestamp, settings.inversion)
            self._write_frame(targets, self.path("targets.csv"))

            for w, bounds in enumerate(slices):
                name = self.window_name(w)
                labels = self._labels_for(name) if clustered else {}
                window_grid = set(grid[bounds[0]:bounds[1]])
                samples = []
                for ts, group in groups.items():
                    if ts not in window_grid:
                        continue
                    samples.append(isvm.TimestampSample(
                        timestamp=ts,
                        tau=np.array([o.tau for o in group]),
                        k=np.array([o.k for o in group]),
                        iv=np.array([o.iv for o in group]),
                        v=v_by_timestamp[ts],
                        label=labels.get(ts, 0),
                    ))

                pooled = isvm.fit_isvm(samples, settings, pooled=True, threads=self.threads, progress=self.progress)
                results = [pooled]
                if clustered:
                    results.append(isvm.fit_isvm(samples, settings, threads=self.threads, progress=self.progress))

                curves = pd.concat([isvm.curves_frame(r, window=w) for r in results], ignore_index=True)
                self._write_frame(curves, self.path("curves", f"{name}.csv"))
                self._write_frame(self._residuals_frame(results, w), self.path("residuals", f"{name}.csv"))
                self._write_fit_summary(results, self.path("curves", f"{name}_summary.json"))
            return {"windows": len(slices), "surfaces": len(coefficients), "degenerate_surfaces": len(skipped)}
        return self._run_stage("fit", stage)

    def evaluate(self) -> Dict:
        def stage():
            files = sorted(glob.glob(self.path("residuals", "window_*.csv")))
            if not files:
                raise DataError("no residual files found (run the fit stage first)")

            rmse_by_group: Dict[str, List[float]] = OrderedDict()
            mae_by_group: Dict[str, List[float]] = OrderedDict()
            matched_by_group: Dict[str, List[float]] = OrderedDict()
            for path in files:
                frame = pd.read_csv(path, comment="#")
                for group, rows in frame.groupby("group", sort=True):
                    rmse_by_group.setdefault(group, []).append(evaluation.rmse(rows["residual"]))
                    mae_by_group.setdefault(group, []).append(evaluation.mae(rows["residual"]))
                for group, residuals in evaluation.matched_baseline_residuals(frame).items():
                    matched_by_group.setdefault(group, []).append(evaluation.rmse(residuals))

            rmse_summary = evaluation.summarize(rmse_by_group)
            mae_summary = evaluation.summarize(mae_by_group)
            evaluation.write_summaries(rmse_summary, self.path("rmse_summary.csv"), self.hash)
            evaluation.write_summaries(mae_summary, self.path("mae_summary.csv"), self.hash)
            with open(self.path("rmse_table.txt"), "w") as f:
                f.write(f"# config_hash: {self.hash}\n")
                f.write(evaluation.format_table(rmse_summary, "RMSE") + "\n\n")
                f.write(evaluation.format_table(mae_summary, "MAE") + "\n")

            details = {"windows": len(files)}
            unclustered = [s for s in rmse_summary if "_" not in s.function]
            clustered = [s for s in rmse_summary if "_" in s.function]
            if clustered:
                matched = evaluation.summarize(matched_by_group)
                comparison = evaluation.compare_clustered(unclustered, clustered, matched)
                comparison["config_hash"] = self.hash
                self._write_json(comparison, self.path("comparison.json"))
                details["fraction_improved"] = round(comparison["fraction_improved"], 4)

            report = {"config_hash": self.hash, "windows": len(files)}
            truth_path = self.path("truth.json")
            if clustered and os.path.isfile(truth_path):
                truth = read_truth(truth_path)
                true_labels = dict(zip(truth["timestamps"], truth["labels"]))
                accuracies = []
                for label_path in sorted(glob.glob(self.path("regimes", "window_*_labels.csv"))):
                    frame = icc.read_assignment(label_path)
                    pairs = [(label, true_labels[ts]) for ts, label in zip(frame["timestamp"], frame["label"])
                             if ts in true_labels]
                    if pairs:
                        predicted, truth_series = zip(*pairs)
                        accuracies.append(evaluation.label_accuracy(predicted, truth_series, self.cfg.clustering.k))
                report["label_accuracy"] = accuracies
                report["mean_label_accuracy"] = float(np.mean(accuracies)) if accuracies else None
            self._write_json(report, self.path("evaluation.json"))
            return details
        return self._run_stage("evaluate", stage)

    def run(self) -> Dict:
        """All stages in order."""
        self.simulate()
        self.cluster()
        self.fit()
        self.evaluate()
        return self.write_manifest()

    # ----- outputs -----

    def _targets_frame(self, coefficients, v_by_timestamp, inversion: str) -> pd.DataFrame:
        rows = []
        for c in coefficients:
            v = v_by_timestamp[c.timestamp]
            gamma, eta2, mu = isvm.invert_coefficients(c, v, inversion)
            rows.append({"timestamp": md.format_timestamp(c.timestamp), "v": v,
                         "gamma": gamma, "eta2": eta2, "mu": mu})
        return pd.DataFrame(rows, columns=["timestamp", "v", "gamma", "eta2", "mu"])

    def _residuals_frame(self, results: List[isvm.IsvmResult], window: int) -> pd.DataFrame:
        frames = []
        for result in results:
            residuals = evaluation.window_residuals(result)
            for label, fit in result.fits.items():
                for function in isvm.FUNCTIONS:
                    group = evaluation.group_label(function, label)
                    frames.append(pd.DataFrame({
                        "window": window,
                        "group": group,
                        "timestamp": [md.format_timestamp(ts) for ts in fit.targets.timestamps],
                        "v": fit.targets.v,
                        "residual": residuals[group],
                    }))
        return pd.concat(frames, ignore_index=True)

    def _write_fit_summary(self, results: List[isvm.IsvmResult], path: str):
        summary = {"config_hash": self.hash, "fits": [], "skipped_clusters": {}}
        for result in results:
            for label, fit in result.fits.items():
                summary["fits"].append({
                    "cluster": -1 if label is None else label,
                    "n_points": len(fit.targets),
                    "bandwidth": float(f"{fit.bandwidth:.12g}"),
                    "bootstrap_replicates": fit.n_replicates,
                    "skipped_replicates": fit.n_skipped_replicates,
                    "eta2_negative_fraction": isvm.positivity_diagnostic(fit),
                })
            for label, reason in result.skipped_clusters.items():
                summary["skipped_clusters"][str(label)] = reason
            summary["degenerate_timestamps"] = [md.format_timestamp(ts) for ts in result.skipped_timestamps]
        self._write_json(summary, path)

    def _write_frame(self, frame: pd.DataFrame, path: str):
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w", newline="") as f:
            f.write(f"# config_hash: {self.hash}\n")
            frame.to_csv(f, index=False, float_format=config.FLOAT_FORMAT)

    def _write_json(self, payload: Dict, path: str):
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, default=str)

    def write_manifest(self) -> Dict:
        clu = self.cfg.clustering
        manifest = {
            "config_hash": self.hash,
            "config": config.config_to_dict(self.cfg),
            "defaults": config.get_config_summary(),
            "seeds": {
                "synthetic": self.cfg.source.synthetic.seed if self.cfg.source.kind == "synthetic" else None,
                "clustering": clu.seed,
                "bootstrap": self.cfg.isvm.bootstrap_seed,
            },
            "threads": self.threads,
            "system": get_system_info(),
            "performance": self.monitor.get_performance_report(),
            "run": self.logger.get_run_summary(),
        }
        self._write_json(manifest, self.path("manifest.json"))
        self.monitor.save_report(self.path("logs", "performance.json"))
        self.logger.flush()
        return manifest
