"""
Visualization utilities for pipeline run directories.

This module plots the fitted ISVM curves with their bootstrap bands, the
regime labels of every window against the simulated truth, and the residual
error summaries written by the evaluate stage.

管線運行結果的可視化工具。

此模組繪製帶自助置信帶的 ISVM 曲線、各窗口的狀態標籤與真值對比，以及評估階段的殘差誤差摘要。
"""

import os
import sys
import glob
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

# Add parent directory to path to import the src package
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from src.errors import DataError
from src.icc import read_assignment
from src.isvm import FUNCTIONS
from src.market_data import read_panel
from src.synth import read_truth

FUNCTION_LABELS = {"gamma": "γ(v)", "eta2": "η²(v)", "mu": "μ(v)"}


class ResultsVisualizer:
    """
    Generates plots from the files of one run directory.

    Plots are written to <run_dir>/plots unless plot_dir is given.

    從單次運行目錄的文件生成圖表。
    """

    def __init__(self, run_dir: str, plot_dir: Optional[str] = None):
        if not os.path.isdir(run_dir):
            raise DataError(f"run directory does not exist: {run_dir}")
        self.run_dir = run_dir
        self.run_name = os.path.basename(os.path.normpath(run_dir))
        self.plots_dir = plot_dir or os.path.join(run_dir, "plots")
        os.makedirs(self.plots_dir, exist_ok=True)
        self.setup_plot_style()

    def setup_plot_style(self):
        """Shared colors, font sizes and rcParams."""
        plt.rcdefaults()
        self.colors = {
            'pooled': '#555555',
            'clusters': ['#0066cc', '#cc0000', '#2ecc71', '#8e44ad', '#e67e22'],
            'truth': '#222222',
            'background': '#f8f9fa',
        }
        self.font_sizes = {'title': 16, 'subtitle': 13, 'axis_label': 12, 'tick_label': 10, 'legend': 10}
        self.fig_sizes = {'curves': (16, 5), 'timeline': (14, 6), 'summary': (12, 6)}

        plt.style.use('ggplot')
        plt.rcParams['font.family'] = 'sans-serif'
        plt.rcParams['font.sans-serif'] = ['DejaVu Sans', 'Arial', 'Liberation Sans']
        plt.rcParams['figure.facecolor'] = 'white'
        plt.rcParams['axes.facecolor'] = self.colors['background']
        plt.rcParams['lines.linewidth'] = 2.0

    def configure_axis(self, ax, title, xlabel, ylabel):
        ax.set_title(title, fontsize=self.font_sizes['subtitle'], fontweight='bold')
        ax.set_xlabel(xlabel, fontsize=self.font_sizes['axis_label'])
        ax.set_ylabel(ylabel, fontsize=self.font_sizes['axis_label'])
        ax.tick_params(labelsize=self.font_sizes['tick_label'])
        ax.grid(True, alpha=0.3, linewidth=0.8)
        ax.spines['top'].set_visible(False)
        ax.spines['right'].set_visible(False)

    def cluster_color(self, cluster: int) -> str:
        palette = self.colors['clusters']
        return palette[cluster % len(palette)]

    def _save(self, fig, filename: str) -> str:
        filepath = os.path.join(self.plots_dir, filename)
        fig.tight_layout(rect=[0, 0, 1, 0.94])
        fig.savefig(filepath, dpi=150, bbox_inches='tight')
        plt.close(fig)
        return filepath

    def window_names(self) -> List[str]:
        files = sorted(glob.glob(os.path.join(self.run_dir, "curves", "window_*.csv")))
        return [os.path.splitext(os.path.basename(f))[0] for f in files]

    def plot_curves(self, window: str) -> str:
        """
        One panel per function: the unclustered curve and each cluster's curve
        with its band, plus the simulated model function when truth is known.

        Args:
            window: Window name, e.g. window_000

        Returns:
            str: Path to the saved plot
        """
        path = os.path.join(self.run_dir, "curves", f"{window}.csv")
        if not os.path.isfile(path):
            raise DataError(f"curve file not found: {path}")
        curves = pd.read_csv(path, comment="#")
        truth = self._truth_models()

        fig, axes = plt.subplots(1, len(FUNCTIONS), figsize=self.fig_sizes['curves'])
        for ax, function in zip(np.atleast_1d(axes), FUNCTIONS):
            rows = curves[curves["function"] == function]
            for (scope, cluster), group in rows.groupby(["scope", "cluster"], sort=True):
                group = group.sort_values("v")
                if scope == "unclustered":
                    color, label = self.colors['pooled'], "unclustered"
                else:
                    color, label = self.cluster_color(int(cluster)), f"cluster {int(cluster) + 1}"
                ax.plot(group["v"], group["mean"], color=color, label=label)
                ax.fill_between(group["v"], group["lower"], group["upper"], color=color, alpha=0.15)

            for name, model in truth.items():
                ax.plot(model["v"], model[function], color=self.colors['truth'], linestyle=":", linewidth=1.2,
                        label=f"true {name}")
            if truth:
                ax.set_xlim(rows["v"].min(), rows["v"].max())
            self.configure_axis(ax, FUNCTION_LABELS[function], "v", function)
            ax.legend(fontsize=self.font_sizes['legend'], framealpha=0.9)

        fig.suptitle(f"ISVM curves - {self.run_name} {window}", fontsize=self.font_sizes['title'],
                     fontweight='bold')
        return self._save(fig, f"curves_{window}.png")

    def plot_panel(self, window: str) -> str:
        """
        Imputed IV panel of one window, one line per instrument, with the
        background shaded by the window's regime labels when they exist.

        Returns:
            str: Path to the saved plot
        """
        panel = read_panel(os.path.join(self.run_dir, "panels", f"{window}.csv"))
        times = panel.timestamps.tz_convert(None)

        fig, ax = plt.subplots(figsize=self.fig_sizes['timeline'])
        for row in panel.values:
            ax.plot(times, row, color=self.colors['pooled'], linewidth=0.8, alpha=0.6)

        labels_path = os.path.join(self.run_dir, "regimes", f"{window}_labels.csv")
        if os.path.isfile(labels_path):
            labels = read_assignment(labels_path)["label"].to_numpy()
            run_start = 0
            for t in range(1, len(labels) + 1):
                if t == len(labels) or labels[t] != labels[run_start]:
                    end = times[t] if t < len(labels) else times[-1]
                    ax.axvspan(times[run_start], end, color=self.cluster_color(int(labels[run_start])),
                               alpha=0.12, linewidth=0)
                    run_start = t

        self.configure_axis(ax, f"{panel.n_assets} instruments", "time", "implied volatility")
        fig.suptitle(f"Clustering panel - {self.run_name} {window}", fontsize=self.font_sizes['title'],
                     fontweight='bold')
        return self._save(fig, f"panel_{window}.png")

    def plot_regime_timeline(self) -> str:
        """
        Regime labels of every window over time; the simulated instantaneous
        volatility and true regimes are drawn underneath when available.

        Returns:
            str: Path to the saved plot, or empty string without label files
        """
        label_files = sorted(glob.glob(os.path.join(self.run_dir, "regimes", "window_*_labels.csv")))
        if not label_files:
            print("No regime label files found; run the cluster stage with k > 1.")
            return ""

        truth_path = os.path.join(self.run_dir, "truth.json")
        has_truth = os.path.isfile(truth_path)
        n_rows = 2 if has_truth else 1
        fig, axes = plt.subplots(n_rows, 1, figsize=self.fig_sizes['timeline'], sharex=True, squeeze=False)
        ax = axes[0, 0]
        for w, path in enumerate(label_files):
            frame = read_assignment(path)
            colors = [self.cluster_color(int(label)) for label in frame["label"]]
            ax.scatter(frame["timestamp"].dt.tz_convert(None), np.full(len(frame), w), c=colors, s=6, marker="s")
        ax.set_yticks(range(len(label_files)))
        ax.set_yticklabels([os.path.basename(p).replace("_labels.csv", "") for p in label_files])
        self.configure_axis(ax, "Regime labels per window", "", "window")

        if has_truth:
            truth = read_truth(truth_path)
            bottom = axes[1, 0]
            times = truth["timestamps"].tz_convert(None)
            bottom.plot(times, truth["v"], color=self.colors['truth'], linewidth=1.2, label="v")
            labels = truth["labels"]
            colors = [self.cluster_color(int(label)) for label in labels]
            bottom.scatter(times, truth["v"], c=colors, s=6, label="true regime")
            self.configure_axis(bottom, "Simulated instantaneous volatility", "time", "v")
            bottom.legend(fontsize=self.font_sizes['legend'], framealpha=0.9)

        fig.suptitle(f"Regimes - {self.run_name}", fontsize=self.font_sizes['title'], fontweight='bold')
        return self._save(fig, "regime_timeline.png")

    def plot_error_summary(self, metric: str = "rmse") -> str:
        """Bar chart of the mean per-window error with 5th-95th percentile whiskers."""
        path = os.path.join(self.run_dir, f"{metric}_summary.csv")
        if not os.path.isfile(path):
            print(f"No {metric} summary found; run the evaluate stage first.")
            return ""
        summary = pd.read_csv(path, comment="#")

        fig, ax = plt.subplots(figsize=self.fig_sizes['summary'])
        positions = np.arange(len(summary))
        errors = np.vstack([summary["mean"] - summary["pctile5"], summary["pctile95"] - summary["mean"]])
        colors = [self.colors['pooled'] if "_" not in name else self.cluster_color(int(name.rsplit("_", 1)[1]) - 1)
                  for name in summary["function"]]
        ax.bar(positions, summary["mean"], yerr=np.clip(errors, 0, None), color=colors, alpha=0.8, capsize=4)
        ax.set_xticks(positions)
        ax.set_xticklabels(summary["function"], rotation=30)
        self.configure_axis(ax, f"{metric.upper()} per window", "function", metric.upper())
        fig.suptitle(f"Fit errors - {self.run_name}", fontsize=self.font_sizes['title'], fontweight='bold')
        return self._save(fig, f"{metric}_summary.png")

    def _truth_models(self) -> Dict[str, Dict]:
        truth_path = os.path.join(self.run_dir, "truth.json")
        if not os.path.isfile(truth_path):
            return {}
        return read_truth(truth_path)["models"]

    def generate_all_plots(self, windows: Optional[List[str]] = None) -> List[str]:
        """Generate every available plot; a failing plot is reported and skipped."""
        plot_files = []
        for window in windows or self.window_names():
            try:
                print(f"Generating curve plot for {window}...")
                plot_files.append(self.plot_curves(window))
            except Exception as e:
                print(f"Error generating curve plot for {window}: {e}")
            if os.path.isfile(os.path.join(self.run_dir, "panels", f"{window}.csv")):
                try:
                    plot_files.append(self.plot_panel(window))
                except Exception as e:
                    print(f"Error generating panel plot for {window}: {e}")

        for name, func in (("regime timeline", self.plot_regime_timeline),
                           ("RMSE summary", lambda: self.plot_error_summary("rmse")),
                           ("MAE summary", lambda: self.plot_error_summary("mae"))):
            try:
                print(f"Generating {name} plot...")
                filepath = func()
                if filepath:
                    plot_files.append(filepath)
            except Exception as e:
                print(f"Error generating {name} plot: {e}")

        if not plot_files:
            print("No plots were generated. This might be due to an incomplete run directory.")
        else:
            print(f"Successfully generated {len(plot_files)} plots.")
        return plot_files
