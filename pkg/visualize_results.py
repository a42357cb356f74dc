"""
Result Plotting Script (結果繪圖腳本)

Draws the fitted ISVM curves, regime timelines and error summaries of a
pipeline run directory.

Usage:
    python visualize_results.py results/synthetic_two_regime
    python visualize_results.py results/synthetic_two_regime --window window_002
    python visualize_results.py results/run --plot_dir plots/run
"""

import os
import sys
import argparse

# Add parent directory to path to import config.py
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import config

from src.errors import PipelineError
from src.visualization import ResultsVisualizer


def parse_arguments(argv=None):
    """
    Parse command line arguments for plotting.

    Returns:
        argparse.Namespace: Parsed arguments (解析後的參數)
    """
    parser = argparse.ArgumentParser(description="Plot the results of a pipeline run")
    parser.add_argument('run_dir', type=str, nargs='?', default=os.path.join(config.RESULTS_DIR, "run"),
                        help=f'Run directory (default: {config.RESULTS_DIR}/run)')
    parser.add_argument('--window', type=str, action='append', default=None,
                        help='Window to plot curves for, repeatable (default: every window)')
    parser.add_argument('--plot_dir', type=str, default=None,
                        help='Where to write the images (default: <run_dir>/plots)')
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_arguments(argv)
    print(f"🎨 Plotting {args.run_dir}")
    try:
        visualizer = ResultsVisualizer(args.run_dir, args.plot_dir)
    except PipelineError as e:
        print(f"❌ {e.category}: {e}")
        return e.exit_code

    plot_files = visualizer.generate_all_plots(args.window)
    for path in plot_files:
        print(f"   📈 {path}")
    return 0 if plot_files else 1


if __name__ == "__main__":
    sys.exit(main())
