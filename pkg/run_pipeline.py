"""
Command line entry point for the regime-clustered ISVM pipeline.

Subcommands run one stage (simulate, cluster, fit, evaluate) or all of them
(run). Each stage reads the previous stage's files from the output directory.

狀態聚類 ISVM 管線的命令列入口。

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

import os
import sys
import argparse
import traceback

# Add parent directory to path to import config.py
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import config

from src.errors import PipelineError
from src.pipeline import PipelineRun, STAGES
from src.performance_monitor import get_system_info


def parse_arguments(argv=None):
    """
    Parse command line arguments.

    解析命令列參數。

    Returns:
        argparse.Namespace: The parsed arguments
    """
    parser = argparse.ArgumentParser(description='Regime-clustered implied stochastic volatility pipeline')
    parser.add_argument('command', choices=STAGES + ("run",),
                        help='Stage to run: simulate, cluster, fit, evaluate, or run for all stages')
    parser.add_argument('--config', type=str, default=None,
                        help='YAML pipeline file, module defaults if not specified')
    parser.add_argument('--output', type=str, default=None,
                        help=f'Output directory, default: the file\'s output_dir or {config.RESULTS_DIR}/run')
    parser.add_argument('--seed', type=int, default=None,
                        help='Seed for the synthetic market, clustering and bootstrap, default: from the file')
    parser.add_argument('--threads', type=int, default=None,
                        help=f'Worker thread cap, default: from the file or {config.DEFAULT_THREADS}')
    parser.add_argument('--no_progress', action='store_true',
                        help='Disable bootstrap progress bars')
    return parser.parse_args(argv)


def build_overrides(args) -> dict:
    """Dotted-key overrides from the command line flags."""
    overrides = {"output_dir": args.output, "threads": args.threads}
    if args.seed is not None:
        overrides.update({
            "source.synthetic.seed": args.seed,
            "clustering.seed": args.seed,
            "isvm.bootstrap_seed": args.seed,
        })
    return overrides


def main(argv=None) -> int:
    """
    Load the configuration, run the requested stage and map failures to exit codes.

    主函數：加載配置、運行指定階段並返回退出碼。
    """
    args = parse_arguments(argv)
    print(f"🚀 Pipeline command: {args.command}")
    print("=" * 60)

    # No output directory exists until the configuration is valid
    try:
        cfg = config.load_pipeline_config(args.config, build_overrides(args))
    except PipelineError as e:
        print(f"❌ {e.category}: {e}")
        return e.exit_code
    print("✅ Configuration validation passed")

    run = PipelineRun(cfg, progress=not args.no_progress and sys.stderr.isatty())
    run.logger.log_text(f"Config hash: {run.hash}")
    run.logger.log_text(f"System info: {get_system_info()}")
    run.logger.log_text(f"Threads: {run.threads}")

    try:
        if args.command == "run":
            run.run()
        else:
            getattr(run, args.command)()
            run.write_manifest()
    except PipelineError as e:
        print(f"❌ {e.category}: {e}")
        print(f"   Partial artifacts kept in {run.output_dir} (see FAILED)")
        run.write_manifest()
        return e.exit_code
    except Exception as e:
        run.logger.log_text(f"❌ Unexpected failure: {e}")
        run.logger.log_text(traceback.format_exc())
        run.logger.flush()
        if not os.path.isfile(run.path("FAILED")):
            with open(run.path("FAILED"), "w") as f:
                f.write(f"stage: {args.command}\nunexpected error: {type(e).__name__}: {e}\n")
        return 1

    print(f"\n✅ Finished {args.command}; artifacts in {run.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
