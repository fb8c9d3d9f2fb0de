"""Command line of the experiment pipeline.

    adhocsep [--seed S] [--config PATH] [--jobs N] <command> [options]

The defaults are composed from the Hydra configs of this package; `--config` merges a
YAML or JSON file over them.
"""

import argparse
import logging
import os
import sys

import dotenv
from hydra import compose, initialize_config_module
from hydra.errors import HydraException
from omegaconf import DictConfig, OmegaConf
from omegaconf.errors import OmegaConfBaseException

from adhocsep.danse import METHODS, SeparationConfig
from adhocsep.errors import AdhocSepError, ConfigurationError
from adhocsep.scene import GeometryConfig, RirConfig

from .stages import (
    ExperimentConfig,
    evaluate_separations,
    gen_scenes,
    render_scenes,
    report,
    run_all,
    separate_recordings,
    with_method,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = "[%(asctime)s][%(name)s][%(levelname)s] - %(message)s"
EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    # Global flags are accepted before and after the command.
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, help="base seed of the scene seeds")
    common.add_argument("--config", help="YAML or JSON file merged over the defaults")
    common.add_argument("--jobs", type=int, help="worker threads")

    parser = argparse.ArgumentParser(prog="adhocsep", parents=[common])
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-scenes", parents=[common], help="sample scene geometries")
    gen.add_argument("--n", type=int, required=True, help="number of speakers")
    gen.add_argument("--k", type=int, required=True, help="number of nodes")
    gen.add_argument("--count", type=int, required=True, help="number of scenes")
    gen.add_argument("--out", required=True, help="directory of the scene files")

    render = commands.add_parser("render", parents=[common], help="simulate and render scenes")
    render.add_argument("--scenes", required=True, help="directory of the scene files")
    render.add_argument("--corpus", help="directory of dry 16 kHz mono speech files")
    render.add_argument("--out", required=True, help="directory of the recordings")

    separate = commands.add_parser("separate", parents=[common], help="run the separation")
    separate.add_argument("--recordings", required=True, help="directory of the recordings")
    separate.add_argument("--method", choices=METHODS, help="separation method")
    separate.add_argument("--masks-dir", help="mask files for the file-masks method")
    separate.add_argument(
        "--export-masks", action="store_true", help="also write the oracle masks of every scene"
    )
    separate.add_argument("--out", required=True, help="directory of the separations")

    evaluate = commands.add_parser("eval", parents=[common], help="score the separations")
    evaluate.add_argument("--recordings", required=True, help="directory of the recordings")
    evaluate.add_argument("--separations", required=True, help="directory of the separations")
    evaluate.add_argument(
        "--label", help="value of the method column, the manifest method by default"
    )
    evaluate.add_argument("--out", required=True, help="metrics CSV file")

    rep = commands.add_parser("report", parents=[common], help="aggregate metrics CSVs")
    rep.add_argument(
        "--metrics",
        nargs="+",
        required=True,
        help="metrics CSV files, or directories searched for metrics.csv",
    )
    rep.add_argument("--out", required=True, help="directory of the summary tables")

    run = commands.add_parser("all", parents=[common], help="run every stage")
    run.add_argument("--out", help="root of all artifacts")
    return parser


def load_config(config_path: str | None = None) -> DictConfig:
    """Compose the packaged defaults and merge the user config over them."""
    with initialize_config_module(config_module="adhocsep.workflow.config", version_base=None):
        cfg = compose(config_name="experiment")
    if config_path is not None:
        if not os.path.exists(config_path):
            raise FileNotFoundError(f"Config file not found: {config_path}")
        cfg = OmegaConf.merge(cfg, OmegaConf.load(config_path))  # type: ignore[assignment]
    return cfg


def _dispatch(args: argparse.Namespace, cfg: DictConfig) -> None:
    jobs = int(cfg.jobs)
    if args.command == "gen-scenes":
        gen_scenes(
            [(args.n, args.k)], args.count, int(cfg.seed), args.out, GeometryConfig.from_config(cfg.geometry)
        )
    elif args.command == "render":
        render_scenes(
            args.scenes,
            args.out,
            args.corpus or cfg.corpus_dir,
            float(cfg.duration_s),
            float(cfg.source_power),
            RirConfig.from_config(cfg.rir),
            jobs,
        )
    elif args.command == "separate":
        if args.masks_dir is not None and cfg.separation.first_step_masks.kind == "file":
            cfg = OmegaConf.create(OmegaConf.to_container(cfg, resolve=True))  # type: ignore[assignment]
            cfg.separation.first_step_masks.file_path = args.masks_dir
            cfg.separation.second_step_masks.file_path = args.masks_dir
        config = with_method(SeparationConfig.from_config(cfg.separation), args.method, args.masks_dir)
        if args.masks_dir is not None and config.method != "file-masks":
            logger.warning(f"--masks-dir is ignored by the {config.method} method")
        separate_recordings(args.recordings, args.out, config, args.export_masks, jobs)
    elif args.command == "eval":
        evaluate_separations(args.recordings, args.separations, args.out, args.label)
    elif args.command == "report":
        report(args.metrics, args.out)
    elif args.command == "all":
        if args.out is not None:
            cfg.output_dir = args.out
        run_all(ExperimentConfig.from_config(cfg), cfg)


def run_cli(argv: list[str] | None = None) -> int:
    """Parse `argv`, run the command and return the exit code.

    Usage errors exit with 2; missing files, unreadable masks and pipeline failures exit
    with 1 after logging a message naming the stage.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE

    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
    dotenv.load_dotenv()
    try:
        cfg = load_config(getattr(args, "config", None))
        if getattr(args, "seed", None) is not None:
            cfg.seed = args.seed
        if getattr(args, "jobs", None) is not None:
            if args.jobs < 1:
                raise ConfigurationError(f"--jobs must be positive, got {args.jobs}")
            cfg.jobs = args.jobs
        _dispatch(args, cfg)
    except (AdhocSepError, OSError, HydraException, OmegaConfBaseException) as e:
        return _report_failure(args.command, e)
    return EXIT_OK


def _report_failure(command: str, error: BaseException) -> int:
    # instantiate() wraps what the config dataclasses raise
    while isinstance(error, HydraException) and isinstance(
        error.__cause__, (AdhocSepError, OSError)
    ):
        error = error.__cause__
    if isinstance(error, (ConfigurationError, HydraException, OmegaConfBaseException)):
        logger.error(f"[{command}] invalid configuration: {error}")
        return EXIT_USAGE
    if isinstance(error, OSError):
        logger.error(f"[{command}] I/O error: {error}")
    else:
        logger.error(f"[{command}] {type(error).__name__}: {error}")
    return EXIT_FAILURE


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
