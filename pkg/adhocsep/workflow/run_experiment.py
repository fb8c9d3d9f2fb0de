import logging
import os

import dotenv
import hydra
from hydra.core.hydra_config import HydraConfig
from omegaconf import DictConfig, ListConfig, OmegaConf

from adhocsep.errors import ConfigurationError
from adhocsep.workflow.stages import (
    ExperimentConfig,
    evaluate_separations,
    gen_scenes,
    render_scenes,
    report,
    run_all,
    separate_recordings,
)

logger = logging.getLogger(__name__)

dotenv.load_dotenv()

STAGES = ("gen-scenes", "render", "separate", "eval", "report", "all")


def selected_stages(stage: str | ListConfig) -> list[str]:
    """`stage` is one stage name or a list of them, run in the given order."""
    stages = [stage] if isinstance(stage, str) else [str(s) for s in stage]
    for name in stages:
        if name not in STAGES:
            raise ConfigurationError(f"Unknown stage {name!r}, expected one of {STAGES}")
    return stages


def run_stage(stage: str, experiment: ExperimentConfig, cfg: DictConfig) -> None:
    metrics_path = os.path.join(experiment.results_dir, "metrics.csv")
    if stage == "all":
        run_all(experiment, cfg)
    elif stage == "gen-scenes":
        gen_scenes(
            experiment.conditions,
            experiment.count,
            experiment.seed,
            experiment.scenes_dir,
            experiment.geometry,
        )
    elif stage == "render":
        render_scenes(
            experiment.scenes_dir,
            experiment.recordings_dir,
            experiment.corpus_dir,
            experiment.duration_s,
            experiment.source_power,
            experiment.rir,
            experiment.jobs,
        )
    elif stage == "separate":
        separate_recordings(
            experiment.recordings_dir,
            experiment.separations_dir,
            experiment.separation,
            experiment.export_masks,
            experiment.jobs,
        )
    elif stage == "eval":
        evaluate_separations(
            experiment.recordings_dir, experiment.separations_dir, metrics_path, experiment.run_name
        )
    elif stage == "report":
        report(metrics_path, experiment.results_dir)


@hydra.main(config_path="config", config_name="experiment", version_base=None)
def main(cfg: DictConfig) -> None:
    output_dir = HydraConfig.get().runtime.output_dir
    logger.info(f"Config:\n {OmegaConf.to_yaml(cfg)}")
    logger.info(f"Current working directory: {os.getcwd()}")
    logger.info(f"Output directory: {output_dir}")

    experiment = ExperimentConfig.from_config(cfg)
    for stage in selected_stages(cfg.stage):
        run_stage(stage, experiment, cfg)


if __name__ == "__main__":
    main()
