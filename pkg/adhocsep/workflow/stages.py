"""The pipeline stages shared by the command line and the Hydra entry point.

Every stage reads and writes only the directories it is given:

    <output_dir>/scenes/<scene_id>.json
    <output_dir>/recordings/<scene_id>/{rirs,mixture,images,dry}.wav (+ .channels.json)
    <output_dir>/separations/<run>/<scene_id>/node{k}_{estimate,compressed}.wav, manifest.json
    <output_dir>/results/<run>/{metrics,summary,plot_data}.csv

`<run>` is the `run_name` of the experiment, the separation method by default.
"""

import glob
import logging
import os
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from multiprocessing.dummy import Pool as ThreadPool
from typing import TypeVar

from omegaconf import DictConfig
from tqdm import tqdm

from adhocsep.danse import SeparationConfig, load_estimates, run_separation, save_separation_output
from adhocsep.errors import ConfigurationError
from adhocsep.evaluation import (
    MetricsRecord,
    Summary,
    aggregate,
    evaluate_scene,
    read_metrics_csv,
    write_metrics_csv,
    write_plot_data,
    write_summary_csv,
)
from adhocsep.masks import MaskProviderConfig, export_oracle_masks
from adhocsep.scene import (
    GeometryConfig,
    RirConfig,
    compute_rirs,
    list_corpus,
    load_recording,
    load_scene,
    render_scene,
    sample_scene,
    save_recording,
    save_rirs,
    save_scene,
    scene_id,
    scene_seed,
    select_sources,
    synthetic_sources,
)
from adhocsep.utils import config_fingerprint, to_plain, write_json

logger = logging.getLogger(__name__)

T = TypeVar("T")
S = TypeVar("S")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs, from the scene grid to the separation settings.

    Attributes:
        conditions (tuple[tuple[int, int], ...]): The (N, K) pairs to simulate.
        count (int): Scenes per condition.
        seed (int): Base seed of the scene seeds.
        output_dir (str): Root of all artifacts.
        corpus_dir (str | None): Dry speech directory; synthetic sources when None.
        duration_s (float): Scene duration in seconds.
        source_power (float): Mean power of every dry source.
        geometry (GeometryConfig): Scene sampling ranges.
        rir (RirConfig): Impulse response settings.
        separation (SeparationConfig): Separation settings.
        jobs (int): Worker threads for scene-level parallelism.
        run_name (str | None): Label of the separation run in the artifact paths and the
            `method` column of the metrics; the separation method when None.
        export_masks (bool): Also write the oracle masks of every scene next to the
            separations.
    """

    conditions: tuple[tuple[int, int], ...]
    count: int
    seed: int = 0
    output_dir: str = "outputs/adhocsep"
    corpus_dir: str | None = None
    duration_s: float = 10.0
    source_power: float = 0.01
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    rir: RirConfig = field(default_factory=RirConfig)
    separation: SeparationConfig = field(default_factory=SeparationConfig)
    jobs: int = 1
    run_name: str | None = None
    export_masks: bool = False

    def __post_init__(self) -> None:
        if not self.conditions:
            raise ConfigurationError("The (N, K) grid is empty")
        for n, k in self.conditions:
            if n < 1 or k < 1:
                raise ConfigurationError(f"Invalid condition N={n}, K={k}")
        if self.count < 1:
            raise ConfigurationError(f"count must be positive, got {self.count}")
        if self.duration_s <= 0:
            raise ConfigurationError(f"duration_s must be positive, got {self.duration_s}")
        if self.run_name is not None and (not self.run_name or os.sep in self.run_name):
            raise ConfigurationError(
                f"run_name must be a plain directory name, got {self.run_name!r}"
            )

    @staticmethod
    def from_config(cfg: DictConfig) -> "ExperimentConfig":
        return ExperimentConfig(
            conditions=tuple((int(n), int(k)) for n, k in cfg.scenario.conditions),
            count=int(cfg.scenario.count),
            seed=int(cfg.seed),
            output_dir=cfg.output_dir,
            corpus_dir=cfg.corpus_dir,
            duration_s=float(cfg.duration_s),
            source_power=float(cfg.source_power),
            geometry=GeometryConfig.from_config(cfg.geometry),
            rir=RirConfig.from_config(cfg.rir),
            separation=SeparationConfig.from_config(cfg.separation),
            jobs=int(cfg.jobs),
            run_name=cfg.get("run_name"),
            export_masks=bool(cfg.get("export_masks", False)),
        )

    @property
    def label(self) -> str:
        return self.run_name or self.separation.method

    @property
    def scenes_dir(self) -> str:
        return os.path.join(self.output_dir, "scenes")

    @property
    def recordings_dir(self) -> str:
        return os.path.join(self.output_dir, "recordings")

    @property
    def separations_dir(self) -> str:
        return os.path.join(self.output_dir, "separations", self.label)

    @property
    def results_dir(self) -> str:
        return os.path.join(self.output_dir, "results", self.label)


def _map(fn: Callable[[S], T], items: Sequence[S], jobs: int, desc: str) -> list[T]:
    """Ordered map over scenes, on a thread pool when `jobs > 1`."""
    if jobs > 1 and len(items) > 1:
        with ThreadPool(jobs) as pool:
            return list(tqdm(pool.imap(fn, items), total=len(items), desc=desc))
    return [fn(item) for item in tqdm(items, desc=desc)]


def with_method(
    config: SeparationConfig, method: str | None, masks_dir: str | None = None
) -> SeparationConfig:
    """Switch the separation method, replacing the mask providers it implies."""
    if method is None or (method == config.method and masks_dir is None):
        return config
    if method == "file-masks":
        if masks_dir is None:
            raise ConfigurationError("--masks-dir is required with the file-masks method")
        masks = MaskProviderConfig(
            kind="file",
            file_path=masks_dir,
            pattern=config.first_step_masks.pattern,
            second_step=config.first_step_masks.second_step,
        )
    else:
        masks = MaskProviderConfig(kind="oracle-irm", epsilon=config.first_step_masks.epsilon)
    return replace(config, method=method, first_step_masks=masks, second_step_masks=masks)


def gen_scenes(
    conditions: Sequence[tuple[int, int]],
    count: int,
    seed: int,
    out_dir: str,
    geometry: GeometryConfig | None = None,
) -> list[str]:
    """Sample and save `count` scenes for every (N, K) condition."""
    geometry = geometry or GeometryConfig()
    paths = []
    for n_sources, n_nodes in conditions:
        for index in range(count):
            sid = scene_id(n_sources, n_nodes, index)
            scene = sample_scene(
                scene_seed(seed, n_sources, n_nodes, index), n_sources, n_nodes, geometry, sid
            )
            path = os.path.join(out_dir, f"{sid}.json")
            save_scene(scene, path)
            paths.append(path)
    logger.info(f"Wrote {len(paths)} scenes to {out_dir}")
    return paths


def render_scenes(
    scenes_dir: str,
    out_dir: str,
    corpus_dir: str | None = None,
    duration_s: float = 10.0,
    source_power: float = 0.01,
    rir: RirConfig | None = None,
    jobs: int = 1,
) -> list[str]:
    """Simulate the responses of every scene file and render its recordings."""
    scene_paths = sorted(glob.glob(os.path.join(scenes_dir, "*.json")))
    if not scene_paths:
        raise FileNotFoundError(f"No scene files in {scenes_dir}")
    corpus = list_corpus(corpus_dir) if corpus_dir else None
    if corpus is None:
        logger.info("No corpus configured, rendering synthetic speech-like sources")

    def render_one(path: str) -> str:
        scene = load_scene(path)
        if corpus is not None:
            dry = select_sources(corpus, scene.n_sources, scene.seed, duration_s, scene.sample_rate_hz)
        else:
            dry = synthetic_sources(scene.n_sources, duration_s, scene.sample_rate_hz, scene.seed)
        rirs = compute_rirs(scene, rir)
        recording = render_scene(scene, rirs, dry, source_power)
        scene_dir = os.path.join(out_dir, scene.scene_id or os.path.splitext(os.path.basename(path))[0])
        save_rirs(rirs, os.path.join(scene_dir, "rirs.wav"))
        save_recording(recording, scene_dir)
        return scene_dir

    return _map(render_one, scene_paths, jobs, "render")


def _scene_dirs(root: str, marker: str) -> list[str]:
    dirs = sorted(os.path.dirname(p) for p in glob.glob(os.path.join(root, "*", marker)))
    if not dirs:
        raise FileNotFoundError(f"No {marker} found below {root}")
    return dirs


def separate_recordings(
    recordings_dir: str,
    out_dir: str,
    config: SeparationConfig,
    export_masks: bool = False,
    jobs: int = 1,
) -> list[str]:
    """Run the separation on every recording below `recordings_dir`.

    With file masks, a `<masks_dir>/<scene_id>/` subdirectory is used when it exists, else
    the masks directory itself. `export_masks` also writes the oracle masks of every scene
    to `<out_dir>/masks/<scene_id>/`, ready for `--masks-dir <out_dir>/masks`.
    """

    def separate_one(recording_dir: str) -> str:
        recording = load_recording(recording_dir)
        name = recording.scene_id or os.path.basename(recording_dir)
        scene_config = config
        if config.method == "file-masks":
            masks_root = config.first_step_masks.file_path
            assert masks_root is not None
            scene_masks = os.path.join(masks_root, name)
            if os.path.isdir(scene_masks):
                scene_config = replace(
                    config,
                    first_step_masks=replace(config.first_step_masks, file_path=scene_masks),
                    second_step_masks=replace(config.second_step_masks, file_path=scene_masks),
                )
        if export_masks:
            export_oracle_masks(
                recording,
                config.stft,
                os.path.join(out_dir, "masks", name),
                config.first_step_masks.epsilon,
                config.fingerprint(),
            )
        output = run_separation(recording, scene_config)
        target = os.path.join(out_dir, name)
        save_separation_output(output, target)
        return target

    return _map(separate_one, _scene_dirs(recordings_dir, "mixture.wav"), jobs, "separate")


def evaluate_separations(
    recordings_dir: str, separations_dir: str, out_path: str, label: str | None = None
) -> list[MetricsRecord]:
    """Score every saved separation against its recording and write the metrics CSV.

    `label` replaces the method of the manifests in the `method` column, so that runs of
    one method with different mask files stay apart in a joint report.
    """
    records: list[MetricsRecord] = []
    for separation_dir in _scene_dirs(separations_dir, "manifest.json"):
        output = load_estimates(separation_dir)
        name = output.scene_id or os.path.basename(separation_dir)
        recording_dir = os.path.join(recordings_dir, name)
        if not os.path.isdir(recording_dir):
            raise FileNotFoundError(f"Recording of scene {name} not found: {recording_dir}")
        scene_records = evaluate_scene(output, load_recording(recording_dir))
        if label is not None:
            scene_records = [replace(r, method=label) for r in scene_records]
        records.extend(scene_records)
    records.sort(key=lambda r: (r.scene_id, r.node_id))
    write_metrics_csv(records, out_path)
    logger.info(f"Wrote {len(records)} metric records to {out_path}")
    return records


def collect_metrics(paths: str | Sequence[str]) -> list[MetricsRecord]:
    """Read metrics CSV files; a directory contributes every `metrics.csv` below it."""
    if isinstance(paths, str):
        paths = [paths]
    files: list[str] = []
    for path in paths:
        if os.path.isdir(path):
            found = sorted(glob.glob(os.path.join(path, "**", "metrics.csv"), recursive=True))
            if not found:
                raise FileNotFoundError(f"No metrics.csv found below {path}")
            files.extend(found)
        elif os.path.isfile(path):
            files.append(path)
        else:
            raise FileNotFoundError(f"Metrics file not found: {path}")
    unique = list(dict.fromkeys(os.path.abspath(f) for f in files))
    records: list[MetricsRecord] = []
    for path in unique:
        records.extend(read_metrics_csv(path))
    logger.info(f"Read {len(records)} metric records from {len(unique)} files")
    return records


def report(metrics_paths: str | Sequence[str], out_dir: str) -> Summary:
    """Aggregate one or more metrics CSVs into `summary.csv` and `plot_data.csv`.

    Directories are searched for `metrics.csv` files, so the `results/` root of a grid
    gives one summary over all its methods.
    """
    summary = aggregate(collect_metrics(metrics_paths))
    write_summary_csv(summary, os.path.join(out_dir, "summary.csv"))
    write_plot_data(summary, os.path.join(out_dir, "plot_data.csv"))
    for _, row in summary.table.iterrows():
        logger.info(
            f"N={row['n_sources']} K={row['n_nodes']} {row['method']}: "
            f"delta {row['mean_delta_db']:.2f} +/- {row['ci_delta_db']:.2f} dB over {row['count']} nodes"
        )
    return summary


def run_all(config: ExperimentConfig, raw_config: DictConfig | dict | None = None) -> Summary:
    """Chain every stage under `config.output_dir`."""
    if raw_config is not None:
        resolved = to_plain(raw_config)
        resolved.pop("jobs", None)
        resolved.pop("output_dir", None)
        resolved.get("separation", {}).pop("jobs", None)
        write_json(
            os.path.join(config.output_dir, "experiment.json"),
            {"config": resolved, "config_hash": config_fingerprint(resolved)},
        )
    gen_scenes(config.conditions, config.count, config.seed, config.scenes_dir, config.geometry)
    render_scenes(
        config.scenes_dir,
        config.recordings_dir,
        config.corpus_dir,
        config.duration_s,
        config.source_power,
        config.rir,
        config.jobs,
    )
    separate_recordings(
        config.recordings_dir,
        config.separations_dir,
        config.separation,
        config.export_masks,
        config.jobs,
    )
    metrics_path = os.path.join(config.results_dir, "metrics.csv")
    evaluate_separations(
        config.recordings_dir, config.separations_dir, metrics_path, config.run_name
    )
    return report(metrics_path, config.results_dir)
