import logging
from dataclasses import asdict, dataclass

from adhocsep.danse.separator import SeparationOutput
from adhocsep.errors import EvaluationError
from adhocsep.scene.renderer import SceneRecording

from .metrics import si_sdr

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricsRecord:
    """Scores of one node of one scene.

    References are the reverberant image of the node's source at its reference mic.
    `delta_db` is `si_sdr_out_db - si_sdr_in_db`.
    """

    scene_id: str
    node_id: int
    method: str
    n_sources: int
    n_nodes: int
    si_sdr_in_db: float
    si_sdr_out_db: float
    delta_db: float
    si_sdr_compressed_db: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def unassociated_nodes(output: SeparationOutput) -> list[int]:
    return [n.node_id for n in output.nodes if n.target_source is None]


def evaluate_scene(output: SeparationOutput, recording: SceneRecording) -> list[MetricsRecord]:
    """Score the estimate of every node that has an associated source.

    Args:
        output (SeparationOutput): Estimates and compressed signals of the nodes.
        recording (SceneRecording): Mixtures and source images of the same scene.

    Returns:
        list[MetricsRecord]: One record per associated node, in node order. Nodes without
            a source are left out and logged.

    Raises:
        EvaluationError: The output and the recording do not describe the same layout.
    """
    if len(output.nodes) != recording.n_nodes:
        raise EvaluationError(
            f"Output has {len(output.nodes)} nodes, recording {recording.scene_id!r} has {recording.n_nodes}"
        )
    if tuple(output.node_sources) != tuple(recording.node_sources):
        raise EvaluationError(
            f"Node-source association differs: {output.node_sources} vs {recording.node_sources}"
        )

    records = []
    for node in output.nodes:
        source = node.target_source
        if source is None:
            continue
        if source >= recording.images[node.node_id].shape[1]:
            raise EvaluationError(f"No image of source {source} at node {node.node_id}")
        reference = recording.reference_image(node.node_id, source)
        si_in = si_sdr(recording.reference_mixture(node.node_id), reference)
        si_out = si_sdr(node.estimate, reference)
        records.append(
            MetricsRecord(
                scene_id=recording.scene_id or output.scene_id,
                node_id=node.node_id,
                method=output.method,
                n_sources=recording.n_sources,
                n_nodes=recording.n_nodes,
                si_sdr_in_db=si_in,
                si_sdr_out_db=si_out,
                delta_db=si_out - si_in,
                si_sdr_compressed_db=si_sdr(node.compressed, reference),
            )
        )

    excluded = unassociated_nodes(output)
    if excluded:
        logger.info(f"Scene {recording.scene_id}: node(s) {excluded} have no source and are not scored")
    return records
