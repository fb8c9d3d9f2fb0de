"""On-disk layout of scenes, impulse responses and recordings.

Scenes are JSON documents with a `schema_version`. Multichannel signals are 32-bit float
WAV files; a `<name>.channels.json` sidecar maps every WAV channel to its node, mic and,
where relevant, source.
"""

import json
import logging
import os
from dataclasses import asdict
from typing import Any

import numpy as np
import soundfile as sf

from adhocsep.errors import FormatError

from .acoustics import RirSet
from .geometry import NodePlacement, RoomSpec, SceneSpec, SourcePlacement, TableSpec
from .renderer import SceneRecording

logger = logging.getLogger(__name__)

SCENE_SCHEMA_VERSION = 1


def scene_to_dict(scene: SceneSpec) -> dict:
    return {"schema_version": SCENE_SCHEMA_VERSION, **asdict(scene)}


def scene_from_dict(data: dict) -> SceneSpec:
    version = data.get("schema_version")
    if version != SCENE_SCHEMA_VERSION:
        raise FormatError(f"Unsupported scene schema version {version!r}")
    try:
        return SceneSpec(
            room=RoomSpec(**data["room"]),
            table=TableSpec(
                center_xy=tuple(data["table"]["center_xy"]),  # type: ignore[arg-type]
                radius_m=data["table"]["radius_m"],
                height_m=data["table"]["height_m"],
            ),
            sources=tuple(
                SourcePlacement(s["source_id"], tuple(s["position_xyz"]), s["azimuth_rad"])  # type: ignore[arg-type]
                for s in data["sources"]
            ),
            nodes=tuple(
                NodePlacement(
                    n["node_id"],
                    tuple(tuple(p) for p in n["mic_positions_xyz"]),  # type: ignore[misc]
                    n["associated_source"],
                    n.get("azimuth_rad", 0.0),
                )
                for n in data["nodes"]
            ),
            sample_rate_hz=data["sample_rate_hz"],
            seed=data["seed"],
            scene_id=data.get("scene_id", ""),
            speed_of_sound=data.get("speed_of_sound", 343.0),
        )
    except (KeyError, TypeError) as e:
        raise FormatError(f"Malformed scene description: {e}") from e


def save_scene(scene: SceneSpec, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        json.dump(scene_to_dict(scene), f, indent=2)


def load_scene(path: str) -> SceneSpec:
    with open(path) as f:
        return scene_from_dict(json.load(f))


def channels_path(wav_path: str) -> str:
    root, _ = os.path.splitext(wav_path)
    return f"{root}.channels.json"


def write_multichannel(
    path: str, channels: np.ndarray, sample_rate_hz: int, labels: list[dict], **metadata: Any
) -> None:
    """Write a (channels, samples) array as float WAV with its channel map."""
    if channels.shape[0] != len(labels):
        raise FormatError(f"{len(labels)} channel labels for {channels.shape[0]} channels")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    sf.write(path, np.ascontiguousarray(channels.T, dtype=np.float32), sample_rate_hz, subtype="FLOAT")
    with open(channels_path(path), "w") as f:
        json.dump({"sample_rate_hz": sample_rate_hz, "channels": labels, **metadata}, f, indent=2)


def read_multichannel(path: str) -> tuple[np.ndarray, dict]:
    """Read a float WAV written by `write_multichannel`, shape (channels, samples)."""
    data, rate = sf.read(path, dtype="float64", always_2d=True)
    sidecar = channels_path(path)
    if not os.path.exists(sidecar):
        raise FormatError(f"Channel map {sidecar} is missing")
    with open(sidecar) as f:
        info = json.load(f)
    if info["sample_rate_hz"] != rate:
        raise FormatError(f"{path}: WAV rate {rate} Hz disagrees with channel map")
    if len(info["channels"]) != data.shape[1]:
        raise FormatError(f"{path}: {data.shape[1]} channels, channel map lists {len(info['channels'])}")
    return data.T, info


def _group(
    data: np.ndarray, labels: list[dict], keys: tuple[str, ...]
) -> list[np.ndarray]:
    """Regroup flat channels into one array per node indexed by `keys`."""
    n_nodes = 1 + max(label["node"] for label in labels)
    per_node: list[np.ndarray] = []
    for k in range(n_nodes):
        rows = [(label, data[i]) for i, label in enumerate(labels) if label["node"] == k]
        shape = tuple(1 + max(label[key] for label, _ in rows) for key in keys)
        out = np.zeros(shape + (data.shape[1],))
        for label, row in rows:
            out[tuple(label[key] for key in keys)] = row
        per_node.append(out)
    return per_node


def save_rirs(rirs: RirSet, path: str) -> None:
    channels, labels = [], []
    for k, node_rirs in enumerate(rirs.rirs):
        for m in range(node_rirs.shape[0]):
            for n in range(node_rirs.shape[1]):
                labels.append({"node": k, "mic": m, "source": n})
                channels.append(node_rirs[m, n])
    write_multichannel(
        path,
        np.stack(channels),
        rirs.sample_rate_hz,
        labels,
        absorption=rirs.absorption,
        direct_delays=[d.tolist() for d in rirs.direct_delays],
    )


def load_rirs(path: str) -> RirSet:
    data, info = read_multichannel(path)
    rirs = _group(data, info["channels"], ("mic", "source"))
    delays = [np.asarray(d, dtype=np.float64) for d in info["direct_delays"]]
    return RirSet(rirs, info["sample_rate_hz"], delays, info["absorption"])


def save_recording(recording: SceneRecording, out_dir: str) -> None:
    """Write `mixture.wav`, `images.wav` and `dry.wav` with their channel maps to `out_dir`."""
    fs = recording.sample_rate_hz
    mix_labels = [
        {"node": k, "mic": m} for k, x in enumerate(recording.mixture) for m in range(x.shape[0])
    ]
    write_multichannel(
        os.path.join(out_dir, "mixture.wav"),
        np.concatenate(recording.mixture),
        fs,
        mix_labels,
        scene_id=recording.scene_id,
        seed=recording.seed,
        node_sources=list(recording.node_sources),
        ref_mic=recording.ref_mic,
    )
    image_labels = [
        {"node": k, "mic": m, "source": n}
        for k, x in enumerate(recording.images)
        for m in range(x.shape[0])
        for n in range(x.shape[1])
    ]
    write_multichannel(
        os.path.join(out_dir, "images.wav"),
        np.concatenate([x.reshape(-1, x.shape[-1]) for x in recording.images]),
        fs,
        image_labels,
    )
    write_multichannel(
        os.path.join(out_dir, "dry.wav"),
        recording.dry_sources,
        fs,
        [{"source": n} for n in range(recording.n_sources)],
    )


def load_recording(out_dir: str) -> SceneRecording:
    mixture_flat, info = read_multichannel(os.path.join(out_dir, "mixture.wav"))
    images_flat, image_info = read_multichannel(os.path.join(out_dir, "images.wav"))
    dry, _ = read_multichannel(os.path.join(out_dir, "dry.wav"))
    mixture = _group(mixture_flat, info["channels"], ("mic",))
    images = _group(images_flat, image_info["channels"], ("mic", "source"))
    return SceneRecording(
        mixture=mixture,
        images=images,
        dry_sources=dry,
        sample_rate_hz=info["sample_rate_hz"],
        node_sources=tuple(info["node_sources"]),
        scene_id=info.get("scene_id", ""),
        seed=info.get("seed"),
        ref_mic=info.get("ref_mic", 0),
    )
