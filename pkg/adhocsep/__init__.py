from .danse import SeparationConfig, SeparationOutput, run_separation
from .scene import SceneRecording, SceneSpec, compute_rirs, render_scene, sample_scene
from .signal import SpectrogramTensor, StftConfig, istft, stft
