"""Trace-driven simulator for multi-user edge-assisted 360-degree VR
streaming: tiled multi-layer video, compute placement, link replay,
buffer dynamics, constrained QoE accounting, and a line-protocol RL
environment with deterministic baseline policies."""

from .compute import ComputeProfile, EcuAllocation, Placement
from .env import EnvStep, Observation, ScenarioConfig, StreamingEnv
from .network import ThroughputTrace, load_trace, save_trace
from .qoe import LagrangianState, QoeAccumulator
from .video import VideoManifest, ViewportTrace

__all__ = [
    "ComputeProfile",
    "EcuAllocation",
    "EnvStep",
    "LagrangianState",
    "Observation",
    "Placement",
    "QoeAccumulator",
    "ScenarioConfig",
    "StreamingEnv",
    "ThroughputTrace",
    "VideoManifest",
    "ViewportTrace",
    "load_trace",
    "save_trace",
]

__version__ = "0.1.0"
