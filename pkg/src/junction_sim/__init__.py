"""Deterministic simulator and planning toolkit for a camera-equipped
smart junction: multi-camera geometry, coverage planning, GPS-triggered
synchronization, a recording pipeline model, and a perception chain from
2D detections to world-frame tracks."""

__version__ = "0.1.0"
