"""Co-speech gesture generation at desk scale: a diffusion model over
BVH motion with selective state-space sequence blocks, disentangled
multi-modal condition fusion, and the matching evaluation metrics.

Everything runs on numpy float64 with a small built-in reverse-mode
autodiff engine; no GPU or deep-learning framework is required.
"""

from . import autodiff, bvh, diffusion, fusion, metrics, rotations, ssm

__version__ = "0.1.0"

__all__ = ["autodiff", "bvh", "diffusion", "fusion", "metrics", "rotations", "ssm"]
