"""Noise-robust ultrasound video segmentation (C++ core)."""

from ._dsanet import (
    ArityError,
    ConfigError,
    DivergenceError,
    IoError,
    Model,
    ShapeError,
    VersionError,
    afsa_chain,
    build_model,
    channel_reassemble,
    channel_similarity,
    dice_loss,
    evaluate,
    iou_dice,
    load_model,
    mae,
    speckle,
    synth_videos,
    train,
    wbce_loss,
    weight_map,
    wiou_loss,
)

VARIANTS = ("BASELINE", "BASELINE_AFSA", "BASELINE_LGSA", "FULL")

__all__ = [name for name in dir() if not name.startswith("_")]
