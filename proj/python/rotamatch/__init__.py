"""Rotation-augmented sparse matching: scene generation, matching, evaluation."""

from ._rotamatch import (
    Camera,
    Matcher,
    SceneConfig,
    ViewPair,
    descriptor_discrepancy,
    generate_pair,
    gt_correspondence,
    read_view_pair,
    rotate_arbitrary,
    rotate_quarter,
    run_benchmark,
    sample_keypoints,
    train_regime,
    write_dataset,
)

__all__ = [
    "Camera",
    "Matcher",
    "SceneConfig",
    "ViewPair",
    "descriptor_discrepancy",
    "generate_pair",
    "gt_correspondence",
    "read_view_pair",
    "rotate_arbitrary",
    "rotate_quarter",
    "run_benchmark",
    "sample_keypoints",
    "train_regime",
    "write_dataset",
]
