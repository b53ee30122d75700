"""Offline ConvNet feature extraction emitting refgame feature files."""

__version__ = "0.1.0"

from .extraction import (
    MODEL_DIMS,
    ExtractionJob,
    ImageObject,
    ScenePair,
    build_model,
    extract,
    read_images_manifest,
    read_scenes_table,
)
from .feature_file import SceneRecord, write_feature_file

__all__ = [
    "__version__",
    "MODEL_DIMS", "ExtractionJob", "ImageObject", "ScenePair",
    "build_model", "extract", "read_images_manifest", "read_scenes_table",
    "SceneRecord", "write_feature_file",
]
