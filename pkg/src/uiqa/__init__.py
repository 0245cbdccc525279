"""Benchmark toolkit for utility-oriented underwater image quality assessment."""

from .image import ImageBuffer, load_image, rgb_to_cielab, save_image, to_grayscale
from .manifest import DatasetManifest, ManifestEntry, read_manifest, write_manifest

__version__ = "0.1.0"

__all__ = [
    "DatasetManifest",
    "ImageBuffer",
    "ManifestEntry",
    "load_image",
    "read_manifest",
    "rgb_to_cielab",
    "save_image",
    "to_grayscale",
    "write_manifest",
]
