"""Harmonic Beltrami signatures of planar shapes."""

from ._accel import backend_name
from .field_core import (
    ComplexField,
    GrayImage,
    GridGeometry,
    hbs_geometry,
    image_geometry,
    read_field,
    read_image,
    write_field,
    write_image,
)
from .harmonic import HbsConfig, HbsResult, align_rotation, compute_hbs, hbs_distance, normalize_rotation

__version__ = "0.1.0"

__all__ = [
    "ComplexField",
    "GrayImage",
    "GridGeometry",
    "HbsConfig",
    "HbsResult",
    "align_rotation",
    "backend_name",
    "compute_hbs",
    "hbs_distance",
    "hbs_geometry",
    "image_geometry",
    "normalize_rotation",
    "read_field",
    "read_image",
    "write_field",
    "write_image",
]
