"""Registration-driven morphing of labeled hexahedral atlas meshes."""

from .volume import (
    BinaryMask,
    ImageVolume,
    binary_mask,
    downsample2x,
    index_to_world,
    load_nifti,
    sample_nearest,
    sample_trilinear,
    save_nifti,
    surface_voxels,
    world_to_index,
)

__all__ = [
    "BinaryMask",
    "ImageVolume",
    "binary_mask",
    "downsample2x",
    "index_to_world",
    "load_nifti",
    "sample_nearest",
    "sample_trilinear",
    "save_nifti",
    "surface_voxels",
    "world_to_index",
]

__version__ = "0.1.0"
