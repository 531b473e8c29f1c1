"""Voxel-grid data model: geometry, interpolation, pyramids, NIfTI-1 I/O.

Volumes are treated as immutable after construction; every operation
returns a new object. Voxel data is stored x-fastest as an array of
shape ``(nx, ny, nz)`` (``(nx, ny, nz, 3)`` for displacement fields),
so ``data[i, j, k]`` is the voxel at index ``(i, j, k)``.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .errors import (
    DegenerateInputError,
    FormatError,
    UnsupportedFeatureError,
)

KIND_INTENSITY = "intensity"
KIND_LABEL = "label"
KIND_VECTOR = "vector"

# NIfTI-1 datatype codes for the supported subset.
_DTYPE_TO_CODE = {
    np.dtype(np.uint8): (2, 8),
    np.dtype(np.int16): (4, 16),
    np.dtype(np.int32): (8, 32),
    np.dtype(np.float32): (16, 32),
}
_CODE_TO_DTYPE = {2: np.uint8, 4: np.int16, 8: np.int32, 16: np.float32}

_NIFTI_HEADER_SIZE = 348
_NIFTI_VOX_OFFSET = 352.0
_NIFTI_MAGIC = b"n+1\x00"


@dataclass
class ImageVolume:
    """A 3-D scalar or vector voxel grid with world-space (mm) geometry.

    ``origin`` is the world position of the center of voxel (0, 0, 0);
    ``direction`` is an orthonormal rotation taking index axes to world axes.
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: np.ndarray
    direction: np.ndarray
    data: np.ndarray
    kind: str = KIND_INTENSITY

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.spacing = tuple(float(s) for s in self.spacing)
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        self.direction = np.asarray(self.direction, dtype=np.float64).reshape(3, 3)
        self.data = np.asarray(self.data)
        self.validate()

    def validate(self):
        if len(self.dims) != 3 or any(d <= 0 for d in self.dims):
            raise ValueError(f"dims must be three positive counts, got {self.dims}")
        if any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be strictly positive, got {self.spacing}")
        if abs(abs(np.linalg.det(self.direction)) - 1.0) > 1e-6:
            raise ValueError("direction matrix is not orthonormal (|det| != 1)")
        if np.abs(self.direction @ self.direction.T - np.eye(3)).max() > 1e-6:
            raise ValueError("direction matrix is not orthonormal (D @ D.T != I)")
        if self.kind not in (KIND_INTENSITY, KIND_LABEL, KIND_VECTOR):
            raise ValueError(f"unknown volume kind {self.kind!r}")
        expected = self.dims + ((3,) if self.kind == KIND_VECTOR else ())
        if self.data.shape != expected:
            raise ValueError(f"data shape {self.data.shape} does not match dims {expected}")
        if self.data.dtype not in _DTYPE_TO_CODE:
            raise ValueError(f"unsupported voxel dtype {self.data.dtype}")

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def center_bbox(self) -> tuple[np.ndarray, np.ndarray]:
        """World-space bounding box of the voxel *centers* (lo, hi)."""
        nx, ny, nz = self.dims
        corners = np.array(
            [[i, j, k] for i in (0, nx - 1) for j in (0, ny - 1) for k in (0, nz - 1)],
            dtype=np.float64,
        )
        world = index_to_world(self, corners)
        return world.min(axis=0), world.max(axis=0)

    def voxel_centers(self) -> np.ndarray:
        """World coordinates of all voxel centers, shape (n_voxels, 3), x-fastest."""
        nx, ny, nz = self.dims
        kk, jj, ii = np.meshgrid(
            np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij"
        )
        ijk = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1).astype(np.float64)
        return index_to_world(self, ijk)


@dataclass
class BinaryMask:
    """One boolean per voxel, sharing ImageVolume's geometry conventions."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: np.ndarray
    direction: np.ndarray
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.spacing = tuple(float(s) for s in self.spacing)
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        self.direction = np.asarray(self.direction, dtype=np.float64).reshape(3, 3)
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != self.dims:
            raise ValueError(f"bits shape {self.bits.shape} does not match dims {self.dims}")

    @property
    def count(self) -> int:
        return int(self.bits.sum())


def same_geometry(a, b, tol: float = 1e-6) -> bool:
    """True when two volumes/masks share dims and world geometry within tol (mm)."""
    return (
        tuple(a.dims) == tuple(b.dims)
        and np.allclose(a.spacing, b.spacing, atol=tol)
        and np.allclose(a.origin, b.origin, atol=tol)
        and np.allclose(a.direction, b.direction, atol=tol)
    )


# ---------------------------------------------------------------------------
# coordinate geometry


def index_to_world(vol, ijk) -> np.ndarray:
    """Map continuous voxel indices to world mm: origin + direction @ (ijk * spacing).

    Accepts a single (3,) triple or an (N, 3) array; indices may be
    fractional or out of range.
    """
    ijk = np.asarray(ijk, dtype=np.float64)
    scaled = ijk * np.asarray(vol.spacing)
    return scaled @ vol.direction.T + vol.origin


def world_to_index(vol, p) -> np.ndarray:
    """Exact inverse of :func:`index_to_world` (direction is orthonormal)."""
    p = np.asarray(p, dtype=np.float64)
    rotated = (p - vol.origin) @ vol.direction
    return rotated / np.asarray(vol.spacing)


# ---------------------------------------------------------------------------
# interpolation


def _corner_setup(vol, p):
    """Clamped cell indices and fractional offsets for trilinear interpolation."""
    idx = world_to_index(vol, np.atleast_2d(np.asarray(p, dtype=np.float64)))
    dims = np.asarray(vol.dims)
    # border clamp: points outside the voxel-center box snap to the box boundary
    idx = np.clip(idx, 0.0, dims - 1.0)
    i0 = np.minimum(np.floor(idx).astype(np.int64), np.maximum(dims - 2, 0))
    frac = idx - i0
    return i0, frac


def sample_trilinear(vol: ImageVolume, p):
    """Trilinear interpolation at world point(s) p with border clamp.

    Returns a scalar / (N,) array for scalar volumes, a (3,) / (N, 3)
    array for vector fields.
    """
    if vol.kind == KIND_LABEL:
        raise ValueError("trilinear sampling is not defined for label volumes")
    single = np.asarray(p).ndim == 1
    i0, frac = _corner_setup(vol, p)
    data = vol.data.astype(np.float64, copy=False)
    i1 = np.minimum(i0 + 1, np.asarray(vol.dims) - 1)
    fx, fy, fz = frac[:, 0], frac[:, 1], frac[:, 2]
    gx, gy, gz = 1.0 - fx, 1.0 - fy, 1.0 - fz

    def corner(ci, cj, ck):
        return data[ci, cj, ck]

    x0, x1 = i0[:, 0], i1[:, 0]
    y0, y1 = i0[:, 1], i1[:, 1]
    z0, z1 = i0[:, 2], i1[:, 2]
    w000 = gx * gy * gz
    w100 = fx * gy * gz
    w010 = gx * fy * gz
    w001 = gx * gy * fz
    w110 = fx * fy * gz
    w101 = fx * gy * fz
    w011 = gx * fy * fz
    w111 = fx * fy * fz
    if vol.kind == KIND_VECTOR:
        w = lambda a: a[:, None]  # noqa: E731 - broadcast weights over components
    else:
        w = lambda a: a  # noqa: E731
    out = (
        w(w000) * corner(x0, y0, z0)
        + w(w100) * corner(x1, y0, z0)
        + w(w010) * corner(x0, y1, z0)
        + w(w001) * corner(x0, y0, z1)
        + w(w110) * corner(x1, y1, z0)
        + w(w101) * corner(x1, y0, z1)
        + w(w011) * corner(x0, y1, z1)
        + w(w111) * corner(x1, y1, z1)
    )
    return out[0] if single else out


def sample_trilinear_grad(vol: ImageVolume, p):
    """Values and exact world-space gradients of the trilinear interpolant.

    The gradient is the analytic derivative of the piecewise-trilinear
    function itself (constant along each axis within a cell), which makes
    objective functions built on it consistent with finite differences.
    Clamped points get zero gradient along the clamped axis. Scalar
    volumes only. Returns (values (N,), grads (N, 3)).
    """
    if vol.kind == KIND_VECTOR:
        raise ValueError("gradient sampling supports scalar volumes only")
    pts = np.atleast_2d(np.asarray(p, dtype=np.float64))
    i0, frac = _corner_setup(vol, pts)
    data = vol.data.astype(np.float64, copy=False)
    dims = np.asarray(vol.dims)
    i1 = np.minimum(i0 + 1, dims - 1)
    x0, x1 = i0[:, 0], i1[:, 0]
    y0, y1 = i0[:, 1], i1[:, 1]
    z0, z1 = i0[:, 2], i1[:, 2]
    c000 = data[x0, y0, z0]
    c100 = data[x1, y0, z0]
    c010 = data[x0, y1, z0]
    c001 = data[x0, y0, z1]
    c110 = data[x1, y1, z0]
    c101 = data[x1, y0, z1]
    c011 = data[x0, y1, z1]
    c111 = data[x1, y1, z1]
    fx, fy, fz = frac[:, 0], frac[:, 1], frac[:, 2]
    gx, gy, gz = 1.0 - fx, 1.0 - fy, 1.0 - fz
    vals = (
        c000 * gx * gy * gz
        + c100 * fx * gy * gz
        + c010 * gx * fy * gz
        + c001 * gx * gy * fz
        + c110 * fx * fy * gz
        + c101 * fx * gy * fz
        + c011 * gx * fy * fz
        + c111 * fx * fy * fz
    )
    ddx = (c100 - c000) * gy * gz + (c110 - c010) * fy * gz + (c101 - c001) * gy * fz + (c111 - c011) * fy * fz
    ddy = (c010 - c000) * gx * gz + (c110 - c100) * fx * gz + (c011 - c001) * gx * fz + (c111 - c101) * fx * fz
    ddz = (c001 - c000) * gx * gy + (c101 - c100) * fx * gy + (c011 - c010) * gx * fy + (c111 - c110) * fx * fy
    # outside the center box the clamped value is constant, so the true
    # derivative w.r.t. world position vanishes along the clamped axis
    raw_idx = world_to_index(vol, pts)
    inside = (raw_idx > 0.0) & (raw_idx < dims - 1.0)
    grad_idx = np.stack([ddx, ddy, ddz], axis=1) * inside
    grad_world = (grad_idx / np.asarray(vol.spacing)) @ vol.direction.T
    return vals, grad_world


def sample_nearest(vol: ImageVolume, p):
    """Label of the voxel whose center is nearest to world point(s) p.

    Exact half-way ties resolve to the lower index on each axis, which is
    the lexicographically smallest (i, j, k) among the nearest centers.
    Points outside the grid clamp to the border.
    """
    if vol.kind != KIND_LABEL:
        raise ValueError("nearest sampling is defined for label volumes")
    single = np.asarray(p).ndim == 1
    idx = world_to_index(vol, np.atleast_2d(np.asarray(p, dtype=np.float64)))
    nearest = np.ceil(idx - 0.5).astype(np.int64)  # ties -> lower index
    nearest = np.clip(nearest, 0, np.asarray(vol.dims) - 1)
    out = vol.data[nearest[:, 0], nearest[:, 1], nearest[:, 2]]
    return out[0] if single else out


# ---------------------------------------------------------------------------
# pyramid


def _gaussian_kernel_1sigma():
    # sigma = 1 voxel, truncated at 3 sigma
    k = np.exp(-0.5 * np.arange(-3, 4, dtype=np.float64) ** 2)
    return k / k.sum()


def gaussian_smooth(data: np.ndarray) -> np.ndarray:
    """Separable Gaussian smoothing (sigma = 1 voxel, 3-sigma truncation).

    The kernel is renormalized at the borders so the effective weights sum
    to one everywhere; a constant array is reproduced exactly (float64).
    """
    kernel = _gaussian_kernel_1sigma()
    out = data.astype(np.float64, copy=True)
    norm = np.ones(data.shape[:3], dtype=np.float64)
    for axis in range(3):
        out = correlate1d(out, kernel, axis=axis, mode="constant", cval=0.0)
        norm = correlate1d(norm, kernel, axis=axis, mode="constant", cval=0.0)
    if out.ndim == 4:
        return out / norm[..., None]
    return out / norm


def downsample2x(vol: ImageVolume) -> ImageVolume:
    """Gaussian-smooth then decimate by 2; spacing doubles, origin fixed.

    Retained voxel centers keep their world positions (new index i maps to
    old index 2i). Output data is float32.
    """
    if any(d < 2 for d in vol.dims):
        raise DegenerateInputError(f"cannot downsample dims {vol.dims}: axis shorter than 2")
    smoothed = gaussian_smooth(vol.data)
    decimated = smoothed[::2, ::2, ::2].astype(np.float32)
    return ImageVolume(
        dims=decimated.shape[:3],
        spacing=tuple(2.0 * s for s in vol.spacing),
        origin=vol.origin,
        direction=vol.direction,
        data=decimated,
        kind=vol.kind,
    )


# ---------------------------------------------------------------------------
# masks


def binary_mask(vol: ImageVolume, label: int) -> BinaryMask:
    """Mask of voxels whose value equals ``label``."""
    return BinaryMask(
        dims=vol.dims,
        spacing=vol.spacing,
        origin=vol.origin,
        direction=vol.direction,
        bits=vol.data == label,
    )


def surface_voxels(mask: BinaryMask) -> np.ndarray:
    """World centers of set voxels with an unset (or out-of-grid) 6-neighbor.

    Returns an (n, 3) float array in deterministic x-fastest order; empty
    masks give an empty (0, 3) array.
    """
    bits = mask.bits
    padded = np.zeros(tuple(d + 2 for d in bits.shape), dtype=bool)
    padded[1:-1, 1:-1, 1:-1] = bits
    interior = (
        padded[:-2, 1:-1, 1:-1]
        & padded[2:, 1:-1, 1:-1]
        & padded[1:-1, :-2, 1:-1]
        & padded[1:-1, 2:, 1:-1]
        & padded[1:-1, 1:-1, :-2]
        & padded[1:-1, 1:-1, 2:]
    )
    surf = bits & ~interior
    kji = np.argwhere(surf.T)  # transpose -> x varies fastest in C-order rows
    if kji.size == 0:
        return np.empty((0, 3), dtype=np.float64)
    ijk = kji[:, ::-1].astype(np.float64)
    return index_to_world(mask, ijk)


# ---------------------------------------------------------------------------
# NIfTI-1 subset I/O


def _maybe_gzip_read(path) -> bytes:
    with open(path, "rb") as fh:
        head = fh.read(2)
        fh.seek(0)
        if head == b"\x1f\x8b":
            with gzip.open(fh) as gz:
                return gz.read()
        return fh.read()


def _parse_geometry(hdr):
    if hdr["sform_code"] > 0:
        srow = np.array([hdr["srow_x"], hdr["srow_y"], hdr["srow_z"]], dtype=np.float64)
        mat = srow[:, :3]
        spacing = np.linalg.norm(mat, axis=0)
        if np.any(spacing <= 0):
            raise FormatError("sform has a zero-length column")
        direction = mat / spacing
        if abs(abs(np.linalg.det(direction)) - 1.0) > 1e-4:
            raise UnsupportedFeatureError("sform is not an orthonormal rotation times spacing")
        return tuple(spacing), srow[:, 3].copy(), direction
    if hdr["qform_code"] > 0:
        b, c, d = hdr["quatern_b"], hdr["quatern_c"], hdr["quatern_d"]
        a2 = 1.0 - (b * b + c * c + d * d)
        a = np.sqrt(max(a2, 0.0))
        direction = np.array(
            [
                [a * a + b * b - c * c - d * d, 2 * b * c - 2 * a * d, 2 * b * d + 2 * a * c],
                [2 * b * c + 2 * a * d, a * a + c * c - b * b - d * d, 2 * c * d - 2 * a * b],
                [2 * b * d - 2 * a * c, 2 * c * d + 2 * a * b, a * a + d * d - c * c - b * b],
            ]
        )
        qfac = -1.0 if hdr["pixdim"][0] < 0 else 1.0
        direction[:, 2] *= qfac
        spacing = tuple(float(s) for s in hdr["pixdim"][1:4])
        origin = np.array([hdr["qoffset_x"], hdr["qoffset_y"], hdr["qoffset_z"]])
        if any(s <= 0 for s in spacing):
            raise FormatError("qform header carries non-positive pixdim")
        return spacing, origin, direction
    spacing = tuple(float(s) for s in hdr["pixdim"][1:4])
    if any(s <= 0 for s in spacing):
        raise FormatError("header carries non-positive pixdim and no sform/qform")
    return spacing, np.zeros(3), np.eye(3)


def _read_header(raw: bytes) -> tuple[dict, str]:
    if len(raw) < _NIFTI_HEADER_SIZE:
        raise FormatError(f"file too short for a NIfTI-1 header ({len(raw)} bytes)")
    if raw[344:348] != _NIFTI_MAGIC:
        raise FormatError(f"bad NIfTI magic {raw[344:348]!r}, expected {_NIFTI_MAGIC!r}")
    # endianness: dim[0] must land in [1, 7]
    endian = None
    for cand in ("<", ">"):
        (dim0,) = struct.unpack(cand + "h", raw[40:42])
        if 1 <= dim0 <= 7:
            endian = cand
            break
    if endian is None:
        raise FormatError("cannot determine byte order from dim[0]")
    hdr = {
        "dim": struct.unpack(endian + "8h", raw[40:56]),
        "intent_code": struct.unpack(endian + "h", raw[68:70])[0],
        "datatype": struct.unpack(endian + "h", raw[70:72])[0],
        "pixdim": struct.unpack(endian + "8f", raw[76:108]),
        "vox_offset": struct.unpack(endian + "f", raw[108:112])[0],
        "scl_slope": struct.unpack(endian + "f", raw[112:116])[0],
        "scl_inter": struct.unpack(endian + "f", raw[116:120])[0],
        "qform_code": struct.unpack(endian + "h", raw[252:254])[0],
        "sform_code": struct.unpack(endian + "h", raw[254:256])[0],
        "quatern_b": struct.unpack(endian + "f", raw[256:260])[0],
        "quatern_c": struct.unpack(endian + "f", raw[260:264])[0],
        "quatern_d": struct.unpack(endian + "f", raw[264:268])[0],
        "qoffset_x": struct.unpack(endian + "f", raw[268:272])[0],
        "qoffset_y": struct.unpack(endian + "f", raw[272:276])[0],
        "qoffset_z": struct.unpack(endian + "f", raw[276:280])[0],
        "srow_x": struct.unpack(endian + "4f", raw[280:296]),
        "srow_y": struct.unpack(endian + "4f", raw[296:312]),
        "srow_z": struct.unpack(endian + "4f", raw[312:328]),
    }
    return hdr, endian


def load_nifti(path, kind: str | None = None) -> ImageVolume:
    """Read a single-file NIfTI-1 volume (.nii, optionally gzipped).

    Geometry priority: sform when sform_code > 0, else qform, else
    spacing-only with identity direction. ``kind`` overrides the default
    of ``intensity`` for scalar files; vector files always load as
    vector fields.
    """
    raw = _maybe_gzip_read(path)
    hdr, endian = _read_header(raw)
    dim = hdr["dim"]
    if dim[0] not in (3, 5):
        raise UnsupportedFeatureError(f"unsupported dim[0]={dim[0]}, expected 3 or 5")
    is_vector = dim[0] == 5
    if is_vector and (dim[4] != 1 or dim[5] != 3):
        raise UnsupportedFeatureError(
            f"5-D files must have dim[4]=1, dim[5]=3, got {dim[4]}, {dim[5]}"
        )
    if hdr["datatype"] not in _CODE_TO_DTYPE:
        raise UnsupportedFeatureError(f"unsupported NIfTI datatype code {hdr['datatype']}")
    slope, inter = hdr["scl_slope"], hdr["scl_inter"]
    if (np.isfinite(slope) and slope not in (0.0, 1.0)) or (np.isfinite(inter) and inter != 0.0):
        raise UnsupportedFeatureError("scaled intensities (scl_slope/scl_inter) not supported")
    nx, ny, nz = dim[1], dim[2], dim[3]
    if nx <= 0 or ny <= 0 or nz <= 0:
        raise FormatError(f"non-positive dims {(nx, ny, nz)}")
    spacing, origin, direction = _parse_geometry(hdr)
    dtype = np.dtype(_CODE_TO_DTYPE[hdr["datatype"]]).newbyteorder(endian)
    count = nx * ny * nz * (3 if is_vector else 1)
    offset = int(hdr["vox_offset"])
    if offset < _NIFTI_HEADER_SIZE:
        raise FormatError(f"vox_offset {offset} inside the header")
    available = len(raw) - offset
    if available < count * dtype.itemsize:
        raise IOError(
            f"truncated data section: need {count * dtype.itemsize} bytes, have {available}"
        )
    flat = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    flat = flat.astype(dtype.newbyteorder("="))
    shape = (nx, ny, nz, 3) if is_vector else (nx, ny, nz)
    data = flat.reshape(shape, order="F")
    if is_vector:
        resolved = KIND_VECTOR
    elif kind is not None:
        resolved = kind
    else:
        resolved = KIND_INTENSITY
    return ImageVolume(
        dims=(nx, ny, nz),
        spacing=spacing,
        origin=origin,
        direction=direction,
        data=data,
        kind=resolved,
    )


def save_nifti(vol: ImageVolume, path) -> None:
    """Write a NIfTI-1 file; geometry goes into the sform rows.

    ``load_nifti(save_nifti(v))`` reproduces voxel data bit-exactly and
    geometry within float32 header precision. Paths ending in .gz are
    gzip-compressed with a zeroed timestamp so output bytes are
    reproducible.
    """
    vol.validate()
    is_vector = vol.kind == KIND_VECTOR
    nx, ny, nz = vol.dims
    dim = (5, nx, ny, nz, 1, 3, 1, 1) if is_vector else (3, nx, ny, nz, 1, 1, 1, 1)
    datatype, bitpix = _DTYPE_TO_CODE[vol.data.dtype]
    affine = vol.direction * np.asarray(vol.spacing)
    hdr = bytearray(_NIFTI_HEADER_SIZE)
    struct.pack_into("<i", hdr, 0, _NIFTI_HEADER_SIZE)
    struct.pack_into("<8h", hdr, 40, *dim)
    if is_vector:
        struct.pack_into("<h", hdr, 68, 1007)  # vector intent
    struct.pack_into("<h", hdr, 70, datatype)
    struct.pack_into("<h", hdr, 72, bitpix)
    pixdim = (1.0, *vol.spacing, 1.0, 1.0, 1.0, 1.0)
    struct.pack_into("<8f", hdr, 76, *pixdim)
    struct.pack_into("<f", hdr, 108, _NIFTI_VOX_OFFSET)
    struct.pack_into("<f", hdr, 112, 1.0)  # scl_slope
    struct.pack_into("<B", hdr, 123, 2)  # xyzt_units: mm
    struct.pack_into("<80s", hdr, 148, b"atlasmorph")
    struct.pack_into("<h", hdr, 252, 0)  # qform_code
    struct.pack_into("<h", hdr, 254, 1)  # sform_code
    struct.pack_into("<4f", hdr, 280, *affine[0], vol.origin[0])
    struct.pack_into("<4f", hdr, 296, *affine[1], vol.origin[1])
    struct.pack_into("<4f", hdr, 312, *affine[2], vol.origin[2])
    struct.pack_into("<4s", hdr, 344, _NIFTI_MAGIC)
    payload = bytes(hdr) + b"\x00\x00\x00\x00"  # no extensions
    flat = np.ascontiguousarray(vol.data.ravel(order="F"))
    body = payload + flat.tobytes()
    path = str(path)
    if path.endswith(".gz"):
        with open(path, "wb") as fh:
            with gzip.GzipFile(filename="", mode="wb", fileobj=fh, mtime=0) as gz:
                gz.write(body)
    else:
        with open(path, "wb") as fh:
            fh.write(body)
