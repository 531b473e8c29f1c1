"""Spatial transforms: affine, cubic B-spline FFD, dense displacement fields.

Every transform maps atlas-space points to target-space points in world
millimetres, so mesh nodes are pushed forward directly and label maps are
pulled back through the inverted dense field. Transforms are immutable;
``apply_transform`` is pure and safe to call concurrently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import singledispatch

import numpy as np

from .errors import DataError, FormatError, OutOfDomainError
from .volume import (
    KIND_VECTOR,
    ImageVolume,
    load_nifti,
    sample_trilinear,
    save_nifti,
)

AFFINE_CONVENTION = "atlas-to-target, world-mm"


@dataclass
class AffineTransform:
    """T(p) = matrix @ p + translation."""

    matrix: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if abs(np.linalg.det(self.matrix)) <= 1e-12:
            raise ValueError("affine matrix is singular")

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(np.eye(3), np.zeros(3))

    def inverse(self) -> "AffineTransform":
        inv = np.linalg.inv(self.matrix)
        return AffineTransform(inv, -inv @ self.translation)

    def to_json_dict(self) -> dict:
        return {
            "convention": AFFINE_CONVENTION,
            "matrix": [float(v) for v in self.matrix.ravel()],
            "translation": [float(v) for v in self.translation],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "AffineTransform":
        if d.get("convention") != AFFINE_CONVENTION:
            raise FormatError(
                f"affine file convention {d.get('convention')!r} != {AFFINE_CONVENTION!r}"
            )
        return cls(np.array(d["matrix"], dtype=np.float64).reshape(3, 3),
                   np.array(d["translation"], dtype=np.float64))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "AffineTransform":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass
class BSplineFFD:
    """Free-form deformation on a uniform cubic B-spline control lattice.

    Control point (i, j, k) sits at ``grid_origin + (i, j, k) * grid_spacing``
    (world-axis aligned). The displacement is defined where the evaluation
    point has a full 4x4x4 support, i.e. grid coordinates in
    [1, dims - 2]; the lattice therefore carries a one-control-point
    margin around the domain it was built for. ``pre_affine`` is applied
    to the input point before the displacement lookup.
    """

    grid_origin: np.ndarray
    grid_spacing: np.ndarray
    grid_dims: tuple[int, int, int]
    coefficients: np.ndarray
    pre_affine: AffineTransform | None = None

    def __post_init__(self):
        self.grid_origin = np.asarray(self.grid_origin, dtype=np.float64).reshape(3)
        self.grid_spacing = np.asarray(self.grid_spacing, dtype=np.float64).reshape(3)
        self.grid_dims = tuple(int(d) for d in self.grid_dims)
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if np.any(self.grid_spacing <= 0):
            raise ValueError("grid spacing must be strictly positive")
        if any(d < 4 for d in self.grid_dims):
            raise ValueError(f"grid dims must be >= 4 each, got {self.grid_dims}")
        if self.coefficients.shape != self.grid_dims + (3,):
            raise ValueError(
                f"coefficients shape {self.coefficients.shape} != {self.grid_dims + (3,)}"
            )

    @classmethod
    def for_domain(cls, lo, hi, spacing, pre_affine=None) -> "BSplineFFD":
        """Zero-displacement FFD whose valid region covers [lo, hi] world mm,
        with at least a one-control-point margin on every side."""
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        spacing = np.broadcast_to(np.asarray(spacing, dtype=np.float64), (3,)).copy()
        extent = np.maximum(hi - lo, 0.0)
        dims = np.maximum(np.ceil(extent / spacing).astype(int) + 4, 4)
        origin = lo - spacing
        coeffs = np.zeros(tuple(dims) + (3,))
        return cls(origin, spacing, tuple(dims), coeffs, pre_affine)

    def domain(self) -> tuple[np.ndarray, np.ndarray]:
        """World box on which the displacement is defined (inclusive)."""
        dims = np.asarray(self.grid_dims)
        lo = self.grid_origin + 1.0 * self.grid_spacing
        hi = self.grid_origin + (dims - 2.0) * self.grid_spacing
        return lo, hi

    def refine(self) -> "BSplineFFD":
        """Halve the control spacing by exact dyadic subdivision.

        The refined lattice reproduces the displacement field of the
        original exactly on the original valid region (two-scale relation
        of the cubic B-spline; margin points use zero extension, which
        only affects space outside that region).
        """
        c = self.coefficients
        padded = np.zeros((c.shape[0] + 2, c.shape[1] + 2, c.shape[2] + 2, 3))
        padded[1:-1, 1:-1, 1:-1] = c
        for axis in range(3):
            n = padded.shape[axis]
            even = (
                np.take(padded, range(0, n - 2), axis=axis)
                + 6.0 * np.take(padded, range(1, n - 1), axis=axis)
                + np.take(padded, range(2, n), axis=axis)
            ) / 8.0
            odd = (
                np.take(padded, range(1, n - 1), axis=axis)
                + np.take(padded, range(2, n), axis=axis)
            ) / 2.0
            # interleave: refined j=2m from even[m], j=2m+1 from odd[m]
            shape = list(even.shape)
            shape[axis] = even.shape[axis] + odd.shape[axis]
            merged = np.zeros(shape)
            sl_even = [slice(None)] * merged.ndim
            sl_even[axis] = slice(0, None, 2)
            sl_odd = [slice(None)] * merged.ndim
            sl_odd[axis] = slice(1, None, 2)
            merged[tuple(sl_even)] = even
            merged[tuple(sl_odd)] = odd
            padded = merged
        # interleaving yields refined indices 0..2d-1 per axis; the lattice
        # only extends to 2d-2, so trim the trailing entry
        dims = tuple(2 * d - 1 for d in self.grid_dims)
        sl = tuple(slice(0, n) for n in dims)
        coeffs = padded[sl + (slice(None),)]
        return BSplineFFD(
            grid_origin=self.grid_origin,
            grid_spacing=self.grid_spacing / 2.0,
            grid_dims=dims,
            coefficients=coeffs,
            pre_affine=self.pre_affine,
        )


@dataclass
class DenseDisplacementField:
    """Per-voxel displacement u(x) mm; T(x) = x + trilinear(u, x)."""

    field: ImageVolume

    def __post_init__(self):
        if self.field.kind != KIND_VECTOR:
            raise ValueError("dense displacement field requires a vector volume")


@dataclass
class InversionResult:
    """Inverted field plus the fixed-point iteration diagnostics."""

    field: DenseDisplacementField
    residual: float
    iterations: int
    converged: bool
    warning: bool
    update_trace: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# cubic B-spline basis


def bspline_weights(t):
    """The four uniform cubic B-spline basis values at fraction t in [0, 1).

    Accepts scalars or arrays; returns shape (..., 4). The weights sum to
    one (partition of unity).
    """
    t = np.asarray(t, dtype=np.float64)
    t2 = t * t
    t3 = t2 * t
    w = np.stack(
        [
            (1.0 - t) ** 3 / 6.0,
            (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
            (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
            t3 / 6.0,
        ],
        axis=-1,
    )
    return w


def _ffd_support(ffd: BSplineFFD, q: np.ndarray, strict: bool):
    """Base lattice index and per-axis weights of the 4x4x4 support at q.

    Returns (i0 (N, 3), wx, wy, wz each (N, 4)). Out-of-domain points
    raise in strict mode (listing the offending row indices) or clamp to
    the domain boundary otherwise.
    """
    dims = np.asarray(ffd.grid_dims, dtype=np.float64)
    g = (q - ffd.grid_origin) / ffd.grid_spacing
    bad = np.any((g < 1.0 - 1e-9) | (g > dims - 2.0 + 1e-9), axis=1)
    if strict and np.any(bad):
        idx = np.flatnonzero(bad)
        raise OutOfDomainError(
            f"{idx.size} point(s) outside the control-grid domain, "
            f"first at row {idx[0]}",
            indices=idx.tolist(),
        )
    g = np.clip(g, 1.0, dims - 2.0)
    cell = np.floor(g)
    s = g - cell
    # at the exact top face floor(g) == dims-2; shift into the last valid
    # cell with s = 1 (same value by basis continuity)
    over = cell > dims - 3.0
    cell = np.where(over, cell - 1.0, cell)
    s = np.where(over, s + 1.0, s)
    i0 = cell.astype(np.int64) - 1
    return i0, bspline_weights(s[:, 0]), bspline_weights(s[:, 1]), bspline_weights(s[:, 2])


def _ffd_displacement(ffd: BSplineFFD, q: np.ndarray, strict: bool) -> np.ndarray:
    i0, wx, wy, wz = _ffd_support(ffd, q, strict)
    gx, gy, gz = ffd.grid_dims
    flat = ffd.coefficients.reshape(-1, 3)
    out = np.zeros((q.shape[0], 3))
    base = (i0[:, 0] * gy + i0[:, 1]) * gz + i0[:, 2]
    for l in range(4):
        for m in range(4):
            wlm = wx[:, l] * wy[:, m]
            row = base + (l * gy + m) * gz
            for n in range(4):
                out += (wlm * wz[:, n])[:, None] * flat[row + n]
    return out


# ---------------------------------------------------------------------------
# application


@singledispatch
def apply_transform(t, p, strict: bool = True):
    raise TypeError(f"unknown transform type {type(t).__name__}")


@apply_transform.register
def _(t: AffineTransform, p, strict: bool = True):
    pts = np.asarray(p, dtype=np.float64)
    single = pts.ndim == 1
    out = np.atleast_2d(pts) @ t.matrix.T + t.translation
    return out[0] if single else out


@apply_transform.register
def _(t: BSplineFFD, p, strict: bool = True):
    pts = np.asarray(p, dtype=np.float64)
    single = pts.ndim == 1
    q = np.atleast_2d(pts)
    if t.pre_affine is not None:
        q = q @ t.pre_affine.matrix.T + t.pre_affine.translation
    out = q + _ffd_displacement(t, q, strict)
    return out[0] if single else out


@apply_transform.register
def _(t: DenseDisplacementField, p, strict: bool = True):
    pts = np.asarray(p, dtype=np.float64)
    single = pts.ndim == 1
    q = np.atleast_2d(pts)
    out = q + sample_trilinear(t.field, q)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# conversion and inversion


def to_dense(t, reference: ImageVolume) -> DenseDisplacementField:
    """Sample T(x) - x on the reference grid as a float32 vector volume.

    FFD evaluation clamps at the control-grid boundary so reference grids
    slightly larger than the registration domain stay usable.
    """
    centers = reference.voxel_centers()
    mapped = apply_transform(t, centers, strict=False)
    disp = (mapped - centers).astype(np.float32)
    nx, ny, nz = reference.dims
    data = disp.reshape(nz, ny, nx, 3).transpose(2, 1, 0, 3)  # x-fastest rows
    vol = ImageVolume(
        dims=reference.dims,
        spacing=reference.spacing,
        origin=reference.origin,
        direction=reference.direction,
        data=np.ascontiguousarray(data),
        kind=KIND_VECTOR,
    )
    return DenseDisplacementField(vol)


def invert_dense(f: DenseDisplacementField, max_iter: int = 50, tol: float = 0.01) -> InversionResult:
    """Invert u by fixed-point iteration v <- -u(x + v(x)) per voxel.

    Stops when the largest per-voxel update drops below ``tol`` mm or
    after ``max_iter`` sweeps. The returned residual is
    max_x |u(x + v(x)) + v(x)|; residuals above 10*tol set the warning
    flag rather than raising.
    """
    vol = f.field
    centers = vol.voxel_centers()
    v = np.zeros_like(centers)
    updates = []
    converged = False
    iterations = 0
    for _ in range(max_iter):
        v_new = -sample_trilinear(vol, centers + v)
        step = np.sqrt(((v_new - v) ** 2).sum(axis=1)).max()
        updates.append(float(step))
        v = v_new
        iterations += 1
        if step < tol:
            converged = True
            break
    residual = float(np.sqrt(((sample_trilinear(vol, centers + v) + v) ** 2).sum(axis=1)).max())
    nx, ny, nz = vol.dims
    data = v.astype(np.float32).reshape(nz, ny, nx, 3).transpose(2, 1, 0, 3)
    out = ImageVolume(
        dims=vol.dims,
        spacing=vol.spacing,
        origin=vol.origin,
        direction=vol.direction,
        data=np.ascontiguousarray(data),
        kind=KIND_VECTOR,
    )
    return InversionResult(
        field=DenseDisplacementField(out),
        residual=residual,
        iterations=iterations,
        converged=converged,
        warning=residual > 10.0 * tol,
        update_trace=updates,
    )


def load_external_field(path) -> DenseDisplacementField:
    """Ingest a precomputed displacement field (NIfTI vector volume, world mm).

    Rejects non-vector files and fields carrying NaN/Inf components,
    naming the first offending voxel index.
    """
    vol = load_nifti(path)
    if vol.kind != KIND_VECTOR:
        raise FormatError(f"{path} is not a vector-field NIfTI volume")
    bad = ~np.isfinite(vol.data)
    if np.any(bad):
        i, j, k, c = np.argwhere(bad)[0]
        raise DataError(
            f"displacement field contains a non-finite component at voxel "
            f"({i}, {j}, {k}) component {c}"
        )
    return DenseDisplacementField(vol)


def save_dense_field(f: DenseDisplacementField, path) -> None:
    save_nifti(f.field, path)
