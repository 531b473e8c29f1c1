"""Hexahedral mesh data model, legacy-VTK I/O, overlay meshing, morphing.

Node numbering follows the usual hexahedron convention: corners 0-3 are
the bottom quad counter-clockwise seen from above, 4-7 the top quad
aligned with it. Meshes are immutable by convention; operations return
new objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateInputError,
    FormatError,
    OutOfDomainError,
    UnsupportedFeatureError,
)
from .transforms import apply_transform
from .volume import index_to_world

_VTK_HEX_TYPE = 12
# relabeling that flips element orientation (bottom quad <-> top quad);
# applied when the mask geometry is left-handed so elements stay positive
_FLIP_PERM = (4, 5, 6, 7, 0, 1, 2, 3)


@dataclass
class HexMesh:
    """Nodes (world mm), 8-node hex elements, named per-element label arrays."""

    nodes: np.ndarray
    elements: np.ndarray
    label_arrays: dict[str, np.ndarray] = field(default_factory=dict)
    comment: str = "hexahedral mesh"

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=np.float64).reshape(-1, 3)
        self.elements = np.asarray(self.elements, dtype=np.int64).reshape(-1, 8)
        self.label_arrays = {k: np.asarray(v, dtype=np.int64) for k, v in self.label_arrays.items()}
        self.validate()

    def validate(self):
        if self.elements.size:
            if self.elements.min() < 0 or self.elements.max() >= len(self.nodes):
                raise ValueError("element references a node index out of range")
            sorted_elems = np.sort(self.elements, axis=1)
            if np.any(sorted_elems[:, 1:] == sorted_elems[:, :-1]):
                raise ValueError("element has repeated node indices")
        for name, arr in self.label_arrays.items():
            if arr.shape != (len(self.elements),):
                raise ValueError(f"label array {name!r} has {arr.shape[0]} entries "
                                 f"for {len(self.elements)} elements")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def element_corners(self) -> np.ndarray:
        return self.nodes[self.elements]

    def with_label_array(self, name: str, values, comment_suffix: str = "") -> "HexMesh":
        arrays = dict(self.label_arrays)
        arrays[name] = np.asarray(values, dtype=np.int64)
        comment = self.comment + comment_suffix
        return HexMesh(self.nodes.copy(), self.elements.copy(), arrays, comment)


def element_centroid(mesh: HexMesh, e: int) -> np.ndarray:
    """Arithmetic mean of the element's 8 node coordinates."""
    return mesh.nodes[mesh.elements[e]].mean(axis=0)


def element_centroids(mesh: HexMesh) -> np.ndarray:
    return mesh.nodes[mesh.elements].mean(axis=1)


# ---------------------------------------------------------------------------
# VTK legacy ASCII subset


def save_vtk(mesh: HexMesh, path) -> None:
    """Write legacy ASCII UnstructuredGrid; coordinates at 9 significant digits.

    Label arrays are emitted as CELL_DATA SCALARS int arrays in sorted
    name order so output bytes are reproducible.
    """
    lines = [
        "# vtk DataFile Version 3.0",
        mesh.comment.replace("\n", " ") or "hexahedral mesh",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} float",
    ]
    for p in mesh.nodes:
        lines.append(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}")
    lines.append(f"CELLS {mesh.n_elements} {mesh.n_elements * 9}")
    for elem in mesh.elements:
        lines.append("8 " + " ".join(str(int(i)) for i in elem))
    lines.append(f"CELL_TYPES {mesh.n_elements}")
    lines.extend(str(_VTK_HEX_TYPE) for _ in range(mesh.n_elements))
    if mesh.label_arrays:
        lines.append(f"CELL_DATA {mesh.n_elements}")
        for name in sorted(mesh.label_arrays):
            lines.append(f"SCALARS {name} int 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(str(int(v)) for v in mesh.label_arrays[name])
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


class _TokenStream:
    def __init__(self, lines):
        self._tokens = (tok for line in lines for tok in line.split())

    def next(self, what):
        try:
            return next(self._tokens)
        except StopIteration:
            raise FormatError(f"unexpected end of file while reading {what}") from None

    def next_int(self, what):
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise FormatError(f"expected integer for {what}, got {tok!r}") from None

    def next_float(self, what):
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise FormatError(f"expected number for {what}, got {tok!r}") from None

    def peek(self):
        try:
            tok = next(self._tokens)
        except StopIteration:
            return None
        rest = self._tokens
        def chained():
            yield tok
            yield from rest
        self._tokens = chained()
        return tok


def load_vtk(path) -> HexMesh:
    """Read the legacy ASCII UnstructuredGrid subset written by save_vtk.

    Only hexahedron cells (type 12) and integer SCALARS cell data are
    accepted; anything else raises.
    """
    with open(path) as fh:
        text = fh.read()
    lines = text.splitlines()
    if len(lines) < 5 or not lines[0].startswith("# vtk DataFile Version"):
        raise FormatError("missing VTK DataFile header line")
    comment = lines[1]
    if lines[2].strip().upper() != "ASCII":
        raise UnsupportedFeatureError(f"only ASCII files supported, got {lines[2].strip()!r}")
    dataset = lines[3].split()
    if dataset != ["DATASET", "UNSTRUCTURED_GRID"]:
        raise FormatError(f"expected DATASET UNSTRUCTURED_GRID, got {lines[3].strip()!r}")
    ts = _TokenStream(lines[4:])

    tok = ts.next("POINTS section")
    if tok != "POINTS":
        raise FormatError(f"expected POINTS, got {tok!r}")
    n_points = ts.next_int("point count")
    ts.next("point datatype")  # float/double, parsed as float64 either way
    nodes = np.empty((n_points, 3))
    for i in range(n_points):
        nodes[i] = [ts.next_float("point coordinate") for _ in range(3)]

    tok = ts.next("CELLS section")
    if tok != "CELLS":
        raise FormatError(f"expected CELLS, got {tok!r}")
    n_cells = ts.next_int("cell count")
    list_size = ts.next_int("cell list size")
    raw_cells = []
    consumed = 0
    for _ in range(n_cells):
        npts = ts.next_int("cell point count")
        raw_cells.append([ts.next_int("cell connectivity") for _ in range(npts)])
        consumed += npts + 1
    if consumed != list_size:
        raise FormatError(f"CELLS declares {list_size} entries but records use {consumed}")

    tok = ts.next("CELL_TYPES section")
    if tok != "CELL_TYPES":
        raise FormatError(f"expected CELL_TYPES, got {tok!r}")
    n_types = ts.next_int("cell type count")
    if n_types != n_cells:
        raise FormatError(f"CELL_TYPES count {n_types} != CELLS count {n_cells}")
    for idx in range(n_cells):
        ctype = ts.next_int("cell type")
        if ctype != _VTK_HEX_TYPE:
            raise UnsupportedFeatureError(f"cell {idx} has unsupported type {ctype} (need 12)")
        if len(raw_cells[idx]) != 8:
            raise FormatError(f"hexahedron cell {idx} lists {len(raw_cells[idx])} points")
    elements = np.array(raw_cells, dtype=np.int64).reshape(n_cells, 8)

    label_arrays: dict[str, np.ndarray] = {}
    tok = ts.peek()
    if tok == "CELL_DATA":
        ts.next("CELL_DATA")
        n_data = ts.next_int("cell data count")
        if n_data != n_cells:
            raise FormatError(f"CELL_DATA count {n_data} != cell count {n_cells}")
        while ts.peek() == "SCALARS":
            ts.next("SCALARS")
            name = ts.next("scalar array name")
            dtype = ts.next("scalar datatype")
            if dtype not in ("int", "long"):
                raise UnsupportedFeatureError(f"cell array {name!r} has type {dtype!r}, need int")
            ncomp = 1
            nxt = ts.peek()
            if nxt is not None and nxt.isdigit() and int(nxt) <= 4:
                ncomp = ts.next_int("scalar components")
            if ncomp != 1:
                raise UnsupportedFeatureError(f"cell array {name!r} has {ncomp} components")
            if ts.peek() == "LOOKUP_TABLE":
                ts.next("LOOKUP_TABLE")
                ts.next("lookup table name")
            label_arrays[name] = np.array(
                [ts.next_int(f"value of {name}") for _ in range(n_cells)], dtype=np.int64
            )
        tok = ts.peek()
    if tok is not None:
        raise UnsupportedFeatureError(f"unsupported trailing section {tok!r}")
    return HexMesh(nodes, elements, label_arrays, comment)


# ---------------------------------------------------------------------------
# overlay-grid meshing


def overlay_grid_mesh(mask, block: int = 1) -> HexMesh:
    """One hexahedron per block^3 voxel cluster at least half inside the mask.

    Nodes sit on voxel-corner world positions and are shared between
    neighboring elements (deduplicated through integer lattice keys).
    Clusters are complete blocks only; trailing voxels along an axis not
    filling a block are ignored. Elements come out positively oriented.
    """
    if block < 1:
        raise ValueError("block must be >= 1")
    nx, ny, nz = mask.dims
    nbx, nby, nbz = nx // block, ny // block, nz // block
    if min(nbx, nby, nbz) == 0:
        raise DegenerateInputError(f"mask dims {mask.dims} hold no complete block of {block}")
    crop = mask.bits[: nbx * block, : nby * block, : nbz * block]
    occupancy = crop.reshape(nbx, block, nby, block, nbz, block).sum(axis=(1, 3, 5))
    selected = occupancy >= 0.5 * block**3
    if not selected.any():
        raise DegenerateInputError("no voxel cluster reaches the 0.5 occupancy threshold")
    # x-fastest deterministic cluster order
    clusters = np.argwhere(selected.T)[:, ::-1].astype(np.int64)

    # lattice corner offsets in element-local numbering (bottom CCW, then top)
    offsets = np.array(
        [
            [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
            [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
        ],
        dtype=np.int64,
    )
    corner_lattice = clusters[:, None, :] + offsets[None, :, :]  # (M, 8, 3)
    flat_keys = (
        corner_lattice[..., 0] * (nby + 2) + corner_lattice[..., 1]
    ) * (nbz + 2) + corner_lattice[..., 2]
    unique_keys, inverse = np.unique(flat_keys.ravel(), return_inverse=True)
    elements = inverse.reshape(-1, 8)
    ij = unique_keys // (nbz + 2)
    lattice = np.stack([ij // (nby + 2), ij % (nby + 2), unique_keys % (nbz + 2)], axis=1)
    # lattice point (i, j, k) is the low corner of voxel (i*block, ...) : index - 0.5
    nodes = index_to_world(mask, lattice.astype(np.float64) * block - 0.5)

    if np.linalg.det(mask.direction) < 0:
        elements = elements[:, _FLIP_PERM]
    return HexMesh(nodes, elements)


# ---------------------------------------------------------------------------
# morphing


def morph_mesh(mesh: HexMesh, t, strict: bool = True) -> HexMesh:
    """Push every node through the transform; connectivity and labels intact."""
    try:
        new_nodes = apply_transform(t, mesh.nodes, strict=strict)
    except OutOfDomainError as exc:
        raise OutOfDomainError(
            f"mesh node(s) outside the transform domain: {exc.indices[:20]}"
            + ("..." if len(exc.indices) > 20 else ""),
            indices=exc.indices,
        ) from None
    return HexMesh(
        nodes=new_nodes,
        elements=mesh.elements.copy(),
        label_arrays={k: v.copy() for k, v in mesh.label_arrays.items()},
        comment=mesh.comment,
    )
