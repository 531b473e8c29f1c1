import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atlasmorph.errors import (
    DegenerateInputError,
    FormatError,
    OutOfDomainError,
    UnsupportedFeatureError,
)
from atlasmorph.mesh import (
    HexMesh,
    element_centroid,
    load_vtk,
    morph_mesh,
    overlay_grid_mesh,
    save_vtk,
)
from atlasmorph.quality import aspect_ratio_many, scaled_jacobian_many, skew_many
from atlasmorph.transforms import AffineTransform, BSplineFFD, DenseDisplacementField, apply_transform
from atlasmorph.volume import BinaryMask, KIND_VECTOR

from conftest import make_volume, random_rotation

UNIT_CUBE = np.array(
    [
        [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
        [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
    ],
    dtype=np.float64,
)

UNIT_CUBE_VTK = """# vtk DataFile Version 3.0
one unit cube
ASCII
DATASET UNSTRUCTURED_GRID
POINTS 8 float
0 0 0
1 0 0
1 1 0
0 1 0
0 0 1
1 0 1
1 1 1
0 1 1
CELLS 1 9
8 0 1 2 3 4 5 6 7
CELL_TYPES 1
12
CELL_DATA 1
SCALARS material int 1
LOOKUP_TABLE default
7
"""

TETRA_VTK = """# vtk DataFile Version 3.0
a tetra
ASCII
DATASET UNSTRUCTURED_GRID
POINTS 4 float
0 0 0
1 0 0
0 1 0
0 0 1
CELLS 1 5
4 0 1 2 3
CELL_TYPES 1
10
"""


def make_mask(bits, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0), direction=None):
    bits = np.asarray(bits, dtype=bool)
    return BinaryMask(
        dims=bits.shape,
        spacing=spacing,
        origin=origin,
        direction=np.eye(3) if direction is None else direction,
        bits=bits,
    )


def unit_cube_mesh():
    return HexMesh(UNIT_CUBE.copy(), np.arange(8).reshape(1, 8), {"material": np.array([7])})


class TestVtkIO:
    def test_load_hand_written_cube(self, tmp_path):
        path = tmp_path / "cube.vtk"
        path.write_text(UNIT_CUBE_VTK)
        mesh = load_vtk(path)
        assert mesh.n_nodes == 8
        assert mesh.n_elements == 1
        assert np.array_equal(mesh.nodes, UNIT_CUBE)
        assert np.array_equal(mesh.label_arrays["material"], [7])
        assert mesh.comment == "one unit cube"

    def test_roundtrip_identity(self, tmp_path, rng):
        nodes = rng.uniform(-10, 10, size=(27, 3))
        elements = np.array([[0, 1, 4, 3, 9, 10, 13, 12], [1, 2, 5, 4, 10, 11, 14, 13]])
        mesh = HexMesh(nodes, elements, {"atlas": np.array([3, 5]), "material": np.array([1, 1])})
        p1, p2 = tmp_path / "a.vtk", tmp_path / "b.vtk"
        save_vtk(mesh, p1)
        first = load_vtk(p1)
        save_vtk(first, p2)
        second = load_vtk(p2)
        # after one print-parse cycle the representation is stable
        assert p1.read_text() == p2.read_text()
        assert np.array_equal(first.nodes, second.nodes)
        assert np.array_equal(first.elements, mesh.elements)
        assert set(first.label_arrays) == {"atlas", "material"}
        assert np.array_equal(first.label_arrays["atlas"], [3, 5])
        # 9 significant digits: within 1e-5 mm for coordinates below 100 mm
        assert np.max(np.abs(first.nodes - mesh.nodes)) < 1e-5

    def test_tetra_rejected_naming_cell(self, tmp_path):
        path = tmp_path / "tet.vtk"
        path.write_text(TETRA_VTK)
        with pytest.raises(UnsupportedFeatureError) as exc:
            load_vtk(path)
        assert "cell 0" in str(exc.value)
        assert "10" in str(exc.value)

    def test_count_mismatch_rejected(self, tmp_path):
        bad = UNIT_CUBE_VTK.replace("CELLS 1 9", "CELLS 1 12")
        path = tmp_path / "bad.vtk"
        path.write_text(bad)
        with pytest.raises(FormatError):
            load_vtk(path)

    def test_binary_file_rejected(self, tmp_path):
        bad = UNIT_CUBE_VTK.replace("ASCII", "BINARY")
        path = tmp_path / "bin.vtk"
        path.write_text(bad)
        with pytest.raises(UnsupportedFeatureError):
            load_vtk(path)

    def test_point_data_rejected(self, tmp_path):
        extra = UNIT_CUBE_VTK + "POINT_DATA 8\nSCALARS temp int 1\nLOOKUP_TABLE default\n0 0 0 0 0 0 0 0\n"
        path = tmp_path / "pd.vtk"
        path.write_text(extra)
        with pytest.raises(UnsupportedFeatureError):
            load_vtk(path)

    def test_float_dtype_points_accepted(self, tmp_path):
        text = UNIT_CUBE_VTK.replace("POINTS 8 float", "POINTS 8 double")
        path = tmp_path / "dbl.vtk"
        path.write_text(text)
        assert load_vtk(path).n_nodes == 8


class TestOverlayGrid:
    def test_full_2x2x2_block1(self):
        mesh = overlay_grid_mesh(make_mask(np.ones((2, 2, 2))), block=1)
        assert mesh.n_elements == 8
        assert mesh.n_nodes == 27

    def test_single_voxel(self):
        bits = np.zeros((3, 3, 3), dtype=bool)
        bits[1, 1, 1] = True
        mesh = overlay_grid_mesh(make_mask(bits), block=1)
        assert mesh.n_elements == 1
        assert mesh.n_nodes == 8
        sj = scaled_jacobian_many(mesh.element_corners())
        assert sj[0] == pytest.approx(1.0, abs=1e-12)

    def test_all_clear_rejected(self):
        with pytest.raises(DegenerateInputError):
            overlay_grid_mesh(make_mask(np.zeros((4, 4, 4), dtype=bool)), block=1)

    def test_block_occupancy_threshold(self):
        bits = np.zeros((4, 2, 2), dtype=bool)
        bits[:2, :, :] = True          # first block full
        bits[2, 0, 0] = True           # second block 1/8 occupied
        mesh = overlay_grid_mesh(make_mask(bits), block=2)
        assert mesh.n_elements == 1
        bits[2:, :, 0] = True          # second block now 4/8 occupied, at threshold
        mesh = overlay_grid_mesh(make_mask(bits), block=2)
        assert mesh.n_elements == 2

    def test_nodes_at_voxel_corners(self):
        bits = np.ones((1, 1, 1), dtype=bool)
        mesh = overlay_grid_mesh(make_mask(bits, spacing=(2.0, 2.0, 2.0), origin=(10.0, 0.0, 0.0)), 1)
        lo = mesh.nodes.min(axis=0)
        hi = mesh.nodes.max(axis=0)
        assert np.allclose(lo, [9.0, -1.0, -1.0])
        assert np.allclose(hi, [11.0, 1.0, 1.0])

    def test_no_duplicate_nodes_and_positive_orientation(self, rng):
        bits = rng.random((6, 5, 4)) > 0.4
        if not bits.any():
            bits[0, 0, 0] = True
        mesh = overlay_grid_mesh(make_mask(bits, spacing=(0.7, 1.1, 0.9)), block=1)
        from scipy.spatial import cKDTree
        d, _ = cKDTree(mesh.nodes).query(mesh.nodes, k=2)
        assert d[:, 1].min() >= min(0.7, 1.1, 0.9) - 1e-9
        assert scaled_jacobian_many(mesh.element_corners()).min() > 0

    def test_left_handed_geometry_still_positive(self):
        mirror = np.diag([-1.0, 1.0, 1.0])
        mesh = overlay_grid_mesh(make_mask(np.ones((2, 2, 2)), direction=mirror), block=1)
        assert scaled_jacobian_many(mesh.element_corners()).min() > 0


class TestMorph:
    def test_identity_bit_identical(self):
        mesh = unit_cube_mesh()
        out = morph_mesh(mesh, AffineTransform.identity())
        assert np.array_equal(out.nodes, mesh.nodes)
        assert np.array_equal(out.elements, mesh.elements)
        assert np.array_equal(out.label_arrays["material"], mesh.label_arrays["material"])

    def test_pure_translation(self):
        mesh = unit_cube_mesh()
        t = AffineTransform(np.eye(3), np.array([5.0, 0.0, 0.0]))
        out = morph_mesh(mesh, t)
        assert np.array_equal(out.nodes, mesh.nodes + np.array([5.0, 0.0, 0.0]))

    def test_rigid_preserves_pairwise_distances(self, rng):
        nodes = rng.uniform(-5, 5, size=(20, 3))
        elements = np.arange(8).reshape(1, 8)
        mesh = HexMesh(nodes, elements)
        rot = random_rotation(rng)
        t = AffineTransform(rot, rng.uniform(-10, 10, 3))
        out = morph_mesh(mesh, t)
        d0 = np.linalg.norm(nodes[:, None] - nodes[None, :], axis=-1)
        d1 = np.linalg.norm(out.nodes[:, None] - out.nodes[None, :], axis=-1)
        scale = np.where(d0 > 0, d0, 1.0)
        assert np.max(np.abs(d1 - d0) / scale) < 1e-9

    def test_field_morph_matches_pointwise_application(self, rng):
        n = 12
        grid = np.stack(np.meshgrid(*[np.arange(n)] * 3, indexing="ij"), axis=-1).astype(float)
        c0 = np.array([6.0, 6.0, 6.0])
        data = np.zeros((n, n, n, 3), dtype=np.float32)
        data[..., 1] = 1.5 * np.exp(-((grid - c0) ** 2).sum(-1) / (2 * 9.0))
        f = DenseDisplacementField(make_volume(data, kind=KIND_VECTOR))
        nodes = rng.uniform(2, 9, size=(30, 3))
        mesh = HexMesh(nodes, np.arange(8).reshape(1, 8))
        out = morph_mesh(mesh, f)
        assert np.array_equal(out.nodes, apply_transform(f, nodes))

    def test_strict_out_of_domain_names_nodes(self):
        ffd = BSplineFFD.for_domain([0.0, 0.0, 0.0], [10.0, 10.0, 10.0], 5.0)
        nodes = np.array([[1.0, 1, 1], [999.0, 0, 0], [2.0, 2, 2], [3, 3, 3],
                          [4, 4, 4], [5, 5, 5], [6, 6, 6], [7, 7, 7]])
        mesh = HexMesh(nodes, np.arange(8).reshape(1, 8))
        with pytest.raises(OutOfDomainError) as exc:
            morph_mesh(mesh, ffd, strict=True)
        assert exc.value.indices == [1]
        morph_mesh(mesh, ffd, strict=False)  # permissive path runs

    def test_labels_and_connectivity_untouched(self, rng):
        mesh = unit_cube_mesh()
        t = AffineTransform(random_rotation(rng), rng.uniform(-3, 3, 3))
        out = morph_mesh(mesh, t)
        assert out.label_arrays.keys() == mesh.label_arrays.keys()
        assert np.array_equal(out.elements, mesh.elements)
        assert out.comment == mesh.comment


class TestCentroid:
    def test_unit_cube(self):
        assert np.allclose(element_centroid(unit_cube_mesh(), 0), [0.5, 0.5, 0.5])

    def test_translated_cube(self):
        mesh = unit_cube_mesh()
        shifted = HexMesh(mesh.nodes + np.array([3.0, -1.0, 2.0]), mesh.elements)
        assert np.allclose(element_centroid(shifted, 0), [3.5, -0.5, 2.5])

    def test_sheared_hex_hand_value(self):
        nodes = UNIT_CUBE.copy()
        nodes[:, 0] += 0.5 * nodes[:, 2]  # shear x by z
        mesh = HexMesh(nodes, np.arange(8).reshape(1, 8))
        # mean x = (0+1+1+0+0.5+1.5+1.5+0.5)/8 = 0.75
        assert np.allclose(element_centroid(mesh, 0), [0.75, 0.5, 0.5])


class TestValidation:
    def test_out_of_range_index(self):
        with pytest.raises(ValueError):
            HexMesh(np.zeros((4, 3)), np.array([[0, 1, 2, 3, 4, 5, 6, 7]]))

    def test_repeated_node(self):
        with pytest.raises(ValueError):
            HexMesh(UNIT_CUBE, np.array([[0, 0, 2, 3, 4, 5, 6, 7]]))

    def test_label_length_mismatch(self):
        with pytest.raises(ValueError):
            HexMesh(UNIT_CUBE, np.arange(8).reshape(1, 8), {"m": np.array([1, 2])})


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), block=st.integers(1, 2))
def test_overlay_positive_orientation_property(seed, block):
    rng = np.random.default_rng(seed)
    bits = rng.random((6, 6, 6)) > 0.5
    bits[2:4, 2:4, 2:4] = True  # guarantee at least one full block
    mesh = overlay_grid_mesh(make_mask(bits, spacing=tuple(rng.uniform(0.5, 2.0, 3))), block)
    sj = scaled_jacobian_many(mesh.element_corners())
    ar = aspect_ratio_many(mesh.element_corners())
    sk = skew_many(mesh.element_corners())
    assert sj.min() > 0
    assert ar.min() >= 1
    assert np.all((sk >= 0) & (sk <= 1))
