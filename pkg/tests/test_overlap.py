import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atlasmorph.errors import IncompatibleGridsError, UndefinedMetricError
from atlasmorph.overlap import dice, hausdorff, overlap_report, save_report_csv, save_report_json
from atlasmorph.volume import BinaryMask, binary_mask, surface_voxels

from conftest import make_label_volume


def make_mask(bits, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
    bits = np.asarray(bits, dtype=bool)
    return BinaryMask(dims=bits.shape, spacing=spacing, origin=origin,
                      direction=np.eye(3), bits=bits)


def brute_force_hausdorff(a, b):
    """O(n^2) oracle over surface point sets; fully materialized double loop."""
    pa = surface_voxels(a)
    pb = surface_voxels(b)
    all_d = np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=-1)
    d_ab = all_d.min(axis=1)
    d_ba = all_d.min(axis=0)
    hd = max(d_ab.max(), d_ba.max())
    hd95 = np.percentile(np.concatenate([d_ab, d_ba]), 95, method="linear")
    return float(hd), float(hd95)


class TestDice:
    def test_identical_masks(self, rng):
        bits = rng.random((5, 5, 5)) > 0.5
        bits[2, 2, 2] = True
        m = make_mask(bits)
        assert dice(m, m) == 1.0

    def test_disjoint_masks(self):
        a = np.zeros((4, 4, 4), dtype=bool)
        b = np.zeros((4, 4, 4), dtype=bool)
        a[0, 0, 0] = True
        b[3, 3, 3] = True
        assert dice(make_mask(a), make_mask(b)) == 0.0

    def test_shifted_block_is_half(self):
        a = np.zeros((4, 3, 3), dtype=bool)
        b = np.zeros((4, 3, 3), dtype=bool)
        a[0:2, 0:2, 0:2] = True
        b[1:3, 0:2, 0:2] = True
        assert dice(make_mask(a), make_mask(b)) == 0.5

    def test_degenerate_policies(self):
        empty = make_mask(np.zeros((3, 3, 3), dtype=bool))
        full = make_mask(np.ones((3, 3, 3), dtype=bool))
        assert dice(empty, empty) == 1.0
        assert dice(empty, full) == 0.0
        assert dice(full, empty) == 0.0

    def test_grid_mismatch(self):
        a = make_mask(np.ones((3, 3, 3), dtype=bool))
        b = make_mask(np.ones((4, 4, 4), dtype=bool))
        with pytest.raises(IncompatibleGridsError):
            dice(a, b)
        c = make_mask(np.ones((3, 3, 3), dtype=bool), origin=(1.0, 0.0, 0.0))
        with pytest.raises(IncompatibleGridsError):
            dice(a, c)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_symmetry_property(self, seed):
        rng = np.random.default_rng(seed)
        a = make_mask(rng.random((4, 4, 4)) > 0.5)
        b = make_mask(rng.random((4, 4, 4)) > 0.5)
        assert dice(a, b) == dice(b, a)


class TestHausdorff:
    def test_identical_masks_zero(self, rng):
        bits = rng.random((5, 5, 5)) > 0.4
        bits[2, 2, 2] = True
        m = make_mask(bits)
        assert hausdorff(m, m) == (0.0, 0.0)

    def test_single_voxel_pair_3mm(self):
        a = np.zeros((4, 1, 1), dtype=bool)
        b = np.zeros((4, 1, 1), dtype=bool)
        a[0, 0, 0] = True
        b[3, 0, 0] = True
        hd, hd95 = hausdorff(make_mask(a), make_mask(b))
        assert hd == 3.0
        assert hd95 == 3.0  # pooled multiset is {3, 3}: single value

    def test_spacing_respected(self):
        a = np.zeros((2, 1, 1), dtype=bool)
        b = np.zeros((2, 1, 1), dtype=bool)
        a[0] = True
        b[1] = True
        hd, _ = hausdorff(make_mask(a, spacing=(2.5, 1.0, 1.0)), make_mask(b, spacing=(2.5, 1.0, 1.0)))
        assert hd == 2.5

    def test_empty_mask_undefined(self):
        full = make_mask(np.ones((3, 3, 3), dtype=bool))
        empty = make_mask(np.zeros((3, 3, 3), dtype=bool))
        with pytest.raises(UndefinedMetricError):
            hausdorff(full, empty)

    def test_matches_brute_force_exactly(self):
        rng = np.random.default_rng(7)
        for trial in range(50):
            dims = tuple(rng.integers(3, 13, size=3))
            a = rng.random(dims) > 0.6
            b = rng.random(dims) > 0.6
            a[tuple(d // 2 for d in dims)] = True
            b[tuple(d // 2 for d in dims)] = True
            ma, mb = make_mask(a), make_mask(b)
            got = hausdorff(ma, mb)
            expect = brute_force_hausdorff(ma, mb)
            assert got == expect, f"trial {trial}: {got} != {expect}"

    def test_symmetry(self, rng):
        a = make_mask(rng.random((6, 6, 6)) > 0.55)
        b = make_mask(rng.random((6, 6, 6)) > 0.55)
        if a.count == 0 or b.count == 0:
            pytest.skip("degenerate draw")
        assert hausdorff(a, b) == hausdorff(b, a)

    def test_hd95_le_hd(self, rng):
        for _ in range(20):
            a = make_mask(rng.random((7, 7, 7)) > 0.5)
            b = make_mask(rng.random((7, 7, 7)) > 0.5)
            if a.count == 0 or b.count == 0:
                continue
            hd, hd95 = hausdorff(a, b)
            assert hd95 <= hd + 1e-15


class TestReport:
    def two_label_volume(self, shift=0):
        data = np.zeros((8, 8, 8), dtype=np.int32)
        data[1 + shift:4 + shift, 1:4, 1:4] = 1
        data[5:7, 5:7, 5:7] = 2
        return make_label_volume(data)

    def test_self_comparison_perfect(self):
        vol = self.two_label_volume()
        rep = overlap_report(vol, vol)
        assert [r.label for r in rep.rows] == [1, 2]
        for r in rep.rows:
            assert r.dice == 1.0
            assert r.hd == 0.0 and r.hd95 == 0.0
        assert rep.aggregate["dice"] == 1.0
        assert rep.aggregate["hd"] == 0.0
        assert rep.aggregate["n_labels"] == 2

    def test_rows_match_single_mask_calls(self):
        a = self.two_label_volume()
        b = self.two_label_volume(shift=1)
        rep = overlap_report(a, b)
        for row in rep.rows:
            ma = binary_mask(a, row.label)
            mb = binary_mask(b, row.label)
            assert row.dice == dice(ma, mb)
            assert (row.hd, row.hd95) == hausdorff(ma, mb)
            assert row.n_a == ma.count and row.n_b == mb.count

    def test_label_only_in_one_volume(self):
        a = self.two_label_volume()
        data = np.array(a.data)
        data[data == 2] = 0
        b = make_label_volume(data)
        rep = overlap_report(a, b)
        row2 = [r for r in rep.rows if r.label == 2][0]
        assert row2.dice == 0.0
        assert np.isnan(row2.hd)
        assert rep.only_in_a == [2]
        assert rep.aggregate["n_labels"] == 1

    def test_background_excluded_by_default(self):
        vol = self.two_label_volume()
        rep = overlap_report(vol, vol)
        assert 0 not in [r.label for r in rep.rows]
        rep0 = overlap_report(vol, vol, labels=[0, 1])
        assert [r.label for r in rep0.rows] == [0, 1]

    def test_grid_mismatch(self):
        a = self.two_label_volume()
        b = make_label_volume(np.zeros((4, 4, 4), dtype=np.int32))
        with pytest.raises(IncompatibleGridsError):
            overlap_report(a, b)

    def test_serialization_columns(self, tmp_path):
        vol = self.two_label_volume()
        rep = overlap_report(vol, vol)
        cpath = tmp_path / "o.csv"
        jpath = tmp_path / "o.json"
        save_report_csv(rep, cpath)
        save_report_json(rep, jpath)
        lines = [l for l in cpath.read_text().splitlines() if not l.startswith("#")]
        assert lines[0] == "label,dice,hd_mm,hd95_mm,n_a,n_b"
        assert len(lines) == 3
        import json
        loaded = json.loads(jpath.read_text())
        assert loaded["aggregate"]["dice"] == 1.0
        assert "conventions" in loaded
