"""Segmentation agreement metrics: DICE, Hausdorff distance, HD95.

Hausdorff distances are measured in millimetres between the 6-connectivity
surface-voxel point sets of the two masks. HD95 is the linear-interpolation
95th percentile of the pooled directed-distance multiset (both directions
concatenated). Aggregates are unweighted means over the labels present in
both volumes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import IncompatibleGridsError, UndefinedMetricError
from .volume import BinaryMask, ImageVolume, binary_mask, same_geometry, surface_voxels

CONVENTIONS = {
    "hd_surface": "6-connectivity surface voxel centers, distances in mm",
    "hd95": "pooled-percentile of both directed distance sets, linear interpolation",
    "aggregate": "unweighted mean over labels present in both volumes",
    "background": "label 0 excluded unless requested explicitly",
}


@dataclass
class OverlapRow:
    label: int
    dice: float
    hd: float
    hd95: float
    n_a: int
    n_b: int
    note: str = ""


@dataclass
class OverlapReport:
    rows: list[OverlapRow]
    aggregate: dict
    only_in_a: list[int] = field(default_factory=list)
    only_in_b: list[int] = field(default_factory=list)


def _check_grids(a, b):
    if not same_geometry(a, b):
        raise IncompatibleGridsError(
            f"masks have different grids: dims {a.dims} vs {b.dims}"
        )


def dice(a: BinaryMask, b: BinaryMask) -> float:
    """2|A&B| / (|A|+|B|); both empty -> 1.0, exactly one empty -> 0.0."""
    _check_grids(a, b)
    na, nb = a.count, b.count
    if na == 0 and nb == 0:
        return 1.0
    if na == 0 or nb == 0:
        return 0.0
    inter = int(np.sum(a.bits & b.bits))
    return 2.0 * inter / (na + nb)


def _directed_distances(src_pts, dst_pts):
    d, _ = cKDTree(dst_pts).query(src_pts, k=1)
    return np.atleast_1d(d)


def hausdorff(a: BinaryMask, b: BinaryMask) -> tuple[float, float]:
    """(HD, HD95) in mm between the surface point sets of two masks."""
    _check_grids(a, b)
    if a.count == 0 or b.count == 0:
        raise UndefinedMetricError("Hausdorff distance is undefined for an empty mask")
    pa = surface_voxels(a)
    pb = surface_voxels(b)
    d_ab = _directed_distances(pa, pb)
    d_ba = _directed_distances(pb, pa)
    hd = float(max(d_ab.max(), d_ba.max()))
    pooled = np.concatenate([d_ab, d_ba])
    hd95 = float(np.percentile(pooled, 95, method="linear"))
    return hd, hd95


def overlap_report(a: ImageVolume, b: ImageVolume, labels=None) -> OverlapReport:
    """Per-label dice/HD/HD95 plus the unweighted aggregate.

    Default label set is the union of labels present in either volume,
    excluding 0 as background. Labels present in only one volume get a
    dice-0 row with undefined HD and are left out of the aggregate.
    """
    _check_grids(a, b)
    present_a = set(int(v) for v in np.unique(a.data))
    present_b = set(int(v) for v in np.unique(b.data))
    if labels is None:
        labels = sorted((present_a | present_b) - {0})
    else:
        labels = sorted(int(l) for l in labels)
    rows = []
    agg_dice, agg_hd, agg_hd95 = [], [], []
    only_a, only_b = [], []
    for label in labels:
        ma = binary_mask(a, label)
        mb = binary_mask(b, label)
        d = dice(ma, mb)
        if ma.count > 0 and mb.count > 0:
            hd, hd95 = hausdorff(ma, mb)
            rows.append(OverlapRow(label, d, hd, hd95, ma.count, mb.count))
            agg_dice.append(d)
            agg_hd.append(hd)
            agg_hd95.append(hd95)
        else:
            rows.append(OverlapRow(label, d, math.nan, math.nan, ma.count, mb.count,
                                   note="undefined-hd"))
            if ma.count > 0:
                only_a.append(label)
            elif mb.count > 0:
                only_b.append(label)
    aggregate = {
        "n_labels": len(agg_dice),
        "dice": float(np.mean(agg_dice)) if agg_dice else math.nan,
        "hd": float(np.mean(agg_hd)) if agg_hd else math.nan,
        "hd95": float(np.mean(agg_hd95)) if agg_hd95 else math.nan,
    }
    return OverlapReport(rows=rows, aggregate=aggregate, only_in_a=only_a, only_in_b=only_b)


def report_to_dict(report: OverlapReport) -> dict:
    return {
        "conventions": CONVENTIONS,
        "rows": [
            {
                "label": r.label,
                "dice": r.dice,
                "hd_mm": r.hd,
                "hd95_mm": r.hd95,
                "n_a": r.n_a,
                "n_b": r.n_b,
                "note": r.note,
            }
            for r in report.rows
        ],
        "aggregate": report.aggregate,
        "only_in_a": report.only_in_a,
        "only_in_b": report.only_in_b,
    }


def save_report_json(report: OverlapReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_report_csv(report: OverlapReport, path) -> None:
    """Fixed columns: label, dice, hd_mm, hd95_mm, n_a, n_b."""
    with open(path, "w", newline="") as fh:
        for key in sorted(CONVENTIONS):
            fh.write(f"# {key}: {CONVENTIONS[key]}\n")
        writer = csv.writer(fh)
        writer.writerow(["label", "dice", "hd_mm", "hd95_mm", "n_a", "n_b"])
        for r in report.rows:
            writer.writerow([
                r.label,
                f"{r.dice:.10g}",
                "nan" if math.isnan(r.hd) else f"{r.hd:.10g}",
                "nan" if math.isnan(r.hd95) else f"{r.hd95:.10g}",
                r.n_a,
                r.n_b,
            ])
