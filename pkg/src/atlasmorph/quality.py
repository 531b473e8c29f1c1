"""Per-element hexahedral quality metrics and distribution reports.

Metric definitions (fixed here because multiple variants exist in the wild):

* scaled Jacobian — at each of the 8 corners, the determinant of the three
  outgoing edge vectors (in the orientation-consistent order induced by the
  node numbering) divided by the product of their lengths; the element value
  is the minimum over corners. 1 is a perfect cube, negative means inverted.
* aspect ratio — longest of the 12 edges over the shortest; >= 1, 1 ideal.
* skew — maximum pairwise |cosine| between the normalized principal axes
  (sums of the four edges along each parametric direction); in [0, 1],
  0 ideal.

Report thresholds default to scaled Jacobian > 0.5, aspect ratio < 3 and
skew < 0.5.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError

# corner k with its three neighbors; edges leave k in an order that gives
# determinant +1 on the reference cube
_CORNER_NEIGHBORS = (
    (0, 1, 3, 4),
    (1, 2, 0, 5),
    (2, 3, 1, 6),
    (3, 0, 2, 7),
    (4, 7, 5, 0),
    (5, 4, 6, 1),
    (6, 5, 7, 2),
    (7, 6, 4, 3),
)

_EDGES = (
    (0, 1), (1, 2), (2, 3), (3, 0),
    (4, 5), (5, 6), (6, 7), (7, 4),
    (0, 4), (1, 5), (2, 6), (3, 7),
)

SJ_BINS = np.linspace(-1.0, 1.0, 41)
AR_BINS = np.linspace(1.0, 5.0, 41)  # plus one overflow bin past 5
SKEW_BINS = np.linspace(0.0, 1.0, 41)


@dataclass
class QualityThresholds:
    scaled_jacobian_above: float = 0.5
    aspect_ratio_below: float = 3.0
    skew_below: float = 0.5


@dataclass
class MetricStats:
    """Distribution summary of one metric over all elements."""

    name: str
    values: np.ndarray
    vmin: float
    vmax: float
    mean: float
    bin_edges: np.ndarray
    counts: np.ndarray
    threshold_desc: str
    threshold_fraction: float


@dataclass
class QualityReport:
    element_count: int
    scaled_jacobian: MetricStats
    aspect_ratio: MetricStats
    skew: MetricStats

    def metrics(self):
        return (self.scaled_jacobian, self.aspect_ratio, self.skew)


def _corners_array(corners) -> np.ndarray:
    c = np.asarray(corners, dtype=np.float64)
    if c.shape[-2:] != (8, 3):
        raise ValueError(f"expected (..., 8, 3) corner array, got {c.shape}")
    return c


def scaled_jacobian_many(corners) -> np.ndarray:
    """Scaled Jacobian for a batch of elements, shape (..., 8, 3) -> (...)."""
    c = _corners_array(corners)
    jmin = None
    for k, n1, n2, n3 in _CORNER_NEIGHBORS:
        e1 = c[..., n1, :] - c[..., k, :]
        e2 = c[..., n2, :] - c[..., k, :]
        e3 = c[..., n3, :] - c[..., k, :]
        det = np.einsum("...i,...i->...", e1, np.cross(e2, e3))
        norms = (
            np.linalg.norm(e1, axis=-1)
            * np.linalg.norm(e2, axis=-1)
            * np.linalg.norm(e3, axis=-1)
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            j = np.where(norms > 0.0, det / np.where(norms > 0.0, norms, 1.0), 0.0)
        jmin = j if jmin is None else np.minimum(jmin, j)
    return jmin


def scaled_jacobian(corners) -> float:
    """Minimum corner-normalized Jacobian of one element (8 corners)."""
    return float(scaled_jacobian_many(np.asarray(corners)))


def aspect_ratio_many(corners) -> np.ndarray:
    """Max/min edge length per element; +inf for zero-length edges."""
    c = _corners_array(corners)
    a = np.array([e[0] for e in _EDGES])
    b = np.array([e[1] for e in _EDGES])
    lengths = np.linalg.norm(c[..., b, :] - c[..., a, :], axis=-1)
    lmax = lengths.max(axis=-1)
    lmin = lengths.min(axis=-1)
    with np.errstate(divide="ignore"):
        return np.where(lmin > 0.0, lmax / np.where(lmin > 0.0, lmin, 1.0), np.inf)


def aspect_ratio(corners) -> float:
    return float(aspect_ratio_many(np.asarray(corners)))


def skew_many(corners) -> np.ndarray:
    """Max pairwise |cos| of the principal axes; degenerate axes give 1."""
    c = _corners_array(corners)
    x1 = (c[..., 1, :] - c[..., 0, :]) + (c[..., 2, :] - c[..., 3, :]) \
        + (c[..., 5, :] - c[..., 4, :]) + (c[..., 6, :] - c[..., 7, :])
    x2 = (c[..., 3, :] - c[..., 0, :]) + (c[..., 2, :] - c[..., 1, :]) \
        + (c[..., 7, :] - c[..., 4, :]) + (c[..., 6, :] - c[..., 5, :])
    x3 = (c[..., 4, :] - c[..., 0, :]) + (c[..., 5, :] - c[..., 1, :]) \
        + (c[..., 6, :] - c[..., 2, :]) + (c[..., 7, :] - c[..., 3, :])
    n1 = np.linalg.norm(x1, axis=-1)
    n2 = np.linalg.norm(x2, axis=-1)
    n3 = np.linalg.norm(x3, axis=-1)
    degenerate = (n1 == 0.0) | (n2 == 0.0) | (n3 == 0.0)
    n1 = np.where(n1 > 0, n1, 1.0)
    n2 = np.where(n2 > 0, n2, 1.0)
    n3 = np.where(n3 > 0, n3, 1.0)
    d12 = np.abs(np.einsum("...i,...i->...", x1, x2)) / (n1 * n2)
    d13 = np.abs(np.einsum("...i,...i->...", x1, x3)) / (n1 * n3)
    d23 = np.abs(np.einsum("...i,...i->...", x2, x3)) / (n2 * n3)
    out = np.maximum(np.maximum(d12, d13), d23)
    return np.where(degenerate, 1.0, np.minimum(out, 1.0))


def skew(corners) -> float:
    return float(skew_many(np.asarray(corners)))


def _stats(name, values, bin_edges, overflow, threshold_desc, threshold_mask):
    clipped = np.clip(values[np.isfinite(values)], bin_edges[0], bin_edges[-1])
    counts, _ = np.histogram(clipped, bins=bin_edges)
    if overflow:
        n_over = int(np.sum(~np.isfinite(values) | (values > bin_edges[-1])))
        # clipping folded finite overflow into the last bin; move it out
        n_clipped_over = int(np.sum(np.isfinite(values) & (values > bin_edges[-1])))
        counts[-1] -= n_clipped_over
        counts = np.append(counts, n_over)
    finite = values[np.isfinite(values)]
    vmax = float(finite.max()) if finite.size == values.size else float("inf")
    return MetricStats(
        name=name,
        values=values,
        vmin=float(finite.min()) if finite.size else float("inf"),
        vmax=vmax,
        mean=float(values.mean()) if np.all(np.isfinite(values)) else float("inf"),
        bin_edges=bin_edges,
        counts=counts,
        threshold_desc=threshold_desc,
        threshold_fraction=float(threshold_mask.mean()),
    )


def quality_report(mesh, thresholds: QualityThresholds | None = None) -> QualityReport:
    """All three metrics for every element plus distribution statistics."""
    th = thresholds or QualityThresholds()
    if len(mesh.elements) == 0:
        raise DegenerateInputError("quality report of an empty mesh")
    corners = mesh.nodes[mesh.elements]  # (M, 8, 3)
    sj = scaled_jacobian_many(corners)
    ar = aspect_ratio_many(corners)
    sk = skew_many(corners)
    return QualityReport(
        element_count=len(mesh.elements),
        scaled_jacobian=_stats(
            "scaled_jacobian", sj, SJ_BINS, False,
            f"scaled_jacobian > {th.scaled_jacobian_above:g}",
            sj > th.scaled_jacobian_above,
        ),
        aspect_ratio=_stats(
            "aspect_ratio", ar, AR_BINS, True,
            f"aspect_ratio < {th.aspect_ratio_below:g}",
            ar < th.aspect_ratio_below,
        ),
        skew=_stats(
            "skew", sk, SKEW_BINS, False,
            f"skew < {th.skew_below:g}",
            sk < th.skew_below,
        ),
    )


def report_to_dict(report: QualityReport) -> dict:
    out = {"element_count": report.element_count, "metrics": {}}
    for m in report.metrics():
        out["metrics"][m.name] = {
            "min": m.vmin,
            "max": m.vmax,
            "mean": m.mean,
            "threshold": m.threshold_desc,
            "threshold_fraction": m.threshold_fraction,
            "histogram": {
                "bin_edges": [float(e) for e in m.bin_edges],
                "counts": [int(c) for c in m.counts],
            },
        }
    return out


def save_report_json(report: QualityReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_histograms_csv(report: QualityReport, path) -> None:
    """Histogram rows (metric, bin_left, bin_right, count) for plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "bin_left", "bin_right", "count"])
        for m in report.metrics():
            edges = m.bin_edges
            for i in range(len(edges) - 1):
                writer.writerow([m.name, f"{edges[i]:.10g}", f"{edges[i + 1]:.10g}", int(m.counts[i])])
            if len(m.counts) == len(edges):  # overflow bin
                writer.writerow([m.name, f"{edges[-1]:.10g}", "inf", int(m.counts[-1])])
