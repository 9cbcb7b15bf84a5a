"""Per-axis accuracy metrics for resolved-wrench estimates.

Accuracy is reported along the five calibrated axes (f_x, f_y, m_x, m_y,
m_z; the axial force is not a calibration target) with three quantities per
axis: the rms error sigma_i, the range-normalized deviation

    NRMSD_i = rms(pred_i - ref_i) / (max(ref_i) - min(ref_i))

and the coefficient of determination R^2 = 1 - SSE/SST with SST taken about
the reference mean. NRMSD is a fraction here; multiply by 100 to quote
percent. The benchtop values shipped in ``REFERENCE_METRICS`` were measured
on physical hardware against a commercial force/torque sensor and are
documentation context only: they cannot be regenerated from this package.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConstantReferenceError

# wrench component indices of the calibrated axes (1-based, f_z excluded)
AXIS_INDICES = (1, 2, 4, 5, 6)
AXIS_NAMES = ("fx", "fy", "mx", "my", "mz")
AXIS_UNITS = ("N", "N", "N·mm", "N·mm", "N·mm")


def _series_pair(pred, ref) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float).reshape(-1)
    r = np.asarray(ref, dtype=float).reshape(-1)
    if p.shape != r.shape:
        raise ConfigError(
            f"series lengths differ: {p.size} vs {r.size}", "metrics.series"
        )
    if p.size < 2:
        raise ConfigError("need at least two samples", "metrics.series")
    return p, r


def rms_error(pred, ref) -> float:
    """Plain rms of (pred - ref); the per-axis repeatability sigma_i."""
    p, r = _series_pair(pred, ref)
    return float(np.sqrt(np.mean((p - r) ** 2)))


def nrmsd(pred, ref) -> float:
    """Rms deviation normalized by the reference extrema, as a fraction.

    Raises
    ------
    ConstantReferenceError
        The reference series has zero range, so the normalization is
        undefined.
    """
    p, r = _series_pair(pred, ref)
    span = float(r.max() - r.min())
    if span <= 0.0:
        raise ConstantReferenceError(
            "reference series is constant; NRMSD is undefined"
        )
    return float(np.sqrt(np.mean((p - r) ** 2)) / span)


def r_squared(pred, ref) -> float:
    """1 - SSE/SST with SST about the reference mean."""
    p, r = _series_pair(pred, ref)
    sst = float(np.sum((r - r.mean()) ** 2))
    if sst <= 0.0:
        raise ConstantReferenceError(
            "reference series is constant; R^2 is undefined"
        )
    sse = float(np.sum((p - r) ** 2))
    return 1.0 - sse / sst


@dataclass(frozen=True)
class AxisMetrics:
    """Accuracy summary for one calibrated wrench axis."""

    axis: int          # wrench component index, one of AXIS_INDICES
    range_min: float
    range_max: float
    sigma: float       # rms error, N or N·mm
    nrmsd: float       # fraction of the reference range
    r2: float

    def __post_init__(self):
        if self.axis not in AXIS_INDICES:
            raise ConfigError(f"axis must be one of {AXIS_INDICES}", "metrics.axis")
        if not self.range_min < self.range_max:
            raise ConfigError("range must have positive width", "metrics.range")
        if self.nrmsd < 0.0 or self.sigma < 0.0:
            raise ConfigError("sigma and nrmsd are non-negative", "metrics.values")
        if self.r2 > 1.0 + 1e-12:
            raise ConfigError("R^2 cannot exceed 1", "metrics.r2")

    @property
    def name(self) -> str:
        return AXIS_NAMES[AXIS_INDICES.index(self.axis)]

    @property
    def unit(self) -> str:
        return AXIS_UNITS[AXIS_INDICES.index(self.axis)]

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "name": self.name,
            "unit": self.unit,
            "range": [self.range_min, self.range_max],
            "sigma": self.sigma,
            "nrmsd": self.nrmsd,
            "nrmsd_pct": 100.0 * self.nrmsd,
            "r2": self.r2,
        }


def axis_report(pred, ref, axis: int) -> AxisMetrics:
    """Metrics for one axis; ``axis`` is the wrench component index."""
    p, r = _series_pair(pred, ref)
    return AxisMetrics(
        axis=axis,
        range_min=float(r.min()),
        range_max=float(r.max()),
        sigma=rms_error(p, r),
        nrmsd=nrmsd(p, r),
        r2=r_squared(p, r),
    )


def report_axes(pred: np.ndarray, ref: np.ndarray) -> list[AxisMetrics]:
    """Per-axis metrics for (n, 5) prediction/reference target blocks."""
    pred = np.asarray(pred, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if pred.shape != ref.shape or pred.ndim != 2 or pred.shape[1] != 5:
        raise ConfigError("expected matching (n, 5) blocks", "metrics.block")
    return [
        axis_report(pred[:, j], ref[:, j], axis)
        for j, axis in enumerate(AXIS_INDICES)
    ]


# Benchtop reference accuracy, measured on the physical sensor against a
# commercial load cell. Shipped as documented targets; a simulation run is
# not expected to reproduce them.
REFERENCE_METRICS = (
    AxisMetrics(axis=1, range_min=-9.0, range_max=9.0, sigma=0.38, nrmsd=0.0080, r2=0.98),
    AxisMetrics(axis=2, range_min=-9.0, range_max=9.0, sigma=0.30, nrmsd=0.0102, r2=0.98),
    AxisMetrics(axis=4, range_min=-160.0, range_max=160.0, sigma=9.43, nrmsd=0.0092, r2=0.97),
    AxisMetrics(axis=5, range_min=-160.0, range_max=160.0, sigma=12.51, nrmsd=0.0095, r2=0.97),
    AxisMetrics(axis=6, range_min=-100.0, range_max=100.0, sigma=2.15, nrmsd=0.0021, r2=0.99),
)


def format_table(metrics: list[AxisMetrics] | tuple[AxisMetrics, ...]) -> str:
    """Render the metrics in the benchtop report layout.

    Columns are the axis indices i = 1 2 4 5 6; rows are the measured range,
    repeatability sigma_i, NRMSD in percent, and R^2.
    """
    metrics = list(metrics)
    heads = [f"{m.name} [{m.unit}]" for m in metrics]
    rows = [
        ("i", [f"{m.axis}" for m in metrics]),
        ("range", [f"[{m.range_min:+.1f}, {m.range_max:+.1f}]" for m in metrics]),
        ("sigma_i", [f"{m.sigma:.2f}" for m in metrics]),
        ("NRMSD", [f"{100.0 * m.nrmsd:.2f}%" for m in metrics]),
        ("R^2", [f"{m.r2:.2f}" for m in metrics]),
    ]
    cells_flat = [c for _, cells in rows for c in cells]
    width = max(12, max(len(s) for s in heads + cells_flat) + 2)
    label_w = max(len(label) for label, _ in rows) + 2
    lines = [" " * label_w + "".join(h.rjust(width) for h in heads)]
    for label, cells in rows:
        lines.append(label.ljust(label_w) + "".join(c.rjust(width) for c in cells))
    return "\n".join(lines)


def write_plot_series(path, t, ref, pred, axis_name: str) -> None:
    """Time-series CSV (t, ref, pred) for external plotting of one axis."""
    t = np.asarray(t, dtype=float).reshape(-1)
    r = np.asarray(ref, dtype=float).reshape(-1)
    p = np.asarray(pred, dtype=float).reshape(-1)
    if not (t.size == r.size == p.size):
        raise ConfigError("t, ref, pred lengths differ", "metrics.plot_series")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", f"{axis_name}_ref", f"{axis_name}_pred"])
        for i in range(t.size):
            writer.writerow([repr(float(t[i])), repr(float(r[i])), repr(float(p[i]))])
