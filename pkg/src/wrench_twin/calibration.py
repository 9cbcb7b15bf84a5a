"""Calibration artifact I/O and a unified prediction interface.

Both calibration routes serialize to JSON with a ``kind`` tag: ``model``
files hold the identified signal matrix and boundary parameters, ``nn``
files hold network weights with the feature/target recipe. This module
loads either, recovers the five calibrated wrench targets for a dataset,
and exposes the per-axis validation error stored with the artifact so
downstream scenario checks can form error margins without retraining.

Target units follow the training convention: forces in N, moments in N·mm.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .calib_model import ModelCalibParams, predict_rows
from .calib_nn import (
    NNModel,
    TARGET_INDICES,
    TARGET_NAMES,
    TARGET_SCALE,
    feature_matrix,
    infer_batch,
)
from .errors import SchemaError
from .simulator import SCHEMA, Dataset


@dataclass(frozen=True)
class Calibration:
    """A loaded calibration artifact of either kind."""

    kind: str                          # "model" or "nn"
    params: ModelCalibParams | None
    net: NNModel | None
    payload: dict                      # full artifact contents as written

    @property
    def target_names(self) -> tuple[str, ...]:
        return TARGET_NAMES


def from_params(params: ModelCalibParams, payload: dict | None = None) -> Calibration:
    return Calibration("model", params, None, payload or params.to_dict())


def from_net(net: NNModel, payload: dict | None = None) -> Calibration:
    return Calibration("nn", None, net, payload or net.to_dict())


def load_calibration(path) -> Calibration:
    """Load a calibration JSON, dispatching on its ``kind`` tag."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise SchemaError("calibration file must hold a JSON object")
    schema = payload.get("schema")
    if schema != SCHEMA:
        raise SchemaError(f"unsupported calibration schema {schema!r}, need {SCHEMA!r}")
    kind = payload.get("kind")
    if kind == "model":
        return Calibration("model", ModelCalibParams.from_dict(payload), None, payload)
    if kind == "nn":
        return Calibration("nn", None, NNModel.from_dict(payload), payload)
    raise SchemaError(f"unknown calibration kind {kind!r}")


def save_calibration(calib: Calibration, path, extra: dict | None = None) -> None:
    """Write the artifact; ``extra`` entries are merged at the top level."""
    payload = dict(calib.payload)
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def predict_dataset(calib: Calibration, dataset: Dataset) -> np.ndarray:
    """Resolved wrench targets, shape (n, 5): f_x, f_y [N], m_x, m_y, m_z [N·mm]."""
    if calib.kind == "nn":
        return infer_batch(calib.net, feature_matrix(dataset, calib.net.feature_names))
    wrench = predict_rows(calib.params, dataset)  # (n, 6) in N / N·m
    return wrench[:, list(TARGET_INDICES)] * np.asarray(TARGET_SCALE)


def validation_sigma(calib: Calibration) -> np.ndarray | None:
    """Per-axis rms validation error stored with the artifact, if any.

    Network artifacts record it at train time; model artifacts carry it only
    when the calibrating command embedded a metrics block.
    """
    if calib.kind == "nn":
        sig = calib.net.training.get("val_sigma")
        if sig is not None:
            return np.asarray(sig, dtype=float)
    metrics = calib.payload.get("metrics")
    if isinstance(metrics, dict):
        axes = metrics.get("axes")
        if isinstance(axes, list) and len(axes) == 5:
            try:
                return np.asarray([a["sigma"] for a in axes], dtype=float)
            except (KeyError, TypeError):
                return None
    return None
