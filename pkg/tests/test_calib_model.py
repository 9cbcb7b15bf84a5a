"""Physics-structured calibration: separable fit of the boundary parameters.

The identification inner loop solves for the dense signal matrix in closed
form, so a noiseless round trip on synthetic data must recover the generating
parameters essentially exactly.
"""

import dataclasses
import json

import numpy as np
import pytest

from wrench_twin import calib_model as cm
from wrench_twin.config import DEFAULT_CONFIG, build_model, profile_settings, wrench_ranges
from wrench_twin.errors import ConditioningError, EmptyResidualError
from wrench_twin.simulator import DisturbanceConfig, gen_profile, gen_wrench, simulate, subsample


@pytest.fixture(scope="module")
def model():
    return build_model(DEFAULT_CONFIG)


@pytest.fixture(scope="module")
def clean_data(model):
    ps = dataclasses.replace(profile_settings(DEFAULT_CONFIG, "model_based"),
                             duration=10.0)
    prof = gen_profile("model_based", 0, ps)
    ranges = dataclasses.replace(wrench_ranges(DEFAULT_CONFIG), dwell_fraction=0.0)
    w = gen_wrench(prof, model, 1, kind="valid", ranges=ranges)
    ds = simulate(prof, w, model, DisturbanceConfig.none(), 2)
    return subsample(ds, 100.0)


@pytest.fixture(scope="module")
def fit(model, clean_data):
    opts = cm.IdentifyOptions(n_starts=8, seed=0)
    return cm.identify(clean_data, model, opts)


def test_noiseless_round_trip_recovers_geometry(model, fit):
    c_x, c_y = cm.nominal_compliances(model)
    p = fit.params
    # the residual valley is flat along the boundary parameters on short
    # records, so geometry comes back to parts in a thousand while the
    # signal fit itself is at solver precision
    assert p.c_x == pytest.approx(c_x, rel=5e-3)
    assert p.c_y == pytest.approx(c_y, rel=5e-3)
    assert p.length == pytest.approx(model.shaft.length, rel=5e-3)
    assert p.l_os == pytest.approx(model.kinematics.l_os, rel=5e-3)
    assert fit.residual_rms < 1e-7


def test_predictions_reproduce_reference(clean_data, fit):
    pred = cm.predict_rows(fit.params, clean_data)
    span = clean_data.wrench.max(axis=0) - clean_data.wrench.min(axis=0)
    err = np.sqrt(np.mean((pred - clean_data.wrench) ** 2, axis=0))
    assert np.all(err / span < 1e-6)


def test_varpro_and_joint_agree(model, clean_data, fit):
    joint = cm.identify(clean_data, model,
                        cm.IdentifyOptions(n_starts=4, seed=0, method="joint"))
    # both formulations land in the same flat valley
    assert joint.params.c_x == pytest.approx(fit.params.c_x, rel=5e-3)
    assert joint.params.l_os == pytest.approx(fit.params.l_os, rel=5e-3)
    pred_v = cm.predict_rows(fit.params, clean_data)
    pred_j = cm.predict_rows(joint.params, clean_data)
    span = clean_data.wrench.max(axis=0) - clean_data.wrench.min(axis=0)
    np.testing.assert_allclose(
        np.sqrt(np.mean((pred_v - pred_j) ** 2, axis=0)) / span, 0.0, atol=1e-5)


def test_more_starts_never_hurt(model, clean_data):
    lean = cm.identify(clean_data, model, cm.IdentifyOptions(n_starts=2, seed=3))
    rich = cm.identify(clean_data, model, cm.IdentifyOptions(n_starts=8, seed=3))
    assert rich.best_cost <= lean.best_cost * (1.0 + 1e-12)


def test_report_records_start_diagnostics(fit):
    assert fit.n_starts == 8
    assert len(fit.starts) == 8
    assert any(s.converged for s in fit.starts)
    assert fit.method == "varpro"
    assert fit.n_rows_used > 0


def test_report_json_round_trip(tmp_path, fit):
    path = tmp_path / "fit.json"
    cm.save_report(fit, path)
    raw = json.loads(path.read_text())
    assert raw["schema"] == "wrench-twin/v1"
    assert raw["kind"] == "model"
    assert raw["fit"]["n_starts"] == fit.n_starts
    back = cm.ModelCalibParams.from_dict(raw)
    np.testing.assert_array_equal(back.c_m, fit.params.c_m)
    assert back.c_x == fit.params.c_x
    assert back.l_os == fit.params.l_os


def test_params_dict_round_trip(fit):
    d = fit.params.to_dict()
    back = cm.ModelCalibParams.from_dict(d)
    assert back.length == fit.params.length
    np.testing.assert_array_equal(back.c_m, fit.params.c_m)


def test_resolve_matrix_varies_with_insertion(fit):
    a1 = fit.params.resolve_matrix(0.08)
    a2 = fit.params.resolve_matrix(0.14)
    assert not np.allclose(a1, a2)


def test_predict_conditioning_guard(fit, clean_data):
    with pytest.raises(ConditioningError):
        cm.predict(fit.params, clean_data.signals[0], float(clean_data.q[0, 0]),
                   cond_cap=1.0 + 1e-9)


def test_empty_dataset_rejected(model, clean_data):
    empty = clean_data.select(np.zeros(clean_data.t.size, dtype=bool))
    with pytest.raises(EmptyResidualError):
        cm.identify(empty, model, cm.IdentifyOptions(n_starts=1, seed=0))


def test_validity_mask_counts(model, clean_data):
    mask, excluded = cm.validity_mask(clean_data, model)
    assert mask.sum() + excluded == clean_data.t.size
    assert mask.sum() > 0
