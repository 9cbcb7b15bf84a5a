"""Acceptance gates for the full toolkit.

Each test prints one CRITERION line with the measured numbers; the summary
block at the end of the pytest run collects them. Heavy artifacts (datasets,
trained networks, the identified physics fit) are shared through module
fixtures so the suite stays inside a few minutes end to end.
"""

import dataclasses
import json
import time

import numpy as np
import pytest

from wrench_twin import calib_model as cm
from wrench_twin import calib_nn as cn
from wrench_twin import metrics as mt
from wrench_twin import scenarios as sc
from wrench_twin.calibration import from_params
from wrench_twin.cli import main as cli_main
from wrench_twin.config import (
    DEFAULT_CONFIG,
    build_model,
    disturbance_config,
    profile_settings,
    train_options,
    wrench_ranges,
)
from wrench_twin.errors import ConstantReferenceError
from wrench_twin.mechanics import (
    KinematicState,
    Wrench,
    forward,
    hc_from_compliances,
)
from wrench_twin.optics import OpticalUnitParams, normalize, photocurrents
from wrench_twin.simulator import (
    DisturbanceConfig,
    gen_profile,
    gen_wrench,
    simulate,
    split,
    subsample,
)

import oracles

SUBSAMPLE_HZ = float(DEFAULT_CONFIG["nn"]["subsample_hz"])


def _record(log, idx, passed, detail):
    line = f"CRITERION {idx:02d}: {'PASS' if passed else 'FAIL'} - {detail}"
    log.append(line)
    print(line)
    assert passed, line


# --- shared heavy artifacts -------------------------------------------------


@pytest.fixture(scope="module")
def model():
    return build_model(DEFAULT_CONFIG)


@pytest.fixture(scope="module")
def nn_splits(model):
    """Default data-driven pipeline at seeds 0/1/2, clean and disturbed."""
    ps = profile_settings(DEFAULT_CONFIG, "data_driven")
    prof = gen_profile("data_driven", 0, ps)
    w = gen_wrench(prof, model, 1, kind="valid",
                   ranges=wrench_ranges(DEFAULT_CONFIG))
    out = {}
    for label, dist in (("clean", DisturbanceConfig.none()),
                        ("disturbed", disturbance_config(DEFAULT_CONFIG))):
        ds = subsample(simulate(prof, w, model, dist, 2), SUBSAMPLE_HZ)
        out[label] = split(ds, scheme="cycles_6_2_2")
    return out


@pytest.fixture(scope="module")
def nn_fits(nn_splits):
    fits = {}
    for label in ("clean", "disturbed"):
        tr, va, _ = nn_splits[label]
        t0 = time.perf_counter()
        net, hist = cn.train(tr, va, train_options(DEFAULT_CONFIG, seed=0))
        fits[label] = (net, hist, time.perf_counter() - t0)
    return fits


@pytest.fixture(scope="module")
def physics_fit(model):
    """Noiseless in-regime identification dataset plus a 32-start fit."""
    ps = dataclasses.replace(profile_settings(DEFAULT_CONFIG, "model_based"),
                             duration=60.0)
    prof = gen_profile("model_based", 0, ps)
    ranges = dataclasses.replace(wrench_ranges(DEFAULT_CONFIG),
                                 dwell_fraction=0.0)
    w = gen_wrench(prof, model, 1, kind="valid", ranges=ranges)
    ds = subsample(simulate(prof, w, model, DisturbanceConfig.none(), 2),
                   SUBSAMPLE_HZ)
    mask, _ = cm.validity_mask(ds, model)
    ds = ds.select(mask)
    idx = np.arange(ds.t.size)
    cut = int(0.8 * ds.t.size)
    train_ds, test_ds = ds.select(idx < cut), ds.select(idx >= cut)
    t0 = time.perf_counter()
    fit = cm.identify(train_ds, model, cm.IdentifyOptions(n_starts=32, seed=0))
    elapsed = time.perf_counter() - t0
    return fit, test_ds, elapsed, ds.t.size


def _nn_axis_nrmsd(net, test_ds):
    pred = cn.infer_batch(net, cn.feature_matrix(test_ds, net.feature_names))
    ref = cn.target_matrix(test_ds)
    return np.array([m.nrmsd for m in mt.report_axes(pred, ref)]) * 100.0


# --- criteria ----------------------------------------------------------------


def test_criterion_01_optics_exact(acceptance_log):
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(10_000):
        gap = 10 ** rng.uniform(-5.0, -3.0)
        slit = gap + 2.0 * 10 ** rng.uniform(-5.0, -2.3)
        p = OpticalUnitParams(kappa=10 ** rng.uniform(-8.0, -3.0),
                              slit_width=slit, gap_width=gap)
        u = rng.uniform(-1.0, 1.0)
        if abs(u) < 1e-3:
            u = np.sign(u or 1.0) * 1e-3  # below this float cancellation bites
        delta = u * p.half_margin
        n = normalize(*photocurrents(delta, p))
        worst = max(worst, abs(n - u) / abs(u))
    elapsed = time.perf_counter() - t0
    _record(acceptance_log, 1, worst <= 1e-12 and elapsed < 1.0,
            f"normalized signal linear to {worst:.2e} rel over 1e4 draws "
            f"in {elapsed:.2f}s")


def test_criterion_02_beam_maps_match_oracles(acceptance_log):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    from wrench_twin.mechanics import ShaftProperties, build_hw

    for _ in range(50):
        s = ShaftProperties(
            young_modulus=10 ** rng.uniform(9.0, 11.7),
            shear_modulus=10 ** rng.uniform(9.0, 11.3),
            area=10 ** rng.uniform(-6.0, -3.0),
            i_xx=10 ** rng.uniform(-12.0, -8.0),
            i_yy=10 ** rng.uniform(-12.0, -8.0),
            j_zz=10 ** rng.uniform(-12.0, -8.0),
            clamp_separation=rng.uniform(0.02, 0.12),
            length=1.0,
        )
        hw = build_hw(s)
        want = oracles.hw_oracle(s.young_modulus, s.shear_modulus, s.area,
                                 s.i_xx, s.i_yy, s.j_zz, s.clamp_separation)
        scale = np.abs(want) + np.abs(want).max() * 1e-18
        worst = max(worst, float(np.max(np.abs(hw - want) / scale)))
    for _ in range(50):
        e = 10 ** rng.uniform(9.0, 11.7)
        i_xx = 10 ** rng.uniform(-12.0, -8.0)
        i_yy = 10 ** rng.uniform(-12.0, -8.0)
        l = rng.uniform(0.15, 0.6)
        l_c = rng.uniform(0.0, 0.05)
        l_s = rng.uniform(l_c + 0.02, l - 0.02)
        k_s = 10 ** rng.uniform(0.5, 6.0)
        hc = hc_from_compliances(l_s=l_s, l=l, l_c=l_c,
                                 c_x=6.0 * e * i_xx / k_s,
                                 c_y=6.0 * e * i_yy / k_s)
        want = oracles.hc_oracle(e, i_xx, i_yy, l, l_s, l_c, k_s)
        scale = np.abs(want) + np.abs(want).max() * 1e-15
        worst = max(worst, float(np.max(np.abs(hc - want) / scale)))
    elapsed = time.perf_counter() - t0
    _record(acceptance_log, 2, worst <= 1e-6 and elapsed < 10.0,
            f"segment and transport maps within {worst:.2e} of quadrature "
            f"oracles over 100 draws in {elapsed:.2f}s")


def test_criterion_03_forward_map_structure(acceptance_log, model):
    st = KinematicState(q3=0.1, l_os=model.kinematics.l_os,
                        l_c=model.kinematics.l_c)
    n = forward(Wrench(f=np.zeros(3), m=np.array([0.0, 0.0, 0.05])),
                model, st, force=True)
    torsion_ok = (n[0] == n[2] == n[4] and n[0] != 0.0
                  and np.all(np.abs(n[[1, 3, 5]]) < 1e-18))

    rng = np.random.default_rng(2)
    rows_ok = True
    for _ in range(20):
        l = rng.uniform(0.2, 0.5)
        l_c = rng.uniform(0.0, 0.05)
        l_s = rng.uniform(l_c + 0.02, l - 0.02)
        hc = hc_from_compliances(l_s=l_s, l=l, l_c=l_c,
                                 c_x=10 ** rng.uniform(-4, 0),
                                 c_y=10 ** rng.uniform(-4, 0))
        rows_ok &= bool(np.array_equal(hc[2], np.eye(6)[2])
                        and np.array_equal(hc[5], np.eye(6)[5]))

    sup_worst = 0.0
    for _ in range(20):
        w1 = rng.uniform(-1, 1, 6) * np.array([2, 2, 1, 0.05, 0.05, 0.03])
        w2 = rng.uniform(-1, 1, 6) * np.array([2, 2, 1, 0.05, 0.05, 0.03])
        n1 = forward(Wrench(f=w1[:3], m=w1[3:]), model, st, force=True)
        n2 = forward(Wrench(f=w2[:3], m=w2[3:]), model, st, force=True)
        n12 = forward(Wrench(f=w1[:3] + w2[:3], m=w1[3:] + w2[3:]),
                      model, st, force=True)
        sup_worst = max(sup_worst,
                        float(np.max(np.abs(n12 - (n1 + n2)))
                              / max(np.abs(n12).max(), 1e-9)))
    _record(acceptance_log, 3,
            torsion_ok and rows_ok and sup_worst <= 1e-12,
            f"torsion loads axial channels evenly, transport keeps z rows "
            f"unit, superposition holds to {sup_worst:.2e}")


def test_criterion_04_physics_round_trip(acceptance_log, model, physics_fit):
    fit, test_ds, elapsed, n_rows = physics_fit
    pred = cm.predict_rows(fit.params, test_ds)[:, list(cn.TARGET_INDICES)]
    pred = pred * np.array(cn.TARGET_SCALE)
    ref = cn.target_matrix(test_ds)
    nrmsd_pct = np.array([m.nrmsd for m in mt.report_axes(pred, ref)]) * 100.0
    ok = (n_rows >= 5000 and fit.n_starts >= 32
          and np.all(nrmsd_pct < 0.1) and elapsed < 300.0)
    _record(acceptance_log, 4, ok,
            f"{n_rows} rows, {fit.n_starts} starts, held-out NRMSD "
            f"{nrmsd_pct.max():.2e}% worst axis, fit in {elapsed:.1f}s")


def test_criterion_05_gradient_check(acceptance_log):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(20):
        x = rng.normal(size=(64, 15))
        y = rng.normal(size=(64, 5))
        net = cn.NNModel(
            feature_names=cn.FEATURE_NAMES,
            scaler_mean=np.zeros(15), scaler_std=np.ones(15),
            w1=rng.normal(size=(5, 15)) * 0.5, b1=rng.normal(size=5) * 0.1,
            w2=rng.normal(size=(5, 5)) * 0.5, b2=rng.normal(size=5) * 0.1,
            activation="tanh", training={},
        )
        worst = max(worst, cn.finite_diff_check(net, x, y, eps=1e-5))
    _record(acceptance_log, 5, worst <= 1e-5,
            f"analytic gradients within {worst:.2e} of central differences "
            f"over 20 random networks")


def test_criterion_06_network_round_trip(acceptance_log, nn_splits, nn_fits):
    net_c, _, t_clean = nn_fits["clean"]
    net_d, _, t_dist = nn_fits["disturbed"]
    clean_pct = _nn_axis_nrmsd(net_c, nn_splits["clean"][2])
    dist_pct = _nn_axis_nrmsd(net_d, nn_splits["disturbed"][2])
    # axis order fx, fy, mx, my, mz
    ok = (np.all(clean_pct <= 2.0)
          and dist_pct[0] <= 5.0 and dist_pct[1] <= 5.0 and dist_pct[4] <= 3.0
          and t_clean < 120.0 and t_dist < 120.0)
    _record(acceptance_log, 6, ok,
            f"clean NRMSD {clean_pct.max():.2f}% worst axis, disturbed "
            f"fx {dist_pct[0]:.2f}% fy {dist_pct[1]:.2f}% mz {dist_pct[4]:.2f}%, "
            f"trained in {t_clean:.0f}s/{t_dist:.0f}s")


def test_criterion_07_jaw_torque_ablation(acceptance_log, nn_splits, nn_fits):
    tr, va, te = nn_splits["disturbed"]
    net_full, _, _ = nn_fits["disturbed"]
    lean_names = tuple(n for n in cn.FEATURE_NAMES if n != "mg_Nmm")
    opts = dataclasses.replace(train_options(DEFAULT_CONFIG, seed=0),
                               features=lean_names)
    net_lean, _ = cn.train(tr, va, opts)
    ref = cn.target_matrix(te)
    pred_full = cn.infer_batch(net_full, cn.feature_matrix(te, net_full.feature_names))
    pred_lean = cn.infer_batch(net_lean, cn.feature_matrix(te, lean_names))
    # grasp torque couples into the axial force / lateral moment pair
    ratios = []
    for k in (0, 3):  # fx, my
        full = mt.rms_error(pred_full[:, k], ref[:, k])
        lean = mt.rms_error(pred_lean[:, k], ref[:, k])
        ratios.append(lean / full)
    ok = all(r >= 5.0 for r in ratios)
    _record(acceptance_log, 7, ok,
            f"dropping the jaw-torque input inflates rms error by "
            f"{ratios[0]:.1f}x on fx and {ratios[1]:.1f}x on my")


def test_criterion_08_overcoat_leakage(acceptance_log, model, physics_fit):
    fit, _, _, _ = physics_fit
    settings = dataclasses.replace(
        profile_settings(DEFAULT_CONFIG, "data_driven"),
        duration=20.0, cycles=2,
    )
    rep = sc.overcoat_scenario(model, from_params(fit.params),
                               settings=settings, seed=0)
    worst_ratio = max(ax["ratio_to_floor"] for ax in rep.axes.values())
    lin_dev = rep.details["linearity_deviation"]
    ok = rep.passed and worst_ratio <= 3.0 and lin_dev <= 0.2
    _record(acceptance_log, 8, ok,
            f"decoupled run at {worst_ratio:.2f}x the noise floor, leak "
            f"amplitude linear in coupling to {lin_dev:.1e}")


def test_criterion_09_metrics_contract(acceptance_log):
    frozen = mt.nrmsd([1.0, 9.0], [0.0, 10.0])
    frozen_ok = frozen == pytest.approx(0.10, rel=1e-15)

    rng = np.random.default_rng(4)
    ref = rng.uniform(-3.0, 3.0, 64)
    iff_ok = (mt.r_squared(ref, ref) == 1.0
              and mt.r_squared(ref + 0.01, ref) < 1.0)

    pred = ref + rng.normal(0.0, 0.2, ref.size)
    base = mt.nrmsd(pred, ref)
    homog_ok = (mt.nrmsd(8.0 * pred, 8.0 * ref) == base
                and mt.nrmsd(0.125 * pred, 0.125 * ref) == base
                and mt.nrmsd(3.7 * pred, 3.7 * ref)
                == pytest.approx(base, rel=1e-12))
    try:
        mt.nrmsd(pred, np.full_like(ref, 2.0))
        guard_ok = False
    except ConstantReferenceError:
        guard_ok = True
    _record(acceptance_log, 9,
            frozen_ok and iff_ok and homog_ok and guard_ok,
            f"span normalization frozen at {frozen:.2f}, unity R2 iff exact, "
            f"scale invariant, constant reference rejected")


def test_criterion_10_reproducibility(acceptance_log, tmp_path_factory):
    cfg_dir = tmp_path_factory.mktemp("repro_cfg")
    cfg = cfg_dir / "fast.json"
    cfg.write_text(json.dumps({
        "nn": {"max_epochs": 150, "min_epochs": 30, "patience": 40},
        "simulator": {"data_driven": {"duration_s": 12.0}},
    }))

    def one_run(root):
        dd = root / "dd"
        mb = root / "mb"
        assert cli_main(["simulate", "--kind", "data-driven", "--seed", "0",
                         "--config", str(cfg), "-o", str(dd)]) == 0
        assert cli_main(["simulate", "--kind", "model-based", "--seed", "0",
                         "--duration", "6", "--no-disturbances",
                         "-o", str(mb)]) == 0
        assert cli_main(["calibrate", "--mode", "model", "--data", str(mb),
                         "--starts", "4", "--subsample", "100", "--seed", "0",
                         "-o", str(root / "model.json")]) == 0
        assert cli_main(["calibrate", "--mode", "nn", "--data", str(dd),
                         "--config", str(cfg), "--seed", "0",
                         "-o", str(root / "nn.json")]) == 0
        assert cli_main(["evaluate", "--calib", str(root / "nn.json"),
                         "--data", str(dd), "--subsample", "100",
                         "-o", str(root / "rep")]) == 0
        return [dd / "data.csv", dd / "meta.json", mb / "data.csv",
                root / "model.json", root / "nn.json", root / "rep" / "report.json"]

    files_a = one_run(tmp_path_factory.mktemp("repro_a"))
    files_b = one_run(tmp_path_factory.mktemp("repro_b"))
    mismatched = [a.name for a, b in zip(files_a, files_b)
                  if a.read_bytes() != b.read_bytes()]
    _record(acceptance_log, 10, not mismatched,
            "datasets, calibrations, and reports byte-identical across "
            "repeat runs" if not mismatched
            else f"artifacts differ: {mismatched}")
