"""Trajectory/load generation, disturbance injection, and dataset plumbing."""

import dataclasses

import numpy as np
import pytest

from wrench_twin.config import DEFAULT_CONFIG, profile_settings, wrench_ranges
from wrench_twin.errors import ConfigError, PartitionError
from wrench_twin.simulator import (
    CSV_COLUMNS,
    Dataset,
    DisturbanceConfig,
    fourier_walk,
    gen_profile,
    gen_wrench,
    read_csv,
    read_meta,
    simulate,
    split,
    subsample,
    write_csv,
    write_meta,
)

QUIET = DisturbanceConfig.none()


def _settings(kind="data_driven", duration=6.0, **kw):
    s = profile_settings(DEFAULT_CONFIG, kind)
    return dataclasses.replace(s, duration=duration, **kw)


def _quick_dataset(model, duration=6.0, dist=QUIET, wrench_kind="valid",
                   dwell=0.0, seed=0):
    ps = _settings(duration=duration)
    prof = gen_profile("data_driven", seed, ps)
    ranges = dataclasses.replace(wrench_ranges(DEFAULT_CONFIG),
                                 dwell_fraction=dwell)
    w = gen_wrench(prof, model, seed + 1, kind=wrench_kind, ranges=ranges)
    return simulate(prof, w, model, dist, seed + 2)


# --- motion profiles ------------------------------------------------------


def test_profile_determinism():
    ps = _settings()
    a = gen_profile("data_driven", 42, ps)
    b = gen_profile("data_driven", 42, ps)
    np.testing.assert_array_equal(a.q, b.q)
    np.testing.assert_array_equal(a.t, b.t)
    c = gen_profile("data_driven", 43, ps)
    assert not np.array_equal(a.q, c.q)


def test_profile_respects_joint_limits():
    for kind in ("data_driven", "model_based"):
        ps = _settings()
        p = gen_profile(kind, 3, ps)
        assert p.q[:, 0].min() >= ps.q3_min - 1e-12
        assert p.q[:, 0].max() <= ps.q3_max + 1e-12
        # jaw never opens past the limit and grasp commands stay negative
        assert p.q[:, 4].max() <= ps.q7_max + 1e-12
        assert p.q[:, 4].min() >= ps.grasp_cmd - 1e-12


def test_profile_grasp_develops_jaw_torque():
    ps = _settings(duration=12.0)
    p = gen_profile("data_driven", 5, ps)
    assert p.m_g.max() > 0.0  # some cycles grasp
    # linear preload law: torque builds as the jaw closes below the open stop
    want = ps.jaw_stiffness * np.maximum(0.0, ps.q7_max - p.q[:, 4])
    np.testing.assert_array_equal(p.m_g, want)


def test_unknown_profile_kind():
    with pytest.raises(ConfigError):
        gen_profile("freestyle", 0, _settings())


def test_fourier_walk_bounded():
    rng = np.random.default_rng(0)
    t = np.linspace(0.0, 20.0, 4000)
    x = fourier_walk(rng, t, -1.5, 1.5)
    assert x.min() >= -1.5 and x.max() <= 1.5
    # deterministic under the same generator state
    y = fourier_walk(np.random.default_rng(0), t, -1.5, 1.5)
    np.testing.assert_array_equal(x, y)


# --- load generation ------------------------------------------------------


def test_valid_loads_without_dwell_never_rest(default_model):
    ps = _settings()
    prof = gen_profile("data_driven", 1, ps)
    ranges = dataclasses.replace(wrench_ranges(DEFAULT_CONFIG), dwell_fraction=0.0)
    w = gen_wrench(prof, default_model, 2, kind="valid", ranges=ranges)
    lat = np.hypot(w[:, 0], w[:, 1])
    assert lat.min() > 0.0
    assert np.abs(w).sum(axis=1).min() > 0.0


def test_dwell_fraction_inserts_rest_segments(default_model):
    ps = _settings(duration=20.0)
    prof = gen_profile("data_driven", 1, ps)
    ranges = dataclasses.replace(wrench_ranges(DEFAULT_CONFIG), dwell_fraction=0.15)
    w = gen_wrench(prof, default_model, 2, kind="valid", ranges=ranges)
    rest = np.all(w == 0.0, axis=1)
    # expected share is 15 percent; accept a generous band for one draw
    assert 0.03 < rest.mean() < 0.45
    # rest rows are exact zeros across every component
    assert np.all(w[rest] == 0.0)


def test_free_loads_are_small(default_model):
    ps = _settings()
    prof = gen_profile("data_driven", 7, ps)
    w = gen_wrench(prof, default_model, 8, kind="free")
    assert np.abs(w[:, :2]).max() <= wrench_ranges(DEFAULT_CONFIG).f_lat


# --- simulation -----------------------------------------------------------


def test_simulate_determinism(default_model):
    a = _quick_dataset(default_model, dist=DisturbanceConfig.none())
    b = _quick_dataset(default_model, dist=DisturbanceConfig.none())
    np.testing.assert_array_equal(a.signals, b.signals)
    np.testing.assert_array_equal(a.wrench, b.wrench)
    np.testing.assert_array_equal(a.validity, b.validity)


def test_noise_rms_level(default_model):
    rms = 5.6e-7
    dist = dataclasses.replace(QUIET, signal_noise_rms=rms)
    ps = _settings(duration=10.0)
    prof = gen_profile("data_driven", 11, ps)
    ds = simulate(prof, np.zeros((prof.t.size, 6)), default_model, dist, 12)
    got = np.sqrt(np.mean(ds.signals**2, axis=0))
    np.testing.assert_allclose(got, rms, rtol=0.05)


def test_friction_loads_axial_channels_only(default_model):
    dist = dataclasses.replace(QUIET, friction_coulomb=0.5, friction_viscous=2.0)
    ps = _settings(duration=6.0)
    prof = gen_profile("data_driven", 13, ps)
    w = np.zeros((prof.t.size, 6))
    quiet = simulate(prof, w, default_model, QUIET, 14)
    rough = simulate(prof, w, default_model, dist, 14)
    diff = rough.signals - quiet.signals
    np.testing.assert_allclose(diff[:, [0, 2, 4]], 0.0, atol=1e-18)
    assert np.abs(diff[:, [1, 3, 5]]).max() > 1e-6


def test_jaw_coupling_needs_grasp_torque(default_model):
    dist = dataclasses.replace(QUIET, jaw_fx=50.0, jaw_my=2.0)
    ps = _settings(duration=12.0)
    prof = gen_profile("data_driven", 15, ps)
    w = np.zeros((prof.t.size, 6))
    quiet = simulate(prof, w, default_model, QUIET, 16)
    coupled = simulate(prof, w, default_model, dist, 16)
    diff = np.abs(coupled.signals - quiet.signals).max(axis=1)
    grasping = prof.m_g > 0.0
    assert np.all(diff[~grasping] == 0.0)
    assert diff[grasping].max() > 1e-6


def test_reference_wrench_is_disturbance_free(default_model):
    # recorded ground truth must not absorb the injected disturbances
    dist = dataclasses.replace(QUIET, friction_coulomb=0.5, jaw_fx=50.0)
    ps = _settings(duration=6.0)
    prof = gen_profile("data_driven", 17, ps)
    ranges = dataclasses.replace(wrench_ranges(DEFAULT_CONFIG), dwell_fraction=0.0)
    w = gen_wrench(prof, default_model, 18, kind="valid", ranges=ranges)
    ds = simulate(prof, w, default_model, dist, 19)
    np.testing.assert_array_equal(ds.wrench, w)


def test_body_coupling_leaks_outer_wrench(default_model):
    ps = _settings(duration=6.0)
    prof = gen_profile("data_driven", 20, ps)
    w = np.zeros((prof.t.size, 6))
    body = gen_wrench(prof, default_model, 21, kind="free")
    quiet = simulate(prof, w, default_model, QUIET, 22, body_wrench=body)
    dist = dataclasses.replace(QUIET, body_coupling=0.1)
    leaky = simulate(prof, w, default_model, dist, 22, body_wrench=body)
    assert np.abs(leaky.signals - quiet.signals).max() > 1e-6


# --- dataset mechanics ----------------------------------------------------


def test_split_cycles_6_2_2(default_model):
    ds = _quick_dataset(default_model)
    tr, va, te = split(ds, scheme="cycles_6_2_2")
    assert tr.t.size + va.t.size + te.t.size == ds.t.size
    assert sorted(set(tr.cycle)) == [1, 2, 3, 4, 5, 6]
    assert sorted(set(va.cycle)) == [7, 8]
    assert sorted(set(te.cycle)) == [9, 10]


def test_split_needs_ten_cycles(default_model):
    ps = _settings(cycles=5)
    prof = gen_profile("data_driven", 0, ps)
    ds = simulate(prof, np.zeros((prof.t.size, 6)), default_model, QUIET, 2)
    with pytest.raises(PartitionError):
        split(ds, scheme="cycles_6_2_2")
    a, b, c = split(ds, scheme="fractions", fractions=(0.6, 0.2, 0.2))
    assert a.t.size + b.t.size + c.t.size == ds.t.size
    assert a.t.size == pytest.approx(0.6 * ds.t.size, abs=2)


def test_subsample_decimates_whole_steps(default_model):
    ds = _quick_dataset(default_model)
    sub = subsample(ds, 100.0)
    assert sub.t.size == ds.t.size // 15
    assert sub.meta["sample_rate_hz"] == 100.0
    # every kept row exists verbatim in the source
    np.testing.assert_array_equal(sub.signals[0], ds.signals[0])
    with pytest.raises(ConfigError):
        subsample(ds, 700.0)


def test_select_keeps_alignment(default_model):
    ds = _quick_dataset(default_model, dwell=0.15)
    mask = ds.validity == 0
    kept = ds.select(mask)
    assert kept.t.size == int(mask.sum())
    np.testing.assert_array_equal(kept.wrench, ds.wrench[mask])
    np.testing.assert_array_equal(kept.validity, ds.validity[mask])


def test_validity_codes_cover_dwell_rows(default_model):
    ds = _quick_dataset(default_model, duration=20.0, dwell=0.15)
    counts = ds.validity_counts()
    assert counts["valid"] > 0
    assert counts["no_contact"] > 0  # rest segments classify as unloaded


def test_csv_round_trip(tmp_path, default_model):
    ds = _quick_dataset(default_model)
    csv_path = tmp_path / "data.csv"
    write_csv(ds, csv_path)
    header = csv_path.read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)
    back = read_csv(csv_path)
    np.testing.assert_array_equal(back.t, ds.t)
    np.testing.assert_array_equal(back.q, ds.q)
    np.testing.assert_array_equal(back.signals, ds.signals)
    # moment columns are stored in millimeter units, so allow one rounding step
    np.testing.assert_allclose(back.wrench, ds.wrench, rtol=1e-15, atol=0.0)
    np.testing.assert_array_equal(back.cycle, ds.cycle)


def test_csv_write_is_reproducible(tmp_path, default_model):
    ds = _quick_dataset(default_model)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(ds, p1)
    write_csv(ds, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_meta_round_trip(tmp_path, default_model):
    ds = _quick_dataset(default_model)
    path = tmp_path / "meta.json"
    write_meta(ds, path, extra={"l_os_m": 0.22})
    meta = read_meta(path)
    assert meta["l_os_m"] == 0.22
    assert meta["schema"] == "wrench-twin/v1"
    assert meta["rows"] == ds.t.size
