"""Trajectory-level measurement simulator and dataset handling.

Generates joint-space motion profiles and tip wrench trajectories, pushes
them through the tip-to-signal map at the per-row insertion depth, injects
actuation disturbances (insertion friction as an axial reaction, grip-effort
phantom loads, optional outer-tube leakage) plus sensor noise, and packages
everything as a flat dataset with a fixed CSV schema.

Signals are evaluated with the single-contact transport for every row; the
contact classification is recorded per row so downstream consumers can filter
or count regime violations. External units in files are N and N*mm; in memory
everything is SI (N, N*m).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import SCHEMA, __version__
from .errors import ConfigError, PartitionError, SchemaError
from .mechanics import (
    SensorModel,
    Validity,
    clamp_signal_map,
    classify_rows,
    hc_apply,
)

CSV_COLUMNS = (
    "t", "q3", "q4", "q5", "q6", "q7", "mg",
    "n1", "n2", "n3", "n4", "n5", "n6",
    "fx", "fy", "fz", "mx", "my", "mz", "cycle",
)

_VALIDITY_CODES = {Validity.VALID: 0, Validity.NO_CONTACT: 1, Validity.DOUBLE_CONTACT: 2}
_VALIDITY_NAMES = {0: "valid", 1: "no_contact", 2: "double_contact"}


@dataclass(frozen=True)
class ProfileSettings:
    """Knobs of the synthetic motion generators."""

    sample_rate: float = 1500.0  # Hz
    duration: float = 120.0      # s
    cycles: int = 10
    q3_min: float = 0.07         # m
    q3_max: float = 0.15         # m
    cube: float = 0.040          # m, insertion wiggle window while sweeping
    q7_max: float = math.radians(9.0)
    grasp_cmd: float = math.radians(-10.0)
    grasp_probability: float = 0.25
    jaw_stiffness: float = 0.12  # N*m per rad of commanded closure


@dataclass(frozen=True)
class WrenchRanges:
    """Per-axis excitation ranges (SI units)."""

    f_lat: float = 9.0       # N
    f_ax: float = 2.0        # N
    m_lat: float = 0.160     # N*m
    m_tor: float = 0.100     # N*m
    valid_f_lo: float = 1.5  # N, lateral magnitude band for the valid regime
    valid_f_hi: float = 4.0
    valid_m_frac: float = 1.0
    dwell_fraction: float = 0.15  # expected share of free-motion (no load) time


@dataclass(frozen=True)
class DisturbanceConfig:
    """Actuation disturbances injected on top of the clean signals."""

    signal_noise_rms: float = 5.6e-7  # per-unit contrast noise
    friction_coulomb: float = 0.5     # N, insertion-axis Coulomb level
    friction_viscous: float = 2.0     # N*s/m
    jaw_fx: float = 50.0              # phantom tip f_x per grip effort (N per N*m)
    jaw_my: float = 2.0               # phantom tip m_y per grip effort (N*m per N*m)
    body_coupling: float = 0.0        # outer-tube wrench leakage fraction

    @classmethod
    def none(cls) -> "DisturbanceConfig":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    def as_dict(self) -> dict:
        return {
            "signal_noise_rms": self.signal_noise_rms,
            "friction_coulomb_N": self.friction_coulomb,
            "friction_viscous_Ns_per_m": self.friction_viscous,
            "jaw_fx_N_per_Nm": self.jaw_fx,
            "jaw_my_Nm_per_Nm": self.jaw_my,
            "body_coupling": self.body_coupling,
        }


@dataclass
class MotionProfile:
    """Time-aligned joint values, grip effort, and cycle indices."""

    t: np.ndarray       # (n,) s
    q: np.ndarray       # (n, 5) q3 (m), q4..q7 (rad)
    m_g: np.ndarray     # (n,) N*m
    cycle: np.ndarray   # (n,) int, 1-based contiguous
    sample_rate: float  # Hz

    def __len__(self) -> int:
        return self.t.shape[0]


def fourier_walk(rng, t: np.ndarray, lo: float, hi: float, n_harmonics: int = 6,
                 period: float | None = None) -> np.ndarray:
    """Smooth random trajectory bounded by [lo, hi].

    Sum of random-phase harmonics of a base period, rescaled so the worst-case
    sum of amplitudes maps exactly onto the requested band.
    """
    if hi < lo:
        raise ConfigError("walk bounds inverted")
    if t.size == 0:
        return np.zeros(0)
    base = period if period is not None else max(t[-1] - t[0], 1.0 / 8.0)
    amp = rng.uniform(0.5, 1.0, n_harmonics)
    phase = rng.uniform(0.0, 2.0 * np.pi, n_harmonics)
    freq = (np.arange(1, n_harmonics + 1) + rng.uniform(-0.3, 0.3, n_harmonics)) / base
    x = np.zeros_like(t)
    for a, f, p in zip(amp, freq, phase):
        x = x + a * np.sin(2.0 * np.pi * f * t + p)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return mid + half * x / np.sum(amp)


def _segment_hold(rng, t, switch_lo, switch_hi, draw):
    """Piecewise-constant signal with random hold durations and values."""
    out = np.empty_like(t)
    i = 0
    n = t.size
    while i < n:
        dur = rng.uniform(switch_lo, switch_hi)
        j = min(n, i + max(1, int(round(dur * (n / max(t[-1] - t[0], 1e-9))))))
        out[i:j] = draw(rng)
        i = j
    return out


def _cycle_index(n: int, cycles: int) -> np.ndarray:
    return 1 + (np.arange(n) * cycles) // max(n, 1)


def _dwell_envelope(rng, tc: np.ndarray, fraction: float, taper_s: float = 0.2):
    """Contact/free-motion gate: 1 during contact episodes, 0 in dwells.

    Random 1-3 s segments drop out with probability ``fraction``; edges are
    raised-cosine smoothed so the gated wrench stays physically continuous.
    """
    n = tc.size
    env = np.ones(n)
    if fraction <= 0.0 or n < 2:
        return env
    rate = (n - 1) / max(tc[-1] - tc[0], 1e-9)
    i = 0
    while i < n:
        seg = max(1, int(round(rng.uniform(1.0, 3.0) * rate)))
        if rng.uniform() < fraction:
            env[i:i + seg] = 0.0
        i += seg
    width = max(1, int(round(taper_s * rate)))
    kernel = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(1, width + 1) / (width + 1)))
    kernel = kernel / kernel.sum()
    padded = np.concatenate([np.full(width, env[0]), env, np.full(width, env[-1])])
    return np.convolve(padded, kernel, mode="same")[width:-width]


def gen_profile(kind: str, seed, settings: ProfileSettings = ProfileSettings()) -> MotionProfile:
    """Synthesize a motion profile.

    ``model_based``: slow insertion sweeps over the full stroke plus a shaft
    roll walk; wrist and gripper stay parked (two cycles by default suits a
    calibrate-then-test session). ``data_driven``: per cycle, the insertion
    wiggles inside a window that travels along the stroke, the wrist moves,
    and the gripper angle holds random commands with occasional full-grasp
    excursions that load the jaw.
    """
    s = settings
    rng = np.random.default_rng(seed)
    n = int(round(s.duration * s.sample_rate))
    t = np.arange(n) / s.sample_rate
    q = np.zeros((n, 5))
    m_g = np.zeros(n)
    cycle = _cycle_index(n, max(1, s.cycles))
    if kind not in ("model_based", "data_driven"):
        raise ConfigError(f"unknown profile kind {kind!r}")

    # every cycle is an independent draw of the same random excitation, so
    # cycle-based splits compare like with like
    half = 0.5 * min(s.cube, s.q3_max - s.q3_min)
    for c in range(max(1, s.cycles)):
        rows = cycle == c + 1
        tc = t[rows]
        if tc.size == 0:
            continue
        tl = tc - tc[0]
        period = max(tc[-1] - tc[0], 0.5)
        if kind == "model_based":
            q[rows, 0] = fourier_walk(rng, tl, s.q3_min, s.q3_max,
                                      n_harmonics=4, period=period)
            q[rows, 1] = fourier_walk(rng, tl, -1.5, 1.5, period=period)
        else:
            sweep = np.linspace(s.q3_min + half, s.q3_max - half, tc.size)
            if c % 2 == 1:
                sweep = sweep[::-1]
            q[rows, 0] = sweep + fourier_walk(rng, tl, -half, half, period=period)
            q[rows, 1] = fourier_walk(rng, tl, -1.5, 1.5, period=period)
            q[rows, 2] = fourier_walk(rng, tl, -1.2, 1.2, period=period)
            q[rows, 3] = fourier_walk(rng, tl, -1.2, 1.2, period=period)

            def draw_q7(r):
                if r.uniform() < s.grasp_probability:
                    return s.grasp_cmd
                return r.uniform(0.0, s.q7_max)

            q[rows, 4] = _segment_hold(rng, tc, 0.5, 2.0, draw_q7)
    if kind == "data_driven":
        m_g = s.jaw_stiffness * np.maximum(0.0, s.q7_max - q[:, 4])

    return MotionProfile(t=t, q=q, m_g=m_g, cycle=cycle, sample_rate=s.sample_rate)


def gen_wrench(
    profile: MotionProfile,
    model: SensorModel,
    seed,
    kind: str = "free",
    ranges: WrenchRanges = WrenchRanges(),
) -> np.ndarray:
    """Tip wrench trajectory aligned with a motion profile, shape (n, 6).

    ``free`` draws every axis as an independent bounded walk over its full
    range. ``valid`` mimics a contact-rich collection session: during contact
    episodes the lateral force keeps a magnitude inside a band that engages
    the tube-tip support without pressing the shaft onto the outer wall, with
    a slowly rotating direction and moderate moments; between episodes the
    tool dwells load-free in air for a configurable fraction of the time.
    Rows can still fall outside the single-contact regime near the band edges
    or in dwells; callers filter on the recorded classification if they need
    the supported regime only.
    """
    rng = np.random.default_rng(seed)
    w = np.zeros((len(profile), 6))
    r = ranges
    if kind not in ("free", "valid"):
        raise ConfigError(f"unknown wrench kind {kind!r}")
    # independent draw per cycle (see gen_profile)
    for c in np.unique(profile.cycle):
        rows = profile.cycle == c
        tc = profile.t[rows]
        if tc.size == 0:
            continue
        tl = tc - tc[0]
        period = max(tc[-1] - tc[0], 0.5)
        if kind == "free":
            w[rows, 0] = fourier_walk(rng, tl, -r.f_lat, r.f_lat, period=period)
            w[rows, 1] = fourier_walk(rng, tl, -r.f_lat, r.f_lat, period=period)
            w[rows, 2] = fourier_walk(rng, tl, -r.f_ax, r.f_ax, period=period)
            w[rows, 3] = fourier_walk(rng, tl, -r.m_lat, r.m_lat, period=period)
            w[rows, 4] = fourier_walk(rng, tl, -r.m_lat, r.m_lat, period=period)
            w[rows, 5] = fourier_walk(rng, tl, -r.m_tor, r.m_tor, period=period)
        else:
            mag = fourier_walk(rng, tl, r.valid_f_lo, r.valid_f_hi, period=period)
            ang = fourier_walk(rng, tl, 0.0, 2.0 * np.pi, period=period)
            w[rows, 0] = mag * np.cos(ang)
            w[rows, 1] = mag * np.sin(ang)
            w[rows, 2] = fourier_walk(rng, tl, -r.f_ax, r.f_ax, period=period)
            m_half = r.valid_m_frac * r.m_lat
            w[rows, 3] = fourier_walk(rng, tl, -m_half, m_half, period=period)
            w[rows, 4] = fourier_walk(rng, tl, -m_half, m_half, period=period)
            w[rows, 5] = fourier_walk(rng, tl, -r.m_tor, r.m_tor, period=period)
            # periods where the tool moves in air: every component vanishes,
            # giving the calibration coverage of the unloaded state
            w[rows] *= _dwell_envelope(rng, tc, r.dwell_fraction)[:, None]
    return w


@dataclass
class Dataset:
    """Flat sample table tying signals to kinematics and the reference wrench."""

    t: np.ndarray        # (n,) s
    q: np.ndarray        # (n, 5) q3..q7
    m_g: np.ndarray      # (n,) N*m
    signals: np.ndarray  # (n, 6) normalized contrasts
    wrench: np.ndarray   # (n, 6) true tip wrench, N / N*m
    cycle: np.ndarray    # (n,) int
    validity: np.ndarray | None = None  # (n,) codes: 0 valid, 1 no contact, 2 double
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def n_cycles(self) -> int:
        return 0 if len(self) == 0 else int(self.cycle.max())

    def select(self, mask: np.ndarray) -> "Dataset":
        """Row subset as a new dataset (metadata carried over)."""
        return Dataset(
            t=self.t[mask],
            q=self.q[mask],
            m_g=self.m_g[mask],
            signals=self.signals[mask],
            wrench=self.wrench[mask],
            cycle=self.cycle[mask],
            validity=None if self.validity is None else self.validity[mask],
            meta=dict(self.meta),
        )

    def row_mapping(self, i: int) -> dict:
        """One row as a flat mapping in internal units (for featurization)."""
        out = {"t": float(self.t[i]), "mg": float(self.m_g[i]), "cycle": int(self.cycle[i])}
        for k, name in enumerate(("q3", "q4", "q5", "q6", "q7")):
            out[name] = float(self.q[i, k])
        for k in range(6):
            out[f"n{k + 1}"] = float(self.signals[i, k])
        for k, name in enumerate(("fx", "fy", "fz", "mx", "my", "mz")):
            out[name] = float(self.wrench[i, k])
        return out

    def validity_counts(self) -> dict:
        counts = {"valid": len(self), "no_contact": 0, "double_contact": 0}
        if self.validity is not None:
            counts = {
                name: int(np.sum(self.validity == code))
                for code, name in _VALIDITY_NAMES.items()
            }
        return counts


def simulate(
    profile: MotionProfile,
    wrench: np.ndarray,
    model: SensorModel,
    disturbances: DisturbanceConfig = DisturbanceConfig(),
    seed=0,
    body_wrench: np.ndarray | None = None,
    n_points: int = 50,
) -> Dataset:
    """Run the measurement model over a trajectory.

    Per row: transport the tip wrench to the sensing point at the row's
    insertion depth, map to the six contrasts, then add the disturbance
    terms. Insertion friction opposes the insertion velocity and enters as an
    axial reaction at the sensing point, so it contaminates only the
    axial-sensitive units. Grip effort leaks as a phantom tip (f_x, m_y)
    pair. ``body_wrench`` rows, scaled by the leakage coupling, model loads
    on the outer tube reaching the shaft. Gaussian noise is added per unit.

    The contact regime of each row is classified and stored; signals are
    always the single-contact model values (the dataset records the regime
    instead of switching models). Saturated rows (any |n| > 1) are counted in
    the metadata and left unclipped.
    """
    w = np.asarray(wrench, dtype=float)
    if w.shape != (len(profile), 6):
        raise ConfigError(
            f"wrench trajectory shape {w.shape} does not match profile length {len(profile)}"
        )
    rng = np.random.default_rng(seed)
    shaft = model.shaft
    k_s = model.k_s
    c_x = 6.0 * shaft.young_modulus * shaft.i_xx / k_s if k_s > 0 else np.inf
    c_y = 6.0 * shaft.young_modulus * shaft.i_yy / k_s if k_s > 0 else np.inf
    l_s = model.kinematics.l_os - profile.q[:, 0]
    l, l_c = shaft.length, model.kinematics.l_c
    if len(profile) and not (l_c < l_s.min() and l_s.max() < l):
        raise ConfigError(
            "profile leaves the support span: "
            f"l_s in [{l_s.min():.4f}, {l_s.max():.4f}] vs ({l_c:.4f}, {l:.4f})"
        )

    b_map = clamp_signal_map(model)
    u = hc_apply(l_s, l, l_c, c_x, c_y, w)
    n_obs = u @ b_map.T

    d = disturbances
    if d.friction_coulomb > 0.0 or d.friction_viscous > 0.0:
        v3 = np.gradient(profile.q[:, 0], profile.t) if len(profile) > 1 else np.zeros(len(profile))
        f_fric = -(d.friction_coulomb * np.sign(v3) + d.friction_viscous * v3)
        n_obs = n_obs + np.outer(f_fric, b_map[:, 2])
    if d.jaw_fx != 0.0 or d.jaw_my != 0.0:
        w_jaw = np.zeros_like(w)
        w_jaw[:, 0] = d.jaw_fx * profile.m_g
        w_jaw[:, 4] = d.jaw_my * profile.m_g
        n_obs = n_obs + hc_apply(l_s, l, l_c, c_x, c_y, w_jaw) @ b_map.T
    if d.body_coupling != 0.0 and body_wrench is not None:
        wb = np.asarray(body_wrench, dtype=float)
        if wb.shape != w.shape:
            raise ConfigError("body wrench trajectory shape mismatch")
        n_obs = n_obs + d.body_coupling * (hc_apply(l_s, l, l_c, c_x, c_y, wb) @ b_map.T)
    if d.signal_noise_rms > 0.0:
        n_obs = n_obs + rng.normal(0.0, d.signal_noise_rms, n_obs.shape)

    if len(profile):
        status = classify_rows(w, l_s, model, n_points=n_points)
        validity = np.array([_VALIDITY_CODES[s] for s in status.reshape(-1)], dtype=np.int8)
        saturated = int(np.sum(np.any(np.abs(n_obs) > 1.0, axis=1)))
    else:
        validity = np.zeros(0, dtype=np.int8)
        saturated = 0

    ds = Dataset(
        t=profile.t.copy(),
        q=profile.q.copy(),
        m_g=profile.m_g.copy(),
        signals=n_obs,
        wrench=w.copy(),
        cycle=profile.cycle.copy(),
        validity=validity,
        meta={
            "schema": SCHEMA,
            "tool_version": __version__,
            "sample_rate_hz": profile.sample_rate,
            "rows": len(profile),
            "cycles": int(profile.cycle.max()) if len(profile) else 0,
            "disturbances": d.as_dict(),
            "saturated_rows": saturated,
        },
    )
    ds.meta["validity"] = ds.validity_counts()
    return ds


def split(dataset: Dataset, scheme: str = "cycles_6_2_2",
          fractions: tuple[float, float, float] | None = None):
    """Partition into (train, val, test) without shuffling.

    ``cycles_6_2_2`` assigns whole cycles 1-6 / 7-8 / 9-10 and requires
    exactly ten cycles. ``fractions`` cuts contiguous row blocks by count;
    the three fractions must sum to one.
    """
    if scheme == "cycles_6_2_2":
        if dataset.n_cycles != 10:
            raise PartitionError(
                f"cycles_6_2_2 needs exactly 10 cycles, dataset has {dataset.n_cycles}"
            )
        c = dataset.cycle
        return (
            dataset.select(c <= 6),
            dataset.select((c == 7) | (c == 8)),
            dataset.select(c >= 9),
        )
    if scheme == "fractions":
        if fractions is None:
            raise PartitionError("fractions scheme needs a fractions tuple")
        fr = tuple(float(x) for x in fractions)
        if len(fr) != 3 or any(x < 0.0 for x in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise PartitionError(f"fractions must be three non-negatives summing to 1, got {fr}")
        n = len(dataset)
        i1 = int(round(fr[0] * n))
        i2 = i1 + int(round(fr[1] * n))
        idx = np.arange(n)
        return (
            dataset.select(idx < i1),
            dataset.select((idx >= i1) & (idx < i2)),
            dataset.select(idx >= i2),
        )
    raise PartitionError(f"unknown split scheme {scheme!r}")


def subsample(dataset: Dataset, target_rate: float) -> Dataset:
    """Uniform decimation to ``target_rate``, keeping each cycle's first row.

    The source/target ratio must be a whole number; the source rate comes
    from the dataset metadata.
    """
    if not (target_rate > 0.0):
        raise ConfigError("target rate must be positive")
    source = float(dataset.meta.get("sample_rate_hz", 0.0))
    if source <= 0.0:
        raise SchemaError("dataset metadata lacks a sample rate")
    if target_rate > source:
        raise ConfigError(
            f"target rate {target_rate} Hz above source rate {source} Hz"
        )
    step_f = source / target_rate
    step = int(round(step_f))
    if abs(step_f - step) > 1e-9:
        raise ConfigError(
            f"source/target ratio {step_f:.4f} is not a whole decimation step"
        )
    if step == 1:
        out = dataset.select(np.ones(len(dataset), dtype=bool))
        out.meta["sample_rate_hz"] = target_rate
        out.meta["rows"] = len(out)
        return out
    keep = np.zeros(len(dataset), dtype=bool)
    for c in np.unique(dataset.cycle):
        rows = np.flatnonzero(dataset.cycle == c)
        keep[rows[::step]] = True
    out = dataset.select(keep)
    out.meta["sample_rate_hz"] = target_rate
    out.meta["rows"] = len(out)
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(dataset: Dataset, path) -> None:
    """Write the pinned CSV schema; moments and grip effort go out in N*mm."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for i in range(len(dataset)):
            w = dataset.wrench[i]
            row = [
                _fmt(dataset.t[i]),
                *(_fmt(v) for v in dataset.q[i]),
                _fmt(dataset.m_g[i] * 1e3),
                *(_fmt(v) for v in dataset.signals[i]),
                _fmt(w[0]), _fmt(w[1]), _fmt(w[2]),
                _fmt(w[3] * 1e3), _fmt(w[4] * 1e3), _fmt(w[5] * 1e3),
                str(int(dataset.cycle[i])),
            ]
            writer.writerow(row)


def read_csv(path) -> Dataset:
    """Read a dataset CSV, converting external N*mm columns back to SI."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty CSV file") from None
        if tuple(header) != CSV_COLUMNS:
            missing = tuple(c for c in CSV_COLUMNS if c not in header)
            extra = tuple(c for c in header if c not in CSV_COLUMNS)
            raise SchemaError(
                f"CSV header mismatch: missing {missing or '()'}, unexpected {extra or '()'}",
                columns=missing,
            )
        rows = list(reader)
    n = len(rows)
    data = np.zeros((n, len(CSV_COLUMNS)))
    for i, row in enumerate(rows):
        if len(row) != len(CSV_COLUMNS):
            raise SchemaError(f"row {i + 2} has {len(row)} fields")
        data[i] = [float(v) for v in row]
    wrench = data[:, 13:19].copy()
    wrench[:, 3:] *= 1e-3
    return Dataset(
        t=data[:, 0].copy(),
        q=data[:, 1:6].copy(),
        m_g=data[:, 6] * 1e-3,
        signals=data[:, 7:13].copy(),
        wrench=wrench,
        cycle=data[:, 19].astype(int),
        validity=None,
        meta={},
    )


def write_meta(dataset: Dataset, path, extra: dict | None = None) -> None:
    meta = dict(dataset.meta)
    if extra:
        meta.update(extra)
    meta.setdefault("schema", SCHEMA)
    meta.setdefault("tool_version", __version__)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_meta(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def load_dataset(csv_path, meta_path=None) -> Dataset:
    """Dataset from a CSV plus its sidecar (``meta.json`` next to it if present)."""
    import os

    ds = read_csv(csv_path)
    if meta_path is None:
        candidate = os.path.join(os.path.dirname(str(csv_path)), "meta.json")
        meta_path = candidate if os.path.exists(candidate) else None
    if meta_path is not None:
        ds.meta = read_meta(meta_path)
    return ds
