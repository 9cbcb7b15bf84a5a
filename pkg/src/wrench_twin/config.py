"""Configuration loading, validation, and hashing.

Configs are JSON with explicit units in key names. The schema is strict:
unknown keys are rejected with their full path, and every value must have the
same shape (mapping / list / scalar) as the default entry it overrides.
Partial configs are merged over the defaults.

The default parameter values describe a plausible generic laparoscopic
instrument; they are placeholders, not measurements of any physical build.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from typing import Any, Mapping

from . import SCHEMA
from .calib_nn import TrainOptions
from .errors import ConfigError
from .mechanics import (
    CannulaConfig,
    KinematicDefaults,
    SensorModel,
    ShaftProperties,
)
from .optics import HexGeometry, OpticalUnitParams
from .simulator import DisturbanceConfig, ProfileSettings, WrenchRanges

DEFAULT_CONFIG: dict[str, Any] = {
    "schema": SCHEMA,
    "optics": {
        "kappa_A": 2.0e-6,
        "slit_width_m": 2.2e-3,
        "gap_width_m": 2.0e-4,
    },
    "hexagon": {
        "d_z_m": 0.016,
        "r_s_m": 0.022,
        "orientations": ["H", "V", "H", "V", "H", "V"],
    },
    "shaft": {
        "young_modulus_Pa": 193.0e9,
        "shear_modulus_Pa": 75.0e9,
        "area_m2": 1.56e-5,
        "i_xx_m4": 6.0e-11,
        "i_yy_m4": 6.0e-11,
        "j_zz_m4": 1.2e-10,
        "clamp_separation_m": 0.03,
        "length_m": 0.26,
    },
    "cannula": {
        "tube_length_m": 0.14,
        "arm_circle_radius_m": 0.02,
        "gap_m": 1.5e-3,
        "spring_modulus_Pa": 200.0e9,
        "sheet_thickness_m": 1.5e-3,
        "arm_width_m": 0.012,
        "slot_width_m": 0.004,
        "arm_length_m": 0.13,
    },
    "kinematics": {
        "l_os_m": 0.22,
        "l_c_m": 0.035,
        "q3_min_m": 0.07,
        "q3_max_m": 0.15,
    },
    "simulator": {
        "sample_rate_hz": 1500.0,
        "model_based": {"duration_s": 20.0, "cycles": 2},
        "data_driven": {"duration_s": 120.0, "cycles": 10},
        "cube_m": 0.040,
        "q7_max_deg": 9.0,
        "grasp_cmd_deg": -10.0,
        "grasp_probability": 0.25,
        "jaw_stiffness_Nm_per_rad": 0.12,
        "wrench": {
            "f_lat_N": 9.0,
            "f_ax_N": 2.0,
            "m_lat_Nmm": 160.0,
            "m_tor_Nmm": 100.0,
            "valid_f_lo_N": 1.5,
            "valid_f_hi_N": 4.0,
            "valid_m_frac": 1.0,
            "dwell_fraction": 0.15,
        },
    },
    "disturbances": {
        "signal_noise_rms": 5.6e-7,
        "friction_coulomb_N": 0.5,
        "friction_viscous_Ns_per_m": 2.0,
        "jaw_fx_N_per_Nm": 50.0,
        "jaw_my_Nm_per_Nm": 2.0,
        "body_coupling": 0.0,
    },
    "calibration": {
        "n_starts": 64,
        "seed": 0,
        "max_nfev": 500,
        "ftol": 1e-10,
        "gtol": 1e-8,
        "cond_cap": 1.0e8,
    },
    "nn": {
        "hidden_units": 5,
        "learning_rate": 0.01,
        "lr_schedule": "cosine",
        "momentum": 0.9,
        "patience": 50,
        "min_epochs": 2500,
        "max_epochs": 5000,
        "batch_size": 192,
        "seed": 0,
        "subsample_hz": 100.0,
    },
}


def _merge(default: Any, user: Any, path: str) -> Any:
    if isinstance(default, Mapping):
        if not isinstance(user, Mapping):
            raise ConfigError("expected an object", path)
        merged = {}
        for key in user:
            if key not in default:
                raise ConfigError("unknown key", f"{path}.{key}" if path else key)
        for key, dval in default.items():
            if key in user:
                merged[key] = _merge(dval, user[key], f"{path}.{key}" if path else key)
            else:
                merged[key] = copy.deepcopy(dval)
        return merged
    if isinstance(default, list):
        if not isinstance(user, list):
            raise ConfigError("expected a list", path)
        return copy.deepcopy(user)
    if isinstance(default, bool) or isinstance(user, bool):
        if isinstance(default, bool) != isinstance(user, bool):
            raise ConfigError("expected a boolean", path)
        return user
    if isinstance(default, (int, float)):
        if not isinstance(user, (int, float)):
            raise ConfigError("expected a number", path)
        return user
    if isinstance(default, str):
        if not isinstance(user, str):
            raise ConfigError("expected a string", path)
        return user
    raise ConfigError("unsupported value type", path)


def merge_config(user: Mapping | None = None) -> dict:
    """Full config dict: user values merged over the defaults, strictly checked."""
    if user is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    merged = _merge(DEFAULT_CONFIG, user, "")
    if merged["schema"] != SCHEMA:
        raise ConfigError(f"expected {SCHEMA!r}", "schema")
    return merged


def load_config(path: str | None = None) -> dict:
    """Load and validate a JSON config file; no path returns the defaults."""
    if path is None:
        return merge_config(None)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", str(path)) from exc
    if not isinstance(user, dict):
        raise ConfigError("top level must be an object", str(path))
    return merge_config(user)


def config_hash(cfg: Mapping) -> str:
    """Short stable digest of a config for provenance stamps."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


def build_model(cfg: Mapping) -> SensorModel:
    """Construct the physical sensor model from a validated config dict."""
    o = cfg["optics"]
    hx = cfg["hexagon"]
    sh = cfg["shaft"]
    ca = cfg["cannula"]
    ki = cfg["kinematics"]
    return SensorModel(
        optics=OpticalUnitParams(
            kappa=o["kappa_A"],
            slit_width=o["slit_width_m"],
            gap_width=o["gap_width_m"],
        ),
        hexagon=HexGeometry(
            d_z=hx["d_z_m"], r_s=hx["r_s_m"], orientations=tuple(hx["orientations"])
        ),
        shaft=ShaftProperties(
            young_modulus=sh["young_modulus_Pa"],
            shear_modulus=sh["shear_modulus_Pa"],
            area=sh["area_m2"],
            i_xx=sh["i_xx_m4"],
            i_yy=sh["i_yy_m4"],
            j_zz=sh["j_zz_m4"],
            clamp_separation=sh["clamp_separation_m"],
            length=sh["length_m"],
        ),
        cannula=CannulaConfig(
            tube_length=ca["tube_length_m"],
            arm_circle_radius=ca["arm_circle_radius_m"],
            gap=ca["gap_m"],
            spring_modulus=ca["spring_modulus_Pa"],
            sheet_thickness=ca["sheet_thickness_m"],
            arm_width=ca["arm_width_m"],
            slot_width=ca["slot_width_m"],
            arm_length=ca["arm_length_m"],
        ),
        kinematics=KinematicDefaults(
            l_os=ki["l_os_m"],
            l_c=ki["l_c_m"],
            q3_min=ki["q3_min_m"],
            q3_max=ki["q3_max_m"],
        ),
    )


def profile_settings(cfg: Mapping, kind: str) -> ProfileSettings:
    """ProfileSettings for a generator kind from a validated config."""
    sim = cfg["simulator"]
    if kind not in ("model_based", "data_driven"):
        raise ConfigError(f"unknown profile kind {kind!r}", "simulator")
    sub = sim[kind]
    ki = cfg["kinematics"]
    return ProfileSettings(
        sample_rate=sim["sample_rate_hz"],
        duration=sub["duration_s"],
        cycles=sub["cycles"],
        q3_min=ki["q3_min_m"],
        q3_max=ki["q3_max_m"],
        cube=sim["cube_m"],
        q7_max=math.radians(sim["q7_max_deg"]),
        grasp_cmd=math.radians(sim["grasp_cmd_deg"]),
        grasp_probability=sim["grasp_probability"],
        jaw_stiffness=sim["jaw_stiffness_Nm_per_rad"],
    )


def wrench_ranges(cfg: Mapping) -> WrenchRanges:
    """WrenchRanges from a validated config (moments to SI N*m)."""
    w = cfg["simulator"]["wrench"]
    return WrenchRanges(
        f_lat=w["f_lat_N"],
        f_ax=w["f_ax_N"],
        m_lat=w["m_lat_Nmm"] * 1e-3,
        m_tor=w["m_tor_Nmm"] * 1e-3,
        valid_f_lo=w["valid_f_lo_N"],
        valid_f_hi=w["valid_f_hi_N"],
        valid_m_frac=w["valid_m_frac"],
        dwell_fraction=w["dwell_fraction"],
    )


def disturbance_config(cfg: Mapping) -> DisturbanceConfig:
    d = cfg["disturbances"]
    return DisturbanceConfig(
        signal_noise_rms=d["signal_noise_rms"],
        friction_coulomb=d["friction_coulomb_N"],
        friction_viscous=d["friction_viscous_Ns_per_m"],
        jaw_fx=d["jaw_fx_N_per_Nm"],
        jaw_my=d["jaw_my_Nm_per_Nm"],
        body_coupling=d["body_coupling"],
    )


def train_options(cfg: Mapping, seed: int | None = None) -> TrainOptions:
    nn = cfg["nn"]
    return TrainOptions(
        learning_rate=nn["learning_rate"],
        lr_schedule=nn["lr_schedule"],
        momentum=nn["momentum"],
        max_epochs=nn["max_epochs"],
        patience=nn["patience"],
        min_epochs=nn["min_epochs"],
        batch_size=nn["batch_size"],
        seed=nn["seed"] if seed is None else seed,
        hidden_units=nn["hidden_units"],
    )
