"""Command-line pipeline driver.

Four subcommands cover the full workflow: ``simulate`` writes a dataset,
``calibrate`` fits either calibration route, ``evaluate`` scores a
calibration against a dataset, and ``scenario`` runs the design harnesses.
Every command is a pure function of its config file, input files, and flags;
all outputs embed the config hash and tool version. Exit codes: 0 success,
2 configuration/schema/validity failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .calib_model import IdentifyOptions, identify
from .calib_nn import feature_matrix, target_matrix, train
from .calibration import (
    Calibration,
    from_net,
    load_calibration,
    predict_dataset,
    save_calibration,
    validation_sigma,
)
from .config import (
    build_model,
    config_hash,
    disturbance_config,
    load_config,
    profile_settings,
    train_options,
    wrench_ranges,
)
from .errors import (
    ConditioningError,
    ConfigError,
    ConstantReferenceError,
    DegenerateSignalError,
    EmptyResidualError,
    IdentificationError,
    PartitionError,
    SaturationError,
    SchemaError,
    TrainingError,
    UnboundedNominalError,
    ValidityError,
    WrenchTwinError,
)
from .mechanics import classify_rows
from .metrics import REFERENCE_METRICS, format_table, report_axes, write_plot_series
from .scenarios import overcoat_scenario, wrist_scenario
from .simulator import (
    DisturbanceConfig,
    gen_profile,
    gen_wrench,
    load_dataset,
    simulate,
    split,
    subsample,
    write_csv,
    write_meta,
)

_VALIDATION_ERRORS = (
    ConfigError,
    SchemaError,
    PartitionError,
    ValidityError,
    SaturationError,
    DegenerateSignalError,
    ConstantReferenceError,
)
_NUMERICAL_ERRORS = (
    IdentificationError,
    TrainingError,
    ConditioningError,
    EmptyResidualError,
    UnboundedNominalError,
)


def _ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _provenance(cfg: dict) -> dict:
    return {"config_sha256": config_hash(cfg), "tool_version": __version__}


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_data(path: str):
    """Accept either a dataset directory or a direct CSV path."""
    if os.path.isdir(path):
        return load_dataset(os.path.join(path, "data.csv"))
    return load_dataset(path)


def _reclassify(ds, model) -> np.ndarray:
    """Contact regime from the reference wrench columns (codes as stored)."""
    l_os = float(ds.meta.get("l_os_m", 0.0))
    if l_os <= 0.0:
        raise SchemaError(
            "dataset metadata lacks l_os_m; cannot locate the support point"
        )
    l_s = l_os - ds.q[:, 0]
    status = classify_rows(ds.wrench, l_s, model)
    codes = {"valid": 0, "no_contact": 1, "double_contact": 2}
    return np.array([codes[s.value] for s in status.reshape(-1)], dtype=np.int8)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg)
    kind = args.kind.replace("-", "_")
    settings = profile_settings(cfg, kind)
    if args.duration is not None:
        from dataclasses import replace

        settings = replace(settings, duration=args.duration)
    profile = gen_profile(kind, args.seed, settings)
    ranges = wrench_ranges(cfg)
    wrench = gen_wrench(profile, model, args.seed + 1, kind="valid", ranges=ranges)
    disturbances = (
        DisturbanceConfig.none() if args.no_disturbances else disturbance_config(cfg)
    )
    ds = simulate(profile, wrench, model, disturbances=disturbances, seed=args.seed + 2)
    kin = cfg["kinematics"]
    ds.meta["l_os_m"] = kin["l_os_m"]
    excluded = 0
    if kind == "model_based":
        keep = ds.validity == 0
        excluded = int((~keep).sum())
        ds = ds.select(keep)
        ds.meta["rows"] = len(ds)
        ds.meta["rows_excluded_nonvalid"] = excluded
    out = _ensure_dir(args.out)
    write_csv(ds, os.path.join(out, "data.csv"))
    write_meta(
        ds,
        os.path.join(out, "meta.json"),
        extra={**_provenance(cfg), "profile_kind": kind, "seed": args.seed},
    )
    counts = ds.validity_counts()
    print(f"wrote {len(ds)} rows to {out}/data.csv")
    print(
        "validity: "
        + ", ".join(f"{k}={v}" for k, v in counts.items())
        + (f", excluded={excluded}" if excluded else "")
    )
    return 0


def _metrics_block(mets) -> dict:
    return {"axes": [m.to_dict() for m in mets]}


def cmd_calibrate(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg)
    ds = _load_data(args.data)
    rate = args.subsample
    if rate is None:
        rate = float(cfg["nn"]["subsample_hz"]) if args.mode == "nn" else None
    if rate is not None and rate > 0:
        ds = subsample(ds, rate)

    if args.mode == "model":
        validity = _reclassify(ds, model)
        if not args.force_invalid_rows:
            keep = validity == 0
            dropped = int((~keep).sum())
            if dropped:
                print(f"dropping {dropped} rows outside the supported regime")
            ds = ds.select(keep)
        n = len(ds)
        cut = int(round(0.8 * n))
        idx = np.arange(n)
        fit_part, held = ds.select(idx < cut), ds.select(idx >= cut)
        opts = IdentifyOptions(n_starts=args.starts, seed=args.seed)
        report = identify(fit_part, model, opts)
        from .calib_model import predict_rows
        from .calib_nn import TARGET_INDICES, TARGET_SCALE

        pred = predict_rows(report.params, held)[:, list(TARGET_INDICES)]
        pred = pred * np.asarray(TARGET_SCALE)
        mets = report_axes(pred, target_matrix(held))
        payload = report.params.to_dict()
        payload["fit"] = report.to_dict()
        payload["metrics"] = _metrics_block(mets)
        payload.update(_provenance(cfg))
        _write_json(args.out, payload)
        print(f"identified model -> {args.out}")
    else:
        try:
            parts = split(ds, "cycles_6_2_2")
        except PartitionError:
            parts = split(ds, "fractions", fractions=(0.6, 0.2, 0.2))
        train_set, val_set, test_set = parts
        opts = train_options(cfg, seed=args.seed)
        net, history = train(train_set, val_set, opts)
        pred = predict_dataset(from_net(net), test_set)
        mets = report_axes(pred, target_matrix(test_set))
        calib = from_net(net)
        save_calibration(
            calib,
            args.out,
            extra={
                "metrics": _metrics_block(mets),
                "best_epoch": history.get("best_epoch"),
                "best_val_mse": history.get("best_val_mse"),
                **_provenance(cfg),
            },
        )
        print(f"trained network -> {args.out}")
    print(format_table(mets))
    worst = max(m.nrmsd for m in mets)
    print(f"worst-axis NRMSD: {100.0 * worst:.3f}%")
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    calib = load_calibration(args.calib)
    ds = _load_data(args.data)
    if args.subsample is not None and args.subsample > 0:
        ds = subsample(ds, args.subsample)
    pred = predict_dataset(calib, ds)
    ref = target_matrix(ds)
    mets = report_axes(pred, ref)
    out = _ensure_dir(args.out)
    _write_json(
        os.path.join(out, "report.json"),
        {
            "kind": "evaluation",
            "calibration_kind": calib.kind,
            "n_rows": len(ds),
            "metrics": _metrics_block(mets),
            **_provenance(cfg),
        },
    )
    for j, m in enumerate(mets):
        write_plot_series(
            os.path.join(out, f"axis_{m.name}.csv"), ds.t, ref[:, j], pred[:, j], m.name
        )
    if args.table1:
        print(format_table(mets))
        print("\nbenchtop reference (hardware, for context):")
        print(format_table(REFERENCE_METRICS))
    else:
        for m in mets:
            print(
                f"{m.name}: sigma={m.sigma:.3f} {m.unit}, "
                f"NRMSD={100.0 * m.nrmsd:.3f}%, R2={m.r2:.4f}"
            )
    if args.fail_above is not None:
        worst = 100.0 * max(m.nrmsd for m in mets)
        if worst > args.fail_above:
            print(f"FAIL: worst-axis NRMSD {worst:.3f}% > {args.fail_above}%")
            return 2
        print(f"PASS: worst-axis NRMSD {worst:.3f}% <= {args.fail_above}%")
    return 0


def cmd_scenario(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg)
    calib = load_calibration(args.calib)
    settings = profile_settings(cfg, "data_driven")
    if args.kind == "overcoat":
        from dataclasses import replace

        settings = replace(settings, duration=args.duration, cycles=2)
        report = overcoat_scenario(model, calib, settings=settings, seed=args.seed)
    else:
        sigma_override = None
        if args.sigma_from:
            sigma_override = validation_sigma(load_calibration(args.sigma_from))
        report = wrist_scenario(
            model,
            calib,
            settings=settings,
            disturbances=disturbance_config(cfg),
            seed=args.seed,
            duration=args.duration,
            sigma_override=sigma_override,
        )
    out = _ensure_dir(args.out)
    payload = report.to_dict()
    payload.update(_provenance(cfg))
    _write_json(os.path.join(out, f"scenario_{args.kind}.json"), payload)
    if report.series is not None:
        t = report.series["t"]
        for name in ("fx", "fy", "mx", "my", "mz"):
            ref = np.zeros(len(t))
            write_plot_series(
                os.path.join(out, f"scenario_{args.kind}_{name}.csv"),
                t, ref, report.series[name], name,
            )
    print(f"{args.kind}: {'PASS' if report.passed else 'FAIL'}")
    for name, vals in report.axes.items():
        line = ", ".join(
            f"{k}={v:.4g}" for k, v in vals.items() if isinstance(v, (int, float))
        )
        print(f"  {name}: {line}")
    return 0 if report.passed or args.no_strict else 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wrench-twin",
        description="Digital twin and calibration pipeline for the shaft-mounted optical force/torque sensor",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="synthesize a dataset")
    ps.add_argument("--kind", choices=("data-driven", "model-based"), default="data-driven")
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--config", default=None, help="JSON config overriding defaults")
    ps.add_argument("--duration", type=float, default=None, help="override duration (s)")
    ps.add_argument("--no-disturbances", action="store_true",
                    help="noise, friction, and jaw coupling all off")
    ps.add_argument("-o", "--out", required=True, help="output directory")
    ps.set_defaults(func=cmd_simulate)

    pc = sub.add_parser("calibrate", help="fit a calibration from a dataset")
    pc.add_argument("--mode", choices=("model", "nn"), required=True)
    pc.add_argument("--data", required=True, help="dataset directory or CSV path")
    pc.add_argument("--config", default=None)
    pc.add_argument("--seed", type=int, default=0)
    pc.add_argument("--starts", type=int, default=64, help="identification restarts")
    pc.add_argument("--subsample", type=float, default=None,
                    help="decimate to this rate first (nn default: config value)")
    pc.add_argument("--force-invalid-rows", action="store_true",
                    help="keep rows outside the supported regime in model mode")
    pc.add_argument("-o", "--out", required=True, help="calibration JSON path")
    pc.set_defaults(func=cmd_calibrate)

    pe = sub.add_parser("evaluate", help="score a calibration on a dataset")
    pe.add_argument("--calib", required=True)
    pe.add_argument("--data", required=True)
    pe.add_argument("--config", default=None)
    pe.add_argument("--subsample", type=float, default=None)
    pe.add_argument("--fail-above", type=float, default=None,
                    help="exit 2 if any axis NRMSD (percent) exceeds this")
    pe.add_argument("--table1", action="store_true",
                    help="print the metrics table plus the benchtop reference")
    pe.add_argument("-o", "--out", required=True, help="report directory")
    pe.set_defaults(func=cmd_evaluate)

    px = sub.add_parser("scenario", help="run a design-evaluation harness")
    px.add_argument("--kind", choices=("overcoat", "wrist"), required=True)
    px.add_argument("--calib", required=True)
    px.add_argument("--config", default=None)
    px.add_argument("--seed", type=int, default=0)
    px.add_argument("--duration", type=float, default=30.0)
    px.add_argument("--sigma-from", default=None,
                    help="take error margins from this baseline calibration")
    px.add_argument("--no-strict", action="store_true",
                    help="exit 0 even when the scenario flags FAIL")
    px.add_argument("-o", "--out", required=True, help="report directory")
    px.set_defaults(func=cmd_scenario)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except WrenchTwinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
