"""Structured calibration: boundary-aware least squares over trajectory data.

The measurement model is ``n_i = C_m H_c(q3_i; c_x, c_y, l, l_os) w_i``: a
constant 6x6 signal matrix composed with the insertion-dependent wrench
transport. Identification splits accordingly (variable projection): for any
boundary parameter vector the optimal ``C_m`` is a closed-form linear
least-squares solution, so the nonlinear search runs only over
``(c_x, c_y, l, l_os)`` inside physical bounds, from many random starts. A
joint solver over all 40 numbers is kept for cross-checking; both must agree.

Wrench recovery inverts the composed per-row matrix, guarded by a condition
number cap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from . import SCHEMA, __version__
from .errors import (
    ConditioningError,
    EmptyResidualError,
    IdentificationError,
    SchemaError,
    UnboundedNominalError,
)
from .mechanics import SensorModel, classify_rows, hc_apply, hc_from_compliances
from .simulator import Dataset


@dataclass(frozen=True)
class ModelCalibParams:
    """Identified sensor map: signal matrix plus boundary parameters."""

    c_m: np.ndarray      # (6, 6) contrast per internal wrench unit
    c_x: float           # boundary compliance, y-bending plane reaction (m^3)
    c_y: float           # boundary compliance, x-bending plane reaction (m^3)
    length: float        # tip to proximal clamp (m)
    l_os: float          # support offset: l_s = l_os - q3 (m)
    l_c: float = 0.035   # wrench reference below the proximal clamp (m)

    def __post_init__(self):
        object.__setattr__(self, "c_m", np.asarray(self.c_m, dtype=float).reshape(6, 6))

    def resolve_matrix(self, q3: float) -> np.ndarray:
        """Composed signal matrix ``C_m H_c`` at one insertion depth."""
        return self.c_m @ hc_from_compliances(
            self.l_os - q3, self.length, self.l_c, self.c_x, self.c_y
        )

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "kind": "model",
            "c_m": self.c_m.tolist(),
            "c_x_m3": self.c_x,
            "c_y_m3": self.c_y,
            "length_m": self.length,
            "l_os_m": self.l_os,
            "l_c_m": self.l_c,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelCalibParams":
        try:
            return cls(
                c_m=np.array(d["c_m"], dtype=float),
                c_x=float(d["c_x_m3"]),
                c_y=float(d["c_y_m3"]),
                length=float(d["length_m"]),
                l_os=float(d["l_os_m"]),
                l_c=float(d["l_c_m"]),
            )
        except KeyError as exc:
            raise SchemaError(f"model calibration missing key {exc}") from exc


@dataclass(frozen=True)
class IdentifyOptions:
    n_starts: int = 64
    seed: int = 0
    method: str = "varpro"   # "varpro" or "joint"
    max_nfev: int = 500      # solver evaluation budget per start
    ftol: float = 1e-10
    gtol: float = 1e-8
    xtol: float = 1e-12
    bound_margin: float = 1e-9


@dataclass
class StartResult:
    index: int
    x0: list
    converged: bool
    feasible: bool
    cost: float
    message: str


@dataclass
class FitReport:
    """Outcome of one identification run."""

    params: ModelCalibParams
    best_cost: float                 # sum of squared residual entries
    residual_rms: float
    per_channel_rms: list
    n_rows_used: int
    n_rows_excluded: int
    n_starts: int
    seed: int
    method: str
    nominal: tuple                   # (c_xn, c_yn)
    starts: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "tool_version": __version__,
            "best_cost": self.best_cost,
            "residual_rms": self.residual_rms,
            "per_channel_rms": list(self.per_channel_rms),
            "n_rows_used": self.n_rows_used,
            "n_rows_excluded": self.n_rows_excluded,
            "n_starts": self.n_starts,
            "seed": self.seed,
            "method": self.method,
            "nominal_c_x_m3": self.nominal[0],
            "nominal_c_y_m3": self.nominal[1],
            "starts": [
                {
                    "index": int(s.index),
                    "x0": [float(v) for v in s.x0],
                    "converged": bool(s.converged),
                    "feasible": bool(s.feasible),
                    "cost": float(s.cost),
                    "message": str(s.message),
                }
                for s in self.starts
            ],
        }


def nominal_compliances(model: SensorModel) -> tuple[float, float]:
    """Boundary compliances implied by the modeled suspension stiffness.

    Raises
    ------
    UnboundedNominalError
        If the suspension stiffness is zero (free boundary has no finite
        compliance to anchor the search box).
    """
    k_s = model.k_s
    if k_s <= 0.0:
        raise UnboundedNominalError("suspension stiffness is zero")
    e = model.shaft.young_modulus
    return (6.0 * e * model.shaft.i_xx / k_s, 6.0 * e * model.shaft.i_yy / k_s)


def validity_mask(dataset: Dataset, model: SensorModel) -> tuple[np.ndarray, int]:
    """Single-contact row mask and the excluded count.

    Uses the recorded per-row classification when the dataset carries one,
    otherwise classifies against the nominal model.
    """
    if dataset.validity is not None:
        mask = dataset.validity == 0
    else:
        l_s = model.kinematics.l_os - dataset.q[:, 0]
        status = classify_rows(dataset.wrench, l_s, model)
        from .mechanics import Validity

        mask = np.array([s is Validity.VALID for s in status.reshape(-1)])
    return mask, int(np.sum(~mask))


def _transported(phi: np.ndarray, q3: np.ndarray, w: np.ndarray, l_c: float) -> np.ndarray:
    """Rows ``H_c(q3_i; phi) w_i`` for the current boundary parameters."""
    c_x, c_y, length, l_os = phi
    return hc_apply(l_os - q3, length, l_c, c_x, c_y, w)


def residual(
    params: ModelCalibParams, dataset: Dataset, valid_mask: np.ndarray | None = None
) -> np.ndarray:
    """Flattened signal residuals ``n_i - C_m H_c(q3_i) w_i`` over the dataset.

    Rows excluded by ``valid_mask`` do not contribute. Raises
    EmptyResidualError when nothing remains.
    """
    if valid_mask is None:
        valid_mask = np.ones(len(dataset), dtype=bool)
    if not np.any(valid_mask):
        raise EmptyResidualError("no rows left after exclusion")
    q3 = dataset.q[valid_mask, 0]
    w = dataset.wrench[valid_mask]
    n = dataset.signals[valid_mask]
    phi = np.array([params.c_x, params.c_y, params.length, params.l_os])
    u = _transported(phi, q3, w, params.l_c)
    return (n - u @ params.c_m.T).ravel()


def _inner_cm(u: np.ndarray, n: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Closed-form optimal ``C_m`` for fixed transport rows.

    Solves ``min_Cm ||n - u Cm^T||_F``; returns (C_m, residual matrix, rank).
    """
    sol, _, rank, _ = np.linalg.lstsq(u, n, rcond=None)
    return sol.T, n - u @ sol, int(rank)


def identify(
    dataset: Dataset, model: SensorModel, opts: IdentifyOptions = IdentifyOptions()
) -> FitReport:
    """Fit the structured model to a dataset by bounded multi-start least squares.

    Rows outside the single-contact regime are excluded up front. Boundary
    parameters are searched inside their physical box (compliances in
    ``(0, 2 c_nominal)``, shaft length in ``(0, 0.5)`` m, support offset
    keeping the support strictly below the wrench reference for every
    insertion in the data); the signal matrix is projected out linearly at
    every step. Starts are drawn sequentially from one seeded generator, so
    enlarging ``n_starts`` keeps earlier starts identical.

    Raises
    ------
    IdentificationError
        Degenerate excitation (transport rows lose rank) or no start
        converging to a feasible point.
    EmptyResidualError
        No rows in the single-contact regime.
    """
    mask, n_excluded = validity_mask(dataset, model)
    if not np.any(mask):
        raise EmptyResidualError("every dataset row is outside the single-contact regime")
    q3 = dataset.q[mask, 0]
    w = dataset.wrench[mask]
    n = dataset.signals[mask]
    m_rows = q3.shape[0]
    l_c = model.kinematics.l_c

    c_xn, c_yn = nominal_compliances(model)
    q3_lo, q3_hi = float(q3.min()), float(q3.max())
    eps = opts.bound_margin
    lo = np.array([c_xn * eps, c_yn * eps, 0.05, l_c + q3_hi + 1e-4])
    hi = np.array([c_xn * (2.0 - eps), c_yn * (2.0 - eps), 0.5 - eps, 0.5 + q3_lo])
    if lo[3] >= hi[3]:
        raise IdentificationError(
            "insertion range leaves no admissible support offset"
        )

    # degenerate-excitation guard at the nominal boundary parameters
    phi_nom = np.array(
        [c_xn, c_yn, model.shaft.length, model.kinematics.l_os]
    )
    u_nom = _transported(phi_nom, q3, w, l_c)
    rank = np.linalg.matrix_rank(u_nom)
    if rank < 6:
        raise IdentificationError(
            f"transport rows have rank {rank} < 6; excitation does not span the wrench space",
            diagnostics=[f"rows={m_rows}", f"rank={rank}"],
        )

    def proj_residual(phi):
        u = _transported(phi, q3, w, l_c)
        _, res, _ = _inner_cm(u, n)
        return res.ravel()

    def joint_residual(x):
        c_m = x[:36].reshape(6, 6)
        u = _transported(x[36:], q3, w, l_c)
        return (n - u @ c_m.T).ravel()

    rng = np.random.default_rng(opts.seed)

    def feasible_l_s(phi) -> bool:
        # coupled box: support strictly between the wrench reference and the
        # tip for every insertion in the data
        return (phi[3] - q3_hi > l_c) and (phi[3] - q3_lo < phi[2])

    def draw_start():
        for _ in range(256):
            phi0 = rng.uniform(lo, hi)
            if feasible_l_s(phi0):
                return phi0
        return np.array([c_xn, c_yn, 0.5 * (lo[2] + hi[2]), 0.5 * (lo[3] + hi[3])])

    starts: list[StartResult] = []
    best = None
    for k in range(opts.n_starts):
        phi0 = draw_start()
        try:
            if opts.method == "joint":
                u0 = _transported(phi0, q3, w, l_c)
                cm0, _, _ = _inner_cm(u0, n)
                x0 = np.concatenate([cm0.ravel(), phi0])
                lb = np.concatenate([np.full(36, -np.inf), lo])
                ub = np.concatenate([np.full(36, np.inf), hi])
                sol = least_squares(
                    joint_residual, x0, bounds=(lb, ub), method="trf",
                    ftol=opts.ftol, gtol=opts.gtol, xtol=opts.xtol,
                    max_nfev=opts.max_nfev, x_scale="jac",
                )
                phi = sol.x[36:]
            else:
                sol = least_squares(
                    proj_residual, phi0, bounds=(lo, hi), method="trf",
                    ftol=opts.ftol, gtol=opts.gtol, xtol=opts.xtol,
                    max_nfev=opts.max_nfev, x_scale="jac",
                )
                phi = sol.x
            cost = 2.0 * float(sol.cost)  # scipy reports 0.5 * sum(r^2)
            converged = bool(sol.status > 0)
            feasible = feasible_l_s(phi)
            starts.append(
                StartResult(k, [float(v) for v in phi0], converged, feasible, cost, sol.message)
            )
            if converged and feasible and (best is None or cost < best[0]):
                best = (cost, phi)
        except np.linalg.LinAlgError as exc:
            starts.append(
                StartResult(k, [float(v) for v in phi0], False, False, float("inf"), str(exc))
            )

    if best is None:
        raise IdentificationError(
            "no start converged to a feasible boundary parameter set",
            diagnostics=[s.message for s in starts],
        )

    cost, phi = best
    u = _transported(phi, q3, w, l_c)
    c_m, res, _ = _inner_cm(u, n)
    params = ModelCalibParams(
        c_m=c_m, c_x=float(phi[0]), c_y=float(phi[1]),
        length=float(phi[2]), l_os=float(phi[3]), l_c=l_c,
    )
    per_channel = np.sqrt(np.mean(res**2, axis=0))
    return FitReport(
        params=params,
        best_cost=cost,
        residual_rms=float(np.sqrt(np.mean(res**2))),
        per_channel_rms=[float(v) for v in per_channel],
        n_rows_used=m_rows,
        n_rows_excluded=n_excluded,
        n_starts=opts.n_starts,
        seed=opts.seed,
        method=opts.method,
        nominal=(c_xn, c_yn),
        starts=starts,
    )


def predict(
    params: ModelCalibParams, signals: np.ndarray, q3: float, cond_cap: float = 1e8
) -> np.ndarray:
    """Recover the tip wrench from one signal vector at one insertion depth.

    Raises
    ------
    ConditioningError
        If the composed matrix has a condition number above ``cond_cap``.
    """
    a = params.resolve_matrix(q3)
    cond = float(np.linalg.cond(a))
    if not np.isfinite(cond) or cond > cond_cap:
        raise ConditioningError(
            f"resolve matrix condition {cond:.3e} above cap {cond_cap:.3e}", cond=cond
        )
    return np.linalg.solve(a, np.asarray(signals, dtype=float).reshape(6))


def predict_rows(
    params: ModelCalibParams, dataset: Dataset, cond_cap: float = 1e8
) -> np.ndarray:
    """Row-wise wrench recovery, shape (n, 6)."""
    out = np.empty((len(dataset), 6))
    for i in range(len(dataset)):
        out[i] = predict(params, dataset.signals[i], float(dataset.q[i, 0]), cond_cap)
    return out


def save_report(report: FitReport, path) -> None:
    payload = report.params.to_dict()
    payload["fit"] = report.to_dict()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
