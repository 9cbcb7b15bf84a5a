"""Data-driven calibration: a small feedforward network over signal features.

Feature vector per sample (fixed order): insertion depth in mm, shaft roll in
rad, grip effort in N*mm, the six normalized contrasts, and their squares.
Targets are the two lateral forces (N) and three moments (N*mm); axial force
is not a calibration target (insertion friction leaves it unobservable at the
sensing point).

The network is one tanh hidden layer trained from scratch by gradient descent
with momentum (mini-batch by default, full-batch when batch_size is None) on
standardized inputs and targets, with patience-based early stopping against a
validation split. The target de-normalization is folded into the output layer
when training finishes, so the stored model maps scaled features straight to
engineering units with only the input scaler as state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import SCHEMA, __version__
from .errors import SchemaError, TrainingError
from .simulator import Dataset

FEATURE_NAMES = (
    "q3_mm", "q4_rad", "mg_Nmm",
    "n1", "n2", "n3", "n4", "n5", "n6",
    "n1_sq", "n2_sq", "n3_sq", "n4_sq", "n5_sq", "n6_sq",
)
TARGET_NAMES = ("fx_N", "fy_N", "mx_Nmm", "my_Nmm", "mz_Nmm")
TARGET_INDICES = (0, 1, 3, 4, 5)      # columns in the 6-component wrench
TARGET_SCALE = (1.0, 1.0, 1e3, 1e3, 1e3)  # SI wrench to target units

_ROW_KEYS = ("q3", "q4", "mg", "n1", "n2", "n3", "n4", "n5", "n6")


def featurize(row: Mapping[str, float]) -> np.ndarray:
    """Feature vector of one sample row (internal units: m, rad, N*m).

    Raises
    ------
    SchemaError
        If any required channel is missing; carries the missing names.
    """
    missing = tuple(k for k in _ROW_KEYS if k not in row)
    if missing:
        raise SchemaError(f"row lacks channels {missing}", columns=missing)
    n = np.array([row[f"n{i}"] for i in range(1, 7)], dtype=float)
    head = np.array([row["q3"] * 1e3, row["q4"], row["mg"] * 1e3], dtype=float)
    return np.concatenate([head, n, n**2])


def feature_matrix(dataset: Dataset, names: tuple[str, ...] = FEATURE_NAMES) -> np.ndarray:
    """Feature rows for a whole dataset, restricted to ``names`` (in order)."""
    unknown = tuple(n for n in names if n not in FEATURE_NAMES)
    if unknown:
        raise SchemaError(f"unknown feature names {unknown}", columns=unknown)
    full = np.empty((len(dataset), len(FEATURE_NAMES)))
    full[:, 0] = dataset.q[:, 0] * 1e3
    full[:, 1] = dataset.q[:, 1]
    full[:, 2] = dataset.m_g * 1e3
    full[:, 3:9] = dataset.signals
    full[:, 9:15] = dataset.signals**2
    cols = [FEATURE_NAMES.index(n) for n in names]
    return full[:, cols]


def target_matrix(dataset: Dataset) -> np.ndarray:
    """Target rows (n, 5) in N / N*mm."""
    return dataset.wrench[:, list(TARGET_INDICES)] * np.asarray(TARGET_SCALE)


@dataclass(frozen=True)
class TrainOptions:
    learning_rate: float = 1e-2
    lr_schedule: str = "cosine"    # constant | step | cosine
    momentum: float = 0.9
    max_epochs: int = 5000
    patience: int = 50
    min_epochs: int = 2500  # burn-in before patience may stop training
    seed: int = 0
    hidden_units: int = 5
    activation: str = "tanh"       # tanh | linear
    batch_size: int | None = 192   # None runs full-batch steps
    features: tuple[str, ...] = FEATURE_NAMES


@dataclass
class NNModel:
    """Trained network with its input scaler; outputs engineering units."""

    feature_names: tuple[str, ...]
    scaler_mean: np.ndarray  # (k,)
    scaler_std: np.ndarray   # (k,) strictly positive
    w1: np.ndarray           # (h, k)
    b1: np.ndarray           # (h,)
    w2: np.ndarray           # (5, h)
    b2: np.ndarray           # (5,)
    activation: str = "tanh"
    training: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "kind": "nn",
            "feature_names": list(self.feature_names),
            "target_names": list(TARGET_NAMES),
            "scaler_mean": self.scaler_mean.tolist(),
            "scaler_std": self.scaler_std.tolist(),
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": self.b2.tolist(),
            "activation": self.activation,
            "training": self.training,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NNModel":
        try:
            model = cls(
                feature_names=tuple(d["feature_names"]),
                scaler_mean=np.array(d["scaler_mean"], dtype=float),
                scaler_std=np.array(d["scaler_std"], dtype=float),
                w1=np.array(d["w1"], dtype=float),
                b1=np.array(d["b1"], dtype=float),
                w2=np.array(d["w2"], dtype=float),
                b2=np.array(d["b2"], dtype=float),
                activation=d["activation"],
                training=dict(d.get("training", {})),
            )
        except KeyError as exc:
            raise SchemaError(f"nn calibration missing key {exc}") from exc
        if np.any(model.scaler_std <= 0.0):
            raise SchemaError("scaler std must be strictly positive")
        if model.activation not in ("tanh", "linear"):
            raise SchemaError(f"unknown activation {model.activation!r}")
        return model


def _activation(z: np.ndarray, kind: str) -> np.ndarray:
    return np.tanh(z) if kind == "tanh" else z


def _activation_deriv(h: np.ndarray, kind: str) -> np.ndarray:
    return 1.0 - h**2 if kind == "tanh" else np.ones_like(h)


def infer_batch(model: NNModel, x: np.ndarray) -> np.ndarray:
    """Network outputs for (n, k) feature rows, in N / N*mm."""
    x = np.asarray(x, dtype=float)
    xs = (x - model.scaler_mean) / model.scaler_std
    h = _activation(xs @ model.w1.T + model.b1, model.activation)
    return h @ model.w2.T + model.b2


def infer(model: NNModel, x: np.ndarray) -> np.ndarray:
    """Single-sample inference; defined as the batch path on one row."""
    return infer_batch(model, np.asarray(x, dtype=float).reshape(1, -1))[0]


def _loss_and_grads(model_arrays, xs, ys, activation):
    w1, b1, w2, b2 = model_arrays
    h = _activation(xs @ w1.T + b1, activation)
    yh = h @ w2.T + b2
    err = yh - ys
    loss = float(np.mean(err**2))
    d_y = (2.0 / err.size) * err
    g_w2 = d_y.T @ h
    g_b2 = d_y.sum(axis=0)
    d_h = d_y @ w2
    d_z = d_h * _activation_deriv(h, activation)
    g_w1 = d_z.T @ xs
    g_b1 = d_z.sum(axis=0)
    return loss, (g_w1, g_b1, g_w2, g_b2)


def _lr_at(opts: TrainOptions, epoch: int) -> float:
    if opts.lr_schedule == "constant":
        return opts.learning_rate
    if opts.lr_schedule == "step":
        return opts.learning_rate * 0.5 ** (epoch // 1000)
    if opts.lr_schedule == "cosine":
        return opts.learning_rate * 0.5 * (1.0 + np.cos(np.pi * epoch / opts.max_epochs))
    raise TrainingError(f"unknown lr schedule {opts.lr_schedule!r}")


def train_arrays(
    x: np.ndarray,
    y: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    opts: TrainOptions = TrainOptions(),
    feature_names: tuple[str, ...] | None = None,
) -> tuple[NNModel, dict]:
    """Fit the network on feature/target arrays; see ``train`` for the contract."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise TrainingError("training arrays must be aligned 2-d matrices")
    if x.shape[0] == 0 or x_val.shape[0] == 0:
        raise TrainingError("training and validation sets must be non-empty")
    names = tuple(feature_names) if feature_names is not None else tuple(
        f"x{i}" for i in range(x.shape[1])
    )

    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)  # constant features scale to zero
    y_mean = y.mean(axis=0)
    y_std = np.where(y.std(axis=0) < 1e-12, 1.0, y.std(axis=0))
    xs = (x - mean) / std
    ys = (y - y_mean) / y_std
    xvs = (np.asarray(x_val, dtype=float) - mean) / std
    yvs = (np.asarray(y_val, dtype=float) - y_mean) / y_std

    rng = np.random.default_rng(opts.seed)
    k = x.shape[1]
    hdim = opts.hidden_units
    w1 = rng.uniform(-1.0, 1.0, (hdim, k)) / np.sqrt(k)
    b1 = np.zeros(hdim)
    w2 = rng.uniform(-1.0, 1.0, (5, hdim)) / np.sqrt(hdim)
    b2 = np.zeros(5)
    vel = [np.zeros_like(a) for a in (w1, b1, w2, b2)]

    history = {"epoch": [], "lr": [], "train_mse": [], "val_mse": []}
    best_val = np.inf
    best_weights = None
    best_epoch = -1
    since_best = 0

    n_rows = xs.shape[0]
    bs = opts.batch_size
    if bs is not None and bs <= 0:
        raise TrainingError("batch_size must be positive or None")

    def val_mse_now():
        h_val = _activation(xvs @ w1.T + b1, opts.activation)
        return float(np.mean((h_val @ w2.T + b2 - yvs) ** 2))

    # patience is counted in epochs; the validation record is tracked after
    # every weight update so a noisy epoch cannot hide an improvement
    steps_per_epoch = 1 if (bs is None or bs >= n_rows) else -(-n_rows // bs)
    patience_steps = opts.patience * steps_per_epoch
    since_best = 0
    stop = False

    for epoch in range(opts.max_epochs):
        lr = _lr_at(opts, epoch)
        if bs is None or bs >= n_rows:
            loss, grads = _loss_and_grads((w1, b1, w2, b2), xs, ys, opts.activation)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"loss diverged at epoch {epoch}", last_finite_epoch=epoch - 1
                )
            for i, (arr, g) in enumerate(zip((w1, b1, w2, b2), grads)):
                vel[i] = opts.momentum * vel[i] - lr * g
                arr += vel[i]
            val_mse = val_mse_now()
            if val_mse < best_val:
                best_val = val_mse
                best_weights = (w1.copy(), b1.copy(), w2.copy(), b2.copy())
                best_epoch = epoch
                since_best = 0
            else:
                since_best += 1
                stop = (since_best >= patience_steps
                        and epoch + 1 >= opts.min_epochs)
        else:
            perm = rng.permutation(n_rows)
            for lo in range(0, n_rows, bs):
                idx = perm[lo:lo + bs]
                bl, grads = _loss_and_grads(
                    (w1, b1, w2, b2), xs[idx], ys[idx], opts.activation
                )
                if not np.isfinite(bl):
                    raise TrainingError(
                        f"loss diverged at epoch {epoch}", last_finite_epoch=epoch - 1
                    )
                for i, (arr, g) in enumerate(zip((w1, b1, w2, b2), grads)):
                    vel[i] = opts.momentum * vel[i] - lr * g
                    arr += vel[i]
                val_mse = val_mse_now()
                if val_mse < best_val:
                    best_val = val_mse
                    best_weights = (w1.copy(), b1.copy(), w2.copy(), b2.copy())
                    best_epoch = epoch
                    since_best = 0
                else:
                    since_best += 1
                    if since_best >= patience_steps and epoch + 1 >= opts.min_epochs:
                        stop = True
                        break
            h_tr = _activation(xs @ w1.T + b1, opts.activation)
            loss = float(np.mean((h_tr @ w2.T + b2 - ys) ** 2))

        history["epoch"].append(epoch)
        history["lr"].append(lr)
        history["train_mse"].append(loss)
        history["val_mse"].append(val_mse)

        if stop:
            break

    if best_weights is None:
        raise TrainingError("no finite validation loss reached")
    w1, b1, w2, b2 = best_weights
    history["best_epoch"] = best_epoch
    history["best_val_mse"] = best_val

    # fold target de-normalization into the output layer
    w2_out = w2 * y_std[:, None]
    b2_out = b2 * y_std + y_mean

    model = NNModel(
        feature_names=names,
        scaler_mean=mean,
        scaler_std=std,
        w1=w1,
        b1=b1,
        w2=w2_out,
        b2=b2_out,
        activation=opts.activation,
        training={
            "seed": opts.seed,
            "learning_rate": opts.learning_rate,
            "lr_schedule": opts.lr_schedule,
            "momentum": opts.momentum,
            "patience": opts.patience,
            "min_epochs": opts.min_epochs,
            "max_epochs": opts.max_epochs,
            "batch_size": opts.batch_size,
            "epochs_run": len(history["epoch"]),
            "best_epoch": best_epoch,
            "best_val_mse_scaled": best_val,
        },
    )
    return model, history


def train(
    train_set: Dataset, val_set: Dataset, opts: TrainOptions = TrainOptions()
) -> tuple[NNModel, dict]:
    """Train on dataset splits.

    Deterministic given (data, options): a single seeded generator drives the
    weight init and the per-epoch batch shuffles, and early stopping retains
    the best validation weights seen (its validation MSE never exceeds the
    final epoch's). Returns the model and the per-epoch history.

    Raises
    ------
    TrainingError
        Empty splits or diverging loss (carries the last finite epoch).
    """
    x = feature_matrix(train_set, opts.features)
    y = target_matrix(train_set)
    xv = feature_matrix(val_set, opts.features)
    yv = target_matrix(val_set)
    model, history = train_arrays(x, y, xv, yv, opts, feature_names=opts.features)
    model.training["n_train_rows"] = len(train_set)
    model.training["n_val_rows"] = len(val_set)
    val_err = infer_batch(model, xv) - yv
    model.training["val_sigma"] = [float(v) for v in np.sqrt(np.mean(val_err**2, axis=0))]
    return model, history


def finite_diff_check(
    model: NNModel, x: np.ndarray, y: np.ndarray, eps: float = 1e-5
) -> float:
    """Worst relative deviation of analytic MSE gradients from central differences.

    Perturbs every weight and bias in turn; entries whose analytic and
    numerical values are both below 1e-8 in magnitude compare absolutely
    (the relative error of a zero gradient is measurement noise).
    """
    x = np.asarray(x, dtype=float).reshape(-1, len(model.feature_names))
    y = np.asarray(y, dtype=float).reshape(x.shape[0], -1)
    xs = (x - model.scaler_mean) / model.scaler_std
    arrays = (model.w1, model.b1, model.w2, model.b2)
    _, grads = _loss_and_grads(arrays, xs, y, model.activation)

    def loss_with(arrs):
        loss, _ = _loss_and_grads(arrs, xs, y, model.activation)
        return loss

    worst = 0.0
    for idx, arr in enumerate(arrays):
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            mi = it.multi_index
            bumped = [a.copy() for a in arrays]
            bumped[idx][mi] += eps
            up = loss_with(bumped)
            bumped[idx][mi] -= 2.0 * eps
            down = loss_with(bumped)
            fd = (up - down) / (2.0 * eps)
            a = float(grads[idx][mi])
            denom = max(abs(a), abs(fd), 1e-8)
            worst = max(worst, abs(a - fd) / denom)
    return worst


def save_model(model: NNModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> NNModel:
    with open(path, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    if d.get("kind") != "nn":
        raise SchemaError(f"expected an nn calibration file, got kind {d.get('kind')!r}")
    return NNModel.from_dict(d)
