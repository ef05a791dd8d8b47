"""Model and dataset I/O plus the reference ReLU forward pass.

Model files are UTF-8 JSON with explicit shape fields and row-major
arrays-of-arrays; datasets are headerless numeric CSV or the same JSON
matrix schema (auto-detected by extension).  All arithmetic is float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    NonFiniteWeight,
    SchemaError,
)

MODEL_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class MlpModel:
    """A trained single-hidden-layer MLP (or frozen-feature head) with fixed weights.

    When ``preactivated`` is true the hidden affine map is absent and inputs
    are taken directly as the hidden pre-activations, so dataset columns must
    equal the hidden width ``m``.
    """

    kind: str  # "binary" | "multiclass"
    head_weights: np.ndarray  # (K, m)
    head_bias: np.ndarray  # (K,)
    hidden_weights: np.ndarray | None = None  # (m, d)
    hidden_bias: np.ndarray | None = None  # (m,)
    preactivated: bool = False

    def __post_init__(self):
        if self.kind not in ("binary", "multiclass"):
            raise SchemaError(f"unknown model kind {self.kind!r}")
        hw = np.atleast_2d(np.asarray(self.head_weights, dtype=np.float64))
        hb = np.asarray(self.head_bias, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "head_weights", hw)
        object.__setattr__(self, "head_bias", hb)
        if hw.shape[0] != hb.shape[0]:
            raise SchemaError(
                f"head bias length {hb.shape[0]} != head row count {hw.shape[0]}"
            )
        if (self.kind == "binary") != (hw.shape[0] == 1):
            raise SchemaError(
                f"kind={self.kind} requires K{'=' if self.kind == 'binary' else '>'}1, "
                f"got K={hw.shape[0]}"
            )
        if self.preactivated:
            if self.hidden_weights is not None or self.hidden_bias is not None:
                raise SchemaError("preactivated model must not carry a hidden block")
        else:
            if self.hidden_weights is None or self.hidden_bias is None:
                raise SchemaError("non-preactivated model requires hidden_weights and hidden_bias")
            w1 = np.atleast_2d(np.asarray(self.hidden_weights, dtype=np.float64))
            b1 = np.asarray(self.hidden_bias, dtype=np.float64).reshape(-1)
            object.__setattr__(self, "hidden_weights", w1)
            object.__setattr__(self, "hidden_bias", b1)
            if w1.shape[0] != b1.shape[0]:
                raise SchemaError(
                    f"hidden bias length {b1.shape[0]} != hidden row count {w1.shape[0]}"
                )
            if w1.shape[0] != hw.shape[1]:
                raise SchemaError(
                    f"head column count {hw.shape[1]} != hidden width {w1.shape[0]}"
                )
        for name, arr in (
            ("head_weights", self.head_weights),
            ("head_bias", self.head_bias),
            ("hidden_weights", self.hidden_weights),
            ("hidden_bias", self.hidden_bias),
        ):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise NonFiniteWeight(f"{name} contains non-finite entries")
        if self.m < 1:
            raise SchemaError("hidden width must be >= 1")

    @property
    def m(self) -> int:
        return self.head_weights.shape[1]

    @property
    def n_classes(self) -> int:
        return self.head_weights.shape[0]

    @property
    def input_dim(self) -> int:
        """Expected dataset column count (m in preactivated mode, d otherwise)."""
        return self.m if self.preactivated else self.hidden_weights.shape[1]


@dataclass(frozen=True)
class CalibrationSet:
    """Feature matrix plus per-sample target class indices.

    Targets default to the ReLU model's own decisions (the only target source
    used by the fitting cascade); externally supplied labels are accepted but
    carry no preservation claim.
    """

    features: np.ndarray  # (n, d) or (n, m)
    targets: np.ndarray  # (n,) ints in [0, K)
    target_source: str = "relu_decisions"  # "relu_decisions" | "supplied"

    def __post_init__(self):
        feats = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        targs = np.asarray(self.targets, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "targets", targs)
        if feats.shape[0] != targs.shape[0]:
            raise DimensionMismatch(
                f"{feats.shape[0]} samples but {targs.shape[0]} targets"
            )
        if feats.shape[0] < 1:
            raise SchemaError("calibration set must contain at least one sample")
        if self.target_source not in ("relu_decisions", "supplied"):
            raise SchemaError(f"unknown target_source {self.target_source!r}")

    @property
    def n(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class Logits:
    """Raw output scores plus argmax decisions (ties broken by lowest class index)."""

    values: np.ndarray  # (n, K)
    decisions: np.ndarray = field(init=False)

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "decisions", decide(vals))


def decide(values: np.ndarray) -> np.ndarray:
    """Decision rule shared by every forward pass.

    Single-column scores use the fixed-zero convention (positive iff strictly
    greater than zero); multi-column scores use lowest-index argmax.
    """
    values = np.atleast_2d(values)
    if values.shape[1] == 1:
        return (values[:, 0] > 0.0).astype(np.int64)
    return np.argmax(values, axis=1).astype(np.int64)


def _as_float_matrix(obj, name: str, path) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: field {name!r} is not numeric") from exc
    return arr


def load_model(path) -> MlpModel:
    """Load and validate a model JSON file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: top level must be a JSON object")
    for key in ("kind", "head_weights", "head_bias"):
        if key not in raw:
            raise SchemaError(f"{path}: missing required field {key!r}")
    preactivated = bool(raw.get("preactivated", False))
    kwargs = dict(
        kind=raw["kind"],
        head_weights=_as_float_matrix(raw["head_weights"], "head_weights", path),
        head_bias=_as_float_matrix(raw["head_bias"], "head_bias", path),
        preactivated=preactivated,
    )
    if not preactivated:
        for key in ("hidden_weights", "hidden_bias"):
            if key not in raw:
                raise SchemaError(f"{path}: missing required field {key!r}")
        kwargs["hidden_weights"] = _as_float_matrix(raw["hidden_weights"], "hidden_weights", path)
        kwargs["hidden_bias"] = _as_float_matrix(raw["hidden_bias"], "hidden_bias", path)
    model = MlpModel(**kwargs)
    for dim_key, actual in (("m", model.m), ("d", model.input_dim), ("k", model.n_classes)):
        if dim_key in raw and int(raw[dim_key]) != actual:
            raise SchemaError(f"{path}: declared {dim_key}={raw[dim_key]} but arrays give {actual}")
    return model


def save_model(model: MlpModel, path) -> None:
    """Write a model back out in the same JSON schema (round-trip safe)."""
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": model.kind,
        "preactivated": model.preactivated,
        "m": model.m,
        "d": model.input_dim,
        "k": model.n_classes,
        "head_weights": model.head_weights.tolist(),
        "head_bias": model.head_bias.tolist(),
    }
    if not model.preactivated:
        doc["hidden_weights"] = model.hidden_weights.tolist()
        doc["hidden_bias"] = model.hidden_bias.tolist()
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_matrix(path) -> np.ndarray:
    """Load a dataset matrix from headerless CSV or the JSON matrix schema."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        raw = json.loads(path.read_text(encoding="utf-8"))
        obj = raw.get("features", raw) if isinstance(raw, dict) else raw
        mat = _as_float_matrix(obj, "features", path)
    else:
        try:
            mat = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise SchemaError(f"{path}: malformed CSV ({exc})") from exc
    mat = np.atleast_2d(mat)
    if not np.all(np.isfinite(mat)):
        raise SchemaError(f"{path}: dataset contains non-finite values")
    return mat


def load_dataset(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Load features and, if the JSON schema carries them, supplied targets."""
    path = Path(path)
    targets = None
    if path.suffix.lower() == ".json":
        raw = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(raw, dict) and "targets" in raw:
            targets = np.asarray(raw["targets"], dtype=np.int64).reshape(-1)
    return load_matrix(path), targets


def _check_columns(model: MlpModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.input_dim:
        mode = "preactivated (m)" if model.preactivated else "raw-feature (d)"
        raise DimensionMismatch(
            f"model expects {model.input_dim} columns in {mode} mode, got {X.shape[1]}"
        )
    return X


def forward_relu(model: MlpModel, X: np.ndarray) -> Logits:
    """ReLU forward pass: values[i, c] = sum_j a_cj * max(0, y_j(x_i)) + b_c."""
    X = _check_columns(model, X)
    preacts = X if model.preactivated else X @ model.hidden_weights.T + model.hidden_bias
    hidden = np.maximum(preacts, 0.0)
    return Logits(values=hidden @ model.head_weights.T + model.head_bias)


def relu_decisions(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Decision targets of the original ReLU model (the default target source)."""
    return forward_relu(model, X).decisions


def make_calibration_set(
    model: MlpModel, X: np.ndarray, targets: np.ndarray | None = None
) -> CalibrationSet:
    """Build a CalibrationSet, deriving targets from the ReLU model when absent."""
    X = _check_columns(model, X)
    if targets is None:
        return CalibrationSet(X, relu_decisions(model, X), "relu_decisions")
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if targets.size and (targets.min() < 0 or targets.max() >= model.n_classes):
        raise SchemaError(
            f"supplied targets outside [0, {model.n_classes})"
        )
    return CalibrationSet(X, targets, "supplied")
