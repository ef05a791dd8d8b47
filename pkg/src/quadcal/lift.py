"""Lifted statistics through which a shared quadratic can move the scores.

Binary models lift to planar points (Q_i, H_i); multiclass models lift each
sample-competitor pair to a four-vector (dQ, dL, dB, db) whose inner product
with the homogeneous coefficient vector is the pairwise logit margin.  The
linear statistic stored is always bias-free, so the fourth coordinate is
exactly the output-bias difference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, KindMismatch
from .model_io import MlpModel, _check_columns


@dataclass(frozen=True)
class BinaryLiftCloud:
    """Per-sample planar lift (Q_i, H_i) with sign labels and head constants."""

    points: np.ndarray  # (n, 2)
    labels: np.ndarray  # (n,) in {-1, +1}
    weight_sum: float  # B = sum_j a_j
    head_bias: float  # b

    def split(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (S_plus, S_minus) point arrays."""
        pos = self.labels > 0
        return self.points[pos], self.points[~pos]


@dataclass(frozen=True)
class ClassStats:
    """Class-wise weighted-square / bias-free-linear statistics.

    Q[i, c] = sum_j a_cj y_j(x_i)^2, L[i, c] = sum_j a_cj y_j(x_i),
    B[c] = sum_j a_cj.  The affine statistic H_c = L_c + b_c is never stored.
    """

    Q: np.ndarray  # (n, K)
    L: np.ndarray  # (n, K)
    B: np.ndarray  # (K,)
    head_bias: np.ndarray  # (K,)


@dataclass(frozen=True)
class PairwiseLiftSet:
    """Rows (dQ, dL, dB, db), one per (sample, competitor != target) pair.

    Rows are grouped by sample, competitors in ascending class order, so the
    rows for sample i occupy the contiguous block [i*(K-1), (i+1)*(K-1)).
    """

    rows: np.ndarray  # (P, 4)
    index: np.ndarray  # (P, 2) of (sample, competitor)
    n_samples: int
    n_classes: int

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=np.float64))
        index = np.atleast_2d(np.asarray(self.index, dtype=np.int64))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "index", index)
        expected = self.n_samples * (self.n_classes - 1)
        if rows.shape != (expected, 4) or index.shape != (expected, 2):
            raise DimensionMismatch(
                f"lift set needs {expected} rows of width 4, got rows {rows.shape}"
            )

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    def margins(self, theta_bar: np.ndarray) -> np.ndarray:
        """Homogeneous margins theta_bar . z for every row."""
        return self.rows @ np.asarray(theta_bar, dtype=np.float64)

    def sample_min_margins(self, theta_bar: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-sample (min margin, row index attaining it; lowest class wins ties)."""
        per_pair = self.margins(theta_bar).reshape(self.n_samples, self.n_classes - 1)
        offs = np.argmin(per_pair, axis=1)  # argmin takes the first = lowest class
        rows = np.arange(self.n_samples) * (self.n_classes - 1) + offs
        return per_pair[np.arange(self.n_samples), offs], rows


def hidden_preacts(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Hidden pre-activations y[i, j]; passes X through unchanged when preactivated."""
    X = _check_columns(model, X)
    if model.preactivated:
        return X
    return X @ model.hidden_weights.T + model.hidden_bias


def binary_lift(model: MlpModel, preacts: np.ndarray, targets: np.ndarray) -> BinaryLiftCloud:
    """Planar lift of a binary model: Q = sum a_j y_j^2, H = sum a_j y_j + b."""
    if model.kind != "binary":
        raise KindMismatch("binary_lift requires a binary model")
    preacts = np.atleast_2d(np.asarray(preacts, dtype=np.float64))
    if preacts.shape[1] != model.m:
        raise DimensionMismatch(f"preacts have {preacts.shape[1]} columns, model m={model.m}")
    a = model.head_weights[0]
    b = float(model.head_bias[0])
    q = (preacts * preacts) @ a
    h = preacts @ a + b
    labels = np.where(np.asarray(targets, dtype=np.int64).reshape(-1) > 0, 1, -1)
    if labels.shape[0] != preacts.shape[0]:
        raise DimensionMismatch("targets length does not match preacts")
    return BinaryLiftCloud(
        points=np.column_stack([q, h]),
        labels=labels,
        weight_sum=float(a.sum()),
        head_bias=b,
    )


def class_stats(model: MlpModel, preacts: np.ndarray) -> ClassStats:
    """Class-wise lift statistics for a multiclass head."""
    if model.kind != "multiclass":
        raise KindMismatch("class_stats requires a multiclass model")
    preacts = np.atleast_2d(np.asarray(preacts, dtype=np.float64))
    if preacts.shape[1] != model.m:
        raise DimensionMismatch(f"preacts have {preacts.shape[1]} columns, model m={model.m}")
    A = model.head_weights
    return ClassStats(
        Q=(preacts * preacts) @ A.T,
        L=preacts @ A.T,
        B=A.sum(axis=1),
        head_bias=model.head_bias.copy(),
    )


def pairwise_lifts(stats: ClassStats, targets: np.ndarray) -> PairwiseLiftSet:
    """Target-minus-competitor rows for every (sample, competitor) pair."""
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    n, K = stats.Q.shape
    if K < 2:
        raise KindMismatch("pairwise lifts need at least two classes")
    if targets.shape[0] != n:
        raise DimensionMismatch("targets length does not match stats")
    if targets.min() < 0 or targets.max() >= K:
        raise DimensionMismatch(f"targets outside [0, {K})")

    # competitors[i] = all classes except targets[i], ascending
    all_classes = np.broadcast_to(np.arange(K), (n, K))
    keep = all_classes != targets[:, None]
    comp = all_classes[keep].reshape(n, K - 1)
    sample = np.repeat(np.arange(n), K - 1)
    comp_flat = comp.reshape(-1)

    rows = np.empty((n * (K - 1), 4), dtype=np.float64)
    t_idx = (np.arange(n), targets)
    rows[:, 0] = np.repeat(stats.Q[t_idx], K - 1) - stats.Q[sample, comp_flat]
    rows[:, 1] = np.repeat(stats.L[t_idx], K - 1) - stats.L[sample, comp_flat]
    rows[:, 2] = np.repeat(stats.B[targets], K - 1) - stats.B[comp_flat]
    rows[:, 3] = np.repeat(stats.head_bias[targets], K - 1) - stats.head_bias[comp_flat]
    return PairwiseLiftSet(
        rows=rows,
        index=np.column_stack([sample, comp_flat]),
        n_samples=n,
        n_classes=K,
    )


def save_lift_cache(path, obj: BinaryLiftCloud | PairwiseLiftSet) -> None:
    """Persist lifted statistics beside reports (JSON matrix schema)."""
    if isinstance(obj, BinaryLiftCloud):
        doc = {
            "lift_kind": "binary",
            "points": obj.points.tolist(),
            "labels": obj.labels.tolist(),
            "weight_sum": obj.weight_sum,
            "head_bias": obj.head_bias,
        }
    else:
        doc = {
            "lift_kind": "pairwise",
            "rows": obj.rows.tolist(),
            "index": obj.index.tolist(),
            "n_samples": obj.n_samples,
            "n_classes": obj.n_classes,
        }
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def load_lift_cache(path) -> BinaryLiftCloud | PairwiseLiftSet:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc["lift_kind"] == "binary":
        return BinaryLiftCloud(
            points=np.asarray(doc["points"], dtype=np.float64),
            labels=np.asarray(doc["labels"], dtype=np.int64),
            weight_sum=float(doc["weight_sum"]),
            head_bias=float(doc["head_bias"]),
        )
    return PairwiseLiftSet(
        rows=np.asarray(doc["rows"], dtype=np.float64),
        index=np.asarray(doc["index"], dtype=np.int64),
        n_samples=int(doc["n_samples"]),
        n_classes=int(doc["n_classes"]),
    )
