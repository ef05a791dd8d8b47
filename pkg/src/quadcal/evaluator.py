"""Plaintext evaluation of polynomialized models and agreement diagnostics.

``forward_poly`` applies the shared polynomial per hidden unit and then the
fixed head, which is deliberately a different computational route from the
lifted-statistics algebra used during fitting; the two agree to rounding and
the fitting cascade exploits that as an independent recheck.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch
from .model_io import Logits, MlpModel, _check_columns

# QuadCoeffs lives in cascade; accept any object with alpha/beta/eta or a
# PolyActivation-like object with .coefficients to avoid an import cycle.


@dataclass(frozen=True)
class EvalRecord:
    """Agreement/accuracy diagnostics for one decision vector."""

    decisions: np.ndarray
    agreement_vs_relu: float  # percent
    mismatch_indices: np.ndarray
    accuracy_vs_labels: float | None = None  # percent
    macro_f1: float | None = None
    logits: np.ndarray | None = None
    per_sample_margin: np.ndarray | None = None  # top1 - top2 logit, >= 0


def _activation_coefficients(activation) -> np.ndarray:
    if hasattr(activation, "coefficients"):
        return np.asarray(activation.coefficients, dtype=np.float64).reshape(-1)
    return np.array(
        [float(activation.eta), float(activation.beta), float(activation.alpha)]
    )


def forward_poly(model: MlpModel, activation, X: np.ndarray) -> Logits:
    """Forward pass with every ReLU replaced by the shared polynomial.

    ``activation`` is either a QuadCoeffs (alpha u^2 + beta u + eta) or a
    PolyActivation with ascending power coefficients.
    """
    X = _check_columns(model, X)
    preacts = X if model.preactivated else X @ model.hidden_weights.T + model.hidden_bias
    coeffs = _activation_coefficients(activation)
    acted = np.full_like(preacts, coeffs[-1])
    for c in coeffs[-2::-1]:  # Horner, fixed order
        acted = acted * preacts + c
    return Logits(values=acted @ model.head_weights.T + model.head_bias)


def poly_decisions(model: MlpModel, activation, X: np.ndarray, threshold: float = 0.0) -> np.ndarray:
    """Decisions of the polynomialized model; binary compares against ``threshold``."""
    logits = forward_poly(model, activation, X)
    if model.kind == "binary":
        return (logits.values[:, 0] > threshold).astype(np.int64)
    return logits.decisions


def top_margins(values: np.ndarray) -> np.ndarray:
    """Per-sample top-1 minus top-2 logit (|score| for single-logit models)."""
    values = np.atleast_2d(values)
    if values.shape[1] == 1:
        return np.abs(values[:, 0])
    part = np.partition(values, values.shape[1] - 2, axis=1)
    return part[:, -1] - part[:, -2]


def macro_f1_score(decisions: np.ndarray, labels: np.ndarray) -> float:
    """Unweighted mean of per-class F1; zero-denominator classes score 0."""
    classes = np.union1d(np.unique(labels), np.unique(decisions))
    scores = []
    for c in classes:
        tp = np.sum((decisions == c) & (labels == c))
        fp = np.sum((decisions == c) & (labels != c))
        fn = np.sum((decisions != c) & (labels == c))
        denom = 2 * tp + fp + fn
        scores.append(2.0 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def evaluate(
    decisions: np.ndarray,
    reference_decisions: np.ndarray,
    labels: np.ndarray | None = None,
    logits: np.ndarray | None = None,
) -> EvalRecord:
    """Agreement of ``decisions`` against ``reference_decisions`` plus optional
    ground-truth accuracy and macro-F1."""
    decisions = np.asarray(decisions, dtype=np.int64).reshape(-1)
    reference = np.asarray(reference_decisions, dtype=np.int64).reshape(-1)
    if decisions.shape[0] != reference.shape[0]:
        raise LengthMismatch(
            f"{decisions.shape[0]} decisions vs {reference.shape[0]} references"
        )
    n = decisions.shape[0]
    mismatches = np.flatnonzero(decisions != reference)
    agreement = 100.0 * (n - mismatches.shape[0]) / n
    accuracy = None
    f1 = None
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != n:
            raise LengthMismatch(f"{labels.shape[0]} labels for {n} decisions")
        accuracy = 100.0 * float(np.mean(decisions == labels))
        f1 = macro_f1_score(decisions, labels)
    return EvalRecord(
        decisions=decisions,
        agreement_vs_relu=agreement,
        mismatch_indices=mismatches,
        accuracy_vs_labels=accuracy,
        macro_f1=f1,
        logits=logits,
        per_sample_margin=top_margins(logits) if logits is not None else None,
    )
