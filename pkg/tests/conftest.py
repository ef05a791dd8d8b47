"""Shared deterministic instance generators for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from quadcal.lift import PairwiseLiftSet
from quadcal.model_io import MlpModel


def planar_instance(seed: int):
    """Seeded planar two-class instance.

    Cycles through three flavors: cleanly separable (the positive cloud is
    shifted past the negative one with a guaranteed gap), deeply overlapping
    (centroid-matched plus one exactly shared point), and touching (hulls
    share exactly one bitwise-equal vertex).  The shared points make the
    infeasible flavors exact rather than float-fuzzy.
    """
    rng = np.random.default_rng(seed)
    kind = ("separable", "overlapping", "touching")[seed % 3]
    n1 = int(rng.integers(1, 51))
    n2 = int(rng.integers(1, 51))
    sp = rng.normal(size=(n1, 2)) * rng.uniform(0.5, 2.0)
    sm = rng.normal(size=(n2, 2)) * rng.uniform(0.5, 2.0)
    if kind == "separable":
        gap = 0.3 + 0.4 * rng.uniform()
        shift = sm[:, 0].max() - sp[:, 0].min() + gap
        sp = sp + np.array([shift, 0.0])
    elif kind == "overlapping":
        sm = sm + (sp.mean(axis=0) - sm.mean(axis=0))
        sm[int(rng.integers(n2))] = sp[int(rng.integers(n1))]
    else:  # touching: align the extreme x vertices bitwise
        i_max = int(np.argmax(sp[:, 0]))
        j_min = int(np.argmin(sm[:, 0]))
        sm = sm + (sp[i_max] - sm[j_min])
        sm[j_min] = sp[i_max]
    return sp, sm, kind


def make_liftset(rows, n_classes: int) -> PairwiseLiftSet:
    """Wrap raw (dQ, dL, dB, db) rows as a lift set with uniform blocks."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    n = rows.shape[0] // (n_classes - 1)
    idx = np.column_stack(
        [np.repeat(np.arange(n), n_classes - 1), np.tile(np.arange(1, n_classes), n)]
    )
    return PairwiseLiftSet(rows=rows, index=idx, n_samples=n, n_classes=n_classes)


def random_multiclass_model(rng, m=16, d=8, k=5, bias_scale=0.1) -> MlpModel:
    return MlpModel(
        kind="multiclass",
        hidden_weights=rng.normal(size=(m, d)),
        hidden_bias=rng.normal(size=m) * bias_scale,
        head_weights=rng.normal(size=(k, m)),
        head_bias=rng.normal(size=k) * bias_scale,
    )


def random_binary_model(rng, m=8, d=5, bias_scale=0.3) -> MlpModel:
    return MlpModel(
        kind="binary",
        hidden_weights=rng.normal(size=(m, d)),
        hidden_bias=rng.normal(size=m) * bias_scale,
        head_weights=rng.normal(size=(1, m)),
        head_bias=rng.normal(size=1) * bias_scale,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(2026)
