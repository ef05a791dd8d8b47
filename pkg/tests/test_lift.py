"""Lifted statistics: planar binary lift and multiclass pairwise rows."""

import numpy as np
import pytest

from quadcal.errors import KindMismatch
from quadcal.lift import binary_lift, class_stats, hidden_preacts, pairwise_lifts
from quadcal.model_io import MlpModel, forward_relu

from conftest import random_binary_model, random_multiclass_model


class TestHiddenPreacts:
    def test_preactivated_passthrough(self):
        model = MlpModel(kind="binary", preactivated=True, head_weights=[[1.0, 0.0]], head_bias=[0.0])
        X = np.array([[2.0, 1.0]])
        np.testing.assert_array_equal(hidden_preacts(model, X), X)

    def test_affine_map(self):
        model = MlpModel(
            kind="binary",
            hidden_weights=[[1.0, 0.0], [0.0, 1.0]],
            hidden_bias=[1.0, -1.0],
            head_weights=[[1.0, 1.0]],
            head_bias=[0.0],
        )
        np.testing.assert_array_equal(hidden_preacts(model, [[0.0, 0.0]]), [[1.0, -1.0]])

    def test_single_unit(self):
        model = MlpModel(
            kind="binary", hidden_weights=[[2.0, 3.0]], hidden_bias=[0.0],
            head_weights=[[1.0]], head_bias=[0.0],
        )
        np.testing.assert_array_equal(hidden_preacts(model, [[1.0, 1.0]]), [[5.0]])


class TestBinaryLift:
    def test_weighted_squares_and_affine(self):
        model = MlpModel(kind="binary", preactivated=True, head_weights=[[2.0, 1.0]], head_bias=[0.5])
        cloud = binary_lift(model, [[1.0, -1.0]], [1])
        np.testing.assert_array_equal(cloud.points, [[3.0, 1.5]])
        assert cloud.weight_sum == 3.0

    def test_signed_weights(self):
        model = MlpModel(kind="binary", preactivated=True, head_weights=[[1.0, -1.0]], head_bias=[0.0])
        cloud = binary_lift(model, [[2.0, 1.0]], [0])
        np.testing.assert_array_equal(cloud.points, [[3.0, 1.0]])
        assert cloud.weight_sum == 0.0
        assert cloud.labels[0] == -1

    def test_zero_preacts(self):
        model = MlpModel(kind="binary", preactivated=True, head_weights=[[1.0, 1.0]], head_bias=[0.5])
        cloud = binary_lift(model, [[0.0, 0.0]], [1])
        np.testing.assert_array_equal(cloud.points, [[0.0, 0.5]])

    def test_kind_checked(self, rng):
        model = random_multiclass_model(rng)
        with pytest.raises(KindMismatch):
            binary_lift(model, rng.normal(size=(3, 16)), np.zeros(3, dtype=int))


class TestClassStats:
    def test_unit_heads(self):
        model = MlpModel(
            kind="multiclass", preactivated=True,
            head_weights=[[1.0, 0.0], [0.0, 1.0]], head_bias=[0.0, 0.0],
        )
        stats = class_stats(model, [[2.0, 3.0]])
        np.testing.assert_array_equal(stats.Q, [[4.0, 9.0]])
        np.testing.assert_array_equal(stats.L, [[2.0, 3.0]])
        np.testing.assert_array_equal(stats.B, [1.0, 1.0])

    def test_zero_preacts_keep_B(self):
        model = MlpModel(
            kind="multiclass", preactivated=True,
            head_weights=[[1.0, 2.0], [3.0, 4.0]], head_bias=[0.0, 0.0],
        )
        stats = class_stats(model, [[0.0, 0.0]])
        assert stats.Q.sum() == 0.0 and stats.L.sum() == 0.0
        np.testing.assert_array_equal(stats.B, [3.0, 7.0])

    def test_single_class_row(self):
        model = MlpModel(
            kind="multiclass", preactivated=True,
            head_weights=[[1.0, 1.0], [0.0, 0.0]], head_bias=[0.0, 0.0],
        )
        stats = class_stats(model, [[1.0, -2.0]])
        assert stats.Q[0, 0] == 5.0 and stats.L[0, 0] == -1.0


class TestPairwiseLifts:
    def test_two_class_row(self):
        model = MlpModel(
            kind="multiclass", preactivated=True,
            head_weights=[[1.0, 0.0], [0.0, 1.0]], head_bias=[0.5, 0.0],
        )
        # engineered so Q=(3,1), L=(2,0) on the single sample
        stats = class_stats(model, [[np.sqrt(3), 1.0]])
        stats.Q[0] = [3.0, 1.0]
        stats.L[0] = [2.0, 0.0]
        stats.B[:] = [1.0, 1.0]
        lifts = pairwise_lifts(stats, [0])
        np.testing.assert_allclose(lifts.rows, [[2.0, 2.0, 0.0, 0.5]])

    def test_identity_activation_margin(self, rng):
        # with (alpha, beta, eta) = (0, 1, 0) the margin reduces to dL + db
        model = random_multiclass_model(rng, k=3)
        X = rng.normal(size=(5, 8))
        stats = class_stats(model, hidden_preacts(model, X))
        targets = np.argmax(stats.L + stats.head_bias, axis=1)
        lifts = pairwise_lifts(stats, targets)
        margins = lifts.margins(np.array([0.0, 1.0, 0.0, 1.0]))
        np.testing.assert_allclose(
            margins, lifts.rows[:, 1] + lifts.rows[:, 3], rtol=0, atol=0
        )

    def test_row_count_law(self, rng):
        model = random_multiclass_model(rng, k=3)
        X = rng.normal(size=(2, 8))
        stats = class_stats(model, hidden_preacts(model, X))
        lifts = pairwise_lifts(stats, np.array([0, 2]))
        assert lifts.n_rows == 4
        assert lifts.index.tolist() == [[0, 1], [0, 2], [1, 0], [1, 1]]


class TestConsistencyProperties:
    def test_multiclass_margin_identity(self, rng):
        """Affine lift-row margins equal direct replaced-logit differences."""
        for _ in range(5):
            model = random_multiclass_model(rng, m=10, d=6, k=4)
            X = rng.normal(size=(20, 6))
            preacts = hidden_preacts(model, X)
            stats = class_stats(model, preacts)
            targets = forward_relu(model, X).decisions
            lifts = pairwise_lifts(stats, targets)
            alpha, beta, eta = rng.normal(size=3)
            logits = (
                alpha * stats.Q + beta * stats.L + eta * stats.B + stats.head_bias
            )
            direct = (
                logits[np.arange(20), targets][:, None]
                - logits[np.arange(20)[:, None], lifts.index[:, 1].reshape(20, 3)]
            ).reshape(-1)
            affine = lifts.margins(np.array([alpha, beta, eta, 1.0]))
            np.testing.assert_allclose(affine, direct, rtol=1e-9, atol=1e-9)

    def test_binary_score_identity(self, rng):
        """alpha Q + beta H + (1-beta) b + eta B equals the replaced score."""
        for _ in range(5):
            model = random_binary_model(rng)
            X = rng.normal(size=(15, 5))
            preacts = hidden_preacts(model, X)
            targets = forward_relu(model, X).decisions
            cloud = binary_lift(model, preacts, targets)
            alpha, beta, eta = rng.normal(size=3)
            a = model.head_weights[0]
            direct = (alpha * preacts**2 + beta * preacts + eta) @ a + model.head_bias[0]
            via_lift = (
                alpha * cloud.points[:, 0]
                + beta * cloud.points[:, 1]
                + (1 - beta) * cloud.head_bias
                + eta * cloud.weight_sum
            )
            np.testing.assert_allclose(via_lift, direct, rtol=1e-9, atol=1e-12)

    def test_head_scaling_scales_lifts_and_margins(self, rng):
        model = random_multiclass_model(rng, k=3)
        s = 2.5
        scaled = MlpModel(
            kind="multiclass",
            hidden_weights=model.hidden_weights,
            hidden_bias=model.hidden_bias,
            head_weights=model.head_weights * s,
            head_bias=model.head_bias * s,
        )
        X = rng.normal(size=(10, 8))
        preacts = hidden_preacts(model, X)
        targets = forward_relu(model, X).decisions
        lifts = pairwise_lifts(class_stats(model, preacts), targets)
        lifts_s = pairwise_lifts(class_stats(scaled, preacts), targets)
        np.testing.assert_allclose(lifts_s.rows, s * lifts.rows, rtol=1e-12)
        np.testing.assert_array_equal(
            forward_relu(scaled, X).decisions, forward_relu(model, X).decisions
        )
