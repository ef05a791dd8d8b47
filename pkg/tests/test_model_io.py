"""Model/dataset I/O and the reference ReLU forward pass."""

import json

import numpy as np
import pytest

from quadcal.errors import DimensionMismatch, NonFiniteWeight, SchemaError
from quadcal.model_io import (
    CalibrationSet,
    MlpModel,
    forward_relu,
    load_dataset,
    load_model,
    make_calibration_set,
    relu_decisions,
    save_model,
)

from conftest import random_binary_model, random_multiclass_model


def write_model(path, **fields):
    path.write_text(json.dumps(fields), encoding="utf-8")
    return path


class TestLoadModel:
    def test_minimal_binary_identity(self, tmp_path):
        p = write_model(
            tmp_path / "m.json",
            kind="binary",
            hidden_weights=[[1.0]],
            hidden_bias=[0.0],
            head_weights=[[1.0]],
            head_bias=[0.0],
        )
        model = load_model(p)
        assert model.kind == "binary" and model.m == 1 and model.input_dim == 1

    def test_k3_head_with_binary_kind_rejected(self, tmp_path):
        p = write_model(
            tmp_path / "bad.json",
            kind="binary",
            hidden_weights=[[1.0], [0.0], [0.0]],
            hidden_bias=[0.0, 0.0, 0.0],
            head_weights=[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            head_bias=[0.0, 0.0, 0.0],
        )
        with pytest.raises(SchemaError):
            load_model(p)

    def test_preactivated_multiclass(self, tmp_path):
        p = write_model(
            tmp_path / "pre.json",
            kind="multiclass",
            preactivated=True,
            head_weights=np.eye(3, 4).tolist(),
            head_bias=[0.0, 0.0, 0.0],
        )
        model = load_model(p)
        assert model.preactivated and model.m == 4 and model.n_classes == 3

    def test_nonfinite_rejected(self, tmp_path):
        p = write_model(
            tmp_path / "nan.json",
            kind="binary",
            hidden_weights=[[float("nan")]],
            hidden_bias=[0.0],
            head_weights=[[1.0]],
            head_bias=[0.0],
        )
        with pytest.raises(NonFiniteWeight):
            load_model(p)

    def test_missing_field(self, tmp_path):
        p = (tmp_path / "x.json")
        p.write_text('{"kind": "binary"}', encoding="utf-8")
        with pytest.raises(SchemaError):
            load_model(p)

    def test_shape_mismatch(self, tmp_path):
        p = write_model(
            tmp_path / "shape.json",
            kind="binary",
            hidden_weights=[[1.0, 2.0]],
            hidden_bias=[0.0, 0.0],  # length 2 vs one hidden row
            head_weights=[[1.0]],
            head_bias=[0.0],
        )
        with pytest.raises(SchemaError):
            load_model(p)


class TestRoundTrip:
    def test_save_load_identical_decisions(self, tmp_path, rng):
        model = random_multiclass_model(rng)
        X = rng.normal(size=(50, 8))
        save_model(model, tmp_path / "m.json")
        reloaded = load_model(tmp_path / "m.json")
        np.testing.assert_array_equal(reloaded.head_weights, model.head_weights)
        np.testing.assert_array_equal(reloaded.hidden_weights, model.hidden_weights)
        np.testing.assert_array_equal(
            forward_relu(reloaded, X).decisions, forward_relu(model, X).decisions
        )
        # a second save round-trips byte-identically
        save_model(reloaded, tmp_path / "m2.json")
        assert (tmp_path / "m.json").read_bytes() == (tmp_path / "m2.json").read_bytes()


class TestForwardRelu:
    def test_hand_binary_score(self):
        model = MlpModel(
            kind="binary", preactivated=True, head_weights=[[1.0, 1.0]], head_bias=[1.0]
        )
        out = forward_relu(model, [[1.0, 2.0]])
        assert out.values[0, 0] == 4.0

    def test_relu_zeroes_negatives(self):
        model = MlpModel(
            kind="binary", preactivated=True, head_weights=[[1.0, 1.0]], head_bias=[0.5]
        )
        out = forward_relu(model, [[-1.0, -2.0]])
        assert out.values[0, 0] == 0.5

    def test_tie_breaks_to_lowest_class(self):
        model = MlpModel(
            kind="multiclass",
            preactivated=True,
            head_weights=[[0.0, 0.0], [0.0, 0.0]],
            head_bias=[0.0, 0.0],
        )
        out = forward_relu(model, [[1.0, 1.0]])
        assert out.decisions[0] == 0

    def test_dimension_mismatch(self, rng):
        model = random_binary_model(rng)
        with pytest.raises(DimensionMismatch):
            forward_relu(model, rng.normal(size=(3, model.input_dim + 1)))


class TestReluDecisions:
    def test_positive_score_is_one(self):
        model = MlpModel(kind="binary", preactivated=True, head_weights=[[1.0]], head_bias=[0.0])
        assert relu_decisions(model, [[2.0]])[0] == 1

    def test_zero_score_is_negative_class(self):
        # fixed-zero convention: positive means strictly greater than zero
        model = MlpModel(kind="binary", preactivated=True, head_weights=[[1.0]], head_bias=[0.0])
        assert relu_decisions(model, [[0.0]])[0] == 0
        assert relu_decisions(model, [[-1.0]])[0] == 0

    def test_three_class_argmax(self):
        model = MlpModel(
            kind="multiclass", preactivated=True, head_weights=np.eye(3).tolist(),
            head_bias=[0.0, 0.0, 0.0],
        )
        assert relu_decisions(model, [[1.0, 3.0, 2.0]])[0] == 1

    def test_deterministic_and_permutation_equivariant(self, rng):
        model = random_multiclass_model(rng)
        X = rng.normal(size=(40, 8))
        base = relu_decisions(model, X)
        np.testing.assert_array_equal(base, relu_decisions(model, X))
        perm = rng.permutation(40)
        np.testing.assert_array_equal(relu_decisions(model, X[perm]), base[perm])


class TestPreactivatedEquivalence:
    def test_matches_identity_hidden_model(self, rng):
        k, m = 3, 6
        head = rng.normal(size=(k, m))
        bias = rng.normal(size=k)
        pre = MlpModel(kind="multiclass", preactivated=True, head_weights=head, head_bias=bias)
        full = MlpModel(
            kind="multiclass",
            hidden_weights=np.eye(m),
            hidden_bias=np.zeros(m),
            head_weights=head,
            head_bias=bias,
        )
        Y = rng.normal(size=(30, m))
        np.testing.assert_array_equal(
            forward_relu(pre, Y).values, forward_relu(full, Y).values
        )


class TestDatasets:
    def test_csv_and_json_detection(self, tmp_path):
        (tmp_path / "d.csv").write_text("1.0,2.0\n3.0,4.0\n", encoding="utf-8")
        X, targets = load_dataset(tmp_path / "d.csv")
        assert X.shape == (2, 2) and targets is None
        (tmp_path / "d.json").write_text(
            json.dumps({"features": [[1.0, 2.0]], "targets": [1]}), encoding="utf-8"
        )
        X2, t2 = load_dataset(tmp_path / "d.json")
        assert X2.shape == (1, 2) and t2.tolist() == [1]

    def test_supplied_targets_range_checked(self, rng):
        model = random_multiclass_model(rng, k=3)
        X = rng.normal(size=(4, 8))
        with pytest.raises(SchemaError):
            make_calibration_set(model, X, targets=[0, 1, 2, 3])
        cal = make_calibration_set(model, X, targets=[0, 1, 2, 0])
        assert cal.target_source == "supplied"

    def test_default_targets_are_relu_decisions(self, rng):
        model = random_multiclass_model(rng)
        X = rng.normal(size=(10, 8))
        cal = make_calibration_set(model, X)
        assert cal.target_source == "relu_decisions"
        np.testing.assert_array_equal(cal.targets, relu_decisions(model, X))

    def test_calibration_set_invariants(self):
        with pytest.raises(DimensionMismatch):
            CalibrationSet(features=[[1.0], [2.0]], targets=[0])
