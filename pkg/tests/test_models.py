"""Classifier families, parameter accounting and the checkpoint registry."""

import json

import numpy as np
import pytest
from pydantic import ValidationError

from tsd_lab.domain.enums import ModelFamily, ModelRole
from tsd_lab.domain.errors import ShapeError
from tsd_lab.domain.model_schemas import ModelSpec
from tsd_lab.ml.autograd import conv1d
from tsd_lab.ml.models import (
    ModelParams,
    ModelRegistry,
    build_model,
    declared_parameter_count,
    forward,
    forward_chunked,
    load_checkpoint,
    parameter_count,
    save_checkpoint,
)
from tsd_lab.ml.models.factory import get_classifier
from tsd_lab.ml.serving import predict


def all_specs() -> list[ModelSpec]:
    return [
        ModelSpec(family=ModelFamily.FCN, num_blocks=3, width=4, num_classes=3, input_length=20),
        ModelSpec(family=ModelFamily.LSTM, num_blocks=2, width=5, num_classes=2, input_length=12),
        ModelSpec(family=ModelFamily.LINEAR, num_classes=4, input_length=10),
    ]


class TestModelSpec:
    def test_default_fcn_kernels_follow_block_count(self):
        spec = ModelSpec(family=ModelFamily.FCN, num_blocks=2, width=4, num_classes=2, input_length=16)
        assert spec.effective_kernel_sizes == (8, 5)

    def test_kernel_count_must_match_blocks(self):
        with pytest.raises(ValidationError):
            ModelSpec(family=ModelFamily.FCN, num_blocks=2, kernel_sizes=(3,), num_classes=2, input_length=16)

    def test_single_class_rejected(self):
        with pytest.raises(ValidationError):
            ModelSpec(family=ModelFamily.LINEAR, num_classes=1, input_length=4)

    def test_labels(self):
        assert ModelSpec(family=ModelFamily.FCN, num_blocks=2, width=4, num_classes=2, input_length=16).label == "FCN2-4"
        assert ModelSpec(family=ModelFamily.LINEAR, num_classes=2, input_length=4).label == "LINEAR"


class TestBuildAndForward:
    @pytest.mark.parametrize("spec", all_specs(), ids=lambda s: s.family.value)
    def test_same_seed_same_parameters(self, spec):
        a, b = build_model(spec, seed=7), build_model(spec, seed=7)
        for name in a:
            np.testing.assert_array_equal(a[name].data, b[name].data)

    @pytest.mark.parametrize("spec", all_specs(), ids=lambda s: s.family.value)
    def test_logit_shape_and_duplicate_rows(self, spec, rng):
        params = build_model(spec, seed=1)
        row = rng.normal(size=(1, 1, spec.input_length))
        logits = forward(params, np.concatenate([row, row]))
        assert logits.shape == (2, spec.num_classes)
        assert np.isfinite(logits.data).all()
        np.testing.assert_array_equal(logits.data[0], logits.data[1])

    @pytest.mark.parametrize("family", [ModelFamily.FCN, ModelFamily.LINEAR])
    def test_zero_parameters_give_zero_logits(self, family, rng):
        spec = ModelSpec(family=family, num_blocks=2, width=3, num_classes=3, input_length=16)
        params = build_model(spec, seed=0)
        for tensor in params.tensors.values():
            tensor.data[...] = 0.0
        np.testing.assert_array_equal(forward(params, rng.normal(size=(4, 1, 16))).data, np.zeros((4, 3)))

    def test_linear_matches_hand_product(self, make_linear):
        weight = np.array([[1.0, -2.0, 0.5], [0.0, 3.0, -1.0]])
        params = make_linear(weight, bias=np.array([0.25, -0.5]))
        x = np.array([2.0, 1.0, 4.0])
        expected = weight @ x + np.array([0.25, -0.5])
        np.testing.assert_allclose(forward(params, x[np.newaxis, np.newaxis]).data[0], expected)

    def test_wrong_length_raises_shape_error(self):
        params = build_model(ModelSpec(family=ModelFamily.LINEAR, num_classes=2, input_length=5), seed=0)
        with pytest.raises(ShapeError) as excinfo:
            forward(params, np.zeros((1, 1, 6)))
        assert excinfo.value.axis == "length"

    def test_chunked_forward_matches_single_pass(self, fcn_spec, rng):
        params = build_model(fcn_spec, seed=2)
        x = rng.normal(size=(9, 1, fcn_spec.input_length))
        np.testing.assert_allclose(forward_chunked(params, x, chunk_size=4).data, forward(params, x).data, atol=1e-12)

    def test_frozen_view_shares_values(self, fcn_spec):
        params = build_model(fcn_spec, seed=2)
        frozen = params.frozen()
        assert not frozen.requires_grad
        assert frozen["head.weight"].data is params["head.weight"].data


class TestParameterCount:
    def test_empty_params(self, fcn_spec):
        assert parameter_count(ModelParams(spec=fcn_spec)) == 0

    def test_linear_counts(self):
        assert parameter_count(build_model(ModelSpec(family=ModelFamily.LINEAR, num_classes=2, input_length=4), 0)) == 10
        assert parameter_count(build_model(ModelSpec(family=ModelFamily.LINEAR, num_classes=5, input_length=100), 0)) == 505

    def test_lstm_closed_form(self):
        n, h, c = 1, 8, 3
        spec = ModelSpec(family=ModelFamily.LSTM, num_blocks=1, width=h, num_classes=c, input_length=10)
        assert parameter_count(build_model(spec, 0)) == 4 * (n * h + h * h + 2 * h) + h * c + c

    def test_fcn_enumeration_matches_tensors(self):
        spec = ModelSpec(family=ModelFamily.FCN, num_blocks=2, width=4, kernel_sizes=(3, 3), num_classes=2, input_length=16)
        shapes = get_classifier(spec.family).parameter_shapes(spec)
        enumerated = sum(int(np.prod(shape)) for shape in shapes.values())
        # conv 4*1*3 + 4*4*3, scale/shift 2*(4+4), head 2*4 + 2
        assert enumerated == 12 + 48 + 16 + 10
        assert parameter_count(build_model(spec, 0)) == enumerated == declared_parameter_count(spec)

    def test_architecture_info(self):
        spec = ModelSpec(family=ModelFamily.FCN, num_blocks=2, width=4, kernel_sizes=(3, 3), num_classes=2, input_length=16)
        info = get_classifier(spec.family).get_info(spec)
        assert info == {"family": "FCN", "label": "FCN2-4", "num_parameters": 86, "num_tensors": 8}


class TestFCNPadding:
    @pytest.mark.parametrize("k,expected", [(3, 16), (5, 16), (8, 17), (2, 17)])
    def test_block_output_length(self, k, expected, rng):
        out = conv1d(rng.normal(size=(1, 1, 16)), rng.normal(size=(2, 1, k)), stride=1, padding=k // 2)
        assert out.shape == (1, 2, expected)

    def test_even_kernels_still_pool_to_logits(self, rng):
        spec = ModelSpec(family=ModelFamily.FCN, num_blocks=3, width=2, kernel_sizes=(8, 5, 2), num_classes=3, input_length=16)
        logits = forward(build_model(spec, 0), rng.normal(size=(4, 1, 16)))
        assert logits.shape == (4, 3)


class TestCheckpoints:
    @pytest.mark.parametrize("spec", all_specs(), ids=lambda s: s.family.value)
    def test_round_trip_is_bitwise(self, spec, tmp_path):
        params = build_model(spec, seed=11)
        path = save_checkpoint(params, tmp_path / "model.json", metadata={"seed": 11})
        loaded, metadata = load_checkpoint(path)
        assert loaded.spec == spec
        assert metadata == {"seed": 11}
        for name in params:
            np.testing.assert_array_equal(loaded[name].data, params[name].data)

    def test_tampered_shape_rejected(self, tmp_path):
        params = build_model(ModelSpec(family=ModelFamily.LINEAR, num_classes=2, input_length=3), seed=0)
        path = save_checkpoint(params, tmp_path / "model.json")
        document = json.loads(path.read_text())
        document["tensors"]["head.bias"]["shape"] = [3]
        document["tensors"]["head.bias"]["values"] = [0.0, 0.0, 0.0]
        path.write_text(json.dumps(document))
        with pytest.raises(ValueError):
            load_checkpoint(path)


class TestModelRegistry:
    def test_register_and_reload_from_index(self, tmp_path, fcn_spec):
        params = build_model(fcn_spec, seed=3)
        registry = ModelRegistry(tmp_path)
        registry.register("CBF/teacher", params, ModelRole.TEACHER, "models/CBF/teacher.json", {"seed": 3})
        registry.register("CBF/students/a", build_model(fcn_spec, seed=4), ModelRole.STUDENT, "models/CBF/a.json")

        reopened = ModelRegistry(tmp_path)
        assert [info.name for info in reopened.list_models(ModelRole.TEACHER)] == ["CBF/teacher"]
        assert reopened.get_info("CBF/teacher").metadata == {"seed": 3}
        assert not reopened.is_loaded("CBF/teacher")
        loaded = reopened.load_sync("CBF/teacher")
        np.testing.assert_array_equal(loaded["head.weight"].data, params["head.weight"].data)
        assert reopened.is_loaded("CBF/teacher")

    def test_unknown_model_raises(self, tmp_path):
        with pytest.raises(KeyError):
            ModelRegistry(tmp_path).load_sync("missing")

    @pytest.mark.asyncio
    async def test_reloaded_model_predicts_identically(self, tmp_path, fcn_spec, cbf_splits):
        _, _, test = cbf_splits
        params = build_model(fcn_spec, seed=3)
        ModelRegistry(tmp_path).register("teacher", params, ModelRole.TEACHER, "models/teacher.json")
        result = predict(await ModelRegistry(tmp_path).load("teacher"), test, name="teacher")
        expected = predict(params, test)
        np.testing.assert_array_equal(result.logits, expected.logits)
        np.testing.assert_allclose(result.probabilities, expected.probabilities)
        np.testing.assert_allclose(result.probabilities.sum(axis=1), 1.0)
        assert result.predictions.shape == (len(test),)
