"""Subsequence grids, perturbation, temporal saliency, attribution maps and FGSM."""

import numpy as np
import pytest

from tsd_lab.domain.enums import ModelFamily, SaliencyVariant
from tsd_lab.domain.errors import DatasetError, ShapeError
from tsd_lab.domain.model_schemas import ModelSpec
from tsd_lab.ml.data import TimeSeriesDataset
from tsd_lab.ml.models import build_model, forward
from tsd_lab.ml.saliency import (
    BackgroundSelector,
    batch_temporal_saliency,
    fgsm_batch,
    fgsm_perturb,
    gradient_saliency,
    integrated_gradients,
    integrated_gradients_maps,
    maps_frame,
    normalize_max_abs,
    occlusion_map,
    occlusion_maps,
    perturb,
    perturb_grid,
    temporal_saliency,
)
from tsd_lab.ml.saliency.grid import SubsequenceGrid, make_grid

VARIANTS = list(SaliencyVariant)


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


class TestGrid:
    def test_single_full_width(self):
        assert make_grid(5, 1, 5).pairs == ((0, 5),)

    def test_two_windows_span_the_series(self):
        assert make_grid(10, 2, 3).pairs == ((0, 3), (7, 3))

    def test_default_layout(self):
        grid = make_grid(100, 50, 5)
        assert len(grid) == 50
        assert grid.starts[0] == 0 and grid.starts[-1] == 95
        assert len(set(grid.starts.tolist())) == 50
        assert np.all(np.diff(grid.starts) > 0)

    def test_masks_cover_windows(self):
        masks = make_grid(6, 2, 2).masks()
        np.testing.assert_array_equal(masks, [[1, 1, 0, 0, 0, 0], [0, 0, 0, 0, 1, 1]])

    @pytest.mark.parametrize("args", [(10, 1, 0), (10, 1, 11), (10, 9, 3)])
    def test_invalid_layout(self, args):
        with pytest.raises(ValueError):
            make_grid(*args)

    def test_window_past_the_end_rejected(self):
        with pytest.raises(ValueError):
            SubsequenceGrid(pairs=((8, 3),), series_length=10)


class TestPerturb:
    def test_splices_background_window(self):
        np.testing.assert_array_equal(perturb([1.0, 2.0, 3.0, 4.0], [9.0, 9.0, 9.0, 9.0], 1, 2), [1, 9, 9, 4])

    def test_input_untouched(self):
        x = np.array([1.0, 2.0, 3.0])
        perturb(x, np.zeros(3), 0, 3)
        np.testing.assert_array_equal(x, [1.0, 2.0, 3.0])

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            perturb(np.zeros(4), np.zeros(5), 0, 1)

    def test_window_out_of_range(self):
        with pytest.raises(IndexError):
            perturb(np.zeros(4), np.ones(4), 3, 2)

    def test_grid_matches_single_perturbations(self, rng):
        grid = make_grid(12, 4, 3)
        x, bg = rng.normal(size=(2, 12)), rng.normal(size=(2, 12))
        batch = perturb_grid(x, bg, grid)
        assert batch.shape == (2, 4, 12)
        for g, (t, z) in enumerate(grid.pairs):
            np.testing.assert_array_equal(batch[1, g], perturb(x[1], bg[1], t, z))


class TestBackgroundSelector:
    def test_background_from_another_class(self, cbf_splits):
        train, _, _ = cbf_splits
        selector = BackgroundSelector(train, seed=5)
        for epoch in range(3):
            for index, instance in enumerate(train):
                assert selector.select(instance.label, epoch, index).label != instance.label

    def test_draw_depends_only_on_seed_epoch_index(self, cbf_splits):
        train, _, _ = cbf_splits
        a, b = BackgroundSelector(train, seed=5), BackgroundSelector(train, seed=5)
        assert a.select_index(0, 2, 7) == b.select_index(0, 2, 7)
        batch = a.select_batch(train.labels[:4], epoch=2, indices=np.arange(4))
        assert batch.shape == (4, train.series_length)
        np.testing.assert_array_equal(batch[3], b.select(int(train.labels[3]), 2, 3).values)

    def test_no_opposing_instance(self):
        source = TimeSeriesDataset.from_arrays(np.ones((2, 4)), [0, 0], num_classes=2)
        with pytest.raises(DatasetError):
            BackgroundSelector(source, seed=0).select_index(0, 0, 0)


class TestTemporalSaliency:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_background_equal_to_series_scores_zero(self, variant, fcn_spec, rng):
        model = build_model(fcn_spec, seed=0)
        x = rng.normal(size=fcn_spec.input_length)
        profile = temporal_saliency(model, x, x.copy(), make_grid(fcn_spec.input_length, 6, 4), tau=4.0, variant=variant, target=1)
        np.testing.assert_allclose(profile.values, 0.0, atol=1e-12)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_constant_model_scores_zero(self, variant, make_linear, rng):
        model = make_linear(np.zeros((3, 10)), bias=np.array([0.3, -1.0, 2.0]))
        profile = temporal_saliency(model, rng.normal(size=10), rng.normal(size=10), make_grid(10, 3, 2), 2.0, variant, target=0)
        np.testing.assert_allclose(profile.values, 0.0, atol=1e-12)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_scores_non_negative(self, variant, fcn_spec, rng):
        model = build_model(fcn_spec, seed=4)
        x, bg = rng.normal(size=(5, fcn_spec.input_length)), rng.normal(size=(5, fcn_spec.input_length))
        profile = batch_temporal_saliency(model, x, bg, make_grid(fcn_spec.input_length, 8, 5), 8.0, variant, targets=np.arange(5) % 3)
        assert profile.values.shape == (5, 8)
        assert np.all(profile.values >= 0.0)

    def test_logit_shift_invariance(self, make_linear, rng):
        weight = rng.normal(size=(3, 8))
        grid = make_grid(8, 4, 2)
        x, bg = rng.normal(size=8), rng.normal(size=8)
        plain = temporal_saliency(make_linear(weight), x, bg, grid, 2.0)
        shifted = temporal_saliency(make_linear(weight, bias=np.full(3, 7.5)), x, bg, grid, 2.0)
        np.testing.assert_allclose(shifted.values, plain.values, atol=1e-12)

    def test_huge_temperature_flattens_scores(self, make_linear, rng):
        model = make_linear(rng.normal(size=(2, 8)))
        profile = temporal_saliency(model, rng.normal(size=8), rng.normal(size=8), make_grid(8, 4, 2), tau=1e6)
        assert profile.values.max() < 1e-6

    def test_hand_checked_kl(self, make_linear):
        model = make_linear(np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]]))
        x = np.array([1.0, 0.0, 0.0, 0.0])
        bg = np.array([-1.0, 0.0, 0.0, 0.0])
        profile = temporal_saliency(model, x, bg, make_grid(4, 1, 1), tau=1.0)
        p, q = softmax(np.array([1.0, 0.0])), softmax(np.array([-1.0, 0.0]))
        np.testing.assert_allclose(profile.values, [np.sum(p * np.log(p / q))], rtol=1e-10)

    def test_binary_collapses_to_target_probability(self, make_linear, rng):
        model = make_linear(rng.normal(size=(3, 6)))
        x, bg = rng.normal(size=6), rng.normal(size=6)
        grid = make_grid(6, 1, 6)
        profile = temporal_saliency(model, x, bg, grid, tau=1.0, variant=SaliencyVariant.BINARY, target=2)
        p = softmax(model["head.weight"].data @ x)[2]
        q = softmax(model["head.weight"].data @ bg)[2]
        expected = p * np.log(p / q) + (1 - p) * np.log((1 - p) / (1 - q))
        np.testing.assert_allclose(profile.values, [expected], rtol=1e-10)

    def test_target_scalar_uses_unit_temperature(self, make_linear, rng):
        model = make_linear(rng.normal(size=(2, 6)))
        x, bg = rng.normal(size=6), rng.normal(size=6)
        profile = temporal_saliency(model, x, bg, make_grid(6, 1, 6), tau=8.0, variant=SaliencyVariant.TARGET_SCALAR, target=0)
        assert profile.tau == 1.0
        p = softmax(model["head.weight"].data @ x)[0]
        q = softmax(model["head.weight"].data @ bg)[0]
        np.testing.assert_allclose(profile.values, [abs(p - q)], rtol=1e-10)

    def test_instance_label_is_default_target(self, cbf_splits, fcn_spec):
        train, _, _ = cbf_splits
        model = build_model(fcn_spec, seed=0)
        grid = make_grid(fcn_spec.input_length, 5, 4)
        instance, background = train[0], train[1]
        by_label = temporal_saliency(model, instance, background, grid, 1.0, SaliencyVariant.BINARY)
        explicit = temporal_saliency(model, instance.values, background.values, grid, 1.0, SaliencyVariant.BINARY, instance.label)
        np.testing.assert_array_equal(by_label.values, explicit.values)

    def test_batch_rows_match_single_calls(self, fcn_spec, rng):
        model = build_model(fcn_spec, seed=9)
        grid = make_grid(fcn_spec.input_length, 6, 3)
        x, bg = rng.normal(size=(3, fcn_spec.input_length)), rng.normal(size=(3, fcn_spec.input_length))
        batch = batch_temporal_saliency(model, x, bg, grid, 4.0)
        for i in range(3):
            np.testing.assert_allclose(batch.values[i], temporal_saliency(model, x[i], bg[i], grid, 4.0).values, atol=1e-12)
        np.testing.assert_allclose(batch.mean.data, batch.values.mean(axis=1))

    def test_binary_needs_targets(self, fcn_spec, rng):
        model = build_model(fcn_spec, seed=0)
        x = rng.normal(size=(1, fcn_spec.input_length))
        with pytest.raises(ValueError):
            batch_temporal_saliency(model, x, x, make_grid(fcn_spec.input_length, 2, 2), 1.0, SaliencyVariant.BINARY)

    def test_non_positive_tau(self, fcn_spec, rng):
        model = build_model(fcn_spec, seed=0)
        x = rng.normal(size=fcn_spec.input_length)
        with pytest.raises(ValueError):
            temporal_saliency(model, x, x, make_grid(fcn_spec.input_length, 2, 2), 0.0)


class TestAttribution:
    def test_constant_model_occlusion_is_zero(self, make_linear, rng):
        model = make_linear(np.zeros((2, 7)), bias=np.array([1.0, 0.0]))
        np.testing.assert_array_equal(occlusion_map(model, rng.normal(size=7)), np.zeros(7))

    def test_full_window_scores_every_step_alike(self, make_linear, rng):
        model = make_linear(rng.normal(size=(2, 6)))
        x = rng.normal(size=6)
        scores = occlusion_map(model, x, window=6)
        p = softmax(model["head.weight"].data @ x)
        pred = int(p.argmax())
        drop = p[pred] - softmax(np.zeros(2))[pred]
        np.testing.assert_allclose(scores, np.full(6, drop), rtol=1e-10)

    def test_single_step_occlusion_by_hand(self, make_linear):
        weight = np.array([[2.0, -1.0, 0.5], [0.0, 0.0, 0.0]])
        model = make_linear(weight)
        x = np.array([1.0, 1.0, 1.0])
        p_pred = softmax(weight @ x)[0]
        expected = []
        for t in range(3):
            occluded = x.copy()
            occluded[t] = 0.0
            expected.append(p_pred - softmax(weight @ occluded)[0])
        np.testing.assert_allclose(occlusion_map(model, x), expected, rtol=1e-10)

    def test_occlusion_baseline_value(self, make_linear):
        model = make_linear(np.array([[1.0, 1.0], [0.0, 0.0]]))
        x = np.array([2.0, 2.0])
        np.testing.assert_allclose(occlusion_map(model, x, baseline_value=2.0), [0.0, 0.0], atol=1e-12)

    def test_occlusion_window_bounds(self, make_linear):
        with pytest.raises(ValueError):
            occlusion_maps(make_linear(np.ones((2, 4))), np.zeros((1, 4)), window=5)

    def test_gradient_saliency_of_linear_model(self, make_linear):
        weight = np.array([[1.0, -3.0, 0.5], [-2.0, 0.0, 4.0]])
        x = np.array([0.0, 0.0, 1.0])
        pred = int(np.argmax(weight @ x))
        np.testing.assert_allclose(gradient_saliency(make_linear(weight), x), np.abs(weight[pred]))

    def test_integrated_gradients_of_linear_model(self, make_linear, rng):
        weight = rng.normal(size=(3, 5))
        x, baseline = rng.normal(size=5), rng.normal(size=5)
        pred = int(np.argmax(weight @ x))
        np.testing.assert_allclose(
            integrated_gradients(make_linear(weight), x, baseline, steps=3), (x - baseline) * weight[pred], atol=1e-12
        )

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_integrated_gradients_completeness(self, seed):
        spec = ModelSpec(family=ModelFamily.FCN, num_blocks=2, width=4, num_classes=3, input_length=16)
        model = build_model(spec, seed=seed)
        x = np.random.default_rng(seed).normal(size=(3, 16))
        maps = integrated_gradients_maps(model, x, steps=64)
        logits = forward(model.frozen(), x[:, np.newaxis, :]).data
        base = forward(model.frozen(), np.zeros((3, 1, 16))).data
        rows, pred = np.arange(3), logits.argmax(axis=1)
        gap = maps.sum(axis=1) - (logits[rows, pred] - base[rows, pred])
        # Fresh shifts are zero, so the logit is linear along the path from the zero baseline.
        np.testing.assert_allclose(gap, 0.0, atol=1e-9)

    def test_integrated_gradients_step_count(self, make_linear):
        with pytest.raises(ValueError):
            integrated_gradients(make_linear(np.ones((2, 3))), np.ones(3), steps=0)

    def test_normalize_and_frame(self):
        maps = np.array([[2.0, -4.0, 1.0], [0.0, 0.0, 0.0]])
        normalized = normalize_max_abs(maps)
        np.testing.assert_allclose(normalized, [[0.5, -1.0, 0.25], [0.0, 0.0, 0.0]])
        frame = maps_frame(np.array([7, 9]), normalized)
        assert list(frame.columns) == ["instance_id", "t0", "t1", "t2"]
        assert frame["instance_id"].tolist() == [7, 9]


class TestFGSM:
    def test_zero_epsilon_is_identity(self, fcn_spec, rng):
        model = build_model(fcn_spec, seed=0)
        x = rng.normal(size=(3, fcn_spec.input_length))
        adversarial = fgsm_batch(model, x, np.array([0, 1, 2]), 0.0)
        np.testing.assert_array_equal(adversarial, x)
        assert adversarial is not x

    def test_negative_epsilon(self, make_linear):
        with pytest.raises(ValueError):
            fgsm_perturb(make_linear(np.ones((2, 3))), np.zeros(3), -0.1, label=0)

    def test_step_follows_loss_gradient_sign(self, make_linear):
        # Label 0: dCE/dx = (p0 - 1) * w0, so the step is -epsilon * sign(w0).
        weight = np.array([[1.0, -2.0, 0.5, -0.25], [0.0, 0.0, 0.0, 0.0]])
        x = np.array([0.3, -0.1, 0.2, 0.0])
        adversarial = fgsm_perturb(make_linear(weight), x, 0.1, label=0)
        np.testing.assert_allclose(adversarial - x, -0.1 * np.sign(weight[0]))

    def test_perturbation_size_and_loss_increase(self, fcn_spec, cbf_splits):
        train, _, _ = cbf_splits
        model = build_model(fcn_spec, seed=1)
        adversarial = fgsm_batch(model, train.values, train.labels, 0.05)
        assert np.abs(adversarial - train.values).max() == pytest.approx(0.05)

        def mean_ce(values: np.ndarray) -> float:
            logits = forward(model.frozen(), values[:, np.newaxis, :]).data
            shifted = logits - logits.max(axis=1, keepdims=True)
            log_p = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
            return float(-log_p[np.arange(len(train)), train.labels].mean())

        assert mean_ce(adversarial) > mean_ce(train.values)

    def test_instance_label_is_default(self, fcn_spec, cbf_splits):
        train, _, _ = cbf_splits
        model = build_model(fcn_spec, seed=1)
        np.testing.assert_array_equal(
            fgsm_perturb(model, train[2], 0.1), fgsm_perturb(model, train[2].values, 0.1, label=train[2].label)
        )

    def test_raw_series_needs_label(self, make_linear):
        with pytest.raises(ValueError):
            fgsm_perturb(make_linear(np.ones((2, 3))), np.zeros(3), 0.1)


class TestSaliencyProperties:
    """Randomized (model, instance, grid) draws."""

    @staticmethod
    def draw(rng: np.random.Generator):
        length = int(rng.integers(6, 20))
        num_classes = int(rng.integers(2, 5))
        if rng.uniform() < 0.5:
            spec = ModelSpec(family=ModelFamily.LINEAR, num_classes=num_classes, input_length=length)
        else:
            spec = ModelSpec(family=ModelFamily.FCN, num_blocks=1, width=3, kernel_sizes=(3,), num_classes=num_classes, input_length=length)
        model = build_model(spec, seed=int(rng.integers(1 << 30)))
        width = int(rng.integers(1, length + 1))
        grid = make_grid(length, int(rng.integers(1, length - width + 2)), width)
        return model, grid, rng.normal(size=length), rng.normal(size=length), int(rng.integers(num_classes))

    def test_random_draws(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            model, grid, x, bg, target = self.draw(rng)
            tau = float(rng.choice([0.5, 1.0, 4.0, 8.0]))
            for variant in VARIANTS:
                same = temporal_saliency(model, x, x, grid, tau, variant, target)
                np.testing.assert_allclose(same.values, 0.0, atol=1e-12)
                scores = temporal_saliency(model, x, bg, grid, tau, variant, target).values
                assert np.all(scores >= 0.0)
            flat = temporal_saliency(model, x, bg, grid, 1e6, SaliencyVariant.WHOLE).values
            assert flat.max() < 1e-6

            shifted = model.copy()
            shifted["head.bias"].data[...] += rng.normal() * 5.0
            np.testing.assert_allclose(
                temporal_saliency(shifted, x, bg, grid, tau).values,
                temporal_saliency(model, x, bg, grid, tau).values,
                atol=1e-9,
            )
