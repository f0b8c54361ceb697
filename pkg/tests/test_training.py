"""Losses, schedule, trainer, teacher selection and the distillation protocol."""

import numpy as np
import pandas as pd
import pytest

from tsd_lab.domain.enums import ModelFamily, Objective, SaliencyVariant
from tsd_lab.domain.errors import ConfigError
from tsd_lab.domain.experiment_schemas import DistillConfig, GridConfig, OptimizerConfig
from tsd_lab.domain.model_schemas import ModelSpec
from tsd_lab.ml.autograd import Tape, Tensor
from tsd_lab.ml.data import TimeSeriesDataset
from tsd_lab.ml.models import build_model
from tsd_lab.ml.saliency import SaliencyProfile, make_grid
from tsd_lab.ml.training import (
    CrossEntropyObjective,
    ExperimentTracker,
    MultiStepSchedule,
    RunStatus,
    TrainedArtifact,
    Trainer,
    base_kd_loss,
    check_compatible,
    derive_seed,
    distill,
    grid_search_beta,
    select_beta,
    select_teacher,
    total_loss,
    train_single,
    train_teacher,
    tsd_loss,
)
from tsd_lab.ml.training import distillation as distillation_module
from tsd_lab.shared.io import read_json


def profile(scores, grid_length: int | None = None, variant=SaliencyVariant.WHOLE) -> SaliencyProfile:
    scores = np.asarray(scores, dtype=np.float64)
    length = scores.shape[-1]
    return SaliencyProfile(Tensor(scores), make_grid(grid_length or length, length, 1), variant, tau=8.0)


def artifact(score: float, params=None, seed: int = 0) -> TrainedArtifact:
    return TrainedArtifact(params=params, history=[], best_epoch=0, best_val_auc_prc=score, seed=seed)


class TestTSDLoss:
    def test_identical_profiles(self):
        scores = [[0.3, 1.2, 0.0, 0.5]]
        assert tsd_loss(profile(scores), profile(scores)).item() == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("k", [0.01, 1.0, 37.0])
    def test_scale_invariance(self, k):
        teacher = np.array([[0.3, 1.2, 0.1, 0.5], [2.0, 0.2, 0.2, 0.1]])
        assert tsd_loss(profile(teacher), profile(k * teacher)).item() == pytest.approx(0.0, abs=1e-12)

    def test_hand_checked_value(self):
        # normalized [2, 0] vs [1, 1]: |d| = 1 on both entries, Smooth-L1 gives 0.5 each
        assert tsd_loss(profile([[1.0, 1.0]]), profile([[2.0, 0.0]])).item() == pytest.approx(0.5)

    def test_all_zero_profiles(self):
        assert tsd_loss(profile([[0.0, 0.0, 0.0]]), profile([[0.0, 0.0, 0.0]])).item() == 0.0

    def test_gradient_reaches_student_only(self):
        student = Tensor(np.array([[2.0, 0.0, 1.0]]), requires_grad=True)
        with Tape() as tape:
            loss = tsd_loss(profile([[1.0, 1.0, 1.0]]), SaliencyProfile(student, make_grid(3, 3, 1), SaliencyVariant.WHOLE, 8.0))
        tape.backward(loss)
        assert student.grad is not None and np.any(student.grad != 0)

    def test_mismatched_grids(self):
        with pytest.raises(ValueError):
            tsd_loss(profile([[1.0, 2.0]], grid_length=4), profile([[1.0, 2.0]], grid_length=5))

    def test_mismatched_variants(self):
        with pytest.raises(ValueError):
            tsd_loss(profile([[1.0, 2.0]]), profile([[1.0, 2.0]], variant=SaliencyVariant.BINARY))


class TestBaseKDLoss:
    def test_identical_logits(self, rng):
        logits = rng.normal(size=(4, 3))
        assert base_kd_loss(logits, Tensor(logits.copy()), 4.0).item() == pytest.approx(0.0, abs=1e-12)

    def test_matches_scaled_kl(self):
        teacher, student, tau = np.array([[2.0, 0.0]]), np.array([[0.0, 0.0]]), 1.0
        p = np.exp(teacher / tau) / np.exp(teacher / tau).sum()
        q = np.exp(student / tau) / np.exp(student / tau).sum()
        expected = tau**2 * np.sum(p * np.log(p / q))
        assert base_kd_loss(teacher, Tensor(student), tau).item() == pytest.approx(expected, rel=1e-10)
        assert expected == pytest.approx(0.3283, abs=1e-4)

    def test_large_temperature_stays_finite(self, rng):
        value = base_kd_loss(rng.normal(size=(3, 4)), Tensor(rng.normal(size=(3, 4))), 1e4).item()
        assert np.isfinite(value) and value >= 0.0

    def test_invalid_temperature(self):
        with pytest.raises(ValueError):
            base_kd_loss(np.zeros((1, 2)), Tensor(np.zeros((1, 2))), 0.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            base_kd_loss(np.zeros((1, 2)), Tensor(np.zeros((1, 3))), 1.0)


class TestTotalLoss:
    def test_beta_zero_is_cross_entropy(self):
        assert total_loss(0.7, 123.0, 1.0, 0.0) == 0.7

    def test_weighted_sum(self):
        assert total_loss(0.5, 0.05, 1.0, 10.0) == pytest.approx(1.0)


class TestSchedule:
    def test_milestones(self):
        schedule = MultiStepSchedule(initial_lr=0.01, factor=0.5, milestones=(25, 30, 35))
        assert schedule.lr(0) == 0.01
        assert schedule.lr(24) == 0.01
        assert schedule.lr(25) == pytest.approx(0.005)
        assert schedule.lr(36) == pytest.approx(0.01 * 0.125)


class TestTrainer:
    def test_history_and_early_stop_bound(self, fcn_spec, cbf_splits, fast_optimizer):
        train, val, _ = cbf_splits
        optimizer = fast_optimizer.model_copy(update={"max_epochs": 8, "patience": 2})
        result = Trainer(optimizer).fit(build_model(fcn_spec, 0), train, val, CrossEntropyObjective(), seed=0)
        assert 1 <= result.epochs_run <= 8
        assert result.epochs_run <= result.best_epoch + optimizer.patience + 1
        assert result.best_val_auc_prc == max(r.val_auc_prc for r in result.history)
        assert [r.lr for r in result.history[:3]] == pytest.approx([0.01, 0.005, 0.0025][: len(result.history)])
        assert list(result.history_frame().columns) == ["epoch", "lr", "train_loss", "ce", "kd", "val_auc_prc"]

    def test_same_seed_bitwise(self, fcn_spec, cbf_splits, fast_optimizer):
        train, val, _ = cbf_splits
        a = train_single(fcn_spec, train, val, fast_optimizer, seed=3)
        b = train_single(fcn_spec, train, val, fast_optimizer, seed=3)
        for name in a.params:
            np.testing.assert_array_equal(a.params[name].data, b.params[name].data)

    def test_tracker_persists_run(self, fcn_spec, cbf_splits, fast_optimizer, tmp_path):
        train, val, _ = cbf_splits
        tracker = ExperimentTracker(tmp_path)
        result = train_single(fcn_spec, train, val, fast_optimizer, seed=0, tracker=tracker, run_name="teacher-seed0")
        assert (tmp_path / "teacher-seed0" / "run.json").is_file()
        assert (tmp_path / "teacher-seed0" / "history.tsv").is_file()
        record = read_json(tmp_path / "teacher-seed0" / "run.json")
        assert record["status"] == RunStatus.COMPLETED.value
        assert record["metrics"]["best_epoch"] == result.best_epoch


class TestTeacherSelection:
    def test_best_validation_wins(self):
        candidates = [artifact(s) for s in (0.7, 0.9, 0.8, 0.6, 0.85)]
        assert select_teacher(candidates) == 1

    def test_first_wins_ties(self):
        assert select_teacher([artifact(0.8), artifact(0.9), artifact(0.9)]) == 1

    def test_empty(self):
        with pytest.raises(ValueError):
            select_teacher([])

    def test_train_teacher_records_selection(self, fcn_spec, cbf_splits, fast_optimizer):
        train, val, _ = cbf_splits
        best = train_teacher(fcn_spec, train, val, fast_optimizer, seeds=[4, 7])
        assert best.metadata["num_candidates"] == 2
        assert best.metadata["selected_seed"] in (4, 7)
        assert best.seed == best.metadata["selected_seed"]

    def test_teacher_learns_separable_classes(self):
        def shifted(per_class: int, seed: int) -> TimeSeriesDataset:
            labels = np.tile([0, 1], per_class)
            noise = np.random.default_rng(seed).normal(size=(labels.size, 16))
            values = noise + np.where(labels == 1, 1.5, -1.5)[:, np.newaxis]
            return TimeSeriesDataset.from_arrays(values, labels, num_classes=2)

        spec = ModelSpec(family=ModelFamily.FCN, num_blocks=1, width=4, num_classes=2, input_length=16)
        optimizer = OptimizerConfig(batch_size=8, max_epochs=50, patience=50)
        best = train_teacher(spec, shifted(20, seed=0), shifted(10, seed=1), optimizer, seeds=[0])
        assert best.best_val_auc_prc > 0.95


class TestDistillation:
    @pytest.fixture
    def teacher(self, teacher_spec, cbf_splits, fast_optimizer):
        train, val, _ = cbf_splits
        return train_single(teacher_spec, train, val, fast_optimizer, seed=0)

    def config(self, objective: Objective, optimizer, beta: float = 1.0) -> DistillConfig:
        return DistillConfig(objective=objective, beta=beta, optimizer=optimizer, seed=2, grid=GridConfig(num_subsequences=6, width=4))

    def test_base_equals_from_scratch_training(self, teacher, fcn_spec, cbf_splits, fast_optimizer):
        train, val, _ = cbf_splits
        student = distill(teacher, fcn_spec, train, val, self.config(Objective.BASE, fast_optimizer))
        scratch = train_single(fcn_spec, train, val, fast_optimizer, seed=2)
        for name in student.params:
            np.testing.assert_array_equal(student.params[name].data, scratch.params[name].data)

    @pytest.mark.parametrize("objective", [Objective.BASE_KD, Objective.TSD])
    def test_zero_beta_matches_base(self, objective, teacher, fcn_spec, cbf_splits, fast_optimizer):
        train, val, _ = cbf_splits
        base = distill(teacher, fcn_spec, train, val, self.config(Objective.BASE, fast_optimizer))
        other = distill(teacher, fcn_spec, train, val, self.config(objective, fast_optimizer, beta=0.0))
        for name in base.params:
            np.testing.assert_array_equal(other.params[name].data, base.params[name].data)

    @pytest.mark.parametrize("objective", [Objective.BASE_KD, Objective.TSD])
    def test_teacher_untouched(self, objective, teacher, fcn_spec, cbf_splits, fast_optimizer):
        train, val, _ = cbf_splits
        before = teacher.params.snapshot()
        result = distill(teacher, fcn_spec, train, val, self.config(objective, fast_optimizer))
        for name, array in before.items():
            np.testing.assert_array_equal(teacher.params[name].data, array)
        assert result.objective is objective
        assert all(record.kd > 0 for record in result.history)

    def test_tsd_with_lstm_student(self, teacher, cbf_splits, fast_optimizer):
        train, val, _ = cbf_splits
        spec = ModelSpec(family=ModelFamily.LSTM, num_blocks=1, width=3, num_classes=3, input_length=32)
        result = distill(teacher, spec, train, val, self.config(Objective.TSD, fast_optimizer.model_copy(update={"max_epochs": 1, "patience": 1})))
        assert result.epochs_run == 1
        assert np.isfinite(result.history[0].train_loss)

    def test_class_count_mismatch(self, teacher, cbf_splits, fast_optimizer):
        train, _, _ = cbf_splits
        spec = ModelSpec(family=ModelFamily.LINEAR, num_classes=2, input_length=32)
        with pytest.raises(ConfigError):
            check_compatible(teacher.params.spec, spec, train, self.config(Objective.TSD, fast_optimizer))

    def test_grid_wider_than_series(self, teacher, fcn_spec, cbf_splits, fast_optimizer):
        train, _, _ = cbf_splits
        config = self.config(Objective.TSD, fast_optimizer).model_copy(update={"grid": GridConfig(num_subsequences=2, width=33)})
        with pytest.raises(ConfigError):
            check_compatible(teacher.params.spec, fcn_spec, train, config)

    def test_too_many_subsequences(self, teacher, fcn_spec, cbf_splits, fast_optimizer):
        train, _, _ = cbf_splits
        config = self.config(Objective.TSD, fast_optimizer).model_copy(update={"grid": GridConfig(num_subsequences=30, width=5)})
        with pytest.raises(ConfigError):
            check_compatible(teacher.params.spec, fcn_spec, train, config)


class TestBetaSearch:
    def test_ties_go_to_smaller_beta(self):
        assert select_beta({0.1: 0.8, 10.0: 0.9, 1.0: 0.9}) == 1.0

    def test_empty_scores(self):
        with pytest.raises(ValueError):
            select_beta({})

    def test_one_run_per_grid_point(self, monkeypatch, fcn_spec, cbf_splits):
        train, val, _ = cbf_splits
        calls = []
        scores = {0.1: 0.5, 0.5: 0.7, 1.0: 0.7, 10.0: 0.6, 100.0: 0.2, 200.0: 0.1}

        def fake_distill(teacher, spec, train, val, config, background_seed=None, tracker=None, run_name="student"):
            assert tracker is marker
            calls.append((config.beta, config.seed, run_name))
            return artifact(scores[config.beta], seed=config.seed)

        marker = object()
        monkeypatch.setattr(distillation_module, "distill", fake_distill)
        result = grid_search_beta(None, fcn_spec, train, val, DistillConfig(seed=9), tracker=marker, run_name="seed0")
        assert calls == [(beta, 9, f"seed0-beta={beta:g}") for beta in scores]
        best_beta, best = result
        assert best_beta == 0.5
        assert best.best_val_auc_prc == 0.7
        assert result.scores == scores

    def test_empty_grid(self, fcn_spec, cbf_splits):
        train, val, _ = cbf_splits
        with pytest.raises(ValueError):
            grid_search_beta(None, fcn_spec, train, val, DistillConfig(beta_grid=[]))


class TestExperimentTracker:
    def test_end_run_persists_record(self, tmp_path):
        tracker = ExperimentTracker(tmp_path)
        tracker.start_run("training", "b", tags={"objective": "TSD"})
        tracker.log_metrics({"loss": 1.0}, step=0)
        tracker.log_metrics({"loss": 0.5}, step=1)
        tracker.end_run(RunStatus.FAILED, {"best_val_auc_prc": 0.9})
        record = read_json(tmp_path / "b" / "run.json")
        assert record == {
            "run_id": "b",
            "experiment_name": "training",
            "status": "failed",
            "params": {"objective": "TSD"},
            "metrics": {"best_val_auc_prc": 0.9},
        }
        history = pd.read_csv(tmp_path / "b" / "history.tsv", sep="\t")
        assert history["loss"].tolist() == [1.0, 0.5]

    def test_logging_without_run(self):
        with pytest.raises(RuntimeError):
            ExperimentTracker().log_metrics({"loss": 1.0})


class TestSeeding:
    def test_stable_and_tag_sensitive(self):
        assert derive_seed(0, "teacher", "CBF", 2) == derive_seed(0, "teacher", "CBF", 2)
        assert derive_seed(0, "teacher", "CBF", 2) != derive_seed(0, "teacher", "CBF", 3)
        assert derive_seed(0, "teacher", "CBF", 2) != derive_seed(1, "teacher", "CBF", 2)
