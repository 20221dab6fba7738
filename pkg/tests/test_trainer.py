import time

import numpy as np
import pytest

from somspike import data, trainer
from somspike.network import Model, load_checkpoint
from conftest import make_blob_store

from somspike.softsom import SomConfig


def blob_config(tmp_path, **overrides):
    base = dict(
        variant="full",
        max_epochs=20,
        batch_size=32,
        seed=7,
        num_prototypes=8,
        hidden_dim=32,
        time_steps=2,
        dropout_rate=0.1,
        checkpoint_path=str(tmp_path / "model.ckpt"),
    )
    base.update(overrides)
    return trainer.TrainConfig(**base)


def small_config(tmp_path, **overrides):
    """Cheap linear-head run for protocol-replay tests."""
    base = dict(
        variant="no_som_linear",
        max_epochs=8,
        batch_size=16,
        seed=0,
        checkpoint_path=str(tmp_path / "model.ckpt"),
    )
    base.update(overrides)
    return trainer.TrainConfig(**base)


@pytest.fixture
def small_store():
    return make_blob_store(seed=1, dim=4, per_class=40, num_classes=3)


class TestEvaluate:
    def test_constant_predictor_on_balanced_classes(self, blob_store):
        model = Model("no_som_linear", input_dim=16, num_classes=4)
        model.head.weight[:] = 0.0
        model.head.bias[:] = 0.0
        acc, cm = trainer.evaluate(model, blob_store.features, blob_store.labels, 4)
        # zero logits tie everywhere; argmax breaks toward class 0
        assert acc == pytest.approx(25.0)
        assert cm.counts[:, 0].sum() == cm.total

    def test_accuracy_consistent_with_confusion(self, small_store):
        rng = np.random.default_rng(2)
        model = Model("no_som_linear", input_dim=4, num_classes=3, seed=3)
        model.head.weight[:] = rng.normal(size=model.head.weight.shape)
        acc, cm = trainer.evaluate(model, small_store.features, small_store.labels, 3)
        assert acc == pytest.approx(100.0 * np.trace(cm.counts) / cm.total)

    def test_does_not_mutate_model_state(self, small_store):
        model = Model("full", input_dim=4, num_classes=3,
                      som_config=SomConfig(num_prototypes=3, dim=4), hidden_dim=5, seed=4)
        before = {k: v.copy() for k, v in model.named_tensors().items()}
        trainer.evaluate(model, small_store.features, small_store.labels, 3)
        for name, tensor in model.named_tensors().items():
            np.testing.assert_array_equal(tensor, before[name], err_msg=name)

    def test_empty_subset(self):
        model = Model("no_som_linear", input_dim=2, num_classes=2)
        with pytest.raises(ValueError, match="empty"):
            trainer.evaluate(model, np.zeros((0, 2)), np.zeros(0, dtype=int), 2)


class TestTrain:
    def test_blob_run_reaches_high_accuracy(self, blob_store, tmp_path):
        start = time.perf_counter()
        report = trainer.train(blob_config(tmp_path), blob_store)
        elapsed = time.perf_counter() - start
        assert report.test["accuracy"] >= 95.0
        assert elapsed < 60.0

    def test_repeat_run_is_byte_identical(self, blob_store, tmp_path):
        config = blob_config(tmp_path, max_epochs=4)
        first = trainer.train(config, blob_store).to_json()
        second = trainer.train(config, blob_store).to_json()
        assert first == second

    def test_different_seeds_differ(self, blob_store, tmp_path):
        a = trainer.train(blob_config(tmp_path, max_epochs=2, seed=1), blob_store)
        b = trainer.train(blob_config(tmp_path, max_epochs=2, seed=2), blob_store)
        assert a.epochs[0]["train_loss"] != b.epochs[0]["train_loss"]

    def test_checkpoint_holds_best_epoch(self, blob_store, tmp_path):
        config = blob_config(tmp_path, max_epochs=6)
        report = trainer.train(config, blob_store)
        _, epoch, best = load_checkpoint(config.checkpoint_path)
        assert epoch == report.best_epoch
        assert best == report.best_val_accuracy

    def test_invalid_epochs_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="max_epochs"):
            blob_config(tmp_path, max_epochs=0)


class TestProtocolReplay:
    """Drive the loop with a stubbed validation metric and replay the protocol."""

    def test_rising_accuracy_checkpoints_every_epoch(self, small_store, tmp_path):
        config = small_config(tmp_path)
        report = trainer.train(config, small_store,
                               val_eval_fn=lambda model, epoch: 10.0 * epoch)
        assert report.best_epoch == config.max_epochs
        assert report.best_val_accuracy == 10.0 * config.max_epochs
        assert not report.stopped_early
        assert len(report.epochs) == config.max_epochs

    def test_constant_accuracy_halts_after_window(self, small_store, tmp_path):
        report = trainer.train(small_config(tmp_path, max_epochs=30), small_store,
                               val_eval_fn=lambda model, epoch: 42.0)
        assert report.stopped_early
        assert len(report.epochs) == 6
        assert report.best_epoch == 1

    def test_plateau_halves_learning_rate(self, small_store, tmp_path):
        # best at epoch 1, two stagnant epochs -> lr halves from epoch 3 on
        accs = {1: 50.0, 2: 49.0, 3: 48.0, 4: 47.0, 5: 46.5, 6: 46.0}
        report = trainer.train(small_config(tmp_path, max_epochs=6, learning_rate=1e-3),
                               small_store,
                               val_eval_fn=lambda model, epoch: accs[epoch])
        lrs = [row["lr"] for row in report.epochs]
        assert lrs[:2] == [1e-3, 1e-3]
        assert lrs[2] == pytest.approx(5e-4)
        assert lrs[4] == pytest.approx(2.5e-4)
        assert report.stopped_early and len(report.epochs) == 6

    def test_checkpoint_only_on_strict_improvement(self, small_store, tmp_path):
        accs = {1: 50.0, 2: 60.0, 3: 60.0, 4: 55.0, 5: 61.0, 6: 61.0}
        saved = []

        def stub(model, epoch):
            return accs[epoch]

        config = small_config(tmp_path, max_epochs=6)
        report = trainer.train(config, small_store, val_eval_fn=stub)
        bests = [row["val_accuracy"] for row in report.epochs]
        assert bests == [50.0, 60.0, 60.0, 55.0, 61.0, 61.0]
        assert report.best_epoch == 5
        _, epoch, best = load_checkpoint(config.checkpoint_path)
        assert (epoch, best) == (5, 61.0)


class TestAblate:
    def test_four_variants_reported(self, blob_store, tmp_path):
        store = blob_store
        config = trainer.TrainConfig(max_epochs=20, batch_size=32, seed=0,
                                     num_prototypes=16, hidden_dim=32, time_steps=2,
                                     learning_rate=3e-3, checkpoint_path="unused.ckpt")
        rows = trainer.ablate(config, store, out_dir=tmp_path)
        assert [variant for variant, _ in rows] == list(
            ("full", "no_som_spiking", "som_linear", "no_som_linear"))
        for variant, acc in rows:
            assert acc >= 90.0, f"{variant} underperformed on separable blobs: {acc}"
            assert (tmp_path / f"{variant}.ckpt").exists()

    def test_csv_shape(self):
        csv = trainer.ablation_csv([("full", 97.5), ("no_som_linear", 92.25)])
        lines = csv.strip().split("\n")
        assert lines[0] == "variant,test_accuracy"
        assert lines[1] == "full,97.5"
        assert lines[2] == "no_som_linear,92.25"
