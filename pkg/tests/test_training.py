"""Optimizer oracle, training determinism, convergence, and metrics tests."""

import numpy as np
import pytest

from rgtn.data import normalize, synth_classification, synth_linear_dynamics, window
from rgtn.models import HeadConfig, ModelConfig, init_params, predict
from rgtn.training import (
    Param,
    ParamStore,
    TrainConfig,
    TrainingDiverged,
    adam_step,
    evaluate,
    train,
)


def scalar_adam_oracle(g, steps, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8):
    """Hand-rolled scalar Adam iteration with constant gradient."""
    theta, m, v = 0.0, 0.0, 0.0
    for t in range(1, steps + 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        theta -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return theta


def regression_setup(epochs=5, seed=0):
    table = synth_linear_dynamics(4, 2, 2, 200, 0.1, seed=seed)
    ds = normalize(window(table, tau=4))
    model = ModelConfig(
        variant="srgtn",
        tau=4,
        d_phys=2,
        d_feat=2,
        hidden=3,
        out_dim=4,
        activation="identity",
        head=HeadConfig(kind="tt", ranks=(2, 2), out_modes=(1, 2, 2)),
    )
    config = TrainConfig(epochs=epochs, learning_rate=3e-3, batch_size=16, seed=seed)
    return model, ds, config


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        store = ParamStore.from_values({"w": np.ones((2, 2))})
        store["w"].grad = np.zeros((2, 2))
        adam_step(store, TrainConfig(epochs=1))
        np.testing.assert_array_equal(store["w"].value, np.ones((2, 2)))

    def test_missing_gradient_skipped(self):
        store = ParamStore.from_values({"w": np.ones(3), "frozen": np.full(2, 5.0)})
        store["w"].grad = np.ones(3)
        adam_step(store, TrainConfig(epochs=1))
        np.testing.assert_array_equal(store["frozen"].value, np.full(2, 5.0))
        assert not np.allclose(store["w"].value, np.ones(3))

    def test_constant_gradient_matches_scalar_oracle(self):
        g = 0.37
        store = ParamStore.from_values({"theta": np.zeros(())})
        config = TrainConfig(epochs=1)
        for _ in range(25):
            store["theta"].grad = np.asarray(g)
            adam_step(store, config)
        expect = scalar_adam_oracle(g, 25)
        np.testing.assert_allclose(float(store["theta"].value), expect, atol=1e-12)

    def test_zero_learning_rate(self):
        store = ParamStore.from_values({"w": np.ones(4)})
        store["w"].grad = np.ones(4)
        adam_step(store, TrainConfig(epochs=1, learning_rate=0.0))
        np.testing.assert_array_equal(store["w"].value, np.ones(4))

    def test_non_finite_gradient_names_parameter(self):
        store = ParamStore.from_values({"w_x": np.ones(2)})
        store["w_x"].grad = np.array([1.0, np.inf])
        with pytest.raises(FloatingPointError, match="w_x"):
            adam_step(store, TrainConfig(epochs=1))

    def test_global_norm_clipping(self):
        store = ParamStore.from_values({"a": np.zeros(4)})
        store["a"].grad = np.full(4, 10.0)
        lr = 0.1
        config = TrainConfig(epochs=1, learning_rate=lr, clip_norm=1.0)
        adam_step(store, config)
        clipped = store["a"].grad
        np.testing.assert_allclose(np.linalg.norm(clipped), 1.0, atol=1e-12)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=1, beta1=1.0)
        with pytest.raises(ValueError):
            TrainConfig(epochs=1, loss="hinge")
        with pytest.raises(ValueError):
            TrainConfig(epochs=-1)


class TestTrainLoop:
    def test_zero_epochs_returns_initial_params(self):
        model, ds, _ = regression_setup()
        config = TrainConfig(epochs=0, seed=3)
        store, trace = train(model, ds, config)
        seeds = np.random.SeedSequence(3).generate_state(2)
        expect = init_params(model, int(seeds[0]))
        for name, arr in expect.items():
            np.testing.assert_array_equal(store[name].value, arr)
        assert trace == []

    def test_fixed_seed_traces_identical(self):
        model, ds, config = regression_setup(epochs=3, seed=11)
        _, trace_a = train(model, ds, config)
        _, trace_b = train(model, ds, config)
        assert trace_a == trace_b

    def test_trace_fields(self):
        model, ds, config = regression_setup(epochs=2)
        _, trace = train(model, ds, config)
        assert [r["epoch"] for r in trace] == [1, 2]
        for r in trace:
            assert np.isfinite(r["train_loss"]) and np.isfinite(r["val_loss"])

    def test_linear_task_reaches_tiny_mse(self):
        # windows -> targets given by an exactly representable linear map
        rng = np.random.default_rng(5)
        from rgtn.data import SeriesTable

        t, d, f = 120, 2, 2
        table = SeriesTable(
            timestamps=np.arange(t, dtype=float),
            values=rng.standard_normal((t, d, f)),
            phys_labels=("p0", "p1"),
            feat_labels=("f0", "f1"),
        )
        ds = window(table, tau=3)
        w = rng.standard_normal((4, 3 * d * f)) * 0.5
        flat = ds.inputs.reshape(ds.inputs.shape[0], -1)
        from dataclasses import replace

        ds = replace(ds, targets=flat @ w.T)
        model = ModelConfig(
            variant="srgtn",
            tau=3,
            d_phys=d,
            d_feat=f,
            hidden=4,
            out_dim=4,
            activation="identity",
            head=HeadConfig(kind="dense"),
        )
        config = TrainConfig(
            epochs=500, learning_rate=1e-2, batch_size=32, seed=1, loss="mse"
        )
        store, trace = train(model, ds, config)
        assert trace[-1]["train_loss"] <= 1e-6

    def test_divergence_aborts_with_trace(self):
        # Adam steps are bounded by the learning rate, so overflow needs an
        # absurd one; the loop must abort rather than emit non-finite records.
        model, ds, _ = regression_setup()
        config = TrainConfig(epochs=5, learning_rate=1e120, batch_size=16, seed=0, loss="mse")
        with pytest.raises(TrainingDiverged) as excinfo:
            train(model, ds, config)
        assert isinstance(excinfo.value.trace, list)


class TestEvaluate:
    def test_constant_predictor_mae(self):
        model, ds, _ = regression_setup()
        values = {
            name: np.zeros_like(arr) for name, arr in init_params(model, 0).items()
        }
        metrics = evaluate(model, values, ds, split="test")
        inputs, targets = ds.subset(ds.splits.test)
        from rgtn.data import inverse_transform_predictions

        raw_targets = inverse_transform_predictions(ds, targets)
        mean_pred = inverse_transform_predictions(ds, np.zeros_like(targets))
        expect = float(np.abs(mean_pred - raw_targets).mean())
        np.testing.assert_allclose(metrics["mae"], expect, atol=1e-12)

    def test_metrics_match_recomputation(self):
        model, ds, config = regression_setup(epochs=2)
        store, _ = train(model, ds, config)
        metrics = evaluate(model, store.values(), ds, split="val")
        inputs, targets = ds.subset(ds.splits.val)
        preds = predict(model, store.values(), inputs)
        from rgtn.data import inverse_transform_predictions

        expect = float(
            np.abs(
                inverse_transform_predictions(ds, preds)
                - inverse_transform_predictions(ds, targets)
            ).mean()
        )
        np.testing.assert_allclose(metrics["mae"], expect, atol=1e-12)
        assert metrics["parameter_count"] == store.total_count()

    def test_perfect_classifier_accuracy(self):
        ds = synth_classification(6, 2, 2, 80, 0.0, seed=2)
        model = ModelConfig(
            variant="grgtn",
            tau=6,
            d_phys=2,
            d_feat=2,
            hidden=4,
            out_dim=2,
            task="classification",
            head=HeadConfig(kind="tt", ranks=(2, 2), out_modes=(1, 1, 2)),
        )
        config = TrainConfig(epochs=40, learning_rate=1e-2, batch_size=16, seed=0, loss="cross_entropy")
        store, _ = train(model, ds, config)
        metrics = evaluate(model, store.values(), ds, split="test")
        assert metrics["accuracy"] == 1.0

    def test_empty_split_rejected(self):
        model, ds, _ = regression_setup()
        from dataclasses import replace

        from rgtn.data import SplitIndices

        broken = replace(
            ds,
            splits=SplitIndices(
                train=ds.splits.train, val=ds.splits.val, test=np.array([], dtype=int)
            ),
        )
        values = init_params(model, 0)
        with pytest.raises(ValueError):
            evaluate(model, values, broken, split="test")
