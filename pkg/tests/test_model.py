import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fairattack.dataset import encoder_for
from fairattack.model import (
    MlpParams,
    NumericalAbort,
    Prediction,
    TrainConfig,
    forward,
    input_gradient,
    load_checkpoint,
    predict_label,
    save_checkpoint,
    threshold_labels,
    train_arrays,
)

from conftest import linear_model
import oracles


def _params_as_lists(p: MlpParams):
    return [w.tolist() for w in p.weights], [b.tolist() for b in p.biases]


class TestForward:
    def test_zero_weights_give_uniform(self):
        p = MlpParams((3, 4, 2), (np.zeros((3, 4)), np.zeros((4, 2))), (np.zeros(4), np.zeros(2)))
        pred = forward(p, np.array([0.3, 1.0, 0.0]))
        assert pred.probs.tolist() == [0.5, 0.5]

    def test_deterministic(self):
        p = MlpParams.init((5, 8, 2), seed=3)
        x = np.linspace(0, 1, 5)
        a, b = forward(p, x), forward(p, x)
        assert a.probs.tobytes() == b.probs.tobytes()

    def test_matches_independent_forward(self):
        p = MlpParams.init((6, 7, 5, 2), seed=11)
        W, B = _params_as_lists(p)
        rng = np.random.default_rng(0)
        for _ in range(10):
            x = rng.uniform(size=6)
            np.testing.assert_allclose(forward(p, x).probs, oracles.forward_positive(W, B, x), atol=1e-13)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            forward(MlpParams.init((3, 2)), np.zeros(4))

    def test_non_finite_params_rejected(self):
        with pytest.raises(ValueError):
            MlpParams((2, 2), (np.array([[np.nan, 0], [0, 0]]),), (np.zeros(2),))

    @settings(max_examples=50)
    @given(arrays(np.float64, 4, elements=st.floats(-50, 50)), st.integers(0, 20))
    def test_simplex(self, x, seed):
        probs = forward(MlpParams.init((4, 6, 3), seed=seed), x).probs
        assert np.all(probs >= 0) and abs(probs.sum() - 1) <= 1e-9

    def test_prediction_fields(self):
        pred = Prediction.from_probs(np.array([0.2, 0.7, 0.1]))
        assert pred.label == 1 and pred.margin == pytest.approx(0.5)


class TestInputGradient:
    def test_finite_differences(self):
        rng = np.random.default_rng(1)
        worst = 0.0
        for s in range(3):
            p = MlpParams.init((5, 6, 4, 2), seed=s)
            W, B = _params_as_lists(p)
            for _ in range(5):
                x = rng.uniform(size=5)
                if oracles.kink_distance(W, B, x) < 1e-6:
                    continue
                t = int(rng.integers(2))
                g = input_gradient(p, x, t)
                n = oracles.fd_gradient(W, B, x, t)
                worst = max(worst, float(np.max(np.abs(g - n) / np.maximum(np.maximum(np.abs(g), np.abs(n)), 1e-6))))
        assert worst < 1e-4

    def test_linear_closed_form(self):
        rng = np.random.default_rng(2)
        W = rng.normal(size=(4, 2))
        b = rng.normal(size=2)
        p = linear_model(W, b)
        x = rng.uniform(size=4)
        z = x @ W + b
        s = np.exp(z - z.max())
        s /= s.sum()
        for t in (0, 1):
            expected = (s - np.eye(2)[t]) @ W.T
            np.testing.assert_allclose(input_gradient(p, x, t), expected, atol=1e-14)

    def test_zero_first_layer_gives_zero_gradient(self):
        p = MlpParams((3, 4, 2), (np.zeros((3, 4)), np.ones((4, 2))), (np.zeros(4), np.zeros(2)))
        assert not np.any(input_gradient(p, np.array([1e3, -1e3, 5.0]), 0))

    def test_batch_rows_independent(self):
        p = MlpParams.init((3, 5, 2), seed=4)
        X = np.array([[0.1, 0.2, 0.3], [0.9, 0.1, 0.4]])
        G = p.loss_input_gradient(X, np.array([0, 1]))
        np.testing.assert_allclose(G[1], input_gradient(p, X[1], 1), rtol=0, atol=1e-15)


class TestPredictLabel:
    @pytest.mark.parametrize("probs,expected", [([0.49, 0.51], 1), ([0.5, 0.5], 1), ([0.51, 0.49], 0)])
    def test_threshold_is_inclusive(self, probs, expected):
        # logits log(p) reproduce the probabilities exactly enough for the threshold
        p = linear_model(np.zeros((1, 2)), np.log(probs))
        assert predict_label(p, np.zeros(1), 0.5) == expected

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError):
            predict_label(MlpParams.init((2, 3)), np.zeros(2))


class TestTraining:
    def test_separable_toy(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(-1, 1, size=(400, 2))
        X = X[np.abs(X[:, 0] + 0.5 * X[:, 1]) > 0.05]
        y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(int)
        res = train_arrays(X, y, 2, TrainConfig(hidden=(8,), epochs=50, learning_rate=0.1, seed=0))
        acc = (res.params.predict_proba(X).argmax(1) == y).mean()
        assert acc >= 0.99
        assert len(res.loss_log) == 50

    def test_same_seed_same_weights(self):
        rng = np.random.default_rng(1)
        X, y = rng.uniform(size=(64, 3)), rng.integers(0, 2, 64)
        a = train_arrays(X, y, 2, TrainConfig(hidden=(4,), epochs=3, seed=9)).params
        b = train_arrays(X, y, 2, TrainConfig(hidden=(4,), epochs=3, seed=9)).params
        assert all(np.array_equal(u, v) for u, v in zip(a.weights + a.biases, b.weights + b.biases))

    def test_divergence_aborts(self):
        rng = np.random.default_rng(2)
        X, y = rng.uniform(size=(64, 3)), rng.integers(0, 2, 64)
        X[10, 1] = np.nan
        with pytest.raises(NumericalAbort, match="epoch 1"):
            train_arrays(X, y, 2, TrainConfig(hidden=(4,), epochs=2, seed=0))

    @pytest.mark.parametrize("kw", [{"epochs": 0}, {"learning_rate": 0.0}, {"batch_size": 0}])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)

    def test_adult_accuracy_band(self, adult_small):
        schema, _, test, params = adult_small
        X = encoder_for(schema).encode_many(test.instances)
        acc = float((threshold_labels(params.predict_proba(X)) == test.labels).mean())
        assert 0.75 <= acc <= 0.9


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        p = MlpParams.init((4, 3, 2), seed=6)
        save_checkpoint(p, tmp_path / "m.json", "abc")
        q, h = load_checkpoint(tmp_path / "m.json")
        assert h == "abc"
        assert all(np.array_equal(u, v) for u, v in zip(p.weights + p.biases, q.weights + q.biases))

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / "none.json")
