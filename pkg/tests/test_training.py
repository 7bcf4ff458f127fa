import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lavarnet import dataio, training
from lavarnet.tensor import ContractError, DimensionError
from lavarnet.training import AdamState, TrainConfig, TrainHistory
import oracles


def small_windows(L=120, K=2, T=3, seed=0):
    x = np.random.default_rng(seed).normal(size=(L, K))
    ds = dataio.split(x, [f"v{k + 1}" for k in range(K)])
    return dataio.make_windows(ds, T)


class TestMse:
    def test_equal(self):
        assert training.mse_loss([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_known(self):
        assert training.mse_loss([0.0, 0.0], [1.0, 3.0]) == 5.0

    def test_random_matches_summation(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=37), rng.normal(size=37)
        expected = sum((x - y) ** 2 for x, y in zip(a.tolist(), b.tolist())) / 37
        assert training.mse_loss(a, b) == pytest.approx(expected, rel=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            training.mse_loss([1.0], [1.0, 2.0])


class TestCosine:
    def test_endpoints(self):
        assert abs(training.cosine_lr(0, 70) - 0.01) < 1e-12
        assert abs(training.cosine_lr(70, 70) - 0.0001) < 1e-12

    def test_midpoint(self):
        assert training.cosine_lr(35, 70) == pytest.approx(0.00505, abs=1e-15)

    def test_monotone_and_bounded(self):
        lrs = [TrainConfig(epochs=70).lr(e) for e in range(70)]
        assert all(a >= b for a, b in zip(lrs, lrs[1:]))
        assert all(1e-4 <= v <= 1e-2 for v in lrs)


def quadratic_grad(x):
    # f(x) = sum_i c_i (x_i - r_i)^2
    c, r = [1.0, 3.0, 0.5], [0.2, -1.0, 4.0]
    return [2 * c[i] * (x[i] - r[i]) for i in range(3)]


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        p = {"w": np.array([1.0, -2.0])}
        new, state = training.adam_step(p, {"w": np.zeros(2)}, AdamState.zeros_like(p), lr=0.1)
        assert np.array_equal(new["w"], p["w"]) and state.step == 1

    @pytest.mark.parametrize("g", [3.0, -0.02, 1e-3])
    def test_first_step_is_sign(self, g):
        p = {"w": np.array([0.5])}
        new, _ = training.adam_step(p, {"w": np.array([g])}, AdamState.zeros_like(p), lr=0.01)
        assert new["w"][0] - 0.5 == pytest.approx(-0.01 * g / (abs(g) + 1e-8), rel=1e-12)

    def test_ten_steps_match_reference(self):
        x0 = [1.0, 2.0, -3.0]
        ref = oracles.reference_adam(x0, quadratic_grad, lr=0.05, steps=10)
        p = {"x": np.array(x0)}
        state = AdamState.zeros_like(p)
        for step in range(10):
            g = {"x": np.array(quadratic_grad(p["x"].tolist()))}
            p, state = training.adam_step(p, g, state, lr=0.05)
            assert np.max(np.abs(p["x"] - ref[step])) < 1e-12

    def test_pure_function(self):
        p = {"w": np.array([1.0])}
        state = AdamState.zeros_like(p)
        training.adam_step(p, {"w": np.array([2.0])}, state, lr=0.1)
        assert p["w"][0] == 1.0 and state.step == 0 and state.m["w"][0] == 0.0

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
    def test_small_step_decreases_convex_objective(self, x0):
        def f(x):
            return sum(c * (xi - r) ** 2 for c, xi, r in zip([1.0, 3.0, 0.5], x, [0.2, -1.0, 4.0]))

        g = quadratic_grad(x0)
        if max(abs(v) for v in g) < 1e-3:
            return
        p = {"x": np.array(x0)}
        new, _ = training.adam_step(p, {"x": np.array(g)}, AdamState.zeros_like(p), lr=1e-4)
        assert f(new["x"].tolist()) < f(x0)


class TestConfig:
    def test_zero_epochs_rejected(self):
        with pytest.raises(ContractError):
            TrainConfig(epochs=0)

    @pytest.mark.parametrize("kw", [{"batch_size": 0}, {"eta_min": 0.0}, {"eta_min": 0.1, "eta_max": 0.01},
                                    {"schedule": "step"}])
    def test_invalid(self, kw):
        with pytest.raises(ContractError):
            TrainConfig(**kw)

    def test_default_schedules(self):
        assert training.default_config("frlavarnet").schedule == "cosine"
        cfg = training.default_config("lstm")
        assert cfg.schedule == "constant" and cfg.lr(0) == cfg.lr(50) == 0.001


class TestTrain:
    def test_single_epoch_single_row(self):
        w = small_windows()
        h = training.train(w["train"], w["val"], TrainConfig(variant="lavarnet", n=3, epochs=1))
        assert len(h.train_loss) == len(h.val_loss) == len(h.lr) == 1
        assert h.best_epoch == 0 and h.best_params is not None

    @pytest.mark.parametrize("variant", ["rlavarnet", "lstm"])
    def test_deterministic(self, variant):
        w = small_windows()
        cfg = training.default_config(variant, n=3, epochs=4, batch_size=16, seed=3)
        a = training.train(w["train"], w["val"], cfg)
        b = training.train(w["train"], w["val"], cfg)
        assert a.train_loss == b.train_loss and a.val_loss == b.val_loss
        assert all(a.best_params[k].tobytes() == b.best_params[k].tobytes() for k in a.best_params.tensors)

    def test_checkpoint_is_running_minimum(self):
        w = small_windows(seed=2)
        h = training.train(w["train"], w["val"], TrainConfig(variant="lavarnet", n=3, epochs=8, batch_size=16))
        assert h.best_val_loss == min(h.val_loss)
        assert h.best_epoch == h.val_loss.index(min(h.val_loss))
        assert training.evaluate_loss(h.best_params, w["val"]) == pytest.approx(h.best_val_loss, rel=1e-12)

    def test_learns_noiseless_linear_system(self):
        # x[t] = R x[t-1] with R a rotation: linear, noiseless and non-decaying
        theta = 0.3
        R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        x = np.zeros((400, 2))
        x[0] = [1.0, 0.0]
        for t in range(1, 400):
            x[t] = R @ x[t - 1]
        w = dataio.make_windows(dataio.split(x, ["a", "b"]), 3)
        h = training.train(w["train"], w["val"], TrainConfig(variant="lavarnet", n=5, epochs=200, seed=1))
        assert h.train_loss[-1] < 0.1 * h.train_loss[0]

    def test_non_finite_loss_aborts(self):
        w = small_windows()
        bad = w["train"]._replace(Y=np.where(np.arange(len(w["train"].Y))[:, None] == 5, np.nan, w["train"].Y))
        with pytest.raises(training.TrainingAborted, match="epoch 0, batch 0"):
            training.train(bad, w["val"], TrainConfig(variant="lavarnet", n=2, epochs=1))

    def test_knn_not_trainable(self):
        w = small_windows()
        with pytest.raises(ContractError):
            training.train(w["train"], w["val"], TrainConfig(variant="knn"))


class TestGrid:
    def test_single_candidate_equals_train(self):
        w = small_windows()
        cfg = TrainConfig(variant="lavarnet", n=4, epochs=2, grid=(4,), seed=5)
        g = training.grid_search(w["train"], w["val"], cfg)
        t = training.train(w["train"], w["val"], replace(cfg, grid=()))
        assert g.val_loss == t.val_loss and g.config.n == 4

    def test_three_candidates_three_trainings(self):
        w = small_windows()
        calls = []

        def trainer(tw, vw, cfg):
            calls.append(cfg.n)
            return training.train(tw, vw, cfg)

        cfg = TrainConfig(variant="lavarnet", epochs=1, grid=(5, 10, 20))
        best = training.grid_search(w["train"], w["val"], cfg, trainer=trainer)
        assert calls == [5, 10, 20] and best.config.n in (5, 10, 20)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.sampled_from([0.5, 0.25, 1.0, 0.125, 2.0]), min_size=3, max_size=3))
    def test_selection_matches_argmin(self, losses):
        grid = (5, 10, 20)
        fake = dict(zip(grid, losses))

        def trainer(tw, vw, cfg):
            return TrainHistory(train_loss=[1.0], val_loss=[fake[cfg.n]], lr=[0.01], best_epoch=0, config=cfg)

        best = training.grid_search(None, None, TrainConfig(grid=grid), trainer=trainer)
        expected = min(grid, key=lambda n: (fake[n], n))
        assert best.config.n == expected

    def test_grid_seeds_distinct_and_stable(self):
        assert training.grid_seed(0, 5) == training.grid_seed(0, 5)
        assert len({training.grid_seed(0, n) for n in (5, 10, 20)}) == 3


def test_best_val_loss_empty_history():
    assert math.isinf(TrainHistory().best_val_loss)
