import math

import numpy as np
import pytest

from lavarnet import datagen
from lavarnet.datagen import CouplingNetwork


class TestNetwork:
    def test_density_zero_is_self_only(self):
        net = datagen.gen_er_network(6, 3, density=0.0, seed=1)
        for k in range(1, 7):
            assert net.lagged_drivers(k) == {(k, tau) for tau in (1, 2, 3)}

    def test_density_one_is_complete(self):
        net = datagen.gen_er_network(4, 2, density=1.0, seed=1)
        assert all(len(net.lagged_drivers(k)) == 4 * 2 for k in range(1, 5))

    def test_mean_edge_count(self):
        K = 15
        counts = []
        for seed in range(1000):
            net = datagen.gen_er_network(K, 1, density=0.4, seed=seed)
            counts.append(sum(1 for j, _, k in net.lagged_edges if j != k))
        expected = 0.4 * K * (K - 1)
        se = math.sqrt(K * (K - 1) * 0.4 * 0.6 / 1000)
        assert expected == pytest.approx(84)
        assert abs(np.mean(counts) - expected) < 3 * se

    def test_every_pair_carries_all_lags(self):
        net = datagen.gen_er_network(6, 3, density=0.4, seed=5)
        pairs = {(j, k) for j, _, k in net.lagged_edges}
        assert net.lagged_edges == {(j, tau, k) for j, k in pairs for tau in (1, 2, 3)}

    def test_bad_density(self):
        with pytest.raises(ValueError):
            datagen.gen_er_network(3, 1, density=1.5)

    def test_edge_bounds_checked(self):
        with pytest.raises(ValueError):
            CouplingNetwork(2, 1, {(3, 1, 1)})

    @pytest.mark.parametrize("seed", range(5))
    def test_drivers_are_projection(self, seed):
        for net in (datagen.gen_er_network(7, 3, 0.4, seed), datagen.henon_network(seed + 1)):
            for k in range(1, net.K + 1):
                assert net.drivers(k) == {j for j, _ in net.lagged_drivers(k)}

    def test_json_round_trip(self, tmp_path):
        net = datagen.gen_er_network(5, 2, 0.4, seed=3)
        net.save(tmp_path / "truth.json")
        assert CouplingNetwork.load(tmp_path / "truth.json") == net


class TestVar:
    def test_geometric_decay(self):
        out = datagen.simulate_var(np.array([[[0.5]]]), 6, noise_std=0.0, burn_in=0, init=np.array([[1.0]]))
        # the init row is x_0 = 1; the simulated rows continue the decay
        assert out[:, 0].tolist() == [0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625]

    def test_ar1_autocorrelation(self):
        x = datagen.simulate_var(np.array([[[0.5]]]), 100_000, seed=4)[:, 0]
        x = x - x.mean()
        r1 = np.dot(x[:-1], x[1:]) / np.dot(x, x)
        assert abs(r1 - 0.5) < 0.02

    def test_coefficients_respect_network_and_stability(self):
        net = datagen.gen_er_network(6, 3, 0.4, seed=2)
        coefs = datagen.draw_var_coefficients(net, seed=2)
        for tau in range(3):
            for k in range(6):
                for j in range(6):
                    if (j + 1, tau + 1, k + 1) not in net.lagged_edges:
                        assert coefs[tau, k, j] == 0.0
        assert datagen.companion_radius(coefs) <= 0.95

    @pytest.mark.parametrize("seed", range(3))
    def test_finite_output(self, seed):
        net = datagen.gen_er_network(6, 3, 0.4, seed=seed)
        x = datagen.gen_var(net, 5000, seed=seed)
        assert x.shape == (5000, 6) and np.all(np.isfinite(x)) and np.all(np.isfinite(x.var(axis=0)))

    def test_least_squares_refit_zero_on_non_edges(self):
        K, P = 4, 2
        net = datagen.gen_er_network(K, P, 0.4, seed=11)
        x = datagen.gen_var(net, 100_000, seed=11)
        design = np.hstack([x[P - tau:len(x) - tau] for tau in range(1, P + 1)])
        beta, *_ = np.linalg.lstsq(design, x[P:], rcond=None)
        est = beta.T.reshape(K, P, K)  # est[k, tau-1, j]
        non_edges = [(j, tau, k) for j in range(1, K + 1) for tau in range(1, P + 1) for k in range(1, K + 1)
                     if (j, tau, k) not in net.lagged_edges]
        assert non_edges
        for j, tau, k in non_edges:
            assert abs(est[k - 1, tau - 1, j - 1]) < 0.05

    def test_deterministic(self):
        net = datagen.gen_er_network(5, 2, 0.4, seed=9)
        assert datagen.gen_var(net, 500, seed=9).tobytes() == datagen.gen_var(net, 500, seed=9).tobytes()

    def test_empty_network_gives_noise(self):
        coefs = datagen.draw_var_coefficients(CouplingNetwork(2, 1, frozenset()), seed=0)
        assert not coefs.any()


class TestHenon:
    def test_fixed_point(self):
        x_star = (-0.7 + math.sqrt(6.09)) / 2
        assert x_star == pytest.approx(0.8839, abs=1e-4)
        # the fixed point is a saddle (unstable multiplier ~1.92), so rounding error
        # roughly doubles each step; ten steps stay far inside the tolerance
        out = datagen.henon_iterate(np.full((2, 1), x_star), 10)
        assert np.max(np.abs(out - x_star)) < 1e-12

    def test_uncoupled_columns_follow_single_map(self):
        history = np.random.default_rng(3).uniform(-0.5, 0.5, size=(2, 4))
        chain = datagen.henon_iterate(history, 300, coupling=0.0)
        for k in range(4):
            single = datagen.henon_iterate(history[:, k:k + 1], 300, coupling=0.0)
            assert chain[:, k].tobytes() == single[:, 0].tobytes()

    def test_interior_and_end_equations(self):
        h = np.array([[0.1, -0.2, 0.3], [0.05, 0.15, -0.25]])
        x = datagen.henon_iterate(h, 1, coupling=0.3)[0]
        C = 0.3
        prev, prev2 = h[1], h[0]
        drive = [C * prev[1] + (1 - C) * prev[0],
                 C * (prev[0] + prev[2]) / 2 + (1 - C) * prev[1],
                 C * prev[1] + (1 - C) * prev[2]]
        expected = [1.4 - d * d + 0.3 * p for d, p in zip(drive, prev2)]
        np.testing.assert_allclose(x, expected, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_bounded(self, seed):
        x, net = datagen.gen_henon_chain(5, 2000, seed=seed)
        assert x.shape == (2000, 5) and np.all(np.abs(x) < 10)
        assert net == datagen.henon_network(5)

    def test_deterministic(self):
        a, _ = datagen.gen_henon_chain(5, 300, seed=4)
        b, _ = datagen.gen_henon_chain(5, 300, seed=4)
        assert a.tobytes() == b.tobytes()

    def test_chain_truth(self):
        net = datagen.henon_network(5)
        assert net.lagged_drivers(1) == {(1, 1), (1, 2), (2, 1)}
        assert net.lagged_drivers(3) == {(3, 1), (3, 2), (2, 1), (4, 1)}

    def test_persistent_divergence_raises(self):
        # a coupling far outside the chaotic range sends every trajectory to infinity
        with pytest.raises(datagen.GenerationError, match="3 consecutive"):
            datagen.gen_henon_chain(3, 100, coupling=-5.0, seed=0, max_attempts=3)

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            datagen.gen_henon_chain(0, 10)

