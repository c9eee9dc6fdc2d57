import numpy as np
import pytest

from risofdm import (NnParameters, RisGrid, Scenario, TrainSettings, achievable_rate,
                     build_features, derive_geometry, forward, infer_config,
                     init_params, load_params, loss_and_gradients, mean_rate,
                     quantize, relu, save_params, synthesize_channel, train,
                     tv_stm, uniform_allocation, wrap_phase)
from risofdm.harness import correlated_realizations
from risofdm.scene import PathProfile

from conftest import synthetic_scenario


def small_scenario():
    lam = 3e8 / 3.5e9
    return Scenario(
        carrier_hz=3.5e9, bandwidth_hz=5e6, n_subcarriers=8,
        grid=RisGrid(4, 1, lam / 2, lam / 2),
        ap_pos=(30.0, -20.0, 10.0), ris_pos=(0.0, 0.0, 5.0), ue_pos=(15.0, 10.0, 1.5),
        noise_density=5e-23,
        profile=PathProfile(nlos_delay_spread_s=100e-9),
    )


def small_channel(seed=0):
    scn = small_scenario()
    return scn, synthesize_channel(scn, derive_geometry(scn, np.random.default_rng(seed)))


def randomized_params(rng, k=8, n=4, depth=2):
    base = init_params(k, n, depth, rng)
    return NnParameters(
        base.w0 + 0.3 * rng.standard_normal((k, n)),
        0.5 * rng.standard_normal(n),
        tuple(1.0 + 0.3 * rng.standard_normal(n) for _ in range(depth)),
        tuple(0.5 * rng.standard_normal(n) for _ in range(depth)),
    )


def flatten(p):
    return np.concatenate([p.w0.ravel(), p.b0, *p.layer_weights, *p.layer_biases])


def unflatten(vec, k, n, depth):
    w0 = vec[:k * n].reshape(k, n)
    i = k * n
    b0 = vec[i:i + n]
    i += n
    ws = [vec[i + j * n:i + (j + 1) * n] for j in range(depth)]
    i += depth * n
    bs = [vec[i + j * n:i + (j + 1) * n] for j in range(depth)]
    return NnParameters(w0, b0, tuple(ws), tuple(bs))


class TestRelu:
    def test_values(self):
        np.testing.assert_array_equal(relu(np.array([-1.0, 2.0, 0.0])), [0.0, 2.0, 0.0])


class TestBuildFeatures:
    def test_identical_channels_give_zero_features(self):
        # one reflector whose row equals the direct taps: phases cancel
        from risofdm import ChannelRealization
        taps = np.array([[0.4 + 0.3j, -0.1j, 0.05]])
        chan = ChannelRealization(n_taps=3, eta=0.0, direct_taps=taps.copy(),
                                  composite=taps[None, :, :].copy(),
                                  block_duration_s=1e-3)
        feats = build_features(chan, 1, 8)
        np.testing.assert_allclose(feats, 0.0, atol=1e-12)

    def test_single_entry_matches_alignment_phase(self):
        from risofdm import ChannelRealization
        chan = ChannelRealization(
            n_taps=1, eta=0.0, direct_taps=np.array([[1.0 + 0.0j]]),
            composite=np.array([[[np.exp(1j * 0.8)]]]), block_duration_s=1e-3)
        feats = build_features(chan, 1, 1)
        assert feats.shape == (1, 1)
        assert feats[0, 0] == pytest.approx(-0.8)

    def test_matches_entrywise_recomputation(self, rng):
        scn, chan = small_channel(3)
        feats = build_features(chan, 1, scn.n_subcarriers)
        k = scn.n_subcarriers
        pad = k - chan.n_taps
        for n in range(chan.n_reflectors):
            for i in range(k):
                d = sum(np.exp(2j * np.pi * i * j / k) * np.pad(chan.direct_taps[0], (0, pad))[j]
                        for j in range(k))
                q = sum(np.exp(2j * np.pi * i * j / k) * np.pad(chan.composite[0, n], (0, pad))[j]
                        for j in range(k))
                expected = wrap_phase(np.angle(d) - np.angle(q))
                assert feats[n, i] == pytest.approx(float(expected), abs=1e-10)

    def test_range(self):
        _, chan = small_channel(4)
        feats = build_features(chan, 1, 8)
        assert np.all(feats >= -np.pi) and np.all(feats < np.pi)


class TestForward:
    def test_dead_network_outputs_final_bias(self, rng):
        params = init_params(8, 4, 2, rng)
        params = NnParameters(
            np.zeros((8, 4)), np.zeros(4),
            (np.zeros(4), np.zeros(4)),
            (np.full(4, 0.3), np.array([0.1, -0.2, 0.5, -0.9])),
        )
        theta, _ = forward(params, rng.uniform(-np.pi, np.pi, (4, 8)))
        np.testing.assert_array_equal(theta, params.layer_biases[-1])

    def test_identity_regime_passes_input_layer_through(self, rng):
        features = np.abs(rng.uniform(0.1, 1.0, (4, 8)))
        w0 = np.full((8, 4), 1.0 / 8.0 / 4.0)  # column sum 1/8 each
        params = NnParameters(w0, np.zeros(4), (np.ones(4),), (np.zeros(4),))
        theta, _ = forward(params, features)
        expected = features @ w0.sum(axis=1)  # positive, so both ReLUs pass
        np.testing.assert_allclose(theta, expected, rtol=1e-12)

    def test_matches_unoptimized_reimplementation(self, rng):
        params = randomized_params(rng)
        features = rng.uniform(-np.pi, np.pi, (4, 8))
        theta, _ = forward(params, features)
        # plain loop evaluation
        s = np.zeros(4)
        for i in range(4):
            for nn in range(4):
                for k in range(8):
                    s[i] += features[i, k] * params.w0[k, nn]
        t = np.maximum(0.0, s) + params.b0
        for w, b in zip(params.layer_weights, params.layer_biases):
            t = np.maximum(0.0, t * w) + b
        np.testing.assert_allclose(theta, t, atol=1e-12)

    def test_shape_mismatch_rejected(self, rng):
        params = init_params(8, 4, 2, rng)
        with pytest.raises(ValueError):
            forward(params, np.zeros((5, 8)))

    def test_scaling_input_and_biases_scales_output(self, rng):
        # with every pre-activation positive, doubling (w0, b0, layer biases)
        # while keeping the per-layer weights doubles the output
        features = np.abs(rng.uniform(0.1, 1.0, (4, 8)))
        w0 = np.abs(rng.uniform(0.01, 0.1, (8, 4)))
        params = NnParameters(w0, np.abs(rng.uniform(0.1, 0.5, 4)),
                              (np.full(4, 1.2), np.full(4, 0.8)),
                              (np.abs(rng.uniform(0.1, 0.5, 4)),
                               np.abs(rng.uniform(0.1, 0.5, 4))))
        doubled = NnParameters(2 * params.w0, 2 * params.b0, params.layer_weights,
                               tuple(2 * b for b in params.layer_biases))
        t1, _ = forward(params, features)
        t2, _ = forward(doubled, features)
        np.testing.assert_allclose(t2, 2 * t1, rtol=1e-12)


class TestGradients:
    def test_matches_central_finite_differences(self):
        scn, chan = small_channel(1)
        worst = 0.0
        for trial in range(20):
            rng = np.random.default_rng([13, trial])
            params = randomized_params(rng)
            _, grads = loss_and_gradients(params, chan, scn)
            analytic = np.concatenate([
                grads["w0"].ravel(), grads["b0"],
                *grads["layer_weights"], *grads["layer_biases"]])
            vec = flatten(params)
            fd = np.zeros_like(vec)
            h = 1e-5
            for i in range(len(vec)):
                up, down = vec.copy(), vec.copy()
                up[i] += h
                down[i] -= h
                lu, _ = loss_and_gradients(unflatten(up, 8, 4, 2), chan, scn)
                ld, _ = loss_and_gradients(unflatten(down, 8, 4, 2), chan, scn)
                fd[i] = (lu - ld) / (2 * h)
            scale = np.max(np.abs(fd))
            rel = np.max(np.abs(analytic - fd) / np.maximum(np.abs(fd), 1e-6 * scale))
            worst = max(worst, rel)
        assert worst <= 1e-4

    def test_dead_network_has_zero_layer_weight_gradients(self):
        scn, chan = small_channel(2)
        params = NnParameters(
            np.zeros((8, 4)), np.full(4, -1.0),  # layer inputs all negative
            (np.ones(4), np.ones(4)), (np.zeros(4), np.full(4, 0.2)))
        _, grads = loss_and_gradients(params, chan, scn)
        for g in grads["layer_weights"]:
            np.testing.assert_array_equal(g, 0.0)

    def test_lower_noise_means_larger_rate(self, rng):
        scn, chan = small_channel(3)
        params = randomized_params(rng)
        loss_hi, _ = loss_and_gradients(params, chan, scn)
        import dataclasses
        quieter = dataclasses.replace(scn, noise_density=scn.noise_density / 10.0)
        loss_lo, _ = loss_and_gradients(params, chan, quieter)
        assert -loss_lo > -loss_hi


class TestInferConfig:
    def test_deterministic(self, rng):
        scn, chan = small_channel(5)
        params = randomized_params(rng)
        a = infer_config(params, chan, scn.n_subcarriers)
        b = infer_config(params, chan, scn.n_subcarriers)
        np.testing.assert_array_equal(a.thetas, b.thetas)

    def test_output_is_wrapped(self, rng):
        scn, chan = small_channel(6)
        params = randomized_params(rng)
        config = infer_config(params, chan, scn.n_subcarriers)
        assert np.all(config.thetas >= -np.pi) and np.all(config.thetas < np.pi)

    def test_time_invariant_replicates_first_block(self, rng):
        scn = synthetic_scenario(n_elements=3, n_blocks=4)
        from conftest import single_cascade_paths
        chan = synthesize_channel(scn, single_cascade_paths(doppler_hz=50.0))
        params = randomized_params(rng, k=16, n=3)
        config = infer_config(params, chan, scn.n_subcarriers, time_invariant=True)
        assert config.time_invariant
        for u in range(1, 4):
            np.testing.assert_array_equal(config.thetas[u], config.thetas[0])

    def test_invariant_under_consistent_subcarrier_permutation(self, rng):
        scn, chan = small_channel(7)
        params = randomized_params(rng)
        features = build_features(chan, 1, scn.n_subcarriers)
        perm = rng.permutation(scn.n_subcarriers)
        permuted = NnParameters(params.w0[perm], params.b0,
                                params.layer_weights, params.layer_biases)
        t1, _ = forward(params, features)
        t2, _ = forward(permuted, features[:, perm])
        np.testing.assert_allclose(t1, t2, atol=1e-12)


class TestTraining:
    def test_single_realization_rate_improves(self):
        scn, chan = small_channel(8)
        dataset = [chan]
        rng = np.random.default_rng(3)
        before = mean_rate(init_params(8, 4, 2, np.random.default_rng(3)), dataset, scn)
        params = train(dataset, scn, TrainSettings(epochs=40), rng)
        after = mean_rate(params, dataset, scn)
        assert after >= before

    def test_empty_dataset_rejected(self):
        scn, _ = small_channel(9)
        with pytest.raises(ValueError):
            train([], scn, TrainSettings(), np.random.default_rng(0))

    def test_deterministic_given_seed(self):
        scn, chan = small_channel(10)
        dataset = [chan, chan, chan]
        p1 = train(dataset, scn, TrainSettings(epochs=5), np.random.default_rng(11))
        p2 = train(dataset, scn, TrainSettings(epochs=5), np.random.default_rng(11))
        np.testing.assert_array_equal(p1.w0, p2.w0)
        np.testing.assert_array_equal(p1.b0, p2.b0)

    def test_reaches_most_of_the_aligned_rate(self):
        # small synthetic set: the trained network should land within 10%
        # of the strongest-tap baseline on fresh draws
        scn = small_scenario()
        rng = np.random.default_rng(12)
        dataset = [synthesize_channel(scn, derive_geometry(scn, rng)) for _ in range(40)]
        params = train(dataset, scn, TrainSettings(epochs=80), np.random.default_rng(13))
        test_set = [synthesize_channel(scn, derive_geometry(scn, rng)) for _ in range(10)]
        unif = uniform_allocation(scn)
        nn_rates, tv_rates = [], []
        for chan in test_set:
            nn_rates.append(achievable_rate(
                chan, infer_config(params, chan, scn.n_subcarriers), unif, scn).rate_bit_s)
            tv_rates.append(achievable_rate(chan, tv_stm(chan), unif, scn).rate_bit_s)
        assert np.mean(nn_rates) >= 0.9 * np.mean(tv_rates)

    def test_trained_output_is_stabler_than_strongest_tap(self):
        # two adjacent (jittered) realizations: the trained network changes
        # far fewer quantized phases than per-realization re-alignment
        scn = small_scenario()
        rng = np.random.default_rng(14)
        base = derive_geometry(scn, rng)
        dataset = correlated_realizations(scn, 40, rng, base=base)
        params = train(dataset, scn, TrainSettings(epochs=80), np.random.default_rng(15))
        pair = correlated_realizations(scn, 2, np.random.default_rng(16), base=base)
        def churn(c1, c2):
            q1, q2 = (wrap_phase(quantize(c.thetas[0], 4)) for c in (c1, c2))
            return np.mean(q1 != q2)
        nn_churn = churn(infer_config(params, pair[0], scn.n_subcarriers),
                         infer_config(params, pair[1], scn.n_subcarriers))
        tv_churn = churn(tv_stm(pair[0]), tv_stm(pair[1]))
        assert nn_churn < tv_churn


class TestParamsPersistence:
    def test_round_trip(self, tmp_path, rng):
        params = randomized_params(rng)
        path = tmp_path / "params.txt"
        save_params(params, path)
        back = load_params(path)
        np.testing.assert_array_equal(back.w0, params.w0)
        np.testing.assert_array_equal(back.b0, params.b0)
        for a, b in zip(back.layer_weights, params.layer_weights):
            np.testing.assert_array_equal(a, b)
        for a, b in zip(back.layer_biases, params.layer_biases):
            np.testing.assert_array_equal(a, b)

    def test_write_failure_carries_path(self, tmp_path, rng):
        with pytest.raises(OSError, match="missing"):
            save_params(randomized_params(rng), tmp_path / "missing" / "p.txt")
