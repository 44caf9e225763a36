import numpy as np
import pytest

from fedjam import FederationConfig, aggregate, global_loss, select_clients
from fedjam.errors import ConfigError, NumericError
from fedjam.federated import (
    _LOCAL_STREAM,
    eval_metrics,
    local_update_fedavg,
    local_update_fedprox,
    run_rounds,
)
from fedjam.nn import (
    ModelState,
    backward,
    dense,
    forward,
    init_model,
    make_optimizer,
    mse_loss,
    params_as_vector,
    relu,
    sgd_step,
    trainable_mask,
)
from fedjam.seeding import derive_rng

from conftest import toy_client


def toy_model(seed=0, frozen_first=False):
    return init_model([dense(8, 6, frozen=frozen_first), relu(), dense(6, 8)], seed)


class TestSelectClients:
    def test_half_of_twelve(self):
        rng = derive_rng(0)
        picked = select_clients(range(12), 0.5, rng)
        assert len(picked) == 6
        assert len(set(picked)) == 6
        assert list(picked) == sorted(picked)

    def test_full_fraction(self):
        assert select_clients(range(5), 1.0, derive_rng(1)) == (0, 1, 2, 3, 4)

    def test_deterministic(self):
        a = select_clients(range(12), 0.5, derive_rng(7))
        b = select_clients(range(12), 0.5, derive_rng(7))
        assert a == b

    def test_empty_rejected(self):
        with pytest.raises(ConfigError):
            select_clients([], 0.5, derive_rng(0))


class TestAggregate:
    def test_idempotent(self):
        v = np.random.default_rng(0).normal(size=50)
        out = aggregate([(v, 10), (v.copy(), 3), (v.copy(), 7)])
        assert np.array_equal(out, v)

    def test_symmetry_gives_zero(self):
        v = np.random.default_rng(1).normal(size=50)
        out = aggregate([(v, 4), (-v, 4)])
        assert np.all(out == 0.0)

    def test_weighted_mean_arithmetic(self):
        out = aggregate([(np.array([0.0]), 1), (np.array([4.0]), 3)])
        assert out[0] == 3.0

    def test_convex_hull_containment(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            k = int(rng.integers(2, 6))
            stack = rng.normal(size=(k, 17))
            sizes = [int(s) for s in rng.integers(1, 100, size=k)]
            out = aggregate(list(zip(stack, sizes)))
            assert np.all(out >= stack.min(axis=0))
            assert np.all(out <= stack.max(axis=0))

    def test_permutation_invariance_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            k = int(rng.integers(2, 7))
            entries = [
                (rng.normal(size=23), int(rng.integers(1, 50))) for _ in range(k)
            ]
            base = aggregate(entries)
            perm = [entries[i] for i in rng.permutation(k)]
            assert np.array_equal(aggregate(perm), base)

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ConfigError):
            aggregate([(np.zeros(3), 1), (np.zeros(4), 1)])

    def test_empty_rejected(self):
        with pytest.raises(ConfigError):
            aggregate([])


class TestGlobalLoss:
    def test_equal_losses(self):
        assert global_loss([(0.4, 10), (0.4, 99)]) == pytest.approx(0.4)

    def test_simple_mean(self):
        assert global_loss([(0.0, 1), (2.0, 1)]) == 1.0

    def test_weighted(self):
        assert global_loss([(0.4, 100), (0.8, 300)]) == pytest.approx(0.7)

    def test_monotone_in_single_client(self):
        low = global_loss([(0.2, 10), (0.5, 30)])
        high = global_loss([(0.3, 10), (0.5, 30)])
        assert high > low

    def test_empty_rejected(self):
        with pytest.raises(ConfigError):
            global_loss([])


class TestLocalUpdates:
    def test_lr_zero_returns_broadcast(self):
        client = toy_client(0)
        model = toy_model()
        start = params_as_vector(model)
        out, _ = local_update_fedavg(
            start, client, "mse", ("sgd", 0.0), 1, 8, derive_rng(0), model=model
        )
        assert np.array_equal(out, start)
        # the broadcast vector itself is untouched
        assert np.array_equal(start, params_as_vector(model))

    def test_single_batch_equals_one_sgd_step(self):
        client = toy_client(1, n_obs=8)
        model = toy_model(seed=2)
        start = params_as_vector(model)

        rng = derive_rng(5)
        got, loss = local_update_fedavg(
            start, client, "mse", ("sgd", 0.05), 1, 64, rng, model=model
        )

        # manual single step with the mirrored rng stream
        rng = derive_rng(5)
        x = client.features("train")
        perm = rng.permutation(len(x))
        xb = x[perm]
        scratch = ModelState(layers=model.layers, params=start.copy(), mode="train")
        out, cache = forward(scratch, xb, rng_seed=int(rng.integers(0, 2**63)))
        want_loss, lgrad = mse_loss(out, xb)
        grad = backward(scratch, cache, lgrad)
        sgd_step(make_optimizer("sgd", 0.05, scratch.n_params), scratch, grad)

        assert np.array_equal(got, scratch.params)
        assert loss == want_loss

    def test_distinct_clients_diverge(self):
        a = toy_client(0, seed=10)
        b = toy_client(1, seed=20)
        model = toy_model(seed=3)
        start = params_as_vector(model)
        pa, _ = local_update_fedavg(start, a, "mse", ("sgd", 0.05), 1, 8, derive_rng(1), model=model)
        pb, _ = local_update_fedavg(start, b, "mse", ("sgd", 0.05), 1, 8, derive_rng(1), model=model)
        assert np.linalg.norm(pa - pb) > 0

    def test_fedprox_mu_zero_bitwise_equals_fedavg(self):
        client = toy_client(2, seed=30)
        model = toy_model(seed=4)
        start = params_as_vector(model)
        pa, la = local_update_fedavg(
            start, client, "mse", ("sgd", 0.01), 2, 8, derive_rng(9), model=model
        )
        pp, lp = local_update_fedprox(
            start, client, "mse", ("sgd", 0.01), 0.0, 2, 8, derive_rng(9), model=model
        )
        assert np.array_equal(pa, pp)
        assert la == lp

    def test_fedprox_matches_manual_proximal_rollout(self):
        mu, lr = 0.01, 0.05
        client = toy_client(3, seed=40, n_obs=16)
        model = toy_model(seed=5)
        start = params_as_vector(model)

        got, _ = local_update_fedprox(
            start, client, "mse", ("sgd", lr), mu, 1, 6, derive_rng(13), model=model
        )

        rng = derive_rng(13)
        x = client.features("train")
        scratch = ModelState(layers=model.layers, params=start.copy(), mode="train")
        mask = trainable_mask(scratch.layers)
        perm = rng.permutation(len(x))
        for s in range(0, len(x), 6):
            xb = x[perm[s : s + 6]]
            out, cache = forward(scratch, xb, rng_seed=int(rng.integers(0, 2**63)))
            _, lgrad = mse_loss(out, xb)
            grad = backward(scratch, cache, lgrad)
            # first batch: w == broadcast, so the pull term is exactly zero
            delta = scratch.params - start
            if s == 0:
                assert np.all(mu * delta == 0.0)
            grad = grad + mu * np.where(mask, delta, 0.0)
            sgd_step(make_optimizer("sgd", lr, scratch.n_params), scratch, grad)
        assert np.array_equal(got, scratch.params)

    def test_empty_train_split_rejected(self):
        client = toy_client(0)
        client.split_tags = np.full(client.n_obs, 2, dtype=np.uint8)
        model = toy_model()
        with pytest.raises(ConfigError, match="train split"):
            local_update_fedavg(
                params_as_vector(model), client, "mse", ("sgd", 0.1), 1, 8,
                derive_rng(0), model=model,
            )


def fed_config(**kw):
    base = dict(n_clients=3, rounds=3, batch_size=8, seed=11)
    base.update(kw)
    return FederationConfig(**base)


class TestRunRounds:
    def test_history_shape(self, toy_clients):
        model = toy_model(seed=6)
        params, history = run_rounds(
            fed_config(), toy_clients, model, "mse", "fedavg", ("sgd", 0.02)
        )
        assert len(history) == 3
        assert [r.round for r in history] == [1, 2, 3]
        for rec in history:
            assert rec.participants == (0, 1, 2)
            assert np.isfinite(rec.global_train_loss)
            assert np.isfinite(rec.global_valid_loss)
            assert set(rec.per_client_losses) == {0, 1, 2}
            assert rec.train_acc is None

    def test_zero_rounds_rejected(self):
        with pytest.raises(ConfigError):
            fed_config(rounds=0)

    def test_single_round(self, toy_clients):
        _, history = run_rounds(
            fed_config(rounds=1), toy_clients, toy_model(), "mse", "fedavg", ("sgd", 0.02)
        )
        assert len(history) == 1

    def test_degenerate_federation_equals_centralized(self):
        client = toy_client(0, n_obs=32, seed=50)
        cfg = fed_config(n_clients=1, rounds=4, batch_size=8, seed=21)
        model = toy_model(seed=7)
        params, history = run_rounds(
            cfg, [client], model, "mse", "fedavg", ("sgd", 0.05)
        )

        # centralized rollout with the same derived streams
        scratch = ModelState(
            layers=model.layers, params=params_as_vector(model), mode="train"
        )
        x = client.features("train")
        central_losses = []
        for round_idx in range(1, 5):
            rng = derive_rng(cfg.seed, _LOCAL_STREAM, round_idx, 0)
            perm = rng.permutation(len(x))
            for s in range(0, len(x), 8):
                xb = x[perm[s : s + 8]]
                out, cache = forward(scratch, xb, rng_seed=int(rng.integers(0, 2**63)))
                _, lgrad = mse_loss(out, xb)
                grad = backward(scratch, cache, lgrad)
                sgd_step(make_optimizer("sgd", 0.05, scratch.n_params), scratch, grad)
            loss, _ = eval_metrics(scratch, x, x, "mse")
            central_losses.append(loss)

        assert np.array_equal(params, scratch.params)
        for rec, want in zip(history, central_losses):
            assert abs(rec.global_train_loss - want) <= 1e-12

    def test_fedprox_mu_zero_sgd_equals_fedavg_history(self, toy_clients):
        model = toy_model(seed=8)
        cfg_avg = fed_config(seed=31)
        cfg_prox = fed_config(seed=31, mu=0.0)
        p_avg, h_avg = run_rounds(
            cfg_avg, toy_clients, model, "mse", "fedavg", ("sgd", 0.03)
        )
        p_prox, h_prox = run_rounds(
            cfg_prox, toy_clients, model, "mse", "fedprox", ("sgd", 0.03)
        )
        assert np.array_equal(p_avg, p_prox)
        for a, b in zip(h_avg, h_prox):
            assert abs(a.global_train_loss - b.global_train_loss) <= 1e-12
            assert abs(a.global_valid_loss - b.global_valid_loss) <= 1e-12

    def test_thread_count_invariance(self, toy_clients):
        model = toy_model(seed=9)
        p1, h1 = run_rounds(
            fed_config(seed=41), toy_clients, model, "mse", "fedavg", ("sgd", 0.02),
            n_threads=1,
        )
        p4, h4 = run_rounds(
            fed_config(seed=41), toy_clients, model, "mse", "fedavg", ("sgd", 0.02),
            n_threads=4,
        )
        assert np.array_equal(p1, p4)
        for a, b in zip(h1, h4):
            assert a.global_train_loss == b.global_train_loss
            assert a.global_valid_loss == b.global_valid_loss
            assert a.per_client_losses == b.per_client_losses

    def test_frozen_slices_survive_rounds(self, toy_clients):
        model = toy_model(seed=10, frozen_first=True)
        start = params_as_vector(model)
        n_frozen = 8 * 6 + 6
        params, _ = run_rounds(
            fed_config(mu=0.01), toy_clients, model, "mse", "fedprox", ("adam", 0.01)
        )
        assert np.array_equal(params[:n_frozen], start[:n_frozen])
        assert np.any(params[n_frozen:] != start[n_frozen:])

    def test_participation_fraction(self, toy_clients):
        cfg = fed_config(participation_fraction=0.5, rounds=2)
        _, history = run_rounds(
            cfg, toy_clients, toy_model(), "mse", "fedavg", ("sgd", 0.02)
        )
        assert all(len(r.participants) == 2 for r in history)
        assert history[0].participants == history[1].participants

    def test_resample_each_round(self, toy_clients):
        cfg = fed_config(participation_fraction=0.5, rounds=6, resample_each_round=True)
        _, history = run_rounds(
            cfg, toy_clients, toy_model(), "mse", "fedavg", ("sgd", 0.02)
        )
        assert len({r.participants for r in history}) > 1

    def test_client_count_mismatch(self, toy_clients):
        with pytest.raises(ConfigError):
            run_rounds(
                fed_config(n_clients=5), toy_clients, toy_model(), "mse", "fedavg"
            )

    def test_numeric_failure_attaches_partial_history(self, toy_clients):
        model = toy_model(seed=11)
        cfg = fed_config(rounds=6)
        with pytest.raises(NumericError, match="non-finite") as info:
            run_rounds(cfg, toy_clients, model, "mse", "fedavg", ("sgd", 1e12))
        assert isinstance(info.value.partial_history, list)
        assert len(info.value.partial_history) < 6

    def test_numeric_failure_in_local_update_names_client(self, toy_clients):
        # second round starts from already-diverged params, so the local
        # trainer itself sees the non-finite loss
        model = toy_model(seed=11)

        def run(lr):
            run_rounds(
                fed_config(rounds=6), toy_clients, model, "mse", "fedavg", ("sgd", lr)
            )

        with np.errstate(over="ignore"), pytest.raises(NumericError):
            run(1e6)

    def test_bce_history_has_accuracy(self, toy_clients):
        layers = [dense(8, 4), relu(), dense(4, 1)]
        from fedjam.nn import sigmoid

        model = init_model(layers + [sigmoid()], 12)
        _, history = run_rounds(
            fed_config(rounds=2), toy_clients, model, "bce", "fedavg", ("adam", 0.01)
        )
        for rec in history:
            assert 0.0 <= rec.train_acc <= 1.0
            assert 0.0 <= rec.valid_acc <= 1.0
