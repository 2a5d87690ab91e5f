"""Training, gradient, and determinism contracts of the autoencoder."""

import numpy as np
import pytest

from latentgsea.autoencoder import (
    AutoencoderConfig,
    AutoencoderModel,
    LatentMatrix,
    decode,
    encode,
    init_parameters,
    layer_sizes,
    load_model,
    loss_and_gradient,
    save_model,
    train_autoencoder,
)
from latentgsea.data import ExpressionMatrix


def tiny_model(activation="tanh", l1=0.0, l2=0.0, seed=0, n_genes=6,
               hidden=(4,), latent=2):
    cfg = AutoencoderConfig(
        latent_dim=latent, hidden_dims=hidden, activation=activation,
        l1=l1, l2=l2, batch_size=1, epochs=1, seed=seed,
    )
    rng = np.random.default_rng(seed)
    w, b = init_parameters(n_genes, cfg, rng)
    # exercise the bias path in gradients too
    b = [rng.normal(scale=0.1, size=x.shape) for x in b]
    return AutoencoderModel(cfg, tuple(f"g{i}" for i in range(n_genes)), w, b)


def numeric_gradient(model, batch, h=1e-5):
    gw = [np.zeros_like(w) for w in model.weights]
    gb = [np.zeros_like(b) for b in model.biases]
    for arrs, grads in ((model.weights, gw), (model.biases, gb)):
        for arr, grad in zip(arrs, grads):
            flat = arr.ravel()
            gflat = grad.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                hi, _, _ = loss_and_gradient(model, batch)
                flat[i] = orig - h
                lo, _, _ = loss_and_gradient(model, batch)
                flat[i] = orig
                gflat[i] = (hi - lo) / (2 * h)
    return gw, gb


def rel_err(a, b):
    denom = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-8)
    return np.max(np.abs(a - b)) / denom


def safe_instance(rng, activation, l1, l2, seed):
    """Random model/batch pair away from relu kinks and L1 kinks."""
    for attempt in range(50):
        model = tiny_model(activation, l1=l1, l2=l2, seed=seed + 1000 * attempt)
        batch = rng.normal(size=(3, 6))
        ok = all(np.min(np.abs(w)) > 1e-4 for w in model.weights)
        if ok and activation == "relu":
            x = batch
            n_enc = model.n_encoder_layers
            for l, (w, b) in enumerate(zip(model.weights, model.biases)):
                z = x @ w + b
                if l not in (n_enc - 1, len(model.weights) - 1):
                    if np.min(np.abs(z)) < 1e-3:
                        ok = False
                        break
                    x = np.maximum(z, 0.0)
                else:
                    x = z
        if ok:
            return model, batch
    raise AssertionError("could not build a kink-free instance")


class TestGradient:
    @pytest.mark.parametrize("activation", ["tanh", "relu"])
    @pytest.mark.parametrize("l1,l2", [(0.0, 0.0), (0.01, 0.01)])
    def test_matches_finite_differences(self, activation, l1, l2):
        rng = np.random.default_rng(11)
        for draw in range(5):
            model, batch = safe_instance(rng, activation, l1, l2, seed=draw)
            _, gw, gb = loss_and_gradient(model, batch)
            nw, nb = numeric_gradient(model, batch)
            for a, n in zip(gw + gb, nw + nb):
                assert rel_err(a, n) < 1e-4

    def test_zero_penalties_give_pure_mse(self):
        rng = np.random.default_rng(12)
        model = tiny_model("tanh")
        batch = rng.normal(size=(4, 6))
        loss, _, _ = loss_and_gradient(model, batch)
        out = decode(model, encode(
            model,
            ExpressionMatrix(model.gene_ids, tuple(f"s{i}" for i in range(4)),
                             batch.T, transformed=True),
        ))
        mse = float(np.sum((out.T - batch) ** 2)) / 4
        assert loss == pytest.approx(mse, rel=1e-12)

    def test_l2_component_is_2_l2_theta(self):
        rng = np.random.default_rng(13)
        batch = rng.normal(size=(3, 6))
        plain = tiny_model("tanh", l2=0.0, seed=5)
        ridged = tiny_model("tanh", l2=0.03, seed=5)
        _, gw0, _ = loss_and_gradient(plain, batch)
        _, gw1, _ = loss_and_gradient(ridged, batch)
        for w, a, b in zip(plain.weights, gw0, gw1):
            assert np.allclose(b - a, 2 * 0.03 * w, atol=1e-12)

    def test_l1_component_is_sign_theta(self):
        rng = np.random.default_rng(14)
        batch = rng.normal(size=(3, 6))
        plain = tiny_model("tanh", l1=0.0, seed=6)
        lasso = tiny_model("tanh", l1=0.02, seed=6)
        _, gw0, _ = loss_and_gradient(plain, batch)
        _, gw1, _ = loss_and_gradient(lasso, batch)
        for w, a, b in zip(plain.weights, gw0, gw1):
            assert np.allclose(b - a, 0.02 * np.sign(w), atol=1e-12)

    def test_l1_subgradient_zero_at_zero(self):
        model = tiny_model("tanh", l1=0.5, seed=7)
        model.weights[0][:, :] = 0.0
        batch = np.zeros((2, 6))
        _, gw, _ = loss_and_gradient(model, batch)
        # data term vanishes through the zeroed first layer; L1 adds nothing at 0
        assert np.all(gw[0] == 0.0)


class TestTraining:
    def rank2_matrix(self, seed=20):
        rng = np.random.default_rng(seed)
        u = rng.normal(size=(20, 2))
        v = rng.normal(size=(100, 2))
        x = u @ v.T + 0.01 * rng.normal(size=(20, 100))
        return ExpressionMatrix(
            tuple(f"g{i}" for i in range(20)), tuple(f"s{j}" for j in range(100)),
            x, transformed=True,
        )

    def test_rank2_reconstruction_beats_zero_predictor(self):
        m = self.rank2_matrix()
        cfg = AutoencoderConfig(latent_dim=2, hidden_dims=(8,), activation="tanh",
                                learning_rate=1e-3, batch_size=100, epochs=2000,
                                seed=1)
        model = train_autoencoder(m, cfg)
        zero_mse = float(np.sum(m.values**2)) / m.n_samples
        assert model.training_log[-1]["mse"] < 0.10 * zero_mse

    def test_final_log_matches_objective_on_full_data(self):
        m = self.rank2_matrix()
        cfg = AutoencoderConfig(latent_dim=2, hidden_dims=(6,), l1=0.01, l2=0.02,
                                batch_size=32, epochs=3, seed=2)
        model = train_autoencoder(m, cfg)
        loss, _, _ = loss_and_gradient(model, m.values.T)
        assert model.training_log[-1]["total"] == pytest.approx(loss, rel=1e-12)

    def test_one_update_for_single_full_batch_epoch(self):
        m = self.rank2_matrix()
        cfg = AutoencoderConfig(latent_dim=2, hidden_dims=(4,), batch_size=100,
                                epochs=1, seed=3)
        model = train_autoencoder(m, cfg)
        assert model.n_updates == 1

    def test_epochs_zero_disallowed(self):
        with pytest.raises(ValueError, match="epochs"):
            AutoencoderConfig(latent_dim=2, epochs=0)

    def test_seed_reproducibility_bitwise(self):
        m = self.rank2_matrix()
        cfg = AutoencoderConfig(latent_dim=2, hidden_dims=(5,), batch_size=16,
                                epochs=4, seed=4)
        a = train_autoencoder(m, cfg)
        b = train_autoencoder(m, cfg)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)
        for ba, bb in zip(a.biases, b.biases):
            assert np.array_equal(ba, bb)
        assert a.training_log == b.training_log

    def test_l1_pressure_shrinks_weights(self):
        m = self.rank2_matrix()
        base = dict(latent_dim=2, hidden_dims=(6,), batch_size=50, epochs=100, seed=5)
        free = train_autoencoder(m, AutoencoderConfig(**base))
        tight = train_autoencoder(m, AutoencoderConfig(l1=5.0, **base))
        l1 = lambda model: sum(float(np.sum(np.abs(w))) for w in model.weights)
        assert l1(tight) < l1(free)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_loss_aborts_with_location(self):
        m = self.rank2_matrix()
        cfg = AutoencoderConfig(latent_dim=2, hidden_dims=(4,), batch_size=50,
                                epochs=3, learning_rate=1e200, seed=6)
        with pytest.raises(RuntimeError, match="epoch"):
            train_autoencoder(m, cfg)

    def test_batch_larger_than_n_rejected(self):
        m = self.rank2_matrix()
        cfg = AutoencoderConfig(latent_dim=2, batch_size=101, epochs=1, seed=0)
        with pytest.raises(ValueError, match="batch_size"):
            train_autoencoder(m, cfg)

    def test_holdout_split_logs_validation(self):
        m = self.rank2_matrix()
        cfg = AutoencoderConfig(latent_dim=2, hidden_dims=(4,), batch_size=16,
                                epochs=2, seed=7, holdout_fraction=0.2)
        model = train_autoencoder(m, cfg)
        assert "val_mse" in model.training_log[-1]


class TestEncodeDecode:
    def setup_method(self):
        rng = np.random.default_rng(30)
        self.m = ExpressionMatrix(
            tuple(f"g{i}" for i in range(10)), tuple(f"s{j}" for j in range(12)),
            rng.normal(size=(10, 12)), transformed=True,
        )
        cfg = AutoencoderConfig(latent_dim=3, hidden_dims=(5,), batch_size=12,
                                epochs=5, seed=8)
        self.model = train_autoencoder(self.m, cfg)

    def test_encode_deterministic(self):
        a = encode(self.model, self.m)
        b = encode(self.model, self.m)
        assert np.array_equal(a.values, b.values)

    def test_single_sample_matches_batch_row(self):
        full = encode(self.model, self.m)
        one = ExpressionMatrix(
            self.m.gene_ids, (self.m.sample_ids[4], "pad"),
            np.column_stack([self.m.values[:, 4], self.m.values[:, 4]]),
            transformed=True,
        )
        row = encode(self.model, one)
        assert np.array_equal(row.values[0], full.values[4])

    def test_zero_model_gives_zero_latent(self):
        zero = AutoencoderModel(
            self.model.config, self.model.gene_ids,
            [np.zeros_like(w) for w in self.model.weights],
            [np.zeros_like(b) for b in self.model.biases],
        )
        z = encode(zero, self.m)
        assert np.all(z.values == 0.0)
        out = decode(zero, z)
        assert np.all(out == 0.0)

    def test_gene_mismatch_names_first_discrepancy(self):
        ids = list(self.m.gene_ids)
        ids[3] = "swapped"
        bad = ExpressionMatrix(tuple(ids), self.m.sample_ids, self.m.values,
                               transformed=True)
        with pytest.raises(ValueError, match="position 3"):
            encode(self.model, bad)

    def test_decode_wrong_width_rejected(self):
        z = LatentMatrix(self.m.sample_ids, np.zeros((12, 4)))
        with pytest.raises(ValueError, match="latent"):
            decode(self.model, z)

    def test_roundtrip_error_consistent_with_training_loss(self):
        z = encode(self.model, self.m)
        out = decode(self.model, z)
        mse = float(np.sum((out - self.m.values) ** 2)) / self.m.n_samples
        assert abs(mse - self.model.training_log[-1]["mse"]) < 1e-9

    def test_checkpoint_roundtrip(self, tmp_path):
        p = tmp_path / "model.npz"
        save_model(self.model, p)
        back = load_model(p)
        assert back.config == self.model.config
        assert back.gene_ids == self.model.gene_ids
        for wa, wb in zip(back.weights, self.model.weights):
            assert np.array_equal(wa, wb)
        assert back.training_log == self.model.training_log
        z1 = encode(self.model, self.m)
        z2 = encode(back, self.m)
        assert np.array_equal(z1.values, z2.values)

    def test_shape_chain_validated(self):
        sizes = layer_sizes(10, self.model.config)
        assert sizes == [10, 5, 3, 5, 10]
        with pytest.raises(ValueError, match="weight shape"):
            AutoencoderModel(
                self.model.config, self.model.gene_ids,
                [w[:, :-1] if i == 0 else w for i, w in enumerate(self.model.weights)],
                self.model.biases,
            )
