"""Elastic-net-regularized dense autoencoder with deterministic training.

Implemented directly on numpy so that training is bit-reproducible for a
fixed seed and the loss gradient is an explicit function that can be checked
against finite differences.  The objective is

    mean_i ||x_i - decode(encode(x_i))||^2  +  l1 * sum|W|  +  l2 * sum W^2

with the penalty over weight matrices only by default (biases exempt; a
strict flag includes them).  The penalty is added once per optimizer step so
its strength does not depend on batch size.  Hidden layers are activated
(relu or tanh); the latent code layer and the output layer are linear.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .data import ExpressionMatrix

CHECKPOINT_FORMAT = "latentgsea-autoencoder-v1"


@dataclass(frozen=True)
class AutoencoderConfig:
    latent_dim: int
    hidden_dims: tuple = (512, 128)
    activation: str = "relu"
    l1: float = 0.0
    l2: float = 0.0
    learning_rate: float = 1e-3
    batch_size: int = 128
    epochs: int = 100
    seed: int = 0
    penalize_biases: bool = False
    holdout_fraction: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.latent_dim < 1:
            raise ValueError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError(f"hidden_dims must be positive, got {self.hidden_dims}")
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"activation must be relu or tanh, got {self.activation!r}")
        for name in ("l1", "l2", "learning_rate", "holdout_fraction"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.l1 < 0 or self.l2 < 0:
            raise ValueError("penalty weights must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not 0 <= self.holdout_fraction < 1:
            raise ValueError(f"holdout_fraction must be in [0, 1), got {self.holdout_fraction}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in uint64, got {self.seed}")

    def to_dict(self):
        return {
            "latent_dim": self.latent_dim,
            "hidden_dims": list(self.hidden_dims),
            "activation": self.activation,
            "l1": self.l1,
            "l2": self.l2,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": int(self.seed),
            "penalize_biases": self.penalize_biases,
            "holdout_fraction": self.holdout_fraction,
        }


@dataclass
class AutoencoderModel:
    config: AutoencoderConfig
    gene_ids: tuple
    weights: list  # W_0..W_{L-1}, W_l shape (in_l, out_l); encoder stack then decoder stack
    biases: list
    training_log: list = field(default_factory=list)
    n_updates: int = 0

    def __post_init__(self):
        sizes = layer_sizes(len(self.gene_ids), self.config)
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("parameter count does not match architecture")
        for l, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
            if self.weights[l].shape != (fan_in, fan_out):
                raise ValueError(
                    f"layer {l}: weight shape {self.weights[l].shape} != ({fan_in}, {fan_out})"
                )
            if self.biases[l].shape != (fan_out,):
                raise ValueError(f"layer {l}: bias shape {self.biases[l].shape} != ({fan_out},)")

    @property
    def n_encoder_layers(self):
        return len(self.config.hidden_dims) + 1


@dataclass(frozen=True)
class LatentMatrix:
    """Samples x latent-dimensions activations."""

    sample_ids: tuple
    values: np.ndarray  # shape (N, D)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        if values.ndim != 2 or values.shape[0] != len(self.sample_ids):
            raise ValueError(f"values shape {values.shape} inconsistent with sample ids")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite latent values")

    @property
    def n_dims(self):
        return self.values.shape[1]


def layer_sizes(n_genes, cfg):
    """Full layer width chain G -> hidden -> D -> mirrored hidden -> G."""
    if cfg.latent_dim >= n_genes:
        raise ValueError(f"latent_dim {cfg.latent_dim} must be < n_genes {n_genes}")
    enc = [n_genes, *cfg.hidden_dims, cfg.latent_dim]
    dec = [*reversed(cfg.hidden_dims), n_genes]
    return enc + dec


def init_parameters(n_genes, cfg, rng):
    """Uniform fan-in initialization for weights; zero biases."""
    sizes = layer_sizes(n_genes, cfg)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _act(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_grad(z, a, kind):
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    return 1.0 - a * a


def _forward(model, x):
    """Forward pass; returns (output, per-layer (pre-activation, activation))."""
    n_enc = model.n_encoder_layers
    n_layers = len(model.weights)
    a = x
    cache = []
    for l in range(n_layers):
        z = a @ model.weights[l] + model.biases[l]
        # hidden layers are activated; the latent layer (l == n_enc - 1) and
        # the output layer (l == n_layers - 1) stay linear
        if l == n_enc - 1 or l == n_layers - 1:
            out = z
        else:
            out = _act(z, model.config.activation)
        cache.append((a, z, out))
        a = out
    return a, cache


def loss_and_gradient(model, batch):
    """Objective value and gradients for one batch of samples (rows).

    Returns ``(loss, grad_weights, grad_biases)`` with gradients matching the
    parameter lists.  The L1 subgradient at exactly zero is taken as zero.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.weights[0].shape[0]:
        raise ValueError(
            f"batch shape {x.shape} incompatible with input width {model.weights[0].shape[0]}"
        )
    cfg = model.config
    n = x.shape[0]
    n_enc = model.n_encoder_layers
    n_layers = len(model.weights)

    out, cache = _forward(model, x)
    resid = out - x
    mse = float(np.sum(resid * resid)) / n

    penalty = 0.0
    for w in model.weights:
        if cfg.l1:
            penalty += cfg.l1 * float(np.sum(np.abs(w)))
        if cfg.l2:
            penalty += cfg.l2 * float(np.sum(w * w))
    if cfg.penalize_biases:
        for b in model.biases:
            if cfg.l1:
                penalty += cfg.l1 * float(np.sum(np.abs(b)))
            if cfg.l2:
                penalty += cfg.l2 * float(np.sum(b * b))
    loss = mse + penalty

    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    g = 2.0 * resid / n
    for l in range(n_layers - 1, -1, -1):
        a_in, z, a_out = cache[l]
        if l == n_enc - 1 or l == n_layers - 1:
            gz = g
        else:
            gz = g * _act_grad(z, a_out, cfg.activation)
        grad_w[l] = a_in.T @ gz
        grad_b[l] = gz.sum(axis=0)
        if l > 0:
            g = gz @ model.weights[l].T

    for l in range(n_layers):
        if cfg.l1:
            grad_w[l] += cfg.l1 * np.sign(model.weights[l])
        if cfg.l2:
            grad_w[l] += 2.0 * cfg.l2 * model.weights[l]
        if cfg.penalize_biases:
            if cfg.l1:
                grad_b[l] += cfg.l1 * np.sign(model.biases[l])
            if cfg.l2:
                grad_b[l] += 2.0 * cfg.l2 * model.biases[l]
    return loss, grad_w, grad_b


def full_data_losses(model, x):
    """(reconstruction mse, penalty, total) over all samples, penalty once."""
    out, _ = _forward(model, x)
    resid = out - x
    mse = float(np.sum(resid * resid)) / x.shape[0]
    cfg = model.config
    penalty = 0.0
    for w in model.weights:
        penalty += cfg.l1 * float(np.sum(np.abs(w))) + cfg.l2 * float(np.sum(w * w))
    if cfg.penalize_biases:
        for b in model.biases:
            penalty += cfg.l1 * float(np.sum(np.abs(b))) + cfg.l2 * float(np.sum(b * b))
    return mse, penalty, mse + penalty


def train_autoencoder(m, cfg):
    """Train on an ExpressionMatrix (genes x samples) and return the model.

    Identical inputs (including seed) reproduce bit-identical parameters.
    """
    if not isinstance(m, ExpressionMatrix):
        raise TypeError("expected an ExpressionMatrix")
    n = m.n_samples
    if cfg.batch_size > n:
        raise ValueError(f"batch_size {cfg.batch_size} > n_samples {n}")
    rng = np.random.default_rng(int(cfg.seed))
    weights, biases = init_parameters(m.n_genes, cfg, rng)
    model = AutoencoderModel(cfg, tuple(m.gene_ids), weights, biases)

    x_all = np.ascontiguousarray(m.values.T)  # samples as rows
    if cfg.holdout_fraction > 0:
        n_val = int(round(cfg.holdout_fraction * n))
        if n - n_val < cfg.batch_size:
            raise ValueError("holdout leaves fewer samples than batch_size")
        split = rng.permutation(n)
        val_idx, train_idx = split[:n_val], split[n_val:]
        x_train, x_val = x_all[train_idx], x_all[val_idx]
    else:
        x_train, x_val = x_all, None

    n_train = x_train.shape[0]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    mom_w = [np.zeros_like(w) for w in model.weights]
    vel_w = [np.zeros_like(w) for w in model.weights]
    mom_b = [np.zeros_like(b) for b in model.biases]
    vel_b = [np.zeros_like(b) for b in model.biases]

    for epoch in range(cfg.epochs):
        order = rng.permutation(n_train)
        for start in range(0, n_train, cfg.batch_size):
            batch = x_train[order[start : start + cfg.batch_size]]
            loss, gw, gb = loss_and_gradient(model, batch)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            model.n_updates += 1
            t = model.n_updates
            scale = cfg.learning_rate * np.sqrt(1.0 - beta2**t) / (1.0 - beta1**t)
            for l in range(len(model.weights)):
                mom_w[l] = beta1 * mom_w[l] + (1 - beta1) * gw[l]
                vel_w[l] = beta2 * vel_w[l] + (1 - beta2) * gw[l] * gw[l]
                model.weights[l] -= scale * mom_w[l] / (np.sqrt(vel_w[l]) + eps)
                mom_b[l] = beta1 * mom_b[l] + (1 - beta1) * gb[l]
                vel_b[l] = beta2 * vel_b[l] + (1 - beta2) * gb[l] * gb[l]
                model.biases[l] -= scale * mom_b[l] / (np.sqrt(vel_b[l]) + eps)
        mse, penalty, total = full_data_losses(model, x_train)
        if not np.isfinite(total):
            raise RuntimeError(f"non-finite loss at end of epoch {epoch}")
        entry = {"epoch": epoch, "mse": mse, "penalty": penalty, "total": total}
        if x_val is not None:
            val_mse, _, _ = full_data_losses(model, x_val)
            entry["val_mse"] = val_mse
        model.training_log.append(entry)
    return model


def encode(model, m):
    """Deterministic forward pass through the encoder half."""
    if tuple(m.gene_ids) != tuple(model.gene_ids):
        for i, (a, b) in enumerate(zip(m.gene_ids, model.gene_ids)):
            if a != b:
                raise ValueError(
                    f"gene order mismatch at position {i}: matrix has {a!r}, model expects {b!r}"
                )
        raise ValueError(
            f"gene id count mismatch: matrix {m.n_genes} vs model {len(model.gene_ids)}"
        )
    a = np.ascontiguousarray(m.values.T)
    n_enc = model.n_encoder_layers
    for l in range(n_enc):
        z = a @ model.weights[l] + model.biases[l]
        a = z if l == n_enc - 1 else _act(z, model.config.activation)
    return LatentMatrix(tuple(m.sample_ids), a)


def decode(model, z):
    """Deterministic decoder pass; returns a genes x samples array."""
    vals = z.values if isinstance(z, LatentMatrix) else np.asarray(z, dtype=np.float64)
    if vals.ndim != 2 or vals.shape[1] != model.config.latent_dim:
        raise ValueError(
            f"latent width {vals.shape[1] if vals.ndim == 2 else '?'} != "
            f"model latent_dim {model.config.latent_dim}"
        )
    a = vals
    n_layers = len(model.weights)
    for l in range(model.n_encoder_layers, n_layers):
        zz = a @ model.weights[l] + model.biases[l]
        a = zz if l == n_layers - 1 else _act(zz, model.config.activation)
    return a.T


def write_latent(z, path):
    """TSV, samples as rows, columns dim_0..dim_{D-1}."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(["sample_id", *(f"dim_{k}" for k in range(z.n_dims))]) + "\n")
        for i, s in enumerate(z.sample_ids):
            fh.write("\t".join([s, *(repr(float(v)) for v in z.values[i])]) + "\n")


def load_latent(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header[0] != "sample_id":
            raise ValueError(f"{path}: not a latent matrix file")
        sample_ids, rows = [], []
        for line in fh:
            f = line.rstrip("\n").split("\t")
            sample_ids.append(f[0])
            rows.append([float(v) for v in f[1:]])
    return LatentMatrix(tuple(sample_ids), np.array(rows))


def save_model(model, path):
    """Single-file npz checkpoint: parameters + JSON metadata."""
    meta = {
        "format": CHECKPOINT_FORMAT,
        "config": model.config.to_dict(),
        "gene_ids": list(model.gene_ids),
        "training_log": model.training_log,
        "n_updates": model.n_updates,
        "n_layers": len(model.weights),
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)}
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"w{l}"] = w
        arrays[f"b{l}"] = b
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path):
    with np.load(path) as npz:
        meta = json.loads(bytes(npz["meta"]).decode("utf-8"))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: unknown checkpoint format {meta.get('format')!r}")
        cfg = AutoencoderConfig(
            latent_dim=meta["config"]["latent_dim"],
            hidden_dims=tuple(meta["config"]["hidden_dims"]),
            activation=meta["config"]["activation"],
            l1=meta["config"]["l1"],
            l2=meta["config"]["l2"],
            learning_rate=meta["config"]["learning_rate"],
            batch_size=meta["config"]["batch_size"],
            epochs=meta["config"]["epochs"],
            seed=meta["config"]["seed"],
            penalize_biases=meta["config"]["penalize_biases"],
            holdout_fraction=meta["config"]["holdout_fraction"],
        )
        n_layers = meta["n_layers"]
        weights = [npz[f"w{l}"] for l in range(n_layers)]
        biases = [npz[f"b{l}"] for l in range(n_layers)]
    model = AutoencoderModel(cfg, tuple(meta["gene_ids"]), weights, biases)
    model.training_log = meta["training_log"]
    model.n_updates = meta["n_updates"]
    return model
