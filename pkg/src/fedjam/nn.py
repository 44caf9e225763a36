"""Minimal dense-network engine: forward, exact backprop, SGD/Adam.

Models are a flat float64 parameter vector plus an ordered layer list.
Dense weights are stored row-major [out x in] followed by the bias, layer
after layer, which makes parameter exchange and aggregation trivial.
Frozen dense layers keep propagating input gradients but their parameter
slices are never written by backward or by an optimizer step.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, ContractError

LAYER_KINDS = ("dense", "relu", "dropout", "sigmoid")

BCE_EPS = 1e-7


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_dim: int = 0
    out_dim: int = 0
    rate: float = 0.0
    frozen: bool = False

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.kind == "dense" and (self.in_dim <= 0 or self.out_dim <= 0):
            raise ConfigError(
                f"dense layer needs positive dims, got {self.in_dim}x{self.out_dim}"
            )
        if self.kind == "dropout" and not 0.0 <= self.rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {self.rate}")


def dense(in_dim: int, out_dim: int, frozen: bool = False) -> LayerSpec:
    return LayerSpec("dense", in_dim=in_dim, out_dim=out_dim, frozen=frozen)


def relu() -> LayerSpec:
    return LayerSpec("relu")


def dropout(rate: float) -> LayerSpec:
    return LayerSpec("dropout", rate=rate)


def sigmoid() -> LayerSpec:
    return LayerSpec("sigmoid")


def validate_chain(layers) -> None:
    """Dense dims must chain: each dense consumes the previous dense's output."""
    dim = None
    for i, spec in enumerate(layers):
        if spec.kind != "dense":
            continue
        if dim is not None and spec.in_dim != dim:
            raise ConfigError(
                f"layer {i}: in_dim {spec.in_dim} does not match preceding width {dim}"
            )
        dim = spec.out_dim


@lru_cache(maxsize=None)
def dense_slices(layers):
    """(layer_index, weight_slice, bias_slice) for every dense layer."""
    out = []
    pos = 0
    for i, spec in enumerate(layers):
        if spec.kind != "dense":
            continue
        n_w = spec.out_dim * spec.in_dim
        out.append((i, slice(pos, pos + n_w), slice(pos + n_w, pos + n_w + spec.out_dim)))
        pos += n_w + spec.out_dim
    return tuple(out), pos


def param_count(layers) -> int:
    return dense_slices(tuple(layers))[1]


@lru_cache(maxsize=None)
def trainable_mask(layers) -> np.ndarray:
    slices, total = dense_slices(layers)
    mask = np.zeros(total, dtype=bool)
    for i, w_sl, b_sl in slices:
        if not layers[i].frozen:
            mask[w_sl] = True
            mask[b_sl] = True
    mask.setflags(write=False)
    return mask


@dataclass
class ModelState:
    layers: tuple
    params: np.ndarray
    mode: str = "train"
    version: int = 0

    @property
    def n_params(self) -> int:
        return self.params.size

    def train(self) -> "ModelState":
        self.mode = "train"
        return self

    def eval(self) -> "ModelState":
        self.mode = "eval"
        return self


def init_model(layers, seed: int = 0) -> ModelState:
    """Build a model with uniform +/-sqrt(6/(in+out)) weights and zero biases."""
    layers = tuple(layers)
    validate_chain(layers)
    slices, total = dense_slices(layers)
    params = np.zeros(total, dtype=np.float64)
    rng = np.random.default_rng(seed)
    for i, w_sl, _ in slices:
        spec = layers[i]
        bound = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
        params[w_sl] = rng.uniform(-bound, bound, spec.out_dim * spec.in_dim)
    return ModelState(layers=layers, params=params, mode="train")


def clone_model(model: ModelState) -> ModelState:
    return ModelState(layers=model.layers, params=model.params.copy(), mode=model.mode)


def params_as_vector(model: ModelState) -> np.ndarray:
    return model.params.copy()


def load_params(model: ModelState, vector: np.ndarray) -> ModelState:
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != model.params.shape:
        raise ConfigError(
            f"parameter vector length {vector.size} != model size {model.params.size}"
        )
    model.params[...] = vector
    model.version += 1
    return model


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class ForwardCache:
    model_id: int
    version: int
    mode: str
    entries: list
    out_shape: tuple


def forward(model: ModelState, batch: np.ndarray, rng_seed: int = 0):
    """Run the layer stack; returns (output, cache for backward).

    Dropout is inverted and only active in train mode, with masks drawn
    from rng_seed in layer order; eval mode never touches the RNG.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ConfigError(f"batch must be a [B, d] matrix with B >= 1, got {x.shape}")
    slices, total = dense_slices(model.layers)
    if model.params.size != total:
        raise ConfigError("model parameter vector does not match its layer specs")
    w_by_layer = {i: (w_sl, b_sl) for i, w_sl, b_sl in slices}

    rng = np.random.default_rng(rng_seed) if model.mode == "train" else None
    entries = []
    for i, spec in enumerate(model.layers):
        if spec.kind == "dense":
            if x.shape[1] != spec.in_dim:
                raise ConfigError(
                    f"layer {i}: expected input width {spec.in_dim}, got {x.shape[1]}"
                )
            w_sl, b_sl = w_by_layer[i]
            w = model.params[w_sl].reshape(spec.out_dim, spec.in_dim)
            entries.append(("dense", i, x))
            x = x @ w.T + model.params[b_sl]
        elif spec.kind == "relu":
            entries.append(("relu", i, x))
            x = np.maximum(x, 0.0)
        elif spec.kind == "dropout":
            if model.mode == "train" and spec.rate > 0.0:
                mask = (rng.random(x.shape) >= spec.rate) / (1.0 - spec.rate)
                entries.append(("dropout", i, mask))
                x = x * mask
            else:
                entries.append(("dropout", i, None))
        else:  # sigmoid
            x = _stable_sigmoid(x)
            entries.append(("sigmoid", i, x))

    cache = ForwardCache(
        model_id=id(model),
        version=model.version,
        mode=model.mode,
        entries=entries,
        out_shape=x.shape,
    )
    return x, cache


def backward(model: ModelState, cache: ForwardCache, loss_grad: np.ndarray) -> np.ndarray:
    """Exact reverse-mode gradient of the cached forward pass.

    Returns a flat gradient the same length as model.params; frozen dense
    layers contribute zero slices but still pass gradients upstream.
    """
    if cache.model_id != id(model) or cache.version != model.version:
        raise ContractError("forward cache is stale: model parameters changed")
    if cache.mode != model.mode:
        raise ContractError(f"cache built in {cache.mode} mode, model is in {model.mode}")
    g = np.asarray(loss_grad, dtype=np.float64)
    if g.shape != cache.out_shape:
        raise ContractError(
            f"loss gradient shape {g.shape} does not match output {cache.out_shape}"
        )

    slices, _ = dense_slices(model.layers)
    w_by_layer = {i: (w_sl, b_sl) for i, w_sl, b_sl in slices}
    grad = np.zeros_like(model.params)

    for kind, i, saved in reversed(cache.entries):
        if kind == "dense":
            spec = model.layers[i]
            w_sl, b_sl = w_by_layer[i]
            w = model.params[w_sl].reshape(spec.out_dim, spec.in_dim)
            if not spec.frozen:
                grad[w_sl] = (g.T @ saved).ravel()
                grad[b_sl] = g.sum(axis=0)
            g = g @ w
        elif kind == "relu":
            g = g * (saved > 0.0)
        elif kind == "dropout":
            if saved is not None:
                g = g * saved
        else:  # sigmoid: saved is the activation output
            g = g * saved * (1.0 - saved)

    return grad


def mse_loss(recon: np.ndarray, target: np.ndarray):
    """Mean squared error over all elements and its gradient w.r.t. recon."""
    recon = np.asarray(recon, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if recon.shape != target.shape:
        raise ConfigError(f"shape mismatch {recon.shape} vs {target.shape}")
    diff = recon - target
    scale = 1.0 / diff.size
    loss = float(np.sum(diff * diff) * scale)
    return loss, 2.0 * scale * diff


def bce_loss(probs: np.ndarray, labels: np.ndarray):
    """Binary cross-entropy with probabilities clamped to [eps, 1-eps]."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if probs.shape != labels.shape:
        raise ConfigError(f"shape mismatch {probs.shape} vs {labels.shape}")
    p = np.clip(probs, BCE_EPS, 1.0 - BCE_EPS)
    n = p.size
    loss = float(-np.sum(labels * np.log(p) + (1.0 - labels) * np.log1p(-p)) / n)
    return loss, (p - labels) / (p * (1.0 - p) * n)


@dataclass
class OptimizerState:
    kind: str
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    t: int = 0


def make_optimizer(kind: str, lr: float, n_params: int) -> OptimizerState:
    if kind not in ("sgd", "adam"):
        raise ConfigError(f"unknown optimizer {kind!r}")
    if lr < 0:
        raise ConfigError(f"learning rate must be >= 0, got {lr}")
    opt = OptimizerState(kind=kind, lr=lr)
    if kind == "adam":
        opt.m = np.zeros(n_params, dtype=np.float64)
        opt.v = np.zeros(n_params, dtype=np.float64)
    return opt


def _check_grad(model: ModelState, grad: np.ndarray) -> np.ndarray:
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != model.params.shape:
        raise ConfigError(
            f"gradient length {grad.size} != parameter length {model.params.size}"
        )
    return grad


def sgd_step(opt: OptimizerState, model: ModelState, grad: np.ndarray) -> ModelState:
    grad = _check_grad(model, grad)
    mask = trainable_mask(model.layers)
    if mask.all():
        model.params -= opt.lr * grad
    else:
        model.params[mask] -= opt.lr * grad[mask]
    model.version += 1
    return model


def adam_step(opt: OptimizerState, model: ModelState, grad: np.ndarray) -> ModelState:
    """Bias-corrected Adam; frozen slices keep zero moments and never move."""
    grad = _check_grad(model, grad)
    if opt.m is None or opt.m.size != grad.size:
        raise ConfigError("optimizer state does not match parameter length")
    mask = trainable_mask(model.layers)
    g = grad if mask.all() else np.where(mask, grad, 0.0)
    opt.t += 1
    opt.m = opt.beta1 * opt.m + (1.0 - opt.beta1) * g
    opt.v = opt.beta2 * opt.v + (1.0 - opt.beta2) * (g * g)
    m_hat = opt.m / (1.0 - opt.beta1 ** opt.t)
    v_hat = opt.v / (1.0 - opt.beta2 ** opt.t)
    step = opt.lr * m_hat / (np.sqrt(v_hat) + opt.eps)
    if mask.all():
        model.params -= step
    else:
        model.params[mask] -= step[mask]
    model.version += 1
    return model


def optimizer_step(opt: OptimizerState, model: ModelState, grad: np.ndarray) -> ModelState:
    if opt.kind == "sgd":
        return sgd_step(opt, model, grad)
    return adam_step(opt, model, grad)
