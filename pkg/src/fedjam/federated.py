"""Federated training: client selection, local updates, aggregation, rounds.

Local solvers are stateless across rounds: every round each participant
starts from the freshly broadcast global parameters with a fresh
optimizer. Per-client RNG streams are derived from (seed, round, client),
and aggregation reduces in a canonical order, so results are identical no
matter how many worker threads run the client updates.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import ClientDataset
from .errors import ConfigError, NumericError
from .nn import (
    BCE_EPS,
    ModelState,
    backward,
    bce_loss,
    forward,
    load_params,
    make_optimizer,
    mse_loss,
    optimizer_step,
    params_as_vector,
    trainable_mask,
)
from .seeding import derive_rng

_SELECT_STREAM = 101
_LOCAL_STREAM = 11

_EVAL_CHUNK = 1024


@dataclass(frozen=True)
class FederationConfig:
    n_clients: int
    rounds: int
    batch_size: int
    participation_fraction: float = 1.0
    local_epochs: int = 1
    mu: float = 0.0
    resample_each_round: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_clients < 1:
            raise ConfigError(f"n_clients must be >= 1, got {self.n_clients}")
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.participation_fraction <= 1.0:
            raise ConfigError(
                f"participation_fraction must be in (0, 1], got {self.participation_fraction}"
            )
        if self.local_epochs < 1:
            raise ConfigError(f"local_epochs must be >= 1, got {self.local_epochs}")
        if self.mu < 0.0:
            raise ConfigError(f"mu must be >= 0, got {self.mu}")


@dataclass
class RoundRecord:
    round: int
    participants: tuple
    global_train_loss: float
    global_valid_loss: float
    per_client_losses: dict
    wall_time_ms: int
    train_acc: float | None = None
    valid_acc: float | None = None


def select_clients(client_ids, fraction: float, rng: np.random.Generator):
    """ceil(fraction * n) distinct ids, uniform without replacement, sorted."""
    ids = sorted(client_ids)
    if not ids:
        raise ConfigError("cannot select from an empty client list")
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"fraction must be in (0, 1], got {fraction}")
    k = math.ceil(fraction * len(ids))
    picked = rng.choice(len(ids), size=k, replace=False)
    return tuple(sorted(ids[i] for i in picked))


def _targets_for(client: ClientDataset, loss_kind: str, split: str):
    x = client.features(split)
    if loss_kind == "mse":
        return x, x
    if loss_kind == "bce":
        return x, client.labels_for(split).reshape(-1, 1)
    raise ConfigError(f"unknown loss kind {loss_kind!r}")


def _local_train(
    model_template: ModelState,
    global_params: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    loss_kind: str,
    opt_config,
    mu: float,
    epochs: int,
    batch_size: int,
    rng: np.random.Generator,
):
    if len(x) == 0:
        raise ConfigError("train split is empty")
    if global_params.shape != model_template.params.shape:
        raise ConfigError(
            f"global parameter length {global_params.size} != model "
            f"{model_template.params.size}"
        )
    model = ModelState(
        layers=model_template.layers, params=global_params.copy(), mode="train"
    )
    kind, lr = opt_config
    opt = make_optimizer(kind, lr, model.n_params)
    mask = trainable_mask(model.layers)
    loss_fn = mse_loss if loss_kind == "mse" else bce_loss

    epoch_loss = 0.0
    for _ in range(epochs):
        perm = rng.permutation(len(x))
        total = 0.0
        for start in range(0, len(x), batch_size):
            idx = perm[start : start + batch_size]
            out, cache = forward(model, x[idx], rng_seed=int(rng.integers(0, 2**63)))
            loss, loss_grad = loss_fn(out, y[idx])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite training loss {loss}")
            grad = backward(model, cache, loss_grad)
            if mu != 0.0:
                delta = model.params - global_params
                grad = grad + mu * np.where(mask, delta, 0.0)
            optimizer_step(opt, model, grad)
            total += loss * len(idx)
        epoch_loss = total / len(x)
    return params_as_vector(model), epoch_loss


def local_update_fedavg(
    global_params, client_data, loss_kind, opt_config, epochs, batch_size, rng, *, model
):
    """One client's plain local pass; returns (params, final-epoch mean loss)."""
    x, y = _targets_for(client_data, loss_kind, "train")
    return _local_train(
        model, np.asarray(global_params, dtype=np.float64),
        x, y, loss_kind, opt_config, 0.0, epochs, batch_size, rng,
    )


def local_update_fedprox(
    global_params, client_data, loss_kind, opt_config, mu, epochs, batch_size, rng, *, model
):
    """Local pass with proximal pull mu*(w - w_broadcast) on trainable slices."""
    if mu < 0.0:
        raise ConfigError(f"mu must be >= 0, got {mu}")
    x, y = _targets_for(client_data, loss_kind, "train")
    return _local_train(
        model, np.asarray(global_params, dtype=np.float64),
        x, y, loss_kind, opt_config, mu, epochs, batch_size, rng,
    )


def aggregate(weighted) -> np.ndarray:
    """Sample-size-weighted mean of parameter vectors.

    Per-coordinate addends are sorted before summation and the result is
    clipped to the per-coordinate hull, making the output exactly invariant
    to input permutation, exactly idempotent on identical inputs, and
    always a convex combination.
    """
    if not weighted:
        raise ConfigError("nothing to aggregate")
    vectors = [np.asarray(p, dtype=np.float64) for p, _ in weighted]
    lengths = {v.shape for v in vectors}
    if len(lengths) != 1 or vectors[0].ndim != 1:
        raise ConfigError(f"parameter vectors must share one length, got {lengths}")
    stack = np.stack(vectors)
    sizes = [n for _, n in weighted]
    if any(n <= 0 for n in sizes):
        raise ConfigError(f"sample sizes must be positive, got {sizes}")
    w = np.asarray(sizes, dtype=np.float64)

    products = stack * w[:, None]
    products.sort(axis=0)
    result = products.sum(axis=0) / math.fsum(w)
    np.clip(result, stack.min(axis=0), stack.max(axis=0), out=result)
    return result


def global_loss(per_client) -> float:
    """Size-weighted mean loss over clients: sum r_k F_k / sum r_k."""
    if not per_client:
        raise ConfigError("no client losses to combine")
    if any(n <= 0 for _, n in per_client):
        raise ConfigError("sample counts must be positive")
    num = sum(loss * n for loss, n in per_client)
    den = sum(n for _, n in per_client)
    return num / den


def eval_metrics(model: ModelState, x: np.ndarray, y: np.ndarray, loss_kind: str):
    """Eval-mode loss (and accuracy for classification) over one split."""
    was = model.mode
    model.eval()
    try:
        loss_sum = 0.0
        correct = 0
        n_elems = 0
        for start in range(0, len(x), _EVAL_CHUNK):
            xb = x[start : start + _EVAL_CHUNK]
            yb = y[start : start + _EVAL_CHUNK]
            out, _ = forward(model, xb)
            if loss_kind == "mse":
                with np.errstate(over="ignore"):  # divergence handled by caller
                    diff = out - xb
                    loss_sum += float(np.sum(diff * diff))
                n_elems += diff.size
            else:
                p = np.clip(out, BCE_EPS, 1.0 - BCE_EPS)
                loss_sum += float(
                    -np.sum(yb * np.log(p) + (1.0 - yb) * np.log1p(-p))
                )
                n_elems += p.size
                correct += int(np.sum((out >= 0.5) == (yb >= 0.5)))
        loss = loss_sum / n_elems if n_elems else 0.0
        acc = correct / len(x) if loss_kind == "bce" and len(x) else None
        return loss, acc
    finally:
        model.mode = was


def run_rounds(
    config: FederationConfig,
    clients,
    model_template: ModelState,
    loss_kind: str,
    algorithm: str,
    opt_config=("sgd", 0.001),
    n_threads: int = 1,
):
    """Full communication loop; returns (final global params, round history).

    Raises NumericError with the completed rounds attached if any loss goes
    non-finite mid-run.
    """
    if algorithm not in ("fedavg", "fedprox"):
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    if len(clients) != config.n_clients:
        raise ConfigError(
            f"expected {config.n_clients} clients, got {len(clients)}"
        )
    by_id = {c.client_id: c for c in clients}
    if len(by_id) != len(clients):
        raise ConfigError("client ids must be unique")
    mu = config.mu if algorithm == "fedprox" else 0.0

    staged = {}
    for cid in sorted(by_id):
        client = by_id[cid]
        x_tr, y_tr = _targets_for(client, loss_kind, "train")
        x_va, y_va = _targets_for(client, loss_kind, "valid")
        staged[cid] = (x_tr, y_tr, x_va, y_va)

    fixed_participants = None
    if not config.resample_each_round:
        fixed_participants = select_clients(
            by_id, config.participation_fraction, derive_rng(config.seed, _SELECT_STREAM, 0)
        )

    global_params = params_as_vector(model_template)
    eval_model = ModelState(
        layers=model_template.layers, params=global_params.copy(), mode="eval"
    )
    history: list[RoundRecord] = []

    def run_client(round_idx, cid, broadcast):
        x_tr, y_tr = staged[cid][0], staged[cid][1]
        rng = derive_rng(config.seed, _LOCAL_STREAM, round_idx, cid)
        try:
            return _local_train(
                model_template, broadcast, x_tr, y_tr, loss_kind,
                opt_config, mu, config.local_epochs, config.batch_size, rng,
            )
        except Exception as exc:
            raise type(exc)(f"client {cid}: {exc}") from exc

    for round_idx in range(1, config.rounds + 1):
        started = time.perf_counter()
        if fixed_participants is not None:
            participants = fixed_participants
        else:
            participants = select_clients(
                by_id,
                config.participation_fraction,
                derive_rng(config.seed, _SELECT_STREAM, round_idx),
            )

        try:
            if n_threads > 1:
                with ThreadPoolExecutor(max_workers=n_threads) as pool:
                    futs = {
                        cid: pool.submit(run_client, round_idx, cid, global_params)
                        for cid in participants
                    }
                    results = {cid: futs[cid].result() for cid in participants}
            else:
                results = {
                    cid: run_client(round_idx, cid, global_params)
                    for cid in participants
                }
        except NumericError as exc:
            raise NumericError(str(exc), partial_history=history) from exc

        global_params = aggregate(
            [(results[cid][0], len(staged[cid][0])) for cid in participants]
        )

        load_params(eval_model, global_params)
        train_entries, valid_entries = [], []
        correct_tr = total_tr = correct_va = total_va = 0
        for cid in sorted(by_id):
            x_tr, y_tr, x_va, y_va = staged[cid]
            loss_tr, acc_tr = eval_metrics(eval_model, x_tr, y_tr, loss_kind)
            train_entries.append((loss_tr, len(x_tr)))
            if len(x_va):
                loss_va, acc_va = eval_metrics(eval_model, x_va, y_va, loss_kind)
                valid_entries.append((loss_va, len(x_va)))
            if loss_kind == "bce":
                correct_tr += round(acc_tr * len(x_tr))
                total_tr += len(x_tr)
                if len(x_va):
                    correct_va += round(acc_va * len(x_va))
                    total_va += len(x_va)

        g_train = global_loss(train_entries)
        g_valid = global_loss(valid_entries) if valid_entries else float("nan")
        if not np.isfinite(g_train) or (valid_entries and not np.isfinite(g_valid)):
            raise NumericError(
                f"non-finite global loss at round {round_idx}", partial_history=history
            )

        history.append(
            RoundRecord(
                round=round_idx,
                participants=participants,
                global_train_loss=g_train,
                global_valid_loss=g_valid,
                per_client_losses={cid: results[cid][1] for cid in participants},
                wall_time_ms=int((time.perf_counter() - started) * 1000),
                train_acc=(correct_tr / total_tr) if loss_kind == "bce" else None,
                valid_acc=(correct_va / total_va) if loss_kind == "bce" and total_va else None,
            )
        )

    return global_params, history
