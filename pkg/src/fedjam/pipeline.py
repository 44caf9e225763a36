"""Two-stage experiment orchestration and evaluation.

Stage 1 trains an autoencoder by federated averaging of reconstruction
losses; stage 2 grafts a fresh classification head onto the frozen encoder
and trains it with the proximal algorithm. Evaluation pools confusion
counts over every client's test split, and a PCA diagnostic visualizes
cross-client heterogeneity.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import ClientDataset
from .errors import ConfigError
from .federated import FederationConfig, run_rounds
from .nn import (
    ModelState,
    dense,
    dropout,
    forward,
    init_model,
    param_count,
    relu,
    sigmoid,
)
from .pca import top_components
from .seeding import derive_seed

_STAGE1_INIT = 201
_HEAD_INIT = 202
_BASELINE_INIT = {"fedavg": 301, "fedprox": 302}

_DEGENERATE_TRACE = 1e-20


@dataclass(frozen=True)
class StagePhase:
    rounds: int
    batch_size: int
    optimizer: str
    lr: float
    loss: str
    mu: float = 0.0


@dataclass(frozen=True)
class StageConfig:
    """Architecture widths and the two training phases."""

    stage1: StagePhase = StagePhase(15, 64, "sgd", 0.001, "mse")
    stage2: StagePhase = StagePhase(30, 200, "adam", 0.001, "bce", mu=0.01)
    encoder_widths: tuple = (512, 256, 128)
    decoder_widths: tuple = (128, 256, 512)
    head_widths: tuple = (1024, 512, 256, 1)
    cae_dropout: float = 0.2
    head_dropout: float = 0.5

    def __post_init__(self):
        for name in ("encoder_widths", "decoder_widths", "head_widths"):
            widths = getattr(self, name)
            if not widths or any(int(w) <= 0 for w in widths):
                raise ConfigError(f"{name} must be positive integers, got {widths}")
            object.__setattr__(self, name, tuple(int(w) for w in widths))
        if self.head_widths[-1] != 1:
            raise ConfigError(
                f"classifier head must end in width 1, got {self.head_widths}"
            )


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    accuracy: float
    threshold: float
    undefined: tuple = ()

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class ReportRow:
    algorithm: str
    n_clients: int
    precision: float
    recall: float
    f1: float
    accuracy: float


def _encoder_layers(input_dim: int, cfg: StageConfig, frozen: bool):
    layers = []
    d = input_dim
    for w in cfg.encoder_widths:
        layers += [dense(d, w, frozen=frozen), relu(), dropout(cfg.cae_dropout)]
        d = w
    return layers, d


def cae_layers(input_dim: int, cfg: StageConfig):
    layers, d = _encoder_layers(input_dim, cfg, frozen=False)
    for w in cfg.decoder_widths:
        layers += [dense(d, w), relu(), dropout(cfg.cae_dropout)]
        d = w
    layers.append(dense(d, input_dim))
    return tuple(layers)


def classifier_layers(input_dim: int, cfg: StageConfig, freeze_encoder: bool = True):
    layers, d = _encoder_layers(input_dim, cfg, frozen=freeze_encoder)
    for w in cfg.head_widths[:-1]:
        layers += [dense(d, w), relu(), dropout(cfg.head_dropout)]
        d = w
    layers += [dense(d, cfg.head_widths[-1]), sigmoid()]
    return tuple(layers)


def encoder_param_count(input_dim: int, cfg: StageConfig) -> int:
    layers, _ = _encoder_layers(input_dim, cfg, frozen=False)
    return param_count(tuple(layers))


def build_cae(input_dim: int, cfg: StageConfig, seed: int) -> ModelState:
    return init_model(cae_layers(input_dim, cfg), seed)


def build_classifier(
    cae_params: np.ndarray, cfg: StageConfig, input_dim: int, seed: int
) -> ModelState:
    """Frozen pretrained encoder plus a freshly initialized trainable head."""
    cae_params = np.asarray(cae_params, dtype=np.float64)
    expected = param_count(cae_layers(input_dim, cfg))
    if cae_params.size != expected:
        raise ConfigError(
            f"autoencoder parameter vector has {cae_params.size} entries, "
            f"expected {expected} for widths {cfg.encoder_widths}/{cfg.decoder_widths} "
            f"at input dim {input_dim}"
        )
    model = init_model(classifier_layers(input_dim, cfg, freeze_encoder=True), seed)
    n_enc = encoder_param_count(input_dim, cfg)
    model.params[:n_enc] = cae_params[:n_enc]
    return model


def shared_input_dim(clients) -> int:
    dims = {c.feature_dim for c in clients}
    if len(dims) != 1:
        raise ConfigError(f"clients disagree on input dimension: {sorted(dims)}")
    return dims.pop()


def _phase_config(fed_cfg: FederationConfig, phase: StagePhase, mu: float):
    return replace(fed_cfg, rounds=phase.rounds, batch_size=phase.batch_size, mu=mu)


def run_stage1(clients, stage_cfg: StageConfig, fed_cfg: FederationConfig, n_threads: int = 1):
    """Federated-averaging autoencoder pretraining; returns (params, history)."""
    input_dim = shared_input_dim(clients)
    model = build_cae(input_dim, stage_cfg, derive_seed(fed_cfg.seed, _STAGE1_INIT))
    phase = stage_cfg.stage1
    cfg = _phase_config(fed_cfg, phase, mu=0.0)
    return run_rounds(
        cfg, clients, model, phase.loss, "fedavg",
        opt_config=(phase.optimizer, phase.lr), n_threads=n_threads,
    )


def run_stage2(
    clients, classifier: ModelState, stage_cfg: StageConfig,
    fed_cfg: FederationConfig, n_threads: int = 1,
):
    """Proximal federated training of the classification head."""
    phase = stage_cfg.stage2
    cfg = _phase_config(fed_cfg, phase, mu=phase.mu)
    return run_rounds(
        cfg, clients, classifier, phase.loss, "fedprox",
        opt_config=(phase.optimizer, phase.lr), n_threads=n_threads,
    )


def metrics_from_counts(tp: int, fp: int, fn: int, tn: int, threshold: float) -> EvalReport:
    undefined = []

    def ratio(num, den, name):
        if den == 0:
            undefined.append(name)
            return 0.0
        return num / den

    precision = ratio(tp, tp + fp, "precision")
    recall = ratio(tp, tp + fn, "recall")
    f1 = ratio(2 * precision * recall, precision + recall, "f1")
    accuracy = ratio(tp + tn, tp + fp + fn + tn, "accuracy")
    return EvalReport(
        tp=tp, fp=fp, fn=fn, tn=tn,
        precision=precision, recall=recall, f1=f1, accuracy=accuracy,
        threshold=threshold, undefined=tuple(undefined),
    )


def evaluate(
    model: ModelState, params: np.ndarray, clients, threshold: float = 0.5
) -> EvalReport:
    """Pooled confusion metrics over every client's test split."""
    scratch = ModelState(
        layers=model.layers, params=np.asarray(params, dtype=np.float64).copy(),
        mode="eval",
    )
    if scratch.params.size != model.params.size:
        raise ConfigError("parameter vector does not match the classifier")
    tp = fp = fn = tn = 0
    total = 0
    for client in clients:
        x = client.features("test")
        if len(x) == 0:
            raise ConfigError(f"client {client.client_id} has an empty test split")
        y = client.labels_for("test")
        probs, _ = forward(scratch, x)
        pred = probs[:, 0] >= threshold
        truth = y >= 0.5
        tp += int(np.sum(pred & truth))
        fp += int(np.sum(pred & ~truth))
        fn += int(np.sum(~pred & truth))
        tn += int(np.sum(~pred & ~truth))
        total += len(x)
    report = metrics_from_counts(tp, fp, fn, tn, threshold)
    assert report.total == total
    return report


def pca_diagnostic(clients, n_components: int = 2):
    """Top principal components of the pooled standardized observations.

    Returns (client_ids[N], projections[N, k], explained_variance_ratios[k])
    with components in descending variance order. Zero-variance data maps
    to all-zero projections and ratios.
    """
    if not clients:
        raise ConfigError("no clients given")
    blocks = [c.features(None) for c in clients]
    ids = np.concatenate(
        [np.full(len(b), c.client_id, dtype=np.int64) for c, b in zip(clients, blocks)]
    )
    pooled = np.vstack(blocks)
    if len(pooled) < 2:
        raise ConfigError("need at least two observations for a PCA diagnostic")

    centered = pooled - pooled.mean(axis=0)
    cov = centered.T @ centered / (len(pooled) - 1)
    trace = float(np.trace(cov))
    scale = max(1.0, float(np.mean(pooled * pooled)))
    if trace <= _DEGENERATE_TRACE * scale:
        return ids, np.zeros((len(pooled), n_components)), np.zeros(n_components)

    values, vectors = top_components(cov, n_components)
    ratios = np.maximum(values, 0.0) / trace
    return ids, centered @ vectors, ratios


def _baseline_row(
    algorithm: str, clients, stage_cfg: StageConfig, fed_cfg: FederationConfig,
    n_threads: int,
) -> ReportRow:
    """Single-phase end-to-end training of the full network with one aggregator."""
    input_dim = shared_input_dim(clients)
    phase = stage_cfg.stage2
    model = init_model(
        classifier_layers(input_dim, stage_cfg, freeze_encoder=False),
        derive_seed(fed_cfg.seed, _BASELINE_INIT[algorithm]),
    )
    mu = phase.mu if algorithm == "fedprox" else 0.0
    opt = ("sgd", phase.lr) if algorithm == "fedavg" else (phase.optimizer, phase.lr)
    cfg = _phase_config(fed_cfg, phase, mu=mu)
    params, history = run_rounds(
        cfg, clients, model, phase.loss, algorithm, opt_config=opt, n_threads=n_threads
    )
    report = evaluate(model, params, clients)
    n_part = len(history[-1].participants)
    return ReportRow(
        algorithm=algorithm, n_clients=n_part,
        precision=report.precision, recall=report.recall,
        f1=report.f1, accuracy=report.accuracy,
    )


def run_two_stage(
    clients, stage_cfg: StageConfig, fed_cfg: FederationConfig, n_threads: int = 1
):
    """Stage 1 + freeze + stage 2; returns (classifier, params, histories, report)."""
    input_dim = shared_input_dim(clients)
    cae_params, history1 = run_stage1(clients, stage_cfg, fed_cfg, n_threads)
    classifier = build_classifier(
        cae_params, stage_cfg, input_dim, derive_seed(fed_cfg.seed, _HEAD_INIT)
    )
    params, history2 = run_stage2(clients, classifier, stage_cfg, fed_cfg, n_threads)
    report = evaluate(classifier, params, clients)
    return classifier, params, (history1, history2), report


def run_table_grid(
    clients, stage_cfg: StageConfig, fed_cfg: FederationConfig,
    fractions=(1.0, 0.5), n_threads: int = 1,
):
    """The six-way comparison: each algorithm at full and half participation."""
    rows = []
    for algorithm in ("fedavg", "fedprox", "two_stage"):
        for fraction in fractions:
            cfg = replace(fed_cfg, participation_fraction=fraction)
            if algorithm == "two_stage":
                _, _, histories, report = run_two_stage(
                    clients, stage_cfg, cfg, n_threads
                )
                n_part = len(histories[1][-1].participants)
                rows.append(
                    ReportRow(
                        algorithm="fedavg+fedprox", n_clients=n_part,
                        precision=report.precision, recall=report.recall,
                        f1=report.f1, accuracy=report.accuracy,
                    )
                )
            else:
                rows.append(
                    _baseline_row(algorithm, clients, stage_cfg, cfg, n_threads)
                )
    return rows
