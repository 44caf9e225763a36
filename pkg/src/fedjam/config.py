"""Experiment configuration: JSON schema, client-profile generation, presets.

Configs are strict JSON: unknown keys are rejected with their path so a
typo can never silently fall back to a default. Clients come either from
an explicit ``client_profiles`` list or from a ``clients`` generator block
that draws heterogeneous per-client profiles off the master seed.
"""

import json
from dataclasses import dataclass, replace

from .dataset import ClientProfile
from .errors import ConfigError
from .federated import FederationConfig
from .impairments import JAMMER_KINDS, ChannelSpec, JammerSpec
from .pipeline import StageConfig, StagePhase
from .seeding import derive_rng, derive_seed
from .sequences import derive_pci

_GENERATOR_KEYS = {
    "n_clients", "n_obs", "n_fft", "cp_len", "q_len", "pbch_fill", "split",
    "snr_db_range", "jsr_db_range", "jammer_kinds", "tone_offset_range",
    "max_channel_taps", "n_femtocells",
}

_PROFILE_KEYS = {
    "client_id", "femtocell_id", "n1", "n2", "snr_db", "channel_taps",
    "channel_seed", "jammer_kind", "jsr_db", "tone_offset", "jammer_seed",
    "n_obs", "split", "n_fft", "cp_len", "pbch_fill", "q_len",
}

_PHASE_KEYS = {"rounds", "batch_size", "optimizer", "lr", "mu"}

_STAGES_KEYS = {
    "stage1", "stage2", "encoder_widths", "decoder_widths", "head_widths",
    "cae_dropout", "head_dropout",
}

_FEDERATION_KEYS = {"participation_fraction", "local_epochs", "resample_each_round"}

_TOP_KEYS = {
    "master_seed", "clients", "client_profiles", "stages", "federation",
    "threshold", "out_dir",
}


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int
    profiles: tuple
    stage: StageConfig
    federation: FederationConfig
    threshold: float = 0.5
    out_dir: str | None = None


def _reject_unknown(mapping: dict, allowed: set, path: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} at {path}")


def generate_profiles(master_seed: int, spec: dict) -> tuple:
    """Draw per-client heterogeneity from the generator block."""
    _reject_unknown(spec, _GENERATOR_KEYS, "clients")
    n_clients = int(spec.get("n_clients", 0))
    if n_clients < 1:
        raise ConfigError("clients.n_clients must be >= 1")
    n_obs = int(spec.get("n_obs", 600))
    n_fft = int(spec.get("n_fft", 256))
    cp_len = int(spec.get("cp_len", 0))
    q_len = spec.get("q_len")
    pbch_fill = spec.get("pbch_fill", "random_qpsk")
    split = tuple(spec.get("split", (0.72, 0.08, 0.20)))
    snr_lo, snr_hi = spec.get("snr_db_range", (5.0, 20.0))
    jsr_lo, jsr_hi = spec.get("jsr_db_range", (5.0, 15.0))
    kinds = tuple(spec.get("jammer_kinds", ("constant_tone", "wideband_noise")))
    for kind in kinds:
        if kind not in JAMMER_KINDS:
            raise ConfigError(f"unknown jammer kind {kind!r} in clients.jammer_kinds")
    tone_lo, tone_hi = spec.get("tone_offset_range", (0.05, 0.45))
    max_taps = int(spec.get("max_channel_taps", 1))
    if max_taps < 1:
        raise ConfigError("clients.max_channel_taps must be >= 1")
    n_femto = int(spec.get("n_femtocells", 3))

    profiles = []
    for i in range(n_clients):
        rng = derive_rng(master_seed, 71, i)
        cell = derive_pci(int(rng.integers(0, 336)), int(rng.integers(0, 3)))
        snr_db = float(rng.uniform(snr_lo, snr_hi))
        jsr_db = float(rng.uniform(jsr_lo, jsr_hi))
        kind = kinds[i % len(kinds)]
        tone = float(rng.uniform(tone_lo, tone_hi))
        n_taps = int(rng.integers(1, max_taps + 1))
        taps = [1.0 + 0.0j]
        for k in range(1, n_taps):
            scale = 0.3**k
            taps.append(complex(rng.normal(0, scale), rng.normal(0, scale)))
        profiles.append(
            ClientProfile(
                client_id=i,
                femtocell_id=1 + i % n_femto,
                cell=cell,
                channel=ChannelSpec(
                    taps=tuple(taps), snr_db=snr_db,
                    seed=derive_seed(master_seed, 72, i),
                ),
                jammer=JammerSpec(
                    kind=kind, jsr_db=jsr_db, tone_offset=tone,
                    seed=derive_seed(master_seed, 73, i),
                ),
                n_obs=n_obs,
                split=split,
                n_fft=n_fft,
                cp_len=cp_len,
                pbch_fill=pbch_fill,
                q_len=None if q_len is None else int(q_len),
            )
        )
    return tuple(profiles)


def _profile_from_dict(entry: dict, index: int) -> ClientProfile:
    path = f"client_profiles[{index}]"
    _reject_unknown(entry, _PROFILE_KEYS, path)
    try:
        taps = entry.get("channel_taps", [1.0])
        taps = tuple(
            complex(t[0], t[1]) if isinstance(t, (list, tuple)) else complex(t)
            for t in taps
        )
        return ClientProfile(
            client_id=int(entry["client_id"]),
            femtocell_id=int(entry.get("femtocell_id", 1)),
            cell=derive_pci(int(entry["n1"]), int(entry["n2"])),
            channel=ChannelSpec(
                taps=taps,
                snr_db=float(entry["snr_db"]),
                seed=int(entry.get("channel_seed", 0)),
            ),
            jammer=JammerSpec(
                kind=entry["jammer_kind"],
                jsr_db=float(entry["jsr_db"]),
                tone_offset=float(entry.get("tone_offset", 0.1)),
                seed=int(entry.get("jammer_seed", 0)),
            ),
            n_obs=int(entry["n_obs"]),
            split=tuple(entry.get("split", (0.72, 0.08, 0.20))),
            n_fft=int(entry.get("n_fft", 256)),
            cp_len=int(entry.get("cp_len", 0)),
            pbch_fill=entry.get("pbch_fill", "random_qpsk"),
            q_len=None if entry.get("q_len") is None else int(entry["q_len"]),
        )
    except KeyError as exc:
        raise ConfigError(f"{path}: missing required key {exc.args[0]!r}") from exc


def _phase_from_dict(entry: dict, default: StagePhase, path: str) -> StagePhase:
    _reject_unknown(entry, _PHASE_KEYS, path)
    return StagePhase(
        rounds=int(entry.get("rounds", default.rounds)),
        batch_size=int(entry.get("batch_size", default.batch_size)),
        optimizer=entry.get("optimizer", default.optimizer),
        lr=float(entry.get("lr", default.lr)),
        loss=default.loss,
        mu=float(entry.get("mu", default.mu)),
    )


def _stages_from_dict(entry: dict) -> StageConfig:
    _reject_unknown(entry, _STAGES_KEYS, "stages")
    base = StageConfig()
    return StageConfig(
        stage1=_phase_from_dict(entry.get("stage1", {}), base.stage1, "stages.stage1"),
        stage2=_phase_from_dict(entry.get("stage2", {}), base.stage2, "stages.stage2"),
        encoder_widths=tuple(entry.get("encoder_widths", base.encoder_widths)),
        decoder_widths=tuple(entry.get("decoder_widths", base.decoder_widths)),
        head_widths=tuple(entry.get("head_widths", base.head_widths)),
        cae_dropout=float(entry.get("cae_dropout", base.cae_dropout)),
        head_dropout=float(entry.get("head_dropout", base.head_dropout)),
    )


def config_from_dict(data: dict, seed_override: int | None = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(data, _TOP_KEYS, "top level")
    if "master_seed" not in data:
        raise ConfigError("config requires 'master_seed'")
    master_seed = int(data["master_seed"]) if seed_override is None else int(seed_override)

    has_gen = "clients" in data
    has_list = "client_profiles" in data
    if has_gen == has_list:
        raise ConfigError("config needs exactly one of 'clients' or 'client_profiles'")
    if has_gen:
        profiles = generate_profiles(master_seed, data["clients"])
    else:
        entries = data["client_profiles"]
        if not entries:
            raise ConfigError("client_profiles must be non-empty")
        profiles = tuple(_profile_from_dict(e, i) for i, e in enumerate(entries))
        ids = [p.client_id for p in profiles]
        if len(set(ids)) != len(ids):
            raise ConfigError("client_profiles contain duplicate client_id values")

    stage = _stages_from_dict(data.get("stages", {}))

    fed_entry = data.get("federation", {})
    _reject_unknown(fed_entry, _FEDERATION_KEYS, "federation")
    federation = FederationConfig(
        n_clients=len(profiles),
        rounds=stage.stage1.rounds,
        batch_size=stage.stage1.batch_size,
        participation_fraction=float(fed_entry.get("participation_fraction", 1.0)),
        local_epochs=int(fed_entry.get("local_epochs", 1)),
        resample_each_round=bool(fed_entry.get("resample_each_round", False)),
        seed=master_seed,
    )

    threshold = float(data.get("threshold", 0.5))
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must be in (0, 1), got {threshold}")

    return ExperimentConfig(
        master_seed=master_seed,
        profiles=profiles,
        stage=stage,
        federation=federation,
        threshold=threshold,
        out_dir=data.get("out_dir"),
    )


def load_config(path, seed_override: int | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data, seed_override)


def desk_stage_config() -> StageConfig:
    """Laptop-scale widths for the 2048-dim desk input."""
    return StageConfig(
        encoder_widths=(128, 64, 32),
        decoder_widths=(32, 64, 128),
        head_widths=(256, 128, 64, 1),
    )


def desk_preset(
    n_clients: int = 6, n_obs: int = 600, master_seed: int = 7, **federation_overrides
) -> ExperimentConfig:
    """Small heterogeneous experiment that trains in CPU minutes."""
    profiles = generate_profiles(
        master_seed,
        {
            "n_clients": n_clients,
            "n_obs": n_obs,
            "n_fft": 256,
            "cp_len": 0,
            "snr_db_range": (5.0, 20.0),
            "jsr_db_range": (5.0, 15.0),
            "jammer_kinds": ("constant_tone", "wideband_noise"),
        },
    )
    stage = desk_stage_config()
    federation = FederationConfig(
        n_clients=n_clients,
        rounds=stage.stage1.rounds,
        batch_size=stage.stage1.batch_size,
        seed=master_seed,
        **federation_overrides,
    )
    return ExperimentConfig(
        master_seed=master_seed, profiles=profiles, stage=stage, federation=federation
    )


def paper_scale_preset(n_clients: int = 12, master_seed: int = 7) -> ExperimentConfig:
    """Full-size preset: 5000 observations of 3297 IQ samples per client."""
    profiles = generate_profiles(
        master_seed,
        {
            "n_clients": n_clients,
            "n_obs": 5000,
            "n_fft": 1024,
            "cp_len": 0,
            "q_len": 3297,
        },
    )
    stage = StageConfig()
    federation = FederationConfig(
        n_clients=n_clients,
        rounds=stage.stage1.rounds,
        batch_size=stage.stage1.batch_size,
        seed=master_seed,
    )
    return ExperimentConfig(
        master_seed=master_seed, profiles=profiles, stage=stage, federation=federation
    )
