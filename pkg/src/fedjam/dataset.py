"""Per-client labeled SSB datasets: synthesis, feature encoding, file I/O.

Each observation is one received SSB window (complex IQ) labeled pure (0)
or jammed (1). Datasets are balanced by construction, shuffled
deterministically, and carry train/valid/test tags per record. IQ is
quantized to complex64 at synthesis time so the on-disk format round-trips
losslessly.
"""

import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataFormatError
from .impairments import ChannelSpec, JammerSpec, apply_impairments
from .sequences import CellIdentity
from .seeding import derive_rng, derive_seed
from .ssb import build_ssb_grid, ofdm_modulate, symbol_window_length

H0_PURE = 0
H1_JAMMED = 1

TRAIN, VALID, TEST = 0, 1, 2
_SPLIT_NAMES = {"train": TRAIN, "valid": VALID, "test": TEST}

_MAGIC = b"SSBD"
_VERSION = 1
_HEADER = struct.Struct("<4sHHIIIIIII")


@dataclass(frozen=True)
class SsbObservation:
    """One received SSB window and its hypothesis label."""

    iq: np.ndarray
    label: int


@dataclass(frozen=True)
class ClientProfile:
    """Everything needed to synthesize one client's dataset."""

    client_id: int
    femtocell_id: int
    cell: CellIdentity
    channel: ChannelSpec
    jammer: JammerSpec
    n_obs: int
    split: tuple = (0.72, 0.08, 0.20)
    n_fft: int = 256
    cp_len: int = 0
    pbch_fill: str = "random_qpsk"
    q_len: int | None = None

    def __post_init__(self):
        if self.n_obs <= 0 or self.n_obs % 2 != 0:
            raise ConfigError(f"n_obs must be positive and even, got {self.n_obs}")
        if len(self.split) != 3 or any(f <= 0 for f in self.split):
            raise ConfigError(f"split must be three positive fractions, got {self.split}")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {self.split}")
        full = symbol_window_length(self.n_fft, self.cp_len)
        if self.q_len is not None and not 0 < self.q_len <= full:
            raise ConfigError(f"q_len must be in (0, {full}], got {self.q_len}")

    @property
    def window_len(self) -> int:
        return self.q_len or symbol_window_length(self.n_fft, self.cp_len)

    def split_counts(self) -> tuple:
        n_train = round(self.split[0] * self.n_obs)
        n_valid = round(self.split[1] * self.n_obs)
        return n_train, n_valid, self.n_obs - n_train - n_valid


@dataclass
class ClientDataset:
    """One client's observations in shuffled record order."""

    client_id: int
    femtocell_id: int
    iq: np.ndarray  # [n_obs, q_len] complex64
    labels: np.ndarray  # [n_obs] uint8
    split_tags: np.ndarray  # [n_obs] uint8, 0=train 1=valid 2=test
    profile: ClientProfile | None = None
    _stats: tuple | None = field(default=None, repr=False)

    @property
    def n_obs(self) -> int:
        return self.iq.shape[0]

    @property
    def q_len(self) -> int:
        return self.iq.shape[1]

    @property
    def feature_dim(self) -> int:
        return 2 * self.q_len

    def indices(self, split: str) -> np.ndarray:
        return np.flatnonzero(self.split_tags == _SPLIT_NAMES[split])

    def observations(self):
        for row, label in zip(self.iq, self.labels):
            yield SsbObservation(iq=row, label=int(label))

    def feature_stats(self) -> tuple:
        """Scalar mean/std of the interleaved train-split features."""
        if self._stats is None:
            train = self._raw_features(self.indices("train"))
            if train.size == 0:
                raise ConfigError(
                    f"client {self.client_id}: train split is empty, "
                    "cannot standardize features"
                )
            mean = float(train.mean())
            std = float(train.std())
            self._stats = (mean, std if std > 0.0 else 1.0)
        return self._stats

    def _raw_features(self, idx) -> np.ndarray:
        block = self.iq[idx]
        out = np.empty((block.shape[0], 2 * block.shape[1]), dtype=np.float64)
        out[:, 0::2] = block.real
        out[:, 1::2] = block.imag
        return out

    def features(self, split: str | None = None) -> np.ndarray:
        """Standardized real feature matrix; stats come from the train split only."""
        idx = np.arange(self.n_obs) if split is None else self.indices(split)
        mean, std = self.feature_stats()
        return (self._raw_features(idx) - mean) / std

    def labels_for(self, split: str | None = None) -> np.ndarray:
        idx = np.arange(self.n_obs) if split is None else self.indices(split)
        return self.labels[idx].astype(np.float64)


def synth_observation(profile: ClientProfile, index: int, jammed: bool) -> np.ndarray:
    """One received window for observation `index` of this profile.

    PBCH content, channel/noise, and jammer realizations each come from
    their own stream derived off the profile seeds and the index, so the
    jammed and pure variants of the same index share everything but the
    jammer component.
    """
    q = profile.window_len
    pbch_seed = derive_seed(profile.channel.seed, profile.jammer.seed, index, 1)
    grid = build_ssb_grid(profile.cell, profile.n_fft, profile.pbch_fill, pbch_seed)
    clean = ofdm_modulate(grid, profile.cp_len)[:q]
    channel = replace(profile.channel, seed=derive_seed(profile.channel.seed, index, 2))
    jammer = None
    if jammed:
        jammer = replace(profile.jammer, seed=derive_seed(profile.jammer.seed, index, 3))
    received = apply_impairments(
        clean, channel, jammer, n_fft=profile.n_fft, cp_len=profile.cp_len
    )
    return received.astype(np.complex64)


def synth_client_dataset(profile: ClientProfile) -> ClientDataset:
    """Generate the balanced, shuffled, split dataset for one profile.

    Every observation uses fresh realizations via `synth_observation`, so
    the result is a pure function of the profile.
    """
    n = profile.n_obs
    q = profile.window_len
    labels = np.array([H0_PURE] * (n // 2) + [H1_JAMMED] * (n // 2), dtype=np.uint8)

    iq = np.empty((n, q), dtype=np.complex64)
    for i in range(n):
        iq[i] = synth_observation(profile, i, jammed=labels[i] == H1_JAMMED)

    order = derive_rng(
        profile.channel.seed, profile.jammer.seed, profile.client_id, 4
    ).permutation(n)
    n_train, n_valid, n_test = profile.split_counts()
    tags = np.empty(n, dtype=np.uint8)
    tags[:n_train] = TRAIN
    tags[n_train : n_train + n_valid] = VALID
    tags[n_train + n_valid :] = TEST

    return ClientDataset(
        client_id=profile.client_id,
        femtocell_id=profile.femtocell_id,
        iq=iq[order],
        labels=labels[order],
        split_tags=tags,
        profile=profile,
    )


def save_dataset(ds: ClientDataset, path) -> None:
    """Write the little-endian binary dataset file."""
    tags = ds.split_tags
    counts = (
        int(np.sum(tags == TRAIN)),
        int(np.sum(tags == VALID)),
        int(np.sum(tags == TEST)),
    )
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                _MAGIC, _VERSION, 0,
                ds.client_id, ds.femtocell_id,
                ds.n_obs, ds.q_len, *counts,
            )
        )
        for i in range(ds.n_obs):
            fh.write(struct.pack("<BB", int(ds.labels[i]), int(tags[i])))
            fh.write(ds.iq[i].astype("<c8").tobytes())


def load_dataset(path) -> ClientDataset:
    """Read a dataset file, validating structure and every record tag."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise DataFormatError(f"{path}: truncated header")
    magic, version, _, client_id, femto_id, n_obs, q_len, n_train, n_valid, n_test = (
        _HEADER.unpack_from(blob)
    )
    if magic != _MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    if n_train + n_valid + n_test != n_obs:
        raise DataFormatError(f"{path}: split counts do not sum to n_obs")

    rec_len = 2 + 8 * q_len
    expected = _HEADER.size + n_obs * rec_len
    if len(blob) != expected:
        raise DataFormatError(
            f"{path}: expected {expected} bytes for {n_obs} records, got {len(blob)}"
        )

    labels = np.empty(n_obs, dtype=np.uint8)
    tags = np.empty(n_obs, dtype=np.uint8)
    iq = np.empty((n_obs, q_len), dtype=np.complex64)
    off = _HEADER.size
    for i in range(n_obs):
        label, tag = struct.unpack_from("<BB", blob, off)
        if label not in (H0_PURE, H1_JAMMED):
            raise DataFormatError(f"{path}: record {i} has invalid label {label}")
        if tag not in (TRAIN, VALID, TEST):
            raise DataFormatError(f"{path}: record {i} has invalid split tag {tag}")
        labels[i] = label
        tags[i] = tag
        iq[i] = np.frombuffer(blob, dtype="<c8", count=q_len, offset=off + 2)
        off += rec_len

    found = (int(np.sum(tags == TRAIN)), int(np.sum(tags == VALID)), int(np.sum(tags == TEST)))
    if found != (n_train, n_valid, n_test):
        raise DataFormatError(f"{path}: record split tags disagree with header counts")

    return ClientDataset(
        client_id=client_id,
        femtocell_id=femto_id,
        iq=iq,
        labels=labels,
        split_tags=tags,
    )
