"""Channel, noise, and jammer impairments applied to clean SSB waveforms.

Noise and jammer powers are calibrated against the post-channel signal
power measured over the observation window, so the configured SNR/JSR hold
exactly per window rather than only in expectation.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .sequences import SEQ_LEN, gen_pss
from .ssb import SEQ_START

NOISE_OFF = math.inf

JAMMER_KINDS = ("constant_tone", "wideband_noise", "pss_replay")


@dataclass(frozen=True)
class ChannelSpec:
    """FIR channel taps plus AWGN level; snr_db = NOISE_OFF disables noise."""

    taps: tuple
    snr_db: float
    seed: int

    def __post_init__(self):
        taps = tuple(complex(t) for t in self.taps)
        if not taps:
            raise ConfigError("channel taps must be non-empty")
        if taps[0] == 0:
            raise ConfigError("channel tap 0 must be nonzero")
        object.__setattr__(self, "taps", taps)


@dataclass(frozen=True)
class JammerSpec:
    """One jamming waveform at a target jammer-to-signal ratio."""

    kind: str
    jsr_db: float
    tone_offset: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in JAMMER_KINDS:
            raise ConfigError(f"unknown jammer kind {self.kind!r}")
        if self.kind == "constant_tone" and not -0.5 < self.tone_offset < 0.5:
            raise ConfigError(
                f"tone_offset must be in (-0.5, 0.5), got {self.tone_offset}"
            )


def _scaled_to_power(wave: np.ndarray, target_power: float) -> np.ndarray:
    measured = float(np.mean(np.abs(wave) ** 2))
    if measured == 0.0 or target_power == 0.0:
        return np.zeros_like(wave)
    return wave * math.sqrt(target_power / measured)


def jammer_waveform(
    jammer: JammerSpec,
    n_samples: int,
    signal_power: float,
    n_fft: int = 256,
    cp_len: int = 0,
) -> np.ndarray:
    """Synthesize the jammer component scaled to jsr_db over the window."""
    rng = np.random.default_rng(jammer.seed)
    target = signal_power * 10.0 ** (jammer.jsr_db / 10.0)
    m = np.arange(n_samples)

    if jammer.kind == "constant_tone":
        phase = rng.uniform(0.0, 2.0 * np.pi)
        wave = np.exp(1j * (2.0 * np.pi * jammer.tone_offset * m + phase))
    elif jammer.kind == "wideband_noise":
        wave = rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)
    else:  # pss_replay: loop one PSS symbol with a random time shift
        n2 = int(rng.integers(0, 3))
        row = np.zeros(n_fft, dtype=np.complex128)
        row[SEQ_START : SEQ_START + SEQ_LEN] = gen_pss(n2)
        sym = np.fft.ifft(row)
        if cp_len:
            sym = np.concatenate([sym[-cp_len:], sym])
        reps = -(-n_samples // len(sym))
        wave = np.tile(sym, reps)[:n_samples]
        wave = np.roll(wave, int(rng.integers(0, n_samples)))

    return _scaled_to_power(wave, target)


def apply_impairments(
    clean: np.ndarray,
    channel: ChannelSpec,
    jammer: JammerSpec | None = None,
    n_fft: int = 256,
    cp_len: int = 0,
) -> np.ndarray:
    """Convolve with the channel, then add calibrated AWGN and jammer.

    The convolution keeps the input length (tail truncated). n_fft/cp_len
    only parameterize the pss_replay jammer's re-modulation.
    """
    clean = np.asarray(clean, dtype=np.complex128)
    if clean.size == 0:
        raise ConfigError("clean waveform must be non-empty")

    taps = np.asarray(channel.taps, dtype=np.complex128)
    received = np.convolve(clean, taps)[: len(clean)]
    signal_power = float(np.mean(np.abs(received) ** 2))

    if channel.snr_db != NOISE_OFF:
        rng = np.random.default_rng(channel.seed)
        raw = rng.standard_normal(len(clean)) + 1j * rng.standard_normal(len(clean))
        target = signal_power / 10.0 ** (channel.snr_db / 10.0)
        received = received + _scaled_to_power(raw, target)

    if jammer is not None:
        received = received + jammer_waveform(
            jammer, len(clean), signal_power, n_fft=n_fft, cp_len=cp_len
        )

    return received
