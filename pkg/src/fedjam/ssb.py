"""SSB resource grid assembly and OFDM modulation.

The block spans 4 OFDM symbols over a 240-subcarrier band at the bottom of
the FFT grid. PSS sits in symbol 0 and SSS in symbol 2, both on
subcarriers 56..182; the remaining in-band resource elements belong to
PBCH and are filled with either zeros or seeded unit-magnitude QPSK.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .sequences import SEQ_LEN, CellIdentity, gen_pss, gen_sss

N_SYMBOLS = 4
SSB_BAND = 240
SEQ_START = 56
PSS_ROW = 0
SSS_ROW = 2

# PBCH occupies symbols 1 and 3 across the band, plus the band edges of the
# SSS symbol (guards of 8 and 9 subcarriers are left around the SSS).
_PBCH_SLOTS = (
    (1, 0, SSB_BAND),
    (2, 0, 48),
    (2, 192, SSB_BAND),
    (3, 0, SSB_BAND),
)

_QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)


@dataclass
class SsbGrid:
    """Frequency-domain SSB: 4 x n_fft complex resource elements."""

    symbols: np.ndarray
    n_fft: int
    cell: CellIdentity

    def __post_init__(self):
        if self.symbols.shape != (N_SYMBOLS, self.n_fft):
            raise ConfigError(
                f"grid must be {N_SYMBOLS} x {self.n_fft}, got {self.symbols.shape}"
            )


def build_ssb_grid(
    cell: CellIdentity,
    n_fft: int,
    pbch_fill: str = "random_qpsk",
    seed: int = 0,
) -> SsbGrid:
    """Assemble the 4-symbol SSB grid for one cell.

    n_fft must be a power of two of at least 256 so the 240-subcarrier
    block fits. pbch_fill is 'zeros' or 'random_qpsk'.
    """
    if n_fft < 256 or (n_fft & (n_fft - 1)) != 0:
        raise ConfigError(
            f"n_fft must be a power of two >= 256 to carry the SSB band, got {n_fft}"
        )
    if pbch_fill not in ("zeros", "random_qpsk"):
        raise ConfigError(f"unknown pbch_fill {pbch_fill!r}")

    grid = np.zeros((N_SYMBOLS, n_fft), dtype=np.complex128)
    grid[PSS_ROW, SEQ_START : SEQ_START + SEQ_LEN] = gen_pss(cell.n2)
    grid[SSS_ROW, SEQ_START : SEQ_START + SEQ_LEN] = gen_sss(cell)

    if pbch_fill == "random_qpsk":
        rng = np.random.default_rng(seed)
        for row, lo, hi in _PBCH_SLOTS:
            grid[row, lo:hi] = _QPSK[rng.integers(0, 4, size=hi - lo)]

    return SsbGrid(symbols=grid, n_fft=n_fft, cell=cell)


def ofdm_modulate(grid: SsbGrid, cp_len: int) -> np.ndarray:
    """IFFT each symbol row, prepend a cyclic prefix, concatenate in order.

    Row l maps to s_l(m) = (1/N) sum_k S_{l,k} exp(j 2 pi k m / N); output
    length is 4 * (n_fft + cp_len).
    """
    if not 0 <= cp_len < grid.n_fft:
        raise ConfigError(f"cp_len must be in [0, {grid.n_fft}), got {cp_len}")
    pieces = []
    for row in grid.symbols:
        sym = np.fft.ifft(row)
        if cp_len:
            pieces.append(sym[-cp_len:])
        pieces.append(sym)
    return np.concatenate(pieces)


def symbol_window_length(n_fft: int, cp_len: int) -> int:
    """Time-domain samples produced for the full 4-symbol block."""
    return N_SYMBOLS * (n_fft + cp_len)
