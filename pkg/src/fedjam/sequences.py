"""5G NR synchronization sequences (TS 38.211 sections 7.4.2.2 / 7.4.2.3).

PSS is one of 3 length-127 BPSK m-sequences selected by the cell-ID sector;
SSS is one of 336 length-127 gold sequences selected by the full cell
identity. Both are returned as +/-1 float vectors.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

SEQ_LEN = 127

N1_MAX = 335
N2_MAX = 2


@dataclass(frozen=True)
class CellIdentity:
    """Cell-ID group/sector pair and the physical cell ID derived from it."""

    n1: int
    n2: int
    pci: int = field(init=False)

    def __post_init__(self):
        if not 0 <= self.n1 <= N1_MAX:
            raise ConfigError(f"n1 must be in [0, {N1_MAX}], got {self.n1}")
        if not 0 <= self.n2 <= N2_MAX:
            raise ConfigError(f"n2 must be in [0, {N2_MAX}], got {self.n2}")
        object.__setattr__(self, "pci", 3 * self.n1 + self.n2)


def derive_pci(n1: int, n2: int) -> CellIdentity:
    """Validate (n1, n2) and derive the physical cell ID 3*n1 + n2."""
    return CellIdentity(n1=int(n1), n2=int(n2))


def _lfsr_127(init, tap_a, tap_b):
    """Length-127 binary sequence with x(i+7) = (x(i+a) + x(i+b)) mod 2."""
    x = np.empty(SEQ_LEN, dtype=np.int64)
    x[:7] = init
    for i in range(SEQ_LEN - 7):
        x[i + 7] = (x[i + tap_a] + x[i + tap_b]) % 2
    return x


# PSS m-sequence: x(i+7) = (x(i+4) + x(i)) mod 2, x(0..6) = 0110111.
_PSS_BASE = _lfsr_127((0, 1, 1, 0, 1, 1, 1), 4, 0)

# SSS gold components: both registers start at x(0)=1, x(1..6)=0;
# feedback x(i+7) = (x(i+4) + x(i)) and x(i+7) = (x(i+1) + x(i)).
_SSS_BASE_0 = _lfsr_127((1, 0, 0, 0, 0, 0, 0), 4, 0)
_SSS_BASE_1 = _lfsr_127((1, 0, 0, 0, 0, 0, 0), 1, 0)


def gen_pss(n2: int) -> np.ndarray:
    """PSS d-sequence for cell-ID sector n2: d(i) = 1 - 2 x((i + 43 n2) mod 127)."""
    if n2 not in (0, 1, 2):
        raise ConfigError(f"n2 must be in [0, {N2_MAX}], got {n2}")
    idx = (np.arange(SEQ_LEN) + 43 * n2) % SEQ_LEN
    return (1 - 2 * _PSS_BASE[idx]).astype(np.float64)


def gen_sss(cell: CellIdentity) -> np.ndarray:
    """SSS gold sequence for the given cell identity.

    Component shifts: k0 = 15 * floor(n1/112) + 5 * n2, k1 = n1 mod 112.
    """
    k0 = 15 * (cell.n1 // 112) + 5 * cell.n2
    k1 = cell.n1 % 112
    idx = np.arange(SEQ_LEN)
    a = 1 - 2 * _SSS_BASE_0[(idx + k0) % SEQ_LEN]
    b = 1 - 2 * _SSS_BASE_1[(idx + k1) % SEQ_LEN]
    return (a * b).astype(np.float64)
