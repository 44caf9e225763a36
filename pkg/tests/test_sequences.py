import numpy as np
import pytest

from fedjam import derive_pci, gen_pss, gen_sss
from fedjam.errors import ConfigError

from oracles import pss_reference, sss_reference

# Frozen outputs of the reference recursions (tests/oracles.py), generated
# once before the implementation was written.
PSS_N2_0_FIRST_8 = [1, -1, -1, 1, -1, -1, -1, -1]
SSS_N1_1_N2_0 = [
    -1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, -1, 1, -1, 1, -1, -1, 1, -1,
    -1, 1, 1, 1, 1, -1, 1, 1, -1, -1, -1, -1, 1, -1, 1, 1, 1, 1, -1, 1, 1, -1,
    -1, -1, 1, 1, 1, -1, 1, -1, 1, -1, 1, 1, 1, -1, -1, -1, 1, 1, -1, -1, 1, -1,
    -1, -1, 1, -1, 1, 1, 1, -1, -1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1, -1, 1,
    1, -1, -1, 1, -1, 1, -1, 1, 1, -1, 1, -1, 1, -1, -1, 1, -1, -1, 1, 1, 1, -1,
    -1, 1, -1, -1, -1, -1, -1, 1, -1, -1, 1, -1, -1, 1, -1, -1, -1,
]


class TestDerivePci:
    def test_zero_case(self):
        assert derive_pci(0, 0).pci == 0

    def test_direct_arithmetic(self):
        assert derive_pci(100, 2).pci == 302

    def test_boundary(self):
        assert derive_pci(335, 1).pci == 1006

    @pytest.mark.parametrize("n1,n2,bad", [(-1, 0, "n1"), (336, 0, "n1"), (0, 3, "n2"), (0, -1, "n2")])
    def test_out_of_range_names_field(self, n1, n2, bad):
        with pytest.raises(ConfigError, match=bad):
            derive_pci(n1, n2)


class TestPss:
    @pytest.mark.parametrize("n2", [0, 1, 2])
    def test_bpsk_alphabet(self, n2):
        d = gen_pss(n2)
        assert d.shape == (127,)
        assert set(np.unique(d)) <= {-1.0, 1.0}
        assert np.sum(d * d) == 127

    def test_cyclic_shift_structure(self):
        base = gen_pss(0)
        for n2 in (1, 2):
            assert np.array_equal(gen_pss(n2), np.roll(base, -43 * n2))

    def test_frozen_golden_prefix(self):
        assert gen_pss(0)[:8].tolist() == PSS_N2_0_FIRST_8

    @pytest.mark.parametrize("n2", [0, 1, 2])
    def test_matches_reference(self, n2):
        assert gen_pss(n2).tolist() == pss_reference(n2)

    def test_sequences_distinct(self):
        for a in range(3):
            for b in range(a + 1, 3):
                assert abs(np.dot(gen_pss(a), gen_pss(b))) < 127

    def test_bad_n2(self):
        with pytest.raises(ConfigError):
            gen_pss(3)


class TestSss:
    def test_frozen_golden_vector(self):
        assert gen_sss(derive_pci(1, 0)).tolist() == SSS_N1_1_N2_0

    def test_bpsk_alphabet(self):
        d = gen_sss(derive_pci(224, 2))
        assert set(np.unique(d)) <= {-1.0, 1.0}
        assert len(d) == 127

    def test_shift_zero_case(self):
        # n1=0, n2=0 gives both component shifts zero
        assert gen_sss(derive_pci(0, 0)).tolist() == sss_reference(0, 0)

    def test_matches_reference_sample(self):
        rng = np.random.default_rng(11)
        pairs = {(int(rng.integers(0, 336)), int(rng.integers(0, 3))) for _ in range(25)}
        pairs |= {(0, 0), (224, 2), (335, 2), (1, 0)}
        for n1, n2 in sorted(pairs):
            assert gen_sss(derive_pci(n1, n2)).tolist() == sss_reference(n1, n2), (n1, n2)
