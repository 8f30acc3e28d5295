import numpy as np
import pytest

from pcpolar.core import (
    CodeSpec,
    InfeasibleConstructionError,
    bit_reverse,
    row_weight,
    row_weights,
)


def _bit_reverse_oracle(i: int, n: int) -> int:
    return int(format(i, f"0{n}b")[::-1], 2)


def _kron_power(n: int) -> np.ndarray:
    F = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    G = np.array([[1]], dtype=np.uint8)
    for _ in range(n):
        G = np.kron(G, F)
    return G


class TestBitReverse:
    @pytest.mark.parametrize("i,n,expected", [(0, 3, 0), (1, 3, 4), (6, 3, 3)])
    def test_fixtures(self, i, n, expected):
        assert bit_reverse(i, n) == expected
        assert bit_reverse(i, n) == _bit_reverse_oracle(i, n)

    def test_matches_oracle_exhaustive(self):
        for n in range(1, 9):
            for i in range(1 << n):
                assert bit_reverse(i, n) == _bit_reverse_oracle(i, n)

    def test_involution(self):
        rng = np.random.default_rng(7)
        for n in range(1, 21):
            for i in rng.integers(0, 1 << n, size=50):
                i = int(i)
                assert bit_reverse(bit_reverse(i, n), n) == i

    def test_width_out_of_range(self):
        with pytest.raises(ValueError):
            bit_reverse(8, 3)


class TestRowWeight:
    def test_paper_value(self):
        assert row_weight(5) == 4
        assert row_weight(10) == 4

    def test_trivial(self):
        assert row_weight(0) == 1

    def test_row_15(self):
        G = _kron_power(4)
        assert row_weight(15) == int(G[15].sum()) == 16

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_matches_kronecker_rows(self, n):
        G = _kron_power(n)
        N = 1 << n
        for i in range(N):
            assert row_weight(i) == int(G[i].sum())
        assert np.array_equal(row_weights(N), G.sum(axis=1))


class TestCodeSpec:
    def test_from_KM(self):
        spec = CodeSpec.from_KM(4, 6)
        assert (spec.N, spec.n, spec.M, spec.K) == (8, 3, 6, 4)

    def test_mother_length_is_power_of_two(self):
        for M in (3, 5, 9, 100, 1000):
            spec = CodeSpec.from_KM(1, M)
            assert spec.N == 1 << spec.n
            assert spec.N // 2 < M <= spec.N

    @pytest.mark.parametrize(
        "K,M,N,n", [(4, 10, 8, 3), (0, 8, 8, 3), (9, 8, 8, 3), (4, 4, 8, 3)]
    )
    def test_invalid(self, K, M, N, n):
        with pytest.raises(InfeasibleConstructionError):
            CodeSpec(K=K, M=M, N=N, n=n)


class TestHelpers:
    def test_as_bits_validates(self):
        from pcpolar.core import as_bits

        assert as_bits([0, 1, 1]).tolist() == [0, 1, 1]
        with pytest.raises(ValueError):
            as_bits([0, 2, 1])
        with pytest.raises(ValueError):
            as_bits([0, 1], length=3)

    def test_as_index_set_validates(self):
        from pcpolar.core import as_index_set

        assert as_index_set([3, 1, 2], 4).tolist() == [1, 2, 3]
        with pytest.raises(ValueError):
            as_index_set([1, 1], 4)
        with pytest.raises(ValueError):
            as_index_set([4], 4)
