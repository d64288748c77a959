import numpy as np
import pytest

from ncmet.oracles import (
    counterexample_log_cocycle,
    gram_schmidt,
    odometer_bit_count,
    ones_below,
    power_iteration_rate,
    qr_lyapunov_exponents,
    s_number_by_enumeration,
    single_operator_log_limit,
)


class TestOracles:
    def test_gram_schmidt(self):
        M = np.random.default_rng(0).standard_normal((3, 3))
        Q, r = gram_schmidt(M)
        assert np.allclose(Q.conj().T @ Q, np.eye(3))
        assert np.allclose(np.abs(np.linalg.qr(M)[1].diagonal()), r)

    def test_lyapunov_of_diagonal(self):
        A = np.diag([2.0, 0.5])
        assert np.allclose(qr_lyapunov_exponents([A] * 50), [np.log(0.5), np.log(2.0)])

    def test_single_operator_triangular(self):
        T = np.array([[2.0, 1.0], [0.0, 0.5]])
        L = single_operator_log_limit(T)
        assert np.allclose(np.linalg.eigvalsh(L), [np.log(0.5), np.log(2.0)])
        # the slow direction is the eigenvector of 0.5
        v = np.array([-1.0, 1.5])
        v /= np.linalg.norm(v)
        assert v @ L @ v == pytest.approx(np.log(0.5))

    def test_s_number_diagonal(self):
        blocks = [np.array([[3.0]]), np.array([[1.0]])]
        assert s_number_by_enumeration(blocks, [0.5, 0.5], 0.0) == pytest.approx(3.0)
        assert s_number_by_enumeration(blocks, [0.5, 0.5], 0.5) == pytest.approx(1.0)

    def test_power_iteration(self):
        a = np.diag([3.0, 1.0])
        assert power_iteration_rate(a, np.array([1.0, 1.0]), 60) == pytest.approx(3.0)
        assert power_iteration_rate(a, np.array([0.0, 1.0]), 5) == pytest.approx(1.0)

    @pytest.mark.parametrize("m", [0, 1, 3])
    def test_ones_below(self, m):
        for v in range(40):
            assert ones_below(v, m) == sum((k >> m) & 1 for k in range(v))

    def test_bit_count_brute_force(self):
        bits = 5
        for x in range(0, 32, 7):
            for n in (1, 13, 40, 70):
                for m in range(bits):
                    brute = sum(((x + k) % 32 >> m) & 1 for k in range(n))
                    assert odometer_bit_count(x, m, n, bits) == brute

    def test_counterexample_log(self):
        out = counterexample_log_cocycle(0, 4, 8, 2)
        # 0,1,2,3: bit 1 set for 2 and 3, bit 2 never
        assert np.allclose(out, [2 * np.log(2.0), 0.0])
