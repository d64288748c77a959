import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncmet.algebra import TracialAlgebra, l2_norm
from ncmet.dynamics import (
    Bernoulli,
    BernoulliPoint,
    Odometer,
    OdometerPoint,
    Rotation,
    RotationPoint,
    birkhoff_average,
    build_counterexample_cocycle,
    constant_cocycle,
    counterexample_weights,
    diagonal_function_cocycle,
    evaluate_cocycle,
    iid_cocycle,
    in_witness_event,
    initial_point,
    sample_in_witness_event,
    sample_path,
)
from ncmet.errors import ConditioningError, ConfigurationError, DomainError
from ncmet.oracles import counterexample_log_cocycle, odometer_bit_count


class TestOdometer:
    def test_carry(self):
        od = Odometer(4)
        x = OdometerPoint.from_bits([1, 1, 0, 1])
        assert od.step(x).bits == (0, 0, 1, 1)

    def test_wraps(self):
        od = Odometer(3)
        assert od.step(OdometerPoint(7, 3)) == OdometerPoint(0, 3)
        assert od.unstep(OdometerPoint(0, 3)) == OdometerPoint(7, 3)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2 ** 20 - 1), st.integers(0, 5000))
    def test_advance_is_iterated_step(self, v, n):
        od = Odometer(20)
        x = OdometerPoint(v, 20)
        y = x
        for _ in range(n % 300):
            y = od.step(y)
        assert od.advance(x, n % 300) == y
        assert od.advance(od.advance(x, n), -n) == x

    def test_bad_bits(self):
        with pytest.raises(DomainError):
            OdometerPoint.from_bits([0, 2])
        with pytest.raises(ConfigurationError):
            Odometer(0)


class TestBernoulli:
    def test_reproducible_and_invertible(self):
        b = Bernoulli((0.3, 0.7))
        x = BernoulliPoint(5, 0)
        seq = [b.symbol(b.advance(x, k)) for k in range(-10, 5000)]
        assert seq == [b.symbol(x, k) for k in range(-10, 5000)]
        assert b.unstep(b.step(x)) == x
        assert b.symbols(x, 5000).tolist() == seq[10:]

    def test_frequencies(self):
        b = Bernoulli((0.25, 0.75))
        s = b.symbols(BernoulliPoint(1, 0), 40000)
        assert s.mean() == pytest.approx(0.75, abs=0.01)

    def test_probabilities_checked(self):
        with pytest.raises(ConfigurationError):
            Bernoulli((0.5, 0.6))


class TestRotation:
    def test_step_and_back(self):
        r = Rotation(0.3)
        x = RotationPoint(0.9)
        assert r.step(x).angle == pytest.approx(0.2)
        assert r.unstep(r.step(x)).angle == pytest.approx(0.9)

    def test_birkhoff(self):
        r = Rotation()
        avg = birkhoff_average(r, RotationPoint(0.1), lambda x: x.angle, 20000)
        assert avg == pytest.approx(0.5, abs=1e-3)

    def test_domain(self):
        with pytest.raises(DomainError):
            RotationPoint(1.5)


class TestCocycles:
    def test_cocycle_law(self):
        alg = TracialAlgebra.matrix(2)
        A = alg.element([np.array([[2.0, 1.0], [1.0, 1.0]])])
        B = alg.element([np.array([[1.1, 0.0], [1.1, 1.0]])])
        sys = iid_cocycle([A, B], (0.5, 0.5))
        x = initial_point(sys, 3)
        c5 = evaluate_cocycle(sys, 5, x)
        c3 = evaluate_cocycle(sys, 3, x)
        c2 = evaluate_cocycle(sys, 2, sys.base.advance(x, 3))
        assert c5.allclose(c2 @ c3, atol=1e-12)
        back = evaluate_cocycle(sys, -3, sys.base.advance(x, 3))
        assert (back @ c3).allclose(alg.identity(), atol=1e-10)

    def test_sample_path(self):
        alg = TracialAlgebra.matrix(2)
        sys = constant_cocycle(Rotation(), alg.scalar(2.0))
        path = list(sample_path(sys, 0, 3))
        assert len(path) == 3
        assert all(g.allclose(alg.scalar(2.0)) for _, g in path)

    def test_constant_singular(self):
        alg = TracialAlgebra.matrix(2)
        with pytest.raises(ConditioningError):
            constant_cocycle(Rotation(), alg.zeros())

    def test_diagonal_function(self):
        alg = TracialAlgebra.diagonal([0.5, 0.5])
        sys = diagonal_function_cocycle(Rotation(), alg, 1.0)
        g = sys.generator(RotationPoint(0.0))
        assert np.allclose(g.blocks[0].real, np.exp([1.0, -1.0]))


class TestCounterexample:
    def test_weights(self):
        w = counterexample_weights(4)
        assert w.sum() == pytest.approx(1.0)
        assert w[0] / w[1] == pytest.approx(4.0)

    def test_bits_too_small(self):
        with pytest.raises(ConfigurationError):
            build_counterexample_cocycle(20, 16)

    @pytest.mark.parametrize("bits", [24, 76])
    def test_matches_closed_form(self, bits):
        cells = 12
        sys = build_counterexample_cocycle(bits, cells)
        for seed in range(3):
            x = initial_point(sys, seed)
            c = evaluate_cocycle(sys, 700, x)
            ref = counterexample_log_cocycle(x.value, 700, bits, cells)
            assert np.allclose(np.log(c.blocks[0].real), ref, atol=1e-10)

    def test_bit_count_wraps(self):
        # x = 2^3 - 2 counts 6, 7, 0, 1, 2 for bit 1 in a 3-bit odometer
        assert odometer_bit_count(6, 1, 5, 3) == 3

    def test_known_limit(self):
        sys = build_counterexample_cocycle(24, 8)
        assert sys.known_limit.allclose(sys.algebra.scalar(np.sqrt(2.0)))

    def test_witness_event(self):
        sys = build_counterexample_cocycle(30, 8)
        x = sample_in_witness_event(sys, 8, seed=0)
        assert in_witness_event(x, 8)
        assert x.bit(8) == 0 and x.bit(18) == 1

    def test_growth_on_witness(self):
        sys = build_counterexample_cocycle(40, 20)
        x = sample_in_witness_event(sys, 8, seed=1)
        c = evaluate_cocycle(sys, 256, x)
        assert np.log(l2_norm(c)) / 256 > np.log(2.0) - 0.02
