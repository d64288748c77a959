import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncmet.algebra import (
    Abelian,
    AlgebraElement,
    Factor,
    TracialAlgebra,
    absolute_value,
    algebra_from_json,
    algebra_to_json,
    element_from_json,
    element_to_json,
    functional_calculus,
    hermitian_eig,
    l2_inner,
    l2_norm,
    log_abs,
    polar_decompose,
    random_element,
    random_hermitian,
    random_positive,
    random_unitary,
    range_projection,
    require_invertible,
    singular_values,
    trace,
)
from ncmet.errors import ConditioningError, DomainError, StructuralError


@pytest.fixture
def mixed():
    return TracialAlgebra((Factor(3, 0.2), Abelian((0.1, 0.3)), Factor(2, 0.05)))


class TestStructure:
    def test_trace_of_identity(self, mixed):
        assert mixed.trace_of_identity == pytest.approx(0.2 * 3 + 0.4 + 0.05 * 2)
        assert TracialAlgebra.matrix(4).trace_of_identity == pytest.approx(1.0)

    def test_bad_blocks(self):
        with pytest.raises(StructuralError):
            Factor(0)
        with pytest.raises(StructuralError):
            Factor(2, -1.0)
        with pytest.raises(StructuralError):
            Abelian(())
        with pytest.raises(StructuralError):
            TracialAlgebra(())

    def test_shape_mismatch(self, mixed):
        with pytest.raises(StructuralError):
            AlgebraElement(mixed, [np.eye(2), np.ones(2), np.eye(2)])

    def test_different_algebras(self, mixed):
        other = TracialAlgebra.matrix(2)
        with pytest.raises(StructuralError):
            mixed.identity() + other.identity()

    def test_immutable(self, mixed):
        x = mixed.identity()
        with pytest.raises(AttributeError):
            x.parent = None
        with pytest.raises(ValueError):
            x.blocks[0][0, 0] = 5


class TestTrace:
    def test_weighted_trace(self, mixed):
        rng = np.random.default_rng(1)
        x = random_element(mixed, rng)
        expect = (0.2 * np.trace(x.blocks[0]) + np.dot([0.1, 0.3], x.blocks[1])
                  + 0.05 * np.trace(x.blocks[2]))
        assert trace(x) == pytest.approx(expect)

    def test_trace_property(self, mixed):
        rng = np.random.default_rng(2)
        x, y = random_element(mixed, rng), random_element(mixed, rng)
        assert trace(x @ y) == pytest.approx(trace(y @ x))

    def test_l2_norm_is_inner(self, mixed):
        x = random_element(mixed, np.random.default_rng(3))
        assert l2_norm(x) ** 2 == pytest.approx(l2_inner(x, x).real)
        assert l2_norm(x) ** 2 == pytest.approx(trace(x.adj @ x).real)


class TestSpectral:
    def test_eig_reconstructs(self, mixed):
        h = random_hermitian(mixed, np.random.default_rng(4))
        assert functional_calculus(h, lambda v: v).allclose(h, atol=1e-12)

    def test_exp_log(self, mixed):
        h = random_hermitian(mixed, np.random.default_rng(5))
        a = functional_calculus(h, np.exp)
        assert functional_calculus(a, np.log).allclose(h, atol=1e-11)

    def test_not_hermitian(self, mixed):
        x = random_element(mixed, np.random.default_rng(6))
        with pytest.raises(DomainError):
            hermitian_eig(x)

    def test_undefined_function(self):
        alg = TracialAlgebra.matrix(2)
        h = alg.element([np.diag([-1.0, 1.0])])
        with pytest.raises(DomainError):
            functional_calculus(h, np.log)

    def test_polar(self, mixed):
        x = random_element(mixed, np.random.default_rng(7))
        parts = polar_decompose(x)
        assert (parts.unitary_part @ parts.positive_part).allclose(x, atol=1e-10)
        u = parts.unitary_part
        assert (u.adj @ u).allclose(mixed.identity(), atol=1e-10)

    def test_log_abs_matches_calculus(self, mixed):
        x = random_element(mixed, np.random.default_rng(8))
        direct = functional_calculus(absolute_value(x), np.log)
        assert log_abs(x).allclose(direct, atol=1e-10)

    def test_singular_values_of_unitary(self, mixed):
        u = random_unitary(mixed, np.random.default_rng(9))
        for s in singular_values(u):
            assert np.allclose(s, 1.0)

    def test_range_projection(self):
        alg = TracialAlgebra.matrix(3)
        x = alg.element([np.diag([1.0, 2.0, 0.0])])
        p = range_projection(x)
        assert p.allclose(alg.element([np.diag([1.0, 1.0, 0.0])]))

    def test_positive_is_positive(self, mixed):
        a = random_positive(mixed, np.random.default_rng(10))
        assert all((v > 0).all() for v in hermitian_eig(a).values)


class TestInvertibility:
    def test_singular_rejected(self):
        alg = TracialAlgebra.matrix(2)
        x = alg.element([np.array([[1.0, 2.0], [2.0, 4.0]])])
        with pytest.raises(ConditioningError):
            require_invertible(x)
        with pytest.raises(ConditioningError):
            x.inv()

    def test_inverse(self, mixed):
        x = random_element(mixed, np.random.default_rng(11))
        assert (x @ x.inv()).allclose(mixed.identity(), atol=1e-10)

    def test_power(self, mixed):
        x = random_element(mixed, np.random.default_rng(12), scale=0.5)
        assert x.power(3).allclose(x @ x @ x, atol=1e-12)
        assert (x.power(-2) @ x.power(2)).allclose(mixed.identity(), atol=1e-9)


class TestSerialization:
    def test_algebra_round_trip(self, mixed):
        assert algebra_from_json(algebra_to_json(mixed)) == mixed

    def test_unknown_block(self):
        with pytest.raises(StructuralError):
            algebra_from_json({"blocks": [{"kind": "weird"}]})

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(1e-300, 1e300))
    def test_element_round_trip_exact(self, seed, scale):
        alg = TracialAlgebra((Factor(2, 0.5), Abelian((0.25, 0.75))))
        x = random_element(alg, np.random.default_rng(seed)) * scale
        y = element_from_json(element_to_json(x))
        assert y.parent == alg
        for a, b in zip(x.blocks, y.blocks):
            assert np.array_equal(a, b)
