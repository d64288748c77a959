import numpy as np
import pytest

from ncmet.algebra import TracialAlgebra
from ncmet.batteries import SUITES, membership, property_battery, random_growth_pair
from ncmet.cone import exp_point
from ncmet.errors import UsageError
from ncmet.met import limit_growth


class TestBatteries:
    @pytest.mark.parametrize("suite", sorted(SUITES))
    def test_small_run_passes(self, suite):
        result = property_battery(suite, 10, 7)
        assert result.passed, result.to_json()
        assert result.trials == 10
        assert all(np.isfinite(c.worst) for c in result.checks)

    def test_deterministic(self):
        a = property_battery("metric", 5, 3).to_json()
        b = property_battery("metric", 5, 3).to_json()
        assert a == b

    def test_unknown_suite(self):
        with pytest.raises(UsageError):
            property_battery("nope", 1, 0)

    def test_bad_trials(self):
        with pytest.raises(UsageError):
            property_battery("metric", 0, 0)

    def test_check_lookup(self):
        result = property_battery("determinant", 3, 0)
        with pytest.raises(KeyError):
            result.check("missing")


class TestGrowthPairs:
    def test_restricted_pair(self):
        alg = TracialAlgebra.matrix(4)
        a, xi, lam, C = random_growth_pair(alg, np.random.default_rng(0), restricted=True)
        assert np.all(np.diff(np.log(lam)) >= 0.05 - 1e-12)
        kept = np.any(C != 0, axis=1)
        assert kept.any()
        assert limit_growth(a, xi) == pytest.approx(lam[kept].max(), rel=1e-9)

    def test_membership(self):
        alg = TracialAlgebra.matrix(2)
        a = exp_point(alg.element([np.diag([np.log(3.0), 0.0])]))
        xi = alg.element([np.diag([0.0, 1.0])])
        assert membership(a, xi, 1.0)
        assert not membership(a, alg.identity(), 1.0)
