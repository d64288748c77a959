"""Randomized property suites over the algebra, cone, determinant and growth layers.

Each suite draws its trials from one seeded generator and reports, per
invariant, the worst observed value against its bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import (
    AlgebraElement,
    TracialAlgebra,
    functional_calculus,
    hermitian_eig,
    l2_norm,
    log_abs,
    random_element,
    random_hermitian,
    random_positive,
    random_unitary,
)
from .cone import (
    PositivePoint,
    act,
    cn_inequality_check,
    contraction_check,
    dP,
    exp_point,
    geodesic,
    midpoint,
)
from .dynamics import Rotation, constant_cocycle
from .errors import UsageError
from .met import determinant_convergence, limit_growth
from .oracles import power_iteration_rate
from .spectral import (
    abs_spectral_measure,
    fk_determinant,
    log_fk_determinant,
    log_norm_two_ways,
    s_number_from_measure,
)


@dataclass(frozen=True)
class Check:
    """Worst observed value of one invariant; ``upper`` bounds pass when ``worst <= bound``."""

    name: str
    worst: float
    bound: float
    upper: bool

    @property
    def passed(self) -> bool:
        return bool(self.worst <= self.bound) if self.upper else bool(self.worst >= self.bound)

    def to_json(self) -> dict:
        return {"name": self.name, "worst": self.worst, "bound": self.bound,
                "kind": "max" if self.upper else "min", "passed": self.passed}


@dataclass(frozen=True)
class SuiteResult:
    name: str
    trials: int
    seed: int
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"suite": self.name, "trials": self.trials, "seed": self.seed,
                "passed": self.passed, "checks": [c.to_json() for c in self.checks]}


class _Tracker:
    def __init__(self):
        self.worst = {}
        self.spec = {}

    def lower(self, name, value, bound):
        self.spec[name] = (bound, False)
        self.worst[name] = min(self.worst.get(name, np.inf), float(value))

    def upper(self, name, value, bound):
        self.spec[name] = (bound, True)
        self.worst[name] = max(self.worst.get(name, -np.inf), float(value))

    def checks(self):
        return tuple(Check(k, self.worst[k], *self.spec[k]) for k in self.spec)


def _point(alg, rng) -> PositivePoint:
    return exp_point(random_hermitian(alg, rng))


def metric_suite(trials: int, seed: int, size: int = 4) -> SuiteResult:
    alg = TracialAlgebra.matrix(size)
    rng = np.random.default_rng(seed)
    tr = _Tracker()
    for _ in range(trials):
        a, b, c = _point(alg, rng), _point(alg, rng), _point(alg, rng)
        dab, dba, dbc, dac = dP(a, b), dP(b, a), dP(b, c), dP(a, c)
        tr.upper("symmetry", abs(dab - dba) / (1 + dab), 1e-9)
        tr.upper("identity", dP(a, a), 1e-10)
        tr.lower("triangle_slack", dab + dbc - dac, -1e-9)
        g = random_element(alg, rng)
        tr.upper("isometry_defect", abs(dP(act(g, a), act(g, b)) - dab) / (1 + dab), 1e-8)
        u = random_unitary(alg, rng)
        tr.upper("unitary_defect", abs(dP(act(u, a), act(u, b)) - dab) / (1 + dab), 1e-10)
        for sigma in (1.5, 2.0, 4.0):
            lhs, rhs = contraction_check(a, b, sigma)
            tr.lower(f"contraction_slack_{sigma:g}", lhs - rhs, -1e-9)
        tr.lower("log_distance_slack", dab - l2_norm(a.log() - b.log()), -1e-9)
        w = b.sqrt() @ a.inv_sqrt()
        tr.upper("transitivity", dP(act(w, a), b), 1e-8)
        seg = geodesic(a, b)
        m = seg(seg.length / 2)
        tr.upper("midpoint_defect", max(abs(dP(a, m) - dab / 2), abs(dP(m, b) - dab / 2)), 1e-8)
        tr.upper("midpoint_uniqueness", dP(m, midpoint(b, a)), 1e-8)
    return SuiteResult("metric", trials, seed, tr.checks())


def cat0_suite(trials: int, seed: int, size: int = 3, atoms: int = 4) -> SuiteResult:
    rng = np.random.default_rng(seed)
    alg = TracialAlgebra.matrix(size)
    flat = TracialAlgebra.diagonal(rng.random(atoms) + 0.1, normalize=True)
    tr = _Tracker()
    for _ in range(trials):
        x, y, z = _point(alg, rng), _point(alg, rng), _point(alg, rng)
        tr.lower("cn_slack", cn_inequality_check(x, y, z), -1e-8)
        x, y, z = _point(flat, rng), _point(flat, rng), _point(flat, rng)
        tr.upper("flat_abs_slack", abs(cn_inequality_check(x, y, z)), 1e-10)
    return SuiteResult("cat0", trials, seed, tr.checks())


def _grid(mu_a, mu_b):
    base = np.concatenate([mu_a.locations, mu_b.locations, np.geomspace(0.05, 20.0, 9)])
    return np.unique(np.concatenate([base, base * (1 - 1e-6), base * (1 + 1e-6)]))


def _tails(mu, t: np.ndarray) -> np.ndarray:
    """Vectorized ``mu((t, inf))``."""
    suffix = np.concatenate([np.cumsum(mu.masses[::-1])[::-1], [0.0]])
    return suffix[np.searchsorted(mu.locations, t, side="right")]


def spectral_inequalities_suite(trials: int, seed: int, size: int = 4) -> SuiteResult:
    alg = TracialAlgebra.matrix(size)
    rng = np.random.default_rng(seed)
    tr = _Tracker()
    ts = np.linspace(0.0, 1.0, 2 * size + 1)[:-1]
    for _ in range(trials):
        a, b = random_element(alg, rng), random_element(alg, rng)
        mu_a, mu_b = abs_spectral_measure(a), abs_spectral_measure(b)
        mu_ab, mu_sum = abs_spectral_measure(a @ b), abs_spectral_measure(a + b)
        g1, g2 = _grid(mu_a, mu_b), _grid(mu_b, mu_a)
        rhs = _tails(mu_a, g1)[:, None] + _tails(mu_b, g2)[None, :]
        worst_mul = float(np.min(rhs - _tails(mu_ab, np.outer(g1, g2))))
        worst_add = float(np.min(rhs - _tails(mu_sum, g1[:, None] + g2[None, :])))
        tr.lower("submultiplicative_slack", worst_mul, -1e-12)
        tr.lower("subadditive_slack", worst_add, -1e-12)
        worst_s = np.inf
        for t in ts:
            for s in ts:
                if t + s < 1.0:
                    bound = s_number_from_measure(mu_a, t) * s_number_from_measure(mu_b, s)
                    worst_s = min(worst_s, bound * (1 + 1e-12) - s_number_from_measure(mu_ab, t + s))
        tr.lower("s_number_slack", worst_s, 0.0)
        adj = abs_spectral_measure(a.adj)
        inv = abs_spectral_measure(a.inv())
        recip = mu_a.pushforward(lambda t: 1.0 / t)
        tr.upper("adjoint_atom_mismatch", _atom_mismatch(mu_a, adj), 1e-9)
        tr.upper("inverse_atom_mismatch", _atom_mismatch(recip, inv), 1e-9)
        na, nab = l2_norm(log_abs(a)), l2_norm(log_abs(a @ b))
        nb = l2_norm(log_abs(b))
        tr.lower("log_subgroup_slack", 2 * (na ** 2 + nb ** 2) - nab ** 2, -1e-9)
        tr.upper("log_norm_symmetry", max(abs(l2_norm(log_abs(a.adj)) - na),
                                          abs(l2_norm(log_abs(a.inv())) - na)) / (1 + na), 1e-10)
        direct, integral = log_norm_two_ways(a)
        tr.upper("log_norm_two_ways", abs(direct - integral) / (1 + direct), 1e-9)
    return SuiteResult("spectral_inequalities", trials, seed, tr.checks())


def _atom_mismatch(mu, nu) -> float:
    if len(mu) != len(nu):
        return np.inf
    loc = np.max(np.abs(mu.locations - nu.locations) / (1 + np.abs(mu.locations)))
    return float(max(loc, np.max(np.abs(mu.masses - nu.masses))))


def determinant_suite(trials: int, seed: int, size: int = 4) -> SuiteResult:
    alg = TracialAlgebra.matrix(size)
    rng = np.random.default_rng(seed)
    tr = _Tracker()
    for _ in range(trials):
        a, b = random_element(alg, rng), random_element(alg, rng)
        # compare logs: the determinants themselves may sit far from 1
        tr.upper("multiplicativity", abs(np.expm1(log_fk_determinant(a @ b) - log_fk_determinant(a)
                                                  - log_fk_determinant(b))), 1e-10)
    for k in range(min(trials, 20)):
        T = random_positive(alg, rng)
        sys = constant_cocycle(Rotation(), T)
        series = determinant_convergence(sys, sys.base.sample_point(rng), [10, 50, 100])
        exact = fk_determinant(T)
        tr.upper("constant_cocycle_gap",
                 max(abs(v - exact) / exact for _, v in series.rows), 1e-10)
    return SuiteResult("determinant", trials, seed, tr.checks())


MIN_LOG_GAP = 0.05


def random_growth_pair(alg: TracialAlgebra, rng: np.random.Generator, restricted: bool = True):
    """A positive ``a = U diag(lam) U*`` and ``xi = U C`` for a single-factor algebra.

    With ``restricted`` the rows of ``C`` vanish exactly outside a random
    nonempty set of eigenvalues, so ``xi`` lies in a proper spectral
    subspace. Eigenvalues are log-normal, conditioned on adjacent log-gaps
    of at least ``MIN_LOG_GAP``. Returns ``(a, xi, lam, C)``.
    """
    (spec,) = alg.blocks
    n = spec.n
    while True:
        # the n-step oracle resolves the top eigenvalue only up to (gap ratio)^(2n)
        lam = np.sort(np.exp(0.5 * rng.standard_normal(n)))
        if n == 1 or np.min(np.diff(np.log(lam))) >= MIN_LOG_GAP:
            break
    U = random_unitary(alg, rng).blocks[0]
    C = random_element(alg, rng).blocks[0].copy()
    if restricted:
        keep = rng.random(n) < 0.5
        if not keep.any():
            keep[rng.integers(n)] = True
        C[~keep, :] = 0.0
    a = PositivePoint(AlgebraElement(alg, [(U * lam[None, :]) @ U.conj().T]))
    return a, AlgebraElement(alg, [U @ C]), lam, C


def growth_suite(trials: int, seed: int, size: int = 4, n: int = 200) -> SuiteResult:
    alg = TracialAlgebra.matrix(size)
    rng = np.random.default_rng(seed)
    tr = _Tracker()
    mismatches = 0
    for k in range(trials):
        restricted = k % 2 == 0
        a, xi, lam, C = random_growth_pair(alg, rng, restricted)
        rho = limit_growth(a, xi)
        # in a proper spectral subspace, rounding in the standard basis would seed the
        # excluded directions and blow up; iterate in the eigenbasis instead
        if restricted:
            oracle = power_iteration_rate(np.diag(lam), C, n)
        else:
            oracle = power_iteration_rate(a.element.blocks[0], xi.blocks[0], n)
        tr.upper("power_iteration_gap", abs(rho - oracle), 1e-3)
        vals = np.unique(hermitian_eig(a.element).values[0])
        below = vals[vals < rho - 1e-9 * rho]
        above = vals[vals > rho + 1e-9 * rho]
        probes = [rho, below[-1] if below.size else rho / 2, above[0] if above.size else 2 * rho]
        for t in probes:
            member = membership(a, xi, t)
            mismatches += member != (rho <= t)
    tr.upper("membership_mismatches", mismatches, 0)
    return SuiteResult("growth", trials, seed, tr.checks())


def membership(a: PositivePoint, xi: AlgebraElement, t: float, rtol: float = 1e-9) -> bool:
    """Whether ``xi`` lies in the range of ``1_{[0,t]}(a)``."""
    p = functional_calculus(a.element, lambda v: (v <= t).astype(float))
    return l2_norm(xi - p @ xi) <= rtol * l2_norm(xi)


SUITES = {
    "metric": metric_suite,
    "cat0": cat0_suite,
    "spectral_inequalities": spectral_inequalities_suite,
    "determinant": determinant_suite,
    "growth": growth_suite,
}


def property_battery(suite_name: str, trials: int, seed: int) -> SuiteResult:
    if suite_name not in SUITES:
        raise UsageError(f"unknown suite {suite_name!r}; choose from {', '.join(SUITES)}")
    if trials < 1:
        raise UsageError("trials must be at least 1")
    return SUITES[suite_name](trials, seed)
