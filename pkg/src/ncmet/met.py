"""Estimators for drift, limit operators, Lyapunov data, determinants and growth rates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .algebra import (
    Abelian,
    AlgebraElement,
    functional_calculus,
    hermitian_eig,
    l2_norm,
    range_projection,
    trace,
)
from .cone import PositivePoint, dP, exp_point
from .dynamics import CocycleSystem, Odometer
from .errors import DomainError, UsageError
from .products import CocycleProduct
from .spectral import (
    COALESCE_RTOL,
    SpectralMeasure,
    bounded_lipschitz_distance,
    growth_radius,
    hermitian_vector_measure,
    spectral_measure,
    vector_spectral_measure,
)

DRIFT_ZERO = 1e-6
# d_P(|c(n)|, L^n) magnifies eigenvector rounding by roughly exp(spread / 2), where
# spread is the eigenvalue range of the logs; past this many nats the value is noise
DP_RESOLVABLE_SPREAD = 36.0


@dataclass(frozen=True)
class HorizonDiagnostics:
    """Per-horizon convergence diagnostics.

    ``dP_rate`` is ``(1/n) d_P(|c(n,x)|, L^n)`` and is NaN when binary64
    cannot resolve it; ``dP_root`` is the always-resolvable lower bound
    ``d_P(|c(n,x)|^{1/n}, L)``.
    """

    n: int
    drift: float
    dP_rate: float
    dP_root: float
    l2_log_rate: float
    log_fk: float


@dataclass(frozen=True, eq=False)
class METEstimate:
    horizon: int
    drift: float
    limit_operator: PositivePoint
    log_limit: AlgebraElement
    lyapunov_distribution: SpectralMeasure
    diagnostics: tuple
    log_abs: dict = field(repr=False)
    log_fk_product: float = 0.0
    degenerate: bool = False
    ray_direction: AlgebraElement | None = None
    warnings: tuple = ()

    @property
    def horizons(self) -> list:
        return [d.n for d in self.diagnostics]


def _check_horizons(horizons: Sequence[int]) -> list:
    hs = [int(h) for h in horizons]
    if not hs:
        raise DomainError("need at least one horizon")
    if any(h < 1 for h in hs) or any(b <= a for a, b in zip(hs, hs[1:])):
        raise DomainError(f"horizons must be positive and strictly ascending, got {hs}")
    return hs


def _spread(h: AlgebraElement) -> float:
    """Largest eigenvalue range over the matrix blocks; abelian blocks are exact."""
    out = 0.0
    for spec, vals in zip(h.parent.blocks, hermitian_eig(h).values):
        if not isinstance(spec, Abelian):
            out = max(out, float(vals.max() - vals.min()))
    return out


def run_products(sys: CocycleSystem, x, horizons: Sequence[int], seed: int = 0):
    """Push ``c(1, f^k x)`` along the orbit; return ``{n: log|c(n,x)|}`` and ``log Delta c(N,x)``."""
    hs = _check_horizons(horizons)
    prod = CocycleProduct(sys.algebra, seed=seed)
    wanted = set(hs)
    snaps = {}
    for _ in range(hs[-1]):
        prod.push(sys.generator(x))
        x = sys.base.step(x)
        if prod.n in wanted:
            snaps[prod.n] = prod.log_abs()
    return snaps, prod.log_fk_determinant()


def estimate_met(sys: CocycleSystem, x, horizons: Sequence[int], seed: int = 0) -> METEstimate:
    """Estimate the limit operator as ``|c(N,x)|^{1/N}`` at the largest horizon ``N``."""
    hs = _check_horizons(horizons)
    warnings = []
    if isinstance(sys.base, Odometer) and hs[-1] > 2 ** (sys.base.bits - 4):
        warnings.append(f"horizon {hs[-1]} exceeds 2^(bits-4); the truncated odometer is periodic")
    snaps, log_fk_product = run_products(sys, x, hs, seed=seed)
    N = hs[-1]
    drift = 2.0 * l2_norm(snaps[N]) / N
    degenerate = drift < DRIFT_ZERO
    if degenerate:
        log_limit = sys.algebra.zeros()
    else:
        log_limit = snaps[N] / N
    limit = exp_point(log_limit)
    spread = _spread(log_limit)
    rows = []
    for n in hs:
        L = snaps[n]
        log_fk = float(trace(L).real) / n
        if degenerate:
            rows.append(HorizonDiagnostics(n, 2.0 * l2_norm(L) / n, np.nan, np.nan, np.nan, log_fk))
            continue
        root = exp_point(L / n)
        l2_rate = l2_norm(L / n - log_limit)
        if n * max(spread, _spread(L / n)) <= DP_RESOLVABLE_SPREAD:
            dp_rate = dP(exp_point(L), exp_point(log_limit * n)) / n
        else:
            dp_rate = np.nan
        rows.append(HorizonDiagnostics(n, 2.0 * l2_norm(L) / n, dp_rate, dP(root, limit), l2_rate, log_fk))
    ray = None if degenerate else log_limit / l2_norm(log_limit)
    return METEstimate(N, drift, limit, log_limit, spectral_measure(log_limit), tuple(rows), snaps,
                       log_fk_product, degenerate, ray, tuple(warnings))


def drift_series(sys: CocycleSystem, x, horizons: Sequence[int]) -> list:
    """``[(n, ||log(c(n,x)* c(n,x))||_2 / n)]``."""
    snaps, _ = run_products(sys, x, horizons)
    return [(n, 2.0 * l2_norm(snaps[n]) / n) for n in sorted(snaps)]


# -- Oseledets data -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OseledetsFlag:
    thresholds: tuple
    projections: tuple
    dimensions: tuple
    warnings: tuple = ()


def spectral_projection(h: AlgebraElement, t: float) -> AlgebraElement:
    """``1_{(-inf, t]}(h)``."""
    return functional_calculus(h, lambda v: (v <= t).astype(float))


def oseledets_flag(est: METEstimate, thresholds: Sequence[float]) -> OseledetsFlag:
    ts = [float(t) for t in thresholds]
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise DomainError("thresholds must be sorted")
    eigs = np.concatenate(hermitian_eig(est.log_limit).values)
    warnings = []
    for t in ts:
        near = np.abs(eigs - t) <= COALESCE_RTOL * (1.0 + np.abs(eigs))
        if near.any():
            warnings.append(f"threshold {t!r} sits on an eigenvalue of log L; the flag is boundary sensitive")
    projections = tuple(spectral_projection(est.log_limit, t) for t in ts)
    dims = tuple(est.lyapunov_distribution.mass_at_most(t) for t in ts)
    return OseledetsFlag(tuple(ts), projections, dims, tuple(warnings))


def invariance_check(sys: CocycleSystem, x, est_x: METEstimate, est_fx: METEstimate, t: float):
    """Defects of ``c(1,x) H_t(x) = H_t(f x)`` and of equal Lyapunov distributions.

    Returns
    -------
    subspace_defect : float
        ``||q - p'||_2`` with ``q`` the projection onto ``c(1,x) H_t(x)``.
    measure_defect : float
        Bounded-Lipschitz distance between the two Lyapunov distributions.
    """
    if est_x.horizon != est_fx.horizon:
        raise UsageError(f"estimates use different horizons ({est_x.horizon} vs {est_fx.horizon})")
    p = spectral_projection(est_x.log_limit, t)
    p_next = spectral_projection(est_fx.log_limit, t)
    q = range_projection(sys.generator(x) @ p)
    return l2_norm(q - p_next), bounded_lipschitz_distance(est_x.lyapunov_distribution,
                                                           est_fx.lyapunov_distribution)


# -- determinants ---------------------------------------------------------

@dataclass(frozen=True)
class DeterminantSeries:
    rows: tuple  # (n, (Delta|c(n,x)|)^{1/n})
    limit: float  # Delta of the limit operator
    gap: float  # last-row gap


def determinant_convergence(sys: CocycleSystem, x, horizons: Sequence[int],
                            reference: METEstimate | None = None) -> DeterminantSeries:
    """``(Delta|c(n,x)|)^{1/n}`` along the horizons against ``Delta`` of the limit.

    Without ``reference`` the limit is the estimate at the largest horizon
    of this very run, so the last gap only measures rounding; pass an
    estimate from a longer horizon for a genuine convergence check.
    """
    if abs(sys.algebra.trace_of_identity - 1.0) > 1e-12:
        raise DomainError("determinant convergence needs a normalized trace")
    est = estimate_met(sys, x, horizons)
    ref = est if reference is None else reference
    limit = float(np.exp(trace(ref.log_limit).real))
    rows = tuple((d.n, float(np.exp(d.log_fk))) for d in est.diagnostics)
    return DeterminantSeries(rows, limit, abs(rows[-1][1] - limit))


# -- growth rates ---------------------------------------------------------

def _log_norm_of_exp(L: AlgebraElement, xi: AlgebraElement, weight=None) -> float:
    """``log ||exp(L) w(exp(L)) xi||_2`` from the spectral data of Hermitian ``L``."""
    nu = hermitian_vector_measure(L, xi)
    if not len(nu):
        return -np.inf
    b = nu.masses if weight is None else nu.masses * weight(nu.locations) ** 2
    if not np.any(b > 0):
        return -np.inf
    return 0.5 * float(logsumexp(2.0 * nu.locations, b=b))


def raw_growth(sys: CocycleSystem, x, xi: AlgebraElement, horizons: Sequence[int],
               est: METEstimate | None = None) -> list:
    """``[(n, ||c(n,x) xi||_2^{1/n})]``, evaluated as ``|| |c(n,x)| xi ||_2``."""
    if l2_norm(xi) == 0:
        raise DomainError("xi must be nonzero")
    snaps = est.log_abs if est is not None else run_products(sys, x, horizons)[0]
    return [(n, float(np.exp(_log_norm_of_exp(snaps[n], xi) / n))) for n in _check_horizons(horizons)]


def limit_growth(a: PositivePoint, xi: AlgebraElement) -> float:
    """``rho(nu) = lim ||a^n xi||^{1/n}``: the top eigenvalue of ``a`` seen by ``xi``."""
    return growth_radius(vector_spectral_measure(a.element, xi))


def cutoff(rho: float, eps: float):
    """1 on ``[0, rho]``, 0 above ``rho + eps``, linear in between."""
    def f(t):
        return np.clip((rho + eps - np.asarray(t)) / eps, 0.0, 1.0)
    return f


@dataclass(frozen=True)
class SmoothGrowth:
    value: float  # limsup over the horizon list
    rho: float
    rows: tuple  # (n, ||c(n,x) xi_n||^{1/n}, ||xi_n - xi||_2)


def smooth_growth(sys: CocycleSystem, x, xi: AlgebraElement, horizons: Sequence[int], eps: float,
                  est: METEstimate | None = None, limit: PositivePoint | None = None) -> SmoothGrowth:
    """Growth of ``c(n,x)`` along ``xi_n = f(|c(n,x)|^{1/n}) xi`` with a cutoff ``f`` at ``rho``.

    ``rho`` is the growth radius of ``xi`` under ``limit``; by default the
    closed-form limit of the system when it has one, otherwise the
    estimated limit operator. The limsup is taken as the maximum over the
    second half of the horizon list.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    hs = _check_horizons(horizons)
    if est is None or not set(hs) <= set(est.log_abs):
        est = estimate_met(sys, x, hs)
    if limit is None:
        limit = PositivePoint(sys.known_limit) if sys.known_limit is not None else est.limit_operator
    rho = limit_growth(limit, xi)
    f = cutoff(rho, eps)
    rows = []
    for n in hs:
        L = est.log_abs[n]
        w = lambda s, n=n: f(np.exp(s / n))
        val = _log_norm_of_exp(L, xi, weight=w)
        nu = hermitian_vector_measure(L, xi)
        miss = float(np.sqrt(np.dot(nu.masses, (1.0 - w(nu.locations)) ** 2))) if len(nu) else 0.0
        rows.append((n, float(np.exp(val / n)), miss))
    tail = rows[len(rows) // 2:]
    return SmoothGrowth(max(r[1] for r in tail), rho, tuple(rows))


# -- conjecture probe -----------------------------------------------------

@dataclass(frozen=True)
class EgorovProbe:
    selected: np.ndarray  # boolean mask over the abelian coordinates
    deficit: float  # trace of the discarded coordinates
    uniform_error: float  # sup over kept coordinates and late horizons


def egorov_probe(sys: CocycleSystem, est: METEstimate, eps: float,
                 log_limit: AlgebraElement | None = None) -> EgorovProbe:
    """Keep the coordinates where ``n^-1 log c(n,x)(y)`` is closest to ``log L(y)``.

    Coordinates are added in order of their final-horizon deviation until
    the discarded trace drops below ``eps``; the reported error is the
    uniform deviation on the kept set over the second half of the horizons.
    Diagnostic only.
    """
    if len(sys.algebra.blocks) != 1 or not isinstance(sys.algebra.blocks[0], Abelian):
        raise DomainError("the Egorov probe needs a single abelian block")
    target = (log_limit if log_limit is not None
              else (functional_calculus(sys.known_limit, np.log) if sys.known_limit is not None
                    else est.log_limit)).blocks[0].real
    w = sys.algebra.blocks[0].weight_array
    hs = est.horizons
    dev = np.abs(est.log_abs[hs[-1]].blocks[0].real / hs[-1] - target)
    order = np.argsort(dev, kind="stable")
    keep = np.zeros(len(w), dtype=bool)
    total = w.sum()
    for j in order:
        if total - w[keep].sum() < eps:
            break
        keep[j] = True
    late = hs[len(hs) // 2:]
    err = max(float(np.max(np.abs(est.log_abs[n].blocks[0].real[keep] / n - target[keep]), initial=0.0))
              for n in late)
    return EgorovProbe(keep, float(total - w[keep].sum()), err)
