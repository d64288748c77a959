"""Atomic spectral measures and the trace-distribution calculus built on them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linprog

from .algebra import (
    AlgebraElement,
    Factor,
    hermitian_eig,
    l2_norm,
    log_abs,
    require_invertible,
    singular_values,
)
from .errors import DomainError

COALESCE_RTOL = 1e-9
# relative to total mass; vector masses below this are rounding noise
VECTOR_MASS_FLOOR = 1e-20


@dataclass(frozen=True)
class SpectralMeasure:
    """A finite positive atomic measure on the real line.

    Locations are strictly increasing and masses positive. Build instances
    with :meth:`from_atoms`, which sorts and coalesces nearby atoms.
    """

    locations: np.ndarray
    masses: np.ndarray
    total_mass: float

    @classmethod
    def from_atoms(cls, locations, masses, rtol: float = COALESCE_RTOL,
                   mass_floor: float = 0.0) -> "SpectralMeasure":
        loc = np.asarray(locations, dtype=float).ravel()
        m = np.asarray(masses, dtype=float).ravel()
        if loc.shape != m.shape:
            raise ValueError("locations and masses differ in length")
        if (m < 0).any():
            raise ValueError("masses must be non-negative")
        total = float(m.sum())
        keep = m > mass_floor * total if total > 0 else m > 0
        loc, m = loc[keep], m[keep]
        order = np.argsort(loc, kind="stable")
        loc, m = loc[order], m[order]
        out_loc, out_m = [], []
        i = 0
        while i < len(loc):
            j = i + 1
            # chain atoms closer than the tolerance to the cluster's first atom
            while j < len(loc) and loc[j] - loc[i] <= rtol * (1.0 + abs(loc[i])):
                j += 1
            mass = m[i:j].sum()
            # a lone atom keeps its location bit for bit
            out_loc.append(float(loc[i]) if j == i + 1 else float(np.dot(loc[i:j], m[i:j]) / mass))
            out_m.append(float(mass))
            i = j
        locs = np.asarray(out_loc)
        masses_ = np.asarray(out_m)
        locs.setflags(write=False)
        masses_.setflags(write=False)
        return cls(locs, masses_, float(masses_.sum()))

    @classmethod
    def empty(cls) -> "SpectralMeasure":
        return cls.from_atoms([], [])

    def __len__(self):
        return len(self.locations)

    @property
    def atoms(self):
        return list(zip(self.locations.tolist(), self.masses.tolist()))

    @property
    def support_max(self) -> float:
        """Largest atom location; ``-inf`` for the empty measure."""
        return float(self.locations[-1]) if len(self) else float("-inf")

    def tail(self, t: float) -> float:
        """Mass of the open half-line ``(t, inf)``."""
        return float(self.masses[self.locations > t].sum())

    def mass_at_most(self, t: float) -> float:
        """Mass of ``(-inf, t]``."""
        return float(self.masses[self.locations <= t].sum())

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        if not len(self):
            return 0.0
        return float(np.dot(self.masses, np.asarray(f(self.locations), dtype=float)))

    def moment(self, k: int) -> float:
        return self.integrate(lambda t: t ** k)

    def pushforward(self, g: Callable[[np.ndarray], np.ndarray]) -> "SpectralMeasure":
        return SpectralMeasure.from_atoms(g(self.locations), self.masses)

    def matches(self, other: "SpectralMeasure", atol: float = 1e-9) -> bool:
        """Atom-wise equality after coalescing."""
        if len(self) != len(other):
            return False
        scale = 1.0 + np.abs(self.locations)
        return bool(np.all(np.abs(self.locations - other.locations) <= atol * scale)
                    and np.allclose(self.masses, other.masses, rtol=atol, atol=atol))


def spectral_measure(x: AlgebraElement) -> SpectralMeasure:
    """``mu_x = tau o E_x`` for Hermitian ``x``."""
    eig = hermitian_eig(x)
    locs, masses = [], []
    for spec, vals in zip(x.parent.blocks, eig.values):
        locs.append(vals)
        if isinstance(spec, Factor):
            masses.append(np.full(vals.shape, spec.weight))
        else:
            masses.append(spec.weight_array)
    return SpectralMeasure.from_atoms(np.concatenate(locs), np.concatenate(masses))


def abs_spectral_measure(x: AlgebraElement) -> SpectralMeasure:
    """``mu_{|x|}`` read off the singular values of each block."""
    locs, masses = [], []
    for spec, s in zip(x.parent.blocks, singular_values(x)):
        locs.append(s)
        masses.append(np.full(s.shape, spec.weight) if isinstance(spec, Factor) else spec.weight_array)
    return SpectralMeasure.from_atoms(np.concatenate(locs), np.concatenate(masses))


def hermitian_vector_measure(h: AlgebraElement, xi: AlgebraElement,
                             mass_floor: float = VECTOR_MASS_FLOOR) -> SpectralMeasure:
    """Spectral measure of Hermitian ``h`` with respect to ``xi`` (no positivity check)."""
    h._check(xi)
    eig = hermitian_eig(h)
    locs, masses = [], []
    for spec, vals, vecs, blk in zip(h.parent.blocks, eig.values, eig.vectors, xi.blocks):
        if isinstance(spec, Factor):
            coeff = vecs.conj().T @ blk  # row j = u_j* xi
            masses.append(spec.weight * np.sum(np.abs(coeff) ** 2, axis=1))
        else:
            masses.append(spec.weight_array * np.abs(blk) ** 2)
        locs.append(vals)
    return SpectralMeasure.from_atoms(np.concatenate(locs), np.concatenate(masses), mass_floor=mass_floor)


def vector_spectral_measure(a: AlgebraElement, xi: AlgebraElement) -> SpectralMeasure:
    """The measure ``nu`` with ``<f(a) xi, xi> = int f dnu`` for positive ``a``.

    Atoms sit at eigenvalues of ``a`` with masses ``||P_j xi||_2^2``, where
    ``P_j`` acts by left multiplication.
    """
    eig = hermitian_eig(a)
    lowest = min(v.min() for v in eig.values)
    if lowest < -1e-12 * max(1.0, max(np.abs(v).max() for v in eig.values)):
        raise DomainError(f"element is not positive (eigenvalue {lowest!r})")
    return hermitian_vector_measure(a, xi)


def growth_radius(nu: SpectralMeasure) -> float:
    """``rho(nu)``: the largest atom carrying mass, 0 for the empty measure."""
    return max(nu.support_max, 0.0) if len(nu) else 0.0


def distribution_function(x: AlgebraElement, lam: float) -> float:
    """``tau(1_{(lam, inf)}(|x|))``."""
    if lam < 0:
        raise DomainError(f"distribution function needs lam >= 0, got {lam}")
    return abs_spectral_measure(x).tail(lam)


def s_number_from_measure(mu_abs: SpectralMeasure, t: float, slack: float = 1e-12) -> float:
    """Generalized inverse ``inf{s >= 0 : tail(s) <= t}`` of a distribution function."""
    locs, masses = mu_abs.locations, mu_abs.masses
    tails = np.concatenate([np.cumsum(masses[::-1])[::-1][1:], [0.0]])  # tail just after each atom
    ok = tails <= t + slack * max(mu_abs.total_mass, 1.0)
    if mu_abs.total_mass <= t + slack * max(mu_abs.total_mass, 1.0):
        return 0.0
    return float(max(locs[np.argmax(ok)], 0.0))


def s_number(x: AlgebraElement, t: float) -> float:
    """The ``t``-th generalized s-number of ``x``, ``0 <= t < tau(id)``."""
    tau1 = x.parent.trace_of_identity
    if not 0 <= t < tau1:
        raise DomainError(f"s-number index must lie in [0, {tau1}), got {t}")
    return s_number_from_measure(abs_spectral_measure(x), t)


def _exact_tail_integral(breaks_masses: list) -> float:
    """``2 * int_0^inf lam * G(lam) dlam`` for a step function ``G``.

    ``G(lam)`` is the total mass of atoms at positions ``> lam``; each entry
    of ``breaks_masses`` is ``(position, mass)`` with position > 0.
    """
    if not breaks_masses:
        return 0.0
    pos = np.array([p for p, _ in breaks_masses])
    mass = np.array([m for _, m in breaks_masses])
    order = np.argsort(pos)
    pos, mass = pos[order], mass[order]
    total = 0.0
    lo = 0.0
    remaining = mass.sum()
    for p, m in zip(pos, mass):
        total += remaining * (p * p - lo * lo)
        remaining -= m
        lo = p
    return float(total)


def log_norm_two_ways(x: AlgebraElement):
    """``||log|x|||_2`` directly and through the tail-integral formula.

    The second route integrates ``2 lam [mu_|x|(e^lam, inf) + mu_|x^-1|(e^lam, inf)]``
    exactly between the breakpoints of the two step functions.
    """
    require_invertible(x)
    direct = l2_norm(log_abs(x))
    mu = abs_spectral_measure(x)
    mu_inv = abs_spectral_measure(x.inv())
    atoms = [(np.log(s), m) for s, m in mu.atoms if s > 1.0]
    atoms += [(np.log(s), m) for s, m in mu_inv.atoms if s > 1.0]
    return direct, float(np.sqrt(_exact_tail_integral(atoms)))


def log_fk_determinant(x: AlgebraElement) -> float:
    """``log Delta(x) = int log(lam) dmu_|x|(lam)``."""
    require_invertible(x)
    total = 0.0
    for spec, s in zip(x.parent.blocks, singular_values(x)):
        w = spec.weight if isinstance(spec, Factor) else spec.weight_array
        total += float(np.sum(w * np.log(s)))
    return total


def fk_determinant(x: AlgebraElement) -> float:
    """Fuglede-Kadison determinant."""
    return float(np.exp(log_fk_determinant(x)))


def bounded_lipschitz_distance(mu: SpectralMeasure, nu: SpectralMeasure) -> float:
    """``sup{int f d(mu - nu) : |f| <= 1, Lip(f) <= 1}`` for atomic measures.

    On the line the Lipschitz constraint only needs checking between
    neighbouring support points, which leaves a small exact linear program.
    """
    pts = np.union1d(mu.locations, nu.locations)
    if pts.size == 0:
        return 0.0
    w = np.zeros(pts.size)
    w[np.searchsorted(pts, mu.locations)] += mu.masses
    w[np.searchsorted(pts, nu.locations)] -= nu.masses
    if np.all(np.abs(w) <= 1e-15 * (1 + mu.total_mass)):
        return 0.0
    k = pts.size
    if k == 1:
        return float(abs(w[0]))
    gaps = np.diff(pts)
    rows = np.zeros((2 * (k - 1), k))
    idx = np.arange(k - 1)
    rows[idx, idx + 1] = 1.0
    rows[idx, idx] = -1.0
    rows[k - 1 + idx, idx + 1] = -1.0
    rows[k - 1 + idx, idx] = 1.0
    res = linprog(-w, A_ub=rows, b_ub=np.concatenate([gaps, gaps]),
                  bounds=[(-1.0, 1.0)] * k, method="highs")
    if not res.success:  # pragma: no cover - the LP is always feasible and bounded
        raise RuntimeError(res.message)
    return float(max(-res.fun, 0.0))
