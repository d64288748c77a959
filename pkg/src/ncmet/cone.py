"""The cone of positive invertible elements with the metric ``||log(a^{-1/2} b a^{-1/2})||_2``.

Points keep the eigendecomposition of their logarithm. Square roots, powers
and logs are functional calculus on that data, and the relative position
``a^{-1/2} b a^{-1/2}`` is never formed explicitly: its spectrum is read off
the graded matrix ``diag(exp(beta/2)) W diag(exp(-alpha/2))`` with
``W = U_b^* U_a``, which stays accurate however far the eigenvalues of the
two points spread.
"""

from __future__ import annotations

import numpy as np

from .algebra import (
    AlgebraElement,
    Factor,
    HermitianEig,
    SINGULARITY_FLOOR,
    hermitian_eig,
    l2_norm,
    require_invertible,
    symmetrized,
)
from .errors import ConditioningError, DomainError
from .products import graded_log_svd

EQUALITY_THRESHOLD = 1e-10
# below this combined log-eigenvalue spread (nats) the sandwich a^{-1/2} b a^{-1/2}
# loses at most ~1e-11 relative accuracy, so the cheap direct route is used
DIRECT_SPREAD = 11.5


class PositivePoint:
    """A positive-definite element of a tracial algebra.

    Build from an element (checked against the singularity floor) or, via
    :func:`exp_point`, from a Hermitian logarithm, in which case the point is
    represented exactly by that logarithm and may be arbitrarily
    ill-conditioned.
    """

    __slots__ = ("_element", "_log", "_eig")

    def __init__(self, element: AlgebraElement, cached_log: AlgebraElement | None = None):
        if cached_log is not None:
            self._log = symmetrized(cached_log)
            self._eig = hermitian_eig(self._log)
            self._element = symmetrized(element) if element is not None else None
            return
        eig = hermitian_eig(element)
        top = max(np.abs(v).max() for v in eig.values)
        low = min(v.min() for v in eig.values)
        if not low > SINGULARITY_FLOOR * top:
            raise ConditioningError(
                f"not positive definite: smallest eigenvalue {low:.3e}, largest {top:.3e}",
                smallest_singular_value=float(low))
        self._element = symmetrized(element)
        self._eig = HermitianEig(eig.parent, tuple(np.log(v) for v in eig.values), eig.vectors)
        self._log = None

    @property
    def parent(self):
        return self._eig.parent

    @property
    def log_eig(self) -> HermitianEig:
        """Eigendata of ``log a``."""
        return self._eig

    @property
    def element(self) -> AlgebraElement:
        if self._element is None:
            self._element = self._eig.apply(np.exp)
        return self._element

    @property
    def cached_log(self) -> AlgebraElement | None:
        return self._log

    def log(self) -> AlgebraElement:
        if self._log is None:
            self._log = self._eig.apply(lambda v: v)
        return self._log

    def power(self, s: float) -> "PositivePoint":
        return exp_point(self.log() * s)

    def sqrt(self) -> AlgebraElement:
        return self._eig.apply(lambda v: np.exp(v / 2))

    def inv_sqrt(self) -> AlgebraElement:
        return self._eig.apply(lambda v: np.exp(-v / 2))

    def __repr__(self):
        return f"PositivePoint({self.element!r})"


def exp_point(h: AlgebraElement) -> PositivePoint:
    """``exp(h)`` for Hermitian ``h``."""
    return PositivePoint(None, cached_log=h)


def log_point(a: PositivePoint) -> AlgebraElement:
    return a.log()


def identity_point(algebra) -> PositivePoint:
    return exp_point(algebra.zeros())


def _relative_log(a: PositivePoint, b: PositivePoint) -> HermitianEig:
    """Eigendata of ``log(a^{-1/2} b a^{-1/2})``."""
    if a.parent != b.parent:
        a.log()._check(b.log())
    values, vectors = [], []
    ea, eb = a.log_eig, b.log_eig
    for spec, al, Ua, be, Ub in zip(a.parent.blocks, ea.values, ea.vectors, eb.values, eb.vectors):
        if not isinstance(spec, Factor):
            values.append(be - al)
            vectors.append(None)
            continue
        if np.ptp(al) + np.ptp(be) <= DIRECT_SPREAD:
            c = (Ua * np.exp(-al / 2)[None, :]) @ Ua.conj().T
            m = c @ ((Ub * np.exp(be)[None, :]) @ Ub.conj().T) @ c
            w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
            if w[0] > 0:
                values.append(np.log(w))
                vectors.append(v)
                continue
        W = Ub.conj().T @ Ua
        rows = W * np.exp(-(al - al.min()) / 2)[None, :]
        norms = np.linalg.norm(rows, axis=1)
        ell = be / 2 - al.min() / 2 + np.log(norms)
        s, V = graded_log_svd(ell, rows / norms[:, None])
        order = np.argsort(s, kind="stable")
        values.append(2 * s[order])
        vectors.append(Ua @ V[:, order])
    return HermitianEig(a.parent, tuple(values), tuple(vectors))


def dP(a: PositivePoint, b: PositivePoint) -> float:
    """Distance ``||log(a^{-1/2} b a^{-1/2})||_2``."""
    total = 0.0
    for spec, logs in zip(a.parent.blocks, _relative_log(a, b).values):
        w = spec.weight if isinstance(spec, Factor) else spec.weight_array
        total += float(np.sum(w * logs ** 2))
    return float(np.sqrt(total))


def points_equal(a: PositivePoint, b: PositivePoint) -> bool:
    return dP(a, b) < EQUALITY_THRESHOLD


def act(g: AlgebraElement, a: PositivePoint) -> PositivePoint:
    """The isometric action ``g.a = g a g*``."""
    require_invertible(g)
    return PositivePoint(g @ a.element @ g.adj)


class GeodesicSegment:
    """Unit-speed geodesic ``t -> a^{1/2} exp(t xi) a^{1/2}`` on ``[0, length]``."""

    __slots__ = ("start", "direction", "length")

    def __init__(self, start: PositivePoint, direction: AlgebraElement, length: float):
        self.start = start
        self.direction = direction
        self.length = float(length)

    def __call__(self, t: float) -> PositivePoint:
        return evaluate(self, t)


def geodesic(a: PositivePoint, b: PositivePoint) -> GeodesicSegment:
    xi = _relative_log(a, b).apply(lambda v: v)
    length = l2_norm(xi)
    if length < EQUALITY_THRESHOLD:
        return GeodesicSegment(a, a.parent.zeros(), 0.0)
    return GeodesicSegment(a, xi / length, length)


def evaluate(seg: GeodesicSegment, t: float) -> PositivePoint:
    if t == 0:
        return seg.start
    root = seg.start.sqrt()
    inner = hermitian_eig(seg.direction).apply(lambda s: np.exp(t * s))
    return PositivePoint(root @ inner @ root)


def midpoint(a: PositivePoint, b: PositivePoint) -> PositivePoint:
    seg = geodesic(a, b)
    return evaluate(seg, seg.length / 2)


def contraction_check(a: PositivePoint, b: PositivePoint, sigma: float):
    """Return ``(dP(a^sigma, b^sigma), sigma * dP(a, b))``; the first dominates for sigma >= 1."""
    if sigma < 1:
        raise DomainError(f"contraction needs sigma >= 1, got {sigma}")
    return dP(a.power(sigma), b.power(sigma)), sigma * dP(a, b)


def cn_inequality_check(x: PositivePoint, y: PositivePoint, z: PositivePoint) -> float:
    """Slack in the midpoint comparison inequality; CAT(0) means slack >= 0.

    ``(d(z,x)^2 + d(z,y)^2)/2 - d(x,y)^2/4 - d(z,m)^2`` with ``m`` the
    midpoint of ``x`` and ``y``.
    """
    m = midpoint(x, y)
    dzx, dzy, dxy, dzm = dP(z, x), dP(z, y), dP(x, y), dP(z, m)
    return 0.5 * (dzx ** 2 + dzy ** 2) - 0.25 * dxy ** 2 - dzm ** 2
