"""Overflow-free left products ``c(n) = A_n ... A_1`` and their ``log|c(n)|``.

Factor blocks use forward QR iteration: with a fixed random unitary
``Q_0``, ``A_k Q_{k-1} = Q_k R_k``, so ``c(n) = Q_n T_n Q_0^*`` with
``T_n = R_n ... R_1`` upper triangular. ``T_n`` is stored row-graded as
``diag(exp(ell)) U`` with unit rows, which keeps every entry representable
no matter how far the singular values spread. ``log|c(n)|`` is then read off
with a one-sided Jacobi SVD that works on the graded columns in log scale.
Factors are buffered and folded in by a compiled kernel.
Abelian blocks simply add ``log|phi_k|`` coordinatewise.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .algebra import AlgebraElement, Factor, TracialAlgebra, require_invertible
from .errors import StructuralError

JACOBI_TOL = 1e-15
JACOBI_SWEEPS = 60
_CHECK_MEMO = 64
_BATCH = 512


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))[None, :]


def graded_log_svd(ell: np.ndarray, U: np.ndarray, tol: float = JACOBI_TOL,
                   sweeps: int = JACOBI_SWEEPS):
    """Log singular values and right singular vectors of ``diag(exp(ell)) U``.

    One-sided Jacobi on the columns of ``T^*`` (column ``i`` is
    ``exp(ell_i) conj(U[i])``), with each column kept as a unit vector times
    a log scale so that no exponential is ever formed in full.

    Returns
    -------
    s : ndarray
        Log singular values, descending.
    V : ndarray
        Unitary whose columns are the matching right singular vectors.
    """
    s = np.array(ell, dtype=float)
    V = np.ascontiguousarray(U.conj().T, dtype=np.complex128)
    _graded_jacobi(s, V, tol, sweeps)
    order = np.argsort(-s, kind="stable")
    s, V = s[order], V[:, order]
    # column norms drift from 1 by rounding only; re-orthonormalize without reordering
    q, rr = np.linalg.qr(V)
    ph = np.diagonal(rr) / np.abs(np.diagonal(rr))
    return s, q * ph[None, :]


@njit(cache=True, nogil=True)
def _graded_jacobi(s, V, tol, sweeps):
    n = s.shape[0]
    for _ in range(sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                if s[i] < s[j]:
                    s[i], s[j] = s[j], s[i]
                    for k in range(n):
                        V[k, i], V[k, j] = V[k, j], V[k, i]
                r = np.exp(s[j] - s[i])
                a = 0.0
                b = 0.0
                g = 0j
                for k in range(n):
                    a += V[k, i].real ** 2 + V[k, i].imag ** 2
                    b += V[k, j].real ** 2 + V[k, j].imag ** 2
                    g += np.conj(V[k, i]) * V[k, j]
                ga = abs(g)
                if ga <= tol * np.sqrt(a * b):
                    continue
                rotated = True
                ph = g / ga
                d = r * r * b - a
                sg = 1.0 if d >= 0 else -1.0
                # tangent of the rotation angle, divided by r to stay finite
                t_over_r = sg / (abs(d) / (2 * ga) + np.sqrt(r * r + d * d / (4 * ga * ga)))
                t = t_over_r * r
                c = 1.0 / np.sqrt(1.0 + t * t)
                ni = 0.0
                nj = 0.0
                for k in range(n):
                    vi = V[k, i]
                    vj = V[k, j]
                    new_i = c * vi - c * t * np.conj(ph) * r * vj
                    new_j = c * vj + c * t_over_r * ph * vi
                    V[k, i] = new_i
                    V[k, j] = new_j
                    ni += new_i.real ** 2 + new_i.imag ** 2
                    nj += new_j.real ** 2 + new_j.imag ** 2
                ni = np.sqrt(ni)
                nj = np.sqrt(nj)
                for k in range(n):
                    V[k, i] /= ni
                    V[k, j] /= nj
                s[i] += np.log(ni)
                s[j] += np.log(nj)
        if not rotated:
            break


@njit(cache=True, nogil=True)
def _push_batch(Q, ell, U, As):
    """Fold ``As[0], As[1], ...`` into the graded state in place; return ``sum log|det|``.

    The QR step is Gram-Schmidt applied twice, which is orthogonal to
    working precision for any numerically invertible factor.
    """
    n = Q.shape[0]
    M = np.empty((n, n), dtype=np.complex128)
    R = np.zeros((n, n), dtype=np.complex128)
    V = np.empty((n, n), dtype=np.complex128)
    m = np.empty(n)
    logdet = 0.0
    for t in range(As.shape[0]):
        A = As[t]
        for i in range(n):
            for j in range(n):
                acc = 0j
                for k in range(n):
                    acc += A[i, k] * Q[k, j]
                M[i, j] = acc
        R[:, :] = 0
        for j in range(n):
            for _ in range(2):
                for i in range(j):
                    proj = 0j
                    for k in range(n):
                        proj += np.conj(M[k, i]) * M[k, j]
                    R[i, j] += proj
                    for k in range(n):
                        M[k, j] -= proj * M[k, i]
            nrm = 0.0
            for k in range(n):
                nrm += M[k, j].real ** 2 + M[k, j].imag ** 2
            nrm = np.sqrt(nrm)
            R[j, j] = nrm
            for k in range(n):
                M[k, j] /= nrm
            logdet += np.log(nrm)
        Q[:, :] = M
        top = -np.inf
        for i in range(n - 1, -1, -1):
            if ell[i] > top:
                top = ell[i]
            m[i] = top
        for i in range(n):
            for j in range(n):
                acc = 0j
                for k in range(i, n):
                    acc += R[i, k] * np.exp(ell[k] - m[i]) * U[k, j]
                V[i, j] = acc
        for i in range(n):
            nrm = 0.0
            for j in range(n):
                nrm += V[i, j].real ** 2 + V[i, j].imag ** 2
            nrm = np.sqrt(nrm)
            ell[i] = m[i] + np.log(nrm)
            for j in range(n):
                U[i, j] = V[i, j] / nrm
    return logdet


class _FactorState:
    __slots__ = ("Q0", "Q", "ell", "U", "pending")

    def __init__(self, n: int, rng: np.random.Generator):
        self.Q0 = haar_unitary(n, rng)
        self.Q = self.Q0.copy()
        self.ell = np.zeros(n)
        self.U = np.eye(n, dtype=complex)
        self.pending = []

    def flush(self) -> float:
        """Fold the buffered factors in; return their total ``log|det|``."""
        if not self.pending:
            return 0.0
        As = np.ascontiguousarray(np.stack(self.pending), dtype=np.complex128)
        self.pending = []
        return float(_push_batch(self.Q, self.ell, self.U, As))

    def log_abs(self) -> np.ndarray:
        s, V = graded_log_svd(self.ell, self.U)
        W = self.Q0 @ V
        H = (W * s[None, :]) @ W.conj().T
        return 0.5 * (H + H.conj().T)


class CocycleProduct:
    """Accumulates ``c(n) = A_n ... A_1`` one left factor at a time.

    Parameters
    ----------
    algebra : TracialAlgebra
    seed : int
        Seeds the auxiliary unitary ``Q_0``; results depend on it only at
        rounding level.
    """

    def __init__(self, algebra: TracialAlgebra, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.algebra = algebra
        self.n = 0
        self._log_det = 0.0
        self._states = []
        self._checked = {}
        for spec in algebra.blocks:
            if isinstance(spec, Factor):
                self._states.append(_FactorState(spec.n, rng))
            else:
                self._states.append(np.zeros(len(spec.weights)))

    def push(self, g: AlgebraElement, check: bool = True) -> None:
        """Replace ``c(n)`` by ``g c(n)``."""
        if g.parent is not self.algebra and g.parent != self.algebra:
            raise StructuralError("factor lives in a different algebra")
        if check and id(g) not in self._checked:
            require_invertible(g)
            # elements are immutable, so a generator that hands out the same few
            # objects (constant or i.i.d. cocycles) is checked once per object
            if len(self._checked) < _CHECK_MEMO:
                self._checked[id(g)] = g
        for k, (spec, blk) in enumerate(zip(self.algebra.blocks, g.blocks)):
            if isinstance(spec, Factor):
                st = self._states[k]
                st.pending.append(blk)
                if len(st.pending) >= _BATCH:
                    self._log_det += spec.weight * st.flush()
            else:
                la = np.log(np.abs(blk))
                self._states[k] = self._states[k] + la
                self._log_det += float(np.dot(spec.weight_array, la))
        self.n += 1

    def _flush(self) -> None:
        for spec, st in zip(self.algebra.blocks, self._states):
            if isinstance(spec, Factor):
                self._log_det += spec.weight * st.flush()

    def log_abs(self) -> AlgebraElement:
        """``log|c(n)|`` as a Hermitian element."""
        self._flush()
        blocks = []
        for spec, st in zip(self.algebra.blocks, self._states):
            blocks.append(st.log_abs() if isinstance(spec, Factor) else st.astype(complex))
        return AlgebraElement(self.algebra, blocks)

    def log_fk_determinant(self) -> float:
        """``log Delta(c(n))`` accumulated as ``sum_k log Delta(A_k)``."""
        self._flush()
        return self._log_det
