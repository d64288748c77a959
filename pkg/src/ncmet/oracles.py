"""Independent reference computations used to validate the estimators.

Nothing here shares code with the estimators they check: Lyapunov exponents
come from Gram-Schmidt reorthonormalization, the single-operator limit from
an eigenvector flag, s-numbers from enumerating projections, and the
counterexample cocycle from counting odometer carries in closed form.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np


def gram_schmidt(M: np.ndarray):
    """Classical Gram-Schmidt with reorthogonalization; returns ``(Q, diag R)``."""
    n = M.shape[1]
    Q = np.zeros_like(M, dtype=complex)
    r = np.zeros(n)
    for j in range(n):
        v = M[:, j].astype(complex)
        for _ in range(2):
            for i in range(j):
                v = v - np.vdot(Q[:, i], v) * Q[:, i]
        r[j] = np.linalg.norm(v)
        Q[:, j] = v / r[j]
    return Q, r


def qr_lyapunov_exponents(matrices) -> np.ndarray:
    """Lyapunov exponents of ``A_N ... A_1`` by the Benettin reorthonormalization scheme, ascending."""
    it = iter(matrices)
    first = np.asarray(next(it))
    d = first.shape[0]
    Q = np.eye(d, dtype=complex)
    total = np.zeros(d)
    count = 0
    for A in _chain(first, it):
        Q, r = gram_schmidt(np.asarray(A) @ Q)
        total += np.log(r)
        count += 1
    return np.sort(total / count)


def _chain(first, rest):
    yield first
    yield from rest


def single_operator_log_limit(T: np.ndarray) -> np.ndarray:
    """``log`` of ``lim |T^n|^{1/n}`` for diagonalizable ``T``.

    Orthonormalizes the eigenvectors in order of increasing modulus; the
    ``k``-th vector then spans the part of the flag growing like the
    ``k``-th smallest modulus.
    """
    w, V = np.linalg.eig(T)
    order = np.argsort(np.abs(w), kind="stable")
    Q, _ = gram_schmidt(V[:, order])
    return Q @ np.diag(np.log(np.abs(w[order]))) @ Q.conj().T


def s_number_by_enumeration(blocks, weights, t: float) -> float:
    """``inf ||x p||_inf`` over spectral projections ``p`` of ``|x|`` with ``tau(1 - p) <= t``.

    ``blocks`` are square matrices (use 1x1 blocks for abelian atoms) and
    ``weights`` their trace weights.
    """
    dirs = []  # (block index, right singular vector, weight)
    for k, (B, w) in enumerate(zip(blocks, weights)):
        _, _, Vh = np.linalg.svd(np.asarray(B, dtype=complex))
        for v in Vh.conj():
            dirs.append((k, v, w))
    best = np.inf
    idx = range(len(dirs))
    for r in range(len(dirs) + 1):
        for dropped in combinations(idx, r):
            if sum(dirs[i][2] for i in dropped) > t + 1e-12:
                continue
            kept = [i for i in idx if i not in dropped]
            norm = 0.0
            for k, B in enumerate(blocks):
                vs = [dirs[i][1] for i in kept if dirs[i][0] == k]
                if vs:
                    P = sum(np.outer(v, v.conj()) for v in vs)
                    norm = max(norm, np.linalg.norm(np.asarray(B) @ P, 2))
            best = min(best, norm)
    return float(best)


def power_iteration_rate(a: np.ndarray, xi: np.ndarray, n: int) -> float:
    """``||a^n xi|| / ||a^{n-1} xi||`` by normalized power iteration (Frobenius norm on matrices)."""
    v = np.asarray(xi, dtype=complex)
    v = v / np.linalg.norm(v)
    ratio = 0.0
    for _ in range(n):
        w = a @ v
        ratio = np.linalg.norm(w)
        if ratio == 0:
            return 0.0
        v = w / ratio
    return float(ratio)


def ones_below(v: int, m: int) -> int:
    """How many integers in ``[0, v)`` have bit ``m`` set."""
    period = 1 << (m + 1)
    return (v // period) * (1 << m) + max(0, v % period - (1 << m))


def odometer_bit_count(x: int, m: int, n: int, bits: int) -> int:
    """How many of ``x, x+1, ..., x+n-1 (mod 2^bits)`` have bit ``m`` set."""
    top = 1 << bits
    full, rest = divmod(n, top)
    count = full * (top >> 1)
    end = x + rest
    if end <= top:
        count += ones_below(end, m) - ones_below(x, m)
    else:
        count += ones_below(top, m) - ones_below(x, m) + ones_below(end - top, m)
    return count


def counterexample_log_cocycle(x: int, n: int, bits: int, cells: int) -> np.ndarray:
    """``log c(n, x)`` on the cells ``Y_1..Y_cells`` in closed form."""
    return np.array([odometer_bit_count(x, m, n, bits) for m in range(1, cells + 1)]) * np.log(2.0)
