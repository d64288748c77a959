"""Finite-dimensional tracial *-algebras.

An algebra is a direct sum of weighted matrix factors ``M_n`` (trace
``w * sum_k x_kk``) and weighted diagonal blocks (trace ``sum_j nu_j x_j``).
Elements are immutable tuples of numpy blocks; the algebra product is ``@``
and ``*`` is reserved for scalars.

The L2 space of the algebra is identified with the algebra itself, so a
"vector" xi is simply another :class:`AlgebraElement` acted on by left
multiplication.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConditioningError, DomainError, StructuralError

HERMITIAN_RTOL = 1e-10
SINGULARITY_FLOOR = 1e-12


@dataclass(frozen=True)
class Factor:
    """Full matrix algebra ``M_n`` with trace ``weight * Tr``."""

    n: int
    weight: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise StructuralError(f"factor size must be a positive integer, got {self.n!r}")
        w = float(self.weight)
        if not np.isfinite(w) or w <= 0:
            raise StructuralError(f"factor weight must be finite and > 0, got {self.weight!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "weight", w)

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def trace_of_identity(self) -> float:
        return self.weight * self.n


@dataclass(frozen=True)
class Abelian:
    """Diagonal algebra with atom weights ``nu_1..nu_m``."""

    weights: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if not w:
            raise StructuralError("abelian block needs at least one weight")
        if not all(np.isfinite(v) and v > 0 for v in w):
            raise StructuralError("abelian weights must be finite and > 0")
        object.__setattr__(self, "weights", w)

    @property
    def shape(self):
        return (len(self.weights),)

    @property
    def trace_of_identity(self) -> float:
        return float(sum(self.weights))

    @property
    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights)


@dataclass(frozen=True)
class TracialAlgebra:
    """Finite direct sum of :class:`Factor` and :class:`Abelian` blocks."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise StructuralError("an algebra needs at least one block")
        for b in blocks:
            if not isinstance(b, (Factor, Abelian)):
                raise StructuralError(f"unknown block {b!r}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def matrix(cls, n: int, normalized: bool = True) -> "TracialAlgebra":
        """``M_n`` with the normalized (``tau(id) = 1``) or standard trace."""
        return cls((Factor(n, 1.0 / n if normalized else 1.0),))

    @classmethod
    def diagonal(cls, weights: Sequence[float], normalize: bool = False) -> "TracialAlgebra":
        w = np.asarray(weights, dtype=float)
        if normalize:
            w = w / w.sum()
        return cls((Abelian(tuple(w)),))

    @property
    def trace_of_identity(self) -> float:
        return float(sum(b.trace_of_identity for b in self.blocks))

    @property
    def dimension(self) -> int:
        return sum(b.n * b.n if isinstance(b, Factor) else len(b.weights) for b in self.blocks)

    def identity(self) -> "AlgebraElement":
        return AlgebraElement(self, [np.eye(b.n) if isinstance(b, Factor) else np.ones(b.shape)
                                     for b in self.blocks])

    def zeros(self) -> "AlgebraElement":
        return AlgebraElement(self, [np.zeros(b.shape) for b in self.blocks])

    def scalar(self, value: complex) -> "AlgebraElement":
        return self.identity() * value

    def element(self, blocks: Sequence) -> "AlgebraElement":
        return AlgebraElement(self, blocks)


def _freeze(a) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.setflags(write=False)
    return arr


class AlgebraElement:
    """An element of a :class:`TracialAlgebra`, stored block by block.

    Factor blocks are ``n x n`` complex arrays, abelian blocks are complex
    vectors. Instances are immutable.
    """

    __slots__ = ("parent", "blocks")

    def __init__(self, parent: TracialAlgebra, blocks: Sequence):
        blocks = tuple(_freeze(b) for b in blocks)
        if len(blocks) != len(parent.blocks):
            raise StructuralError(
                f"expected {len(parent.blocks)} blocks, got {len(blocks)}")
        for k, (spec, data) in enumerate(zip(parent.blocks, blocks)):
            if data.shape != spec.shape:
                raise StructuralError(
                    f"block {k}: expected shape {spec.shape}, got {data.shape}")
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "blocks", blocks)

    def __setattr__(self, name, value):
        raise AttributeError("AlgebraElement is immutable")

    def __repr__(self):
        return f"AlgebraElement({self.parent!r}, {[b.tolist() for b in self.blocks]!r})"

    # -- arithmetic -------------------------------------------------------
    def _check(self, other: "AlgebraElement"):
        if not isinstance(other, AlgebraElement):
            raise StructuralError(f"expected an AlgebraElement, got {type(other).__name__}")
        if other.parent != self.parent:
            raise StructuralError("elements belong to different algebras")

    def _map(self, fn) -> "AlgebraElement":
        return AlgebraElement(self.parent, [fn(b) for b in self.blocks])

    def __add__(self, other):
        if np.isscalar(other):
            return self + self.parent.scalar(other)
        self._check(other)
        return AlgebraElement(self.parent, [a + b for a, b in zip(self.blocks, other.blocks)])

    __radd__ = __add__

    def __sub__(self, other):
        if np.isscalar(other):
            return self - self.parent.scalar(other)
        self._check(other)
        return AlgebraElement(self.parent, [a - b for a, b in zip(self.blocks, other.blocks)])

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return self._map(lambda b: -b)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return self._map(lambda b: b * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return self._map(lambda b: b / scalar)

    def __matmul__(self, other):
        self._check(other)
        out = []
        for spec, a, b in zip(self.parent.blocks, self.blocks, other.blocks):
            out.append(a @ b if isinstance(spec, Factor) else a * b)
        return AlgebraElement(self.parent, out)

    @property
    def adj(self) -> "AlgebraElement":
        """The adjoint ``x*``."""
        return AlgebraElement(self.parent, [
            b.conj().T if isinstance(s, Factor) else b.conj()
            for s, b in zip(self.parent.blocks, self.blocks)])

    def inv(self) -> "AlgebraElement":
        require_invertible(self)
        return AlgebraElement(self.parent, [
            np.linalg.inv(b) if isinstance(s, Factor) else 1.0 / b
            for s, b in zip(self.parent.blocks, self.blocks)])

    def power(self, k: int) -> "AlgebraElement":
        """Integer power by repeated squaring (negative ``k`` uses the inverse)."""
        base = self if k >= 0 else self.inv()
        k = abs(int(k))
        result = self.parent.identity()
        while k:
            if k & 1:
                result = result @ base
            base = base @ base
            k >>= 1
        return result

    @property
    def real_if_close(self) -> "AlgebraElement":
        return self._map(lambda b: np.real_if_close(b, tol=1000))

    def allclose(self, other: "AlgebraElement", atol: float = 1e-10) -> bool:
        self._check(other)
        return l2_norm(self - other) <= atol

    def is_hermitian(self, rtol: float = HERMITIAN_RTOL) -> bool:
        scale = l2_norm(self)
        return l2_norm(self - self.adj) <= rtol * max(scale, 1e-300)


# -- scalar functionals ---------------------------------------------------

def trace(x: AlgebraElement) -> complex:
    """The weighted trace: sum over blocks of weighted diagonal sums."""
    total = 0j
    for spec, b in zip(x.parent.blocks, x.blocks):
        if isinstance(spec, Factor):
            total += spec.weight * np.trace(b)
        else:
            total += np.dot(spec.weight_array, b)
    return complex(total)


def l2_inner(x: AlgebraElement, y: AlgebraElement) -> complex:
    """``<x, y> = tau(x* y)``, conjugate-linear in ``x``."""
    x._check(y)
    total = 0j
    for spec, a, b in zip(x.parent.blocks, x.blocks, y.blocks):
        if isinstance(spec, Factor):
            total += spec.weight * np.vdot(a, b)
        else:
            total += np.dot(spec.weight_array, a.conj() * b)
    return complex(total)


def l2_norm(x: AlgebraElement) -> float:
    total = 0.0
    for spec, b in zip(x.parent.blocks, x.blocks):
        sq = (b.real ** 2 + b.imag ** 2)
        if isinstance(spec, Factor):
            total += spec.weight * sq.sum()
        else:
            total += np.dot(spec.weight_array, sq)
    return float(np.sqrt(total))


def singular_values(x: AlgebraElement) -> list:
    """Per-block singular values (descending for factor blocks)."""
    out = []
    for spec, b in zip(x.parent.blocks, x.blocks):
        if isinstance(spec, Factor):
            out.append(np.linalg.svd(b, compute_uv=False))
        else:
            out.append(np.abs(b))
    return out


def op_norm(x: AlgebraElement) -> float:
    """Operator norm: the largest singular value over all blocks."""
    return float(max(s.max() for s in singular_values(x)))


def smallest_singular_value(x: AlgebraElement) -> float:
    return float(min(s.min() for s in singular_values(x)))


def require_invertible(x: AlgebraElement, floor: float = SINGULARITY_FLOOR) -> None:
    """Raise :class:`ConditioningError` unless ``s_min >= floor * ||x||_inf``."""
    svals = singular_values(x)
    smax = max(s.max() for s in svals)
    smin = min(s.min() for s in svals)
    if not np.isfinite(smax) or smin < floor * smax or smax == 0:
        raise ConditioningError(
            f"element is numerically singular: smallest singular value {smin:.3e} "
            f"vs operator norm {smax:.3e}", smallest_singular_value=float(smin))


# -- spectral calculus ----------------------------------------------------

@dataclass(frozen=True)
class HermitianEig:
    """Per-block eigendata of a Hermitian element.

    ``vectors[k]`` is the unitary diagonalizer of a factor block and ``None``
    for an abelian block, which is already diagonal.
    """

    parent: TracialAlgebra
    values: tuple
    vectors: tuple

    def apply(self, f: Callable[[np.ndarray], np.ndarray]) -> AlgebraElement:
        blocks = []
        for vals, vecs in zip(self.values, self.vectors):
            fv = _evaluate(f, vals)
            if vecs is None:
                blocks.append(fv)
            else:
                blocks.append((vecs * fv) @ vecs.conj().T)
        return AlgebraElement(self.parent, blocks)


def _evaluate(f, vals: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        try:
            fv = np.asarray(f(vals))
        except (ValueError, ArithmeticError) as exc:
            raise DomainError(f"function undefined on spectrum {vals.tolist()}: {exc}") from exc
    if fv.shape != vals.shape:
        fv = np.broadcast_to(fv, vals.shape)
    bad = ~np.isfinite(fv)
    if bad.any():
        lam = float(vals[bad][0])
        raise DomainError(f"function undefined at eigenvalue {lam!r}")
    return fv


def symmetrized(x: AlgebraElement, rtol: float = HERMITIAN_RTOL) -> AlgebraElement:
    """Return ``(x + x*)/2`` after checking ``x`` is Hermitian to ``rtol``."""
    scale = l2_norm(x)
    defect = l2_norm(x - x.adj)
    if defect > rtol * max(scale, 1e-300) and defect > 0:
        raise DomainError(f"element is not Hermitian (relative defect {defect / max(scale, 1e-300):.3e})")
    return (x + x.adj) * 0.5


def hermitian_eig(x: AlgebraElement) -> HermitianEig:
    """Eigendecomposition ``x = U diag(lambda) U*`` per block, factor blocks ascending."""
    h = symmetrized(x)
    values, vectors = [], []
    for spec, b in zip(h.parent.blocks, h.blocks):
        if isinstance(spec, Factor):
            w, v = np.linalg.eigh(b)
            values.append(w)
            vectors.append(v)
        else:
            values.append(b.real.copy())
            vectors.append(None)
    return HermitianEig(h.parent, tuple(values), tuple(vectors))


def functional_calculus(x: AlgebraElement, f: Callable[[np.ndarray], np.ndarray]) -> AlgebraElement:
    """``f(x)`` for Hermitian ``x``; ``f`` must accept a numpy array of eigenvalues."""
    return hermitian_eig(x).apply(f)


def absolute_value(x: AlgebraElement) -> AlgebraElement:
    """``|x| = (x* x)^{1/2}``."""
    return functional_calculus(x.adj @ x, lambda t: np.sqrt(np.clip(t, 0.0, None)))


def exp_h(h: AlgebraElement) -> AlgebraElement:
    return functional_calculus(h, np.exp)


def log_h(a: AlgebraElement) -> AlgebraElement:
    return functional_calculus(a, _strict_log)


def _strict_log(t):
    t = np.asarray(t, dtype=float)
    if (t <= 0).any():
        raise DomainError(f"log undefined at eigenvalue {float(t[t <= 0][0])!r}")
    return np.log(t)


def log_abs(x: AlgebraElement) -> AlgebraElement:
    """``log|x|`` computed from the singular value decomposition of each block."""
    require_invertible(x)
    blocks = []
    for spec, b in zip(x.parent.blocks, x.blocks):
        if isinstance(spec, Factor):
            _, s, vh = np.linalg.svd(b)
            v = vh.conj().T
            blocks.append((v * np.log(s)) @ vh)
        else:
            blocks.append(np.log(np.abs(b)))
    return AlgebraElement(x.parent, blocks)


@dataclass(frozen=True)
class PolarParts:
    unitary_part: AlgebraElement
    positive_part: AlgebraElement


def polar_decompose(x: AlgebraElement) -> PolarParts:
    """``x = u |x|`` for invertible ``x``; ``u`` is unitary."""
    require_invertible(x)
    modulus = absolute_value(x)
    u = x @ modulus.inv()
    return PolarParts(u, modulus)


def range_projection(x: AlgebraElement, rtol: float = 1e-9) -> AlgebraElement:
    """Orthogonal projection onto the range of left multiplication by ``x``."""
    blocks = []
    for spec, b in zip(x.parent.blocks, x.blocks):
        if isinstance(spec, Factor):
            u, s, _ = np.linalg.svd(b)
            cut = rtol * (s.max() if s.size and s.max() > 0 else 1.0)
            uk = u[:, s > cut]
            blocks.append(uk @ uk.conj().T)
        else:
            mag = np.abs(b)
            cut = rtol * (mag.max() if mag.max() > 0 else 1.0)
            blocks.append((mag > cut).astype(float))
    return AlgebraElement(x.parent, blocks)


# -- random sampling ------------------------------------------------------

def _gaussian(rng: np.random.Generator, shape, complex_: bool = True) -> np.ndarray:
    g = rng.standard_normal(shape)
    if complex_:
        g = (g + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return g


def random_element(algebra: TracialAlgebra, rng: np.random.Generator, scale: float = 1.0,
                   complex_: bool = True) -> AlgebraElement:
    """Gaussian (Ginibre) blocks; invertible with probability one."""
    return AlgebraElement(algebra, [scale * _gaussian(rng, b.shape, complex_) for b in algebra.blocks])


def random_hermitian(algebra: TracialAlgebra, rng: np.random.Generator, scale: float = 1.0) -> AlgebraElement:
    x = random_element(algebra, rng, scale)
    return AlgebraElement(algebra, [
        (b + b.conj().T) / np.sqrt(2) if isinstance(s, Factor) else b.real
        for s, b in zip(algebra.blocks, x.blocks)])


def random_positive(algebra: TracialAlgebra, rng: np.random.Generator, scale: float = 1.0) -> AlgebraElement:
    """``exp(h)`` for a random Hermitian ``h``."""
    return exp_h(random_hermitian(algebra, rng, scale))


def random_unitary(algebra: TracialAlgebra, rng: np.random.Generator) -> AlgebraElement:
    blocks = []
    for spec in algebra.blocks:
        if isinstance(spec, Factor):
            q, r = np.linalg.qr(_gaussian(rng, spec.shape))
            blocks.append(q * (np.diag(r) / np.abs(np.diag(r))))
        else:
            blocks.append(np.exp(2j * np.pi * rng.random(spec.shape)))
    return AlgebraElement(algebra, blocks)


# -- serialization --------------------------------------------------------

def algebra_to_json(algebra: TracialAlgebra) -> dict:
    out = []
    for b in algebra.blocks:
        if isinstance(b, Factor):
            out.append({"kind": "factor", "n": b.n, "weight": b.weight})
        else:
            out.append({"kind": "abelian", "weights": list(b.weights)})
    return {"blocks": out}


def algebra_from_json(data: dict) -> TracialAlgebra:
    try:
        raw = data["blocks"]
    except (KeyError, TypeError) as exc:
        raise StructuralError("algebra JSON needs a 'blocks' list") from exc
    blocks = []
    for k, b in enumerate(raw):
        kind = b.get("kind")
        if kind == "factor":
            blocks.append(Factor(b["n"], b.get("weight", 1.0)))
        elif kind == "abelian":
            blocks.append(Abelian(tuple(b["weights"])))
        else:
            raise StructuralError(f"blocks[{k}]: unknown kind {kind!r}")
    return TracialAlgebra(tuple(blocks))


def _pairs(arr: np.ndarray):
    if arr.ndim == 0:
        return [float(arr.real), float(arr.imag)]
    return [_pairs(a) for a in arr]


def element_to_json(x: AlgebraElement) -> dict:
    """Blocks as nested arrays of ``[re, im]`` pairs; exact for binary64."""
    return {"algebra": algebra_to_json(x.parent), "blocks": [_pairs(b) for b in x.blocks]}


def element_from_json(data: dict, algebra: TracialAlgebra | None = None) -> AlgebraElement:
    if algebra is None:
        algebra = algebra_from_json(data["algebra"])
    blocks = []
    for raw in data["blocks"]:
        arr = np.asarray(raw, dtype=float)
        blocks.append(arr[..., 0] + 1j * arr[..., 1])
    return AlgebraElement(algebra, blocks)
