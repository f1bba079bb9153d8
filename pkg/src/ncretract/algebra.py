"""Elements of finite-dimensional C*-algebras A = M_{n_1} + ... + M_{n_B}.

Coordinates are taken in the matrix-unit basis ordered lexicographically by
(block, row, col).  Internally every batch computation embeds elements as
block-diagonal N x N matrices (N = sum n_i), which is closed under products,
adjoints and the functional calculus.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np


class SignatureMismatch(ValueError):
    """Raised when two elements live in different algebras."""


@dataclass(frozen=True)
class Tolerance:
    """Numerical slack used for every verdict.

    ``eq_tol`` is relative to the operand norms, ``psd_tol`` bounds negative
    eigenvalues relative to ``max(1, norm)``, ``rank_tol`` cuts singular values
    relative to the largest one.
    """

    eq_tol: float = 1e-9
    psd_tol: float = 1e-8
    rank_tol: float = 1e-9

    def __post_init__(self):
        for name in ("eq_tol", "psd_tol", "rank_tol"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be strictly positive, got {value!r}")

    def to_dict(self) -> dict:
        return {"eq_tol": self.eq_tol, "psd_tol": self.psd_tol, "rank_tol": self.rank_tol}

    @classmethod
    def from_dict(cls, d: dict) -> "Tolerance":
        return cls(**{k: float(v) for k, v in d.items()})


DEFAULT_TOL = Tolerance()


@dataclass(frozen=True)
class AlgebraSignature:
    """Block sizes (n_1, ..., n_B) of a direct sum of full matrix algebras."""

    blocks: tuple[int, ...]

    def __init__(self, blocks: Sequence[int]):
        blocks = tuple(int(n) for n in blocks)
        if not blocks:
            raise ValueError("a signature needs at least one block")
        if any(n < 1 for n in blocks):
            raise ValueError(f"block sizes must be positive, got {blocks}")
        object.__setattr__(self, "blocks", blocks)

    def __repr__(self):
        return f"AlgebraSignature({list(self.blocks)})"

    @cached_property
    def dim(self) -> int:
        return sum(n * n for n in self.blocks)

    @cached_property
    def size(self) -> int:
        """Side length N of the ambient block-diagonal matrix."""
        return sum(self.blocks)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        """Starting coordinate of each block."""
        out, acc = [], 0
        for n in self.blocks:
            out.append(acc)
            acc += n * n
        return tuple(out)

    @cached_property
    def diag_offsets(self) -> tuple[int, ...]:
        """Starting row of each block inside the N x N embedding."""
        out, acc = [], 0
        for n in self.blocks:
            out.append(acc)
            acc += n
        return tuple(out)

    @cached_property
    def _positions(self) -> tuple[np.ndarray, np.ndarray]:
        rows, cols = [], []
        for n, s in zip(self.blocks, self.diag_offsets):
            r, c = np.divmod(np.arange(n * n), n)
            rows.append(r + s)
            cols.append(c + s)
        return np.concatenate(rows), np.concatenate(cols)

    def basis_label(self, i: int) -> tuple[int, int, int]:
        """(block, row, col) of the i-th matrix unit."""
        for b, (n, off) in enumerate(zip(self.blocks, self.offsets)):
            if i < off + n * n:
                k, l = divmod(i - off, n)
                return b, k, l
        raise IndexError(i)

    def direct_sum(self, other: "AlgebraSignature") -> "AlgebraSignature":
        return AlgebraSignature(self.blocks + other.blocks)

    @property
    def is_commutative(self) -> bool:
        return all(n == 1 for n in self.blocks)

    # batch helpers on coordinate arrays of shape (..., d)

    def embed(self, vecs: np.ndarray) -> np.ndarray:
        vecs = np.asarray(vecs, dtype=complex)
        out = np.zeros(vecs.shape[:-1] + (self.size, self.size), dtype=complex)
        r, c = self._positions
        out[..., r, c] = vecs
        return out

    def extract(self, mats: np.ndarray) -> np.ndarray:
        r, c = self._positions
        return np.asarray(mats)[..., r, c]

    # constructors

    def zero(self) -> "BlockMatrix":
        return BlockMatrix(self, [np.zeros((n, n), complex) for n in self.blocks])

    def identity(self) -> "BlockMatrix":
        return BlockMatrix(self, [np.eye(n, dtype=complex) for n in self.blocks])

    def unit(self, block: int, k: int, l: int) -> "BlockMatrix":
        """Matrix unit e^{(block)}_{kl} (zero-based indices)."""
        data = [np.zeros((n, n), complex) for n in self.blocks]
        data[block][k, l] = 1.0
        return BlockMatrix(self, data)

    def basis(self) -> list["BlockMatrix"]:
        return [self.from_vector(v) for v in np.eye(self.dim, dtype=complex)]

    def from_vector(self, v: np.ndarray) -> "BlockMatrix":
        v = np.asarray(v, dtype=complex)
        if v.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got shape {v.shape}")
        return BlockMatrix(
            self,
            [v[off:off + n * n].reshape(n, n) for n, off in zip(self.blocks, self.offsets)],
        )

    def from_dense(self, m: np.ndarray) -> "BlockMatrix":
        """Element from its N x N block-diagonal embedding (off-block entries dropped)."""
        return self.from_vector(self.extract(m))

    def random(self, rng: np.random.Generator, normalize: bool = True) -> "BlockMatrix":
        """Complex Gaussian element, scaled to unit operator norm by default."""
        v = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        x = self.from_vector(v)
        if normalize:
            x = x * (1.0 / operator_norm(x))
        return x

    def random_batch(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """``count`` unit-norm random elements as coordinate rows, shape (count, d)."""
        v = rng.standard_normal((count, self.dim)) + 1j * rng.standard_normal((count, self.dim))
        norms = np.linalg.norm(self.embed(v), ord=2, axis=(-2, -1))
        return v / norms[:, None]

    def random_self_adjoint_batch(self, rng: np.random.Generator, count: int) -> np.ndarray:
        m = self.embed(self.random_batch(rng, count))
        h = (m + np.conj(np.swapaxes(m, -1, -2))) / 2
        h /= np.maximum(np.linalg.norm(h, ord=2, axis=(-2, -1)), 1e-300)[:, None, None]
        return self.extract(h)


class BlockMatrix:
    """Immutable element of a block-diagonal C*-algebra."""

    __slots__ = ("signature", "blocks")

    def __init__(self, signature: AlgebraSignature, data: Sequence[np.ndarray]):
        data = [np.array(b, dtype=complex) for b in data]
        if len(data) != len(signature.blocks):
            raise ValueError(f"expected {len(signature.blocks)} blocks, got {len(data)}")
        for b, n in zip(data, signature.blocks):
            if b.shape != (n, n):
                raise ValueError(f"block shape {b.shape} does not match size {n}")
            b.flags.writeable = False
        object.__setattr__(self, "signature", signature)
        object.__setattr__(self, "blocks", tuple(data))

    def __setattr__(self, name, value):
        raise AttributeError("BlockMatrix is immutable")

    def __repr__(self):
        inner = ", ".join(np.array2string(b, precision=4, suppress_small=True) for b in self.blocks)
        return f"BlockMatrix({list(self.signature.blocks)}: {inner})"

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.blocks)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([b.ravel() for b in self.blocks])

    def to_dense(self) -> np.ndarray:
        return self.signature.embed(self.to_vector())

    def _check(self, other: "BlockMatrix"):
        if not isinstance(other, BlockMatrix):
            return NotImplemented
        if other.signature != self.signature:
            raise SignatureMismatch(f"{self.signature} vs {other.signature}")

    def __add__(self, other):
        self._check(other)
        return BlockMatrix(self.signature, [a + b for a, b in zip(self.blocks, other.blocks)])

    def __sub__(self, other):
        self._check(other)
        return BlockMatrix(self.signature, [a - b for a, b in zip(self.blocks, other.blocks)])

    def __neg__(self):
        return BlockMatrix(self.signature, [-a for a in self.blocks])

    def __mul__(self, scalar):
        if isinstance(scalar, BlockMatrix):
            raise TypeError("use @ or multiply() for the algebra product")
        return BlockMatrix(self.signature, [a * scalar for a in self.blocks])

    __rmul__ = __mul__

    def __matmul__(self, other):
        return multiply(self, other)

    @property
    def H(self) -> "BlockMatrix":
        return adjoint(self)

    def allclose(self, other: "BlockMatrix", tol: Tolerance = DEFAULT_TOL) -> bool:
        return is_close(self, other, tol)


def _same(x: BlockMatrix, *others: BlockMatrix):
    for y in others:
        if y.signature != x.signature:
            raise SignatureMismatch(f"{x.signature} vs {y.signature}")


def multiply(x: BlockMatrix, y: BlockMatrix) -> BlockMatrix:
    _same(x, y)
    return BlockMatrix(x.signature, [a @ b for a, b in zip(x.blocks, y.blocks)])


def adjoint(x: BlockMatrix) -> BlockMatrix:
    return BlockMatrix(x.signature, [a.conj().T for a in x.blocks])


def jordan_product(x: BlockMatrix, y: BlockMatrix) -> BlockMatrix:
    """x o y = (xy + yx) / 2."""
    _same(x, y)
    return BlockMatrix(x.signature, [(a @ b + b @ a) / 2 for a, b in zip(x.blocks, y.blocks)])


def triple_product(x: BlockMatrix, y: BlockMatrix, z: BlockMatrix) -> BlockMatrix:
    """{xyz} = (x y* z + z y* x) / 2; conjugate-linear in the middle slot."""
    _same(x, y, z)
    return BlockMatrix(
        x.signature,
        [(a @ b.conj().T @ c + c @ b.conj().T @ a) / 2 for a, b, c in zip(x.blocks, y.blocks, z.blocks)],
    )


def operator_norm(x: BlockMatrix) -> float:
    """Largest singular value over all blocks."""
    return max(float(np.linalg.norm(b, ord=2)) for b in x.blocks)


def is_close(x: BlockMatrix, y: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> bool:
    _same(x, y)
    scale = max(1.0, operator_norm(x), operator_norm(y))
    return operator_norm(x - y) <= tol.eq_tol * scale


def is_self_adjoint(x: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> bool:
    return operator_norm(x - adjoint(x)) <= tol.eq_tol * max(1.0, operator_norm(x))


def min_eigenvalue(x: BlockMatrix) -> float:
    """Smallest eigenvalue of the Hermitian part."""
    return min(float(np.linalg.eigvalsh((b + b.conj().T) / 2)[0]) for b in x.blocks)


def is_positive(x: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> bool:
    if not is_self_adjoint(x, tol):
        return False
    return min_eigenvalue(x) >= -tol.psd_tol * max(1.0, operator_norm(x))


def is_projection(x: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> bool:
    return is_self_adjoint(x, tol) and is_close(multiply(x, x), x, tol)


def rank_of(x: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> list[int]:
    """Per-block numerical rank; singular values are cut at rank_tol * sigma_max(x)."""
    svals = [np.linalg.svd(b, compute_uv=False) for b in x.blocks]
    smax = max(float(s[0]) for s in svals)
    if smax == 0.0:
        return [0] * len(svals)
    cut = tol.rank_tol * smax
    return [int(np.sum(s > cut)) for s in svals]


def center_membership(x: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> bool:
    """True iff x commutes with every matrix unit."""
    sig = x.signature
    X = x.to_dense()
    B = sig.embed(np.eye(sig.dim))
    comm = X @ B - B @ X
    worst = float(np.max(np.linalg.norm(comm, ord=2, axis=(-2, -1)))) if sig.dim else 0.0
    return worst <= tol.eq_tol * max(1.0, operator_norm(x))


def blocks_are_scalar(x: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> bool:
    """Center cross-check: every block is a multiple of the identity."""
    scale = max(1.0, operator_norm(x))
    for b in x.blocks:
        lam = np.trace(b) / b.shape[0]
        if np.linalg.norm(b - lam * np.eye(b.shape[0]), ord=2) > tol.eq_tol * scale:
            return False
    return True


def unitary_from(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-random n x n unitary."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
