"""Linear maps on block algebras and the conditional-expectation constructors."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import scipy.linalg

from .algebra import (
    DEFAULT_TOL,
    AlgebraSignature,
    BlockMatrix,
    SignatureMismatch,
    Tolerance,
    adjoint,
    center_membership,
    is_close,
    is_projection,
    multiply,
    operator_norm,
)


class MapConstructionError(ValueError):
    """Inputs to a map constructor violate its preconditions."""


class SplitError(ValueError):
    """The map cannot be split into range and kernel."""

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition


PROVENANCE_KINDS = ("pinching", "average", "central", "corner", "graph", "space", "permutation", "dense")


@dataclass(frozen=True)
class Provenance:
    kind: str
    params: dict = field(default_factory=dict, compare=False)


class OperatorMap:
    """Linear map between block algebras, stored as a matrix on coordinates.

    ``matrix[i, j]`` is the i-th coordinate of the image of the j-th matrix
    unit.  The provenance is descriptive metadata; the matrix is authoritative.
    """

    __slots__ = ("domain", "codomain", "matrix", "provenance")

    def __init__(
        self,
        domain: AlgebraSignature,
        matrix: np.ndarray,
        provenance: Provenance | None = None,
        codomain: AlgebraSignature | None = None,
    ):
        codomain = domain if codomain is None else codomain
        m = np.array(matrix, dtype=complex)
        if m.shape != (codomain.dim, domain.dim):
            raise ValueError(f"matrix shape {m.shape} != ({codomain.dim}, {domain.dim})")
        m.flags.writeable = False
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "codomain", codomain)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "provenance", provenance or Provenance("dense"))

    def __setattr__(self, name, value):
        raise AttributeError("OperatorMap is immutable")

    def __repr__(self):
        return f"OperatorMap({self.provenance.kind}, {list(self.domain.blocks)} -> {list(self.codomain.blocks)})"

    @property
    def signature(self) -> AlgebraSignature:
        if self.domain != self.codomain:
            raise SignatureMismatch("map is not an endomorphism")
        return self.domain

    @property
    def is_endomorphism(self) -> bool:
        return self.domain == self.codomain

    def __call__(self, x: BlockMatrix) -> BlockMatrix:
        if x.signature != self.domain:
            raise SignatureMismatch(f"{x.signature} vs {self.domain}")
        return self.codomain.from_vector(self.matrix @ x.to_vector())

    def apply_batch(self, vecs: np.ndarray) -> np.ndarray:
        """Apply to coordinate rows, shape (..., d)."""
        return np.asarray(vecs) @ self.matrix.T

    def compose(self, other: "OperatorMap") -> "OperatorMap":
        """self o other."""
        if other.codomain != self.domain:
            raise SignatureMismatch("cannot compose")
        return OperatorMap(other.domain, self.matrix @ other.matrix, Provenance("dense"), self.codomain)

    def with_matrix(self, matrix: np.ndarray) -> "OperatorMap":
        return OperatorMap(self.domain, matrix, Provenance("dense"), self.codomain)

    def unit_image(self) -> BlockMatrix:
        return self(self.domain.identity())


def from_function(sig: AlgebraSignature, fn, provenance: Provenance, codomain=None) -> OperatorMap:
    """Tabulate ``fn`` on the matrix-unit basis."""
    codomain = sig if codomain is None else codomain
    cols = [fn(b).to_vector() for b in sig.basis()]
    return OperatorMap(sig, np.array(cols).T, provenance, codomain)


def identity_map(sig: AlgebraSignature) -> OperatorMap:
    return OperatorMap(sig, np.eye(sig.dim), Provenance("pinching", {"projections": [sig.identity()]}))


def zero_map(sig: AlgebraSignature) -> OperatorMap:
    return OperatorMap(sig, np.zeros((sig.dim, sig.dim)), Provenance("central", {"p": sig.zero()}))


def _require_projection(p: BlockMatrix, tol: Tolerance, what: str):
    if not is_projection(p, tol):
        raise MapConstructionError(f"{what} is not a projection")


def pinching(projections: Sequence[BlockMatrix], tol: Tolerance = DEFAULT_TOL) -> OperatorMap:
    """x -> sum_j p_j x p_j for orthogonal projections summing to 1."""
    if not projections:
        raise MapConstructionError("empty projection family")
    sig = projections[0].signature
    total = sig.zero()
    for j, p in enumerate(projections):
        _require_projection(p, tol, f"family member {j}")
        total = total + p
        for k, q in enumerate(projections[j + 1:], start=j + 1):
            if operator_norm(multiply(p, q)) > tol.eq_tol:
                raise MapConstructionError(f"projections {j} and {k} are not orthogonal")
    if not is_close(total, sig.identity(), tol):
        raise MapConstructionError("projections do not sum to the identity")

    def fn(x):
        out = sig.zero()
        for p in projections:
            out = out + p @ x @ p
        return out

    return from_function(sig, fn, Provenance("pinching", {"projections": list(projections)}))


def diagonal_pinching(sig: AlgebraSignature) -> OperatorMap:
    """Pinching by all diagonal matrix units."""
    projs = [sig.unit(b, k, k) for b, n in enumerate(sig.blocks) for k in range(n)]
    return pinching(projs)


def central_projection_expectation(p: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> OperatorMap:
    """E_p(x) = p x for a central projection p."""
    _require_projection(p, tol, "p")
    if not center_membership(p, tol):
        raise MapConstructionError("p is not central")
    return from_function(p.signature, lambda x: p @ x, Provenance("central", {"p": p}))


def corner_compression(e: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> OperatorMap:
    """E_e(x) = e x e."""
    _require_projection(e, tol, "e")
    return from_function(e.signature, lambda x: e @ x @ e, Provenance("corner", {"e": e}))


def graph_expectation(phi: OperatorMap) -> OperatorMap:
    """(x, y) -> (x, phi(x)) on the direct sum of phi's domain and codomain."""
    A, B = phi.domain, phi.codomain
    S = A.direct_sum(B)
    m = np.zeros((S.dim, S.dim), dtype=complex)
    m[:A.dim, :A.dim] = np.eye(A.dim)
    m[A.dim:, :A.dim] = phi.matrix
    return OperatorMap(S, m, Provenance("graph", {"phi": phi}))


def split_pair(S: AlgebraSignature, A: AlgebraSignature, z: BlockMatrix) -> tuple[BlockMatrix, BlockMatrix]:
    """Components (x, y) of an element of A + B."""
    v = z.to_vector()
    B = AlgebraSignature(S.blocks[len(A.blocks):])
    return A.from_vector(v[:A.dim]), B.from_vector(v[A.dim:])


def join_pair(x: BlockMatrix, y: BlockMatrix) -> BlockMatrix:
    S = x.signature.direct_sum(y.signature)
    return S.from_vector(np.concatenate([x.to_vector(), y.to_vector()]))


def is_unitary(u: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> bool:
    one = u.signature.identity()
    return is_close(u @ adjoint(u), one, tol) and is_close(adjoint(u) @ u, one, tol)


def group_average(unitaries: Sequence[BlockMatrix], tol: Tolerance = DEFAULT_TOL) -> OperatorMap:
    """x -> (1/|G|) sum_g u_g x u_g*."""
    if not unitaries:
        raise MapConstructionError("empty unitary family")
    sig = unitaries[0].signature
    for j, u in enumerate(unitaries):
        if not is_unitary(u, tol):
            raise MapConstructionError(f"element {j} is not unitary")
    n = len(unitaries)

    def fn(x):
        out = sig.zero()
        for u in unitaries:
            out = out + u @ x @ adjoint(u)
        return out * (1.0 / n)

    return from_function(sig, fn, Provenance("average", {"unitaries": list(unitaries)}))


def closed_under_products(unitaries: Sequence[BlockMatrix], tol: Tolerance = DEFAULT_TOL) -> bool:
    """Whether {u_g} is closed under multiplication up to a global phase."""
    mats = [u.to_dense() for u in unitaries]

    def member(w):
        for v in mats:
            # w = c v with |c| = 1 iff |<v, w>| = N
            c = np.vdot(v, w) / np.vdot(v, v)
            if abs(abs(c) - 1) < 1e3 * tol.eq_tol and np.linalg.norm(w - c * v, 2) <= 1e3 * tol.eq_tol:
                return True
        return False

    return all(member(a @ b) for a in mats for b in mats)


def zero_diagonal_projection(n: int) -> OperatorMap:
    """x -> x - diag(x) on M_n: a norm-one projection that is not an expectation."""
    if n < 2:
        raise MapConstructionError("n must be at least 2")
    sig = AlgebraSignature([n])
    m = np.eye(n * n, dtype=complex)
    for k in range(n):
        m[k * n + k, k * n + k] = 0
    return OperatorMap(sig, m, Provenance("dense", {"name": "zero_diagonal", "n": n}))


def permutation_conjugation(sig: AlgebraSignature, perm: Sequence[int]) -> OperatorMap:
    """x -> P x P^T for a permutation of the N ambient rows that preserves the block structure."""
    N = sig.size
    P = np.zeros((N, N))
    P[np.arange(N), list(perm)] = 1
    B = sig.embed(np.eye(sig.dim))
    images = P @ B @ P.T
    if np.abs(images - sig.embed(sig.extract(images))).max() > 0:
        raise MapConstructionError("permutation does not preserve the block structure")
    return OperatorMap(sig, sig.extract(images).T, Provenance("permutation", {"perm": list(perm)}))


# ---------------------------------------------------------------------------
# idempotency and splitting


def matrix_norm_1(m: np.ndarray) -> float:
    """Max column-sum norm."""
    return float(np.linalg.norm(m, 1)) if m.size else 0.0


def idempotency_residual(E: OperatorMap) -> float:
    m = E.matrix
    return matrix_norm_1(m @ m - m)


def is_idempotent(E: OperatorMap, tol: Tolerance = DEFAULT_TOL) -> bool:
    return idempotency_residual(E) <= tol.eq_tol * (1 + matrix_norm_1(E.matrix))


def _pivot_columns(m: np.ndarray, rank: int) -> list[int]:
    if rank == 0:
        return []
    _, _, piv = scipy.linalg.qr(m, pivoting=True, mode="economic")
    return sorted(int(i) for i in piv[:rank])


def numerical_rank(m: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> int:
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol.rank_tol * s[0]))


@dataclass(frozen=True)
class Splitting:
    """A = S + M with S the fixed points and M the kernel of an idempotent map.

    Basis elements are images E(b_i) and b_i - E(b_i) of selected matrix units.
    """

    range_basis: tuple[BlockMatrix, ...]
    kernel_basis: tuple[BlockMatrix, ...]
    range_pivots: tuple[int, ...]
    kernel_pivots: tuple[int, ...]
    condition: float
    kernel_star_closed: bool

    @property
    def dims(self) -> tuple[int, int]:
        return len(self.range_basis), len(self.kernel_basis)

    def range_matrix(self) -> np.ndarray:
        return _stack(self.range_basis)

    def kernel_matrix(self) -> np.ndarray:
        return _stack(self.kernel_basis)


def _stack(elems) -> np.ndarray:
    if not elems:
        return np.zeros((0, 0), complex)
    return np.array([e.to_vector() for e in elems]).T


def in_span(basis: np.ndarray, vecs: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Relative least-squares residuals of the columns of ``vecs`` against ``basis``."""
    vecs = np.atleast_2d(np.asarray(vecs, complex))
    norms = np.maximum(np.linalg.norm(vecs, axis=0), 1.0)
    if basis.size == 0:
        return np.linalg.norm(vecs, axis=0) / norms
    coef, *_ = np.linalg.lstsq(basis, vecs, rcond=None)
    return np.linalg.norm(basis @ coef - vecs, axis=0) / norms


def split_along(E: OperatorMap, tol: Tolerance = DEFAULT_TOL) -> Splitting:
    if not E.is_endomorphism:
        raise SplitError("map is not an endomorphism")
    if not is_idempotent(E, tol):
        raise SplitError(f"map is not idempotent (residual {idempotency_residual(E):.3e})")
    sig = E.domain
    d = sig.dim
    m = E.matrix
    comp = np.eye(d) - m
    r = numerical_rank(m, tol)
    k = d - r
    rp = _pivot_columns(m, r)
    kp = _pivot_columns(comp, k)
    R = m[:, rp]
    K = comp[:, kp]
    both = np.hstack([R, K]) if d else np.zeros((0, 0))
    cond = float(np.linalg.cond(both)) if d else 1.0
    if not np.isfinite(cond) or cond * tol.rank_tol > 1e-2:
        raise SplitError(f"ill-conditioned range/kernel split (condition {cond:.3e})", cond)
    range_basis = tuple(sig.from_vector(c) for c in R.T)
    kernel_basis = tuple(sig.from_vector(c) for c in K.T)
    star = True
    if kernel_basis:
        adj = np.array([adjoint(y).to_vector() for y in kernel_basis]).T
        star = bool(np.all(in_span(K, adj, tol) <= tol.rank_tol))
    return Splitting(range_basis, kernel_basis, tuple(rp), tuple(kp), cond, star)


def range_is_subalgebra(E: OperatorMap, split: Splitting | None = None, tol: Tolerance = DEFAULT_TOL):
    """Check all products of range basis elements against the range span.

    Returns ``(ok, worst_residual, (i, j))`` where ``(i, j)`` indexes the worst pair.
    """
    split = split or split_along(E, tol)
    sig = E.domain
    R = split.range_matrix()
    if R.size == 0:
        return True, 0.0, None
    emb = sig.embed(R.T)
    prods = emb[:, None] @ emb[None, :]
    r = len(split.range_basis)
    vecs = sig.extract(prods).reshape(r * r, -1).T
    res = in_span(R, vecs, tol)
    worst = int(np.argmax(res))
    ok = bool(res[worst] < tol.rank_tol)
    return ok, float(res[worst]), divmod(worst, r)
