"""Expectations on function algebras over finite discrete spaces.

Functions on X = {x_0, ..., x_{n-1}} are elements of the algebra with
signature (1, ..., 1); the coordinate of a function is its value table.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Hashable, Sequence

import numpy as np

from .algebra import DEFAULT_TOL, AlgebraSignature, BlockMatrix, Tolerance
from .maps import OperatorMap, Provenance
from .verify import DEFAULT_SEED, Certificate, homomorphic_certificate


class RetractionError(ValueError):
    pass


class NotHomomorphic(RetractionError):
    def __init__(self, certificate: Certificate):
        gap = certificate.scalars.get("gap", float("nan"))
        super().__init__(f"expectation is not homomorphic (norm gap {gap:.6g})")
        self.certificate = certificate

    @property
    def gap(self) -> float:
        return self.certificate.scalars["gap"]

    @property
    def witness(self) -> BlockMatrix:
        return self.certificate.witness["x"]


class NonBinaryIdempotent(RetractionError):
    pass


class AmbiguousTarget(RetractionError):
    pass


@dataclass(frozen=True)
class FiniteSpace:
    points: tuple[Hashable, ...]
    basepoint: Hashable | None = None

    def __init__(self, points: Sequence[Hashable], basepoint: Hashable | None = None):
        pts = tuple(points)
        if len(pts) < 1:
            raise ValueError("a space needs at least one point")
        if len(set(pts)) != len(pts):
            raise ValueError("points must be distinct")
        if basepoint is not None and basepoint not in pts:
            raise ValueError("basepoint must be one of the points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "basepoint", basepoint)

    def __len__(self):
        return len(self.points)

    def index(self, p) -> int:
        return self.points.index(p)

    @property
    def signature(self) -> AlgebraSignature:
        return AlgebraSignature([1] * len(self.points))

    @property
    def finite_part(self) -> "FiniteSpace":
        """X when this space is X* = X + {omega}."""
        if self.basepoint is None:
            return self
        return FiniteSpace([p for p in self.points if p != self.basepoint])

    def compactify(self, omega: Hashable = "omega") -> "FiniteSpace":
        if omega in self.points:
            raise ValueError(f"{omega!r} already names a point")
        return FiniteSpace(self.points + (omega,), basepoint=omega)

    def function(self, values) -> BlockMatrix:
        return self.signature.from_vector(np.asarray(values, dtype=complex))

    def delta(self, p) -> BlockMatrix:
        v = np.zeros(len(self), complex)
        v[self.index(p)] = 1
        return self.function(v)

    def indicator(self, subset) -> BlockMatrix:
        v = np.zeros(len(self), complex)
        for p in subset:
            v[self.index(p)] = 1
        return self.function(v)


@dataclass(frozen=True)
class SpaceMap:
    """tau: domain -> codomain stored as a table of codomain indices."""

    domain: FiniteSpace
    codomain: FiniteSpace
    table: tuple[int, ...]

    def __post_init__(self):
        if len(self.table) != len(self.domain):
            raise ValueError("table must assign a value to every point")
        if any(not 0 <= t < len(self.codomain) for t in self.table):
            raise ValueError("table entry outside the codomain")

    @classmethod
    def from_dict(cls, space: FiniteSpace, mapping: dict) -> "SpaceMap":
        return cls(space, space, tuple(space.index(mapping[p]) for p in space.points))

    def __call__(self, p):
        return self.codomain.points[self.table[self.domain.index(p)]]

    def as_dict(self) -> dict:
        return {p: self(p) for p in self.domain.points}

    @property
    def is_retraction(self) -> bool:
        if self.domain != self.codomain:
            return False
        return all(self.table[t] == t for t in self.table)


def expectation_from_retraction(tau: SpaceMap) -> OperatorMap:
    """f -> f o tau.

    On a compactified space X* (basepoint omega with tau(omega) = omega) the
    map acts on functions over X, with f extended by 0 at omega.
    """
    if not tau.is_retraction:
        raise RetractionError("tau is not idempotent")
    X = tau.domain
    if X.basepoint is None:
        n = len(X)
        m = np.zeros((n, n))
        m[np.arange(n), list(tau.table)] = 1
        return OperatorMap(X.signature, m, Provenance("space", {"tau": tau}))
    w = X.index(X.basepoint)
    if tau.table[w] != w:
        raise RetractionError("tau must fix the basepoint")
    keep = [i for i in range(len(X)) if i != w]
    pos = {i: k for k, i in enumerate(keep)}
    m = np.zeros((len(keep), len(keep)))
    for r, i in enumerate(keep):
        t = tau.table[i]
        if t != w:
            m[r, pos[t]] = 1
    return OperatorMap(X.finite_part.signature, m, Provenance("space", {"tau": tau}))


def expectation_on_support(space: FiniteSpace, support: Sequence, tau: SpaceMap | None) -> OperatorMap:
    """E(f)(t) = f(tau(t)) on the support L, 0 elsewhere."""
    n = len(space)
    m = np.zeros((n, n))
    if tau is not None:
        for p in tau.domain.points:
            m[space.index(p), space.index(tau(p))] = 1
    return OperatorMap(space.signature, m, Provenance("space", {"support": list(support), "tau": tau}))


@dataclass(frozen=True)
class ExtractedRetraction:
    """Support L = {t : E(1)(t) = 1} and a retraction tau of L with E(f) = f o tau on L, 0 off L."""

    space: FiniteSpace
    support: tuple
    tau: SpaceMap | None
    certificate: Certificate

    def full_table(self) -> dict:
        return self.tau.as_dict() if self.tau is not None else {}


def _binary(v: np.ndarray, tol: Tolerance, what: str) -> np.ndarray:
    near1 = np.abs(v - 1) <= tol.eq_tol
    near0 = np.abs(v) <= tol.eq_tol
    if not np.all(near0 | near1):
        bad = int(np.argmax(~(near0 | near1)))
        raise NonBinaryIdempotent(f"{what} has entry {v[bad]!r} far from 0 and 1")
    return np.real(v) > 0.5


def extract_retraction(
    E: OperatorMap,
    space: FiniteSpace | None = None,
    tol: Tolerance = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
) -> ExtractedRetraction:
    """Recover (L, tau) from a homomorphic expectation on functions over a finite space."""
    sig = E.domain
    if not sig.is_commutative or not E.is_endomorphism:
        raise ValueError("extraction needs a map on functions over a finite space")
    space = space or FiniteSpace(range(sig.dim))
    if len(space) != sig.dim:
        raise ValueError("space size does not match the map")
    cert = homomorphic_certificate(E, tol, seed)
    if not cert.holds:
        raise NotHomomorphic(cert)
    M = E.matrix
    in_L = _binary(M.sum(axis=1), tol, "E(1)")
    targets = []
    for s in range(sig.dim):
        targets.append(_binary(M[:, s], tol, f"E(delta_{space.points[s]})"))
    T = np.array(targets).T  # T[t, s]: E(delta_s)(t) = 1
    support = tuple(p for p, ok in zip(space.points, in_L) if ok)
    if not support:
        if T.any():
            raise AmbiguousTarget("E(1) vanishes but some E(delta_s) does not")
        return ExtractedRetraction(space, (), None, cert)
    L = FiniteSpace(support)
    table = []
    for t, ok in enumerate(in_L):
        hits = np.flatnonzero(T[t])
        if not ok:
            if hits.size:
                raise AmbiguousTarget(f"point {space.points[t]!r} outside L has a target")
            continue
        if hits.size != 1:
            raise AmbiguousTarget(f"point {space.points[t]!r} has {hits.size} targets")
        target = space.points[int(hits[0])]
        if target not in support:
            raise AmbiguousTarget(f"target {target!r} of {space.points[t]!r} lies outside L")
        table.append(L.index(target))
    tau = SpaceMap(L, L, tuple(table))
    if not tau.is_retraction:
        raise RetractionError("extracted map is not idempotent")
    rebuilt = expectation_on_support(space, support, tau)
    err = float(np.abs(rebuilt.matrix - M).max())
    if err > tol.eq_tol:
        raise RetractionError(f"round trip mismatch {err:.3e}")
    return ExtractedRetraction(space, support, tau, cert)


def antipodal_average(size: int) -> OperatorMap:
    """E(f)(t) = (f(t) + f(t + m)) / 2 on Z / 2m."""
    if size < 2 or size % 2:
        raise ValueError("size must be even and at least 2")
    m = size // 2
    M = np.zeros((size, size))
    for t in range(size):
        M[t, t] += 0.5
        M[t, (t + m) % size] += 0.5
    return OperatorMap(AlgebraSignature([1] * size), M, Provenance("space", {"antipodal": size}))


@dataclass(frozen=True)
class UnitisedRetraction:
    compactified: FiniteSpace
    rho: SpaceMap
    unitised_map: OperatorMap
    extraction: ExtractedRetraction


def unitisation(E: OperatorMap) -> OperatorMap:
    """E#(g) on functions over X* = X + {omega}, omega last.

    Through g -> (g|_X - g(omega), g(omega)) and E#(h, a) = (E(h), a):
    E#(g)(x) = E(g|_X - g(omega))(x) + g(omega), E#(g)(omega) = g(omega).
    """
    n = E.domain.dim
    M = np.zeros((n + 1, n + 1), dtype=complex)
    M[:n, :n] = E.matrix
    # column of delta_omega: h = -1 on X, a = 1
    M[:n, n] = -E.matrix.sum(axis=1) + 1
    M[n, n] = 1
    return OperatorMap(AlgebraSignature([1] * (n + 1)), M, Provenance("dense", {"unitisation": True}))


def unitise_and_extract(
    E: OperatorMap,
    space: FiniteSpace | None = None,
    tol: Tolerance = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    omega: Hashable = "omega",
) -> UnitisedRetraction:
    """Retraction rho of X* with rho(omega) = omega and E = E_{rho,*}."""
    space = space or FiniteSpace(range(E.domain.dim))
    Xs = space.compactify(omega)
    Es = unitisation(E)
    ext = extract_retraction(Es, Xs, tol, seed)
    table = []
    for p in Xs.points:
        table.append(Xs.index(ext.tau(p)) if p in ext.support else Xs.index(omega))
    rho = SpaceMap(Xs, Xs, tuple(table))
    if rho(omega) != omega:
        raise RetractionError("rho does not fix the point at infinity")
    if not rho.is_retraction:
        raise RetractionError("rho is not idempotent")
    back = expectation_from_retraction(rho)
    err = float(np.abs(back.matrix - E.matrix).max())
    if err > tol.eq_tol:
        raise RetractionError(f"E_(rho,*) differs from E by {err:.3e}")
    return UnitisedRetraction(Xs, rho, Es, ext)


def all_retractions(n: int):
    """Every idempotent self-map of {0, ..., n-1}, as tables."""
    for table in product(range(n), repeat=n):
        if all(table[t] == t for t in table):
            yield table


def random_retraction(rng: np.random.Generator, n: int) -> tuple[int, ...]:
    """Random idempotent table: pick a nonempty fixed set, send the rest into it."""
    k = int(rng.integers(1, n + 1))
    fixed = np.sort(rng.choice(n, size=k, replace=False))
    table = [int(rng.choice(fixed)) for _ in range(n)]
    for f in fixed:
        table[f] = int(f)
    return tuple(table)
