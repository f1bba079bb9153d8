"""Seeded generation of test instances.

Expected verdicts are attached only where the construction decides them
(central projections, retractions, graphs of *-homomorphisms, antipodal
averages, corners by rank pattern); everything else is left to the checkers.
"""
from __future__ import annotations

from itertools import product
from typing import Sequence

import numpy as np

from .algebra import AlgebraSignature, BlockMatrix, Tolerance, unitary_from
from .gelfand import FiniteSpace, SpaceMap, random_retraction
from .instances import Instance
from .maps import OperatorMap, Provenance, central_projection_expectation, from_function

GENERATOR_KINDS = ("pinching", "average", "central", "corner", "graph", "retraction", "antipodal",
                   "dense-perturbed")

CORPUS_SIGNATURES = (
    (1,), (2,), (1, 1), (3,), (2, 1), (2, 2), (3, 1), (2, 3), (1, 1, 1, 1), (4, 3, 2, 1, 1),
)

PERTURBATION = 1e-3


class GeneratorError(ValueError):
    pass


def _frame_projection(U: np.ndarray, mask: Sequence[bool]) -> np.ndarray:
    d = np.diag(np.asarray(mask, float))
    return U @ d @ U.conj().T


def _hermitize(blocks):
    return [(b + b.conj().T) / 2 for b in blocks]


def random_pinching_family(rng: np.random.Generator, sig: AlgebraSignature, parts: int | None = None):
    """Orthogonal projections summing to 1: each block is split among ``parts`` labels in a random frame."""
    parts = parts or int(rng.integers(2, max(sig.blocks) + 2))
    labels = [rng.integers(0, parts, size=n) for n in sig.blocks]
    frames = [unitary_from(rng, n) for n in sig.blocks]
    fam = []
    for j in range(parts):
        blocks = [_frame_projection(U, lab == j) for U, lab in zip(frames, labels)]
        if any(np.abs(b).max() > 0 for b in blocks):
            fam.append(BlockMatrix(sig, _hermitize(blocks)))
    central = all(len(set(lab.tolist())) == 1 for lab in labels)
    return fam, central


def random_cyclic_unitaries(rng: np.random.Generator, sig: AlgebraSignature, order: int | None = None):
    """u_g = U diag(w^(g c_k)) U* for g = 0..q-1: a cyclic group of unitaries."""
    q = order or int(rng.integers(2, 5))
    w = np.exp(2j * np.pi / q)
    frames = [unitary_from(rng, n) for n in sig.blocks]
    charges = [rng.integers(0, q, size=n) for n in sig.blocks]
    out = []
    for g in range(q):
        blocks = [U @ np.diag(w ** (g * c)) @ U.conj().T for U, c in zip(frames, charges)]
        out.append(BlockMatrix(sig, blocks))
    return out


def random_projection(rng: np.random.Generator, sig: AlgebraSignature, ranks: Sequence[int] | None = None):
    ranks = ranks if ranks is not None else [int(rng.integers(0, n + 1)) for n in sig.blocks]
    blocks = []
    for n, r in zip(sig.blocks, ranks):
        U = unitary_from(rng, n)
        blocks.append(_frame_projection(U, [k < r for k in range(n)]))
    return BlockMatrix(sig, _hermitize(blocks)), list(ranks)


def random_central_projection(rng: np.random.Generator, sig: AlgebraSignature):
    on = rng.integers(0, 2, size=len(sig.blocks))
    return BlockMatrix(sig, [np.eye(n) * f for n, f in zip(sig.blocks, on)])


def embedding_homomorphism(
    A: AlgebraSignature,
    B: AlgebraSignature,
    multiplicities: Sequence[Sequence[int]],
    unitaries: Sequence[np.ndarray] | None = None,
) -> OperatorMap:
    """*-homomorphism A -> B placing multiplicities[k][b] copies of block b of A in block k of B."""
    if unitaries is None:
        unitaries = [np.eye(n) for n in B.blocks]
    for k, (nk, mult) in enumerate(zip(B.blocks, multiplicities)):
        if sum(m * n for m, n in zip(mult, A.blocks)) > nk:
            raise GeneratorError(f"block {k} of the codomain is too small")

    def fn(x):
        out = []
        for nk, mult, U in zip(B.blocks, multiplicities, unitaries):
            pieces = [xb for xb, m in zip(x.blocks, mult) for _ in range(m)]
            used = sum(p.shape[0] for p in pieces)
            if used < nk:
                pieces.append(np.zeros((nk - used, nk - used)))
            D = _block_diag(pieces) if pieces else np.zeros((nk, nk))
            out.append(U @ D @ U.conj().T)
        return BlockMatrix(B, out)

    return from_function(A, fn, Provenance("dense", {"embedding": [list(m) for m in multiplicities]}), B)


def _block_diag(pieces):
    n = sum(p.shape[0] for p in pieces)
    out = np.zeros((n, n), complex)
    i = 0
    for p in pieces:
        k = p.shape[0]
        out[i:i + k, i:i + k] = p
        i += k
    return out


def _name(kind, idx):
    return f"{kind}-{idx:03d}"


def _parse_sig(signature) -> AlgebraSignature:
    if signature is None:
        return None
    if isinstance(signature, AlgebraSignature):
        return signature
    try:
        return AlgebraSignature(signature)
    except (TypeError, ValueError) as exc:
        raise GeneratorError(str(exc)) from exc


def multiplicative_on_basis(E: OperatorMap, tol: Tolerance | None = None) -> bool:
    """Brute-force E(e_i e_j) == E(e_i) E(e_j) over all pairs of matrix units; used for annotations."""
    tol = tol or Tolerance()
    basis = E.domain.basis()
    images = [E(b) for b in basis]
    for b, Eb in zip(basis, images):
        for c, Ec in zip(basis, images):
            if np.abs((E(b @ c) - Eb @ Ec).to_vector()).max() > tol.eq_tol:
                return False
    return True


def generate(
    kind: str,
    count: int = 1,
    seed: int = 0,
    size: int | None = None,
    signature: Sequence[int] | AlgebraSignature | None = None,
    tolerance: Tolerance | None = None,
) -> list[Instance]:
    """``count`` reproducible instances of one kind."""
    if kind not in GENERATOR_KINDS:
        raise GeneratorError(f"unknown kind {kind!r}; choose from {GENERATOR_KINDS}")
    if count < 1:
        raise GeneratorError("count must be positive")
    tol = tolerance or Tolerance()
    rng = np.random.default_rng(seed)
    sig = _parse_sig(signature)
    out: list[Instance] = []

    if kind in ("retraction", "antipodal"):
        n = size if size is not None else (5 if kind == "retraction" else 4)
        if n < 1 or (kind == "antipodal" and (n < 2 or n % 2)):
            raise GeneratorError(f"invalid size {n} for {kind}")
        X = FiniteSpace(range(n))
        if kind == "antipodal":
            return [Instance(_name(kind, i), kind, {}, space=X, tolerance=tol, seed=seed,
                             expect={"expectation": True, "homomorphic": False}) for i in range(count)]
        for i in range(count):
            tau = SpaceMap(X, X, random_retraction(rng, n))
            out.append(Instance(_name(kind, i), kind, {"tau": tau}, space=X, tolerance=tol, seed=seed,
                                expect={"expectation": True, "homomorphic": True, "retraction": True}))
        return out

    if size is not None and sig is None:
        if size < 1:
            raise GeneratorError("size must be positive")
        sig = AlgebraSignature([size])
    sig = sig or AlgebraSignature([2, 1])

    if kind == "corner":
        # every rank pattern, count frames each
        idx = 0
        for ranks in product(*[range(n + 1) for n in sig.blocks]):
            for _ in range(count):
                e, _r = random_projection(rng, sig, ranks)
                trivial = all(r in (0, n) for r, n in zip(ranks, sig.blocks))
                out.append(Instance(_name(kind, idx), kind, {"e": e}, signature=sig, tolerance=tol, seed=seed,
                                    expect={"expectation": True, "homomorphic": trivial, "central": trivial}))
                idx += 1
        return out

    for i in range(count):
        name = _name(kind, i)
        if kind == "pinching":
            fam, _ = random_pinching_family(rng, sig)
            inst = Instance(name, kind, {"projections": fam}, signature=sig, tolerance=tol, seed=seed)
            inst.expect = {"expectation": True, "homomorphic": multiplicative_on_basis(inst.build(), tol)}
            out.append(inst)
        elif kind == "average":
            us = random_cyclic_unitaries(rng, sig)
            inst = Instance(name, kind, {"unitaries": us}, signature=sig, tolerance=tol, seed=seed)
            inst.expect = {"expectation": True, "homomorphic": multiplicative_on_basis(inst.build(), tol)}
            out.append(inst)
        elif kind == "central":
            p = random_central_projection(rng, sig)
            out.append(Instance(name, kind, {"p": p}, signature=sig, tolerance=tol, seed=seed,
                                expect={"expectation": True, "homomorphic": True, "central": True}))
        elif kind == "graph":
            phi = random_embedding(rng, sig)
            S = phi.domain.direct_sum(phi.codomain)
            out.append(Instance(name, kind, {"phi": phi}, signature=S, tolerance=tol, seed=seed,
                                expect={"expectation": True, "homomorphic": True}))
        elif kind == "dense-perturbed":
            p = random_central_projection(rng, sig)
            E = central_projection_expectation(p, tol)
            noise = rng.standard_normal(E.matrix.shape) + 1j * rng.standard_normal(E.matrix.shape)
            m = E.matrix + PERTURBATION * noise / np.abs(noise).max()
            out.append(Instance(name, "dense", {"matrix": m}, signature=sig, tolerance=tol, seed=seed,
                                expect={"expectation": False}))
    return out


def random_embedding(rng: np.random.Generator, A: AlgebraSignature) -> OperatorMap:
    """Random *-homomorphism from A into a codomain built around it."""
    mult = []
    blocks = []
    for _ in range(int(rng.integers(1, 3))):
        m = [int(v) for v in rng.integers(0, 2, size=len(A.blocks))]
        pad = int(rng.integers(0, 2))
        n = sum(k * b for k, b in zip(m, A.blocks)) + pad
        if n == 0:
            n, pad = 1, 1
        mult.append(m)
        blocks.append(n)
    B = AlgebraSignature(blocks)
    us = [unitary_from(rng, n) for n in B.blocks]
    return embedding_homomorphism(A, B, mult, us)


def default_corpus(seed: int = 42) -> list[Instance]:
    """The standing corpus: every kind over the reference signatures."""
    rng = np.random.default_rng(seed)
    sub = lambda: int(rng.integers(0, 2**31 - 1))  # noqa: E731
    out: list[Instance] = []
    for sig in CORPUS_SIGNATURES:
        tag = "x".join(map(str, sig))
        for kind in ("pinching", "average", "central"):
            for inst in generate(kind, 1, sub(), signature=sig):
                inst.name = f"{kind}-{tag}"
                out.append(inst)
        if sum(sig) <= 6:
            inst = generate("graph", 1, sub(), signature=sig)[0]
            inst.name = f"graph-{tag}"
            out.append(inst)
        e, ranks = random_projection(rng, AlgebraSignature(sig))
        trivial = all(r in (0, n) for r, n in zip(ranks, sig))
        inst = Instance(f"corner-{tag}", "corner", {"e": e}, signature=AlgebraSignature(sig), seed=seed,
                        expect={"expectation": True, "homomorphic": trivial, "central": trivial})
        out.append(inst)
    for inst in generate("corner", 1, sub(), signature=(2, 3)):
        inst.name = "corner-2x3-" + inst.name.split("-")[1]
        out.append(inst)
    for n in (1, 2, 3, 5, 8):
        for j, inst in enumerate(generate("retraction", 2, sub(), size=n)):
            inst.name = f"retraction-{n}-{j}"
            out.append(inst)
    for n in (2, 4, 6):
        inst = generate("antipodal", 1, sub(), size=n)[0]
        inst.name = f"antipodal-{n}"
        out.append(inst)
    out.append(Instance("zero-diagonal-2", "zero_diagonal", {"n": 2}, signature=AlgebraSignature([2]), seed=seed,
                        expect={"expectation": False, "triple": False}))
    for j, inst in enumerate(generate("dense-perturbed", 2, sub(), signature=(2, 1))):
        inst.name = f"perturbed-{j}"
        out.append(inst)
    for inst in out:
        inst.seed = seed
    return out


def search_jordan_not_homomorphic(instances, tol: Tolerance | None = None) -> dict:
    """Scan instances for an expectation that is Jordan but not associative homomorphic.

    Returns the names scanned and any hits; an empty ``hits`` list records
    absence on this corpus rather than assuming it.
    """
    from .jordan import jordan_homomorphism_certificate_cstar
    from .verify import homomorphic_certificate, verify_expectation

    scanned, hits = [], []
    for inst in instances:
        t = tol or inst.tolerance
        E = inst.build()
        if not verify_expectation(E, t, inst.seed).holds:
            continue
        scanned.append(inst.name)
        hom = homomorphic_certificate(E, t, inst.seed, check_hypothesis=False)
        jor = jordan_homomorphism_certificate_cstar(E, t, inst.seed, check_hypothesis=False)
        if jor.holds and not hom.holds:
            hits.append(inst.name)
    return {"scanned": scanned, "hits": hits}
