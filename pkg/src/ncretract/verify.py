"""Certificates for conditional expectations and homomorphic expectations.

The universally quantified norm identity ||E(x)||^2 = ||E(x*x)|| is decided by
a finite Gram tensor over a kernel basis; witnesses for failures are built by
polarization and can always be re-evaluated with :func:`norm_gap`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .algebra import (
    DEFAULT_TOL,
    AlgebraSignature,
    BlockMatrix,
    Tolerance,
    adjoint,
    blocks_are_scalar,
    center_membership,
    is_projection,
    min_eigenvalue,
    operator_norm,
    rank_of,
)
from .maps import (
    OperatorMap,
    Splitting,
    _pivot_columns,
    corner_compression,
    idempotency_residual,
    in_span,
    matrix_norm_1,
    numerical_rank,
    split_along,
)

DEFAULT_SEED = 20170602
CONTRACTIVITY_SAMPLES = 100

HOLDS = "Holds"
FAILS = "Fails"


class HypothesisViolation(ValueError):
    """A certificate was requested for a map that violates its hypotheses."""

    def __init__(self, message: str, certificate: "Certificate | None" = None):
        super().__init__(message)
        self.certificate = certificate


class CertificateInconsistency(AssertionError):
    """Independent deciders disagree; indicates a numerical breakdown or a bug."""


class KadisonSchwarzViolation(ArithmeticError):
    pass


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float
    threshold: float
    note: str = ""


@dataclass(frozen=True)
class Certificate:
    """Verdict on a named property with per-check residuals and an optional witness."""

    property: str
    verdict: str
    tolerance: Tolerance
    checks: tuple[Check, ...] = ()
    reason: str | None = None
    witness: dict[str, Any] = field(default_factory=dict)
    scalars: dict[str, float] = field(default_factory=dict)
    seed: int | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __bool__(self):
        return self.holds


# ---------------------------------------------------------------------------
# batched helpers


def basis_images(E: OperatorMap) -> np.ndarray:
    """Rows are coordinates of E(b_i)."""
    return E.matrix.T


def batch_norms(sig: AlgebraSignature, vecs: np.ndarray) -> np.ndarray:
    """Operator norms of coordinate rows of shape (..., d)."""
    vecs = np.asarray(vecs)
    if vecs.size == 0:
        return np.zeros(vecs.shape[:-1])
    return np.linalg.norm(sig.embed(vecs), ord=2, axis=(-2, -1))


def pair_products(sig: AlgebraSignature, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Coordinates of left[i] * right[j], shape (len(left), len(right), d)."""
    L = sig.embed(left)
    R = sig.embed(right)
    return sig.extract(L[:, None] @ R[None, :])


def _relative(diff: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return diff / np.maximum(scale, 1.0)


def _worst(res: np.ndarray):
    idx = np.unravel_index(int(np.argmax(res)), res.shape)
    return tuple(int(i) for i in idx), float(res[idx])


def _sample_unit_elements(sig: AlgebraSignature, seed: int, count: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    basis = np.eye(sig.dim, dtype=complex)
    return np.vstack([basis, sig.random_batch(rng, count)])


# ---------------------------------------------------------------------------
# conditional expectation axioms


def _module_residuals(E: OperatorMap, left: bool) -> np.ndarray:
    sig = E.domain
    Eb = basis_images(E)
    B = np.eye(sig.dim, dtype=complex)
    inner = pair_products(sig, Eb, B) if left else pair_products(sig, B, Eb)
    lhs = E.apply_batch(inner)
    rhs = pair_products(sig, Eb, Eb)
    diff = batch_norms(sig, lhs - rhs)
    scale = np.maximum(batch_norms(sig, lhs), batch_norms(sig, rhs))
    return _relative(diff, scale)


def choi_basis_matrix(E: OperatorMap) -> np.ndarray:
    """The (dN x dN) block matrix [E(b_i* b_j)]_{ij}."""
    sig = E.domain
    N = sig.size
    B = sig.embed(np.eye(sig.dim))
    prods = sig.extract(np.conj(np.swapaxes(B, -1, -2))[:, None] @ B[None, :])
    imgs = sig.embed(E.apply_batch(prods))  # (d, d, N, N)
    d = sig.dim
    return imgs.transpose(0, 2, 1, 3).reshape(d * N, d * N)


def cp_check(E: OperatorMap, tol: Tolerance = DEFAULT_TOL) -> tuple[Check, dict]:
    C = choi_basis_matrix(E)
    herm = float(np.abs(C - C.conj().T).max()) if C.size else 0.0
    H = (C + C.conj().T) / 2
    w, v = np.linalg.eigh(H)
    scale = max(1.0, float(np.abs(w).max()))
    lam = float(w[0])
    ok = lam >= -tol.psd_tol * scale and herm <= tol.eq_tol * scale
    check = Check("completely_positive", bool(ok), max(-lam, herm) / scale, tol.psd_tol,
                  f"min eigenvalue {lam:.3e}")
    return check, {"choi_vector": v[:, 0], "choi_min_eigenvalue": lam}


def column_space_basis(E: OperatorMap, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    r = numerical_rank(E.matrix, tol)
    return E.matrix[:, _pivot_columns(E.matrix, r)]


def range_products(E: OperatorMap, tol: Tolerance = DEFAULT_TOL):
    """Residuals of range-basis products against the range; returns (R, residuals)."""
    sig = E.domain
    R = column_space_basis(E, tol)
    if R.size == 0:
        return R, np.zeros((0, 0))
    prods = pair_products(sig, R.T, R.T)
    r = R.shape[1]
    res = in_span(R, prods.reshape(r * r, -1).T, tol).reshape(r, r)
    return R, res


def verify_expectation(
    E: OperatorMap,
    tol: Tolerance = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    samples: int = CONTRACTIVITY_SAMPLES,
) -> Certificate:
    """Check the conditional-expectation axioms on the matrix-unit basis.

    All sub-checks are always evaluated.  The reported reason is the first
    failure in check order, except that a sampled-contractive idempotent whose
    range is not a subalgebra is reported as ``RangeNotSubalgebra`` (for a
    norm-one projection that is the deciding defect).
    """
    sig = E.domain
    checks, witnesses, reasons = [], {}, {}

    # idempotency
    res = idempotency_residual(E)
    thr = tol.eq_tol * (1 + matrix_norm_1(E.matrix))
    checks.append(Check("idempotent", res <= thr, res, thr))
    reasons["idempotent"] = "NotIdempotent"
    witnesses["idempotent"] = {}
    if res > thr:
        diff = E.matrix @ E.matrix - E.matrix
        j = int(np.argmax(np.abs(diff).sum(axis=0)))
        witnesses["idempotent"] = {"x": sig.from_vector(np.eye(sig.dim)[j])}

    basis = np.eye(sig.dim, dtype=complex)
    for name, left in (("left_module", True), ("right_module", False)):
        r = _module_residuals(E, left)
        (i, j), worst = _worst(r)
        checks.append(Check(name, worst <= tol.eq_tol, worst, tol.eq_tol))
        reasons[name] = "NotLeftModule" if left else "NotRightModule"
        witnesses[name] = {"x": sig.from_vector(basis[i]), "y": sig.from_vector(basis[j])}

    cp, info = cp_check(E, tol)
    checks.append(cp)
    reasons["completely_positive"] = "NotCompletelyPositive"
    witnesses["completely_positive"] = {"choi_vector": info["choi_vector"]}

    R, rr = range_products(E, tol)
    if rr.size:
        (i, j), worst = _worst(rr)
        witnesses["range_subalgebra"] = {"x": sig.from_vector(R[:, i]), "y": sig.from_vector(R[:, j])}
    else:
        worst = 0.0
        witnesses["range_subalgebra"] = {}
    checks.append(Check("range_subalgebra", worst < tol.rank_tol, worst, tol.rank_tol))
    reasons["range_subalgebra"] = "RangeNotSubalgebra"

    xs = _sample_unit_elements(sig, seed, samples)
    ratios = batch_norms(sig, E.apply_batch(xs)) / batch_norms(sig, xs)
    k = int(np.argmax(ratios))
    worst = float(ratios[k])
    checks.append(Check("contractive", worst <= 1 + tol.eq_tol, worst - 1, tol.eq_tol,
                        f"{len(xs)} samples"))
    reasons["contractive"] = "NotContractive"
    witnesses["contractive"] = {"x": sig.from_vector(xs[k])}

    failed = [c.name for c in checks if not c.passed]
    if not failed:
        return Certificate("conditional_expectation", HOLDS, tol, tuple(checks), seed=seed,
                           scalars={"max_norm_ratio": worst})
    status = {c.name: c.passed for c in checks}
    first = failed[0]
    if status["idempotent"] and status["contractive"] and not status["range_subalgebra"]:
        first = "range_subalgebra"
    return Certificate(
        "conditional_expectation", FAILS, tol, tuple(checks), reason=reasons[first],
        witness=witnesses[first], seed=seed,
        scalars={"residual": next(c.residual for c in checks if c.name == first)},
        extra={"failed_checks": failed},
    )


def _require_expectation(E: OperatorMap, tol: Tolerance, seed: int):
    cert = verify_expectation(E, tol, seed)
    if not cert.holds:
        raise HypothesisViolation(f"not a conditional expectation ({cert.reason})", cert)
    return cert


# ---------------------------------------------------------------------------
# Kadison-Schwarz and the norm gap


def ks_defect(E: OperatorMap, x: BlockMatrix, tol: Tolerance = DEFAULT_TOL, check: bool = True) -> BlockMatrix:
    """E(x*x) - E(x)*E(x); positive for every conditional expectation."""
    Ex = E(x)
    defect = E(adjoint(x) @ x) - adjoint(Ex) @ Ex
    if check:
        scale = max(1.0, operator_norm(x) ** 2)
        herm = operator_norm(defect - adjoint(defect))
        lam = min_eigenvalue(defect)
        if lam < -tol.psd_tol * scale or herm > tol.eq_tol * scale:
            raise KadisonSchwarzViolation(
                f"Schwarz defect not positive: min eigenvalue {lam:.3e}, hermiticity {herm:.3e}"
            )
    return defect


def norm_gap(E: OperatorMap, x: BlockMatrix, tol: Tolerance = DEFAULT_TOL, check: bool = True) -> float:
    """||E(x*x)|| - ||E(x)||^2; nonnegative for every conditional expectation."""
    gap = operator_norm(E(adjoint(x) @ x)) - operator_norm(E(x)) ** 2
    if check and gap < -tol.eq_tol * max(1.0, operator_norm(x) ** 2):
        raise KadisonSchwarzViolation(f"negative norm gap {gap:.3e}")
    return gap


def ks_batch(E: OperatorMap, xs: np.ndarray):
    """Vectorized Schwarz defects for coordinate rows.

    Returns (min eigenvalue of each defect, hermiticity residual, norm gap, ||x||^2).
    """
    sig = E.domain
    X = sig.embed(xs)
    Xh = np.conj(np.swapaxes(X, -1, -2))
    XX = sig.extract(Xh @ X)
    Ex = sig.embed(E.apply_batch(xs))
    Exx = sig.embed(E.apply_batch(XX))
    D = Exx - np.conj(np.swapaxes(Ex, -1, -2)) @ Ex
    herm = np.abs(D - np.conj(np.swapaxes(D, -1, -2))).max(axis=(-2, -1))
    lam = np.linalg.eigvalsh((D + np.conj(np.swapaxes(D, -1, -2))) / 2)[:, 0]
    gap = np.linalg.norm(Exx, ord=2, axis=(-2, -1)) - np.linalg.norm(Ex, ord=2, axis=(-2, -1)) ** 2
    sq = np.linalg.norm(X, ord=2, axis=(-2, -1)) ** 2
    return lam, herm, gap, sq


# ---------------------------------------------------------------------------
# Gram certificate for homomorphic expectations


@dataclass(frozen=True)
class GramTensor:
    """G[j, k] = E(y_j* y_k) over a kernel basis, stored as coordinates."""

    kernel_basis: tuple[BlockMatrix, ...]
    entries: np.ndarray  # (m, m, d)
    norms: np.ndarray  # (m, m)
    scales: np.ndarray  # (m, m), max(1, ||y_j|| ||y_k||)

    @property
    def size(self) -> int:
        return len(self.kernel_basis)

    def entry(self, j: int, k: int) -> BlockMatrix:
        return self.kernel_basis[0].signature.from_vector(self.entries[j, k])

    def max_entry(self) -> float:
        return float(self.norms.max()) if self.norms.size else 0.0

    def relative(self) -> np.ndarray:
        return self.norms / self.scales

    def is_zero(self, tol: Tolerance = DEFAULT_TOL) -> bool:
        return bool(np.all(self.relative() <= tol.eq_tol)) if self.norms.size else True


def gram_tensor(E: OperatorMap, split: Splitting) -> GramTensor:
    sig = E.domain
    Y = split.kernel_matrix().T if split.kernel_basis else np.zeros((0, sig.dim), complex)
    if len(Y) == 0:
        z = np.zeros((0, 0))
        return GramTensor((), np.zeros((0, 0, sig.dim), complex), z, z)
    Yh = np.array([adjoint(y).to_vector() for y in split.kernel_basis])
    entries = E.apply_batch(pair_products(sig, Yh, Y))
    norms = batch_norms(sig, entries)
    yn = batch_norms(sig, Y)
    return GramTensor(split.kernel_basis, entries, norms, np.maximum(1.0, np.outer(yn, yn)))


def basis_multiplicativity(E: OperatorMap) -> np.ndarray:
    """Relative residuals ||E(b_i b_j) - E(b_i)E(b_j)|| over all basis pairs."""
    sig = E.domain
    B = np.eye(sig.dim, dtype=complex)
    Eb = basis_images(E)
    lhs = E.apply_batch(pair_products(sig, B, B))
    rhs = pair_products(sig, Eb, Eb)
    return _relative(batch_norms(sig, lhs - rhs),
                     np.maximum(batch_norms(sig, lhs), batch_norms(sig, rhs)))


def kernel_ideal_residuals(E: OperatorMap, split: Splitting, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Least-squares residuals of y b_i and b_i y against the kernel span."""
    sig = E.domain
    if not split.kernel_basis:
        return np.zeros(0)
    K = split.kernel_matrix()
    Y = K.T
    B = np.eye(sig.dim, dtype=complex)
    prods = np.concatenate([pair_products(sig, Y, B).reshape(-1, sig.dim),
                            pair_products(sig, B, Y).reshape(-1, sig.dim)])
    vecs = prods.T
    return in_span(K, vecs, tol)


def witness_norm_gap(E: OperatorMap, gram: GramTensor, tol: Tolerance = DEFAULT_TOL) -> tuple[BlockMatrix, float]:
    """Kernel element x with ||E(x)|| ~ 0 and ||E(x*x)|| >= max ||G_jk|| / 2."""
    if gram.is_zero(tol):
        raise ValueError("Gram tensor vanishes; there is no norm-gap witness")
    g = gram.max_entry()
    diag = np.diag(gram.norms)
    j = int(np.argmax(diag))
    if diag[j] >= g / 2:
        x = gram.kernel_basis[j]
    else:
        (j, k), _ = _worst(gram.norms)
        best = None
        for theta in (1, 1j, -1, -1j):
            cand = gram.kernel_basis[k] + theta * gram.kernel_basis[j]
            val = operator_norm(E(adjoint(cand) @ cand))
            if best is None or val > best[0] + 1e-15:
                best = (val, cand)
        x = best[1]
    return x, norm_gap(E, x, tol, check=False)


def homomorphic_certificate(
    E: OperatorMap,
    tol: Tolerance = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    check_hypothesis: bool = True,
) -> Certificate:
    """Decide whether E(xy) = E(x)E(y) via the kernel Gram tensor.

    Basis multiplicativity and the kernel-ideal property are computed
    independently and must agree with the Gram verdict.
    """
    if check_hypothesis:
        _require_expectation(E, tol, seed)
    split = split_along(E, tol)
    gram = gram_tensor(E, split)
    rel = gram.relative()
    g_worst = float(rel.max()) if rel.size else 0.0
    mult = basis_multiplicativity(E)
    m_worst = float(mult.max()) if mult.size else 0.0
    ideal = kernel_ideal_residuals(E, split, tol)
    i_worst = float(ideal.max()) if ideal.size else 0.0
    checks = (
        Check("gram_zero", g_worst <= tol.eq_tol, g_worst, tol.eq_tol, f"kernel dim {gram.size}"),
        Check("basis_multiplicative", m_worst <= tol.eq_tol, m_worst, tol.eq_tol),
        Check("kernel_ideal", i_worst <= tol.eq_tol, i_worst, tol.eq_tol),
    )
    extra = {"dims": split.dims, "kernel_star_closed": split.kernel_star_closed}
    agree = len({c.passed for c in checks}) == 1
    if gram.is_zero(tol):
        if not agree:
            raise CertificateInconsistency(
                f"Gram tensor vanishes but cross-checks disagree: {[(c.name, c.residual) for c in checks]}"
            )
        return Certificate("homomorphic", HOLDS, tol, checks, seed=seed,
                           scalars={"gram_max": gram.max_entry()}, extra=extra)
    x, gap = witness_norm_gap(E, gram, tol)
    extra["deciders_agree"] = agree
    return Certificate(
        "homomorphic", FAILS, tol, checks, reason="NormGap",
        witness={"x": x},
        scalars={
            "gap": gap,
            "gram_max": gram.max_entry(),
            "norm_E_xx": operator_norm(E(adjoint(x) @ x)),
            "norm_E_x": operator_norm(E(x)),
        },
        seed=seed, extra=extra,
    )


def multiplicative_domain_member(E: OperatorMap, a: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> bool:
    """Equality on both sides of the Schwarz inequality."""
    Ea = E(a)
    scale = max(1.0, operator_norm(a) ** 2)
    left = operator_norm(E(adjoint(a) @ a) - adjoint(Ea) @ Ea)
    right = operator_norm(E(a @ adjoint(a)) - Ea @ adjoint(Ea))
    return left <= tol.eq_tol * scale and right <= tol.eq_tol * scale


# ---------------------------------------------------------------------------
# projections: comparability and centrality


@dataclass(frozen=True)
class Subequivalence:
    """Outcome of e <~ f; when it holds, u u* = e and u* u <= f."""

    holds: bool
    ranks: tuple[tuple[int, int], ...]
    u: BlockMatrix | None = None
    residual_uu: float = float("nan")
    residual_le: float = float("nan")

    def __bool__(self):
        return self.holds


def _frame(block: np.ndarray, rank: int) -> np.ndarray:
    """Orthonormal columns spanning the range of a projection block."""
    if rank == 0:
        return np.zeros((block.shape[0], 0), complex)
    w, v = np.linalg.eigh((block + block.conj().T) / 2)
    return v[:, ::-1][:, :rank]


def subequivalence(e: BlockMatrix, f: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> Subequivalence:
    for name, p in (("e", e), ("f", f)):
        if not is_projection(p, tol):
            raise ValueError(f"{name} is not a projection")
    re_, rf = _ranks(e, tol), _ranks(f, tol)
    ranks = tuple(zip(re_, rf))
    if any(a > b for a, b in ranks):
        return Subequivalence(False, ranks)
    blocks = []
    for eb, fb, a in zip(e.blocks, f.blocks, re_):
        V, W = _frame(eb, a), _frame(fb, a)
        blocks.append(V @ W.conj().T)
    u = BlockMatrix(e.signature, blocks)
    res_uu = operator_norm(u @ adjoint(u) - e)
    h = adjoint(u) @ u
    # h <= f for projections h, f iff f h = h
    res_le = operator_norm(f @ h - h)
    if max(res_uu, res_le) > tol.psd_tol:
        raise CertificateInconsistency(f"partial isometry residuals {res_uu:.3e}, {res_le:.3e}")
    return Subequivalence(True, ranks, u, res_uu, res_le)


def _ranks(p: BlockMatrix, tol: Tolerance) -> list[int]:
    # projections have singular values in {0, 1}; an absolute cut avoids the 0-projection edge
    return [int(np.sum(np.linalg.svd(b, compute_uv=False) > 0.5)) for b in p.blocks]


@dataclass(frozen=True)
class ComparabilitySplit:
    z: BlockMatrix
    lower: Subequivalence  # z e <~ z (1 - e)
    upper: Subequivalence  # (1 - z)(1 - e) <~ (1 - z) e


def comparability_split(e: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> ComparabilitySplit:
    """Central z with z e <~ z(1-e) and (1-z)(1-e) <~ (1-z)e."""
    if not is_projection(e, tol):
        raise ValueError("e is not a projection")
    sig = e.signature
    ranks = _ranks(e, tol)
    z = BlockMatrix(sig, [np.eye(n) if r <= n - r else np.zeros((n, n))
                          for n, r in zip(sig.blocks, ranks)])
    one = sig.identity()
    lower = subequivalence(z @ e, z @ (one - e), tol)
    upper = subequivalence((one - z) @ (one - e), (one - z) @ e, tol)
    if not (lower.holds and upper.holds):
        raise CertificateInconsistency("comparability split failed to verify")
    return ComparabilitySplit(z, lower, upper)


def central_test(
    e: BlockMatrix,
    tol: Tolerance = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    samples: int = CONTRACTIVITY_SAMPLES,
) -> Certificate:
    """Three-way centrality check for a projection.

    (i) commutation with matrix units, (ii) the corner map x -> exe is
    homomorphic, (iii) no element with ||exe|| < ||ex|| among basis elements and
    seeded random samples.
    """
    if not is_projection(e, tol):
        raise ValueError("e is not a projection")
    sig = e.signature
    direct = center_membership(e, tol)
    scalar = blocks_are_scalar(e, tol)
    hom = homomorphic_certificate(corner_compression(e, tol), tol, seed, check_hypothesis=False)

    xs = _sample_unit_elements(sig, seed, samples)
    E = sig.embed(e.to_vector())
    X = sig.embed(xs)
    ex = np.linalg.norm(E @ X, ord=2, axis=(-2, -1))
    exe = np.linalg.norm(E @ X @ E, ord=2, axis=(-2, -1))
    gaps = ex - exe
    k = int(np.argmax(gaps))
    has_witness = bool(gaps[k] > tol.eq_tol)

    checks = (
        Check("center_membership", direct, 0.0 if direct else 1.0, tol.eq_tol),
        Check("corner_homomorphic", hom.holds, hom.check("gram_zero").residual, tol.eq_tol),
        Check("no_norm_witness", not has_witness, float(max(gaps[k], 0.0)), tol.eq_tol,
              f"{len(xs)} samples"),
    )
    agree = direct == scalar == hom.holds == (not has_witness)
    extra = {"agree": agree, "blocks_scalar": scalar, "ranks": rank_of(e, tol)}
    if direct:
        return Certificate("central", HOLDS, tol, checks, seed=seed, extra=extra)
    return Certificate(
        "central", FAILS, tol, checks, reason="NotCentral",
        witness={"x": sig.from_vector(xs[k])} if has_witness else {},
        scalars={"norm_ex": float(ex[k]), "norm_exe": float(exe[k]), "gap": float(gaps[k])},
        seed=seed, extra=extra,
    )
