"""Jordan and triple structure of projections on block algebras.

Triple products are {xyz} = (x y* z + z y* x)/2; the range of a contractive
projection P carries {a,b,c}_P = P{abc} and a*b = P(a o b).  All basis-wide
checks are vectorized on the N x N embedding; residuals here use coordinate
(Frobenius) norms, which dominate operator norms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import (
    DEFAULT_TOL,
    AlgebraSignature,
    BlockMatrix,
    Tolerance,
    adjoint,
    is_close,
    jordan_product,
    operator_norm,
    triple_product,
)
from .maps import OperatorMap, _pivot_columns, is_idempotent, numerical_rank, split_along
from .verify import (
    CONTRACTIVITY_SAMPLES,
    DEFAULT_SEED,
    FAILS,
    HOLDS,
    Certificate,
    Check,
    _require_expectation,
    _sample_unit_elements,
    _worst,
    batch_norms,
    cp_check,
)

MAX_EXHAUSTIVE_TRIPLES = 10**6
STRATIFIED_PAIRS = 1000
SQUARE_SAMPLES = 500

CERTIFIED_BY_CP = "CertifiedByCP"
SAMPLED_ONLY = "SampledOnly"
NOT_CONTRACTIVE = "NotContractive"


class NotInRange(ValueError):
    pass


# ---------------------------------------------------------------------------
# batched products on coordinate rows


def _adj(m):
    return np.conj(np.swapaxes(m, -1, -2))


def triple_batch(sig: AlgebraSignature, X: np.ndarray, Y: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Coordinates of {X[a], Y[b], Z[c]}, shape (len X, len Y, len Z, d)."""
    Xe, Ye, Ze = sig.embed(X), _adj(sig.embed(Y)), sig.embed(Z)
    XY = Xe[:, None] @ Ye[None, :]  # (a, b, N, N)
    ZY = Ze[:, None] @ Ye[None, :]  # (c, b, N, N)
    t1 = XY[:, :, None] @ Ze[None, None, :]
    t2 = np.swapaxes(ZY, 0, 1)[None, :, :] @ Xe[:, None, None]
    return sig.extract((t1 + t2) / 2)


def triple_rows(sig: AlgebraSignature, X: np.ndarray, Y: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Coordinates of {X[k], Y[k], Z[k]} for aligned rows, shape (k, d)."""
    Xe, Ye, Ze = sig.embed(X), _adj(sig.embed(Y)), sig.embed(Z)
    return sig.extract((Xe @ Ye @ Ze + Ze @ Ye @ Xe) / 2)


def jordan_batch(sig: AlgebraSignature, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    Xe, Ye = sig.embed(X), sig.embed(Y)
    P = Xe[:, None] @ Ye[None, :]
    Q = Ye[None, :] @ Xe[:, None]
    return sig.extract((P + Q) / 2)


def _fro(v: np.ndarray) -> np.ndarray:
    return np.linalg.norm(v, axis=-1)


def _rel(diff, *sides):
    scale = np.maximum.reduce([_fro(s) for s in sides] + [np.ones(diff.shape[:-1])])
    return _fro(diff) / scale


def triple_polarization(x: BlockMatrix, y: BlockMatrix, z: BlockMatrix) -> BlockMatrix:
    """{xyz} rebuilt from cubes {www}, w = x + a y + b z, a^4 = 1, b^2 = 1.

    With the (xy*z + zy*x)/2 normalization the eight-term sum equals 16 {xyz}.
    """
    total = x.signature.zero()
    for a in (1, 1j, -1, -1j):
        for b in (1, -1):
            w = x + a * y + b * z
            total = total + (a * b) * triple_product(w, w, w)
    return total * (1 / 16)


# ---------------------------------------------------------------------------
# projections


@dataclass(frozen=True)
class ProjectionOnAlgebra:
    map: OperatorMap
    contractivity: str
    max_ratio: float
    positive: bool
    unital: bool
    range_unital: bool
    witness: BlockMatrix | None = None

    @property
    def contractive(self) -> bool:
        return self.contractivity != NOT_CONTRACTIVE


def classify_projection(
    P: OperatorMap,
    tol: Tolerance = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    samples: int = CONTRACTIVITY_SAMPLES,
) -> ProjectionOnAlgebra:
    if not is_idempotent(P, tol):
        raise ValueError("map is not idempotent")
    sig = P.domain
    cp, _ = cp_check(P, tol)
    one = sig.identity()
    p1 = P(one)
    n1 = operator_norm(p1)
    xs = _sample_unit_elements(sig, seed, samples)
    ratios = batch_norms(sig, P.apply_batch(xs)) / batch_norms(sig, xs)
    k = int(np.argmax(ratios))
    ratio = float(ratios[k])
    if cp.passed and n1 <= 1 + tol.eq_tol:
        status, wit = CERTIFIED_BY_CP, None
    elif ratio > 1 + tol.eq_tol:
        status, wit = NOT_CONTRACTIVE, sig.from_vector(xs[k])
    else:
        status, wit = SAMPLED_ONLY, None
    unital = is_close(p1, one, tol)
    range_unital = unital
    if not unital and is_close(p1 @ p1, p1, tol) and is_close(p1, adjoint(p1), tol):
        R = P.matrix
        emb = sig.embed(R.T)
        e = p1.to_dense()
        res = max(np.abs(e @ emb - emb).max(), np.abs(emb @ e - emb).max()) if R.size else 0.0
        range_unital = bool(res <= tol.eq_tol * max(1.0, np.abs(emb).max()))
    return ProjectionOnAlgebra(P, status, ratio, cp.passed, unital, range_unital, wit)


def _in_range(P: OperatorMap, *elems: BlockMatrix, tol: Tolerance):
    for a in elems:
        if not is_close(P(a), a, tol):
            raise NotInRange("argument is not in the range of the projection")


def range_triple_product(P: OperatorMap, a: BlockMatrix, b: BlockMatrix, c: BlockMatrix,
                         tol: Tolerance = DEFAULT_TOL) -> BlockMatrix:
    _in_range(P, a, b, c, tol=tol)
    return P(triple_product(a, b, c))


def range_jordan_product(P: OperatorMap, a: BlockMatrix, b: BlockMatrix,
                         tol: Tolerance = DEFAULT_TOL) -> BlockMatrix:
    _in_range(P, a, b, tol=tol)
    return P(jordan_product(a, b))


# ---------------------------------------------------------------------------
# conditional-expectation formulas for contractive / positive projections


def _triple_index_sets(d: int, seed: int):
    """Yield (i, js, ks) batches covering all triples, or a stratified sample when d^3 is large."""
    if d ** 3 <= MAX_EXHAUSTIVE_TRIPLES:
        jj, kk = np.divmod(np.arange(d * d), d)
        for i in range(d):
            yield i, jj, kk
        return
    rng = np.random.default_rng(seed)
    per = max(1, STRATIFIED_PAIRS)
    for i in range(d):
        sel = rng.choice(d * d, size=min(per, d * d), replace=False)
        jj, kk = np.divmod(np.sort(sel), d)
        yield i, jj, kk


def expectation_formulas_check(
    P: OperatorMap,
    tol: Tolerance = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    chain_tol: float | None = None,
) -> Certificate:
    """P{x,Py,Pz} = P{Px,Py,Pz} = P{Px,y,Pz} and P(x o Py) = P(Px o Py) on basis triples/pairs.

    The triple chain is a theorem for contractive projections and the Jordan
    chain for positive unital ones; a failure where the hypotheses are not met
    is reported as ``HypothesisViolation``.
    """
    thr = tol.eq_tol if chain_tol is None else chain_tol
    info = classify_projection(P, tol, seed)
    sig = P.domain
    d = sig.dim
    B = np.eye(d, dtype=complex)
    PB = P.matrix.T
    worst3, where3, count = 0.0, None, 0
    for i, jj, kk in _triple_index_sets(d, seed):
        x, px = B[[i]].repeat(len(jj), 0), PB[[i]].repeat(len(jj), 0)
        y, py, z, pz = B[jj], PB[jj], B[kk], PB[kk]
        l1 = P.apply_batch(triple_rows(sig, x, py, pz))
        l2 = P.apply_batch(triple_rows(sig, px, py, pz))
        l3 = P.apply_batch(triple_rows(sig, px, y, pz))
        res = np.maximum(_rel(l1 - l2, l1, l2), _rel(l2 - l3, l2, l3))
        count += len(jj)
        m = int(np.argmax(res))
        if res[m] > worst3:
            worst3, where3 = float(res[m]), (i, int(jj[m]), int(kk[m]))
    jord_l = P.apply_batch(jordan_batch(sig, B, PB))
    jord_r = P.apply_batch(jordan_batch(sig, PB, PB))
    jres = _rel(jord_l - jord_r, jord_l, jord_r)
    (ji, jj_), worst2 = _worst(jres)

    triple_hyp = info.contractive
    jordan_hyp = info.positive and (info.unital or info.range_unital)
    checks = (
        Check("triple_chain", worst3 <= thr, worst3, thr, f"{count} triples"),
        Check("jordan_chain", worst2 <= thr, worst2, thr, f"{d * d} pairs"),
    )
    extra = {
        "contractivity": info.contractivity,
        "positive": info.positive,
        "unital": info.unital,
        "range_unital": info.range_unital,
        "triple_hypotheses": triple_hyp,
        "jordan_hypotheses": jordan_hyp,
        "exhaustive": d ** 3 <= MAX_EXHAUSTIVE_TRIPLES,
        "missing": [n for n, ok in (("contractive", info.contractive), ("positive", info.positive),
                                    ("unital", info.unital or info.range_unital)) if not ok],
    }
    if all(c.passed for c in checks):
        return Certificate("expectation_formulas", HOLDS, tol, checks, seed=seed, extra=extra)
    if not checks[0].passed:
        i, j, k = where3
        witness = {"x": sig.from_vector(B[i]), "y": sig.from_vector(B[j]), "z": sig.from_vector(B[k])}
        hyp = triple_hyp
    else:
        witness = {"x": sig.from_vector(B[ji]), "y": sig.from_vector(B[jj_])}
        hyp = jordan_hyp
    return Certificate("expectation_formulas", FAILS, tol, checks,
                       reason="ChainViolation" if hyp else "HypothesisViolation",
                       witness=witness, seed=seed, extra=extra)


# ---------------------------------------------------------------------------
# triple homomorphisms


def cubic_witness(P: OperatorMap, y1: BlockMatrix, y2: BlockMatrix, y3: BlockMatrix) -> tuple[BlockMatrix, float]:
    """Kernel element w maximizing ||P{www}|| over w = y1 + a y2 + b y3.

    Since sum a b P{www} = 16 P{y1 y2 y3}, the maximum is at least 2 ||P{y1 y2 y3}||.
    """
    best = None
    for a in (1, 1j, -1, -1j):
        for b in (1, -1):
            w = y1 + a * y2 + b * y3
            val = operator_norm(P(triple_product(w, w, w)))
            if best is None or val > best[1] + 1e-15:
                best = (w, val)
    return best


def triple_homomorphism_certificate(
    P: OperatorMap,
    tol: Tolerance = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
) -> Certificate:
    """Decide P{abc} = P{Pa,Pb,Pc} through four independent sub-checks.

    (a) ker P is a triple ideal, (b) {ker,ker,ran} and {ker,ran,ker} lie in
    ker P, (c) P vanishes on {ker,ker,ker}, (d) the identity on basis triples.
    """
    info = classify_projection(P, tol, seed)
    sig = P.domain
    d = sig.dim
    split = split_along(P, tol)
    K = split.kernel_matrix().T if split.kernel_basis else np.zeros((0, d), complex)
    R = split.range_matrix().T if split.range_basis else np.zeros((0, d), complex)
    B = np.eye(d, dtype=complex)
    thr = tol.eq_tol

    def vanish(T):
        if T.size == 0:
            return np.zeros(T.shape[:-1]), 0.0, None
        img = P.apply_batch(T)
        res = _fro(img) / np.maximum(_fro(T), 1.0)
        idx, worst = _worst(res)
        return res, worst, idx

    a1 = vanish(triple_batch(sig, K, B, B))
    a2 = vanish(triple_batch(sig, B, K, B))
    b1 = vanish(triple_batch(sig, K, K, R))
    b2 = vanish(triple_batch(sig, K, R, K))
    c = vanish(triple_batch(sig, K, K, K))

    worst_d, where_d = 0.0, None
    PB = P.matrix.T
    for i in range(d):
        lhs = P.apply_batch(triple_batch(sig, B[[i]], B, B))[0]
        rhs = P.apply_batch(triple_batch(sig, PB[[i]], PB, PB))[0]
        res = _rel(lhs - rhs, lhs, rhs)
        (j, k), w = _worst(res)
        if w > worst_d:
            worst_d, where_d = w, (i, j, k)

    ok_a = max(a1[1], a2[1]) <= thr
    ok_b = max(b1[1], b2[1]) <= thr
    ok_c = c[1] <= thr
    ok_d = worst_d <= thr
    checks = (
        Check("triple_ideal", ok_a, max(a1[1], a2[1]), thr),
        Check("mixed_kernel_conditions", ok_b, max(b1[1], b2[1]), thr),
        Check("kernel_subtriple", ok_c, c[1], thr, f"kernel dim {len(K)}"),
        Check("basis_triple_homomorphism", ok_d, worst_d, thr),
    )
    extra = {
        "contractivity": info.contractivity,
        "ideal_iff_homomorphism": ok_a == ok_d,
        "conditions_iff_homomorphism": (ok_b and ok_c) == ok_d,
        "dims": split.dims,
    }
    if all(ch.passed for ch in checks):
        return Certificate("triple_homomorphism", HOLDS, tol, checks, seed=seed, extra=extra)

    el = sig.from_vector
    witness: dict = {}
    if not ok_c:
        j, k, l = c[2]
        w, val = cubic_witness(P, el(K[j]), el(K[k]), el(K[l]))
        witness["cubic_x"] = w
        extra["cubic_gap"] = val - operator_norm(P(w)) ** 3
    if not ok_c and ok_a and ok_b and ok_d:
        reason = "CubicNormCondition"
        witness["x"] = witness["cubic_x"]
    elif not ok_a:
        reason = "KernelNotTripleIdeal"
        src = a1 if a1[1] >= a2[1] else a2
        j, k, l = src[2]
        rows = (K, B, B) if src is a1 else (B, K, B)
        witness.update(x=el(rows[0][j]), y=el(rows[1][k]), z=el(rows[2][l]))
    elif not ok_b:
        reason = "MixedKernelCondition"
        src = b1 if b1[1] >= b2[1] else b2
        j, k, l = src[2]
        rows = (K, K, R) if src is b1 else (K, R, K)
        witness.update(x=el(rows[0][j]), y=el(rows[1][k]), z=el(rows[2][l]))
    else:
        reason = "NotTripleHomomorphism"
        i, j, k = where_d
        witness.update(x=el(B[i]), y=el(B[j]), z=el(B[k]))
    return Certificate("triple_homomorphism", FAILS, tol, checks, reason=reason,
                       witness=witness, seed=seed, extra=extra)


# ---------------------------------------------------------------------------
# Jordan homomorphisms


def self_adjoint_kernel_basis(split_kernel: np.ndarray, sig: AlgebraSignature, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Real basis (as coordinate rows) of the self-adjoint part of a *-closed kernel."""
    if split_kernel.size == 0:
        return np.zeros((0, sig.dim), complex)
    Y = split_kernel
    Ya = sig.extract(_adj(sig.embed(Y)))
    cands = np.vstack([val for pair in zip(Y + Ya, 1j * (Y - Ya)) for val in pair])
    real = np.hstack([cands.real, cands.imag]).T  # (2d, 2m), real coordinates
    r = numerical_rank(real, tol)
    piv = _pivot_columns(real, r)
    return cands[piv]


def _sa_witness(P: OperatorMap, X: np.ndarray, G: np.ndarray, sig: AlgebraSignature):
    """Self-adjoint kernel element with ||P(x^2)|| >= max ||P(x_i o x_j)||."""
    g = G.max()
    diag = np.diag(G)
    j = int(np.argmax(diag))
    if diag[j] >= g / 2:
        x = sig.from_vector(X[j])
    else:
        (i, j), _ = _worst(G)
        a, b = sig.from_vector(X[i]), sig.from_vector(X[j])
        cands = [a + b, a - b]
        x = max(cands, key=lambda w: operator_norm(P(w @ w)))
    return x


def jordan_homomorphism_certificate_cstar(
    E: OperatorMap,
    tol: Tolerance = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    check_hypothesis: bool = True,
) -> Certificate:
    """Decide E(a o b) = E(a) o E(b) via E(x_i o x_j) on a self-adjoint kernel basis."""
    if check_hypothesis:
        _require_expectation(E, tol, seed)
    sig = E.domain
    split = split_along(E, tol)
    K = split.kernel_matrix().T if split.kernel_basis else np.zeros((0, sig.dim), complex)
    X = self_adjoint_kernel_basis(K, sig, tol)
    if len(X):
        J = E.apply_batch(jordan_batch(sig, X, X))
        G = batch_norms(sig, J)
        scale = np.maximum(1.0, np.outer(batch_norms(sig, X), batch_norms(sig, X)))
        gres = G / scale
        g_worst = float(gres.max())
    else:
        G = gres = np.zeros((0, 0))
        g_worst = 0.0
    B = np.eye(sig.dim, dtype=complex)
    EB = E.matrix.T
    lhs = E.apply_batch(jordan_batch(sig, B, B))
    rhs = jordan_batch(sig, EB, EB)
    m_worst = float(_rel(lhs - rhs, lhs, rhs).max())
    checks = (
        Check("sa_kernel_gram_zero", g_worst <= tol.eq_tol, g_worst, tol.eq_tol, f"real dim {len(X)}"),
        Check("basis_jordan_multiplicative", m_worst <= tol.eq_tol, m_worst, tol.eq_tol),
    )
    extra = {"agree": checks[0].passed == checks[1].passed}
    if checks[0].passed:
        return Certificate("jordan_homomorphism", HOLDS, tol, checks, seed=seed, extra=extra)
    x = _sa_witness(E, X, G, sig)
    return Certificate(
        "jordan_homomorphism", FAILS, tol, checks, reason="SelfAdjointNormGap",
        witness={"x": x},
        scalars={"norm_E_x2": operator_norm(E(x @ x)), "norm_E_x": operator_norm(E(x))},
        seed=seed, extra=extra,
    )


def _hermitian_basis(sig: AlgebraSignature) -> np.ndarray:
    rows = []
    for b, n in enumerate(sig.blocks):
        off = sig.offsets[b]
        for k in range(n):
            for l in range(k, n):
                v = np.zeros(sig.dim, complex)
                if k == l:
                    v[off + k * n + k] = 1
                    rows.append(v)
                    continue
                v[off + k * n + l] = 1
                v[off + l * n + k] = 1
                rows.append(v)
                w = np.zeros(sig.dim, complex)
                w[off + k * n + l] = 1j
                w[off + l * n + k] = -1j
                rows.append(w)
    return np.array(rows)


def square_defects(P: OperatorMap, A: np.ndarray) -> np.ndarray:
    """Minimum eigenvalues of P(a^2) - P(a)^2 for self-adjoint coordinate rows a."""
    sig = P.domain
    Ae = sig.embed(A)
    PA = sig.embed(P.apply_batch(A))
    PA2 = sig.embed(P.apply_batch(sig.extract(Ae @ Ae)))
    D = PA2 - PA @ PA
    return np.linalg.eigvalsh((D + _adj(D)) / 2)[:, 0]


def positive_unital_projection_certificate(
    P: OperatorMap,
    tol: Tolerance = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    samples: int = SQUARE_SAMPLES,
) -> Certificate:
    """Decide P(a^2) = P(P(a)^2) for a positive unital projection.

    Also checks P(a^2) >= P(a)^2 on self-adjoint basis combinations and
    seeded random self-adjoint elements.  Unitality may hold on the range
    only (P(1) a projection that is a unit for P(A)).
    """
    info = classify_projection(P, tol, seed)
    sig = P.domain
    extra = {"contractivity": info.contractivity, "positive": info.positive,
             "unital": info.unital, "range_unital": info.range_unital}
    if not info.positive or not (info.unital or info.range_unital):
        missing = [n for n, ok in (("positive", info.positive),
                                   ("unital", info.unital or info.range_unital)) if not ok]
        return Certificate("positive_unital_jordan", FAILS, tol, (), reason="HypothesisViolation",
                           seed=seed, extra={**extra, "missing": missing})

    H = _hermitian_basis(sig)
    iu, ju = np.triu_indices(len(H), 1)
    rng = np.random.default_rng(seed)
    A = np.vstack([H, H[iu] + H[ju], H[iu] - H[ju], sig.random_self_adjoint_batch(rng, samples)])
    scale = np.maximum(1.0, batch_norms(sig, A) ** 2)
    lam = square_defects(P, A) / scale
    k = int(np.argmin(lam))
    ineq_ok = bool(lam[k] >= -tol.psd_tol)

    PH = P.matrix @ H.T
    lhs = P.apply_batch(jordan_batch(sig, H, H))
    rhs = P.apply_batch(jordan_batch(sig, PH.T, PH.T))
    hom_worst = float(_rel(lhs - rhs, lhs, rhs).max())

    split = split_along(P, tol)
    K = split.kernel_matrix().T if split.kernel_basis else np.zeros((0, sig.dim), complex)
    X = self_adjoint_kernel_basis(K, sig, tol)
    if len(X):
        G = batch_norms(sig, P.apply_batch(jordan_batch(sig, X, X)))
        gres = G / np.maximum(1.0, np.outer(batch_norms(sig, X), batch_norms(sig, X)))
        k_worst = float(gres.max())
    else:
        G, k_worst = np.zeros((0, 0)), 0.0

    checks = (
        Check("square_inequality", ineq_ok, float(max(-lam[k], 0.0)), tol.psd_tol, f"{len(A)} elements"),
        Check("jordan_homomorphism", hom_worst <= tol.eq_tol, hom_worst, tol.eq_tol),
        Check("sa_kernel_gram_zero", k_worst <= tol.eq_tol, k_worst, tol.eq_tol),
    )
    extra["agree"] = checks[1].passed == checks[2].passed
    gaps = batch_norms(sig, P.apply_batch(sig.extract(sig.embed(A) @ sig.embed(A)))) - batch_norms(
        sig, P.apply_batch(A)) ** 2
    extra["max_norm_gap"] = float(gaps.max())
    if not ineq_ok:
        return Certificate("positive_unital_jordan", FAILS, tol, checks, reason="InequalityViolated",
                           witness={"a": sig.from_vector(A[k])}, seed=seed, extra=extra)
    if checks[1].passed:
        return Certificate("positive_unital_jordan", HOLDS, tol, checks, seed=seed, extra=extra)
    x = _sa_witness(P, X, G, sig) if len(X) else None
    witness = {"x": x} if x is not None else {}
    scalars = {"norm_P_x2": operator_norm(P(x @ x)), "norm_P_x": operator_norm(P(x))} if x is not None else {}
    return Certificate("positive_unital_jordan", FAILS, tol, checks, reason="SelfAdjointNormGap",
                       witness=witness, scalars=scalars, seed=seed, extra=extra)
