import numpy as np
import pytest
from hypothesis import given, settings

from ncretract.algebra import AlgebraSignature, BlockMatrix, Tolerance, center_membership, is_projection
from ncretract.corpus import embedding_homomorphism, random_pinching_family, random_projection
from ncretract.gelfand import antipodal_average
from ncretract.maps import (
    OperatorMap,
    Provenance,
    central_projection_expectation,
    corner_compression,
    diagonal_pinching,
    graph_expectation,
    identity_map,
    pinching,
    zero_diagonal_projection,
)
from ncretract.verify import (
    CertificateInconsistency,
    HypothesisViolation,
    KadisonSchwarzViolation,
    choi_basis_matrix,
    central_test,
    comparability_split,
    homomorphic_certificate,
    ks_batch,
    ks_defect,
    multiplicative_domain_member,
    norm_gap,
    subequivalence,
    verify_expectation,
)

from conftest import seeds, signatures

M2 = AlgebraSignature([2])


def _dense_map(sig, m, name="dense"):
    return OperatorMap(sig, np.asarray(m, complex), Provenance("dense", {"name": name}))


# --- expectation axioms -------------------------------------------------------


@pytest.mark.parametrize("E", [
    diagonal_pinching(M2),
    diagonal_pinching(AlgebraSignature([3, 1])),
    identity_map(AlgebraSignature([2, 2])),
    antipodal_average(4),
])
def test_standard_expectations_hold(E):
    cert = verify_expectation(E)
    assert cert.holds, cert.reason
    assert all(c.passed for c in cert.checks)


def test_zero_diagonal_is_range_not_subalgebra():
    cert = verify_expectation(zero_diagonal_projection(2))
    assert not cert.holds
    assert cert.reason == "RangeNotSubalgebra"


def test_not_idempotent():
    cert = verify_expectation(_dense_map(M2, 2 * np.eye(4)))
    assert cert.reason == "NotIdempotent"


def test_graph_of_non_homomorphism_fails_module_property():
    # phi(x) = 2x on C: (x, y) -> (x, 2x) is idempotent but not a bimodule map
    C = AlgebraSignature([1])
    phi = OperatorMap(C, np.array([[2.0]]), Provenance("dense"), C)
    cert = verify_expectation(graph_expectation(phi))
    assert cert.reason in ("NotLeftModule", "NotRightModule")


def test_not_contractive():
    # E(f) = (f0 + f1, 0): idempotent, range a subalgebra, norm 2
    E = _dense_map(AlgebraSignature([1, 1]), [[1, 1], [0, 0]])
    cert = verify_expectation(E)
    assert not cert.holds
    assert cert.reason in ("NotContractive", "NotLeftModule", "NotRightModule", "NotCompletelyPositive")
    assert not cert.check("contractive").passed


def test_choi_matrix_oracle():
    # the matrix [E(b_i* b_j)] of a pinching is PSD
    E = diagonal_pinching(M2)
    C = choi_basis_matrix(E)
    assert C.shape == (8, 8)  # d * N with d = 4, N = 2
    assert np.linalg.eigvalsh((C + C.conj().T) / 2).min() >= -1e-12
    # the transpose map is the textbook positive but not completely positive map
    T = _dense_map(M2, np.eye(4)[[0, 2, 1, 3]])
    Ct = choi_basis_matrix(T)
    assert np.linalg.eigvalsh((Ct + Ct.conj().T) / 2).min() < -0.5


# --- Kadison-Schwarz ----------------------------------------------------------


def test_ks_corner_oracle(rng):
    # for E(x) = exe the defect is e x* (1 - e) x e
    sig = AlgebraSignature([3])
    e, _ = random_projection(rng, sig, [2])
    E = corner_compression(e)
    x = sig.random(rng)
    D = e.to_dense()
    X = x.to_dense()
    expected = D @ X.conj().T @ (np.eye(3) - D) @ X @ D
    assert np.allclose(ks_defect(E, x).to_dense(), expected)


def test_norm_gap_pinching_value():
    # [DERIVED] ||E(e21 e12)|| - ||E(e12)||^2 = ||e22|| - 0 = 1
    E = diagonal_pinching(M2)
    assert norm_gap(E, M2.unit(0, 0, 1)) == pytest.approx(1.0)


def test_ks_violation_raised():
    T = _dense_map(M2, 2 * np.eye(4))
    with pytest.raises(KadisonSchwarzViolation):
        norm_gap(T, M2.identity())


@settings(max_examples=20, deadline=None)
@given(sig=signatures, seed=seeds)
def test_ks_batch_nonnegative(sig, seed):
    rng = np.random.default_rng(seed)
    fam, _ = random_pinching_family(rng, sig)
    E = pinching(fam)
    lam, herm, gap, sq = ks_batch(E, sig.random_batch(rng, 50))
    assert (lam >= -1e-10).all() and (gap >= -1e-10).all()
    assert (herm < 1e-10).all()


# --- homomorphic certificate --------------------------------------------------


def test_pinching_not_homomorphic():
    E = diagonal_pinching(M2)
    cert = homomorphic_certificate(E)
    assert not cert.holds and cert.reason == "NormGap"
    assert cert.scalars["gap"] == pytest.approx(1.0)
    x = cert.witness["x"]
    assert norm_gap(E, x) == pytest.approx(1.0)
    assert cert.extra["deciders_agree"]


def test_antipodal_gap_quarter():
    E = antipodal_average(4)
    cert = homomorphic_certificate(E)
    assert cert.scalars["gap"] == pytest.approx(0.25)
    x = cert.witness["x"]
    assert np.allclose(np.abs(x.to_vector()), [0.5, 0, 0.5, 0])


def test_homomorphic_cases():
    sig = AlgebraSignature([2, 1])
    p = BlockMatrix(sig, [np.zeros((2, 2)), np.ones((1, 1))])
    for E in (central_projection_expectation(p), identity_map(sig),
              graph_expectation(embedding_homomorphism(AlgebraSignature([1]), AlgebraSignature([2]), [[2]]))):
        cert = homomorphic_certificate(E)
        assert cert.holds
        assert all(c.residual <= 1e-9 for c in cert.checks)


def test_hypothesis_check():
    with pytest.raises(HypothesisViolation):
        homomorphic_certificate(zero_diagonal_projection(2))


def test_multiplicative_domain():
    E = diagonal_pinching(M2)
    assert multiplicative_domain_member(E, M2.unit(0, 0, 0))
    assert not multiplicative_domain_member(E, M2.unit(0, 0, 1))


# --- projections --------------------------------------------------------------


def test_subequivalence_explicit():
    sig = AlgebraSignature([3, 1])
    e = BlockMatrix(sig, [np.diag([1, 0, 0]), [[0]]])
    f = BlockMatrix(sig, [np.diag([0, 1, 1]), [[1]]])
    s = subequivalence(e, f)
    assert s.holds and s.ranks == ((1, 2), (0, 1))
    u = s.u.to_dense()
    assert np.allclose(u @ u.conj().T, e.to_dense())
    h = u.conj().T @ u
    assert np.allclose(f.to_dense() @ h, h)
    assert not subequivalence(f, e).holds


@settings(max_examples=25, deadline=None)
@given(sig=signatures, seed=seeds)
def test_comparability(sig, seed):
    e, ranks = random_projection(np.random.default_rng(seed), sig)
    split = comparability_split(e)
    z = split.z
    assert is_projection(z) and center_membership(z)
    assert split.lower.residual_uu <= 1e-8 and split.upper.residual_le <= 1e-8
    for n, r, zb in zip(sig.blocks, ranks, z.blocks):
        assert (zb[0, 0] == 1) == (r <= n - r)


def test_central_test_diag10():
    # [DERIVED] e = diag(1, 0) in M2: witness e12 with ||e x|| = 1, ||e x e|| = 0
    e = BlockMatrix(M2, [np.diag([1, 0])])
    cert = central_test(e)
    assert not cert.holds and cert.reason == "NotCentral"
    assert cert.scalars["norm_ex"] == pytest.approx(1.0)
    assert cert.scalars["norm_exe"] == pytest.approx(0.0)
    assert cert.extra["agree"]


def test_central_test_holds():
    sig = AlgebraSignature([2, 2])
    e = BlockMatrix(sig, [np.eye(2), np.zeros((2, 2))])
    cert = central_test(e)
    assert cert.holds and cert.extra["agree"]


def test_central_test_rejects_non_projection():
    with pytest.raises(ValueError):
        central_test(M2.identity() * 2)


def test_comparability_rejects_non_projection():
    with pytest.raises(ValueError):
        comparability_split(M2.identity() * 0.5)


def test_tolerance_affects_verdict():
    # an idempotent perturbation that the loose tolerance accepts and the default rejects
    E = diagonal_pinching(M2)
    m = E.matrix.copy()
    m[1, 0] = 1e-8
    P = _dense_map(M2, m)
    assert not verify_expectation(P).holds
    assert verify_expectation(P, Tolerance(eq_tol=1e-6, psd_tol=1e-6, rank_tol=1e-6)).holds


def test_inconsistency_type():
    assert issubclass(CertificateInconsistency, AssertionError)
