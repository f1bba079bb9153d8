import numpy as np
import pytest
from hypothesis import given, settings

from ncretract.algebra import (
    AlgebraSignature,
    BlockMatrix,
    SignatureMismatch,
    Tolerance,
    adjoint,
    blocks_are_scalar,
    center_membership,
    is_close,
    is_positive,
    is_projection,
    jordan_product,
    min_eigenvalue,
    multiply,
    operator_norm,
    rank_of,
    triple_product,
    unitary_from,
)

from conftest import dense_random, seeds, signatures


def test_dimensions():
    sig = AlgebraSignature([4, 3, 2, 1, 1])
    assert sig.dim == 16 + 9 + 4 + 1 + 1
    assert sig.size == 11
    assert sig.offsets == (0, 16, 25, 29, 30)
    assert sig.diag_offsets == (0, 4, 7, 9, 10)


def test_bad_signatures():
    with pytest.raises(ValueError):
        AlgebraSignature([])
    with pytest.raises(ValueError):
        AlgebraSignature([2, 0])


def test_basis_is_lexicographic():
    sig = AlgebraSignature([2, 1])
    labels = [sig.basis_label(i) for i in range(sig.dim)]
    assert labels == [(0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1), (1, 0, 0)]
    # e_{01} of block 0 sits at row 0, col 1 of the dense embedding
    D = sig.basis()[1].to_dense()
    assert D[0, 1] == 1 and np.count_nonzero(D) == 1


def test_unit_products():
    sig = AlgebraSignature([2, 2])
    e01, e10 = sig.unit(0, 0, 1), sig.unit(0, 1, 0)
    assert (e01 @ e10).allclose(sig.unit(0, 0, 0))
    # different blocks annihilate
    assert (e01 @ sig.unit(1, 1, 0)).allclose(sig.zero())


def test_signature_mismatch():
    a, b = AlgebraSignature([2]).identity(), AlgebraSignature([1, 1]).identity()
    with pytest.raises(SignatureMismatch):
        multiply(a, b)


def test_immutable():
    x = AlgebraSignature([2]).identity()
    with pytest.raises(AttributeError):
        x.blocks = ()
    with pytest.raises(ValueError):
        x.blocks[0][0, 0] = 5


def test_tolerance_validation():
    with pytest.raises(ValueError):
        Tolerance(eq_tol=0)
    t = Tolerance(eq_tol=1e-7)
    assert Tolerance.from_dict(t.to_dict()) == t


@settings(max_examples=40, deadline=None)
@given(sig=signatures, seed=seeds)
def test_dense_oracle(sig, seed):
    """Products, adjoints, norms against the block-diagonal dense matrices."""
    rng = np.random.default_rng(seed)
    X, Y, Z = (dense_random(rng, sig) for _ in range(3))
    x, y, z = (sig.from_dense(M) for M in (X, Y, Z))
    assert np.allclose(multiply(x, y).to_dense(), X @ Y)
    assert np.allclose(adjoint(x).to_dense(), X.conj().T)
    assert np.allclose(jordan_product(x, y).to_dense(), (X @ Y + Y @ X) / 2)
    H = lambda M: M.conj().T  # noqa: E731
    assert np.allclose(triple_product(x, y, z).to_dense(), (X @ H(Y) @ Z + Z @ H(Y) @ X) / 2)
    assert np.isclose(operator_norm(x), np.linalg.norm(X, 2))
    assert np.allclose(sig.embed(x.to_vector()), X)


@settings(max_examples=30, deadline=None)
@given(sig=signatures, seed=seeds)
def test_cstar_identity(sig, seed):
    x = sig.random(np.random.default_rng(seed))
    assert np.isclose(operator_norm(x.H @ x), operator_norm(x) ** 2)
    assert np.isclose(operator_norm(x), 1.0)


def test_positivity_and_projections(rng):
    sig = AlgebraSignature([3, 1])
    x = sig.random(rng)
    assert is_positive(x.H @ x)
    assert min_eigenvalue(x.H @ x) >= -1e-12
    assert not is_positive(-(x.H @ x))
    U = unitary_from(rng, 3)
    p = BlockMatrix(sig, [U @ np.diag([1, 1, 0]) @ U.conj().T, np.ones((1, 1))])
    assert is_projection(p)
    assert rank_of(p) == [2, 1]
    assert not is_projection(p * 2)


def test_center():
    sig = AlgebraSignature([2, 1])
    z = BlockMatrix(sig, [3 * np.eye(2), [[5]]])
    assert center_membership(z) and blocks_are_scalar(z)
    e = BlockMatrix(sig, [np.diag([1, 0]), [[1]]])
    assert not center_membership(e) and not blocks_are_scalar(e)


def test_is_close_relative():
    sig = AlgebraSignature([1])
    big = sig.from_vector([1e12])
    assert is_close(big, sig.from_vector([1e12 + 1]))
    assert not is_close(sig.from_vector([0.0]), sig.from_vector([1e-6]))


def test_haar_unitary(rng):
    U = unitary_from(rng, 4)
    assert np.allclose(U.conj().T @ U, np.eye(4))


def test_random_batches(rng):
    sig = AlgebraSignature([2, 1])
    v = sig.random_batch(rng, 10)
    assert np.allclose(np.linalg.norm(sig.embed(v), 2, axis=(-2, -1)), 1)
    h = sig.embed(sig.random_self_adjoint_batch(rng, 10))
    assert np.allclose(h, np.conj(np.swapaxes(h, -1, -2)))
