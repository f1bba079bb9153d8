import pytest

from ncretract.algebra import AlgebraSignature, rank_of
from ncretract.corpus import (
    GeneratorError,
    default_corpus,
    embedding_homomorphism,
    generate,
    search_jordan_not_homomorphic,
)
from ncretract.verify import homomorphic_certificate, verify_expectation


def test_corpus_size_and_coverage():
    corpus = default_corpus(42)
    assert len(corpus) >= 50
    sigs = {inst.algebra.blocks for inst in corpus}
    assert (4, 3, 2, 1, 1) in sigs
    kinds = {inst.kind for inst in corpus}
    assert {"pinching", "average", "central", "corner", "graph", "retraction", "antipodal",
            "zero_diagonal", "dense"} <= kinds


def test_corpus_deterministic():
    a = [i.dumps() for i in default_corpus(42)]
    b = [i.dumps() for i in default_corpus(42)]
    assert a == b
    assert a != [i.dumps() for i in default_corpus(43)]


def test_annotations_match_verdicts():
    for inst in default_corpus(11):
        E = inst.build()
        ce = verify_expectation(E, inst.tolerance, inst.seed)
        if "expectation" in inst.expect:
            assert ce.holds == inst.expect["expectation"], inst.name
        if ce.holds and "homomorphic" in inst.expect:
            assert homomorphic_certificate(E, inst.tolerance, inst.seed).holds == inst.expect["homomorphic"], inst.name


def test_corner_enumerates_all_ranks():
    insts = generate("corner", 1, 5, signature=(2, 3))
    # [DERIVED] (2 + 1) * (3 + 1) rank patterns
    assert len(insts) == 12
    ranks = {tuple(rank_of(i.params["e"])) for i in insts}
    assert len(ranks) == 12


def test_retraction_generation_reproducible():
    a = [i.dumps() for i in generate("retraction", 10, 7, size=5)]
    assert len(a) == 10
    assert a == [i.dumps() for i in generate("retraction", 10, 7, size=5)]


def test_antipodal_generation():
    (inst,) = generate("antipodal", 1, 0, size=6)
    assert inst.build().domain.dim == 6


@pytest.mark.parametrize("kw", [
    dict(kind="nope"),
    dict(kind="antipodal", size=5),
    dict(kind="retraction", size=0),
    dict(kind="pinching", count=0),
    dict(kind="pinching", signature=[0]),
])
def test_generator_errors(kw):
    kind = kw.pop("kind")
    with pytest.raises(GeneratorError):
        generate(kind, **kw)


def test_dense_perturbed_fails():
    for inst in generate("dense-perturbed", 3, 1):
        assert not verify_expectation(inst.build()).holds


def test_embedding_is_unital_homomorphism(rng):
    A, B = AlgebraSignature([2, 1]), AlgebraSignature([5])
    phi = embedding_homomorphism(A, B, [[2, 1]])
    x, y = A.random(rng), A.random(rng)
    assert phi(x @ y).allclose(phi(x) @ phi(y))
    assert phi(A.identity()).allclose(B.identity())
    with pytest.raises(GeneratorError):
        embedding_homomorphism(A, AlgebraSignature([2]), [[1, 1]])


def test_jordan_search_reports_absence():
    res = search_jordan_not_homomorphic(default_corpus(42))
    assert len(res["scanned"]) > 50
    assert res["hits"] == []


def test_multiplicative_on_basis():
    from ncretract.corpus import multiplicative_on_basis
    from ncretract.maps import central_projection_expectation, diagonal_pinching

    sig = AlgebraSignature([2, 1])
    assert not multiplicative_on_basis(diagonal_pinching(AlgebraSignature([2])))
    p = sig.identity() - sig.unit(1, 0, 0)
    assert multiplicative_on_basis(central_projection_expectation(p))
