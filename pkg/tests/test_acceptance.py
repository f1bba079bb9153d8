"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the per-criterion lines are
printed in the terminal summary (and directly when run as a script).
"""
import sys
import time
from itertools import product

import numpy as np
import pytest

from ncretract.algebra import AlgebraSignature, BlockMatrix, center_membership, operator_norm
from ncretract.cli import run_verify
from ncretract.corpus import default_corpus, random_projection
from ncretract.gelfand import (
    FiniteSpace,
    NotHomomorphic,
    SpaceMap,
    all_retractions,
    antipodal_average,
    expectation_from_retraction,
    expectation_on_support,
    extract_retraction,
    random_retraction,
    unitise_and_extract,
)
from ncretract.instances import save_instance
from ncretract.jordan import (
    expectation_formulas_check,
    jordan_homomorphism_certificate_cstar,
    positive_unital_projection_certificate,
    triple_homomorphism_certificate,
    triple_polarization,
)
from ncretract.algebra import triple_product
from ncretract.maps import corner_compression, diagonal_pinching, zero_diagonal_projection
from ncretract.verify import (
    choi_basis_matrix,
    central_test,
    comparability_split,
    homomorphic_certificate,
    ks_batch,
    norm_gap,
    verify_expectation,
)

SEED = 42
RESULTS: list[tuple[int, bool, str]] = []


def record(number: int, ok: bool, detail: str):
    RESULTS.append((number, ok, detail))
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def corpus():
    return default_corpus(SEED)


@pytest.fixture(scope="module")
def expectations(corpus):
    """(instance, map) for every corpus member certified as a conditional expectation."""
    out = []
    for inst in corpus:
        E = inst.build()
        if verify_expectation(E, inst.tolerance, inst.seed).holds:
            out.append((inst, E))
    return out


def test_criterion_1_kadison_schwarz(expectations):
    t0 = time.perf_counter()
    worst_lam = worst_gap = np.inf
    blocks = {inst.algebra.blocks for inst, _ in expectations}
    for n, (inst, E) in enumerate(expectations):
        sig = E.domain
        xs = sig.random_batch(np.random.default_rng(SEED + n), 1000)
        lam, herm, gap, sq = ks_batch(E, xs)
        worst_lam = min(worst_lam, float((lam / np.maximum(sq, 1)).min()))
        worst_gap = min(worst_gap, float(gap.min()))
        assert herm.max() <= 1e-9
    dt = time.perf_counter() - t0
    ok = (len(expectations) >= 50 and (4, 3, 2, 1, 1) in blocks
          and worst_lam >= -1e-8 and worst_gap >= -1e-9 and dt < 60)
    record(1, ok, f"{len(expectations)} maps x 1000 samples, min eig {worst_lam:.2e}, "
                  f"min gap {worst_gap:.2e}, {dt:.1f}s")


def test_criterion_2_homomorphism_equivalence(expectations):
    disagreements, weak_witnesses, hom_gaps = [], [], []
    for inst, E in expectations:
        cert = homomorphic_certificate(E, inst.tolerance, inst.seed, check_hypothesis=False)
        flags = {c.name: c.passed for c in cert.checks}
        if len(set(flags.values())) != 1:
            disagreements.append(inst.name)
        if cert.holds:
            sig = E.domain
            xs = np.vstack([np.eye(sig.dim), sig.random_batch(np.random.default_rng(SEED), 200)])
            _, _, gap, _ = ks_batch(E, xs)
            hom_gaps.append(float(np.abs(gap).max()))
        else:
            g = norm_gap(E, cert.witness["x"], inst.tolerance)
            if not g > 1e-6:
                weak_witnesses.append(inst.name)

    M2 = AlgebraSignature([2])
    pin = homomorphic_certificate(diagonal_pinching(M2))
    x = pin.witness["x"].to_vector()
    at_e12 = np.allclose(np.abs(x), [0, 1, 0, 0]) or np.allclose(np.abs(x), [0, 0, 1, 0])
    anti = homomorphic_certificate(antipodal_average(4))
    ax = anti.witness["x"].to_vector()
    # delta_1 - E(delta_1) = (1/2, 0, -1/2, 0): the kernel component of delta_1
    at_delta = np.allclose(ax, [0.5, 0, -0.5, 0]) or np.allclose(ax, [-0.5, 0, 0.5, 0])
    ok = (not disagreements and not weak_witnesses and max(hom_gaps) <= 1e-9
          and abs(pin.scalars["gap"] - 1) < 1e-12 and at_e12
          and abs(anti.scalars["gap"] - 0.25) < 1e-12 and at_delta)
    record(2, ok, f"{len(expectations)} maps, deciders agree on all: {not disagreements}, "
                  f"fails with gap>1e-6 witness: {not weak_witnesses}, max homomorphic gap "
                  f"{max(hom_gaps):.1e}, pinching gap {pin.scalars['gap']:.3f}, antipodal gap "
                  f"{anti.scalars['gap']:.3f}")


def _diagonal_projections(sig):
    for bits in product((0, 1), repeat=sig.size):
        blocks, i = [], 0
        for n in sig.blocks:
            blocks.append(np.diag(bits[i:i + n]).astype(complex))
            i += n
        yield BlockMatrix(sig, blocks)


def test_criterion_3_centrality():
    count, bad, min_witness = 0, [], np.inf
    for blocks in ((2, 2), (3, 1)):
        sig = AlgebraSignature(blocks)
        for e in _diagonal_projections(sig):
            count += 1
            hom = homomorphic_certificate(corner_compression(e), check_hypothesis=False).holds
            trivial = all(np.allclose(b, 0) or np.allclose(b, np.eye(len(b))) for b in e.blocks)
            central = center_membership(e)
            cert = central_test(e)
            if not (hom == trivial == central == cert.holds and cert.extra["agree"]):
                bad.append((blocks, [np.diag(b).real.tolist() for b in e.blocks]))
            if not cert.holds:
                x = cert.witness["x"]
                g = operator_norm(e @ x) - operator_norm(e @ x @ e)
                min_witness = min(min_witness, g)
    e = BlockMatrix(AlgebraSignature([2]), [np.diag([1, 0])])
    ex = central_test(e)
    example = (abs(ex.scalars["norm_ex"] - 1) < 1e-12 and abs(ex.scalars["norm_exe"]) < 1e-12)
    ok = not bad and min_witness >= 0.5 and example
    record(3, ok, f"{count} diagonal projections, equivalences hold: {not bad}, "
                  f"min witness gap {min_witness:.3f}, diag(1,0) example: {example}")


def test_criterion_4_comparability():
    rng = np.random.default_rng(SEED)
    sigs = [AlgebraSignature(b) for b in ((2,), (3, 1), (2, 2), (4, 3, 2, 1, 1), (5,), (1, 1, 1))]
    worst = 0.0
    for n in range(200):
        sig = sigs[n % len(sigs)]
        e, _ = random_projection(rng, sig)
        split = comparability_split(e)
        z = split.z.to_dense()
        one = np.eye(sig.size)
        E = e.to_dense()
        for sub, a, b in ((split.lower, z @ E, z @ (one - E)),
                          (split.upper, (one - z) @ (one - E), (one - z) @ E)):
            u = sub.u.to_dense()
            h = u.conj().T @ u
            worst = max(worst, np.abs(u @ u.conj().T - a).max(), np.abs(b @ h - h).max(),
                        sub.residual_uu, sub.residual_le)
    record(4, worst <= 1e-8, f"200 random projections, worst partial isometry residual {worst:.1e}")


def test_criterion_5_gelfand():
    exact, total = True, 0
    unit_err, omega_fixed = 0.0, True
    for n in range(1, 5):
        X = FiniteSpace(range(n))
        for table in all_retractions(n):
            total += 1
            got = extract_retraction(expectation_from_retraction(SpaceMap(X, X, table)), X)
            exact &= got.tau.table == table and got.support == X.points
        # non-unital expectations: every support L and every retraction of L
        for mask in product((0, 1), repeat=n):
            pts = [p for p, m in zip(X.points, mask) if m]
            tables = list(all_retractions(len(pts))) if pts else [None]
            for t in tables:
                tau = SpaceMap(FiniteSpace(pts), FiniteSpace(pts), t) if pts else None
                E = expectation_on_support(X, pts, tau)
                res = unitise_and_extract(E, X)
                omega_fixed &= res.rho("omega") == "omega"
                unit_err = max(unit_err, float(np.abs(expectation_from_retraction(res.rho).matrix - E.matrix).max()))
    rng = np.random.default_rng(SEED)
    X20 = FiniteSpace(range(20))
    for _ in range(100):
        table = random_retraction(rng, 20)
        got = extract_retraction(expectation_from_retraction(SpaceMap(X20, X20, table)), X20)
        exact &= got.tau.table == table
    antipodal_ok = True
    for size in (2, 4, 6, 8):
        try:
            extract_retraction(antipodal_average(size))
            antipodal_ok = False
        except NotHomomorphic as exc:
            antipodal_ok &= exc.gap > 1e-6
    ok = exact and omega_fixed and unit_err <= 1e-9 and antipodal_ok
    record(5, ok, f"{total} exhaustive + 100 random round trips exact: {exact}, unitisation "
                  f"rho(omega)=omega: {omega_fixed}, max error {unit_err:.1e}, antipodal rejected: {antipodal_ok}")


def test_criterion_6_jordan_triple(expectations):
    worst_chain, chain_fail = 0.0, []
    implication_bad, square_bad, pu_count = [], [], 0
    for inst, E in expectations:
        f = expectation_formulas_check(E, inst.tolerance, inst.seed)
        worst_chain = max(worst_chain, *(c.residual for c in f.checks))
        if not f.holds:
            chain_fail.append(inst.name)
        hom = homomorphic_certificate(E, inst.tolerance, inst.seed, check_hypothesis=False).holds
        tri = triple_homomorphism_certificate(E, inst.tolerance, inst.seed).holds
        jor = jordan_homomorphism_certificate_cstar(E, inst.tolerance, inst.seed, check_hypothesis=False).holds
        if (hom and not tri) or (tri and not jor):
            implication_bad.append(inst.name)
        pu = positive_unital_projection_certificate(E, inst.tolerance, inst.seed, samples=500)
        if pu.reason != "HypothesisViolation":
            pu_count += 1
            if not pu.check("square_inequality").passed:
                square_bad.append(inst.name)
    rng = np.random.default_rng(SEED)
    sigs = [AlgebraSignature(b) for b in ((2,), (3, 1), (2, 2, 1), (4, 3, 2, 1, 1))]
    worst_pol = 0.0
    for n in range(200):
        sig = sigs[n % len(sigs)]
        x, y, z = (sig.random(rng) for _ in range(3))
        t = triple_product(x, y, z)
        worst_pol = max(worst_pol, operator_norm(triple_polarization(x, y, z) - t) / max(operator_norm(t), 1e-300))
    ok = (worst_chain <= 1e-8 and not chain_fail and worst_pol <= 1e-8 and not square_bad
          and pu_count > 0 and not implication_bad)
    record(6, ok, f"chains worst {worst_chain:.1e} on {len(expectations)} maps, polarization worst "
                  f"{worst_pol:.1e}, inequality on {pu_count} positive unital maps: {not square_bad}, "
                  f"implication chain intact: {not implication_bad}")


def test_criterion_7_cp(expectations):
    worst = np.inf
    for inst, E in expectations:
        C = choi_basis_matrix(E)
        scale = max(1.0, float(np.abs(C).max()))
        worst = min(worst, float(np.linalg.eigvalsh((C + C.conj().T) / 2)[0]) / scale)
    zd = verify_expectation(zero_diagonal_projection(2))
    ok = worst >= -1e-8 and zd.reason == "RangeNotSubalgebra"
    record(7, ok, f"Choi-basis min eigenvalue {worst:.1e} over {len(expectations)} maps, "
                  f"zero-diagonal rejected as {zd.reason}")


def test_criterion_8_determinism(tmp_path):
    bodies = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        for inst in default_corpus(SEED):
            save_instance(inst, d / f"{inst.name}.json")
        opts = {"profile": {"eq_tol": 1e-9, "psd_tol": 1e-8, "rank_tol": 1e-9}, "seed": SEED,
                "expect": {}, "jordan": True, "triple": True, "central": False, "retraction": False}
        bodies.append(run_verify([d], opts).body_json())
    ok = bodies[0] == bodies[1] and len(bodies[0]) > 0
    record(8, ok, f"two seed-{SEED} corpus runs, reports byte-identical: {bodies[0] == bodies[1]} "
                  f"({len(bodies[0])} bytes)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
