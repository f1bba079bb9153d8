import numpy as np
import pytest
from hypothesis import strategies as st

from ncretract.algebra import AlgebraSignature

SIGNATURES = [(1,), (2,), (1, 1), (2, 1), (3,), (2, 2), (3, 1), (1, 2, 1)]

signatures = st.sampled_from(SIGNATURES).map(AlgebraSignature)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def dense_random(rng, sig):
    """Block-diagonal dense matrix with independent Gaussian blocks."""
    N = sum(sig.blocks)
    out = np.zeros((N, N), complex)
    i = 0
    for n in sig.blocks:
        out[i:i + n, i:i + n] = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        i += n
    return out


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
