"""Compression by a projection e is homomorphic exactly when e is central.

For a non-central e the certificate reports an x with ||ex(1-e)|| large while
the compression sees nothing of it.
"""
import numpy as np

from ncretract import AlgebraSignature, BlockMatrix, central_test

sig = AlgebraSignature([2, 1])
central = BlockMatrix(sig, [np.eye(2), np.zeros((1, 1))])
corner = BlockMatrix(sig, [np.diag([1.0, 0.0]), np.ones((1, 1))])

for name, e in (("central", central), ("corner", corner)):
    cert = central_test(e)
    s = cert.scalars
    print(f"{name:8s} central={cert.holds}  " + "  ".join(f"{k}={v:.3g}" for k, v in sorted(s.items())))
