"""Diagonal pinching on M2 is a conditional expectation but not multiplicative.

The Gram certificate produces a kernel element x with E(x) = 0 and
||E(x*x)|| = 1, so the norm gap is 1.
"""
import numpy as np

from ncretract import AlgebraSignature, diagonal_pinching, homomorphic_certificate, verify_expectation

sig = AlgebraSignature([2])
E = diagonal_pinching(sig)

ce = verify_expectation(E)
print(f"conditional expectation: {ce.holds}")

hom = homomorphic_certificate(E)
print(f"homomorphic: {hom.holds}  gap = {hom.scalars['gap']:.6f}")
x = hom.witness["x"]
print("witness x =")
print(np.round(x.to_dense(), 6))
