"""Range products of a conditional expectation agree with the ambient products.

For the zero-diagonal projection on M2 (contractive, not an expectation) the
triple chain still holds while the Jordan chain does not.
"""
import numpy as np

from ncretract import (
    AlgebraSignature,
    BlockMatrix,
    expectation_formulas_check,
    pinching,
    triple_homomorphism_certificate,
    zero_diagonal_projection,
)

sig = AlgebraSignature([3])
rng = np.random.default_rng(0)
p = np.diag([1.0, 1.0, 0.0])
E = pinching([BlockMatrix(sig, [p]), BlockMatrix(sig, [np.eye(3) - p])])

fc = expectation_formulas_check(E)
print(f"pinching on M3: formulas hold={fc.holds}  worst residual={max(c.residual for c in fc.checks):.2e}")
print(f"pinching on M3: triple homomorphic={triple_homomorphism_certificate(E).holds}")

Z = zero_diagonal_projection(2)
fz = expectation_formulas_check(Z)
print(f"zero diagonal on M2: formulas verdict={fz.verdict} reason={fz.reason}")
print(f"zero diagonal on M2: triple homomorphic={triple_homomorphism_certificate(Z).holds}")
