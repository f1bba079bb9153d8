"""Homomorphic conditional expectations on finite-dimensional C*-algebras.

Build conditional expectations on direct sums of matrix algebras, certify
whether they are homomorphic (and Jordan / triple homomorphic), and recover
retractions from homomorphic expectations on function algebras.
"""

__version__ = "0.1.0"

from .algebra import (  # noqa: E402
    AlgebraSignature,
    BlockMatrix,
    Tolerance,
    adjoint,
    center_membership,
    is_positive,
    is_projection,
    jordan_product,
    multiply,
    operator_norm,
    rank_of,
    triple_product,
)
from .maps import (  # noqa: E402
    OperatorMap,
    Splitting,
    central_projection_expectation,
    corner_compression,
    diagonal_pinching,
    graph_expectation,
    group_average,
    pinching,
    split_along,
    zero_diagonal_projection,
)
from .verify import (  # noqa: E402
    Certificate,
    GramTensor,
    central_test,
    comparability_split,
    homomorphic_certificate,
    ks_defect,
    multiplicative_domain_member,
    norm_gap,
    subequivalence,
    verify_expectation,
    witness_norm_gap,
)
from .jordan import (  # noqa: E402
    expectation_formulas_check,
    jordan_homomorphism_certificate_cstar,
    positive_unital_projection_certificate,
    range_jordan_product,
    range_triple_product,
    triple_homomorphism_certificate,
    triple_polarization,
)
from .gelfand import (  # noqa: E402
    FiniteSpace,
    NotHomomorphic,
    SpaceMap,
    antipodal_average,
    expectation_from_retraction,
    extract_retraction,
    unitise_and_extract,
)
