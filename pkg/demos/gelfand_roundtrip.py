"""Retractions of a finite space <-> homomorphic expectations on its functions.

Every idempotent self-map of a 4-point space is turned into an expectation and
recovered again.  The antipodal average on 4 points has no retraction.
"""
from ncretract import FiniteSpace, NotHomomorphic, antipodal_average, expectation_from_retraction, extract_retraction
from ncretract.gelfand import SpaceMap, all_retractions

X = FiniteSpace(range(4))
taus = list(all_retractions(4))
ok = 0
for table in taus:
    tau = SpaceMap(X, X, tuple(table))
    back = extract_retraction(expectation_from_retraction(tau), X)
    ok += back.tau.table == tau.table
print(f"idempotent maps on 4 points: {len(taus)}, recovered: {ok}")

try:
    extract_retraction(antipodal_average(4), X)
except NotHomomorphic as exc:
    print(f"antipodal average: not homomorphic ({exc})")
