"""Instance files and certificate reports.

Instances are JSON documents.  Complex numbers are written as ``[re, im]``
pairs; an algebra element is a list of blocks, each a list of rows.  Parsing
is strict: unknown fields and shape mismatches raise :class:`InstanceError`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .algebra import AlgebraSignature, BlockMatrix, Tolerance
from .gelfand import FiniteSpace, SpaceMap, antipodal_average, expectation_from_retraction
from .maps import (
    MapConstructionError,
    OperatorMap,
    Provenance,
    central_projection_expectation,
    corner_compression,
    graph_expectation,
    group_average,
    pinching,
    zero_diagonal_projection,
)
from .verify import Certificate

FORMAT_VERSION = 1
MAP_KINDS = ("pinching", "average", "central", "corner", "graph", "retraction", "antipodal",
             "dense", "zero_diagonal")
_MAP_FIELDS = {
    "pinching": {"projections"},
    "average": {"unitaries"},
    "central": {"p"},
    "corner": {"e"},
    "graph": {"domain", "codomain", "matrix"},
    "retraction": {"table"},
    "antipodal": set(),
    "dense": {"matrix"},
    "zero_diagonal": {"n"},
}
_TOP_FIELDS = {"version", "name", "signature", "space", "map", "tolerance", "seed", "expect"}


class InstanceError(ValueError):
    """Malformed instance file."""


# ---------------------------------------------------------------------------
# complex encoding


def encode_complex(z) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def decode_complex(pair) -> complex:
    if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(v, (int, float)) for v in pair)):
        raise InstanceError(f"expected an [re, im] pair, got {pair!r}")
    return complex(pair[0], pair[1])


def encode_matrix(m: np.ndarray) -> list:
    return [[encode_complex(v) for v in row] for row in np.asarray(m)]


def decode_matrix(rows, shape: tuple[int, int]) -> np.ndarray:
    if not isinstance(rows, list) or len(rows) != shape[0]:
        raise InstanceError(f"expected {shape[0]} rows")
    out = np.zeros(shape, complex)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != shape[1]:
            raise InstanceError(f"row {i} must have {shape[1]} entries")
        for j, pair in enumerate(row):
            out[i, j] = decode_complex(pair)
    return out


def encode_element(x: BlockMatrix) -> list:
    return [encode_matrix(b) for b in x.blocks]


def decode_element(data, sig: AlgebraSignature) -> BlockMatrix:
    if not isinstance(data, list) or len(data) != len(sig.blocks):
        raise InstanceError(f"element must have {len(sig.blocks)} blocks")
    return BlockMatrix(sig, [decode_matrix(b, (n, n)) for b, n in zip(data, sig.blocks)])


# ---------------------------------------------------------------------------
# instances


@dataclass
class Instance:
    name: str
    kind: str
    params: dict
    signature: AlgebraSignature | None = None
    space: FiniteSpace | None = None
    tolerance: Tolerance = field(default_factory=Tolerance)
    seed: int = 0
    expect: dict[str, bool] = field(default_factory=dict)

    @property
    def algebra(self) -> AlgebraSignature:
        if self.space is not None:
            X = self.space.finite_part if self.space.basepoint is not None else self.space
            return X.signature
        return self.signature

    @property
    def point_space(self) -> FiniteSpace | None:
        if self.space is None:
            return None
        return self.space.finite_part

    def build(self) -> OperatorMap:
        k, p = self.kind, self.params
        try:
            if k == "pinching":
                return pinching(p["projections"], self.tolerance)
            if k == "average":
                return group_average(p["unitaries"], self.tolerance)
            if k == "central":
                return central_projection_expectation(p["p"], self.tolerance)
            if k == "corner":
                return corner_compression(p["e"], self.tolerance)
            if k == "graph":
                return graph_expectation(p["phi"])
            if k == "retraction":
                return expectation_from_retraction(p["tau"])
            if k == "antipodal":
                return antipodal_average(len(self.space))
            if k == "zero_diagonal":
                return zero_diagonal_projection(p["n"])
            if k == "dense":
                return OperatorMap(self.algebra, p["matrix"], Provenance("dense"))
        except MapConstructionError as exc:
            raise InstanceError(str(exc)) from exc
        raise InstanceError(f"unknown map kind {k!r}")

    def projection(self) -> BlockMatrix | None:
        return self.params.get("p", self.params.get("e"))

    # serialization

    def to_dict(self) -> dict:
        k, p = self.kind, self.params
        m: dict[str, Any] = {"kind": k}
        if k == "pinching":
            m["projections"] = [encode_element(q) for q in p["projections"]]
        elif k == "average":
            m["unitaries"] = [encode_element(u) for u in p["unitaries"]]
        elif k in ("central", "corner"):
            key = "p" if k == "central" else "e"
            m[key] = encode_element(p[key])
        elif k == "graph":
            phi = p["phi"]
            m.update(domain=list(phi.domain.blocks), codomain=list(phi.codomain.blocks),
                     matrix=encode_matrix(phi.matrix))
        elif k == "retraction":
            tau = p["tau"]
            m["table"] = [[_point(a), _point(tau(a))] for a in tau.domain.points]
        elif k == "zero_diagonal":
            m["n"] = p["n"]
        elif k == "dense":
            m["matrix"] = encode_matrix(p["matrix"])
        out: dict[str, Any] = {"version": FORMAT_VERSION, "name": self.name}
        if self.space is not None:
            out["space"] = {"points": [_point(a) for a in self.space.points],
                            "basepoint": _point(self.space.basepoint)}
        else:
            out["signature"] = list(self.signature.blocks)
        out["map"] = m
        out["tolerance"] = self.tolerance.to_dict()
        out["seed"] = self.seed
        if self.expect:
            out["expect"] = dict(sorted(self.expect.items()))
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=False) + "\n"


def _point(a):
    if a is None or isinstance(a, (int, str)):
        return a
    return str(a)


def _require(cond, msg):
    if not cond:
        raise InstanceError(msg)


def parse_instance(data: dict, name: str | None = None) -> Instance:
    _require(isinstance(data, dict), "instance must be a JSON object")
    unknown = set(data) - _TOP_FIELDS
    _require(not unknown, f"unknown fields: {sorted(unknown)}")
    _require(data.get("version") == FORMAT_VERSION, f"unsupported version {data.get('version')!r}")
    _require(("signature" in data) != ("space" in data), "exactly one of signature / space is required")
    _require("map" in data and isinstance(data["map"], dict), "missing map")
    tol = Tolerance()
    if "tolerance" in data:
        t = data["tolerance"]
        _require(isinstance(t, dict) and set(t) <= {"eq_tol", "psd_tol", "rank_tol"}, "bad tolerance")
        try:
            tol = Tolerance(**{**tol.to_dict(), **{k: float(v) for k, v in t.items()}})
        except (TypeError, ValueError) as exc:
            raise InstanceError(str(exc)) from exc
    seed = data.get("seed", 0)
    _require(isinstance(seed, int) and seed >= 0, "seed must be a nonnegative integer")
    expect = data.get("expect", {})
    _require(isinstance(expect, dict) and all(isinstance(v, bool) for v in expect.values()),
             "expect must map names to booleans")

    sig = space = None
    if "signature" in data:
        blocks = data["signature"]
        _require(isinstance(blocks, list) and blocks and all(isinstance(n, int) and n >= 1 for n in blocks),
                 "signature must be a nonempty list of positive integers")
        sig = AlgebraSignature(blocks)
    else:
        s = data["space"]
        _require(isinstance(s, dict) and set(s) <= {"points", "basepoint"} and "points" in s, "bad space")
        try:
            space = FiniteSpace(s["points"], s.get("basepoint"))
        except (TypeError, ValueError) as exc:
            raise InstanceError(str(exc)) from exc

    m = data["map"]
    kind = m.get("kind")
    _require(kind in MAP_KINDS, f"unknown map kind {kind!r}")
    extra = set(m) - {"kind"} - _MAP_FIELDS[kind]
    _require(not extra, f"unknown map fields: {sorted(extra)}")
    missing = _MAP_FIELDS[kind] - set(m)
    _require(not missing, f"missing map fields: {sorted(missing)}")
    space_kinds = {"retraction", "antipodal"}
    if kind in space_kinds:
        _require(space is not None, f"{kind} needs a space")
    elif kind not in ("dense",):
        _require(sig is not None, f"{kind} needs a signature")

    params: dict[str, Any] = {}
    alg = sig if sig is not None else (space.finite_part.signature if space.basepoint is not None else space.signature)
    if kind == "pinching":
        params["projections"] = [decode_element(q, sig) for q in m["projections"]]
    elif kind == "average":
        params["unitaries"] = [decode_element(u, sig) for u in m["unitaries"]]
    elif kind in ("central", "corner"):
        key = "p" if kind == "central" else "e"
        params[key] = decode_element(m[key], sig)
    elif kind == "graph":
        A, B = AlgebraSignature(m["domain"]), AlgebraSignature(m["codomain"])
        _require(A.direct_sum(B) == sig, "graph domain + codomain must equal the signature")
        params["phi"] = OperatorMap(A, decode_matrix(m["matrix"], (B.dim, A.dim)), Provenance("dense"), B)
    elif kind == "retraction":
        table = m["table"]
        _require(isinstance(table, list) and all(isinstance(r, list) and len(r) == 2 for r in table),
                 "table must be a list of [point, image] pairs")
        mapping = {a: b for a, b in table}
        _require(set(mapping) == set(space.points) and len(table) == len(space),
                 "table must list every point exactly once")
        _require(all(b in mapping for b in mapping.values()), "table image outside the space")
        params["tau"] = SpaceMap.from_dict(space, mapping)
    elif kind == "antipodal":
        _require(space.basepoint is None and len(space) % 2 == 0, "antipodal needs an even space without basepoint")
    elif kind == "zero_diagonal":
        n = m["n"]
        _require(isinstance(n, int) and n >= 2, "n must be an integer >= 2")
        _require(sig == AlgebraSignature([n]), "zero_diagonal needs signature [n]")
        params["n"] = n
    elif kind == "dense":
        params["matrix"] = decode_matrix(m["matrix"], (alg.dim, alg.dim))
    return Instance(data.get("name") or name or "instance", kind, params, sig, space, tol, seed, expect)


def load_instance(path: str | Path) -> Instance:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InstanceError(f"{path}: {exc}") from exc
    return parse_instance(data, path.stem)


def save_instance(inst: Instance, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(inst.dumps())
    return path


# ---------------------------------------------------------------------------
# reports


def _jsonable(v):
    if isinstance(v, BlockMatrix):
        return {"element": encode_element(v)}
    if isinstance(v, np.ndarray):
        if np.iscomplexobj(v):
            return [encode_complex(z) for z in v.ravel()]
        return v.tolist()
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, complex):
        return encode_complex(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, SpaceMap):
        return [[_point(a), _point(v(a))] for a in v.domain.points]
    return v


def certificate_to_dict(cert: Certificate) -> dict:
    return {
        "property": cert.property,
        "verdict": cert.verdict,
        "reason": cert.reason,
        "seed": cert.seed,
        "tolerance": cert.tolerance.to_dict(),
        "checks": [
            {"name": c.name, "passed": bool(c.passed), "residual": float(c.residual),
             "threshold": float(c.threshold), "note": c.note}
            for c in cert.checks
        ],
        "witness": _jsonable(cert.witness),
        "scalars": _jsonable(cert.scalars),
        "extra": _jsonable(cert.extra),
    }


@dataclass
class Report:
    seed: int | None
    instances: list[dict] = field(default_factory=list)
    timing: dict[str, float] = field(default_factory=dict)

    def summary(self) -> dict:
        out = {"instances": len(self.instances), "passed": 0, "failed": 0, "hypothesis_violations": 0,
               "parse_errors": 0}
        for inst in self.instances:
            out[{"pass": "passed", "fail": "failed", "hypothesis": "hypothesis_violations",
                 "parse": "parse_errors"}[inst["status"]]] += 1
        return out

    def body(self) -> dict:
        return {"tool": "ncretract", "version": __version__, "seed": self.seed,
                "summary": self.summary(), "instances": self.instances}

    def body_json(self) -> str:
        return json.dumps(_jsonable(self.body()), indent=1, sort_keys=True) + "\n"

    def to_json(self) -> str:
        data = _jsonable(self.body())
        data["timing"] = {k: round(v, 6) for k, v in self.timing.items()}
        return json.dumps(data, indent=1, sort_keys=True) + "\n"
