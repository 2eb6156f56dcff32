"""RS codes with subfield evaluation points whose messages are restricted
to an evasive subspace W of F_q^{km}.

The decoder's list lies in shift + V with V a (k, m, m-r)-BTT subspace;
intersecting with W leaves an affine space of dimension at most s_W + 1.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .evasive import EvasiveWitness
from .gf import Fqm, unflatten_many
from .linalg import Subspace, affine_intersect, combine, subspace_sum
from .rs_subfield import (
    DEFAULT_ENUM_CAP,
    DecodeParams,
    EnumerationCapExceeded,
    RsSubfieldCode,
    _affine_points,
    _agreements,
    encode,
    list_decode_structured,
)


@dataclass(frozen=True)
class RestrictedCode:
    base: RsSubfieldCode
    witness: EvasiveWitness
    params: DecodeParams

    @property
    def W(self) -> Subspace:
        return self.witness.W

    @property
    def msg_basis(self) -> np.ndarray:
        return self.witness.W.basis

    @property
    def dim(self) -> int:
        return self.W.dim

    def rate(self) -> float:
        return self.dim / (self.base.n * self.base.m)


def build(base: RsSubfieldCode, witness: EvasiveWitness, params: DecodeParams) -> RestrictedCode:
    problems = []
    if witness.k * witness.m != base.k * base.m:
        problems.append(f"W lives in F_q^{witness.k * witness.m}, message space is F_q^{base.k * base.m}")
    if (witness.k, witness.m) != (base.k, base.m):
        problems.append(f"W blocks (k={witness.k}, m={witness.m}) must match the code (k={base.k}, m={base.m})")
    if witness.q != base.tower.q:
        problems.append(f"W is over F_{witness.q}, code symbols over F_{base.tower.q}")
    if witness.verified == "unverified":
        problems.append("W has not been verified")
    if witness.r < params.s - 1:
        problems.append(f"W has r={witness.r} < s-1 = {params.s - 1}")
    if problems:
        raise ValueError("; ".join(problems))
    params.check(base)
    return RestrictedCode(base, witness, params)


def message_to_coeffs(code: RestrictedCode, msg) -> list[Fqm]:
    msg = np.asarray(msg, dtype=np.int64)
    if msg.shape != (code.dim,):
        raise ValueError(f"message must have length dim(W) = {code.dim}, got {msg.shape}")
    F = code.base.tower.base
    if code.dim == 0:
        flat = np.zeros(code.W.ambient, dtype=np.int64)
    else:
        flat = combine(F, msg, code.msg_basis)
    return unflatten_many(code.base.tower, flat)


def encode_restricted(code: RestrictedCode, msg) -> list[Fqm]:
    return encode(code.base, message_to_coeffs(code, msg))


@dataclass(frozen=True)
class RestrictedDecode:
    messages: list  # F_q vectors (tuples) of length dim(W), sorted
    list_subspace_dim: int
    intersection_dim: int  # dim(V ∩ W)
    structured_dim: int  # dim(V)
    rank_m0: int


def list_decode_restricted(
    code: RestrictedCode,
    y: Sequence[Fqm],
    cap: int = DEFAULT_ENUM_CAP,
    timings: Optional[dict] = None,
) -> RestrictedDecode:
    base = code.base
    F = base.tower.base
    sl = list_decode_structured(base, y, code.params, timings)
    t0 = time.perf_counter()
    VW = None
    point = None
    if sl.shift is not None:
        point, VW = affine_intersect(sl.shift, sl.V, code.W)
    if VW is None:
        VW = Subspace.zero(F, code.W.ambient)
    if point is None:
        return RestrictedDecode([], 0, VW.dim, sl.V.dim, sl.rank_m0)
    span = subspace_sum(VW, Subspace.span(F, point[None, :], code.W.ambient))
    if F.q**VW.dim > cap:
        raise EnumerationCapExceeded(
            f"affine list space has q^{VW.dim} points, above the cap of {cap}; "
            "W does not evade the decoder's subspace at these parameters"
        )
    pts = _affine_points(F, point, VW, cap)
    keep = pts[_agreements(base, pts, y) >= code.params.t]
    piv = list(code.W.pivots)
    msgs = sorted(tuple(int(x) for x in row[piv]) for row in keep)
    if timings is not None:
        timings["prune"] = time.perf_counter() - t0
    return RestrictedDecode(msgs, span.dim, VW.dim, sl.V.dim, sl.rank_m0)


def restricted_brute_force(
    code: RestrictedCode, y: Sequence[Fqm], t: Optional[int] = None, cap: int = DEFAULT_ENUM_CAP
) -> list:
    """All restricted messages whose codewords agree with y in >= t places."""
    F = code.base.tower.base
    t = code.params.t if t is None else t
    n = code.W.ambient
    pts = _affine_points(F, np.zeros(n, dtype=np.int64), code.W, cap)
    keep = pts[_agreements(code.base, pts, y) >= t]
    piv = list(code.W.pivots)
    return sorted(tuple(int(x) for x in row[piv]) for row in keep)


def random_restricted_message(code: RestrictedCode, rng: np.random.Generator) -> np.ndarray:
    return code.base.tower.base.random(rng, size=code.dim)


def to_json(code: RestrictedCode) -> str:
    return json.dumps(
        {
            "field": code.base.tower.spec,
            "n": code.base.n,
            "k": code.base.k,
            "alphas": list(code.base.alphas),
            "params": code.params.to_dict(),
            "witness": code.witness.to_text(),
        },
        sort_keys=True,
    )
