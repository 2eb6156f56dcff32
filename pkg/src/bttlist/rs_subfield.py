"""Reed-Solomon codes over F_{q^m} with evaluation points in F_q, and a
linear-algebraic list decoder whose output is an affine shift of a BTT
subspace.

Messages are lists of k elements of F_{q^m} (polynomial coefficients,
lowest degree first).  The flattened message is the concatenation of the
coefficient vectors, a vector in F_q^{km}.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .gf import FieldTower, Fqm, flatten_many, linearized_op_matrix, unflatten_many
from .linalg import (
    BttMatrix,
    Subspace,
    btt_kernel_to_image,
    kernel_basis,
    rref,
    solve_particular,
)

DEFAULT_ENUM_CAP = 2**20


class EmptyList(Exception):
    """The functional equation has no solution, so no message can agree."""


class EnumerationCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class RsSubfieldCode:
    tower: FieldTower
    n: int
    k: int
    alphas: tuple[int, ...] = ()

    def __post_init__(self):
        q = self.tower.q
        if not self.alphas:
            object.__setattr__(self, "alphas", tuple(range(self.n)))
        if len(self.alphas) != self.n:
            raise ValueError(f"need {self.n} evaluation points, got {len(self.alphas)}")
        if not 1 <= self.k <= self.n <= q:
            raise ValueError(f"need 1 <= k <= n <= q, got k={self.k}, n={self.n}, q={q}")
        if len(set(self.alphas)) != self.n:
            raise ValueError("evaluation points must be distinct")
        if any(not 0 <= a < q for a in self.alphas):
            raise ValueError("evaluation points must lie in F_q")

    @property
    def m(self) -> int:
        return self.tower.m

    def generator_matrix(self) -> np.ndarray:
        """F_q matrix G (nm x km) with flatten(encode(f)) = G @ flatten(f)."""
        F = self.tower.base
        m, k = self.m, self.k
        G = np.zeros((self.n * m, k * m), dtype=np.int64)
        eye = np.eye(m, dtype=np.int64)
        for i, a in enumerate(self.alphas):
            for j in range(k):
                G[i * m : (i + 1) * m, j * m : (j + 1) * m] = F.mul[F.pow(a, j)][eye]
        return G


@dataclass(frozen=True)
class DecodeParams:
    s: int
    d: int
    t: int
    epsilon: Optional[float] = None

    def check(self, code: RsSubfieldCode) -> None:
        n, k, m = code.n, code.k, code.m
        problems = []
        if not 1 <= self.s <= m:
            problems.append(f"s={self.s} must lie in [1, m={m}]")
        if self.d < 0:
            problems.append(f"d={self.d} must be >= 0")
        if (self.s + 1) * (self.d + 1) + k - 1 <= n:
            problems.append(f"(s+1)(d+1)+k-1 = {(self.s + 1) * (self.d + 1) + k - 1} must exceed n={n}")
        if self.t <= self.d + k - 1:
            problems.append(f"t={self.t} must exceed d+k-1 = {self.d + k - 1}")
        if problems:
            raise ValueError("invalid decode parameters: " + "; ".join(problems))

    def to_dict(self) -> dict:
        return {"s": self.s, "d": self.d, "t": self.t, "epsilon": self.epsilon}

    @classmethod
    def from_dict(cls, obj: dict) -> "DecodeParams":
        return cls(int(obj["s"]), int(obj["d"]), int(obj["t"]), obj.get("epsilon"))


def choose_params(n: int, k: int, epsilon: float, m: int) -> DecodeParams:
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    s = math.ceil(1 / epsilon) + 1
    if s > m:
        raise ValueError(f"s = ceil(1/eps)+1 = {s} exceeds m={m}; increase m or epsilon")
    d = (n - k + 1) // (s + 1)
    return DecodeParams(s=s, d=d, t=d + k, epsilon=epsilon)


def encode(code: RsSubfieldCode, f: Sequence[Fqm]) -> list[Fqm]:
    if len(f) != code.k:
        raise ValueError(f"message must have {code.k} coefficients, got {len(f)}")
    T = code.tower
    out = []
    for a in code.alphas:
        acc = T.zero()
        for c in reversed(f):
            acc = T.add(T.scale(a, acc), tuple(c))
        out.append(acc)
    return out


def agreement(x: Sequence[Fqm], y: Sequence[Fqm]) -> int:
    return sum(1 for a, b in zip(x, y) if tuple(a) == tuple(b))


# -- interpolation ------------------------------------------------------------


@dataclass(frozen=True)
class QPolynomial:
    """Q = A_0 + A_1 Y_1 + ... + A_s Y_s, with X^u already divided out."""

    A: tuple[tuple[Fqm, ...], ...]
    u: int = 0

    @property
    def s(self) -> int:
        return len(self.A) - 1

    def coeff(self, l: int, i: int, tower: FieldTower) -> Fqm:
        A = self.A[l]
        return A[i] if i < len(A) else tower.zero()

    def residuals(self, code: RsSubfieldCode, y: Sequence[Fqm]) -> list[Fqm]:
        """Constraint values at each point for X^u * Q."""
        T = code.tower
        out = []
        for a, yi in zip(code.alphas, y):
            xu = T.base.pow(a, self.u)
            total = T.zero()
            for l, A in enumerate(self.A):
                val = _eval_poly(T, A, a)
                if l:
                    val = T.mul(val, T.frobenius(yi, l - 1))
                total = T.add(total, val)
            out.append(T.scale(xu, total))
        return out


def _eval_poly(T: FieldTower, coeffs: Sequence[Fqm], a: int) -> Fqm:
    acc = T.zero()
    for c in reversed(coeffs):
        acc = T.add(T.scale(a, acc), c)
    return acc


def _ext_kernel_vector(T: FieldTower, rows: list[list[Fqm]], ncols: int) -> list[Fqm]:
    """Nonzero kernel vector over F_{q^m}: first free variable 1, others 0."""
    A = [list(r) for r in rows]
    zero = T.zero()
    pivots = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(A)) if any(A[i][c])), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        inv = T.inv(A[r][c])
        A[r] = [T.mul(inv, x) if any(x) else zero for x in A[r]]
        for i in range(len(A)):
            if i != r and any(A[i][c]):
                f = A[i][c]
                A[i] = [T.sub(x, T.mul(f, y)) if any(y) else x for x, y in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
        if r == len(A):
            break
    free = [c for c in range(ncols) if c not in set(pivots)]
    if not free:
        raise ArithmeticError("interpolation system has a trivial kernel")
    f0 = free[0]
    x = [zero] * ncols
    x[f0] = T.one()
    for row, pc in enumerate(pivots):
        x[pc] = T.neg(A[row][f0])
    return x


def interpolate(code: RsSubfieldCode, y: Sequence[Fqm], params: DecodeParams) -> QPolynomial:
    if len(y) != code.n:
        raise ValueError(f"received word must have length {code.n}, got {len(y)}")
    params.check(code)
    T = code.tower
    s, d, k = params.s, params.d, code.k
    ncols = (d + k) + s * (d + 1)
    rows = []
    for a, yi in zip(code.alphas, y):
        ypow = [T.frobenius(tuple(yi), l) for l in range(s)]
        apow = [T.base.pow(a, j) for j in range(d + k)]
        row = [T.embed(apow[j]) for j in range(d + k)]
        for l in range(s):
            row.extend(T.scale(apow[j], ypow[l]) for j in range(d + 1))
        rows.append(row)
    x = _ext_kernel_vector(T, rows, ncols)
    A = [tuple(x[: d + k])]
    for l in range(s):
        off = d + k + l * (d + 1)
        A.append(tuple(x[off : off + d + 1]))
    # divide out the largest X^u dividing every A_l
    u = min(next((i for i, c in enumerate(Al) if any(c)), len(Al)) for Al in A)
    A = [Al[u:] for Al in A]
    return QPolynomial(tuple(A), u)


# -- structured system -----------------------------------------------------------


@dataclass(frozen=True)
class BttSystem:
    """Flattened affine system full @ flatten(f) = rhs and its BTT reduction."""

    full: np.ndarray
    rhs: np.ndarray
    reduced: BttMatrix
    rows: tuple[int, ...]
    blocks: tuple  # M_0..M_{k-1}, each m x m

    @property
    def rank_m0(self) -> int:
        return len(self.rows)


def derive_btt_system(code: RsSubfieldCode, Q: QPolynomial) -> BttSystem:
    T = code.tower
    F = T.base
    k, m, s = code.k, code.m, Q.s
    if not any(any(Q.coeff(l, 0, T)) for l in range(1, s + 1)):
        raise EmptyList("a_{l,0} = 0 for every l >= 1")
    blocks = []
    for i in range(k):
        blocks.append(linearized_op_matrix(T, [Q.coeff(l, i, T) for l in range(1, s + 1)]))
    full = np.zeros((k * m, k * m), dtype=np.int64)
    for i in range(k):
        for j in range(i + 1):
            full[i * m : (i + 1) * m, j * m : (j + 1) * m] = blocks[i - j]
    rhs = F.neg[flatten_many(T, [Q.coeff(0, i, T) for i in range(k)])]
    # greedy independent rows of M_0: the pivot columns of rref(M_0^T)
    _, rows = rref(F, blocks[0].T)
    sel = list(rows)
    reduced = BttMatrix(F, k, len(sel), m, tuple(B[sel] for B in blocks))
    return BttSystem(full, rhs, reduced, tuple(rows), tuple(blocks))


@dataclass(frozen=True)
class StructuredList:
    """Every candidate message flattens into shift + V.

    ``K`` is the kernel of the full unreduced system, a subspace of V that
    also contains every candidate's offset from the shift.
    """

    shift: Optional[np.ndarray]
    V: Subspace
    btt_form: BttMatrix
    K: Subspace
    rank_m0: int
    Q: Optional[QPolynomial] = None

    @property
    def empty(self) -> bool:
        return self.shift is None


def _empty_structured(code: RsSubfieldCode, Q) -> StructuredList:
    F = code.tower.base
    k, m = code.k, code.m
    Z = Subspace.zero(F, k * m)
    btt = BttMatrix(F, k, m, 0, tuple(np.zeros((m, 0), dtype=np.int64) for _ in range(k)))
    return StructuredList(None, Z, btt, Z, rank_m0=m, Q=Q)


def list_decode_structured(
    code: RsSubfieldCode,
    y: Sequence[Fqm],
    params: DecodeParams,
    timings: Optional[dict] = None,
) -> StructuredList:
    """``timings``, if given, receives wall-clock seconds per phase."""
    F = code.tower.base
    t0 = time.perf_counter()
    Q = interpolate(code, y, params)
    t1 = time.perf_counter()
    try:
        sysm = derive_btt_system(code, Q)
    except EmptyList:
        if timings is not None:
            timings.update(interpolate=t1 - t0, system=time.perf_counter() - t1)
        return _empty_structured(code, Q)
    n_amb = code.k * code.m
    btt_form = btt_kernel_to_image(sysm.reduced)
    V = btt_form.image()
    K = kernel_basis(F, sysm.full, n_amb)
    shift = solve_particular(F, sysm.full, sysm.rhs)
    if timings is not None:
        timings.update(interpolate=t1 - t0, system=time.perf_counter() - t1)
    return StructuredList(shift, V, btt_form, K, sysm.rank_m0, Q)


# -- pruning ----------------------------------------------------------------------


def _affine_points(F, shift: np.ndarray, V: Subspace, cap: int):
    count = F.q**V.dim
    if count > cap:
        raise EnumerationCapExceeded(f"{count} points (q^{V.dim}) exceed the cap of {cap}")
    if V.dim == 0:
        return shift[None, :].copy()
    digits = np.indices((F.q,) * V.dim).reshape(V.dim, -1).T
    pts = F.matmul(digits, V.basis)
    return F.add[pts, shift[None, :]]


def _agreements(code: RsSubfieldCode, flat_msgs: np.ndarray, y: Sequence[Fqm]) -> np.ndarray:
    F = code.tower.base
    G = code.generator_matrix()
    cw = F.matmul(flat_msgs, G.T).reshape(len(flat_msgs), code.n, code.m)
    target = np.array([tuple(v) for v in y], dtype=np.int64)[None, :, :]
    return np.all(cw == target, axis=2).sum(axis=1)


def _to_messages(code: RsSubfieldCode, flat: np.ndarray) -> list[list[Fqm]]:
    rows = sorted(tuple(int(x) for x in r) for r in flat)
    return [unflatten_many(code.tower, r) for r in rows]


def prune(
    code: RsSubfieldCode,
    y: Sequence[Fqm],
    t: int,
    shift: Optional[np.ndarray],
    V: Subspace,
    cap: int = DEFAULT_ENUM_CAP,
) -> list[list[Fqm]]:
    """Messages in shift + V with agreement >= t, sorted by flattened value."""
    if shift is None:
        return []
    F = code.tower.base
    pts = _affine_points(F, np.asarray(shift, dtype=np.int64), V, cap)
    keep = pts[_agreements(code, pts, y) >= t]
    return _to_messages(code, keep)


def decode_list(
    code: RsSubfieldCode, y: Sequence[Fqm], params: DecodeParams, cap: int = DEFAULT_ENUM_CAP
) -> list[list[Fqm]]:
    """Structured decode followed by pruning of shift + K (K inside V)."""
    sl = list_decode_structured(code, y, params)
    return prune(code, y, params.t, sl.shift, sl.K, cap)


def brute_force_list(
    code: RsSubfieldCode, y: Sequence[Fqm], t: int, cap: int = DEFAULT_ENUM_CAP
) -> list[list[Fqm]]:
    F = code.tower.base
    n_amb = code.k * code.m
    pts = _affine_points(F, np.zeros(n_amb, dtype=np.int64), Subspace.full(F, n_amb), cap)
    keep = pts[_agreements(code, pts, y) >= t]
    return _to_messages(code, keep)


def flatten_message(code: RsSubfieldCode, f: Sequence[Fqm]) -> np.ndarray:
    return flatten_many(code.tower, [tuple(c) for c in f])


def random_message(code: RsSubfieldCode, rng: np.random.Generator) -> list[Fqm]:
    return [code.tower.random(rng) for _ in range(code.k)]


def corrupt(
    code: RsSubfieldCode, c: Sequence[Fqm], e: int, rng: np.random.Generator
) -> list[Fqm]:
    """Replace exactly e random positions with uniformly random wrong symbols."""
    if not 0 <= e <= code.n:
        raise ValueError(f"error weight must lie in [0, {code.n}], got {e}")
    T = code.tower
    y = [tuple(x) for x in c]
    for i in rng.choice(code.n, size=e, replace=False):
        i = int(i)
        while True:
            v = T.random(rng)
            if v != y[i]:
                y[i] = v
                break
    return y


def in_affine(shift: Optional[np.ndarray], V: Subspace, x) -> bool:
    if shift is None:
        return False
    F = V.field
    return V.contains(F.sub[np.asarray(x, dtype=np.int64), shift])
