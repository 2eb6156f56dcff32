"""Subspace designs, periodic and BTT evasive subspaces.

An evasive subspace W of F_q^{km} meets every (k, m, r)-BTT (or periodic)
subspace in dimension at most s.  This module builds them three ways:
from explicit subspace designs (polynomials vanishing on disjoint orbits),
by randomized search checked against exhaustive enumeration, and by
composing and restricting smaller witnesses.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np

from .gf import GF, make_field, make_tower, prime_power
from .linalg import (
    Subspace,
    batch_matmul,
    batch_rank,
    format_matrix,
    gaussian_binomial,
    intersect,
    kernel_basis,
    parse_matrix,
    random_full_rank,
    standard_subspaces,
)

DEFAULT_CAP = 2**20
CHUNK = 4096


class BudgetExhausted(RuntimeError):
    def __init__(self, msg: str, best: Optional["EvasiveWitness"] = None):
        super().__init__(msg)
        self.best = best


class CapExceeded(RuntimeError):
    pass


class ChainError(ValueError):
    pass


# -- admissible sets and subspace designs -------------------------------------


@dataclass(frozen=True)
class AdmissibleSet:
    q: int
    design_d: int
    t: int
    alphas: tuple  # elements of F_{q^design_d} as coefficient tuples
    excluded: tuple  # the set B
    gamma: int

    def orbit(self, alpha) -> set:
        T = make_tower(*prime_power(self.q), self.design_d)
        g = T.embed(self.gamma)
        out = set()
        for j in range(self.design_d):
            a = T.frobenius(alpha, j)
            for i in range(self.t):
                out.add(T.mul(a, T.pow(g, i)))
        return out


def _excluded(T, units) -> list:
    """Units a with a^(q^i - 1) in F_q for some 0 < i < degree."""
    q = T.q
    bad = []
    for a in units:
        for i in range(1, T.m):
            if T.in_subfield(T.pow(a, q**i - 1)):
                bad.append(a)
                break
    return bad


def admissible_set(q: int, design_d: int, t: int) -> AdmissibleSet:
    if design_d < 1:
        raise ValueError(f"design_d must be >= 1, got {design_d}")
    if not 1 <= t <= q - 1:
        raise ValueError(f"need 1 <= t <= q-1 = {q - 1}, got t={t}")
    p, e = prime_power(q)
    T = make_tower(p, e, design_d)
    units = [x for x in T.elements() if any(x)]
    bad = set(_excluded(T, units))
    seen = set()
    reps = []
    scalars = [T.embed(c) for c in range(1, q)]
    for a in sorted(units):
        if a in bad or a in seen:
            continue
        cls = {T.mul(T.frobenius(a, j), c) for j in range(design_d) for c in scalars}
        seen |= cls
        reps.append(min(cls))
    g = T.embed(T.gamma)
    gt = T.pow(g, t)
    alphas = []
    for a0 in sorted(reps):
        x = a0
        for _ in range((q - 1) // t):
            alphas.append(x)
            x = T.mul(x, gt)
    return AdmissibleSet(q, design_d, t, tuple(alphas), tuple(sorted(bad)), T.gamma)


@dataclass(frozen=True)
class SubspaceDesign:
    q: int
    m: int
    design_d: int
    t: int
    r: int
    s: int
    alphas: tuple
    H: tuple  # Subspace per alpha, each in F_q^m
    constraints: tuple  # (design_d*t) x m matrix per alpha

    @property
    def field(self) -> GF:
        return make_field(self.q)

    def __len__(self):
        return len(self.H)


def _vanishing_constraints(q: int, m: int, design_d: int, points) -> np.ndarray:
    """Rows: F_q coordinates of P(beta) as a linear function of P's coefficients."""
    T = make_tower(*prime_power(q), design_d)
    rows = []
    for beta in points:
        cols = [T.pow(beta, j) for j in range(m)]
        C = np.array(cols, dtype=np.int64).T  # design_d x m
        rows.append(C)
    return np.vstack(rows)


def gk_design(q: int, m: int, design_d: int, t: int, r: int) -> SubspaceDesign:
    problems = []
    if t < 1:
        problems.append(f"t={t} must be >= 1")
    if r < 0:
        problems.append(f"r={r} must be >= 0")
    if r > t:
        problems.append(f"r <= t violated (r={r}, t={t})")
    if t > m:
        problems.append(f"t <= m violated (t={t}, m={m})")
    if m >= q:
        problems.append(f"m < q violated (m={m}, q={q})")
    if problems:
        raise ValueError("; ".join(problems))
    A = admissible_set(q, design_d, t)
    T = make_tower(*prime_power(q), design_d)
    g = T.embed(A.gamma)
    F = make_field(q)
    H, C = [], []
    for a in A.alphas:
        pts = [T.mul(a, T.pow(g, i)) for i in range(t)]
        M = _vanishing_constraints(q, m, design_d, pts)
        M.setflags(write=False)
        C.append(M)
        H.append(kernel_basis(F, M, m))
    s = ((m - 1) * r) // (design_d * (t - r + 1))
    return SubspaceDesign(q, m, design_d, t, r, s, A.alphas, tuple(H), tuple(C))


@lru_cache(maxsize=64)
def _rref_bases(q: int, n: int, r: int) -> np.ndarray:
    F = make_field(q)
    bases = list(standard_subspaces(F, n, r))
    out = np.array(bases, dtype=np.int64).reshape(len(bases), r, n)
    out.setflags(write=False)
    return out


def verify_subspace_design(design: SubspaceDesign, r: Optional[int] = None, cap: int = DEFAULT_CAP) -> int:
    """Exact max over subspaces V of dim <= r of sum_alpha dim(V ∩ H_alpha).

    Only dim exactly min(r, m) is enumerated: the sum is monotone in V.
    """
    r = design.r if r is None else r
    q, m = design.q, design.m
    r = min(r, m)
    if r == 0 or not design.H:
        return 0
    count = gaussian_binomial(m, r, q)
    if count > cap:
        raise CapExceeded(f"{count} subspaces of dimension {r} exceed the cap of {cap}")
    F = make_field(q)
    bases = _rref_bases(q, m, r)
    total = np.zeros(len(bases), dtype=np.int64)
    for M in design.constraints:
        for lo in range(0, len(bases), CHUNK):
            chunk = bases[lo : lo + CHUNK]
            prod = batch_matmul(F, M[None, :, :], np.transpose(chunk, (0, 2, 1)))
            total[lo : lo + CHUNK] += r - batch_rank(F, prod)
    return int(total.max())


# -- witnesses ----------------------------------------------------------------------


VERIFIED_MODES = ("exhaustive", "sampled", "unverified")


@dataclass(frozen=True)
class EvasiveWitness:
    W: Subspace
    kind: str  # "btt" or "periodic"
    k: int
    m: int
    r: int
    s: int
    codim_budget: int
    verified: str = "unverified"
    trials: int = 0
    measured: Optional[int] = None
    source: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("btt", "periodic"):
            raise ValueError(f"kind must be 'btt' or 'periodic', got {self.kind!r}")
        if self.verified not in VERIFIED_MODES:
            raise ValueError(f"verified must be one of {VERIFIED_MODES}")
        if self.W.ambient != self.k * self.m:
            raise ValueError(f"W has ambient {self.W.ambient}, expected k*m = {self.k * self.m}")

    @property
    def q(self) -> int:
        return self.W.field.q

    @property
    def codim(self) -> int:
        return self.W.codim

    def tightened(self) -> "EvasiveWitness":
        """Replace the claimed s by the exhaustively measured one."""
        if self.verified != "exhaustive" or self.measured is None:
            return self
        return replace(self, s=self.measured)

    def header(self) -> dict:
        return {
            "q": self.q,
            "k": self.k,
            "m": self.m,
            "r": self.r,
            "s": self.s,
            "kind": self.kind,
            "codim": self.codim,
            "codim_budget": self.codim_budget,
            "verified": self.verified,
            "trials": self.trials,
            "measured": self.measured,
            "source": self.source,
            "meta": self.meta,
        }

    def to_text(self) -> str:
        return json.dumps(self.header(), sort_keys=True) + "\n" + format_matrix(self.W.field, self.W.basis)

    @classmethod
    def from_text(cls, text: str) -> "EvasiveWitness":
        head, _, body = text.partition("\n")
        try:
            h = json.loads(head)
        except json.JSONDecodeError as exc:
            raise ValueError(f"bad witness header: {exc}") from None
        F = make_field(int(h["q"]))
        _, B = parse_matrix(body, F)
        n = int(h["k"]) * int(h["m"])
        if B.shape[1] != n:
            raise ValueError(f"basis has {B.shape[1]} columns, header says k*m = {n}")
        return cls(
            Subspace.span(F, B, n),
            h["kind"],
            int(h["k"]),
            int(h["m"]),
            int(h["r"]),
            int(h["s"]),
            int(h["codim_budget"]),
            h.get("verified", "unverified"),
            int(h.get("trials", 0)),
            h.get("measured"),
            h.get("source", ""),
            h.get("meta", {}),
        )

    def same_subspace(self, other: "EvasiveWitness") -> bool:
        return self.W == other.W and (self.k, self.m, self.r, self.s, self.kind) == (
            other.k,
            other.m,
            other.r,
            other.s,
            other.kind,
        )


# -- enumeration of BTT / periodic matrices ---------------------------------------------


def _digits(q: int, lo: int, hi: int, length: int) -> np.ndarray:
    nums = np.arange(lo, hi, dtype=np.int64)
    if length == 0:
        return np.zeros((hi - lo, 0), dtype=np.int64)
    powers = q ** np.arange(length, dtype=np.int64)
    return (nums[:, None] // powers[None, :]) % q


def _assemble_btt(blocks: np.ndarray) -> np.ndarray:
    """blocks (N, k, m, r) -> (N, km, kr)."""
    N, k, m, r = blocks.shape
    M = np.zeros((N, k * m, k * r), dtype=np.int64)
    for i in range(k):
        for j in range(i + 1):
            M[:, i * m : (i + 1) * m, j * r : (j + 1) * r] = blocks[:, i - j]
    return M


def _assemble_periodic(diag: np.ndarray, below: np.ndarray, k: int) -> np.ndarray:
    """diag (N, m, r); below (N, k(k-1)/2, m, r) in row-major (i > j) order."""
    N, m, r = diag.shape
    M = np.zeros((N, k * m, k * r), dtype=np.int64)
    idx = 0
    for i in range(k):
        M[:, i * m : (i + 1) * m, i * r : (i + 1) * r] = diag
        for j in range(i):
            M[:, i * m : (i + 1) * m, j * r : (j + 1) * r] = below[:, idx]
            idx += 1
    return M


def enumeration_count(q: int, k: int, m: int, r: int, kind: str = "btt", mode: str = "canonical") -> int:
    """Number of candidate matrices the exhaustive verifier visits."""
    nblocks = (k - 1) if kind == "btt" else k * (k - 1) // 2
    if mode == "canonical":
        return gaussian_binomial(m, r, q) * q ** (nblocks * (m - r) * r)
    if mode == "raw":
        return q ** ((nblocks + 1) * m * r)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class _Job:
    q: int
    k: int
    m: int
    r: int
    kind: str
    mode: str
    H: np.ndarray
    basis_idx: int
    lo: int
    hi: int
    stop_above: Optional[int]


def _canonical_chunk(F: GF, k, m, r, kind, basis: np.ndarray, piv, lo, hi) -> np.ndarray:
    D = basis.T  # m x r, identity on pivot rows
    free_rows = [i for i in range(m) if i not in set(piv)]
    nblocks = (k - 1) if kind == "btt" else k * (k - 1) // 2
    L = nblocks * len(free_rows) * r
    dig = _digits(F.q, lo, hi, L).reshape(hi - lo, nblocks, len(free_rows), r)
    lower = np.zeros((hi - lo, nblocks, m, r), dtype=np.int64)
    lower[:, :, free_rows, :] = dig
    N = hi - lo
    if kind == "btt":
        blocks = np.concatenate([np.broadcast_to(D, (N, 1, m, r)), lower], axis=1)
        return _assemble_btt(blocks)
    return _assemble_periodic(np.broadcast_to(D, (N, m, r)), lower, k)


def _raw_chunk(F: GF, k, m, r, kind, lo, hi) -> np.ndarray:
    nblocks = (k - 1) if kind == "btt" else k * (k - 1) // 2
    dig = _digits(F.q, lo, hi, (nblocks + 1) * m * r).reshape(hi - lo, nblocks + 1, m, r)
    full = batch_rank(F, dig[:, 0]) == min(m, r)
    dig = dig[full]
    if kind == "btt":
        return _assemble_btt(dig)
    return _assemble_periodic(dig[:, 0], dig[:, 1:], k)


def _chunk_max(F: GF, H: np.ndarray, Ms: np.ndarray, r_total: int) -> int:
    if len(Ms) == 0:
        return -1
    if H.shape[0] == 0:
        return r_total
    HM = batch_matmul(F, H[None, :, :], Ms)
    return int((r_total - batch_rank(F, HM)).max())


def _run_job(job: _Job) -> int:
    F = make_field(job.q)
    r_total = job.k * job.r
    if job.mode == "canonical":
        bases = _rref_bases(job.q, job.m, job.r)
        B = bases[job.basis_idx]
        piv = tuple(int(np.flatnonzero(row)[0]) for row in B)
        Ms = _canonical_chunk(F, job.k, job.m, job.r, job.kind, B, piv, job.lo, job.hi)
    else:
        Ms = _raw_chunk(F, job.k, job.m, job.r, job.kind, job.lo, job.hi)
    return _chunk_max(F, job.H, Ms, r_total)


@dataclass(frozen=True)
class VerifyResult:
    max_dim: int
    mode: str
    candidates: int
    complete: bool = True  # False when stopped early

    def __int__(self):
        return self.max_dim


def _jobs_for(q, k, m, r, kind, mode, H, stop_above) -> list[_Job]:
    jobs = []
    if mode == "canonical":
        nb = len(_rref_bases(q, m, r))
        rest = enumeration_count(q, k, m, r, kind, "canonical") // max(nb, 1)
        for b in range(nb):
            for lo in range(0, rest, CHUNK):
                jobs.append(_Job(q, k, m, r, kind, mode, H, b, lo, min(rest, lo + CHUNK), stop_above))
    else:
        total = enumeration_count(q, k, m, r, kind, "raw")
        for lo in range(0, total, CHUNK):
            jobs.append(_Job(q, k, m, r, kind, mode, H, 0, lo, min(total, lo + CHUNK), stop_above))
    return jobs


def max_intersection(
    W: Subspace,
    k: int,
    m: int,
    r: int,
    kind: str = "btt",
    mode: str = "canonical",
    cap: int = DEFAULT_CAP,
    trials: int = 1000,
    seed: int = 0,
    stop_above: Optional[int] = None,
    jobs: int = 1,
) -> VerifyResult:
    """Max of dim(V ∩ W) over (k, m, r)-BTT or periodic subspaces V.

    Modes: ``canonical`` enumerates one matrix per orbit of column
    operations that fix the image (exact); ``raw`` enumerates every first
    block column with full-rank leading block (exact, slower); ``sampled``
    draws ``trials`` uniformly random matrices (a lower bound only).
    """
    if W.ambient != k * m:
        raise ValueError(f"W has ambient {W.ambient}, expected k*m = {k * m}")
    if kind not in ("btt", "periodic"):
        raise ValueError(f"kind must be 'btt' or 'periodic', got {kind!r}")
    if not 0 <= r <= m:
        raise ValueError(f"need 0 <= r <= m, got r={r}, m={m}")
    F = W.field
    q = F.q
    if r == 0:
        return VerifyResult(0, mode, 0)
    H = W.constraints()
    if mode == "sampled":
        rng = np.random.default_rng(seed)
        best = -1
        done = 0
        while done < trials:
            n = min(CHUNK, trials - done)
            diag = np.array([random_full_rank(F, m, r, rng) for _ in range(n)])
            nblocks = (k - 1) if kind == "btt" else k * (k - 1) // 2
            lower = F.random(rng, (n, nblocks, m, r))
            if kind == "btt":
                Ms = _assemble_btt(np.concatenate([diag[:, None], lower], axis=1))
            else:
                Ms = _assemble_periodic(diag, lower, k)
            best = max(best, _chunk_max(F, H, Ms, k * r))
            done += n
            if stop_above is not None and best > stop_above:
                return VerifyResult(best, mode, done, complete=False)
        return VerifyResult(best, mode, trials)
    if mode not in ("canonical", "raw"):
        raise ValueError(f"unknown mode {mode!r}")
    count = enumeration_count(q, k, m, r, kind, mode)
    if count > cap:
        raise CapExceeded(
            f"exhaustive {mode} enumeration needs {count} candidates, above the cap of {cap}"
        )
    job_list = _jobs_for(q, k, m, r, kind, mode, H, stop_above)
    best = -1
    if jobs > 1 and len(job_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            for val in ex.map(_run_job, job_list):
                best = max(best, val)
        complete = True
    else:
        complete = True
        for job in job_list:
            best = max(best, _run_job(job))
            if stop_above is not None and best > stop_above:
                complete = False
                break
    return VerifyResult(best, mode, count, complete)


def verify_btt_evasive(W: Subspace, k: int, m: int, r: int, **kw) -> VerifyResult:
    return max_intersection(W, k, m, r, kind="btt", **kw)


def verify_periodic_evasive(W: Subspace, k: int, m: int, r: int, **kw) -> VerifyResult:
    return max_intersection(W, k, m, r, kind="periodic", **kw)


def verify_witness(w: EvasiveWitness, mode: str = "canonical", **kw) -> EvasiveWitness:
    """Rerun the verifier and record the measured maximum."""
    res = max_intersection(w.W, w.k, w.m, w.r, kind=w.kind, mode=mode, **kw)
    verified = "sampled" if mode == "sampled" else "exhaustive"
    return replace(w, verified=verified, trials=res.candidates if mode == "sampled" else 0, measured=res.max_dim)


def certify(W: Subspace, k: int, m: int, r: int, kind: str = "btt", **kw) -> EvasiveWitness:
    """Witness for an arbitrary W with s set to its exact measured value."""
    res = max_intersection(W, k, m, r, kind=kind, mode="canonical", **kw)
    return EvasiveWitness(
        W, kind, k, m, r, res.max_dim, W.codim, "exhaustive", 0, res.max_dim, source="certify"
    )


# -- constructions ------------------------------------------------------------------


def design_to_periodic_evasive(design: SubspaceDesign, k: int) -> EvasiveWitness:
    if len(design) < k:
        raise ValueError(
            f"design has {len(design)} members but {k} blocks are needed; enlarge q^design_d or compose"
        )
    F = make_field(design.q)
    m = design.m
    n = k * m
    rows = []
    for i, Hi in enumerate(design.H[:k]):
        for v in Hi.basis:
            x = np.zeros(n, dtype=np.int64)
            x[i * m : (i + 1) * m] = v
            rows.append(x)
    W = Subspace.span(F, np.array(rows, dtype=np.int64).reshape(-1, n), n)
    return EvasiveWitness(
        W,
        "periodic",
        k,
        m,
        design.r,
        design.s,
        k * design.design_d * design.t,
        source="design",
        meta={"design_d": design.design_d, "t": design.t},
    )


def _codim_target(epsilon: float, n: int) -> int:
    return math.ceil(epsilon * n - 1e-9)


def search_btt_evasive(
    q: int,
    k: int,
    m: int,
    r: int,
    epsilon: float,
    seed: int = 0,
    budget: int = 10_000,
    cap: int = DEFAULT_CAP,
    mode: str = "canonical",
    jobs: int = 1,
) -> EvasiveWitness:
    """Random subspaces of co-dimension ceil(eps*k*m) until one meets every
    (k, m, r)-BTT subspace in dimension <= ceil(2r/eps)."""
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if r < 1 or r > m:
        raise ValueError(f"need 1 <= r <= m, got r={r}, m={m}")
    if r > epsilon * m / 2 + 1e-9:
        raise ValueError(f"need r <= eps*m/2 = {epsilon * m / 2:g}, got r={r}")
    F = make_field(q)
    n = k * m
    codim = _codim_target(epsilon, n)
    target = math.ceil(2 * r / epsilon - 1e-9)
    count = enumeration_count(q, k, m, r, "btt", "canonical" if mode == "canonical" else "raw")
    if mode != "sampled" and count > cap:
        raise CapExceeded(f"verification needs {count} candidates, above the cap of {cap}")
    best: Optional[EvasiveWitness] = None
    for idx in range(budget):
        rng = np.random.default_rng([seed, idx])
        Hm = random_full_rank(F, codim, n, rng) if codim else np.zeros((0, n), dtype=np.int64)
        W = kernel_basis(F, Hm, n)
        res = max_intersection(W, k, m, r, "btt", mode, cap, stop_above=target, jobs=jobs, seed=seed)
        w = EvasiveWitness(
            W,
            "btt",
            k,
            m,
            r,
            target,
            codim,
            "sampled" if mode == "sampled" else "exhaustive",
            res.candidates if mode == "sampled" else 0,
            res.max_dim,
            source="search",
            meta={"seed": seed, "candidate": idx},
        )
        if res.max_dim <= target:
            return w
        if best is None or res.max_dim < best.measured:
            best = w
    raise BudgetExhausted(
        f"no candidate passed within {budget} tries; best measured max "
        f"{best.measured if best else None} > s={target}",
        best,
    )


def product(W: Subspace, copies: int) -> Subspace:
    """W x W x ... x W inside F_q^{copies * ambient}."""
    F = W.field
    n = W.ambient
    rows = []
    for c in range(copies):
        for v in W.basis:
            x = np.zeros(copies * n, dtype=np.int64)
            x[c * n : (c + 1) * n] = v
            rows.append(x)
    return Subspace.span(F, np.array(rows, dtype=np.int64).reshape(-1, copies * n), copies * n)


def compose(inner: EvasiveWitness, outer: EvasiveWitness) -> EvasiveWitness:
    """W ∘ W' = W^{k'} ∩ W', a (k'k, m, r, s')-BTT evasive subspace."""
    if outer.kind != "periodic":
        raise ChainError(f"outer witness must be periodic, got {outer.kind}")
    if outer.m != inner.k * inner.m:
        raise ChainError(
            f"outer block length m'={outer.m} must equal inner k*m = {inner.k}*{inner.m} = {inner.k * inner.m}"
        )
    if inner.s > outer.r:
        raise ChainError(f"inner s={inner.s} exceeds outer r={outer.r}")
    if inner.q != outer.q:
        raise ChainError(f"field mismatch: inner q={inner.q}, outer q={outer.q}")
    kp = outer.k
    W = intersect(product(inner.W, kp), outer.W)
    return EvasiveWitness(
        W,
        "btt",
        kp * inner.k,
        inner.m,
        inner.r,
        outer.s,
        inner.codim_budget * kp + outer.codim_budget,
        source="compose",
        meta={"inner": [inner.k, inner.m, inner.r, inner.s], "outer": [outer.k, outer.m, outer.r, outer.s]},
    )


def restrict(w: EvasiveWitness, k: int) -> EvasiveWitness:
    """W ∩ F_q^{km}, embedding x -> (0, ..., 0, x) as the last k blocks."""
    if not 1 <= k <= w.k:
        raise ChainError(f"cannot restrict {w.k} blocks to {k}")
    if k == w.k:
        return w
    F = w.W.field
    m = w.m
    pad = (w.k - k) * m
    n = k * m
    E = np.zeros((n, w.k * m), dtype=np.int64)
    E[np.arange(n), pad + np.arange(n)] = 1
    # x in result  <=>  H_W (embedding of x) = 0
    Hw = w.W.constraints()
    W = kernel_basis(F, Hw[:, pad:], n)
    return replace(
        w,
        W=W,
        k=k,
        verified="unverified",
        trials=0,
        measured=None,
        source="restrict",
        meta={"from_k": w.k},
    )


def full_periodic(q: int, k: int, m: int, r: int) -> EvasiveWitness:
    """The whole space as a (k, m, r, kr)-periodic witness (used when k = 1)."""
    F = make_field(q)
    return EvasiveWitness(Subspace.full(F, k * m), "periodic", k, m, r, k * r, 0, source="full")


def _outer_design(q: int, blocks: int, m_out: int, r_out: int, eps_level: float) -> SubspaceDesign:
    if m_out >= q:
        raise ValueError(f"outer design over F_q^{m_out} needs q > {m_out}, got q={q}")
    hi = min(m_out, q - 1, math.floor(eps_level * m_out + 1e-9))
    for t in range(hi, r_out - 1, -1):
        if (q - 1) // t >= blocks:
            return gk_design(q, m_out, 1, t, r_out)
    raise ValueError(
        f"no t in [{r_out}, {hi}] gives {blocks} design members over F_{q} "
        f"(need floor((q-1)/t) >= {blocks})"
    )


def two_level_construct(
    q: int,
    k: int,
    m: int,
    r: int,
    epsilon: float,
    k1: int,
    k2: int,
    level_epsilon: Optional[float] = None,
    seed: int = 0,
    budget: int = 10_000,
    cap: int = DEFAULT_CAP,
    jobs: int = 1,
) -> EvasiveWitness:
    """Inner searched witness on k1 blocks, then up to two design-based
    periodic outer levels, padding and restricting when k is not a
    multiple of the block counts."""
    eps_l = epsilon / 6 if level_epsilon is None else level_epsilon
    if k < 1 or k1 < 1 or k2 < 1:
        raise ValueError("k, k1 and k2 must be positive")
    if k < k1:
        w = search_btt_evasive(q, k, m, r, eps_l, seed, budget, cap, jobs=jobs)
        return replace(w, source="two-level", meta={**w.meta, "case": "direct"})
    try:
        w1 = search_btt_evasive(q, k1, m, r, eps_l, seed, budget, cap, jobs=jobs).tightened()
    except ValueError as exc:
        raise ValueError(f"inner level (k1={k1}) infeasible: {exc}") from None
    k2p = min(k2, math.ceil(k / k1))
    if k2p == 1:
        level2 = w1
    else:
        try:
            d2 = _outer_design(q, k2p, k1 * m, w1.s, eps_l)
        except ValueError as exc:
            raise ValueError(f"second level infeasible: {exc}") from None
        level2 = compose(w1, design_to_periodic_evasive(d2, k2p))
    if k <= k1 * k2:
        out = restrict(level2, k) if level2.k > k else level2
        case = "exact" if level2.k == k else "padded"
        return replace(out, source="two-level", meta={"case": case, "k1": k1, "k2": k2p})
    k3 = math.ceil(k / (k1 * k2))
    try:
        d3 = _outer_design(q, k3, level2.k * m, level2.s, eps_l)
    except ValueError as exc:
        raise ValueError(f"third level infeasible: {exc}") from None
    level3 = compose(level2, design_to_periodic_evasive(d3, k3))
    out = restrict(level3, k) if level3.k > k else level3
    return replace(out, source="two-level", meta={"case": "two-step", "k1": k1, "k2": k2, "k3": k3})
