"""Dense linear algebra over F_q, subspaces, and block-triangular-Toeplitz
(BTT) matrices.

Matrices are 2-D int64 numpy arrays whose entries are F_q ints (see
:mod:`bttlist.gf`); every routine takes the field explicitly.  Vectors are
1-D arrays and act as columns in ``matrix @ vector``.  Subspaces keep their
basis as the rows of a reduced row echelon matrix, so two subspaces are
equal exactly when their bases are equal.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .gf import GF


class BttValidationError(ValueError):
    """Raised when a matrix fails one or more of the BTT conditions."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


def _as_matrix(M, cols: Optional[int] = None) -> np.ndarray:
    M = np.asarray(M, dtype=np.int64)
    if M.ndim == 1 and M.size == 0:
        M = M.reshape(0, cols or 0)
    if M.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {M.shape}")
    return M


def rref(F: GF, M) -> tuple[np.ndarray, tuple[int, ...]]:
    """Reduced row echelon form and pivot columns.

    The returned matrix has the same shape as ``M``; rows past the rank
    are zero.
    """
    A = _as_matrix(M).copy()
    rows, cols = A.shape
    pivots = []
    r = 0
    add, mul, inv = F.add, F.mul, F.inv
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(A[r:, c])
        if nz.size == 0:
            continue
        p = r + nz[0]
        if p != r:
            A[[r, p]] = A[[p, r]]
        A[r] = mul[inv[A[r, c]]][A[r]]
        factors = F.neg[A[:, c]]
        factors[r] = 0
        others = np.flatnonzero(factors)
        if others.size:
            A[others] = add[A[others], mul[factors[others, None], A[r][None, :]]]
        pivots.append(c)
        r += 1
    return A, tuple(pivots)


def rank(F: GF, M) -> int:
    return len(rref(F, M)[1])


def kernel_matrix(F: GF, M, cols: Optional[int] = None) -> np.ndarray:
    """Rows spanning {x : M x = 0}; the standard free-variable basis."""
    M = _as_matrix(M, cols)
    n = M.shape[1]
    R, pivots = rref(F, M)
    free = [c for c in range(n) if c not in set(pivots)]
    K = np.zeros((len(free), n), dtype=np.int64)
    for i, f in enumerate(free):
        K[i, f] = 1
        for row, pc in enumerate(pivots):
            K[i, pc] = F.neg[R[row, f]]
    return K


def kernel_basis(F: GF, M, cols: Optional[int] = None) -> "Subspace":
    M = _as_matrix(M, cols)
    return Subspace.span(F, kernel_matrix(F, M), M.shape[1])


def solve_particular(F: GF, M, rhs) -> Optional[np.ndarray]:
    """One solution of ``M x = rhs`` (free variables set to 0), or None."""
    M = _as_matrix(M)
    rhs = np.asarray(rhs, dtype=np.int64)
    if rhs.shape != (M.shape[0],):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({M.shape[0]},)")
    n = M.shape[1]
    R, pivots = rref(F, np.hstack([M, rhs[:, None]]))
    if pivots and pivots[-1] == n:
        return None
    x = np.zeros(n, dtype=np.int64)
    for row, pc in enumerate(pivots):
        x[pc] = R[row, n]
    return x


def matvec(F: GF, M, v) -> np.ndarray:
    return F.matmul(_as_matrix(M), np.asarray(v, dtype=np.int64))


def vec_add(F: GF, u, v) -> np.ndarray:
    return F.add[np.asarray(u, dtype=np.int64), np.asarray(v, dtype=np.int64)]


def vec_sub(F: GF, u, v) -> np.ndarray:
    return F.sub[np.asarray(u, dtype=np.int64), np.asarray(v, dtype=np.int64)]


def combine(F: GF, coeffs, rows) -> np.ndarray:
    """sum_i coeffs[i] * rows[i]."""
    rows = _as_matrix(rows)
    return F.matmul(np.asarray(coeffs, dtype=np.int64)[None, :], rows)[0]


@dataclass(frozen=True, eq=False)
class Subspace:
    """Subspace of F_q^n held as an RREF row basis."""

    field: GF
    ambient: int
    basis: np.ndarray
    pivots: tuple[int, ...]

    @classmethod
    def span(cls, F: GF, vectors, ambient: Optional[int] = None) -> "Subspace":
        V = np.asarray(vectors, dtype=np.int64)
        if V.size == 0:
            n = ambient if ambient is not None else (V.shape[-1] if V.ndim == 2 else 0)
            return cls(F, n, np.zeros((0, n), dtype=np.int64), ())
        if V.ndim == 1:
            V = V[None, :]
        if ambient is not None and V.shape[1] != ambient:
            raise ValueError(f"vectors have length {V.shape[1]}, ambient is {ambient}")
        R, piv = rref(F, V)
        basis = R[: len(piv)].copy()
        basis.setflags(write=False)
        return cls(F, V.shape[1], basis, piv)

    @classmethod
    def zero(cls, F: GF, n: int) -> "Subspace":
        return cls.span(F, np.zeros((0, n), dtype=np.int64), n)

    @classmethod
    def full(cls, F: GF, n: int) -> "Subspace":
        return cls.span(F, np.eye(n, dtype=np.int64), n)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def codim(self) -> int:
        return self.ambient - self.dim

    def constraints(self) -> np.ndarray:
        """Matrix H with this subspace equal to ker(H)."""
        return kernel_matrix(self.field, self.basis, self.ambient)

    def contains(self, v) -> bool:
        v = np.asarray(v, dtype=np.int64)
        if v.shape != (self.ambient,):
            raise ValueError(f"vector length {v.shape} does not match ambient {self.ambient}")
        if self.dim == 0:
            return not v.any()
        coords = v[list(self.pivots)]
        return bool(np.array_equal(combine(self.field, coords, self.basis), v))

    def coordinates(self, v) -> np.ndarray:
        """Coordinates of ``v`` in the RREF basis (v must lie in the span)."""
        v = np.asarray(v, dtype=np.int64)
        if not self.contains(v):
            raise ValueError("vector is not in the subspace")
        return v[list(self.pivots)].copy()

    def elements(self) -> Iterator[np.ndarray]:
        """Every vector of the subspace; q**dim of them."""
        F = self.field
        for coeffs in itertools.product(range(F.q), repeat=self.dim):
            if self.dim:
                yield combine(F, coeffs, self.basis)
            else:
                yield np.zeros(self.ambient, dtype=np.int64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Subspace):
            return NotImplemented
        return (
            self.field.q == other.field.q
            and self.ambient == other.ambient
            and np.array_equal(self.basis, other.basis)
        )

    def __hash__(self):
        return hash((self.field.q, self.ambient, self.basis.tobytes()))

    def __le__(self, other: "Subspace") -> bool:
        return all(other.contains(v) for v in self.basis)

    def __repr__(self) -> str:
        return f"Subspace(q={self.field.q}, ambient={self.ambient}, dim={self.dim})"


def _check_ambient(U: Subspace, V: Subspace) -> None:
    if U.ambient != V.ambient:
        raise ValueError(f"ambient mismatch: {U.ambient} vs {V.ambient}")


def subspace_sum(U: Subspace, V: Subspace) -> Subspace:
    _check_ambient(U, V)
    return Subspace.span(U.field, np.vstack([U.basis, V.basis]), U.ambient)


def intersect(U: Subspace, V: Subspace) -> Subspace:
    _check_ambient(U, V)
    F = U.field
    if U.dim == U.ambient:
        return V
    if V.dim == V.ambient:
        return U
    H = np.vstack([U.constraints(), V.constraints()])
    return kernel_basis(F, H, U.ambient)


def affine_intersect(u, V: Subspace, W: Subspace) -> tuple[Optional[np.ndarray], Subspace]:
    """A point of (u + V) ∩ W (or None if empty) and the subspace V ∩ W."""
    _check_ambient(V, W)
    F = V.field
    u = np.asarray(u, dtype=np.int64)
    if u.shape != (V.ambient,):
        raise ValueError(f"shift length {u.shape} does not match ambient {V.ambient}")
    VW = intersect(V, W)
    H = W.constraints()
    if H.shape[0] == 0:
        return u.copy(), VW
    # H (u + a V) = 0  <=>  (H V^T) a = -H u
    target = F.neg[matvec(F, H, u)]
    if V.dim == 0:
        return (u.copy() if not target.any() else None), VW
    a = solve_particular(F, F.matmul(H, V.basis.T), target)
    if a is None:
        return None, VW
    return vec_add(F, u, combine(F, a, V.basis)), VW


def block_shift(v, k: int, m: int) -> np.ndarray:
    """(v_1, ..., v_k) -> (0, v_1, ..., v_{k-1}) with blocks of length m."""
    v = np.asarray(v, dtype=np.int64)
    if v.shape != (k * m,):
        raise ValueError(f"expected length {k * m}, got {v.shape}")
    out = np.zeros_like(v)
    out[m:] = v[: (k - 1) * m]
    return out


@dataclass(frozen=True, eq=False)
class BttMatrix:
    """(k, a, b)-BTT matrix given by its first block column M_1..M_k (a x b)."""

    field: GF
    k: int
    a: int
    b: int
    blocks: tuple

    def __post_init__(self):
        if len(self.blocks) != self.k:
            raise ValueError(f"need {self.k} blocks, got {len(self.blocks)}")
        for B in self.blocks:
            if np.shape(B) != (self.a, self.b):
                raise ValueError(f"block shape {np.shape(B)} != ({self.a}, {self.b})")

    @classmethod
    def from_first_column(cls, F: GF, k: int, a: int, b: int, column) -> "BttMatrix":
        column = _as_matrix(column, b)
        if column.shape != (k * a, b):
            raise ValueError(f"first block column must be ({k * a}, {b}), got {column.shape}")
        return cls(F, k, a, b, tuple(column[i * a : (i + 1) * a].copy() for i in range(k)))

    def first_column(self) -> np.ndarray:
        if not self.blocks:
            return np.zeros((0, self.b), dtype=np.int64)
        return np.vstack(self.blocks)

    def assemble(self) -> np.ndarray:
        k, a, b = self.k, self.a, self.b
        M = np.zeros((k * a, k * b), dtype=np.int64)
        for i in range(k):
            for j in range(i + 1):
                M[i * a : (i + 1) * a, j * b : (j + 1) * b] = self.blocks[i - j]
        return M

    def image(self) -> Subspace:
        return Subspace.span(self.field, self.assemble().T, self.k * self.a)

    def kernel(self) -> Subspace:
        return kernel_basis(self.field, self.assemble(), self.k * self.b)

    def __repr__(self) -> str:
        return f"BttMatrix(q={self.field.q}, k={self.k}, a={self.a}, b={self.b})"


def btt_assemble(B: BttMatrix) -> np.ndarray:
    return B.assemble()


def btt_validate(F: GF, M, k: int, a: int, b: int) -> BttMatrix:
    """Check the three BTT conditions and recover the block list."""
    M = _as_matrix(M)
    if k < 1:
        raise ValueError("k must be >= 1")
    if M.shape != (k * a, k * b):
        raise ValueError(f"matrix shape {M.shape} is not ({k * a}, {k * b})")

    def blk(i, j):
        return M[i * a : (i + 1) * a, j * b : (j + 1) * b]

    violations = []
    for i in range(k):
        for j in range(i + 1, k):
            if blk(i, j).any():
                violations.append(f"block ({i + 1},{j + 1}) above the diagonal is nonzero")
    for i in range(k):
        for j in range(i + 1):
            if not np.array_equal(blk(i, j), blk(i - j, 0)):
                violations.append(
                    f"block ({i + 1},{j + 1}) differs from block ({i - j + 1},1) (Toeplitz)"
                )
    if rank(F, blk(0, 0)) != min(a, b):
        violations.append(f"first diagonal block has rank {rank(F, blk(0, 0))} < {min(a, b)}")
    if violations:
        raise BttValidationError(violations)
    return BttMatrix(F, k, a, b, tuple(blk(i, 0).copy() for i in range(k)))


def standard_subspaces(F: GF, n: int, r: int) -> Iterator[np.ndarray]:
    """RREF bases (r x n) of every r-dimensional subspace of F_q^n."""
    if r == 0:
        yield np.zeros((0, n), dtype=np.int64)
        return
    for piv in itertools.combinations(range(n), r):
        free_slots = [(i, c) for i in range(r) for c in range(piv[i] + 1, n) if c not in piv]
        for vals in itertools.product(range(F.q), repeat=len(free_slots)):
            B = np.zeros((r, n), dtype=np.int64)
            for i, c in enumerate(piv):
                B[i, c] = 1
            for (i, c), v in zip(free_slots, vals):
                B[i, c] = v
            yield B


def gaussian_binomial(n: int, r: int, q: int) -> int:
    """Number of r-dimensional subspaces of F_q^n."""
    if r < 0 or r > n:
        return 0
    num = den = 1
    for i in range(r):
        num *= q ** (n - i) - 1
        den *= q ** (i + 1) - 1
    return num // den


def kernel_filtration_dims(B: BttMatrix) -> list[int]:
    """dim V_i for i = 0..k, V_i = kernel vectors whose first i blocks vanish."""
    F = B.field
    M = B.assemble()
    n = B.k * B.b
    dims = []
    for i in range(B.k + 1):
        E = np.zeros((i * B.b, n), dtype=np.int64)
        E[np.arange(i * B.b), np.arange(i * B.b)] = 1
        dims.append(n - rank(F, np.vstack([M, E])))
    return dims


def btt_kernel_to_image(B: BttMatrix) -> BttMatrix:
    """Express ker(M) of a (k, r, m)-BTT matrix as the image of a
    (k, m, m - r)-BTT matrix.

    Complement vectors b^(1..m-r) come from the RREF basis of the kernel,
    kept greedily when independent modulo V_1 (kernel vectors with a zero
    first block); block column i of the result holds their (i-1)-fold
    block shifts.
    """
    F = B.field
    k, r, m = B.k, B.a, B.b
    if r > m:
        raise ValueError(f"need r <= m, got r={r}, m={m}")
    d = m - r
    if d == 0:
        return BttMatrix(F, k, m, 0, tuple(np.zeros((m, 0), dtype=np.int64) for _ in range(k)))
    M = B.assemble()
    V0 = kernel_basis(F, M, k * m)
    E1 = np.zeros((m, k * m), dtype=np.int64)
    E1[np.arange(m), np.arange(m)] = 1
    V1 = kernel_basis(F, np.vstack([M, E1]), k * m)
    chosen: list[np.ndarray] = []
    current = V1.basis
    cur_rank = V1.dim
    for v in V0.basis:
        trial = np.vstack([current, v[None, :]])
        if rank(F, trial) > cur_rank:
            chosen.append(v)
            current, cur_rank = trial, cur_rank + 1
            if len(chosen) == d:
                break
    if len(chosen) != d:
        raise ArithmeticError(f"kernel filtration has step {len(chosen)} != m - r = {d}")
    column = np.array(chosen, dtype=np.int64).T  # (k*m, d)
    return BttMatrix.from_first_column(F, k, m, d, column)


@dataclass(frozen=True, eq=False)
class PeriodicMatrix:
    """(k, a, b)-periodic matrix: block lower triangular, identical diagonal
    blocks, arbitrary blocks below the diagonal.

    ``columns[j]`` is the full (k*a) x b j-th block column; its first j
    blocks are zero.
    """

    field: GF
    k: int
    a: int
    b: int
    columns: tuple

    def assemble(self) -> np.ndarray:
        if not self.columns or self.b == 0:
            return np.zeros((self.k * self.a, self.k * self.b), dtype=np.int64)
        return np.hstack(self.columns)

    def image(self) -> Subspace:
        return Subspace.span(self.field, self.assemble().T, self.k * self.a)


def periodic_validate(F: GF, M, k: int, a: int, b: int) -> PeriodicMatrix:
    M = _as_matrix(M)
    if M.shape != (k * a, k * b):
        raise ValueError(f"matrix shape {M.shape} is not ({k * a}, {k * b})")

    def blk(i, j):
        return M[i * a : (i + 1) * a, j * b : (j + 1) * b]

    violations = []
    for i in range(k):
        for j in range(i + 1, k):
            if blk(i, j).any():
                violations.append(f"block ({i + 1},{j + 1}) above the diagonal is nonzero")
        if not np.array_equal(blk(i, i), blk(0, 0)):
            violations.append(f"diagonal block {i + 1} differs from diagonal block 1")
    if rank(F, blk(0, 0)) != min(a, b):
        violations.append("diagonal block is rank deficient")
    if violations:
        raise BttValidationError(violations)
    return PeriodicMatrix(F, k, a, b, tuple(M[:, j * b : (j + 1) * b].copy() for j in range(k)))


def format_matrix(F: GF, M) -> str:
    """``"q rows cols"`` header, then one line of F_q digit strings per row."""
    M = _as_matrix(M)
    lines = [f"{F.q} {M.shape[0]} {M.shape[1]}"]
    for row in M:
        lines.append(" ".join(F.fmt(int(x)) for x in row))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str, F: Optional[GF] = None) -> tuple[GF, np.ndarray]:
    from .gf import make_field

    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix text")
    try:
        q, rows, cols = (int(x) for x in lines[0].split())
    except ValueError:
        raise ValueError(f"bad matrix header {lines[0]!r}; expected 'q rows cols'") from None
    F = F or make_field(q)
    if F.q != q:
        raise ValueError(f"matrix is over F_{q}, expected F_{F.q}")
    body = lines[1:]
    if len(body) != rows:
        raise ValueError(f"header declares {rows} rows, found {len(body)}")
    M = np.zeros((rows, cols), dtype=np.int64)
    for i, ln in enumerate(body):
        parts = ln.split()
        if len(parts) != cols:
            raise ValueError(f"row {i} has {len(parts)} entries, expected {cols}")
        M[i] = [F.parse(x) for x in parts]
    return F, M


def random_matrix(F: GF, rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return F.random(rng, size=(rows, cols))


def random_full_rank(F: GF, rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random matrix of rank min(rows, cols)."""
    while True:
        A = random_matrix(F, rows, cols, rng)
        if rank(F, A) == min(rows, cols):
            return A


def random_btt(
    F: GF, k: int, a: int, b: int, rng: np.random.Generator
) -> BttMatrix:
    first = random_full_rank(F, a, b, rng)
    rest = [random_matrix(F, a, b, rng) for _ in range(k - 1)]
    return BttMatrix(F, k, a, b, tuple([first] + rest))


def stack_blocks(blocks: Sequence[np.ndarray]) -> np.ndarray:
    return np.vstack(blocks) if blocks else np.zeros((0, 0), dtype=np.int64)


def batch_matmul(F: GF, A, B) -> np.ndarray:
    """Matrix product over F_q broadcasting over leading batch axes."""
    A = np.asarray(A, dtype=np.int64)
    B = np.asarray(B, dtype=np.int64)
    if A.shape[-1] != B.shape[-2]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {B.shape}")
    if F.e == 1:
        return np.matmul(A, B) % F.p
    out = None
    for l in range(A.shape[-1]):
        term = F.mul[A[..., :, l, None], B[..., None, l, :]]
        out = term if out is None else F.add[out, term]
    if out is None:
        lead = np.broadcast_shapes(A.shape[:-2], B.shape[:-2])
        return np.zeros(lead + (A.shape[-2], B.shape[-1]), dtype=np.int64)
    return out


def batch_rank(F: GF, A) -> np.ndarray:
    """Ranks of a stack of matrices, shape (N, rows, cols) -> (N,)."""
    A = np.array(A, dtype=np.int64, copy=True)
    N, R, C = A.shape
    rk = np.zeros(N, dtype=np.int64)
    if R == 0 or C == 0:
        return rk
    rows = np.arange(R)
    for c in range(C):
        cand = (A[:, :, c] != 0) & (rows[None, :] >= rk[:, None])
        idx = np.flatnonzero(cand.any(axis=1))
        if idx.size == 0:
            continue
        piv = np.argmax(cand[idx], axis=1)
        top = rk[idx]
        prow = A[idx, piv].copy()
        A[idx, piv] = A[idx, top]
        prow = F.mul[F.inv[prow[:, c]][:, None], prow]
        A[idx, top] = prow
        fac = A[idx, :, c].copy()
        fac[np.arange(idx.size), top] = 0
        A[idx] = F.sub[A[idx], F.mul[fac[:, :, None], prow[:, None, :]]]
        rk[idx] += 1
    return rk


def extend_btt_columns(B: BttMatrix, r: int) -> BttMatrix:
    """A (k, a, r)-BTT matrix whose image contains Image(B), for b <= r <= a.

    The first block gains standard basis columns completing it to rank r;
    the other blocks gain zero columns.  Extra columns only add vectors to
    the image, so a subspace evasive against rank-r BTT images is evasive
    against the smaller ones too.
    """
    F = B.field
    if not B.b <= r <= B.a:
        raise ValueError(f"need b={B.b} <= r={r} <= a={B.a}")
    first = B.blocks[0]
    cur = first
    for i in range(B.a):
        if cur.shape[1] == r:
            break
        e = np.zeros((B.a, 1), dtype=np.int64)
        e[i, 0] = 1
        trial = np.hstack([cur, e])
        if rank(F, trial) == trial.shape[1]:
            cur = trial
    blocks = [cur] + [np.hstack([M, np.zeros((B.a, r - B.b), dtype=np.int64)]) for M in B.blocks[1:]]
    return BttMatrix(F, B.k, B.a, r, tuple(blocks))
