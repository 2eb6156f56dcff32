"""Finite field tower F_p < F_q < F_{q^m}.

F_q elements are plain ints: the integer ``sum(c_i * p**i)`` encodes the
coefficient vector ``(c_0, ..., c_{e-1})`` over F_p in the power basis of
the chosen modulus.  Arithmetic goes through precomputed numpy tables, so
whole arrays can be added or multiplied with fancy indexing.

F_{q^m} elements are tuples of ``m`` F_q ints, again power-basis
coefficients (little-endian) modulo the top modulus.
"""
from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"

Fqm = tuple


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def prime_factors(n: int) -> list[int]:
    """Distinct prime factors of ``n`` by trial division."""
    out = []
    f = 2
    while f * f <= n:
        if n % f == 0:
            out.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        out.append(n)
    return out


def prime_power(q: int) -> tuple[int, int]:
    """Return ``(p, e)`` with ``q == p**e``; raise ValueError otherwise."""
    if q < 2:
        raise ValueError(f"{q} is not a prime power")
    factors = prime_factors(q)
    if len(factors) != 1:
        raise ValueError(f"{q} is not a prime power")
    p = factors[0]
    e = 0
    while q > 1:
        q //= p
        e += 1
    return p, e


# -- polynomials over a table field ---------------------------------------
# Polynomials are little-endian lists of field ints.  ``fld`` only needs
# the list-valued tables ``_add``, ``_sub``, ``_mul``, ``_inv``.


def _trim(a: list[int]) -> list[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def _poly_mod(fld: "GF", a: list[int], f: Sequence[int]) -> list[int]:
    a = list(a)
    df = len(f) - 1
    lead_inv = fld._inv[f[-1]]
    sub, mul = fld._sub, fld._mul
    for i in range(len(a) - 1, df - 1, -1):
        c = a[i]
        if c == 0:
            continue
        c = mul[c][lead_inv]
        for j in range(df + 1):
            if f[j]:
                a[i - df + j] = sub[a[i - df + j]][mul[c][f[j]]]
    return _trim(a[:df])


def _poly_mul(fld: "GF", a: Sequence[int], b: Sequence[int]) -> list[int]:
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    add, mul = fld._add, fld._mul
    for i, x in enumerate(a):
        if x == 0:
            continue
        row = mul[x]
        for j, y in enumerate(b):
            if y:
                out[i + j] = add[out[i + j]][row[y]]
    return _trim(out)


def _poly_sub(fld: "GF", a: Sequence[int], b: Sequence[int]) -> list[int]:
    n = max(len(a), len(b))
    a = list(a) + [0] * (n - len(a))
    b = list(b) + [0] * (n - len(b))
    return _trim([fld._sub[x][y] for x, y in zip(a, b)])


def _poly_gcd(fld: "GF", a: list[int], b: list[int]) -> list[int]:
    a, b = _trim(list(a)), _trim(list(b))
    while b:
        a, b = b, _poly_mod(fld, a, b)
    return a


def _x_pow_mod(fld: "GF", n: int, f: Sequence[int]) -> list[int]:
    """x**n mod f by square-and-multiply."""
    result = [1]
    base = _poly_mod(fld, [0, 1], f)
    while n:
        if n & 1:
            result = _poly_mod(fld, _poly_mul(fld, result, base), f)
        base = _poly_mod(fld, _poly_mul(fld, base, base), f)
        n >>= 1
    return result


def is_irreducible(fld: "GF", f: Sequence[int]) -> bool:
    """Rabin's test for a monic polynomial ``f`` over ``fld``."""
    n = len(f) - 1
    if n < 1:
        return False
    if n == 1:
        return True
    q = fld.q
    if _poly_sub(fld, _x_pow_mod(fld, q**n, f), [0, 1]):
        return False
    for r in prime_factors(n):
        h = _poly_sub(fld, _x_pow_mod(fld, q ** (n // r), f), [0, 1])
        if len(_poly_gcd(fld, list(f), h)) != 1:
            return False
    return True


def first_irreducible(fld: "GF", degree: int) -> tuple[int, ...]:
    """First monic irreducible of ``degree``, scanning the non-leading
    coefficient vectors ``(c_0, ..., c_{degree-1})`` lexicographically."""
    for coeffs in itertools.product(range(fld.q), repeat=degree):
        f = list(coeffs) + [1]
        if is_irreducible(fld, f):
            return tuple(f)
    raise RuntimeError(f"no irreducible polynomial of degree {degree} over F_{fld.q}")


class _PrimeTables:
    """Minimal stand-in used while bootstrapping F_p itself."""

    def __init__(self, p: int):
        self.q = p
        r = range(p)
        self._add = [[(a + b) % p for b in r] for a in r]
        self._sub = [[(a - b) % p for b in r] for a in r]
        self._mul = [[(a * b) % p for b in r] for a in r]
        self._inv = [0] + [pow(a, p - 2, p) for a in range(1, p)]


class GF:
    """The field F_q, q = p**e, with table arithmetic.

    ``add``/``sub``/``mul`` are (q, q) int arrays, ``neg``/``inv`` are
    length-q arrays (``inv[0]`` is 0 and must not be used).  List copies
    with a leading underscore serve scalar code paths.
    """

    def __init__(self, p: int, e: int = 1):
        if not is_prime(p):
            raise ValueError(f"characteristic {p} is not prime")
        if e < 1:
            raise ValueError("extension degree must be >= 1")
        self.p, self.e, self.q = p, e, p**e
        q = self.q
        prime = _PrimeTables(p)
        self.modulus = first_irreducible(prime, e) if e > 1 else (0, 1)

        digits = np.array([[(a // p**i) % p for i in range(e)] for a in range(q)], dtype=np.int64)
        weights = p ** np.arange(e, dtype=np.int64)
        self.add = ((digits[:, None, :] + digits[None, :, :]) % p) @ weights
        self.sub = ((digits[:, None, :] - digits[None, :, :]) % p) @ weights
        self.neg = self.sub[0].copy()

        if e == 1:
            a = np.arange(q, dtype=np.int64)
            self.mul = np.outer(a, a) % p
        else:
            self.mul = self._build_mul_table(prime, digits, weights)
        self.inv = np.zeros(q, dtype=np.int64)
        nz, inv_of = np.nonzero(self.mul[1:, 1:] == 1)
        self.inv[nz + 1] = inv_of + 1

        self._add = self.add.tolist()
        self._sub = self.sub.tolist()
        self._mul = self.mul.tolist()
        self._neg = self.neg.tolist()
        self._inv = self.inv.tolist()
        self.gamma = self._find_generator()

    def _build_mul_table(self, prime, digits, weights) -> np.ndarray:
        q, p = self.q, self.p

        def enc(c: list[int]) -> int:
            return sum(x * p**i for i, x in enumerate(c))

        def slow_mul(a: int, b: int) -> int:
            prod = _poly_mul(prime, list(digits[a]), list(digits[b]))
            return enc(_poly_mod(prime, prod, self.modulus))

        # log/exp from any generator; only used to fill the table
        for g in range(2, q):
            powers = [1]
            for _ in range(q - 2):
                powers.append(slow_mul(powers[-1], g))
            if len(set(powers)) == q - 1:
                break
        else:  # pragma: no cover - F_q^x is always cyclic
            raise RuntimeError("no generator found")
        exp = np.array(powers, dtype=np.int64)
        log = np.zeros(q, dtype=np.int64)
        log[exp] = np.arange(q - 1)
        mul = np.zeros((q, q), dtype=np.int64)
        idx = (log[1:, None] + log[None, 1:]) % (q - 1)
        mul[1:, 1:] = exp[idx]
        return mul

    def pow(self, a: int, n: int) -> int:
        if n < 0:
            a, n = self._inv[a], -n
        result = 1
        while n:
            if n & 1:
                result = self._mul[result][a]
            a = self._mul[a][a]
            n >>= 1
        return result

    def _find_generator(self) -> int:
        if self.q == 2:
            return 1
        factors = prime_factors(self.q - 1)
        for g in range(1, self.q):
            if all(self.pow(g, (self.q - 1) // f) != 1 for f in factors):
                return g
        raise RuntimeError("F_q^x has no generator")  # pragma: no cover

    def order(self, a: int) -> int:
        if a == 0:
            raise ValueError("0 has no multiplicative order")
        n, x = 1, a
        while x != 1:
            x = self._mul[x][a]
            n += 1
        return n

    def elements(self) -> range:
        return range(self.q)

    # vectorised helpers ---------------------------------------------------
    def scale(self, c: int, v: np.ndarray) -> np.ndarray:
        return self.mul[c][v]

    def axpy(self, a: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """y + a*x elementwise."""
        return self.add[y, self.mul[a][x]]

    def matmul(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        A = np.asarray(A, dtype=np.int64)
        B = np.asarray(B, dtype=np.int64)
        vec = B.ndim == 1
        if vec:
            B = B[:, None]
        if A.shape[-1] != B.shape[0]:
            raise ValueError(f"dimension mismatch: {A.shape} @ {B.shape}")
        if self.e == 1:
            out = (A @ B) % self.p
        else:
            out = np.zeros((A.shape[0], B.shape[1]), dtype=np.int64)
            for l in range(A.shape[1]):
                out = self.add[out, self.mul[A[:, l, None], B[None, l, :]]]
        return out[:, 0] if vec else out

    def random(self, rng: np.random.Generator, size=None) -> np.ndarray:
        return rng.integers(0, self.q, size=size, dtype=np.int64)

    # text format -----------------------------------------------------------
    def fmt(self, a: int) -> str:
        if self.p > len(DIGITS):
            raise ValueError(f"text format supports p <= {len(DIGITS)}")
        return "".join(DIGITS[(a // self.p**i) % self.p] for i in range(self.e))

    def parse(self, s: str) -> int:
        s = s.strip()
        if len(s) != self.e:
            raise ValueError(f"F_{self.q} element needs {self.e} digit(s), got {s!r}")
        value = 0
        for i, ch in enumerate(s):
            d = DIGITS.find(ch.lower())
            if d < 0 or d >= self.p:
                raise ValueError(f"bad digit {ch!r} for p={self.p}")
            value += d * self.p**i
        return value

    def __repr__(self) -> str:
        return f"GF({self.p}^{self.e})"


@lru_cache(maxsize=None)
def make_field(q: int) -> GF:
    p, e = prime_power(q)
    return GF(p, e)


class FieldTower:
    """F_p < F_q < F_{q^m} with Frobenius ``x -> x**q`` on the top field."""

    def __init__(self, p: int, e: int, m: int):
        if not is_prime(p):
            raise ValueError(f"characteristic {p} is not prime")
        if e < 1 or m < 1:
            raise ValueError("extension degrees must be >= 1")
        self.base = make_field(p**e)
        self.p, self.e, self.m = p, e, m
        self.q = self.base.q
        self.modulus_base = self.base.modulus
        self.modulus_top = first_irreducible(self.base, m)
        self.gamma = self.base.gamma
        self.order = self.q**m
        # frob_basis[j][i] = (zeta**i)**(q**j) as a tuple
        zeta_q = self.pow(self.basis(1) if m > 1 else self.one(), self.q)
        images = [self.one()]
        for _ in range(1, m):
            images.append(self.mul(images[-1], zeta_q))
        self._frob = [tuple(self.basis(i) for i in range(m))]
        for _ in range(1, m):
            prev = self._frob[-1]
            self._frob.append(tuple(self._apply_frob1(x, images) for x in prev))

    # element construction ---------------------------------------------------
    def zero(self) -> Fqm:
        return (0,) * self.m

    def one(self) -> Fqm:
        return (1,) + (0,) * (self.m - 1)

    def basis(self, i: int) -> Fqm:
        v = [0] * self.m
        v[i] = 1
        return tuple(v)

    def embed(self, a: int) -> Fqm:
        """F_q element as an F_{q^m} element."""
        return (a,) + (0,) * (self.m - 1)

    def in_subfield(self, x: Fqm) -> bool:
        return not any(x[1:])

    def elements(self) -> Iterator[Fqm]:
        for digits in itertools.product(range(self.q), repeat=self.m):
            yield tuple(reversed(digits))

    def from_int(self, n: int) -> Fqm:
        return tuple((n // self.q**i) % self.q for i in range(self.m))

    def to_int(self, x: Fqm) -> int:
        return sum(c * self.q**i for i, c in enumerate(x))

    def random(self, rng: np.random.Generator) -> Fqm:
        return tuple(int(c) for c in rng.integers(0, self.q, size=self.m))

    # arithmetic ---------------------------------------------------------------
    def add(self, x: Fqm, y: Fqm) -> Fqm:
        add = self.base._add
        return tuple(add[a][b] for a, b in zip(x, y))

    def sub(self, x: Fqm, y: Fqm) -> Fqm:
        sub = self.base._sub
        return tuple(sub[a][b] for a, b in zip(x, y))

    def neg(self, x: Fqm) -> Fqm:
        neg = self.base._neg
        return tuple(neg[a] for a in x)

    def scale(self, c: int, x: Fqm) -> Fqm:
        row = self.base._mul[c]
        return tuple(row[a] for a in x)

    def mul(self, x: Fqm, y: Fqm) -> Fqm:
        m = self.m
        if m == 1:
            return (self.base._mul[x[0]][y[0]],)
        fld = self.base
        add, mul, sub = fld._add, fld._mul, fld._sub
        prod = [0] * (2 * m - 1)
        for i, a in enumerate(x):
            if a == 0:
                continue
            row = mul[a]
            for j, b in enumerate(y):
                if b:
                    prod[i + j] = add[prod[i + j]][row[b]]
        f = self.modulus_top
        for i in range(2 * m - 2, m - 1, -1):
            c = prod[i]
            if c == 0:
                continue
            row = mul[c]
            for j in range(m):
                if f[j]:
                    prod[i - m + j] = sub[prod[i - m + j]][row[f[j]]]
        return tuple(prod[:m])

    def pow(self, x: Fqm, n: int) -> Fqm:
        if n < 0:
            x, n = self.inv(x), -n
        result = self.one()
        while n:
            if n & 1:
                result = self.mul(result, x)
            x = self.mul(x, x)
            n >>= 1
        return result

    def inv(self, x: Fqm) -> Fqm:
        if not any(x):
            raise ZeroDivisionError("inverse of zero in F_q^m")
        return self.pow(x, self.order - 2)

    def _apply_frob1(self, x: Fqm, images) -> Fqm:
        out = self.zero()
        for c, img in zip(x, images):
            if c:
                out = self.add(out, self.scale(c, img))
        return out

    def frobenius(self, x: Fqm, j: int = 1) -> Fqm:
        """x**(q**(j mod m))."""
        table = self._frob[j % self.m]
        out = [0] * self.m
        add, mul = self.base._add, self.base._mul
        for c, img in zip(x, table):
            if c:
                row = mul[c]
                for i, v in enumerate(img):
                    if v:
                        out[i] = add[out[i]][row[v]]
        return tuple(out)

    # text format -----------------------------------------------------------
    def fmt(self, x: Fqm) -> str:
        return ";".join(self.base.fmt(c) for c in x)

    def parse(self, s: str) -> Fqm:
        parts = s.strip().split(";")
        if len(parts) != self.m:
            raise ValueError(f"F_q^m element needs {self.m} ';'-separated parts, got {s!r}")
        return tuple(self.base.parse(part) for part in parts)

    @property
    def spec(self) -> str:
        return format_field_spec(self.p, self.e, self.m)

    def __repr__(self) -> str:
        return f"FieldTower({self.spec})"


@lru_cache(maxsize=None)
def make_tower(p: int, e: int, m: int) -> FieldTower:
    return FieldTower(p, e, m)


def parse_field_spec(spec: str) -> tuple[int, int, int]:
    """Parse ``"p^e:m"`` (or ``"p:m"`` for e=1)."""
    try:
        left, m = spec.strip().split(":")
        if "^" in left:
            p, e = left.split("^")
        else:
            p, e = left, "1"
        return int(p), int(e), int(m)
    except ValueError:
        raise ValueError(f"bad field spec {spec!r}; expected 'p^e:m'") from None


def format_field_spec(p: int, e: int, m: int) -> str:
    return f"{p}^{e}:{m}"


def tower_from_spec(spec: str) -> FieldTower:
    return make_tower(*parse_field_spec(spec))


def frobenius(t: FieldTower, x: Fqm, j: int = 1) -> Fqm:
    return t.frobenius(x, j)


def flatten(t: FieldTower, x: Fqm) -> np.ndarray:
    """Coordinate map F_{q^m} -> F_q^m in the power basis."""
    return np.array(x, dtype=np.int64)


def unflatten(t: FieldTower, v) -> Fqm:
    v = [int(c) for c in v]
    if len(v) != t.m:
        raise ValueError(f"expected a length-{t.m} vector, got length {len(v)}")
    return tuple(v)


def flatten_many(t: FieldTower, xs: Sequence[Fqm]) -> np.ndarray:
    """Concatenate coordinate vectors: (f_0, ..., f_{k-1}) -> F_q^{km}."""
    if not xs:
        return np.zeros(0, dtype=np.int64)
    return np.array(xs, dtype=np.int64).reshape(-1)


def unflatten_many(t: FieldTower, v) -> list[Fqm]:
    v = [int(c) for c in v]
    if len(v) % t.m:
        raise ValueError(f"vector length {len(v)} is not a multiple of m={t.m}")
    return [tuple(v[i : i + t.m]) for i in range(0, len(v), t.m)]


def linearized_op_matrix(t: FieldTower, a: Sequence[Fqm]) -> np.ndarray:
    """Matrix over F_q of ``b -> sum_l a[l] * b**(q**l)``.

    Column i is the image of the i-th power-basis element, so
    ``matrix @ flatten(b) == flatten(image of b)``.
    """
    if not a:
        raise ValueError("empty coefficient list")
    if len(a) > t.m:
        raise ValueError(f"at most m={t.m} coefficients allowed, got {len(a)}")
    cols = []
    for i in range(t.m):
        z = t.basis(i)
        img = t.zero()
        for l, coeff in enumerate(a):
            if any(coeff):
                img = t.add(img, t.mul(coeff, t.frobenius(z, l)))
        cols.append(img)
    return np.array(cols, dtype=np.int64).T.copy()
