import math

import numpy as np
import pytest

from bttlist.gf import flatten_many, linearized_op_matrix, make_tower
from bttlist.linalg import btt_validate, rank
from bttlist.rs_subfield import (
    DecodeParams,
    EnumerationCapExceeded,
    QPolynomial,
    RsSubfieldCode,
    agreement,
    brute_force_list,
    choose_params,
    corrupt,
    decode_list,
    derive_btt_system,
    encode,
    flatten_message,
    in_affine,
    interpolate,
    list_decode_structured,
    prune,
    random_message,
)


def naive_eval(T, f, a):
    """sum_j f_j * a^j with explicit powers (no Horner)."""
    acc = T.zero()
    for j, c in enumerate(f):
        acc = T.add(acc, T.scale(T.base.pow(a, j), c))
    return acc


@pytest.fixture(scope="module")
def tiny():
    T = make_tower(5, 1, 2)
    return RsSubfieldCode(T, 4, 2), DecodeParams(s=2, d=1, t=3)


@pytest.fixture(scope="module")
def medium():
    T = make_tower(2, 4, 4)
    return RsSubfieldCode(T, 12, 3), choose_params(12, 3, 0.5, 4)


def test_code_validation():
    T = make_tower(5, 1, 2)
    with pytest.raises(ValueError):
        RsSubfieldCode(T, 6, 2)
    with pytest.raises(ValueError):
        RsSubfieldCode(T, 3, 2, (0, 0, 1))
    with pytest.raises(ValueError):
        RsSubfieldCode(T, 3, 4)
    assert RsSubfieldCode(T, 4, 2).alphas == (0, 1, 2, 3)


def test_encode_examples(tiny):
    code, _ = tiny
    T = code.tower
    c = (3, 1)
    assert encode(code, [c, T.zero()]) == [c] * 4
    assert encode(code, [T.zero(), T.one()]) == [T.embed(a) for a in range(4)]
    with pytest.raises(ValueError):
        encode(code, [T.one()])


def test_encode_matches_naive_and_generator(medium):
    code, _ = medium
    T = code.tower
    F = T.base
    rng = np.random.default_rng(3)
    G = code.generator_matrix()
    for _ in range(10):
        f = random_message(code, rng)
        cw = encode(code, f)
        assert cw == [naive_eval(T, f, a) for a in code.alphas]
        assert np.array_equal(F.matmul(G, flatten_message(code, f)), flatten_many(T, cw))


def test_encode_is_linear(medium):
    code, _ = medium
    T = code.tower
    rng = np.random.default_rng(4)
    f, g = random_message(code, rng), random_message(code, rng)
    a = T.random(rng)
    lhs = encode(code, [T.add(T.mul(a, x), y) for x, y in zip(f, g)])
    rhs = [T.add(T.mul(a, x), y) for x, y in zip(encode(code, f), encode(code, g))]
    assert lhs == rhs


def test_choose_params_sample():
    p = choose_params(12, 3, 0.5, 4)
    assert (p.s, p.d, p.t) == (3, 2, 5)
    assert 12 - p.t == 7 > (12 - 3) // 2
    assert (p.s + 1) * (p.d + 1) + 3 - 1 > 12 and p.t > p.d + 3 - 1


def test_choose_params_degenerate_and_errors():
    p = choose_params(5, 5, 0.5, 4)
    assert p.d == 0 and p.t == 5
    with pytest.raises(ValueError):
        choose_params(12, 3, 1.0, 4)
    with pytest.raises(ValueError):
        choose_params(12, 3, 0.2, 4)  # s = 6 > m
    with pytest.raises(ValueError):
        choose_params(3, 4, 0.5, 4)


@pytest.mark.parametrize("n,k,eps", [(12, 3, 0.5), (16, 4, 0.5), (16, 2, 1 / 3), (9, 3, 0.4), (10, 1, 0.25)])
def test_choose_params_conditions(n, k, eps):
    m = math.ceil(1 / eps) + 1
    p = choose_params(n, k, eps, m)
    assert (p.s + 1) * (p.d + 1) + k - 1 > n
    assert p.t == p.d + k
    assert n - p.t >= math.floor((1 - eps) * (n - k)) - (p.s + 1)  # rounding slack


def test_params_check_rejects_bad(tiny):
    code, _ = tiny
    with pytest.raises(ValueError):
        DecodeParams(2, 0, 3).check(code)
    with pytest.raises(ValueError):
        DecodeParams(2, 1, 2).check(code)
    with pytest.raises(ValueError):
        DecodeParams(3, 1, 3).check(code)


def test_interpolate_no_errors_functional_equation(medium):
    code, p = medium
    T = code.tower
    rng = np.random.default_rng(8)
    for _ in range(10):
        f = random_message(code, rng)
        y = encode(code, f)
        Q = interpolate(code, y, p)
        assert all(not any(r) for r in Q.residuals(code, y))
        # Q(f, f^q, ...) is the zero polynomial
        deg = p.d + code.k
        for i in range(deg):
            coef = Q.coeff(0, i, T)
            for l in range(1, p.s + 1):
                for j in range(i + 1):
                    if j < code.k:
                        coef = T.add(coef, T.mul(Q.coeff(l, i - j, T), T.frobenius(f[j], l - 1)))
            assert not any(coef)


def test_interpolate_zero_word(tiny):
    code, p = tiny
    T = code.tower
    Q = interpolate(code, [T.zero()] * 4, p)
    assert any(any(c) for A in Q.A for c in A)
    assert all(not any(x) for x in Q.A[0])


def test_interpolate_degrees_and_residuals(medium):
    code, p = medium
    rng = np.random.default_rng(12)
    for _ in range(10):
        y = [code.tower.random(rng) for _ in range(code.n)]
        Q = interpolate(code, y, p)
        assert len(Q.A[0]) <= p.d + code.k and all(len(A) <= p.d + 1 for A in Q.A[1:])
        assert all(not any(r) for r in Q.residuals(code, y))
        assert any(any(A[0]) for A in Q.A if A)


def test_unique_decoding_embedding_s1():
    # s = 1 with A_1 = 1: M_0 is the identity and the solution is f
    T = make_tower(3, 1, 2)
    code = RsSubfieldCode(T, 3, 2)
    f = [(1, 2), (0, 1)]
    A0 = tuple(T.neg(c) for c in f)
    Q = QPolynomial((A0, (T.one(),)))
    sysm = derive_btt_system(code, Q)
    assert np.array_equal(sysm.blocks[0], np.eye(2, dtype=np.int64))
    assert np.array_equal(sysm.rhs, flatten_message(code, f))


def test_btt_system_rank_and_true_message(medium):
    code, p = medium
    F = code.tower.base
    rng = np.random.default_rng(21)
    for _ in range(30):
        f = random_message(code, rng)
        y = encode(code, f)
        sysm = derive_btt_system(code, interpolate(code, y, p))
        assert sysm.rank_m0 >= code.m - p.s + 1
        x = flatten_message(code, f)
        assert np.array_equal(F.matmul(sysm.full, x), sysm.rhs)
        btt_validate(F, sysm.reduced.assemble(), code.k, sysm.rank_m0, code.m)


def test_rank_bound_of_linearized_blocks(medium):
    code, p = medium
    T = code.tower
    rng = np.random.default_rng(2)
    for _ in range(30):
        a = [T.random(rng) for _ in range(p.s)]
        if any(any(c) for c in a):
            assert rank(T.base, linearized_op_matrix(T, a)) >= code.m - p.s + 1


def test_structured_list_contains_message(medium):
    code, p = medium
    rng = np.random.default_rng(5)
    for _ in range(40):
        f = random_message(code, rng)
        e = int(rng.integers(0, code.n - p.t + 1))
        y = corrupt(code, encode(code, f), e, rng)
        sl = list_decode_structured(code, y, p)
        assert in_affine(sl.shift, sl.V, flatten_message(code, f))
        assert in_affine(sl.shift, sl.K, flatten_message(code, f))
        assert sl.V.dim <= code.k * (p.s - 1)
        assert sl.btt_form.image() == sl.V
        assert sl.K <= sl.V


def test_prune_examples(tiny):
    code, p = tiny
    F = code.tower.base
    from bttlist.linalg import Subspace

    f = [(1, 2), (3, 4)]
    y = encode(code, f)
    x = flatten_message(code, f)
    zero = Subspace.zero(F, 4)
    assert prune(code, y, code.n, x, zero) == [f]
    assert prune(code, y, code.n + 1, x, Subspace.full(F, 4)) == []
    assert prune(code, y, 1, None, zero) == []
    with pytest.raises(EnumerationCapExceeded):
        prune(code, y, 1, x, Subspace.full(F, 4), cap=10)


def test_brute_force_examples(tiny):
    code, p = tiny
    rng = np.random.default_rng(1)
    f = random_message(code, rng)
    y = encode(code, f)
    assert brute_force_list(code, y, code.n) == [f]
    assert len(brute_force_list(code, y, 0)) == 5**4


def test_prune_matches_brute_force(tiny):
    code, p = tiny
    rng = np.random.default_rng(77)
    for i in range(30):
        if i % 2:
            y = [code.tower.random(rng) for _ in range(code.n)]
        else:
            y = corrupt(code, encode(code, random_message(code, rng)), 1, rng)
        sl = list_decode_structured(code, y, p)
        want = brute_force_list(code, y, p.t)
        assert prune(code, y, p.t, sl.shift, sl.V) == want
        assert decode_list(code, y, p) == want


def test_unique_regime_single_element(medium):
    code, p = medium
    rng = np.random.default_rng(6)
    for _ in range(20):
        f = random_message(code, rng)
        y = corrupt(code, encode(code, f), 4, rng)
        assert decode_list(code, y, p) == [f]


def test_empty_list_signal(monkeypatch):
    import bttlist.rs_subfield as rs

    T = make_tower(5, 1, 2)
    code = RsSubfieldCode(T, 4, 2)
    p = DecodeParams(2, 1, 3)
    # a_{l,0} = 0 for l >= 1 while a_{0,0} != 0: no f can satisfy Q(f) = 0
    Q = QPolynomial(((T.one(), T.zero()), (T.zero(), T.one()), (T.zero(), T.zero())))
    with pytest.raises(rs.EmptyList):
        derive_btt_system(code, Q)
    monkeypatch.setattr(rs, "interpolate", lambda *a, **kw: Q)
    y = [T.zero()] * 4
    sl = rs.list_decode_structured(code, y, p)
    assert sl.empty and sl.V.dim == 0
    assert prune(code, y, p.t, sl.shift, sl.V) == []


def test_corrupt_weight(medium):
    code, _ = medium
    rng = np.random.default_rng(0)
    c = encode(code, random_message(code, rng))
    for e in range(code.n + 1):
        y = corrupt(code, c, e, rng)
        assert agreement(c, y) == code.n - e
