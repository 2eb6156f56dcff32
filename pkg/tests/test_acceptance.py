"""Acceptance suite: one PASS/FAIL line per criterion, at the stated tolerances."""
import functools
import json
import time

import numpy as np
import pytest

from bttlist import capcode
from bttlist.cli import main
from bttlist.evasive import (
    admissible_set,
    certify,
    compose,
    design_to_periodic_evasive,
    gk_design,
    search_btt_evasive,
    verify_btt_evasive,
    verify_subspace_design,
)
from bttlist.gf import make_field, make_tower, prime_power
from bttlist.linalg import (
    Subspace,
    btt_kernel_to_image,
    btt_validate,
    kernel_filtration_dims,
    random_btt,
)
from bttlist.rs_subfield import (
    DecodeParams,
    RsSubfieldCode,
    brute_force_list,
    choose_params,
    corrupt,
    encode,
    flatten_message,
    in_affine,
    list_decode_structured,
    prune,
    random_message,
)


@pytest.fixture
def report(request):
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(num, ok, detail):
        line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        else:
            print(line)
        assert ok, line

    return emit


# -- shared decode runs ---------------------------------------------------------


def big_code():
    return RsSubfieldCode(make_tower(2, 4, 4), 12, 3)


def small_code():
    return RsSubfieldCode(make_tower(5, 1, 2), 4, 2)


SMALL_PARAMS = DecodeParams(2, 1, 3)


@functools.lru_cache(maxsize=None)
def run_completeness():
    code = big_code()
    p = choose_params(12, 3, 0.5, 4)
    t0 = time.perf_counter()
    hits, stats = 0, []
    for trial in range(200):
        rng = np.random.default_rng([1, trial])
        f = random_message(code, rng)
        y = corrupt(code, encode(code, f), 7, rng)
        sl = list_decode_structured(code, y, p)
        hits += in_affine(sl.shift, sl.V, flatten_message(code, f))
        stats.append((sl.rank_m0, sl.V.dim))
    return p, hits, time.perf_counter() - t0, stats


@functools.lru_cache(maxsize=None)
def run_unique():
    code = big_code()
    p = choose_params(12, 3, 0.5, 4)
    sizes, stats = [], []
    for trial in range(100):
        rng = np.random.default_rng([2, trial])
        f = random_message(code, rng)
        e = int(rng.integers(0, 5))
        y = corrupt(code, encode(code, f), e, rng)
        sl = list_decode_structured(code, y, p)
        lst = prune(code, y, p.t, sl.shift, sl.V)
        sizes.append((len(lst), lst == [list(f)]))
        stats.append((sl.rank_m0, sl.V.dim))
    return sizes, stats


@functools.lru_cache(maxsize=None)
def run_oracle():
    code = small_code()
    p = SMALL_PARAMS
    T = code.tower
    equal, stats, nonempty = 0, [], 0
    for trial in range(50):
        rng = np.random.default_rng([3, trial])
        if trial % 2:
            y = [T.random(rng) for _ in range(code.n)]
        else:
            y = corrupt(code, encode(code, random_message(code, rng)), int(rng.integers(0, 3)), rng)
        sl = list_decode_structured(code, y, p)
        got = prune(code, y, p.t, sl.shift, sl.V)
        want = brute_force_list(code, y, p.t)
        equal += got == want
        nonempty += bool(want)
        stats.append((sl.rank_m0, sl.V.dim))
    return equal, nonempty, stats


# -- criteria -------------------------------------------------------------------


def test_criterion_01_completeness(report):
    p, hits, secs, _ = run_completeness()
    ok = (p.s, p.d, p.t) == (3, 2, 5) and hits == 200 and secs < 60
    report(1, ok, f"(s,d,t)=({p.s},{p.d},{p.t}); planted in shift+V {hits}/200; {secs:.1f}s (limit 60s)")


def test_criterion_02_unique_decoding(report):
    sizes, _ = run_unique()
    good = sum(1 for n, same in sizes if n == 1 and same)
    report(2, good == 100, f"single-element list equal to planted message {good}/100")


def test_criterion_03_oracle_equivalence(report):
    equal, nonempty, _ = run_oracle()
    report(3, equal == 50, f"prune == brute force {equal}/50 ({nonempty} non-empty lists)")


def test_criterion_04_btt_kernel_to_image(report):
    good = 0
    for trial in range(100):
        rng = np.random.default_rng([4, trial])
        F = make_field([2, 3][trial % 2])
        k, m = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        r = int(rng.integers(1, m + 1))
        B = random_btt(F, k, r, m, rng)
        out = btt_kernel_to_image(B)
        try:
            btt_validate(F, out.assemble(), k, m, m - r)
            valid = True
        except Exception:
            valid = False
        dims = kernel_filtration_dims(B) == [(k - i) * (m - r) for i in range(k + 1)]
        good += valid and dims and out.image() == B.kernel()
    report(4, good == 100, f"image == kernel, valid BTT, filtration dims {good}/100")


def test_criterion_05_rank_bound(report):
    checks = []
    for code, p, stats in (
        (big_code(), choose_params(12, 3, 0.5, 4), run_completeness()[3]),
        (big_code(), choose_params(12, 3, 0.5, 4), run_unique()[1]),
        (small_code(), SMALL_PARAMS, run_oracle()[2]),
    ):
        checks += [r0 >= code.m - p.s + 1 and dv <= code.k * (p.s - 1) for r0, dv in stats]
    report(5, all(checks), f"rank(M_0) >= m-s+1 and dim V <= k(s-1) in {sum(checks)}/{len(checks)} decodes")


def test_criterion_06_gk_design(report):
    t0 = time.perf_counter()
    D = gk_design(7, 4, 1, 3, 2)
    got = verify_subspace_design(D)
    secs = time.perf_counter() - t0
    codims = [4 - H.dim for H in D.H]
    ok = got <= 3 and all(c <= 3 for c in codims) and secs < 120
    report(6, ok, f"max sum dim = {got} (<= 3); co-dims {codims}; {secs:.2f}s (limit 120s)")


def _adm_check(q, dd, t):
    A = admissible_set(q, dd, t)
    T = make_tower(*prime_power(q), dd)
    orbits = [A.orbit(a) for a in A.alphas]
    sizes = all(len(o) == dd * t for o in orbits)
    disjoint = len(set().union(*orbits)) == sum(len(o) for o in orbits) if orbits else True
    # F_q(alpha) = F_{q^dd}: no proper Frobenius power fixes alpha
    full = all(all(T.frobenius(a, j) != a for j in range(1, dd)) for a in A.alphas)
    bound_f = len(A.alphas) >= (q**dd - 1) / (4 * dd * t)
    bound_b = len(A.excluded) <= (q**dd - 1) / 2
    return sizes and disjoint and full and bound_f and bound_b, len(A.alphas), len(A.excluded)


def test_criterion_07_admissible_set(report):
    rows, ok = [], True
    for q, dd, t in ((5, 1, 2), (3, 2, 2), (4, 2, 2)):
        good, nf, nb = _adm_check(q, dd, t)
        ok &= good
        rows.append(f"({q},{dd},{t}) |F|={nf} |B|={nb}")
    report(7, ok, "; ".join(rows))


def test_criterion_08_btt_search(report):
    w = search_btt_evasive(2, 2, 4, 1, 0.5, seed=0, budget=10_000)
    again = search_btt_evasive(2, 2, 4, 1, 0.5, seed=0, budget=10_000)
    res = verify_btt_evasive(w.W, 2, 4, 1, mode="canonical")
    ok = (
        w.codim <= 4
        and res.complete
        and res.max_dim <= 4
        and w.meta["candidate"] < 10_000
        and again.to_text() == w.to_text()
    )
    report(8, ok, f"co-dim {w.codim}; exhaustive max dim {res.max_dim} (<= 4) over {res.candidates} subspaces; "
           f"candidate #{w.meta['candidate']}; deterministic={again.to_text() == w.to_text()}")


def chain_witness():
    D = gk_design(5, 2, 1, 1, 1)
    inner = certify(D.H[0], 1, 2, 1)
    outer = design_to_periodic_evasive(D, 2)
    return inner, outer, compose(inner, outer)


def test_criterion_09_composition(report):
    inner, outer, w = chain_witness()
    res = verify_btt_evasive(w.W, w.k, w.m, w.r, mode="canonical")
    # second chain with a two-block inner witness
    F = make_field(5)
    W2 = Subspace.span(F, np.array([[1, 2]]), 2)
    inner2 = certify(W2, 2, 1, 1)
    w2 = compose(inner2, design_to_periodic_evasive(gk_design(5, 2, 1, 1, 1), 2))
    res2 = verify_btt_evasive(w2.W, w2.k, w2.m, w2.r, mode="canonical")
    ok = res.complete and res2.complete and res.max_dim <= w.s and res2.max_dim <= w2.s
    report(9, ok, f"(k,m,r)=({w.k},{w.m},{w.r}) dim W={w.W.dim}: {res.max_dim} <= s'={w.s}; "
           f"(k,m,r)=({w2.k},{w2.m},{w2.r}) dim W={w2.W.dim}: {res2.max_dim} <= s'={w2.s}")


def test_criterion_10_restricted_code(report):
    _, _, w = chain_witness()
    w = certify(w.W, w.k, w.m, w.r)
    code = capcode.build(small_code(), w, SMALL_PARAMS)
    e = code.base.n - code.params.t
    found, dims_ok, oracle_ok = 0, 0, 0
    for trial in range(200):
        rng = np.random.default_rng([10, trial])
        msg = capcode.random_restricted_message(code, rng)
        y = corrupt(code.base, capcode.encode_restricted(code, msg), e, rng)
        res = capcode.list_decode_restricted(code, y)
        found += tuple(int(x) for x in msg) in res.messages
        dims_ok += res.list_subspace_dim <= w.s + 1
        if trial < 20:
            oracle_ok += res.messages == capcode.restricted_brute_force(code, y)
    ok = found == 200 and dims_ok == 200 and oracle_ok == 20
    report(10, ok, f"dim W={code.dim}, e={e}: planted found {found}/200; list dim <= s_W+1={w.s + 1} "
           f"{dims_ok}/200; oracle equality {oracle_ok}/20")


def _cli(args, capsys):
    rc = main(args)
    return rc, capsys.readouterr().out


def test_criterion_11_determinism(report, capsys, tmp_path):
    cf, yf, of, inf, wf = (str(tmp_path / n) for n in ("c.json", "y.txt", "o.txt", "i.txt", "w.txt"))
    _cli(["code", "--field", "5:2", "--n", "4", "--k", "2", "--s", "2", "--d", "1", "--t", "3", "--out", cf], capsys)
    _cli(["evasive", "--mode", "design", "--q", "5", "--k", "2", "--m", "2", "--t", "1", "--r", "1", "--out", of], capsys)
    _cli(["evasive", "--mode", "design", "--q", "5", "--k", "1", "--m", "2", "--t", "1", "--r", "1", "--verify", "--out", inf], capsys)
    _cli(["evasive", "--mode", "compose", "--inner", inf, "--outer", of, "--verify", "--out", wf], capsys)
    _cli(["encode", "--code", cf, "--seed", "3", "--errors", "1", "--out", yf], capsys)
    commands = [
        ["design", "--q", "7", "--m", "4", "--t", "3", "--r", "2", "--verify"],
        ["evasive", "--mode", "search", "--q", "2", "--k", "2", "--m", "4", "--r", "1", "--eps", "0.5", "--seed", "3"],
        ["evasive", "--mode", "compose", "--inner", inf, "--outer", of, "--verify"],
        ["evasive", "--mode", "two-level", "--q", "5", "--k", "2", "--m", "4", "--r", "1", "--eps", "0.5",
         "--level-eps", "0.5", "--k1", "1", "--k2", "2"],
        ["code", "--field", "2^4:4", "--n", "12", "--k", "3", "--eps", "0.5"],
        ["encode", "--code", cf, "--seed", "3", "--errors", "1"],
        ["encode", "--code", cf, "--witness", wf, "--seed", "3", "--errors", "1"],
        ["decode", "--code", cf, "--word", yf],
        ["decode", "--code", cf, "--word", yf, "--witness", wf],
        ["experiment", "--field", "5:2", "--n", "4", "--k", "2", "--s", "2", "--d", "1", "--t", "3",
         "--errors", "0:2", "--trials", "5", "--seed", "9"],
        ["experiment", "--field", "5:2", "--n", "4", "--k", "2", "--s", "2", "--d", "1", "--t", "3",
         "--errors", "1", "--trials", "5", "--seed", "9", "--format", "jsonl", "--witness", wf],
    ]
    same = 0
    bad = []
    for args in commands:
        a, b = _cli(args, capsys), _cli(args, capsys)
        if a == b and a[0] == 0 and a[1]:
            same += 1
        else:
            bad.append(args[0])

    # library entry points
    def lib_outputs():
        code = big_code()
        p = choose_params(12, 3, 0.5, 4)
        rng = np.random.default_rng(11)
        f = random_message(code, rng)
        y = corrupt(code, encode(code, f), 7, rng)
        sl = list_decode_structured(code, y, p)
        _, _, w = chain_witness()
        rc = capcode.build(small_code(), certify(w.W, w.k, w.m, w.r), SMALL_PARAMS)
        return json.dumps(
            [
                sl.shift.tolist(),
                sl.V.basis.tolist(),
                [[list(map(list, m)) for m in prune(code, y, p.t, sl.shift, sl.V)]],
                search_btt_evasive(2, 2, 4, 1, 0.5, seed=5).to_text(),
                gk_design(7, 4, 1, 3, 2).H[1].basis.tolist(),
                w.to_text(),
                capcode.to_json(rc),
            ]
        )

    lib_same = lib_outputs() == lib_outputs()
    ok = same == len(commands) and lib_same
    report(11, ok, f"identical CLI outputs {same}/{len(commands)}{' failing: ' + ','.join(bad) if bad else ''}; "
           f"library outputs identical={lib_same}")
