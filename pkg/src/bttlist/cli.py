"""Command-line entry point: ``bttlist <command> ...``.

Exit codes: 0 ok, 1 contract failure (budget exhausted, cap exceeded,
verification above the claimed bound, failed trial), 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import capcode, evasive
from .gf import tower_from_spec
from .linalg import format_matrix
from .rs_subfield import (
    DEFAULT_ENUM_CAP,
    DecodeParams,
    EnumerationCapExceeded,
    RsSubfieldCode,
    choose_params,
    corrupt,
    encode,
    flatten_message,
    list_decode_structured,
    prune,
    random_message,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- file formats ---------------------------------------------------------------


def code_to_json(code: RsSubfieldCode, params: DecodeParams) -> str:
    return json.dumps(
        {
            "field": code.tower.spec,
            "n": code.n,
            "k": code.k,
            "alphas": list(code.alphas),
            "params": params.to_dict(),
        },
        sort_keys=True,
    )


def code_from_json(text: str) -> tuple[RsSubfieldCode, DecodeParams]:
    try:
        obj = json.loads(text)
        tower = tower_from_spec(obj["field"])
        code = RsSubfieldCode(tower, int(obj["n"]), int(obj["k"]), tuple(obj.get("alphas") or ()))
        params = DecodeParams.from_dict(obj["params"])
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"bad code file: {exc}") from None
    return code, params


def format_word(code: RsSubfieldCode, word) -> str:
    return "".join(code.tower.fmt(tuple(x)) + "\n" for x in word)


def parse_word(code: RsSubfieldCode, text: str, length: Optional[int] = None) -> list:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    want = code.n if length is None else length
    if len(lines) != want:
        raise UsageError(f"expected {want} symbols, found {len(lines)}")
    return [code.tower.parse(ln) for ln in lines]


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(str(exc)) from None


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- design -----------------------------------------------------------------------


def design_to_text(D: evasive.SubspaceDesign) -> str:
    head = {
        "q": D.q,
        "m": D.m,
        "design_d": D.design_d,
        "t": D.t,
        "r": D.r,
        "s": D.s,
        "members": len(D),
        "alphas": [list(a) for a in D.alphas],
        "codims": [h.codim for h in D.H],
    }
    parts = [json.dumps(head, sort_keys=True) + "\n"]
    for h in D.H:
        parts.append(format_matrix(D.field, h.basis))
    return "".join(parts)


def cmd_design(args) -> int:
    if args.t < 1:
        raise UsageError("--t must be >= 1")
    D = evasive.gk_design(args.q, args.m, args.dd, args.t, args.r)
    _emit(design_to_text(D), args.out)
    if args.verify:
        measured = evasive.verify_subspace_design(D, cap=args.cap)
        report = {"measured_max": measured, "bound": D.s, "ok": measured <= D.s}
        print(json.dumps(report, sort_keys=True), file=sys.stderr if not args.out else sys.stdout)
        if measured > D.s:
            return EXIT_FAIL
    return EXIT_OK


# -- evasive ----------------------------------------------------------------------


def _load_witness(path: str) -> evasive.EvasiveWitness:
    try:
        return evasive.EvasiveWitness.from_text(_read(path))
    except (ValueError, KeyError) as exc:
        raise UsageError(f"bad witness file {path}: {exc}") from None


def cmd_evasive(args) -> int:
    mode = args.mode
    if mode == "search":
        _need(args, "q", "k", "m", "r", "eps")
        w = evasive.search_btt_evasive(
            args.q, args.k, args.m, args.r, args.eps, args.seed, args.budget, args.cap, jobs=args.jobs
        )
    elif mode == "compose":
        _need(args, "inner", "outer")
        try:
            w = evasive.compose(_load_witness(args.inner), _load_witness(args.outer))
        except evasive.ChainError as exc:
            raise UsageError(f"chain error: {exc}") from None
    elif mode == "design":
        _need(args, "q", "k", "m", "t", "r")
        D = evasive.gk_design(args.q, args.m, args.dd, args.t, args.r)
        w = evasive.design_to_periodic_evasive(D, args.k)
    elif mode == "two-level":
        _need(args, "q", "k", "m", "r", "eps", "k1", "k2")
        w = evasive.two_level_construct(
            args.q,
            args.k,
            args.m,
            args.r,
            args.eps,
            args.k1,
            args.k2,
            args.level_eps,
            args.seed,
            args.budget,
            args.cap,
            jobs=args.jobs,
        )
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown mode {mode}")
    if args.verify:
        w = evasive.verify_witness(w, cap=args.cap, jobs=args.jobs)
    _emit(w.to_text(), args.out)
    if w.measured is not None and w.measured > w.s:
        print(f"verification failed: measured {w.measured} > s={w.s}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _need(args, *names) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError(f"--mode {args.mode} requires " + ", ".join("--" + n.replace("_", "-") for n in missing))


# -- code / encode / decode -----------------------------------------------------------


def _params_from_args(args, code: RsSubfieldCode) -> DecodeParams:
    if args.s is not None:
        if args.d is None or args.t is None:
            raise UsageError("--s requires --d and --t")
        p = DecodeParams(args.s, args.d, args.t, args.eps)
    elif args.eps is not None:
        p = choose_params(code.n, code.k, args.eps, code.m)
    else:
        raise UsageError("give --eps or --s/--d/--t")
    p.check(code)
    return p


def cmd_code(args) -> int:
    code = RsSubfieldCode(tower_from_spec(args.field), args.n, args.k)
    _emit(code_to_json(code, _params_from_args(args, code)) + "\n", args.out)
    return EXIT_OK


def cmd_encode(args) -> int:
    code, params = code_from_json(_read(args.code))
    if args.witness:
        rc = capcode.build(code, _load_witness(args.witness), params)
        if args.msg:
            vals = _read(args.msg).split()
            F = code.tower.base
            msg = np.array([F.parse(v) for v in vals], dtype=np.int64)
        else:
            msg = capcode.random_restricted_message(rc, np.random.default_rng(args.seed))
        word = capcode.encode_restricted(rc, msg)
    else:
        if args.msg:
            f = parse_word(code, _read(args.msg), code.k)
        else:
            f = random_message(code, np.random.default_rng(args.seed))
        word = encode(code, f)
    if args.errors:
        word = corrupt(code, word, args.errors, np.random.default_rng([args.seed, 1]))
    _emit(format_word(code, word), args.out)
    return EXIT_OK


def _decode_base(code, params, y, cap, timings=None):
    sl = list_decode_structured(code, y, params, timings)
    t0 = time.perf_counter()
    msgs = prune(code, y, params.t, sl.shift, sl.K, cap)
    if timings is not None:
        timings["prune"] = time.perf_counter() - t0
    return sl, msgs


def cmd_decode(args) -> int:
    code, params = code_from_json(_read(args.code))
    y = parse_word(code, _read(args.word))
    timings: dict = {}
    F = code.tower.base
    if args.witness:
        rc = capcode.build(code, _load_witness(args.witness), params)
        res = capcode.list_decode_restricted(rc, y, args.cap, timings)
        out = {
            "list": [" ".join(F.fmt(x) for x in msg) for msg in res.messages],
            "list_size": len(res.messages),
            "list_subspace_dim": res.list_subspace_dim,
            "intersection_dim": res.intersection_dim,
            "structured_dim": res.structured_dim,
            "rank_m0": res.rank_m0,
        }
    else:
        sl, msgs = _decode_base(code, params, y, args.cap, timings)
        out = {
            "list": [[code.tower.fmt(c) for c in f] for f in msgs],
            "list_size": len(msgs),
            "structured_dim": sl.V.dim,
            "kernel_dim": sl.K.dim,
            "rank_m0": sl.rank_m0,
            "shift": None if sl.shift is None else " ".join(F.fmt(int(x)) for x in sl.shift),
            "V": format_matrix(F, sl.V.basis),
        }
    if args.timings:
        out["timings"] = timings
    else:
        print(json.dumps({"timings": timings}, sort_keys=True), file=sys.stderr)
    _emit(json.dumps(out, sort_keys=True) + "\n", args.out)
    return EXIT_OK


# -- experiment -------------------------------------------------------------------------


@dataclass
class TrialRecord:
    trial: int
    errors: int
    list_size: int
    list_dim: int
    success: int
    t_interpolate: float = 0.0
    t_system: float = 0.0
    t_prune: float = 0.0


FIELDS = ["trial", "errors", "list_size", "list_dim", "success"]
TIMING_FIELDS = ["t_interpolate", "t_system", "t_prune"]


@dataclass(frozen=True)
class _TrialJob:
    code_json: str
    witness_text: Optional[str]
    trial: int
    errors: int
    seed: int
    cap: int


_CACHE: dict = {}


def _setup(job: _TrialJob):
    key = (job.code_json, job.witness_text)
    if key not in _CACHE:
        code, params = code_from_json(job.code_json)
        rc = None
        if job.witness_text is not None:
            rc = capcode.build(code, evasive.EvasiveWitness.from_text(job.witness_text), params)
        _CACHE[key] = (code, params, rc)
    return _CACHE[key]


def run_trial(job: _TrialJob) -> TrialRecord:
    code, params, rc = _setup(job)
    rng = np.random.default_rng([job.seed, job.trial])
    tm: dict = {}
    if rc is not None:
        msg = capcode.random_restricted_message(rc, rng)
        y = corrupt(code, capcode.encode_restricted(rc, msg), job.errors, rng)
        res = capcode.list_decode_restricted(rc, y, job.cap, tm)
        found = tuple(int(x) for x in msg) in res.messages
        size, dim = len(res.messages), res.list_subspace_dim
    else:
        f = random_message(code, rng)
        y = corrupt(code, encode(code, f), job.errors, rng)
        sl, msgs = _decode_base(code, params, y, job.cap, tm)
        flat = [tuple(int(x) for x in flatten_message(code, g)) for g in msgs]
        found = tuple(int(x) for x in flatten_message(code, f)) in flat
        size, dim = len(msgs), sl.K.dim
    return TrialRecord(
        job.trial,
        job.errors,
        size,
        dim,
        int(found),
        tm.get("interpolate", 0.0),
        tm.get("system", 0.0),
        tm.get("prune", 0.0),
    )


def _parse_sweep(text: str) -> list[int]:
    try:
        if ":" in text:
            a, b = text.split(":")
            return list(range(int(a), int(b) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"bad --errors value {text!r}; use e, a:b or a,b,c") from None


def cmd_experiment(args) -> int:
    code = RsSubfieldCode(tower_from_spec(args.field), args.n, args.k)
    params = _params_from_args(args, code)
    witness_text = None
    if args.witness:
        witness_text = _read(args.witness)
        capcode.build(code, _load_witness(args.witness), params)  # validate early
    if args.trials < 0:
        raise UsageError("--trials must be >= 0")
    weights = _parse_sweep(args.errors)
    for e in weights:
        if not 0 <= e <= code.n:
            raise UsageError(f"error weight {e} outside [0, n={code.n}]")
    cj = code_to_json(code, params)
    jobs = [
        _TrialJob(cj, witness_text, i, e, args.seed, args.cap)
        for e in weights
        for i in range(args.trials)
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            records = list(ex.map(run_trial, jobs, chunksize=8))
    else:
        records = [run_trial(j) for j in jobs]
    fields = FIELDS + (TIMING_FIELDS if args.timings else [])
    buf = io.StringIO()
    guaranteed = [r for r in records if r.errors <= code.n - params.t]
    summary = {
        "summary": True,
        "trials": len(records),
        "success_rate": (sum(r.success for r in records) / len(records)) if records else 1.0,
        "guaranteed_success_rate": (
            sum(r.success for r in guaranteed) / len(guaranteed) if guaranteed else 1.0
        ),
        "max_list_dim": max((r.list_dim for r in records), default=0),
        "max_list_size": max((r.list_size for r in records), default=0),
        "t": params.t,
    }
    if args.format == "csv":
        w = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow(asdict(r))
        buf.write("# " + json.dumps(summary, sort_keys=True) + "\n")
    else:
        for r in records:
            d = asdict(r)
            buf.write(json.dumps({k: d[k] for k in fields}) + "\n")
        buf.write(json.dumps(summary, sort_keys=True) + "\n")
    _emit(buf.getvalue(), args.out)
    if args.check and any(not r.success for r in guaranteed):
        print("contract failure: a trial within the guaranteed radius lost the message", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def read_records(text: str, fmt: str) -> tuple[list[dict], dict]:
    """Parse experiment output back into (records, summary)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if fmt == "csv":
        summary = json.loads(lines[-1][2:])
        rows = list(csv.DictReader(io.StringIO("\n".join(lines[:-1]))))
        recs = [{k: (float(v) if k.startswith("t_") else int(v)) for k, v in row.items()} for row in rows]
        return recs, summary
    objs = [json.loads(ln) for ln in lines]
    return objs[:-1], objs[-1]


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bttlist", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="build an explicit subspace design")
    d.add_argument("--q", type=int, required=True)
    d.add_argument("--m", type=int, required=True)
    d.add_argument("--dd", type=int, default=1, help="extension degree of the point orbits")
    d.add_argument("--t", type=int, required=True)
    d.add_argument("--r", type=int, required=True)
    d.add_argument("--verify", action="store_true")
    d.add_argument("--cap", type=int, default=evasive.DEFAULT_CAP)
    d.add_argument("--out")
    d.set_defaults(func=cmd_design)

    e = sub.add_parser("evasive", help="build an evasive subspace witness")
    e.add_argument("--mode", choices=["search", "compose", "design", "two-level"], required=True)
    for name in ("q", "k", "m", "r", "t", "k1", "k2"):
        e.add_argument(f"--{name}", type=int)
    e.add_argument("--dd", type=int, default=1)
    e.add_argument("--eps", type=float)
    e.add_argument("--level-eps", type=float)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--budget", type=int, default=10_000)
    e.add_argument("--cap", type=int, default=evasive.DEFAULT_CAP)
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--inner")
    e.add_argument("--outer")
    e.add_argument("--verify", action="store_true", help="rerun exhaustive verification")
    e.add_argument("--out")
    e.set_defaults(func=cmd_evasive)

    def add_param_flags(sp):
        sp.add_argument("--eps", type=float)
        sp.add_argument("--s", type=int)
        sp.add_argument("--d", type=int)
        sp.add_argument("--t", type=int)

    c = sub.add_parser("code", help="write a code description file")
    c.add_argument("--field", required=True, help="p^e:m, e.g. 2^4:4")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--k", type=int, required=True)
    add_param_flags(c)
    c.add_argument("--out")
    c.set_defaults(func=cmd_code)

    en = sub.add_parser("encode", help="encode a message (optionally corrupting it)")
    en.add_argument("--code", required=True)
    en.add_argument("--msg", help="message file; random when omitted")
    en.add_argument("--witness", help="restrict messages to this witness")
    en.add_argument("--seed", type=int, default=0)
    en.add_argument("--errors", type=int, default=0)
    en.add_argument("--out")
    en.set_defaults(func=cmd_encode)

    de = sub.add_parser("decode", help="list decode a received word")
    de.add_argument("--code", required=True)
    de.add_argument("--word", required=True)
    de.add_argument("--witness")
    de.add_argument("--cap", type=int, default=DEFAULT_ENUM_CAP)
    de.add_argument("--timings", action="store_true", help="include timings in the output")
    de.add_argument("--out")
    de.set_defaults(func=cmd_decode)

    x = sub.add_parser("experiment", help="Monte-Carlo decoding trials")
    x.add_argument("--field", required=True)
    x.add_argument("--n", type=int, required=True)
    x.add_argument("--k", type=int, required=True)
    add_param_flags(x)
    x.add_argument("--errors", default="0", help="e, a:b or a,b,c")
    x.add_argument("--trials", type=int, default=100)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--format", choices=["csv", "jsonl"], default="jsonl")
    x.add_argument("--witness")
    x.add_argument("--cap", type=int, default=DEFAULT_ENUM_CAP)
    x.add_argument("--jobs", type=int, default=1)
    x.add_argument("--timings", action="store_true")
    x.add_argument("--check", action="store_true", help="exit 1 if a guaranteed trial fails")
    x.add_argument("--out")
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (evasive.BudgetExhausted, evasive.CapExceeded, EnumerationCapExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
