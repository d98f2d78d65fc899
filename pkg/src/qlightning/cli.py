"""Command-line front end.

Every command prints one JSON report on stdout (also written to --report when
given). Reports are sorted-key JSON; the only field that differs
between two runs with the same config and seed is "timestamp".
Failures print {"error": {...}} and exit with the error's own code.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import lattice as L
from .actions import GGAMInstance, TranslationAction, WrappedAction, build_model, build_rega_spec
from .errors import ParameterError, QLError
from .group_core import GroupSpec
from .harness import CLONERS, PAIR_MAKERS, run_pair_reduction, run_cloner_reduction, run_twist_reduction
from .lightning import findh, gauss_sum_magnitudes, kgea_attack, mint, verify
from .rega import (
    REGAActionSpec,
    REGAParams,
    large_count_scan,
    serial_collisions,
    qft_gaussian_pair_check,
    rega_acceptance_exact,
    rega_mint,
    rega_verify,
    toy_params,
    toy_params_odd,
    toy_params_rank2,
    validate_params,
)
from .statevec import StateVector

SEED_ENV = "QLIGHTNING_SEED"
REGA_TOYS = {"toy": toy_params, "toy-odd": toy_params_odd, "toy-rank2": toy_params_rank2}
LATTICE_TOYS = {"attack": L.attack_toy, "fourier": L.fourier_toy}


class UsageError(QLError):
    code = "usage"
    exit_code = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- plumbing

def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, bytes):
        return o.hex()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable, allow_nan=False)


def _seed(args, needed: bool = True) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ParameterError(f"{SEED_ENV}={env!r} is not an integer") from None
    if needed:
        raise ParameterError(f"sampled mode needs --seed or {SEED_ENV}")
    return None


def _rng(seed: int | None) -> np.random.Generator | None:
    return None if seed is None else np.random.default_rng(seed)


def _write(path: str | None, text: str) -> None:
    if path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text + "\n")


def _write_csv(path: str | None, rows: list[dict]) -> None:
    if not path or not rows:
        return
    cols = sorted({k for r in rows for k in r})
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({k: (json.dumps(v, default=_jsonable) if isinstance(v, (list, dict)) else v)
                        for k, v in r.items()})


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ParameterError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path} is not valid JSON: {exc}") from None


def _config(args) -> dict:
    skip = {"func", "report", "csv"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _check_probabilities(metrics: dict) -> None:
    for k, v in metrics.items():
        if k.startswith("p_") or k.endswith("_prob") or k.endswith("probability"):
            if isinstance(v, float) and not (-1e-12 <= v <= 1 + 1e-12):
                raise ParameterError(f"reported probability {k}={v} outside [0, 1]")


# ---------------------------------------------------------------- models

def _model(args) -> object:
    spec = GroupSpec.parse(args.group)
    seed = _seed(args, needed=False) or 0
    if args.action == "translation":
        return TranslationAction(spec)
    base = GGAMInstance(spec, args.label_bits, seed)
    if args.action == "ggam":
        return base
    x = base.start()
    return WrappedAction(base, (1, 1), (x, x), seed=seed + 1)


# ---------------------------------------------------------------- commands

def cmd_mint(args) -> dict:
    model = _model(args)
    note = mint(model, np.random.default_rng(_seed(args)))
    _write(args.out, dumps(note.to_json()))
    return {"serial": list(note.serial.residues), "dim": note.note.dim, "note_file": args.out,
            "action": model.descriptor()}


def _load_note(path: str):
    d = _load_json(path)
    for key in ("action", "serial", "state"):
        if key not in d:
            raise ParameterError(f"note file lacks {key!r}")
    model = build_model(d["action"])
    return d, model, model.spec.element(d["serial"]), StateVector.from_json(d["state"])


def cmd_verify(args) -> dict:
    d, model, h, state = _load_note(args.note)
    if args.serial:
        h = model.spec.element([int(v) for v in args.serial.split(",")])
    res = verify(model, h, state, None if args.exact else _rng(_seed(args, needed=False)))
    return {"serial": list(h.residues), "accept_prob": res.accept_prob, "accepted": res.accepted,
            "membership_mass": res.membership_mass}


def cmd_findh(args) -> dict:
    d, model, h, state = _load_note(args.note)
    res = findh(model, state, None if args.exact else _rng(_seed(args, needed=False)))
    return {"serial": list(res.serial.residues), "probability": res.probability,
            "matches_file_serial": res.serial == h}


def cmd_attack_kgea(args) -> dict:
    spec = GroupSpec.parse(args.group)
    model = TranslationAction(spec)
    odd_cyclic = spec.rank == 1 and spec.order % 2 == 1
    if odd_cyclic:
        phase = "quadratic"
    else:
        def phase(g, n=spec.moduli):
            return 2 * math.pi * sum((r * r % m) / m for r, m in zip(g.residues, n))
    rng = None if args.exact or args.trials == 0 else _rng(_seed(args))
    res = kgea_attack(model, phase, None)
    samples = []
    if rng is not None:
        dist = res.distribution / res.distribution.sum()
        samples = [res.labels[int(i)].hex() for i in rng.choice(len(dist), size=args.trials, p=dist)]
    out = {"phase": "quadratic" if odd_cyclic else "custom-sum-of-squares",
           "flatness_asserted": odd_cyclic, "max_deviation": res.max_deviation,
           "residual_serial_mass": res.residual_serial_mass,
           "distribution": [float(v) for v in res.distribution], "samples": samples}
    if odd_cyclic:
        out["max_gauss_sum_error"] = float(np.max(np.abs(gauss_sum_magnitudes(spec.order) - math.sqrt(spec.order))))
        out["uniform"] = res.max_deviation < 1e-9
    return out


def cmd_reduce(args) -> dict:
    seed = _seed(args)
    rng = np.random.default_rng(seed)
    spec = GroupSpec.parse(args.group)
    base = GGAMInstance(spec, args.label_bits, int(rng.integers(2**31)))
    modes = ("real", "random") if args.mode == "both" else (args.mode,)
    if args.which == "d2x":
        rep = run_cloner_reduction(base, args.cloner, args.trials, rng, modes)
    elif args.which == "ddh-pair":
        rep = run_pair_reduction(base, args.pair_maker, args.trials, rng, modes)
    else:
        rep = run_twist_reduction(base, args.trials, rng)
    _write_csv(args.csv, rep.rows)
    rep.seed = seed
    return rep.to_json()


def _rega_params(name: str) -> REGAParams:
    if name in REGA_TOYS:
        return REGA_TOYS[name]()
    return REGAParams.from_json(_load_json(name))


def cmd_rega_mint(args) -> dict:
    p = _rega_params(args.params)
    if args.lam:
        p.lam = args.lam
    rspec = REGAActionSpec(p.N, p.A, p.B)
    rep = validate_params(p, rspec)
    if not rep.ok:
        raise ParameterError("parameters fail validation: " + ", ".join(c.name for c in rep.checks
                                                                        if c.required and not c.passed))
    bn = rega_mint(p, rspec, np.random.default_rng(_seed(args)))
    _write(args.out, dumps(bn.to_json(rspec, p)))
    return {"serial_t": bn.serial_t, "witness": list(bn.h_witness.residues),
            "witness_probability": bn.witness_fidelity, "note_file": args.out}


def cmd_rega_verify(args) -> dict:
    d = _load_json(args.note)
    p = REGAParams.from_json(d["params"])
    rspec = build_rega_spec(d["action"])
    state = StateVector.from_json(d["state"])
    t = np.asarray(d["serial_t"], dtype=np.int64)
    lam = args.lam or p.lam
    out = {"lambda": lam, "accept_prob": rega_acceptance_exact(p, rspec, t, state, lam)}
    if not args.exact:
        res = rega_verify(p, rspec, t, state, np.random.default_rng(_seed(args)), lam)
        out.update({"accepted": res.accepted, "zeros": res.zeros, "min_round_prob": min(res.round_probs, default=0.0)})
    return out


def cmd_rega_lemmas(args) -> dict:
    p = _rega_params(args.params)
    rspec = REGAActionSpec(p.N, p.A, p.B)
    rep = validate_params(p, rspec)
    rows = large_count_scan(args.max_n)
    _write_csv(args.csv, [dict(zip(("N", "order", "brute_count", "formula"), r)) for r in rows])
    return {"validation": rep.to_json(), "validated": rep.ok,
            "large_count_subgroups": len(rows), "large_count_mismatches": sum(r[2] != r[3] for r in rows),
            "serial_collisions": serial_collisions(p, rspec),
            "gaussian_qft_pair_distance": qft_gaussian_pair_check(8.0, 256)}


def _lattice_params(name: str) -> L.LWEActionParams:
    if name in LATTICE_TOYS:
        return LATTICE_TOYS[name]()
    return L.LWEActionParams.from_json(_load_json(name))


def cmd_lattice_folklore(args) -> dict:
    p = _lattice_params(args.params)
    n = L.folklore_mint(p, np.random.default_rng(_seed(args)))
    return {"serial": n.h, "support_size": len(n.note.vecs),
            "support_accept": L.support_verifier(p, n.h, n.note),
            "projector_accept": L.ideal_membership_projector(p, n.note),
            "collision_probability": L.collision_probability(p, n.h)}


def cmd_lattice_attack(args) -> dict:
    p = _lattice_params(args.params)
    rng = np.random.default_rng(_seed(args))
    rows = []
    for t in range(args.trials):
        n = L.folklore_mint(p, rng)
        fake = L.folklore_attack(n.note, rng)
        rows.append({"trial": t, "serial": n.h.tolist(), "support_accept": L.support_verifier(p, n.h, fake),
                     "projector_accept": L.ideal_membership_projector(p, fake)})
    _write_csv(args.csv, rows)
    return {"trials": args.trials,
            "min_support_accept": min((r["support_accept"] for r in rows), default=None),
            "max_projector_accept": max((r["projector_accept"] for r in rows), default=None)}


def cmd_lattice_sis(args) -> dict:
    p = _lattice_params(args.params)
    rng = np.random.default_rng(_seed(args))
    rows = []
    for t in range(args.trials):
        n = L.folklore_mint(p, rng)
        s = L.sis_from_two_notes(p, n.note, L.honest_note(p, n.h), n.h, rng)
        rows.append({"trial": t, "v": s.v.tolist(), "kernel_ok": s.kernel_ok, "nonzero": s.nonzero, "linf": s.linf})
    _write_csv(args.csv, rows)
    return {"trials": args.trials, "nonzero_kernel_vectors": sum(r["kernel_ok"] and r["nonzero"] for r in rows),
            "max_linf": max((r["linf"] for r in rows), default=None)}


def cmd_lattice_fourier(args) -> dict:
    p = _lattice_params(args.params)
    rep = L.fourier_equivalence_check(p)
    return {"min_fidelity": rep.min_fidelity,
            "fidelities": {",".join(map(str, k)): v for k, v in sorted(rep.fidelities.items())}}


def cmd_lattice_flooding(args) -> dict:
    sigmas = [float(s) for s in args.sigmas.split(",")]
    offset = [int(v) for v in args.offset.split(",")]
    ds = [L.flooding_check(L.flooding_toy(s), offset) for s in sigmas]
    return {"sigmas": sigmas, "distances": ds, "strictly_decreasing": all(b < a for a, b in zip(ds, ds[1:]))}


def cmd_selftest(args) -> dict:
    from .acceptance import run_all
    only = {int(v) for v in args.only.split(",")} if args.only else None
    results = run_all(only, echo=lambda line: print(line, file=sys.stderr))
    return {"criteria": [r.to_json() for r in results], "all_passed": all(r.passed for r in results)}


# ---------------------------------------------------------------- parser

def _common(p: argparse.ArgumentParser, seed=True) -> None:
    if seed:
        p.add_argument("--seed", type=int, default=None, help=f"rng seed (default: ${SEED_ENV})")
    p.add_argument("--exact", action="store_true", help="exact probabilities only, no sampling")
    p.add_argument("--report", default=None, help="also write the JSON report here")


def _group_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--group", required=True, help='cyclic factors, e.g. "35" or "2x3x5"')
    p.add_argument("--action", choices=("ggam", "translation", "wrapped"), default="ggam")
    p.add_argument("--label-bits", type=int, default=24)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qlightning", description="Group-action quantum lightning simulator")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mint", help="mint a banknote")
    _group_args(p)
    _common(p)
    p.add_argument("--out", default=None, help="note file")
    p.set_defaults(func=cmd_mint)

    for name, fn in (("verify", cmd_verify), ("findh", cmd_findh)):
        p = sub.add_parser(name)
        p.add_argument("--note", required=True)
        _common(p)
        if name == "verify":
            p.add_argument("--serial", default=None, help="comma-separated residues (default: the file's)")
        p.set_defaults(func=fn)

    atk = sub.add_parser("attack").add_subparsers(dest="attack", required=True, parser_class=_Parser)
    p = atk.add_parser("kgea", help="forge a random banknote from the start label")
    p.add_argument("--group", required=True)
    p.add_argument("--trials", type=int, default=0, help="number of sampled output labels")
    _common(p)
    p.set_defaults(func=cmd_attack_kgea)

    red = sub.add_parser("reduce").add_subparsers(dest="which", required=True, parser_class=_Parser)
    for which in ("d2x", "ddh-pair", "twist"):
        p = red.add_parser(which)
        p.add_argument("--group", required=True)
        p.add_argument("--label-bits", type=int, default=16)
        p.add_argument("--trials", type=int, default=10)
        p.add_argument("--mode", choices=("both", "real", "random"), default="both")
        p.add_argument("--cloner", choices=CLONERS, default="ideal")
        p.add_argument("--pair-maker", choices=PAIR_MAKERS, default="complementary")
        p.add_argument("--csv", default=None, help="per-trial rows")
        _common(p)
        p.set_defaults(func=cmd_reduce, which=which)

    rg = sub.add_parser("rega").add_subparsers(dest="rega", required=True, parser_class=_Parser)
    p = rg.add_parser("mint")
    p.add_argument("--params", default="toy", help=f"{'|'.join(REGA_TOYS)} or a params JSON file")
    p.add_argument("--lam", type=int, default=None)
    p.add_argument("--out", default=None)
    _common(p)
    p.set_defaults(func=cmd_rega_mint)
    p = rg.add_parser("verify")
    p.add_argument("--note", required=True)
    p.add_argument("--lam", type=int, default=None)
    _common(p)
    p.set_defaults(func=cmd_rega_verify)
    p = rg.add_parser("lemmas")
    p.add_argument("--params", default="toy")
    p.add_argument("--max-n", type=int, default=256)
    p.add_argument("--csv", default=None)
    _common(p)
    p.set_defaults(func=cmd_rega_lemmas)

    lt = sub.add_parser("lattice").add_subparsers(dest="lattice", required=True, parser_class=_Parser)
    for name, fn, default in (("folklore", cmd_lattice_folklore, "attack"), ("attack", cmd_lattice_attack, "attack"),
                              ("sis", cmd_lattice_sis, "attack"), ("fourier", cmd_lattice_fourier, "fourier")):
        p = lt.add_parser(name)
        p.add_argument("--params", default=default, help=f"{'|'.join(LATTICE_TOYS)} or a params JSON file")
        if name in ("attack", "sis"):
            p.add_argument("--trials", type=int, default=100)
            p.add_argument("--csv", default=None)
        _common(p)
        p.set_defaults(func=fn)
    p = lt.add_parser("flooding")
    p.add_argument("--sigmas", default="4,8,16,32")
    p.add_argument("--offset", default="1,0")
    _common(p)
    p.set_defaults(func=cmd_lattice_flooding)

    p = sub.add_parser("selftest", help="run the acceptance suite")
    p.add_argument("--only", default=None, help="comma-separated criterion numbers")
    _common(p, seed=False)
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    started = dt.datetime.now(dt.timezone.utc)
    t0 = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        if hasattr(args, "seed"):
            args.seed = _seed(args, needed=False)
        for name in ("trials", "lam", "max_n", "label_bits"):
            v = getattr(args, name, None)
            if v is not None and v < 0:
                raise ParameterError(f"--{name.replace('_', '-')} must be non-negative")
        metrics = args.func(args)
        _check_probabilities(metrics)
        report = {
            "command": " ".join(a for a in (args.command, getattr(args, "attack", None), getattr(args, "which", None),
                                            getattr(args, "rega", None), getattr(args, "lattice", None)) if a),
            "config": _config(args),
            "metrics": metrics,
            "version": __version__,
            "timestamp": {"started_utc": started.isoformat(timespec="seconds"),
                          "wall_clock_s": round(time.perf_counter() - t0, 6)},
        }
        text = dumps(report)
    except QLError as exc:
        print(dumps({"error": {"code": exc.code, "exit_code": exc.exit_code, "message": str(exc),
                               "type": type(exc).__name__}}))
        return exc.exit_code
    _write(args.report, text)
    print(text)
    if args.command == "selftest" and not metrics["all_passed"]:
        return 1
    return 0
