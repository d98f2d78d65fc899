"""Acceptance suite: one function per numbered criterion, each timed.

Every check is exact or runs on a fixed seed, so a run is reproducible.
`run_all` returns the results in order. `format_table` renders them for
the `selftest` command.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import lattice as L
from .actions import GGAMInstance, TranslationAction, WrappedAction
from .group_core import GroupSpec, factorizations, sample_uniform
from .harness import run_pair_reduction, run_cloner_reduction, run_twist_reduction
from .lightning import banknote_state, findh, gauss_sum_magnitudes, kgea_attack, verify
from .rega import (
    REGAActionSpec,
    dstar_support,
    large_count_scan,
    serial_collisions,
    qft_gaussian_pair_check,
    rega_acceptance_exact,
    rega_mint,
    rega_verify,
    round_means,
    toy_params,
    toy_params_rank2,
    validate_params,
    _shift_perm,
)
from .statevec import StateVector, fidelity, random_state

SEED = 20240601
TOTAL_BUDGET_S = 600.0


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0
    budget_s: float | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        shown = ", ".join(f"{k}={_fmt(v)}" for k, v in self.metrics.items())
        return f"[{status}] {self.number:2d}. {self.title} ({self.seconds:.2f}s) {shown}"

    def to_json(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "metrics": self.metrics, "seconds": self.seconds, "budget_s": self.budget_s}


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _rng(offset: int) -> np.random.Generator:
    return np.random.default_rng(SEED + offset)


# ---------------------------------------------------------------- 1-4

def projector_law() -> dict:
    rng = _rng(1)
    worst = 0.0
    count = 0
    for g in ("35", "2x9", "4x4x4"):
        model = GGAMInstance(GroupSpec.parse(g), 24, int(rng.integers(2**31)))
        for _ in range(200):
            psi = random_state(model.orbit_labels, rng)
            h = sample_uniform(model.spec, rng)
            p = verify(model, h, psi).accept_prob
            ref = abs(np.vdot(banknote_state(model, h).amps, psi.amps)) ** 2
            worst = max(worst, abs(p - ref))
            count += 1
    return {"states": count, "max_error": worst, "passed": worst <= 1e-9}


def _groups_dividing(n: int, cap: int) -> list[GroupSpec]:
    out = []
    for d in range(1, n + 1):
        if n % d == 0 and d <= cap:
            for f in factorizations(d):
                out.append(GroupSpec(f if f else (1,)))
    return out


def banknote_gram() -> dict:
    worst = 0.0
    groups = _groups_dividing(360, 512)
    for spec in groups:
        model = TranslationAction(spec)
        M = np.array([banknote_state(model, spec.element_at(i)).amps for i in range(spec.order)])
        gram = M.conj() @ M.T
        worst = max(worst, float(np.max(np.abs(gram - np.eye(spec.order)))))
    return {"groups": len(groups), "max_error": worst, "passed": worst <= 1e-9}


FINDH_GROUPS = ("7", "35", "2x9", "4x4x4", "2x3x5", "128", "3x3x3", "16x5")


def findh_exact() -> dict:
    rng = _rng(3)
    models = {g: GGAMInstance(GroupSpec.parse(g), 24, i) for i, g in enumerate(FINDH_GROUPS)}
    wrong = 0
    min_p = min_f = 1.0
    for _ in range(100):
        model = models[FINDH_GROUPS[int(rng.integers(len(FINDH_GROUPS)))]]
        h = sample_uniform(model.spec, rng)
        note = banknote_state(model, h)
        r = findh(model, note, rng)
        wrong += int(r.serial != h)
        min_p = min(min_p, r.probability)
        min_f = min(min_f, fidelity(note, r.post_state))
    ok = wrong == 0 and min_p >= 1 - 1e-10 and min_f >= 1 - 1e-10
    return {"pairs": 100, "wrong_serial": wrong, "min_probability": min_p, "min_fidelity": min_f, "passed": ok}


def kgea_flatness() -> dict:
    dev = gauss = 0.0
    Ns = list(range(3, 258, 2))
    for N in Ns:
        res = kgea_attack(TranslationAction(GroupSpec((N,))))
        dev = max(dev, res.max_deviation)
        gauss = max(gauss, float(np.max(np.abs(gauss_sum_magnitudes(N) - math.sqrt(N)))))
    return {"odd_N": len(Ns), "max_deviation": dev, "max_gauss_error": gauss,
            "passed": dev < 1e-9 and gauss < 1e-9}


# ---------------------------------------------------------------- 5-8

D2X_GROUPS = ("8", "35", "4x4x4", "128")


def d2x_reduction() -> dict:
    rng = _rng(5)
    out: dict = {}
    ok = True
    for g in D2X_GROUPS:
        base = GGAMInstance(GroupSpec.parse(g), 16, int(rng.integers(2**31)))
        ideal = run_cloner_reduction(base, "ideal", trials=3, rng=rng)
        meas = run_cloner_reduction(base, "measured", trials=3, rng=rng)
        exact = (abs(ideal.swap_real - 1.0) <= 1e-9 and abs(ideal.swap_random - 0.5) <= 1e-9
                 and abs(ideal.advantage - 0.5) <= 1e-9)
        ok &= exact and meas.advantage < 0.01
        out[f"adv_ideal[{g}]"] = ideal.advantage
        out[f"adv_measured[{g}]"] = meas.advantage
    out["passed"] = ok
    return out


def pair_reduction() -> dict:
    rng = _rng(6)
    out: dict = {}
    ok = True
    for g in ("7", "15", "3x3"):
        base = GGAMInstance(GroupSpec.parse(g), 12, int(rng.integers(2**31)))
        rep = run_pair_reduction(base, "complementary", trials=3, rng=rng)
        mv = rep.extra["min_verify"]
        ok &= (mv >= 1 - 1e-9 and abs(rep.swap_real - 1.0) <= 1e-9 and abs(rep.swap_random - 0.5) <= 1e-9)
        out[f"min_verify[{g}]"] = mv
        out[f"swap[{g}]"] = f"{rep.swap_real:.6f}/{rep.swap_random:.6f}"
    out["passed"] = ok
    return out


TWIST_GROUPS = ("2", "3", "5", "8", "2x2", "12", "2x3x5", "7x7", "4x4x4", "64")


def twist_simulation() -> dict:
    rng = _rng(7)
    mism = law = tm = 0
    for g in TWIST_GROUPS:
        spec = GroupSpec.parse(g)
        base = GGAMInstance(spec, 12, int(rng.integers(2**31)))
        rep = run_twist_reduction(base, trials=20, rng=rng)
        mism += rep.extra["label_mismatches"]
        law += rep.extra["twist_law_failures"]
        tm += rep.extra["transcript_mismatches"]
    return {"groups": len(TWIST_GROUPS), "label_mismatches": mism, "twist_law_failures": law,
            "transcript_mismatches": tm, "passed": mism == 0 and law == 0 and tm == 0}


def wrapped_sparsity() -> dict:
    rng = _rng(8)
    draws = 10_000
    out: dict = {}
    ok = True
    for g, bits in (("8", 4), ("35", 8), ("4x4x4", 8)):
        base = GGAMInstance(GroupSpec.parse(g), bits, int(rng.integers(2**31)))
        x = base.start()
        W = WrappedAction(base, (1, 1), (x, base.act(sample_uniform(base.spec, rng), x)),
                          seed=int(rng.integers(2**31)), slack_bits=16)
        assert W.label_bits == 2 * bits + 16
        nbytes = len(W.start())
        hits = 0
        for _ in range(draws):
            v = int(rng.integers(0, 2**W.label_bits))
            hits += int(W.member(v.to_bytes(nbytes, "big")))
        p = base.spec.order / 2**W.label_bits
        sd = math.sqrt(draws * p * (1 - p))
        ok &= abs(hits - draws * p) <= 3 * sd
        out[f"hits[{g}]"] = f"{hits} (expected {draws * p:.3g}, 3sd {3 * sd:.3g})"
    out["passed"] = ok
    return out


# ---------------------------------------------------------------- 9-12

def _validated_toys():
    out = []
    for p in (toy_params(), toy_params_rank2()):
        rspec = REGAActionSpec(p.N, p.A, p.B)
        if validate_params(p, rspec).ok:
            out.append((p, rspec))
    return out


def _honest_round_min(p, rspec, t, note: StateVector) -> float:
    X, _ = dstar_support(p)
    psi = note.amps
    worst = 1.0
    for x in X:
        perm = _shift_perm(rspec, x)
        moved = np.zeros_like(psi)
        moved[perm] = psi
        theta = 2 * math.pi * (int(x @ t) % p.N) / p.N
        c0 = (psi + np.exp(-1j * theta) * moved) / 2
        worst = min(worst, float(np.vdot(c0, c0).real))
    return worst


def rega_constants() -> dict:
    rng = _rng(9)
    toys = _validated_toys()
    out: dict = {"validated_toys": len(toys)}
    ok = bool(toys)
    trials = 200
    for p, rspec in toys:
        tag = "x".join(map(str, rspec.orders))
        honest_round = 1.0
        wrong_mean = 0.0
        honest_exact = 1.0
        wrong_exact = 0.0
        honest_acc = wrong_acc = 0
        G = rspec.spec.order
        for _ in range(trials):
            bn = rega_mint(p, rspec, rng)
            t = bn.serial_t
            honest_round = min(honest_round, _honest_round_min(p, rspec, t, bn.note))
            means = round_means(p, rspec, t)
            h = bn.h_witness.index
            wrong_mean = max(wrong_mean, float(np.delete(means, h).max()))
            honest_exact = min(honest_exact, rega_acceptance_exact(p, rspec, t, bn.note))
            honest_acc += int(rega_verify(p, rspec, t, bn.note, rng).accepted)
            other = rspec.spec.element_at((h + 1 + int(rng.integers(G - 1))) % G)
            fake = banknote_state(rspec.base, other)
            wrong_exact = max(wrong_exact, rega_acceptance_exact(p, rspec, t, fake))
            wrong_acc += int(rega_verify(p, rspec, t, fake, rng).accepted)
        ok &= (honest_round >= 0.9614 and wrong_mean <= 0.8481 + 0.01 and honest_exact >= 0.999
               and wrong_exact <= 1e-3 and honest_acc / trials >= 0.999 and wrong_acc / trials <= 1e-3)
        out.update({f"min_honest_round[{tag}]": honest_round, f"max_wrong_mean[{tag}]": wrong_mean,
                    f"min_honest_accept[{tag}]": honest_exact, f"max_wrong_accept[{tag}]": wrong_exact,
                    f"sampled[{tag}]": f"{honest_acc}/{trials} honest, {wrong_acc}/{trials} wrong"})
    out["passed"] = ok
    return out


def large_count_check() -> dict:
    rows = large_count_scan(256)
    bad = [r for r in rows if r[2] != r[3]]
    return {"subgroups": len(rows), "mismatches": len(bad), "passed": not bad}


def serial_injectivity() -> dict:
    toys = _validated_toys()
    total = sum(serial_collisions(p, rspec) for p, rspec in toys)
    return {"validated_toys": len(toys), "collisions": total, "passed": bool(toys) and total == 0}


def gaussian_fourier_pair() -> dict:
    d = qft_gaussian_pair_check(8.0, 256)
    return {"distance": d, "passed": d <= 1e-3}


# ---------------------------------------------------------------- 13-14

def lattice_attack() -> dict:
    rng = _rng(13)
    p = L.attack_toy()
    trials = 100
    min_support = 1.0
    min_reject = 1.0
    sis_ok = 0
    for _ in range(trials):
        n = L.folklore_mint(p, rng)
        fake = L.folklore_attack(n.note, rng)
        min_support = min(min_support, L.support_verifier(p, n.h, fake))
        min_reject = min(min_reject, 1 - L.ideal_membership_projector(p, fake))
        s = L.sis_from_two_notes(p, n.note, L.honest_note(p, n.h), n.h, rng)
        sis_ok += int(s.kernel_ok and s.nonzero)
    fourier = L.fourier_equivalence_check(L.fourier_toy()).min_fidelity
    ok = min_support >= 1 - 1e-12 and min_reject >= 0.99 and sis_ok >= 99 and fourier >= 0.99
    return {"fake_support_accept": min_support, "min_projector_reject": min_reject,
            "sis_nonzero": f"{sis_ok}/{trials}", "fourier_fidelity": fourier, "passed": ok}


FLOODING_SIGMAS = (4, 8, 16, 32)


def flooding() -> dict:
    ds = [L.flooding_check(L.flooding_toy(s), [1, 0]) for s in FLOODING_SIGMAS]
    dec = all(b < a for a, b in zip(ds, ds[1:]))
    return {"distances": [round(d, 6) for d in ds], "passed": dec}


# ---------------------------------------------------------------- runner

CRITERIA: list[tuple[int, str, Callable[[], dict], float | None]] = [
    (1, "verify probability equals banknote overlap", projector_law, 30.0),
    (2, "banknote basis is orthonormal", banknote_gram, 60.0),
    (3, "serial extraction is exact and non-disturbing", findh_exact, None),
    (4, "quadratic-phase attack output is uniform", kgea_flatness, 60.0),
    (5, "cloner-to-D2X distinguisher advantages", d2x_reduction, None),
    (6, "complementary pair gives a DDH distinguisher", pair_reduction, None),
    (7, "simulated twist matches a native twist", twist_simulation, None),
    (8, "wrapped member set is sparse", wrapped_sparsity, None),
    (9, "restricted-action verification constants", rega_constants, 300.0),
    (10, "large-element count formula", large_count_check, None),
    (11, "noisy serial map is injective", serial_injectivity, None),
    (12, "Gaussian QFT pair", gaussian_fourier_pair, None),
    (13, "folklore note cloning attack and SIS", lattice_attack, None),
    (14, "flooding distance shrinks with sigma", flooding, None),
]


def run_criterion(number: int, title: str, fn: Callable[[], dict], budget: float | None) -> CriterionResult:
    t0 = time.perf_counter()
    try:
        metrics = fn()
        passed = bool(metrics.pop("passed"))
    except Exception as exc:  # a crash is a failed criterion, reported not raised
        metrics, passed = {"error": f"{type(exc).__name__}: {exc}"}, False
    dt = time.perf_counter() - t0
    if budget is not None:
        metrics["budget_s"] = budget
        passed = passed and dt < budget
    return CriterionResult(number, title, passed, metrics, dt, budget)


def run_all(only: set[int] | None = None, echo: Callable[[str], None] | None = None) -> list[CriterionResult]:
    results = []
    t0 = time.perf_counter()
    for number, title, fn, budget in CRITERIA:
        if only and number not in only:
            continue
        r = run_criterion(number, title, fn, budget)
        results.append(r)
        if echo:
            echo(r.line())
    if not only or 15 in only:
        total = time.perf_counter() - t0
        green = all(r.passed for r in results) and len(results) == len(CRITERIA)
        r = CriterionResult(15, "full selftest under ten minutes, all green",
                            green and total < TOTAL_BUDGET_S,
                            {"total_s": round(total, 2), "all_green": green}, total, TOTAL_BUDGET_S)
        results.append(r)
        if echo:
            echo(r.line())
    return results


def format_table(results: list[CriterionResult]) -> str:
    return "\n".join(r.line() for r in results)
