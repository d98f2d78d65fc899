"""Lightning over a regular group action: mint, projector verification,
serial extraction, its coherent form, the oblivious-sampling attack on
cyclic groups, and the complementary-pair procedure.

Money-register states are handled as amplitude vectors over the model's orbit
in group-index order; arbitrary StateVectors are projected onto it first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .actions import ActionModel
from .errors import CapExceededError, FindhDomainError, ParameterError, PreconditionError
from .group_core import GroupElement, GroupSpec
from .statevec import (
    JOINT_CAP,
    SINGLE_CAP,
    JointState,
    StateVector,
    group_basis,
    measure_register,
    qft_array,
)

CHUNK_ELEMS = 2**20
DOMAIN_TOL = 1e-9


@dataclass
class Banknote:
    serial: GroupElement
    note: StateVector
    model: ActionModel = field(repr=False)

    def to_json(self) -> dict:
        return {
            "action": self.model.descriptor(),
            "serial": list(self.serial.residues),
            "state": self.note.to_json(),
        }


def _check_cap(spec: GroupSpec) -> None:
    if spec.order > SINGLE_CAP:
        raise CapExceededError(f"|G| = {spec.order} exceeds single-register cap {SINGLE_CAP}")


def banknote_amps(spec: GroupSpec, h: GroupElement) -> np.ndarray:
    """chi(g, h)/sqrt|G| for g in index order."""
    return spec.chi_row(h.index) / math.sqrt(spec.order)


def banknote_state(model: ActionModel, h: GroupElement) -> StateVector:
    _check_cap(model.spec)
    return StateVector(model.orbit_labels, banknote_amps(model.spec, h), check=False)


def orbit_vector(model: ActionModel, state: StateVector) -> tuple[np.ndarray, float]:
    """Amplitudes on the orbit (index order) and the mass found off it."""
    v = np.zeros(model.spec.order, dtype=complex)
    off = 0.0
    for lab, a in zip(state.basis, state.amps):
        i = model.index_of(lab)
        if i is None:
            off += abs(a) ** 2
        else:
            v[i] += a
    return v, off


def _kickback(spec: GroupSpec, v: np.ndarray, rows=()):
    """Phase-kickback circuit on an orbit-indexed array v of shape (|G|, ...).

    Ancilla |u> uniform, money |g> -> |g - u>, inverse QFT on the ancilla.
    Returns the outcome distribution over the ancilla and, for each requested
    outcome, the conditional (unnormalised) money amplitudes.
    """
    G = spec.order
    rest = v.shape[1:]
    per_col = G * max(1, math.prod(rest))
    step = max(1, CHUNK_ELEMS // per_col)
    u = np.arange(G)[:, None]
    probs = np.zeros(G)
    out = {int(r): np.zeros((G,) + rest, dtype=complex) for r in rows}
    scale = 1.0 / math.sqrt(G)
    for start in range(0, G, step):
        gp = np.arange(start, min(G, start + step))
        idx = spec.add_indices(u, gp[None, :])
        block = qft_array(spec, v[idx] * scale, "inverse", axis=0)
        probs += (np.abs(block) ** 2).reshape(G, -1).sum(axis=1)
        for r, buf in out.items():
            buf[gp] = block[r]
    return probs, out


@dataclass
class VerifyResult:
    accept_prob: float
    accepted: bool | None
    post_state: StateVector | None
    membership_mass: float
    serial_distribution: np.ndarray = field(repr=False)


def verify(model: ActionModel, h: GroupElement, state: StateVector,
           rng: np.random.Generator | None = None) -> VerifyResult:
    """Membership projection then the kickback circuit; accept iff the
    ancilla reads h. The acceptance probability is exact."""
    spec = model.spec
    _check_cap(spec)
    v, off = orbit_vector(model, state)
    mem = float(np.vdot(v, v).real)
    if mem <= 0:
        accepted = None if rng is None else False
        return VerifyResult(0.0, accepted, None, 0.0, np.zeros(spec.order))
    probs, rows = _kickback(spec, v / math.sqrt(mem), rows=(h.index,))
    p = float(min(1.0, mem * probs[h.index]))
    post = None
    if probs[h.index] > 0:
        post = StateVector(model.orbit_labels, rows[h.index] / math.sqrt(probs[h.index]), normalize=True)
    accepted = None if rng is None else bool(rng.random() < p)
    return VerifyResult(p, accepted, post, mem, probs)


@dataclass
class FindhResult:
    serial: GroupElement
    post_state: StateVector
    probability: float
    distribution: np.ndarray = field(repr=False)


def findh(model: ActionModel, state: StateVector, rng: np.random.Generator | None = None,
          outcome: GroupElement | None = None) -> FindhResult:
    """Serial extraction. With no rng (and no forced outcome) the most likely
    serial is reported."""
    spec = model.spec
    _check_cap(spec)
    v, off = orbit_vector(model, state)
    if off > DOMAIN_TOL:
        raise FindhDomainError(f"state has mass {off:.3g} outside the member set")
    probs, _ = _kickback(spec, v)
    if outcome is not None:
        k = outcome.index
    elif rng is not None:
        k = int(rng.choice(spec.order, p=probs / probs.sum()))
    else:
        k = int(np.argmax(probs))
    if probs[k] <= 0:
        raise FindhDomainError("requested serial has zero probability")
    _, rows = _kickback(spec, v, rows=(k,))
    post = StateVector(model.orbit_labels, rows[k] / math.sqrt(probs[k]), normalize=True)
    return FindhResult(spec.element_at(k), post, float(probs[k]), probs)


def findh_coherent(model: ActionModel, joint: JointState, direction: str = "forward") -> JointState:
    """Findh without the final measurement, on (money, serial) registers.

    forward maps |G^h*x>|0> to |G^h*x>|h>; inverse undoes it.
    """
    spec = model.spec
    if joint.arity != 2 or joint.bases[1] != group_basis(spec):
        raise ParameterError("expected registers (money, group-indexed serial)")
    if joint.bases[0] != model.orbit_labels:
        raise ParameterError("money register must use the model's orbit basis")
    amps = np.asarray(joint.amps)
    G = spec.order
    if direction == "forward":
        stray = float((np.abs(amps[:, 1:]) ** 2).sum())
        if stray > DOMAIN_TOL:
            raise PreconditionError(f"serial register not |0> (stray mass {stray:.3g})")
    elif direction != "inverse":
        raise ParameterError(f"unknown direction {direction!r}")
    a = qft_array(spec, amps, "forward", axis=1)
    g = np.arange(G)[:, None]
    u = np.arange(G)[None, :]
    if direction == "forward":
        src = spec.add_indices(g, u)  # new[g', u] = old[g' + u, u]
    else:
        src = spec.add_indices(g, spec.neg_indices(u))  # new[g, u] = old[g - u, u]
    a = a[src, np.broadcast_to(u, src.shape)]
    a = qft_array(spec, a, "inverse", axis=1)
    return JointState(joint.bases, a, check=False)


def mint_joint_state(model: ActionModel) -> JointState:
    """(serial, money) registers just before the serial is measured."""
    spec = model.spec
    G = spec.order
    if G * G > JOINT_CAP:
        raise CapExceededError("pre-measurement joint state exceeds cap")
    diag = np.eye(G, dtype=complex) / math.sqrt(G)
    return JointState((group_basis(spec), model.orbit_labels), qft_array(spec, diag, "forward", axis=0), check=False)


def serial_distribution(model: ActionModel) -> np.ndarray:
    """Exact serial marginal of minting, from the pre-measurement amplitudes."""
    spec = model.spec
    G = spec.order
    probs = np.zeros(G)
    step = max(1, CHUNK_ELEMS // G)
    for start in range(0, G, step):
        cols = np.arange(start, min(G, start + step))
        block = np.zeros((G, len(cols)), dtype=complex)
        block[cols, np.arange(len(cols))] = 1.0 / math.sqrt(G)
        probs += (np.abs(qft_array(spec, block, "forward", axis=0)) ** 2).sum(axis=1)
    return probs


def mint(model: ActionModel, rng: np.random.Generator) -> Banknote:
    spec = model.spec
    _check_cap(spec)
    G = spec.order
    if G * G <= JOINT_CAP:
        m = measure_register(mint_joint_state(model), 0, rng)
        serial = spec.element_at(group_basis(spec).index(m.outcome))
        return Banknote(serial, m.collapsed, model)
    probs = serial_distribution(model)
    k = int(rng.choice(G, p=probs / probs.sum()))
    # row k of the pre-measurement state is chi(., h)/|G|; renormalise
    row = qft_array(spec, _unit(G, k), "forward")
    return Banknote(spec.element_at(k), StateVector(model.orbit_labels, row, normalize=True), model)


def _unit(G: int, k: int) -> np.ndarray:
    e = np.zeros(G, dtype=complex)
    e[k] = 1.0
    return e


# ---------------------------------------------------------------- attack

def quadratic_phase(N: int) -> Callable[[GroupElement], float]:
    def F(h: GroupElement) -> float:
        r = h.residues[0]
        return 2 * math.pi * ((r * r) % N) / N
    return F


def gauss_sum_magnitudes(N: int) -> np.ndarray:
    """|sum_h exp(2 pi i (g h + h^2)/N)| for every g, phases reduced exactly."""
    h = np.arange(N, dtype=np.int64)
    out = np.empty(N)
    for g in range(N):
        frac = (g * h + h * h) % N
        out[g] = abs(np.exp(2j * np.pi * frac / N).sum())
    return out


@dataclass
class KGEAResult:
    labels: tuple
    distribution: np.ndarray
    sampled: bytes | None
    residual_serial_mass: float

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.distribution - 1.0 / len(self.labels))))


def kgea_attack(model: ActionModel, phase: str | Callable[[GroupElement], float] = "quadratic",
                rng: np.random.Generator | None = None) -> KGEAResult:
    """Start from |x>, extract the serial coherently, imprint a phase on it,
    uncompute and measure the money register."""
    spec = model.spec
    if phase == "quadratic":
        if spec.rank != 1 or spec.order % 2 == 0:
            raise ParameterError("quadratic phase needs a cyclic group of odd order")
        F = quadratic_phase(spec.order)
    elif callable(phase):
        F = phase
    else:
        raise ParameterError(f"unknown phase {phase!r}")
    G = spec.order
    amps = np.zeros((G, G), dtype=complex)
    amps[0, 0] = 1.0
    joint = JointState((model.orbit_labels, group_basis(spec)), amps, check=False)
    joint = findh_coherent(model, joint, "forward")
    ph = np.exp(1j * np.array([F(spec.element_at(i)) for i in range(G)]))
    joint = JointState(joint.bases, joint.amps * ph[None, :], check=False)
    joint = findh_coherent(model, joint, "inverse")
    probs_all = np.abs(joint.amps) ** 2
    residual = float(probs_all[:, 1:].sum())
    dist = probs_all.sum(axis=1)
    sampled = None
    if rng is not None:
        sampled = model.orbit_labels[int(rng.choice(G, p=dist / dist.sum()))]
    return KGEAResult(model.orbit_labels, dist, sampled, residual)


# ---------------------------------------------------------------- pairs

@dataclass
class PairResult:
    serial: GroupElement
    note_h: StateVector
    note_neg_h: StateVector
    distribution: np.ndarray = field(repr=False)
    rank_one_residual: float = 0.0


def complementary_pair_from_zero_note(model: ActionModel, state: StateVector,
                                      rng: np.random.Generator | None = None,
                                      outcome: GroupElement | None = None) -> PairResult:
    """Copy the basis (|x> -> |x,x>) of a serial-0 note and extract the serial
    of the first copy; the two registers end as |G^h*x>|G^{-h}*x>."""
    spec = model.spec
    zero = spec.zero()
    pre = verify(model, zero, state)
    if pre.accept_prob < 1 - 1e-9:
        raise PreconditionError(f"input verifies against 0 with probability {pre.accept_prob:.6g}")
    v, _ = orbit_vector(model, state)
    G = spec.order
    if G ** 3 > JOINT_CAP * 4:
        raise CapExceededError("pair procedure exceeds cap")
    W = np.diag(v)
    probs, _ = _kickback(spec, W)
    if outcome is not None:
        k = outcome.index
    elif rng is not None:
        k = int(rng.choice(G, p=probs / probs.sum()))
    else:
        k = int(np.argmax(probs))
    _, rows = _kickback(spec, W, rows=(k,))
    J = rows[k] / math.sqrt(probs[k])
    U, s, Vh = np.linalg.svd(J)
    resid = float(s[1]) if len(s) > 1 else 0.0
    a = StateVector(model.orbit_labels, U[:, 0] * s[0], normalize=True)
    b = StateVector(model.orbit_labels, Vh[0, :], normalize=True)
    return PairResult(spec.element_at(k), a, b, probs, resid)
