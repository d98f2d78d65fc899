"""Dense statevectors over ordered label bases.

A basis is a tuple of distinct byte strings. Group-indexed registers use the
canonical element encoding in mixed-radix order, so the amplitude at position
i belongs to element_at(spec, i) and the group QFT is a per-axis DFT.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import (
    CapExceededError,
    DegenerateCollapseError,
    ParameterError,
    PermutationError,
    SpecMismatchError,
)
from .group_core import GroupElement, GroupSpec

SINGLE_CAP = 4096
JOINT_CAP = 2**22
NORM_TOL = 1e-9

Label = bytes


class _Invalid:
    """Out-of-band marker returned by actions on non-member labels."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "INVALID"

    def __bool__(self):
        return False


INVALID = _Invalid()


def _residue_width(spec: GroupSpec) -> int:
    bits = max((n - 1).bit_length() for n in spec.moduli)
    return max(1, (bits + 7) // 8)


def encode_element(g: GroupElement) -> Label:
    w = _residue_width(g.spec)
    return b"".join(r.to_bytes(w, "big") for r in g.residues)


def decode_element(spec: GroupSpec, label: Label) -> GroupElement | None:
    w = _residue_width(spec)
    if not isinstance(label, bytes) or len(label) != w * spec.rank:
        return None
    res = [int.from_bytes(label[i * w:(i + 1) * w], "big") for i in range(spec.rank)]
    if any(r >= n for r, n in zip(res, spec.moduli)):
        return None
    return GroupElement(spec, tuple(res))


@lru_cache(maxsize=64)
def group_basis(spec: GroupSpec) -> tuple[Label, ...]:
    w = _residue_width(spec)
    tab = spec.residue_table
    return tuple(b"".join(int(r).to_bytes(w, "big") for r in row) for row in tab)


class StateVector:
    """Normalised amplitude vector over an ordered tuple of distinct labels."""

    def __init__(self, basis: Sequence[Label], amps, *, normalize: bool = False, check: bool = True):
        basis = tuple(basis)
        amps = np.array(amps, dtype=complex).reshape(-1)
        if len(basis) != amps.shape[0]:
            raise ParameterError("basis and amplitude lengths differ")
        if not basis:
            raise ParameterError("empty basis")
        if normalize:
            nrm = np.linalg.norm(amps)
            if nrm == 0:
                raise DegenerateCollapseError("cannot normalise the zero vector")
            amps = amps / nrm
        if check:
            if len(set(basis)) != len(basis):
                raise ParameterError("basis labels must be distinct")
            nrm2 = float(np.vdot(amps, amps).real)
            if abs(nrm2 - 1.0) > NORM_TOL:
                raise ParameterError(f"state not normalised: norm^2 = {nrm2}")
        amps.setflags(write=False)
        self.basis = basis
        self.amps = amps

    @property
    def dim(self) -> int:
        return len(self.basis)

    @cached_property
    def position(self) -> dict[Label, int]:
        return {lab: i for i, lab in enumerate(self.basis)}

    def amp(self, label: Label) -> complex:
        i = self.position.get(label)
        return 0j if i is None else complex(self.amps[i])

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def embed(self, basis: Sequence[Label]) -> "StateVector":
        """Re-express over a larger basis that contains every supported label."""
        basis = tuple(basis)
        pos = {lab: i for i, lab in enumerate(basis)}
        out = np.zeros(len(basis), dtype=complex)
        for lab, a in zip(self.basis, self.amps):
            if a == 0:
                continue
            if lab not in pos:
                raise SpecMismatchError("target basis misses a supported label")
            out[pos[lab]] += a
        return StateVector(basis, out)

    def to_json(self) -> dict:
        return {
            "basis": [lab.hex() for lab in self.basis],
            "amps": [[float(a.real), float(a.imag)] for a in self.amps],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StateVector":
        basis = [bytes.fromhex(h) for h in obj["basis"]]
        amps = [complex(re, im) for re, im in obj["amps"]]
        return cls(basis, amps)

    def __repr__(self):
        return f"StateVector(dim={self.dim})"


def basis_state(basis: Sequence[Label], label: Label) -> StateVector:
    basis = tuple(basis)
    amps = np.zeros(len(basis), dtype=complex)
    try:
        amps[basis.index(label)] = 1.0
    except ValueError:
        raise ParameterError("label not in basis") from None
    return StateVector(basis, amps, check=False)


def group_state(spec: GroupSpec, amps, *, normalize: bool = False) -> StateVector:
    if spec.order > SINGLE_CAP:
        raise CapExceededError(f"|G| = {spec.order} exceeds single-register cap {SINGLE_CAP}")
    return StateVector(group_basis(spec), amps, normalize=normalize)


def random_state(basis: Sequence[Label], rng: np.random.Generator) -> StateVector:
    v = rng.normal(size=len(basis)) + 1j * rng.normal(size=len(basis))
    return StateVector(basis, v, normalize=True)


def qft_array(spec: GroupSpec, amps: np.ndarray, direction: str = "forward", axis: int = 0) -> np.ndarray:
    """Group QFT along one axis of an amplitude array.

    forward: |g> -> |G|^{-1/2} sum_h chi(g,h) |h>, which is numpy's orthonormal
    inverse DFT along each cyclic factor; inverse is the orthonormal forward DFT.
    """
    if direction not in ("forward", "inverse"):
        raise ParameterError(f"unknown QFT direction {direction!r}")
    amps = np.moveaxis(np.asarray(amps, dtype=complex), axis, 0)
    rest = amps.shape[1:]
    cube = amps.reshape(spec.moduli + rest)
    axes = tuple(range(spec.rank))
    fn = np.fft.ifftn if direction == "forward" else np.fft.fftn
    out = fn(cube, axes=axes, norm="ortho").reshape((spec.order,) + rest)
    return np.moveaxis(out, 0, axis)


def _require_group_basis(state: StateVector, spec: GroupSpec) -> None:
    if state.basis != group_basis(spec):
        raise SpecMismatchError("state basis is not the group-indexed basis")


def qft_group(state: StateVector, spec: GroupSpec, direction: str = "forward") -> StateVector:
    _require_group_basis(state, spec)
    return StateVector(state.basis, qft_array(spec, state.amps, direction), check=False)


def apply_group_phase(state: StateVector, spec: GroupSpec, f: Callable[[GroupElement], float]) -> StateVector:
    _require_group_basis(state, spec)
    phases = np.array([f(spec.element_at(i)) for i in range(spec.order)], dtype=float)
    return StateVector(state.basis, state.amps * np.exp(1j * phases), check=False)


def _permuted_positions(basis, pi) -> tuple[Label, ...]:
    new = tuple(pi(lab) for lab in basis)
    if any(lab is INVALID or lab is None for lab in new) or len(set(new)) != len(new):
        raise PermutationError("map is not injective on the basis")
    return new


def apply_label_permutation(state, pi, register: int = 0, control: int | None = None):
    """Relabel basis states by an injective map.

    For a StateVector the basis itself is relabelled. For a JointState the map
    acts on one register; when `control` names another register, pi receives
    (control_label, target_label) and must map the target register's basis
    onto itself for every control value.
    """
    if isinstance(state, StateVector):
        if control is not None:
            raise ParameterError("a single register cannot be controlled")
        return StateVector(_permuted_positions(state.basis, pi), state.amps, check=False)
    if not isinstance(state, JointState):
        raise ParameterError("expected a StateVector or JointState")
    bases = state.bases
    target = bases[register]
    if control is None:
        new_basis = _permuted_positions(target, pi)
        return JointState(bases[:register] + (new_basis,) + bases[register + 1:], state.amps, check=False)
    if control == register:
        raise ParameterError("control and target must differ")
    pos = {lab: i for i, lab in enumerate(target)}
    arr = np.moveaxis(state.amps, (control, register), (0, 1))
    out = np.zeros_like(arr)
    for ci, clab in enumerate(bases[control]):
        dest = np.empty(len(target), dtype=np.int64)
        for ti, tlab in enumerate(target):
            img = pi(clab, tlab)
            j = pos.get(img) if isinstance(img, bytes) else None
            if j is None:
                raise PermutationError("controlled map leaves the target basis")
            dest[ti] = j
        if len(set(dest.tolist())) != len(dest):
            raise PermutationError("controlled map is not injective")
        out[ci, dest] = arr[ci]
    return JointState(bases, np.moveaxis(out, (0, 1), (control, register)), check=False)


class JointState:
    """Amplitude tensor over the cartesian product of per-register bases."""

    def __init__(self, bases: Sequence[Sequence[Label]], amps, *, check: bool = True, normalize: bool = False):
        bases = tuple(tuple(b) for b in bases)
        shape = tuple(len(b) for b in bases)
        if math.prod(shape) > JOINT_CAP:
            raise CapExceededError(f"joint dimension {math.prod(shape)} exceeds cap {JOINT_CAP}")
        amps = np.array(amps, dtype=complex).reshape(shape)
        if normalize:
            nrm = np.linalg.norm(amps)
            if nrm == 0:
                raise DegenerateCollapseError("cannot normalise the zero vector")
            amps = amps / nrm
        if check:
            for b in bases:
                if len(set(b)) != len(b):
                    raise ParameterError("basis labels must be distinct")
            nrm2 = float(np.vdot(amps, amps).real)
            if abs(nrm2 - 1.0) > NORM_TOL:
                raise ParameterError(f"joint state not normalised: norm^2 = {nrm2}")
        amps.setflags(write=False)
        self.bases = bases
        self.amps = amps

    @property
    def arity(self) -> int:
        return len(self.bases)

    def reorder(self, register: int, basis: Sequence[Label]) -> "JointState":
        """Same state with one register's basis listed in a given order."""
        basis = tuple(basis)
        pos = {lab: i for i, lab in enumerate(self.bases[register])}
        if set(pos) != set(basis):
            raise SpecMismatchError("reorder needs the same label set")
        perm = [pos[lab] for lab in basis]
        amps = np.take(self.amps, perm, axis=register)
        bases = self.bases[:register] + (basis,) + self.bases[register + 1:]
        return JointState(bases, amps, check=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.amps.shape

    def __repr__(self):
        return f"JointState(shape={self.shape})"


def tensor(*states) -> JointState:
    bases: list = []
    amps = np.ones((), dtype=complex)
    for s in states:
        if isinstance(s, JointState):
            bases.extend(s.bases)
            sa = s.amps
        else:
            bases.append(s.basis)
            sa = s.amps
        dim = amps.size * sa.size
        if dim > JOINT_CAP:
            raise CapExceededError(f"joint dimension {dim} exceeds cap {JOINT_CAP}")
        amps = np.multiply.outer(amps, sa)
    return JointState(bases, amps, check=False)


def inner(s1: StateVector, s2: StateVector) -> complex:
    """Hermitian inner product <s1|s2>; bases are aligned by label."""
    if s1.basis == s2.basis:
        return complex(np.vdot(s1.amps, s2.amps))
    pos = s2.position
    total = 0j
    for lab, a in zip(s1.basis, s1.amps):
        j = pos.get(lab)
        if j is not None:
            total += np.conj(a) * s2.amps[j]
    return complex(total)


def fidelity(s1: StateVector, s2: StateVector) -> float:
    return abs(inner(s1, s2)) ** 2


@dataclass
class Measurement:
    distribution: dict
    outcome: Label
    collapsed: object
    probability: float


def measure_register(joint, register: int = 0, rng: np.random.Generator | None = None,
                     outcome: Label | None = None) -> Measurement:
    """Exact outcome distribution of one register, a sample, and the collapse.

    The collapsed state has the measured register removed (a StateVector when
    one register remains). Pass `outcome` to condition instead of sampling.
    """
    if isinstance(joint, StateVector):
        probs = joint.probabilities()
        basis = joint.basis
    else:
        axes = tuple(i for i in range(joint.arity) if i != register)
        probs = (np.abs(joint.amps) ** 2).sum(axis=axes)
        basis = joint.bases[register]
    dist = {lab: float(p) for lab, p in zip(basis, probs)}
    if outcome is None:
        if rng is None:
            raise ParameterError("sampling needs an rng (or an explicit outcome)")
        p = probs / probs.sum()
        k = int(rng.choice(len(basis), p=p))
        outcome = basis[k]
    else:
        try:
            k = basis.index(outcome)
        except ValueError:
            raise ParameterError("outcome label not in register basis") from None
    pk = float(probs[k])
    if pk <= 0:
        raise DegenerateCollapseError("conditioning on a zero-probability outcome")
    if isinstance(joint, StateVector):
        collapsed = basis_state(basis, outcome)
    else:
        sl = np.take(joint.amps, k, axis=register) / math.sqrt(pk)
        rest = joint.bases[:register] + joint.bases[register + 1:]
        collapsed = StateVector(rest[0], sl) if len(rest) == 1 else JointState(rest, sl)
    return Measurement(dist, outcome, collapsed, pk)


def swap_test(s1: StateVector, s2: StateVector, rng: np.random.Generator | None = None):
    """Exact acceptance (1 + |<s1|s2>|^2)/2 and, given an rng, a sampled bit."""
    if s1.basis != s2.basis:
        raise SpecMismatchError("swap test needs identical bases (embed first)")
    p = (1.0 + abs(np.vdot(s1.amps, s2.amps)) ** 2) / 2.0
    p = min(1.0, max(0.5, p))
    bit = None if rng is None else int(rng.random() < p)
    return p, bit


def swap_test_circuit(s1: StateVector, s2: StateVector) -> float:
    """Acceptance from the explicit circuit: H, controlled-SWAP, H, measure 0."""
    if s1.basis != s2.basis:
        raise SpecMismatchError("swap test needs identical bases")
    pair = np.multiply.outer(s1.amps, s2.amps)
    branch0 = (pair + pair.T) / 2.0
    return float(np.vdot(branch0, branch0).real)


def align(s1: StateVector, s2: StateVector) -> tuple[StateVector, StateVector]:
    """Embed two states into the union of their bases (s1's order first)."""
    if s1.basis == s2.basis:
        return s1, s2
    extra = [lab for lab in s2.basis if lab not in s1.position]
    union = s1.basis + tuple(extra)
    return s1.embed(union), s2.embed(union)


def state_to_json_str(state: StateVector) -> str:
    return json.dumps(state.to_json(), sort_keys=True)
