"""Group-action models: translation, generic (random-injection) labels,
wrapped tuple actions built on a base action, and the restricted action that
only applies short exponent vectors over a generator set.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import random
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    CapExceededError,
    InvariantViolation,
    ParameterError,
    RestrictedActionError,
    UnsupportedCapabilityError,
)
from .group_core import GroupElement, GroupSpec
from .statevec import INVALID, Label, decode_element, encode_element, group_basis

TABLE_CAP = 2**16


def _label_bytes(bits: int) -> int:
    return max(1, (bits + 7) // 8)


def int_label(value: int, bits: int) -> Label:
    return int(value).to_bytes(_label_bytes(bits), "big")


class ActionModel:
    """Regular action of a finite abelian group on opaque labels.

    Subclasses provide `_label_at(i)` (the label of element_at(i) acting on
    start) plus `act`. Orbit and discrete-log tables are built lazily; they are
    simulation privileges used for fast exact state manipulation.
    """

    kind = "abstract"
    supports_twist = False

    def __init__(self, spec: GroupSpec, label_bits: int):
        if spec.order > TABLE_CAP:
            raise CapExceededError(f"|G| = {spec.order} exceeds action table cap {TABLE_CAP}")
        self.spec = spec
        self.label_bits = int(label_bits)

    def _label_at(self, i: int) -> Label:
        raise NotImplementedError

    @cached_property
    def orbit_labels(self) -> tuple[Label, ...]:
        return tuple(self._label_at(i) for i in range(self.spec.order))

    @cached_property
    def _dlog(self) -> dict[Label, int]:
        table = {lab: i for i, lab in enumerate(self.orbit_labels)}
        if len(table) != self.spec.order:
            raise InvariantViolation("action is not regular")
        return table

    def start(self) -> Label:
        return self.orbit_labels[0]

    def member(self, label) -> bool:
        return isinstance(label, bytes) and label in self._dlog

    def index_of(self, label) -> int | None:
        if not isinstance(label, bytes):
            return None
        return self._dlog.get(label)

    def label_of(self, g: GroupElement) -> Label:
        return self.orbit_labels[g.index]

    def act(self, g: GroupElement, label):
        i = self.index_of(label)
        if i is None:
            return INVALID
        return self.orbit_labels[int(self.spec.add_indices(g.index, i))]

    def twist(self, label):
        raise UnsupportedCapabilityError(f"{self.kind} action has no twist")

    def descriptor(self) -> dict:
        raise NotImplementedError


class TranslationAction(ActionModel):
    """G acting on itself; labels are canonical element encodings."""

    kind = "translation"
    supports_twist = True

    def __init__(self, spec: GroupSpec):
        basis = group_basis(spec)
        super().__init__(spec, 8 * len(basis[0]))
        self._basis = basis

    def _label_at(self, i):
        return self._basis[i]

    def act(self, g, label):
        h = decode_element(self.spec, label)
        return INVALID if h is None else encode_element(g + h)

    def member(self, label):
        return decode_element(self.spec, label) is not None

    def twist(self, label):
        h = decode_element(self.spec, label)
        return INVALID if h is None else encode_element(-h)

    def descriptor(self):
        return {"kind": self.kind, "group": str(self.spec)}


class GGAMInstance(ActionModel):
    """Labels drawn as a uniformly random injection G -> {0,1}^m'."""

    kind = "ggam"

    def __init__(self, spec: GroupSpec, label_bits: int, seed: int, twist: bool = False):
        if 2**label_bits < spec.order:
            raise ParameterError(f"label_bits={label_bits} too small for |G|={spec.order}")
        super().__init__(spec, label_bits)
        self.seed = int(seed)
        self.supports_twist = bool(twist)
        rng = random.Random(self.seed)
        seen: set[int] = set()
        table = []
        while len(table) < spec.order:
            v = rng.getrandbits(label_bits)
            if v not in seen:
                seen.add(v)
                table.append(v)
        self._table = tuple(int_label(v, label_bits) for v in table)

    def _label_at(self, i):
        return self._table[i]

    def twist(self, label):
        if not self.supports_twist:
            return super().twist(label)
        i = self.index_of(label)
        if i is None:
            return INVALID
        return self.orbit_labels[int(self.spec.neg_indices(i))]

    def descriptor(self):
        d = {"kind": self.kind, "group": str(self.spec), "label_bits": self.label_bits, "seed": self.seed}
        if self.supports_twist:
            d["twist"] = True
        return d


def ggam_build(spec: GroupSpec, label_bits: int, seed: int, twist: bool = False) -> GGAMInstance:
    return GGAMInstance(spec, label_bits, seed, twist=twist)


class WrappedAction(ActionModel):
    """Labels Pi(Gamma(g)) with Gamma(g) = ((c_1 g)*y_1, ..., (c_k g)*y_k).

    Pi is a keyed hash into m'-bit strings, m' >= k*(base bits) + slack; its
    inverse is the table of every tuple hashed so far. A collision among
    hashed tuples is reported as an invariant violation (probability about
    q^2 / 2^m').
    """

    kind = "wrapped"

    def __init__(self, base: ActionModel, coeffs: Sequence[int], base_points: Sequence[Label],
                 seed: int, slack_bits: int = 16, label_bits: int | None = None):
        k = len(coeffs)
        if k < 1 or len(base_points) != k:
            raise ParameterError("need one base point per coefficient")
        min_bits = k * base.label_bits + int(slack_bits)
        bits = min_bits if label_bits is None else int(label_bits)
        if bits < min_bits:
            raise ParameterError(f"label_bits={bits} below k*base_bits+slack={min_bits}")
        for y in base_points:
            if not base.member(y):
                raise ParameterError("base points must be base-action members")
        super().__init__(base.spec, bits)
        self.base = base
        self.coeffs = tuple(int(c) for c in coeffs)
        self.base_points = tuple(base_points)
        self.seed = int(seed)
        self.slack_bits = int(slack_bits)
        self._key = hashlib.blake2b(f"wrapped:{self.seed}".encode(), digest_size=32).digest()
        self._inverse: dict[Label, tuple[Label, ...]] = {}
        self.supports_twist = (
            k == 2
            and (self.coeffs[0] + self.coeffs[1]) % base.spec.exponent == 0
            and self.base_points[0] == self.base_points[1]
        )
        gam = self._gamma_table()
        if len(set(gam)) != len(gam):
            raise ParameterError(f"coefficients {self.coeffs} give a non-injective Gamma on {base.spec}")
        self._gamma = gam
        self._dlog  # hash every orbit tuple so pi_inverse covers the member set

    def _gamma_table(self) -> list[tuple[Label, ...]]:
        spec = self.spec
        idx = np.arange(spec.order)
        cols = []
        for c, y in zip(self.coeffs, self.base_points):
            yi = self.base.index_of(y)
            scaled = spec.scale_indices(c, idx)
            shifted = spec.add_indices(scaled, yi)
            cols.append([self.base.orbit_labels[int(j)] for j in shifted])
        return list(zip(*cols))

    def pi(self, parts: Sequence[Label]) -> Label:
        parts = tuple(parts)
        blob = b"".join(len(p).to_bytes(2, "big") + p for p in parts)
        nbytes = _label_bytes(self.label_bits)
        h = hashlib.blake2b(blob, key=self._key, digest_size=min(64, max(nbytes, 1))).digest()
        if nbytes > 64:
            raise ParameterError("label_bits above 512 not supported")
        v = int.from_bytes(h[:nbytes], "big") & ((1 << self.label_bits) - 1)
        lab = int_label(v, self.label_bits)
        prev = self._inverse.setdefault(lab, parts)
        if prev != parts:
            raise InvariantViolation("outer injection collided; increase slack bits")
        return lab

    def pi_inverse(self, label) -> tuple[Label, ...] | None:
        if not isinstance(label, bytes):
            return None
        return self._inverse.get(label)

    def _label_at(self, i):
        return self.pi(self._gamma[i])

    def act(self, g, label):
        parts = self.pi_inverse(label)
        if parts is None:
            return INVALID
        new = []
        for c, z in zip(self.coeffs, parts):
            w = self.base.act(g * c, z)
            if w is INVALID:
                return INVALID
            new.append(w)
        return self.pi(new)

    def twist(self, label):
        if not self.supports_twist:
            return super().twist(label)
        if not self.member(label):
            return INVALID
        z1, z2 = self.pi_inverse(label)
        return self.pi((z2, z1))

    def descriptor(self):
        return {
            "kind": self.kind,
            "group": str(self.spec),
            "label_bits": self.label_bits,
            "seed": self.seed,
            "coeffs": list(self.coeffs),
            "base_points": [y.hex() for y in self.base_points],
            "slack_bits": self.slack_bits,
            "base": self.base.descriptor(),
        }


def wrapped_build(base: ActionModel, coeffs, base_points, seed: int, slack_bits: int = 16,
                  label_bits: int | None = None) -> WrappedAction:
    return WrappedAction(base, coeffs, base_points, seed, slack_bits, label_bits)


def wrapped_component_transform(model: WrappedAction, label, perm: Sequence[int],
                                maps: Mapping[int, Callable[[Label], Label]] | None = None):
    """Pi^{-1}, optional per-component maps, reorder by `perm`, re-apply Pi.

    Output component j is the (mapped) input component perm[j]. The result may
    lie outside the member set.
    """
    parts = model.pi_inverse(label)
    if parts is None:
        return INVALID
    if sorted(perm) != list(range(len(parts))):
        raise ParameterError(f"{perm} is not a permutation of {len(parts)} components")
    maps = maps or {}
    mapped = []
    for j, z in enumerate(parts):
        w = maps[j](z) if j in maps else z
        if w is INVALID:
            return INVALID
        mapped.append(w)
    return model.pi(tuple(mapped[p] for p in perm))


# ---------------------------------------------------------------- restricted

def _span_mod(N: int, cols: np.ndarray, cap: int = 10**5) -> set[tuple[int, ...]]:
    n = cols.shape[0]
    zero = (0,) * n
    seen = {zero}
    frontier = [zero]
    gens = [tuple(int(v) % N for v in cols[:, i]) for i in range(cols.shape[1])]
    while frontier:
        nxt = []
        for v in frontier:
            for g in gens:
                w = tuple((a + b) % N for a, b in zip(v, g))
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
                    if len(seen) > cap:
                        raise CapExceededError("generated subgroup too large")
        frontier = nxt
    return seen


def _order_mod(N: int, v: tuple[int, ...]) -> int:
    g = N
    for a in v:
        g = math.gcd(g, a)
    return N // g


def _multiples(N: int, v, count: int) -> list[tuple[int, ...]]:
    return [tuple((j * a) % N for a in v) for j in range(count)]


def decompose_subgroup(N: int, A) -> tuple[tuple[int, ...], list[tuple[int, ...]]]:
    """Cyclic decomposition of the subgroup of Z_N^n spanned by A's columns.

    Returns (orders d_j, embedded generators b_j) with the subgroup equal to the
    internal direct sum of the <b_j>. Brute force; supports n <= 2.
    """
    A = np.asarray(A, dtype=np.int64) % N
    n = A.shape[0]
    if n > 2:
        raise ParameterError("subgroup decomposition supports n <= 2")
    H = _span_mod(N, A)
    size = len(H)
    if size == 1:
        return (1,), [(0,) * n]
    by_order = sorted(H, key=lambda v: (-_order_mod(N, v), v))
    b1 = by_order[0]
    d1 = _order_mod(N, b1)
    if d1 == size:
        return (d1,), [b1]
    cyc1 = set(_multiples(N, b1, d1))
    d2 = size // d1
    for v in sorted(H):
        if _order_mod(N, v) == d2:
            cyc2 = _multiples(N, v, d2)
            if all(w not in cyc1 for w in cyc2[1:]):
                return (d1, d2), [b1, v]
    raise InvariantViolation("no cyclic complement found")


class REGAActionSpec:
    """A regular action of G <= Z_N^n where only short exponent vectors over
    the columns of A may be applied.

    The abstract group is Z_{d_1} x ... with element (k_j) embedded as
    sum_j k_j b_j in Z_N^n. `base` is any action model over that group.
    """

    def __init__(self, N: int, A, B: int, base_factory: Callable[[GroupSpec], ActionModel] | None = None,
                 base: ActionModel | None = None):
        self.N = int(N)
        self.A = np.asarray(A, dtype=np.int64) % self.N
        if self.A.ndim != 2:
            raise ParameterError("A must be an n x m matrix")
        self.n, self.m = self.A.shape
        self.B = int(B)
        if self.B < 1:
            raise ParameterError("exponent bound B must be >= 1")
        orders, gens = decompose_subgroup(self.N, self.A)
        self.orders = orders
        self.gens = np.array(gens, dtype=np.int64).reshape(len(gens), self.n)
        spec = GroupSpec(orders)
        self._embed = {}
        for i in range(spec.order):
            res = np.asarray(spec.element_at(i).residues, dtype=np.int64)
            self._embed[i] = tuple(int(v) for v in (res @ self.gens) % self.N)
        self._abstract = {v: i for i, v in self._embed.items()}
        if len(self._abstract) != spec.order:
            raise InvariantViolation("decomposition is not a direct sum")
        self.col_index = [self._abstract[tuple(int(v) for v in self.A[:, j])] for j in range(self.m)]
        if base is None:
            base = base_factory(spec) if base_factory else TranslationAction(spec)
        if base.spec.moduli != spec.moduli:
            raise ParameterError(f"base action group {base.spec} differs from decomposition {spec}")
        self.base = base
        self.spec = spec

    def embed_index(self, i: int) -> tuple[int, ...]:
        return self._embed[int(i)]

    def abstract_index(self, vec) -> int:
        key = tuple(int(v) % self.N for v in vec)
        try:
            return self._abstract[key]
        except KeyError:
            raise ParameterError(f"{key} is not in the generated subgroup") from None

    def exponent_to_index(self, x) -> int:
        """Abstract index of A x."""
        return self.abstract_index(self.A @ np.asarray(x, dtype=np.int64))

    def exponents_to_indices(self, X: np.ndarray) -> np.ndarray:
        """Vectorised A x -> abstract index for rows of X."""
        col_res = self.spec.residue_table[np.asarray(self.col_index)]  # m x k
        res = np.asarray(X, dtype=np.int64) @ col_res
        return self.spec.index_of_residues(res)

    def descriptor(self) -> dict:
        return {"kind": "rega", "N": self.N, "A": self.A.tolist(), "B": self.B, "base": self.base.descriptor()}


def rega_act_vector(rspec: REGAActionSpec, x, label):
    """Apply (sum_i x_i g_i) by |x_1|+...+|x_m| single-generator steps."""
    x = [int(v) for v in np.asarray(x).reshape(-1)]
    if len(x) != rspec.m:
        raise ParameterError(f"exponent vector needs {rspec.m} entries")
    if any(abs(v) > rspec.B for v in x):
        raise RestrictedActionError(f"exponent {x} outside [-{rspec.B}, {rspec.B}]")
    spec = rspec.spec
    out = label
    for v, ci in zip(x, rspec.col_index):
        g = spec.element_at(ci)
        step = g if v > 0 else -g
        for _ in range(abs(v)):
            out = rspec.base.act(step, out)
            if out is INVALID:
                return INVALID
    return out


# ---------------------------------------------------------------- descriptors

def build_model(desc: Mapping) -> ActionModel:
    kind = desc.get("kind")
    if kind == "translation":
        return TranslationAction(GroupSpec.parse(desc["group"]))
    if kind == "ggam":
        return GGAMInstance(GroupSpec.parse(desc["group"]), int(desc["label_bits"]), int(desc["seed"]),
                            twist=bool(desc.get("twist", False)))
    if kind == "wrapped":
        base = build_model(desc["base"])
        return WrappedAction(base, desc["coeffs"], [bytes.fromhex(h) for h in desc["base_points"]],
                             int(desc["seed"]), int(desc.get("slack_bits", 16)), int(desc["label_bits"]))
    if kind == "rega":
        return build_rega_spec(desc).base
    raise ParameterError(f"unknown action kind {kind!r}")


def build_rega_spec(desc: Mapping) -> REGAActionSpec:
    base = build_model(desc["base"])
    return REGAActionSpec(int(desc["N"]), desc["A"], int(desc["B"]), base=base)


def all_exponent_vectors(m: int, B: int) -> np.ndarray:
    return np.array(list(itertools.product(range(-B, B + 1), repeat=m)), dtype=np.int64).reshape(-1, m)
