"""Finite abelian groups Z_{n1} x ... x Z_{nk} with residue-vector elements.

Elements are enumerated in mixed-radix order (last factor varies fastest),
which is the ordering every group-indexed statevector uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .errors import CapExceededError, SpecMismatchError, ParameterError

ARITHMETIC_CAP = 2**20


@dataclass(frozen=True)
class GroupSpec:
    moduli: tuple[int, ...]
    cap: int = field(default=ARITHMETIC_CAP, compare=False, repr=False)

    def __post_init__(self):
        mods = tuple(int(n) for n in self.moduli)
        object.__setattr__(self, "moduli", mods)
        if not mods:
            raise ParameterError("a group needs at least one cyclic factor")
        if any(n < 1 for n in mods):
            raise ParameterError(f"moduli must be positive, got {mods}")
        if math.prod(mods) > self.cap:
            raise CapExceededError(f"|G| = {math.prod(mods)} exceeds cap {self.cap}")

    @classmethod
    def parse(cls, text: str) -> "GroupSpec":
        """Parse the textual form "n1xn2x...xnk", e.g. "2x3x5"."""
        try:
            mods = tuple(int(part) for part in str(text).lower().split("x"))
        except ValueError as exc:
            raise ParameterError(f"malformed group spec {text!r}") from exc
        return cls(mods)

    def __str__(self) -> str:
        return "x".join(str(n) for n in self.moduli)

    @property
    def order(self) -> int:
        return math.prod(self.moduli)

    @property
    def rank(self) -> int:
        return len(self.moduli)

    @cached_property
    def exponent(self) -> int:
        return math.lcm(*self.moduli)

    @cached_property
    def _strides(self) -> tuple[int, ...]:
        strides = []
        acc = 1
        for n in reversed(self.moduli):
            strides.append(acc)
            acc *= n
        return tuple(reversed(strides))

    @cached_property
    def residue_table(self) -> np.ndarray:
        """All elements as an (order, k) integer array, row i = element_at(i)."""
        grids = np.indices(self.moduli).reshape(self.rank, -1).T
        grids.setflags(write=False)
        return grids

    def zero(self) -> "GroupElement":
        return GroupElement(self, (0,) * self.rank)

    def element(self, residues: Sequence[int] | int) -> "GroupElement":
        if isinstance(residues, (int, np.integer)):
            residues = (int(residues),)
        residues = tuple(int(r) for r in residues)
        if len(residues) != self.rank:
            raise SpecMismatchError(f"expected {self.rank} residues, got {len(residues)}")
        return GroupElement(self, tuple(r % n for r, n in zip(residues, self.moduli)))

    def element_at(self, i: int) -> "GroupElement":
        i = int(i)
        if not 0 <= i < self.order:
            raise ParameterError(f"index {i} out of range for |G| = {self.order}")
        res = []
        for n in reversed(self.moduli):
            res.append(i % n)
            i //= n
        return GroupElement(self, tuple(reversed(res)))

    def elements(self) -> Iterator["GroupElement"]:
        for i in range(self.order):
            yield self.element_at(i)

    def index_of_residues(self, residues: np.ndarray) -> np.ndarray:
        """Vectorised mixed-radix index of residue rows (reduced mod n_j first)."""
        residues = np.asarray(residues, dtype=np.int64)
        mods = np.asarray(self.moduli, dtype=np.int64)
        return (np.mod(residues, mods) * np.asarray(self._strides, dtype=np.int64)).sum(axis=-1)

    def add_indices(self, i, j) -> np.ndarray:
        """Index of element_at(i) + element_at(j), broadcasting over arrays."""
        tab = self.residue_table
        return self.index_of_residues(tab[np.asarray(i)] + tab[np.asarray(j)])

    def neg_indices(self, i) -> np.ndarray:
        return self.index_of_residues(-self.residue_table[np.asarray(i)])

    def scale_indices(self, c: int, i) -> np.ndarray:
        return self.index_of_residues(int(c) * self.residue_table[np.asarray(i)])

    def chi_angle_fraction(self, gi, hi) -> np.ndarray:
        """Exact phase of chi(g, h) as an integer numerator over self.exponent.

        chi(g, h) = exp(2 pi i * frac / exponent), with frac reduced in integer
        arithmetic so no floating-point angle ever grows large.
        """
        tab = self.residue_table
        g = tab[np.asarray(gi)]
        h = tab[np.asarray(hi)]
        L = self.exponent
        weights = np.asarray([L // n for n in self.moduli], dtype=np.int64)
        mods = np.asarray(self.moduli, dtype=np.int64)
        # reduce each product mod n_j before scaling so nothing overflows
        prod = np.mod(g * h, mods) * weights
        return np.mod(prod.sum(axis=-1), L)

    def chi_indices(self, gi, hi) -> np.ndarray:
        frac = self.chi_angle_fraction(gi, hi)
        return np.exp(2j * np.pi * frac / self.exponent)

    def chi_row(self, h_index: int) -> np.ndarray:
        """chi(g, h) for all g in index order."""
        return self.chi_indices(np.arange(self.order), h_index)


@dataclass(frozen=True)
class GroupElement:
    spec: GroupSpec
    residues: tuple[int, ...]

    def __post_init__(self):
        if len(self.residues) != self.spec.rank:
            raise SpecMismatchError("residue count does not match the group")
        for r, n in zip(self.residues, self.spec.moduli):
            if not 0 <= r < n:
                raise ParameterError(f"residue {r} outside [0, {n})")

    def __add__(self, other: "GroupElement") -> "GroupElement":
        return add(self, other)

    def __neg__(self) -> "GroupElement":
        return neg(self)

    def __sub__(self, other: "GroupElement") -> "GroupElement":
        return add(self, neg(other))

    def __mul__(self, c: int) -> "GroupElement":
        return scale(int(c), self)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"GroupElement({list(self.residues)} in {self.spec})"

    @property
    def index(self) -> int:
        return index(self)

    def is_zero(self) -> bool:
        return not any(self.residues)

    def signed(self) -> tuple[int, ...]:
        return signed_residues(self)


def _check_same(a: GroupElement, b: GroupElement) -> None:
    if a.spec.moduli != b.spec.moduli:
        raise SpecMismatchError(f"elements of {a.spec} and {b.spec} cannot be combined")


def add(a: GroupElement, b: GroupElement) -> GroupElement:
    _check_same(a, b)
    return GroupElement(a.spec, tuple((x + y) % n for x, y, n in zip(a.residues, b.residues, a.spec.moduli)))


def neg(a: GroupElement) -> GroupElement:
    return GroupElement(a.spec, tuple((-x) % n for x, n in zip(a.residues, a.spec.moduli)))


def scale(c: int, a: GroupElement) -> GroupElement:
    return GroupElement(a.spec, tuple((c * x) % n for x, n in zip(a.residues, a.spec.moduli)))


def chi(g: GroupElement, h: GroupElement) -> complex:
    """The bilinear character prod_j exp(2 pi i g_j h_j / n_j)."""
    _check_same(g, h)
    spec = g.spec
    L = spec.exponent
    frac = sum(((x * y) % n) * (L // n) for x, y, n in zip(g.residues, h.residues, spec.moduli)) % L
    return complex(np.exp(2j * np.pi * frac / L))


def index(g: GroupElement) -> int:
    i = 0
    for r, n in zip(g.residues, g.spec.moduli):
        i = i * n + r
    return i


def element_at(spec: GroupSpec, i: int) -> GroupElement:
    return spec.element_at(i)


def sample_uniform(spec: GroupSpec, rng: np.random.Generator) -> GroupElement:
    return spec.element_at(int(rng.integers(spec.order)))


def centered(r: int, n: int) -> int:
    """Representative of r mod n in [-floor((n-1)/2), ceil((n-1)/2)]."""
    r %= n
    return r - n if r > (n - 1) // 2 + (n - 1) % 2 else r


def signed_residues(g: GroupElement) -> tuple[int, ...]:
    return tuple(centered(r, n) for r, n in zip(g.residues, g.spec.moduli))


def factorizations(n: int, min_factor: int = 2) -> list[tuple[int, ...]]:
    """All non-decreasing factorizations of n into factors >= 2."""
    if n == 1:
        return [()]
    out = []
    for f in range(min_factor, n + 1):
        if n % f == 0:
            for rest in factorizations(n // f, f):
                out.append((f,) + rest)
    return out
