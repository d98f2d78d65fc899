"""LWE-style quantum group action and the folklore short-vector money scheme.

States are sparse: an (k, m) integer array of basis vectors and k amplitudes.
Action states live in Z_N^m; folklore notes live on short integer vectors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .actions import all_exponent_vectors
from .errors import CapExceededError, ParameterError, PreconditionError
from .rega import TWO_PI, GaussianSpec

SPARSE_CAP = 5_000_000
DENSE_CAP = 10**6


@dataclass
class LWEActionParams:
    N: int
    A: np.ndarray
    sigma: float
    trunc: int
    coeff: float = TWO_PI

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.int64) % self.N
        if self.A.ndim != 2:
            raise ParameterError("A must be n x m")
        if (2 * self.trunc + 1) ** self.m > SPARSE_CAP:
            raise CapExceededError("Gaussian support exceeds sparse cap")
        if self.N**self.n <= 10**5:
            S = np.array(list(itertools.product(range(self.N), repeat=self.n)), dtype=np.int64)
            img = {tuple(row) for row in (S @ self.A) % self.N}
            if len(img) != len(S):
                raise ParameterError("s -> A^T s is not injective mod N")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[1]

    @property
    def gaussian(self) -> GaussianSpec:
        return GaussianSpec(self.sigma, self.trunc, self.coeff)

    def to_json(self) -> dict:
        d = {"N": self.N, "n": self.n, "m": self.m, "A": self.A.tolist(), "sigma": self.sigma, "trunc": self.trunc}
        if self.coeff != TWO_PI:
            d["coeff"] = self.coeff
        return d

    @classmethod
    def from_json(cls, d: dict) -> "LWEActionParams":
        return cls(int(d["N"]), d["A"], float(d["sigma"]), int(d["trunc"]), float(d.get("coeff", TWO_PI)))


def fourier_toy() -> LWEActionParams:
    return LWEActionParams(N=16, A=[[1, 4]], sigma=4.0, trunc=7)


def attack_toy() -> LWEActionParams:
    """Wide Gaussian so every serial has hundreds of comparable preimages."""
    return LWEActionParams(N=8, A=[[1, 3]], sigma=64.0, trunc=100)


def flooding_toy(sigma: float) -> LWEActionParams:
    return LWEActionParams(N=256, A=[[1, 3]], sigma=float(sigma), trunc=int(math.ceil(2.5 * sigma)))


@dataclass
class SparseState:
    vecs: np.ndarray
    amps: np.ndarray
    modulus: int | None = None

    def __post_init__(self):
        self.vecs = np.asarray(self.vecs, dtype=np.int64)
        if self.modulus is not None:
            self.vecs = self.vecs % self.modulus
        self.amps = np.asarray(self.amps, dtype=complex)
        if len(self.vecs) > SPARSE_CAP:
            raise CapExceededError("sparse state too large")
        nrm = float(np.vdot(self.amps, self.amps).real)
        if abs(nrm - 1) > 1e-9:
            raise ParameterError(f"sparse state not normalised: {nrm}")

    def as_dict(self) -> dict:
        out: dict = {}
        for v, a in zip(map(tuple, self.vecs.tolist()), self.amps):
            out[v] = out.get(v, 0) + a
        return out

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2


def sparse_inner(a: SparseState, b: SparseState) -> complex:
    da = a.as_dict()
    total = 0j
    for v, amp in b.as_dict().items():
        if v in da:
            total += np.conj(da[v]) * amp
    return complex(total)


def phase_distance(overlap: complex) -> float:
    """min over phases of || a - e^{i t} b || for unit vectors with <a|b> = overlap."""
    return float(math.sqrt(max(0.0, 2.0 - 2.0 * abs(overlap))))


def _gaussian_block(p: LWEActionParams) -> tuple[np.ndarray, np.ndarray]:
    E = all_exponent_vectors(p.m, p.trunc)
    w = np.prod(p.gaussian.weights()[E + p.trunc], axis=1)
    return E, w


def lwe_psi(p: LWEActionParams, s) -> SparseState:
    """sum_e sqrt(D(e)) |A^T s + e mod N>."""
    if 2 * p.trunc + 1 > p.N:
        raise ParameterError("noise support wraps around Z_N")
    E, w = _gaussian_block(p)
    s = np.asarray(s, dtype=np.int64).reshape(p.n)
    return SparseState(E + (s @ p.A), np.sqrt(w), p.N)


def lwe_act(p: LWEActionParams, r, st: SparseState) -> SparseState:
    r = np.asarray(r, dtype=np.int64).reshape(p.n)
    return SparseState(st.vecs + (r @ p.A), st.amps, p.N)


def flooding_check(p: LWEActionParams, offset, s=None) -> float:
    """Distance between |psi_s> and its copy shifted by a small offset."""
    s = np.zeros(p.n, dtype=np.int64) if s is None else s
    base = lwe_psi(p, s)
    shifted = SparseState(base.vecs + np.asarray(offset, dtype=np.int64), base.amps, p.N)
    return phase_distance(sparse_inner(base, shifted))


# ---------------------------------------------------------------- folklore

def _folklore_table(p: LWEActionParams):
    cached = p.__dict__.get("_table")
    if cached is not None:
        return cached
    X, w = _gaussian_block(p)
    H = (X @ p.A.T) % p.N
    radix = p.N ** np.arange(p.n, dtype=np.int64)
    hkey = H @ radix
    p.__dict__["_table"] = (X, w, hkey, radix)
    return X, w, hkey, radix


def serial_distribution(p: LWEActionParams) -> np.ndarray:
    """Exact distribution of A x mod N for x ~ D^m, indexed by mixed-radix key."""
    X, w, hkey, _ = _folklore_table(p)
    return np.bincount(hkey, weights=w, minlength=p.N**p.n)


def _key_to_vec(p: LWEActionParams, key: int) -> np.ndarray:
    out = []
    for _ in range(p.n):
        out.append(key % p.N)
        key //= p.N
    return np.array(out, dtype=np.int64)


def honest_note(p: LWEActionParams, h) -> SparseState:
    X, w, hkey, radix = _folklore_table(p)
    key = int((np.asarray(h, dtype=np.int64) % p.N) @ radix)
    sel = hkey == key
    if not sel.any():
        raise ParameterError("serial has no short preimage")
    return SparseState(X[sel], np.sqrt(w[sel] / w[sel].sum()))


@dataclass
class FolkloreNote:
    h: np.ndarray
    note: SparseState


def folklore_mint(p: LWEActionParams, rng: np.random.Generator) -> FolkloreNote:
    """Prepare |D>^m, measure A x mod N, keep the collapsed preimage superposition."""
    dist = serial_distribution(p)
    key = int(rng.choice(len(dist), p=dist / dist.sum()))
    h = _key_to_vec(p, key)
    return FolkloreNote(h, honest_note(p, h))


def measure_sparse(st: SparseState, rng: np.random.Generator) -> np.ndarray:
    pr = st.probabilities()
    return st.vecs[int(rng.choice(len(pr), p=pr / pr.sum()))]


def folklore_attack(note: SparseState, rng: np.random.Generator) -> SparseState:
    """Measure the note; the resulting basis state is freely clonable."""
    x = measure_sparse(note, rng)
    return SparseState(x[None, :], [1.0])


def support_verifier(p: LWEActionParams, h, st: SparseState) -> float:
    """Mass on {x : |x|_inf <= trunc, A x = h mod N}."""
    h = np.asarray(h, dtype=np.int64) % p.N
    ok = (np.abs(st.vecs).max(axis=1) <= p.trunc) & ((st.vecs @ p.A.T) % p.N == h).all(axis=1)
    return float(st.probabilities()[ok].sum())


def ideal_membership_projector(p: LWEActionParams, st: SparseState) -> float:
    """Acceptance of the projector onto the span of all honest notes."""
    X, w, hkey, radix = _folklore_table(p)
    T = 2 * p.trunc + 1
    shift = T ** np.arange(p.m - 1, -1, -1, dtype=np.int64)
    totals = np.bincount(hkey, weights=w, minlength=p.N**p.n)
    in_box = np.abs(st.vecs).max(axis=1) <= p.trunc
    vecs = st.vecs[in_box]
    amps = st.amps[in_box]
    pos = (vecs + p.trunc) @ shift
    keys = hkey[pos]
    coef = np.sqrt(w[pos] / totals[keys]) * amps
    acc = np.zeros(len(totals), dtype=complex)
    np.add.at(acc, keys, coef)
    return float(min(1.0, (np.abs(acc) ** 2).sum()))


def note_weight(p: LWEActionParams, note: SparseState, x) -> float:
    """|<x|note>|^2, the Gaussian weight of x within its coset."""
    d = note.as_dict()
    return float(abs(d.get(tuple(int(v) for v in x), 0)) ** 2)


def collision_probability(p: LWEActionParams, h) -> float:
    """Probability that two measurements of the honest note for h agree."""
    pr = honest_note(p, h).probabilities()
    return float((pr**2).sum())


@dataclass
class SISResult:
    v: np.ndarray
    kernel_ok: bool
    nonzero: bool
    linf: int


def sis_from_two_notes(p: LWEActionParams, note1: SparseState, note2: SparseState, h,
                       rng: np.random.Generator) -> SISResult:
    for nt in (note1, note2):
        if support_verifier(p, h, nt) < 1 - 1e-9:
            raise PreconditionError("both notes must pass the support verifier")
    v = measure_sparse(note1, rng) - measure_sparse(note2, rng)
    kernel = bool(((p.A @ v) % p.N == 0).all())
    return SISResult(v, kernel, bool(np.any(v)), int(np.abs(v).max()))


# ---------------------------------------------------------------- Fourier

@dataclass
class FourierReport:
    min_fidelity: float
    fidelities: dict = field(default_factory=dict)


def _dense(p: LWEActionParams, st: SparseState) -> np.ndarray:
    grid = np.zeros((p.N,) * p.m, dtype=complex)
    np.add.at(grid, tuple((st.vecs % p.N).T), st.amps)
    return grid


def fourier_domain_state(p: LWEActionParams, h) -> np.ndarray:
    """sum_{s, e} sqrt(D_{N/sigma}(e)) exp(2 pi i h.s/N) |A^T s + e>, normalised."""
    B = (p.N - 1) // 2
    dual = GaussianSpec(p.N / p.sigma, B, p.coeff)
    E = all_exponent_vectors(p.m, B)
    amp_e = np.prod(dual.amplitudes()[E + B], axis=1)
    h = np.asarray(h, dtype=np.int64)
    grid = np.zeros((p.N,) * p.m, dtype=complex)
    for s in itertools.product(range(p.N), repeat=p.n):
        s = np.asarray(s, dtype=np.int64)
        ph = np.exp(TWO_PI * 1j * (int(h @ s) % p.N) / p.N)
        np.add.at(grid, tuple(((E + s @ p.A) % p.N).T), ph * amp_e)
    return grid / np.linalg.norm(grid)


def fourier_equivalence_check(p: LWEActionParams, serials=None) -> FourierReport:
    """Fidelity of QFT_N^{(x)m} (folklore note for h) with the Fourier-domain
    state for h, over the given serials (default: all of Z_N^n)."""
    if p.N**p.m > DENSE_CAP:
        raise CapExceededError("dense QFT over Z_N^m exceeds cap")
    if 2 * p.trunc + 1 > p.N:
        raise ParameterError("folklore support must embed in Z_N^m")
    if serials is None:
        serials = [np.array(s) for s in itertools.product(range(p.N), repeat=p.n)]
    out = {}
    dist = serial_distribution(p)
    for h in serials:
        h = np.asarray(h, dtype=np.int64) % p.N
        key = int(h @ (p.N ** np.arange(p.n)))
        if dist[key] <= 0:
            continue
        note = _dense(p, honest_note(p, h))
        ft = np.fft.ifftn(note, norm="ortho")
        tgt = fourier_domain_state(p, h)
        out[tuple(int(v) for v in h)] = float(abs(np.vdot(tgt, ft)) ** 2)
    return FourierReport(min(out.values()), out)
