"""Lightning over a restricted action with noisy serials t = A^T phi(h) + e.

Minting superposes short exponent vectors r with discrete-Gaussian weights,
acts by A r, Fourier transforms the exponent register over Z_N^m and measures
t. Verification runs lambda rounds of a controlled (-u)* with a phase basis
determined by x^T t, and accepts on a 7/8 fraction of zeros.

phi (an embedding of the dual group) is only used for decoding and analysis.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .actions import REGAActionSpec, all_exponent_vectors, rega_act_vector
from .errors import CapExceededError, FindhDomainError, InvariantViolation, ParameterError
from .group_core import GroupElement, centered
from .lightning import findh, orbit_vector
from .statevec import StateVector, qft_array
from .group_core import GroupSpec

SPARSE_CAP = 5_000_000
DENSE_T_CAP = 2**22
TWO_PI = 2 * math.pi


# ---------------------------------------------------------------- Gaussians

@dataclass(frozen=True)
class GaussianSpec:
    """Truncated discrete Gaussian on [-bound, bound], density exp(-coeff x^2/sigma^2).

    sigma = inf gives the flat distribution.
    """

    sigma: float
    bound: int
    coeff: float = TWO_PI

    def __post_init__(self):
        if self.bound < 1:
            raise ParameterError("truncation bound must be >= 1")
        if not self.sigma > 0:
            raise ParameterError("sigma must be positive")

    @property
    def support(self) -> np.ndarray:
        return np.arange(-self.bound, self.bound + 1)

    def weights(self) -> np.ndarray:
        x = self.support.astype(float)
        if math.isinf(self.sigma):
            w = np.ones_like(x)
        else:
            w = np.exp(-self.coeff * x * x / self.sigma**2)
        return w / w.sum()

    def amplitudes(self) -> np.ndarray:
        return np.sqrt(self.weights())


def int_label(v: int) -> bytes:
    return int(v).to_bytes(4, "big", signed=True)


def gaussian_superposition(g: GaussianSpec) -> StateVector:
    return StateVector([int_label(v) for v in g.support], g.amplitudes())


def gaussian_tail_mass(sigma: float, bound: int, coeff: float = TWO_PI, far: int | None = None) -> float:
    """Mass of the untruncated discrete Gaussian outside [-bound, bound]."""
    far = far if far is not None else int(bound + 40 * sigma + 10)
    x = np.arange(-far, far + 1, dtype=float)
    w = np.exp(-coeff * x * x / sigma**2)
    return float(w[np.abs(x) > bound].sum() / w.sum())


# ---------------------------------------------------------------- parameters

@dataclass
class REGAParams:
    N: int
    A: np.ndarray
    B: int
    sigma: float
    Bprime: int
    lam: int = 64
    dstar: str = "uniform"
    dstar_sigma: float | None = None
    threshold: float = 7 / 8
    gauss_coeff: float = TWO_PI

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.int64) % self.N
        if self.A.ndim != 2:
            raise ParameterError("A must be n x m")
        if self.dstar not in ("uniform", "gaussian"):
            raise ParameterError(f"unknown D* kind {self.dstar!r}")
        if self.dstar == "gaussian" and not self.dstar_sigma:
            raise ParameterError("gaussian D* needs dstar_sigma")
        if 2 * self.Bprime + 1 > self.N:
            raise ParameterError("mint truncation must satisfy 2 B' + 1 <= N (exponents would alias mod N)")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[1]

    @property
    def C(self) -> int:
        """Largest decoding radius with 8 B C m < N."""
        return (self.N - 1) // (8 * self.B * self.m)

    @property
    def mint_gaussian(self) -> GaussianSpec:
        return GaussianSpec(self.sigma, self.Bprime, self.gauss_coeff)

    def to_json(self) -> dict:
        d = {"N": self.N, "n": self.n, "m": self.m, "A": self.A.tolist(), "B": self.B,
             "dstar": self.dstar, "sigma": self.sigma, "Bprime": self.Bprime, "lambda": self.lam}
        if self.dstar_sigma is not None:
            d["dstar_sigma"] = self.dstar_sigma
        if self.gauss_coeff != TWO_PI:
            d["gauss_coeff"] = self.gauss_coeff
        return d

    @classmethod
    def from_json(cls, d: dict) -> "REGAParams":
        p = cls(int(d["N"]), d["A"], int(d["B"]), float(d["sigma"]), int(d["Bprime"]),
                int(d.get("lambda", 64)), d.get("dstar", "uniform"), d.get("dstar_sigma"),
                gauss_coeff=float(d.get("gauss_coeff", TWO_PI)))
        if "n" in d and int(d["n"]) != p.n or "m" in d and int(d["m"]) != p.m:
            raise ParameterError("n, m disagree with the shape of A")
        return p

    def key(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def toy_params(lam: int = 64) -> REGAParams:
    """G = Z_8 embedded in Z_256 as multiples of 32, generators 32 and 96."""
    return REGAParams(N=256, A=[[32, 96]], B=1, sigma=48.0, Bprime=80, lam=lam)


def toy_params_odd(lam: int = 64) -> REGAParams:
    """G = Z_9 inside Z_288; D* uniform on [-1,1]^2 covers G exactly."""
    return REGAParams(N=288, A=[[32, 96]], B=1, sigma=40.0, Bprime=64, lam=lam)


def toy_params_rank2(lam: int = 64) -> REGAParams:
    """G = Z_3 x Z_3 inside Z_144^2 (columns 48 e_1, 48 e_2)."""
    return REGAParams(N=144, A=[[48, 0], [0, 48]], B=1, sigma=48.0, Bprime=64, lam=lam)


# ---------------------------------------------------------------- D*

def dstar_support(p: REGAParams) -> tuple[np.ndarray, np.ndarray]:
    X = all_exponent_vectors(p.m, p.B)
    if p.dstar == "uniform":
        w = np.full(len(X), 1.0 / len(X))
    else:
        w1 = GaussianSpec(p.dstar_sigma, p.B, p.gauss_coeff).weights()
        w = np.prod(w1[X + p.B], axis=1)
    return X, w


def sample_dstar(p: REGAParams, rng: np.random.Generator) -> np.ndarray:
    if p.dstar == "uniform":
        return rng.integers(-p.B, p.B + 1, size=p.m)
    w1 = GaussianSpec(p.dstar_sigma, p.B, p.gauss_coeff).weights()
    return rng.choice(np.arange(-p.B, p.B + 1), size=p.m, p=w1)


def dstar_tv_distance(p: REGAParams, rspec: REGAActionSpec) -> float:
    """Total-variation distance of A x (x ~ D*) from uniform on G, exactly."""
    X, w = dstar_support(p)
    idx = rspec.exponents_to_indices(X)
    dist = np.bincount(idx, weights=w, minlength=rspec.spec.order)
    return float(0.5 * np.abs(dist - 1.0 / rspec.spec.order).sum())


# ---------------------------------------------------------------- phi

def dual_embedding(rspec: REGAActionSpec) -> np.ndarray:
    """Vectors w_j in Z_N^n with b_i . w_j = (N/d_i) delta_ij (mod N).

    Then phi(h) = sum_j h_j w_j satisfies exp(2 pi i iota(g).phi(h)/N) = chi(g, h).
    """
    N, n = rspec.N, rspec.n
    if N**n > 10**5:
        raise CapExceededError("dual embedding search limited to N^n <= 1e5")
    gens = rspec.gens
    d = rspec.orders
    cand = np.array(list(itertools.product(range(N), repeat=n)), dtype=np.int64)
    dots = (cand @ gens.T) % N  # [candidate, i]
    W = []
    for j in range(len(d)):
        target = np.array([(N // d[i]) * (i == j) % N for i in range(len(d))])
        hits = np.nonzero((dots == target).all(axis=1))[0]
        if len(hits) == 0:
            raise InvariantViolation("no dual vector found")
        W.append(cand[hits[0]])
    return np.array(W, dtype=np.int64)


def phi(rspec: REGAActionSpec, h: GroupElement, W: np.ndarray | None = None) -> np.ndarray:
    W = dual_embedding(rspec) if W is None else W
    return (np.asarray(h.residues, dtype=np.int64) @ W) % rspec.N


def serial_centers(p: REGAParams, rspec: REGAActionSpec) -> np.ndarray:
    """A^T phi(h) mod N for every h, shape (|G|, m)."""
    W = dual_embedding(rspec)
    res = rspec.spec.residue_table.astype(np.int64)
    ph = (res @ W) % p.N
    return (ph @ p.A) % p.N


# ---------------------------------------------------------------- counting checks

def large_count_formula(order: int) -> int:
    return order + 1 - 2 * (-(-order // 4))


def count_large_elements(N: int, generator: int) -> tuple[int, int]:
    """(subgroup order, number of elements with |g| >= N/4) for <generator> in Z_N."""
    d = math.gcd(int(generator) % N, N) or N
    order = N // d
    count = 0
    for j in range(order):
        c = centered(j * d, N)
        if 4 * abs(c) >= N:
            count += 1
    return order, count


def large_count_scan(max_N: int = 256) -> list[tuple[int, int, int, int]]:
    """Every subgroup of Z_N for N <= max_N: (N, order, brute count, formula)."""
    rows = []
    for N in range(1, max_N + 1):
        for d in range(1, N + 1):
            if N % d == 0:
                order, cnt = count_large_elements(N, d % N)
                rows.append((N, order, cnt, large_count_formula(order)))
    return rows


def serial_collisions(p: REGAParams, rspec: REGAActionSpec, C: int | None = None) -> int:
    """Collisions of (h, e) -> A^T phi(h) + e over e in [-C, C]^m."""
    C = p.C if C is None else C
    centers = serial_centers(p, rspec)
    E = all_exponent_vectors(p.m, C)
    vals = (centers[:, None, :] + E[None, :, :]) % p.N
    radix = p.N ** np.arange(p.m, dtype=object)
    flat = vals.reshape(-1, p.m)
    keys = [int(sum(int(v) * int(r) for v, r in zip(row, radix))) for row in flat]
    return len(keys) - len(set(keys))


def decode_serial(p: REGAParams, rspec: REGAActionSpec, t, C: int | None = None,
                  centers: np.ndarray | None = None) -> GroupElement | None:
    """The unique h with t - A^T phi(h) in [-C, C]^m, or None."""
    C = p.C if C is None else C
    centers = serial_centers(p, rspec) if centers is None else centers
    t = np.asarray(t, dtype=np.int64) % p.N
    diff = (t[None, :] - centers) % p.N
    diff = np.where(diff > p.N // 2, diff - p.N, diff)
    ok = np.nonzero((np.abs(diff) <= C).all(axis=1))[0]
    if len(ok) > 1:
        raise InvariantViolation(f"serial decodes to {len(ok)} group elements")
    return rspec.spec.element_at(int(ok[0])) if len(ok) else None


def qft_gaussian_pair_check(sigma: float, N: int, coeff: float = TWO_PI) -> float:
    """Phase-insensitive distance between QFT_N|D_sigma> and |D_{N/sigma}>,
    both truncated to [-floor((N-1)/2), floor((N-1)/2)]."""
    B = (N - 1) // 2
    x = np.arange(N)
    xc = np.where(x > N // 2, x - N, x)
    keep = np.abs(xc) <= B

    def vec(s):
        a = np.where(keep, np.exp(-coeff * xc * xc / (2 * s * s)), 0.0)
        return a / np.linalg.norm(a)

    spec = GroupSpec((N,))
    fwd = qft_array(spec, vec(sigma).astype(complex), "forward")
    ov = abs(np.vdot(vec(N / sigma), fwd))
    return float(math.sqrt(max(0.0, 2.0 - 2.0 * ov)))


# ---------------------------------------------------------------- mint

def _mint_noise_1d(p: REGAParams) -> np.ndarray:
    """Distribution of one coordinate of e = t - A^T phi(h), indexed by centred v."""
    amps = p.mint_gaussian.amplitudes()
    r = p.mint_gaussian.support
    v = np.arange(p.N)
    F = np.exp(TWO_PI * 1j * np.outer(v, r) / p.N) @ amps
    return np.abs(F) ** 2 / p.N


@lru_cache(maxsize=8)
def _t_distribution(key: str, N: int, m: int, col_res_bytes: bytes, k: int, order: int,
                    moduli: tuple) -> np.ndarray:
    p = REGAParams.from_json(json.loads(key))
    spec = GroupSpec(moduli)
    col_res = np.frombuffer(col_res_bytes, dtype=np.int64).reshape(m, k)
    R = all_exponent_vectors(m, p.Bprime)
    amp = np.prod(p.mint_gaussian.amplitudes()[R + p.Bprime], axis=1)
    gidx = spec.index_of_residues(R @ col_res)
    pos = np.mod(R, N)
    probs = np.zeros((N,) * m)
    for g in range(order):
        sel = gidx == g
        grid = np.zeros((N,) * m, dtype=complex)
        np.add.at(grid, tuple(pos[sel].T), amp[sel])
        F = np.fft.ifftn(grid) * N**m  # sum_r f(r) exp(+2 pi i r.t/N)
        probs += np.abs(F) ** 2
    probs /= N**m
    probs.setflags(write=False)
    return probs


def t_distribution(p: REGAParams, rspec: REGAActionSpec) -> np.ndarray:
    """Exact pre-measurement distribution of the serial t over Z_N^m."""
    if (2 * p.Bprime + 1) ** p.m > SPARSE_CAP:
        raise CapExceededError("mint support exceeds sparse cap")
    if p.N**p.m > DENSE_T_CAP:
        raise CapExceededError("serial space N^m too large for exact sampling")
    col_res = rspec.spec.residue_table[np.asarray(rspec.col_index)].astype(np.int64)
    return _t_distribution(p.key(), p.N, p.m, col_res.tobytes(), rspec.spec.rank, rspec.spec.order,
                           rspec.spec.moduli)


@dataclass
class REGABanknote:
    serial_t: np.ndarray
    note: StateVector
    h_witness: GroupElement
    witness_fidelity: float

    def to_json(self, rspec: REGAActionSpec, p: REGAParams) -> dict:
        return {
            "action": rspec.descriptor(),
            "params": p.to_json(),
            "serial": list(self.h_witness.residues),
            "serial_t": [int(v) for v in self.serial_t],
            "state": self.note.to_json(),
        }


def collapsed_note(p: REGAParams, rspec: REGAActionSpec, t) -> StateVector:
    """Money register after t is observed: sum_g a_g(t)|g*x>,
    a_g(t) = sum_{A r = g} sqrt(D(r)) exp(2 pi i r.t/N)."""
    R = all_exponent_vectors(p.m, p.Bprime)
    amp = np.prod(p.mint_gaussian.amplitudes()[R + p.Bprime], axis=1)
    gidx = rspec.exponents_to_indices(R)
    t = np.asarray(t, dtype=np.int64)
    ph = np.exp(TWO_PI * 1j * ((R @ t) % p.N) / p.N)
    vals = amp * ph
    G = rspec.spec.order
    a = np.bincount(gidx, weights=vals.real, minlength=G) + 1j * np.bincount(gidx, weights=vals.imag, minlength=G)
    return StateVector(rspec.base.orbit_labels, a, normalize=True)


def rega_mint(p: REGAParams, rspec: REGAActionSpec, rng: np.random.Generator,
              witness_tol: float = 0.5) -> REGABanknote:
    probs = t_distribution(p, rspec)
    flat = probs.reshape(-1)
    k = int(rng.choice(flat.size, p=flat / flat.sum()))
    t = np.array(np.unravel_index(k, probs.shape), dtype=np.int64)
    note = collapsed_note(p, rspec, t)
    fh = findh(rspec.base, note)
    if fh.probability < 1 - witness_tol:
        raise FindhDomainError(f"collapsed note is far from any banknote (best overlap {fh.probability:.3g})")
    return REGABanknote(t, note, fh.serial, fh.probability)


# ---------------------------------------------------------------- verify

@dataclass
class REGAVerifyResult:
    accepted: bool
    membership_mass: float
    round_probs: list = field(default_factory=list)
    bits: list = field(default_factory=list)

    @property
    def zeros(self) -> int:
        return sum(1 for b in self.bits if b == 0)


def _shift_perm(rspec: REGAActionSpec, x) -> np.ndarray:
    """Index permutation of (-A x)* on the orbit, computed by generator steps."""
    base = rspec.base
    neg = -np.asarray(x, dtype=np.int64)
    perm = np.empty(rspec.spec.order, dtype=np.int64)
    for i, lab in enumerate(base.orbit_labels):
        perm[i] = base.index_of(rega_act_vector(rspec, neg, lab))
    return perm


def threshold_count(p: REGAParams, lam: int | None = None) -> int:
    lam = p.lam if lam is None else lam
    return math.ceil(p.threshold * lam - 1e-12)


def rega_verify(p: REGAParams, rspec: REGAActionSpec, t, state: StateVector,
                rng: np.random.Generator, lam: int | None = None) -> REGAVerifyResult:
    lam = p.lam if lam is None else lam
    v, off = orbit_vector(rspec.base, state)
    mem = float(np.vdot(v, v).real)
    if mem <= 0 or rng.random() >= mem:
        return REGAVerifyResult(False, mem)
    psi = v / math.sqrt(mem)
    t = np.asarray(t, dtype=np.int64)
    probs, bits = [], []
    for _ in range(lam):
        x = sample_dstar(p, rng)
        perm = _shift_perm(rspec, x)
        moved = np.zeros_like(psi)
        moved[perm] = psi
        theta = TWO_PI * (int(x @ t) % p.N) / p.N
        rot = np.exp(-1j * theta) * moved
        c0 = (psi + rot) / 2
        c1 = (psi - rot) / 2
        p0 = float(np.vdot(c0, c0).real)
        b = 0 if rng.random() < p0 else 1
        comp = c0 if b == 0 else c1
        psi = comp / np.linalg.norm(comp)
        probs.append(p0)
        bits.append(b)
    res = REGAVerifyResult(False, mem, probs, bits)
    res.accepted = res.zeros >= threshold_count(p, lam)
    return res


def round_means(p: REGAParams, rspec: REGAActionSpec, t) -> np.ndarray:
    """Mean over x ~ D* of Pr[b = 0] on |G^{h'}*x>, for every h'."""
    X, w = dstar_support(p)
    uidx = rspec.exponents_to_indices(X)
    spec = rspec.spec
    t = np.asarray(t, dtype=np.int64)
    theta = TWO_PI * ((X @ t) % p.N) / p.N
    frac = spec.chi_angle_fraction(uidx[:, None], np.arange(spec.order)[None, :])
    eig = TWO_PI * frac / spec.exponent
    pr = (1 + np.cos(theta[:, None] - eig)) / 2
    return w @ pr


def binom_tail(n: int, q: float, k: int) -> float:
    return float(sum(math.comb(n, j) * q**j * (1 - q) ** (n - j) for j in range(k, n + 1)))


def rega_acceptance_exact(p: REGAParams, rspec: REGAActionSpec, t, state: StateVector,
                          lam: int | None = None) -> float:
    """Exact acceptance probability: the round operators are diagonal in the
    banknote basis, so acceptance mixes binomial tails over serial weights."""
    lam = p.lam if lam is None else lam
    v, _ = orbit_vector(rspec.base, state)
    mem = float(np.vdot(v, v).real)
    if mem <= 0:
        return 0.0
    fh = findh(rspec.base, StateVector(rspec.base.orbit_labels, v / math.sqrt(mem)))
    weights = fh.distribution
    means = round_means(p, rspec, t)
    k = threshold_count(p, lam)
    return mem * float(sum(wt * binom_tail(lam, q, k) for wt, q in zip(weights, means) if wt > 1e-15))


# ---------------------------------------------------------------- validation

@dataclass
class Check:
    name: str
    value: float
    bound: float
    passed: bool
    required: bool = True


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if c.required)

    def to_json(self) -> list:
        return [c.__dict__ for c in self.checks]


def validate_params(p: REGAParams, rspec: REGAActionSpec | None = None) -> ValidationReport:
    checks = []
    C = p.C
    checks.append(Check("decode_radius_positive", C, 1, C >= 1))
    checks.append(Check("injectivity_8BCm_lt_N", 8 * p.B * max(C, 0) * p.m, p.N, 8 * p.B * C * p.m < p.N))
    half = C // 2
    d1 = _mint_noise_1d(p)
    v = np.arange(p.N)
    vc = np.where(v > p.N // 2, v - p.N, v)
    inside = float(d1[np.abs(vc) <= half].sum()) ** p.m
    checks.append(Check("mint_noise_within_half_radius", inside, 1 - 1e-3, inside >= 1 - 1e-3))
    worst = TWO_PI * p.B * p.m * half / p.N
    checks.append(Check("honest_phase_le_pi_over_8", worst, math.pi / 8, worst <= math.pi / 8 + 1e-12))
    support = (2 * p.Bprime + 1) ** p.m
    checks.append(Check("mint_support_cap", support, SPARSE_CAP, support <= SPARSE_CAP))
    if rspec is not None:
        tv = dstar_tv_distance(p, rspec)
        checks.append(Check("dstar_tv_from_uniform", tv, 0.05, tv <= 0.05, required=False))
        checks.append(_wrong_h_large_fraction(p, rspec))
    return ValidationReport(checks)


def _wrong_h_large_fraction(p: REGAParams, rspec: REGAActionSpec) -> Check:
    """Smallest fraction, over nonzero differences, of g whose pairing
    iota(g).phi(delta) is at least N/4 in absolute value."""
    W = dual_embedding(rspec)
    spec = rspec.spec
    emb = np.array([rspec.embed_index(i) for i in range(spec.order)], dtype=np.int64)
    worst = 1.0
    for j in range(1, spec.order):
        ph = (np.asarray(spec.element_at(j).residues) @ W) % p.N
        vals = (emb @ ph) % p.N
        vc = np.where(vals > p.N // 2, vals - p.N, vals)
        worst = min(worst, float(np.mean(4 * np.abs(vc) >= p.N)))
    return Check("wrong_h_large_fraction", worst, 0.5, worst >= 0.5, required=False)
