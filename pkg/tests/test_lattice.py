import numpy as np
import pytest

from qlightning.errors import ParameterError, PreconditionError
from qlightning.lattice import (
    LWEActionParams,
    SparseState,
    attack_toy,
    collision_probability,
    flooding_check,
    flooding_toy,
    folklore_attack,
    folklore_mint,
    fourier_equivalence_check,
    fourier_toy,
    honest_note,
    ideal_membership_projector,
    lwe_act,
    lwe_psi,
    note_weight,
    serial_distribution,
    sis_from_two_notes,
    sparse_inner,
    support_verifier,
)


def test_psi_normalised_and_supported():
    p = flooding_toy(4)
    for s in ([0], [5], [200]):
        st = lwe_psi(p, s)
        assert np.vdot(st.amps, st.amps).real == pytest.approx(1.0, abs=1e-12)
        centre = (np.array(s) @ p.A) % p.N
        d = (st.vecs - centre + p.N // 2) % p.N - p.N // 2
        assert np.abs(d).max() <= p.trunc


def test_action_identity_and_compatibility():
    p = flooding_toy(4)
    psi = lwe_psi(p, [7])
    assert sparse_inner(psi, lwe_act(p, [0], psi)) == pytest.approx(1.0, abs=1e-12)
    for r, t in ((3, 11), (250, 9)):
        two = lwe_act(p, [t], lwe_act(p, [r], psi))
        one = lwe_act(p, [r + t], psi)
        assert sparse_inner(two, one) == pytest.approx(1.0, abs=1e-12)
        assert sparse_inner(lwe_act(p, [r], psi), lwe_psi(p, [7 + r])) == pytest.approx(1.0, abs=1e-12)


def test_noninjective_matrix_rejected():
    with pytest.raises(ParameterError):
        LWEActionParams(N=8, A=[[2, 4]], sigma=2.0, trunc=2)


def test_flooding_decreases_with_width():
    p = flooding_toy(8)
    assert flooding_check(p, [0, 0]) == pytest.approx(0.0, abs=1e-12)
    ds = [flooding_check(flooding_toy(s), [1, 0]) for s in (4, 8, 16, 32)]
    assert all(b < a for a, b in zip(ds, ds[1:]))
    assert ds[-1] < 0.2


def test_folklore_mint_support_and_serial_marginal():
    p = attack_toy()
    rng = np.random.default_rng(0)
    dist = serial_distribution(p)
    assert dist.sum() == pytest.approx(1.0, abs=1e-9)
    counts = np.zeros(len(dist))
    n = 2000
    for _ in range(n):
        fn = folklore_mint(p, rng)
        counts[int(fn.h[0])] += 1
    exp = dist * n
    stat = float(((counts - exp) ** 2 / exp).sum())
    assert stat < 24.3  # 99.9% point of chi-square with 7 dof
    fn = folklore_mint(p, rng)
    assert len(fn.note.vecs) > 1
    assert np.all((fn.note.vecs @ p.A.T) % p.N == fn.h)
    assert np.abs(fn.note.vecs).max() <= p.trunc
    assert support_verifier(p, fn.h, fn.note) == pytest.approx(1.0, abs=1e-12)


def test_attack_fake_note_is_accepted_and_cloned():
    p = attack_toy()
    rng = np.random.default_rng(1)
    for _ in range(5):
        fn = folklore_mint(p, rng)
        fake = folklore_attack(fn.note, rng)
        x = fake.vecs[0]
        assert np.all((p.A @ x) % p.N == fn.h)
        assert support_verifier(p, fn.h, fake) == 1.0
        clone = SparseState(fake.vecs.copy(), fake.amps.copy())
        assert support_verifier(p, fn.h, clone) == 1.0
        w = note_weight(p, fn.note, x)
        assert abs(sparse_inner(fn.note, fake)) ** 2 == pytest.approx(w, abs=1e-12)
        assert ideal_membership_projector(p, fake) == pytest.approx(w, abs=1e-9)
        assert w < 0.01


def test_ideal_projector_accepts_honest_notes():
    p = attack_toy()
    for h in range(p.N):
        assert ideal_membership_projector(p, honest_note(p, [h])) == pytest.approx(1.0, abs=1e-9)


def test_support_verifier_wrong_serial():
    p = attack_toy()
    note = honest_note(p, [3])
    assert support_verifier(p, [4], note) == 0.0


def test_sis_from_two_notes():
    p = attack_toy()
    rng = np.random.default_rng(2)
    h = np.array([5])
    a, b = honest_note(p, h), honest_note(p, h)
    nonzero = 0
    for _ in range(100):
        r = sis_from_two_notes(p, a, b, h, rng)
        assert r.kernel_ok and np.all((p.A @ r.v) % p.N == 0)
        assert r.linf <= 2 * p.trunc
        nonzero += r.nonzero
    assert nonzero >= 99
    assert collision_probability(p, h) < 0.01
    with pytest.raises(PreconditionError):
        sis_from_two_notes(p, a, honest_note(p, [6]), h, rng)


def test_fourier_domain_equivalence():
    rep = fourier_equivalence_check(fourier_toy())
    assert rep.min_fidelity >= 0.99
    zero = fourier_equivalence_check(fourier_toy(), serials=[np.array([0])])
    assert zero.min_fidelity >= 0.99
    fids = [fourier_equivalence_check(LWEActionParams(16, [[1, 4]], s, 7)).min_fidelity for s in (2.0, 3.0, 4.0)]
    assert fids[0] < fids[1] < fids[2]
