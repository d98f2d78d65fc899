import numpy as np
import pytest

from qlightning.actions import GGAMInstance
from qlightning.errors import ProtocolError, QueryBudgetError, UnsupportedCapabilityError
from qlightning.group_core import GroupSpec
from qlightning.harness import (
    MinimalOracle,
    OneMinCDHReferee,
    StandardOracle,
    brute_force_adversary,
    brute_force_solve,
    d2x_oracle,
    dlog_1mincdh_game,
    map_shift_property,
    query_then_search_adversary,
    run_pair_reduction,
    run_cloner_reduction,
    run_twist_reduction,
    sample_game,
    std_to_min_adapter,
    uniform_guess_adversary,
)
from qlightning.lightning import banknote_state
from qlightning.statevec import basis_state, fidelity, random_state


def _model(group, bits=16, seed=3, twist=False):
    return GGAMInstance(GroupSpec.parse(group), bits, seed, twist=twist)


def test_dlog_instance_and_solver():
    m = _model("8")
    inst = sample_game("dlog", m, np.random.default_rng(0))
    assert inst.publics["x"] == m.start()
    assert inst.publics["y"] == m.act(inst.witness["g"], m.start())
    big = _model("97")
    rng = np.random.default_rng(1)
    for _ in range(5):
        inst = sample_game("dlog", big, rng)
        assert brute_force_solve(inst) == inst.witness["g"]


def test_ddh_instance_and_mode_recovery():
    m = _model("12")
    rng = np.random.default_rng(2)
    modes = []
    for _ in range(40):
        inst = sample_game("ddh", m, rng)
        a, b = inst.witness["a"], inst.witness["b"]
        if inst.mode == 1:
            assert inst.publics["w"] == m.act(a + b, m.start())
        else:
            assert inst.publics["w"] != m.act(a + b, m.start())
        assert brute_force_solve(inst) == inst.mode
        modes.append(inst.mode)
    assert 0 < sum(modes) < 40


def test_mode_bit_is_fair():
    # P(mode=1) = 1/2: 4000 draws stay within 3 binomial sd of 2000
    m = _model("5")
    rng = np.random.default_rng(3)
    ones = sum(sample_game("ddh", m, rng).mode for _ in range(4000))
    assert abs(ones - 2000) <= 3 * np.sqrt(1000)


def test_signed_games_need_twist():
    with pytest.raises(UnsupportedCapabilityError):
        sample_game("dlog±", _model("8"), np.random.default_rng(0))
    m = _model("8", twist=True)
    inst = sample_game("dlog±", m, np.random.default_rng(0))
    assert inst.publics["y_neg"] == m.act(-inst.witness["g"], m.start())


def test_cdh_solver():
    m = _model("3x5")
    inst = sample_game("cdh", m, np.random.default_rng(4))
    a, b = inst.witness["a"], inst.witness["b"]
    assert brute_force_solve(inst) == m.act(a + b, m.start())


def test_d2x_minimal_oracle():
    m = _model("9")
    rng = np.random.default_rng(5)
    while True:
        inst = sample_game("d2x", m, rng)
        if inst.mode == 1:
            break
    a = inst.witness["a"]
    orc = d2x_oracle(inst)
    assert orc.query_label(inst.publics["u"]) == m.act(a * 3, m.start())
    with pytest.raises(QueryBudgetError):
        orc.query_label(inst.publics["u"])


def test_d2x_mode_recovered_with_oracle():
    m = _model("9")
    rng = np.random.default_rng(6)
    for _ in range(10):
        inst = sample_game("d2x", m, rng)
        assert brute_force_solve(inst, d2x_oracle(inst)) == inst.mode


def test_coherent_oracle_permutes_banknote():
    m = _model("6")
    c = m.spec.element(2)
    note = banknote_state(m, m.spec.element(1))
    out = MinimalOracle(m, c).apply(note)
    for lab, amp in zip(note.basis, note.amps):
        assert out.amp(m.act(c, lab)) == amp


def test_adapter_matches_minimal_oracle():
    m = _model("8")
    rng = np.random.default_rng(7)
    c = m.spec.element(3)
    basis = m.orbit_labels + (b"\x12\x34",)
    for _ in range(50):
        psi = random_state(basis, rng)
        direct = MinimalOracle(m, c).apply(psi)
        adapter = std_to_min_adapter(StandardOracle(m, c), StandardOracle(m, -c))
        via = adapter.apply(psi)
        a, b = direct, via.embed(direct.basis)
        assert fidelity(a, b) == pytest.approx(1.0, abs=1e-12)
        assert adapter.last_residue == 0.0


def test_adapter_unitary_matches_exhaustively():
    for g in ("4", "2x3", "64"):
        m = _model(g, bits=8)
        c = m.spec.element_at(m.spec.order - 1)
        for lab in m.orbit_labels:
            e = basis_state(m.orbit_labels, lab)
            via = std_to_min_adapter(*d2x_oracle_pair(m, c)).apply(e)
            assert via.amp(m.act(c, lab)) == 1


def d2x_oracle_pair(m, c):
    return StandardOracle(m, c), StandardOracle(m, -c)


def test_adapter_refuses_spent_oracle():
    m = _model("5")
    s_c, s_neg = d2x_oracle_pair(m, m.spec.element(1))
    s_c.apply({(m.start(), bytes(len(m.start()))): 1.0})
    with pytest.raises(QueryBudgetError):
        std_to_min_adapter(s_c, s_neg)


@pytest.mark.parametrize("group", ["8", "35", "4x4x4"])
def test_cloner_reduction_ideal_cloner(group):
    rep = run_cloner_reduction(_model(group), "ideal", trials=2, rng=np.random.default_rng(8))
    assert rep.swap_real == pytest.approx(1.0, abs=1e-12)
    assert rep.swap_random == pytest.approx(0.5, abs=1e-12)
    assert rep.advantage == pytest.approx(0.5, abs=1e-12)
    assert all(r["queries_left"] == 0 for r in rep.rows)


def test_cloner_reduction_other_cloners_have_no_advantage():
    base = _model("16")
    meas = run_cloner_reduction(base, "measured", trials=3, rng=np.random.default_rng(9))
    assert meas.advantage < 0.01
    rnd = run_cloner_reduction(base, "random-state", trials=3, rng=np.random.default_rng(9))
    assert rnd.advantage < 0.05


def test_pair_reduction_complementary_and_same_serial():
    base = _model("7")
    rep = run_pair_reduction(base, "complementary", trials=3, rng=np.random.default_rng(10))
    assert rep.extra["min_verify"] == pytest.approx(1.0, abs=1e-9)
    assert rep.swap_real == pytest.approx(1.0, abs=1e-9)
    assert rep.swap_random == pytest.approx(0.5, abs=1e-9)
    bad = run_pair_reduction(base, "same-serial", trials=3, rng=np.random.default_rng(10))
    assert bad.p_real < 1.0 - 1e-3


def test_twist_reduction_exhaustive():
    for g in ("6", "2x4", "64"):
        rep = run_twist_reduction(_model(g, bits=10), trials=10, rng=np.random.default_rng(11))
        assert rep.extra["label_mismatches"] == 0
        assert rep.extra["twist_law_failures"] == 0
        assert rep.extra["transcript_mismatches"] == 0
        assert rep.extra["base_supports_twist"] is False
        assert rep.p_real == 1.0 and rep.p_random == 0.0


def test_map_shift_examples():
    m = _model("8")
    rng = np.random.default_rng(12)
    alpha = rng.normal(size=8) + 1j * rng.normal(size=8)
    r0 = map_shift_property(m, alpha, m.spec.zero(), rng)
    assert r0.shifted == r0.y and r0.fidelity == pytest.approx(1.0, abs=1e-12)
    for _ in range(20):
        alpha = rng.normal(size=8) + 1j * rng.normal(size=8)
        g = m.spec.element(int(rng.integers(8)))
        assert map_shift_property(m, alpha, g, rng).fidelity == pytest.approx(1.0, abs=1e-10)
    g1, g2 = m.spec.element(3), m.spec.element(6)
    y = m.start()
    a = map_shift_property(m, alpha, g1 + g2, y=y)
    assert a.shifted == m.act(g2, m.act(g1, y))


def test_1mincdh_game():
    rng = np.random.default_rng(13)
    m = _model("64")
    assert all(dlog_1mincdh_game(m, brute_force_adversary, rng).won for _ in range(10))
    t = dlog_1mincdh_game(m, uniform_guess_adversary, rng)
    assert t.win_probability == pytest.approx(1 / 64)
    t = dlog_1mincdh_game(m, query_then_search_adversary, rng)
    assert t.queried and t.won


def test_1mincdh_referee_enforces_budget_and_order():
    m = _model("8")
    ref = OneMinCDHReferee(m, m.spec.element(3))
    st_ = basis_state(m.orbit_labels, m.start())
    ref.query(st_)
    with pytest.raises(QueryBudgetError):
        ref.query(st_)
    ref2 = OneMinCDHReferee(m, m.spec.element(3))
    ref2.reveal()
    with pytest.raises(ProtocolError):
        ref2.query(st_)
