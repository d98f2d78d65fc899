import math

import numpy as np
import pytest

from qlightning.actions import (
    GGAMInstance,
    REGAActionSpec,
    TranslationAction,
    WrappedAction,
    build_model,
    decompose_subgroup,
    ggam_build,
    rega_act_vector,
    wrapped_component_transform,
)
from qlightning.errors import ParameterError, RestrictedActionError, UnsupportedCapabilityError
from qlightning.group_core import GroupSpec
from qlightning.statevec import INVALID


def _flip(label: bytes, bit: int) -> bytes:
    v = bytearray(label)
    v[-1 - bit // 8] ^= 1 << (bit % 8)
    return bytes(v)


def test_ggam_trivial_group():
    m = ggam_build(GroupSpec((1,)), 8, 0)
    assert len(m.orbit_labels) == 1


def test_ggam_labels_distinct_and_seeded():
    s = GroupSpec((128,))
    for seed in range(5):
        m = ggam_build(s, 32, seed)
        assert len(set(m.orbit_labels)) == 128
    differ = sum(ggam_build(s, 32, 2 * i).orbit_labels != ggam_build(s, 32, 2 * i + 1).orbit_labels
                 for i in range(100))
    assert differ == 100
    assert ggam_build(s, 32, 7).orbit_labels == ggam_build(s, 32, 7).orbit_labels


def test_ggam_rejects_short_labels():
    with pytest.raises(ParameterError):
        GGAMInstance(GroupSpec((9,)), 3, 0)


@pytest.mark.parametrize("group", ["1", "8", "2x3", "4x4x4", "7x9"])
def test_compatibility_exhaustive(group):
    s = GroupSpec.parse(group)
    for m in (TranslationAction(s), GGAMInstance(s, 20, 3)):
        x = m.start()
        assert m.act(s.zero(), x) == x
        for g in s.elements():
            gx = m.act(g, x)
            for h in s.elements():
                assert m.act(h, gx) == m.act(g + h, x)


def test_nonmember_is_invalid_for_all_g():
    s = GroupSpec((16,))
    m = GGAMInstance(s, 32, 11)
    rng = np.random.default_rng(0)
    while True:
        lab = bytes(rng.integers(0, 256, 4, dtype=np.uint8).tobytes())
        if not m.member(lab):
            break
    assert all(m.act(g, lab) is INVALID for g in s.elements())
    assert m.act(s.zero(), "not bytes") is INVALID


def test_member_examples():
    s = GroupSpec((12,))
    m = GGAMInstance(s, 10, 5)
    assert m.member(m.start())
    every = [v.to_bytes(2, "big") for v in range(2**10)]
    assert sum(m.member(lab) for lab in every) == 12
    # flipping one bit of a member lands on a member only via a table collision
    flips = [_flip(lab, b) for lab in m.orbit_labels for b in range(10)]
    rate = sum(m.member(f) for f in flips) / len(flips)
    assert rate <= 12 / 2**10 * 3


def test_regularity():
    for m in (TranslationAction(GroupSpec((5, 5))), GGAMInstance(GroupSpec((3, 7)), 16, 0)):
        labels = {m.act(g, m.start()) for g in m.spec.elements()}
        assert len(labels) == m.spec.order


def test_twist_examples_and_law():
    s = GroupSpec((2, 6))
    for m in (TranslationAction(s), GGAMInstance(s, 16, 1, twist=True)):
        x = m.start()
        assert m.twist(x) == x
        for g in s.elements():
            gx = m.act(g, x)
            assert m.twist(m.twist(gx)) == gx
            assert m.twist(gx) == m.act(-g, x)
    with pytest.raises(UnsupportedCapabilityError):
        GGAMInstance(s, 16, 1).twist(x)


def test_wrapped_single_component_is_a_relabelled_ggam():
    s = GroupSpec((10,))
    base = GGAMInstance(s, 8, 2)
    W = WrappedAction(base, (1,), (base.start(),), seed=4)
    assert len(set(W.orbit_labels)) == 10
    for g in s.elements():
        for h in s.elements():
            assert W.act(h, W.label_of(g)) == W.label_of(g + h)


def test_wrapped_pair_twist_is_component_swap():
    s = GroupSpec((9,))
    base = GGAMInstance(s, 8, 3)
    x = base.start()
    W = WrappedAction(base, (1, -1), (x, x), seed=5)
    assert W.supports_twist and not base.supports_twist
    for g in s.elements():
        lab = W.label_of(g)
        z1, z2 = W.pi_inverse(lab)
        assert W.twist(lab) == W.pi((z2, z1)) == W.label_of(-g)


def test_wrapped_faithful_to_direct_gamma():
    s = GroupSpec((4, 4))
    base = GGAMInstance(s, 8, 6)
    x = base.start()
    a = s.element([1, 3])
    u = base.act(a, x)
    W = WrappedAction(base, (1, 1), (x, u), seed=7)
    for g in s.elements():
        assert W.label_of(g) == W.pi((base.act(g, x), base.act(g, u)))
        for h in s.elements():
            assert W.act(h, W.label_of(g)) == W.label_of(g + h)


def test_wrapped_rejects_non_injective_gamma():
    s = GroupSpec((6,))
    base = TranslationAction(s)
    with pytest.raises(ParameterError):
        WrappedAction(base, (2, 4), (base.start(), base.start()), seed=0)


def test_transform_examples():
    s = GroupSpec((11,))
    base = GGAMInstance(s, 8, 8)
    x = base.start()
    a = s.element(4)
    u = base.act(a, x)
    W = WrappedAction(base, (1, 1), (x, u), seed=9)
    for g in s.elements():
        lab = W.label_of(g)
        assert wrapped_component_transform(W, lab, (0, 1)) == lab
    real = {0: lambda z: base.act(a * 2, z)}
    for g in s.elements():
        out = wrapped_component_transform(W, W.label_of(g), (1, 0), real)
        assert out == W.label_of(a + g)
    for b in s.elements():
        if b == a * 2:
            continue
        maps = {0: lambda z, b=b: base.act(b, z)}
        outs = [wrapped_component_transform(W, W.label_of(g), (1, 0), maps) for g in s.elements()]
        assert not any(W.member(o) for o in outs)


def test_wrapped_sparsity_nontrivial_regime():
    # small labels so uniform strings actually hit the member set
    s = GroupSpec((8,))
    base = GGAMInstance(s, 3, 1)
    W = WrappedAction(base, (1, 1), (base.start(), base.start()), seed=2, slack_bits=2)
    assert W.label_bits == 8
    rng = np.random.default_rng(3)
    q = 1000
    hits = sum(W.member(int(v).to_bytes(1, "big")) for v in rng.integers(0, 256, q))
    p = 8 / 256
    assert hits <= 2 * q * p
    assert abs(hits - q * p) <= 3 * math.sqrt(q * p * (1 - p))


def test_wrapped_sparsity_default_slack():
    s = GroupSpec((8,))
    base = GGAMInstance(s, 8, 1)
    W = WrappedAction(base, (1, 1), (base.start(), base.start()), seed=2)
    rng = np.random.default_rng(4)
    q = 1000
    nbytes = len(W.start())
    hits = sum(W.member(int(v).to_bytes(nbytes, "big")) for v in rng.integers(0, 2**W.label_bits, q))
    assert hits <= 2 * q * 8 / 2**W.label_bits + 1


def test_descriptor_round_trip():
    s = GroupSpec((3, 5))
    base = GGAMInstance(s, 12, 1, twist=True)
    x = base.start()
    W = WrappedAction(base, (1, 2), (x, base.act(s.element([1, 1]), x)), seed=3)
    for m in (TranslationAction(s), base, W):
        again = build_model(m.descriptor())
        assert again.orbit_labels == m.orbit_labels
        assert again.descriptor() == m.descriptor()


def test_decompose_subgroup():
    assert decompose_subgroup(256, [[32, 96]])[0] == (8,)
    orders, gens = decompose_subgroup(144, [[48, 0], [0, 48]])
    assert sorted(orders) == [3, 3]
    orders, _ = decompose_subgroup(12, [[4, 6]])
    assert orders == (6,)


def test_rega_act_vector():
    rs = REGAActionSpec(256, [[32, 96]], B=1)
    base = rs.base
    x = base.start()
    assert rega_act_vector(rs, [0, 0], x) == x
    for lab in base.orbit_labels:
        for v in ([1, 0], [0, 1], [1, -1], [-1, -1]):
            g = rs.spec.element_at(rs.exponent_to_index(v))
            assert rega_act_vector(rs, v, lab) == base.act(g, lab)
            back = rega_act_vector(rs, [-c for c in v], rega_act_vector(rs, v, lab))
            assert back == lab
    with pytest.raises(RestrictedActionError):
        rega_act_vector(rs, [2, 0], x)


def test_rega_act_rank2():
    rs = REGAActionSpec(144, [[48, 0], [0, 48]], B=1)
    lab = rs.base.start()
    for v in ([1, 0], [0, 1], [1, 1], [-1, 1]):
        g = rs.spec.element_at(rs.exponent_to_index(v))
        assert rega_act_vector(rs, v, lab) == rs.base.act(g, lab)
