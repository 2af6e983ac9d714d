import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cstarwalk import (
    CyclicGroup,
    FreeGroup,
    FreeTimesCyclic,
    IntLattice,
    Lamplighter,
    ResourceError,
    UsageError,
    central_cyclic_witness,
    conjugate_element,
    enumerate_elements,
    folner_invariance_check,
    folner_set,
    group_from_config,
    lamp_subgroup_witness,
    multiply,
    trivial_witness,
    whole_group_witness,
    word_ball,
)

Z = IntLattice(1)
Z2 = IntLattice(2)
F2 = FreeGroup(2)
F2Z2 = FreeTimesCyclic(2, 2)
LL = Lamplighter()
ALL_GROUPS = [Z, Z2, F2, F2Z2, LL, CyclicGroup(5)]


def free_el(word):
    return F2.parse(word)


class TestMultiply:
    def test_integers_add(self):
        assert multiply(Z.element(3), Z.element(5)).key == 8

    def test_free_reduction(self):
        # (ab) * (b^-1 a) = a^2
        assert multiply(free_el("ab"), free_el("Ba")).key == (1, 1)

    def test_lamplighter_shift_then_flip(self):
        # ({}, 1) * ({0}, 0) = ({1}, 1), by the wreath-product rule
        x = LL.element(((), 1))
        y = LL.element(((0,), 0))
        prod = multiply(x, y)
        # independent computation: lamps of y shifted by pos of x, positions add
        lamps = tuple(sorted(set() ^ {s + 1 for s in (0,)}))
        assert prod.key == (lamps, 1)
        assert prod.key == ((1,), 1)

    def test_mixed_groups_rejected(self):
        with pytest.raises(UsageError):
            multiply(Z.element(1), F2.identity())

    def test_identity_neutral(self):
        for g in ALL_GROUPS:
            e = g.identity()
            for x in enumerate_elements(g, 6):
                assert multiply(e, x) == x
                assert multiply(x, e) == x

    def test_associative_on_samples(self):
        for g in ALL_GROUPS:
            els = enumerate_elements(g, 5)
            for x in els:
                for y in els:
                    for z in els:
                        assert multiply(multiply(x, y), z) == multiply(
                            x, multiply(y, z)
                        )


class TestInverse:
    def test_mul_inverse_is_identity(self):
        for g in ALL_GROUPS:
            for x in enumerate_elements(g, 12):
                assert multiply(x, x.inverse()).is_identity()
                assert x.inverse().inverse() == x


class TestConjugation:
    def test_by_identity(self):
        s = free_el("ab")
        assert conjugate_element(s, F2.identity()) == s

    def test_free_generator(self):
        # b^a = a^-1 b a, reduced word of length 3
        res = conjugate_element(free_el("b"), free_el("a"))
        assert res.key == (-1, 2, 1)
        assert len(res.key) == 3

    def test_central_element_fixed(self):
        z = F2Z2.central_element()
        for q in enumerate_elements(F2Z2, 15):
            assert conjugate_element(z, q) == z

    def test_composition_rule(self):
        els = enumerate_elements(F2, 8)
        for s in els[:4]:
            for q in els:
                for r in els[:4]:
                    lhs = conjugate_element(conjugate_element(s, q), r)
                    rhs = conjugate_element(s, multiply(q, r))
                    assert lhs == rhs


class TestEnumeration:
    def test_z_order(self):
        keys = [el.key for el in enumerate_elements(Z, 5)]
        assert keys == [0, 1, -1, 2, -2]

    def test_f2_order(self):
        words = [str(el) for el in enumerate_elements(F2, 5)]
        assert words == ["e", "a", "A", "b", "B"]

    def test_identity_first(self):
        for g in ALL_GROUPS:
            assert enumerate_elements(g, 1) == [g.identity()]

    def test_prefix_stable(self):
        for g in ALL_GROUPS:
            assert enumerate_elements(g, 10) == enumerate_elements(g, 20)[:10]

    def test_covers_balls_in_length_order(self):
        # every element of word-length <= r appears before any of length r+1
        gens = F2.generators()
        order = enumerate_elements(F2, 53)
        lengths = [len(el.key) for el in order]
        assert lengths == sorted(lengths)
        assert set(el.key for el in order) == set(
            el.key for el in word_ball(gens, 4)
        )

    def test_finite_group_exhausts(self):
        g = CyclicGroup(4)
        els = enumerate_elements(g, 10)
        assert len(els) == 4
        assert {el.key for el in els} == {0, 1, 2, 3}


class TestWordBall:
    def test_empty_set(self):
        assert word_ball([], 5, group=F2) == [F2.identity()]

    def test_z_interval(self):
        ball = word_ball([Z.element(1), Z.element(-1)], 3)
        assert sorted(el.key for el in ball) == [-2, -1, 0, 1, 2]

    def test_f2_a_only(self):
        ball = word_ball([free_el("a"), free_el("A")], 2)
        assert {str(el) for el in ball} == {"e", "a", "A"}

    def test_monotone(self):
        gens = F2.generators()
        small = set(word_ball(gens, 3))
        large = set(word_ball(gens, 4))
        assert small <= large
        fewer = set(word_ball(gens[:2], 3))
        assert fewer <= small

    def test_cap_overflow(self):
        with pytest.raises(ResourceError) as info:
            word_ball(F2.generators(), 12, cap=100)
        assert info.value.partial is not None


class TestFolnerCheck:
    def test_interval_boundary(self):
        F = [Z.element(k) for k in range(-10, 11)]
        R = [Z.element(1), Z.element(-1)]
        res = folner_invariance_check(F, R, 0.1)
        assert res.ok
        assert res.defect == pytest.approx(2 / 21)

    def test_singleton_fails(self):
        res = folner_invariance_check([Z.element(0)], [Z.element(1)], 0.5)
        assert not res.ok
        assert res.defect == 1.0

    def test_subgroup_closure(self):
        g = CyclicGroup(6)
        H = g.elements()
        res = folner_invariance_check(H, H[:3], 1e-9)
        assert res.ok
        assert res.defect == 0.0

    def test_empty_candidate_rejected(self):
        with pytest.raises(UsageError):
            folner_invariance_check([], [Z.element(0)], 0.5)


class TestFolnerSet:
    def test_finite_central_subgroup(self):
        w = central_cyclic_witness(F2Z2)
        F = folner_set(w, [F2Z2.central_element()], 0.9)
        assert {el.key for el in F} == {((), 0), ((), 1)}

    def test_z_interval_request(self):
        w = whole_group_witness(Z)
        R = [Z.element(k) for k in (1, -1, 2, -2)]
        F = folner_set(w, R, 0.25)
        # derived oracle: smallest interval [-n, n] with |RF \ F| < 0.25 |F|
        # has n = 8 (defect 4/17); the oracle grows one radius at a time.
        assert sorted(el.key for el in F) == list(range(-8, 9))
        assert folner_invariance_check(F, R, 0.25).ok

    def test_lamp_subgroup_request(self):
        w = lamp_subgroup_witness(LL)
        R = [LL.lamp_flip(0), LL.lamp_flip(1), LL.lamp_flip(-1)]
        F = folner_set(w, R, 0.5)
        assert all(el.key[1] == 0 for el in F)
        assert folner_invariance_check(F, R, 0.5).ok
        # all configurations over the site window show up
        assert len(F) == 2 ** 3

    def test_whole_lamplighter_request(self):
        w = whole_group_witness(LL)
        F = folner_set(w, [LL.lamp_flip(0)], 0.5)
        assert folner_invariance_check(F, [LL.lamp_flip(0)], 0.5).ok

    def test_request_outside_subgroup_rejected(self):
        w = central_cyclic_witness(F2Z2)
        with pytest.raises(UsageError):
            folner_set(w, [F2Z2.gen(0)], 0.5)

    def test_trivial_witness(self):
        w = trivial_witness(F2)
        assert folner_set(w, [F2.identity()], 0.5) == [F2.identity()]


class TestVisibilityOnBalls:
    def test_central_involution_visible_in_radius_six_ball(self):
        z = F2Z2.central_element()
        witness = central_cyclic_witness(F2Z2)
        ball = word_ball(F2Z2.generators(), 6, cap=2_000_000)
        for q in ball:
            assert witness.contains(conjugate_element(z, q))


class TestSerialization:
    def test_roundtrip_enumerated(self):
        for g in ALL_GROUPS:
            for el in enumerate_elements(g, 25):
                assert g.parse(str(el)) == el

    def test_spaced_free_words_accepted(self):
        assert F2.parse("a b A") == F2.parse("abA")

    def test_bad_letters_rejected(self):
        with pytest.raises(UsageError):
            F2.parse("c")

    def test_group_config_roundtrip(self):
        for g in ALL_GROUPS:
            rebuilt = group_from_config(g.to_config())
            assert rebuilt.to_config() == g.to_config()
            assert rebuilt.generator_keys() == g.generator_keys()


@st.composite
def free_words(draw):
    letters = draw(st.lists(st.sampled_from([1, -1, 2, -2]), max_size=12))
    word = []
    for x in letters:
        if word and word[-1] == -x:
            word.pop()
        else:
            word.append(x)
    return F2.element(tuple(word))


class TestProperties:
    @settings(max_examples=150, deadline=None)
    @given(free_words(), free_words())
    def test_free_inverse_antihomomorphism(self, x, y):
        assert multiply(x, y).inverse() == multiply(y.inverse(), x.inverse())

    @settings(max_examples=150, deadline=None)
    @given(free_words())
    def test_free_words_reduced(self, x):
        for u, v in zip(x.key, x.key[1:]):
            assert u != -v

    @settings(max_examples=100, deadline=None)
    @given(free_words())
    def test_free_roundtrip(self, x):
        assert F2.parse(str(x)) == x

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(-30, 30), min_size=1, max_size=5))
    def test_lamplighter_group_laws(self, positions):
        els = [LL.element((tuple(sorted({p % 7 - 3})), p % 5 - 2)) for p in positions]
        acc = LL.identity()
        for el in els:
            acc = multiply(acc, el)
        inv = LL.identity()
        for el in reversed(els):
            inv = multiply(inv, el.inverse())
        assert multiply(acc, inv).is_identity()
