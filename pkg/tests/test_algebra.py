import math
import random

import pytest

from cstarwalk import FreeGroup, FreeTimesCyclic, IntLattice, UsageError
from cstarwalk.algebra import (
    AlgebraElement,
    NormBudget,
    add,
    adjoint,
    algebra_element,
    algebra_from_table,
    algebra_to_table,
    algebra_unit,
    algebra_zero,
    averaged_conjugation,
    conjugate_action,
    estimate_norm,
    kernel_projection,
    l1_norm,
    l2_norm,
    multiply_elements,
    norm_lower_bound,
    norm_upper_bound,
    scale,
    trace,
    trace_moments,
)
from cstarwalk.freeness import is_free_basis, subgroup_rank
from cstarwalk.measures import SparseMeasure, convolve, dirac, uniform_on

F2 = FreeGroup(2)
Z = IntLattice(1)


def a_(word):
    return algebra_unit(F2.parse(word))


def srw_element():
    gens = F2.generators()
    out = algebra_zero(F2)
    for g in gens:
        out = add(out, scale(0.25, algebra_unit(g)))
    return out


def conjugate_average(m):
    """(1/m) sum_k a_{a^-k b a^k}."""
    a = F2.parse("a")
    b = F2.parse("b")
    out = algebra_zero(F2)
    for k in range(1, m + 1):
        ak = F2.element((1,) * k)
        out = add(out, scale(1.0 / m, algebra_unit(b.conjugate_by(ak))))
    return out


def srw_f2_return_probs(nsteps):
    """Independent radial oracle: distance birth-death chain of the F2 SRW."""
    v = [0.0] * (nsteps + 2)
    v[0] = 1.0
    out = [1.0]
    for _ in range(nsteps):
        nv = [0.0] * (nsteps + 2)
        for r, w in enumerate(v):
            if w == 0.0:
                continue
            if r == 0:
                nv[1] += w
            else:
                nv[r + 1] += 0.75 * w
                nv[r - 1] += 0.25 * w
        v = nv
        out.append(v[0])
    return out


class TestFolding:
    def test_standard_generators(self):
        assert subgroup_rank([(1,), (2,)]) == 2
        assert is_free_basis([(1,), (2,)])

    def test_inverse_pair_collapses(self):
        assert subgroup_rank([(1,), (-1,)]) == 1
        assert not is_free_basis([(1,), (-1,)])

    def test_power_drops_rank(self):
        assert subgroup_rank([(1,), (1, 1)]) == 1
        assert not is_free_basis([(1,), (1, 1)])

    def test_redundant_generator(self):
        # {a, b, ab} generates F2 but is not a basis
        assert subgroup_rank([(1,), (2,), (1, 2)]) == 2
        assert not is_free_basis([(1,), (2,), (1, 2)])

    def test_conjugate_family_free(self):
        words = [(-1,) * k + (2,) + (1,) * k for k in range(1, 18)]
        assert subgroup_rank(words) == 17
        assert is_free_basis(words)

    def test_commuting_conjugates_collapse(self):
        words = [(-2,) * k + (2,) + (2,) * k for k in range(1, 5)]
        # all reduce to b
        assert subgroup_rank([(2,)] * 4) == 1


class TestArithmetic:
    def test_unitary_multiplication(self):
        assert multiply_elements(a_("a"), a_("A")).coeffs == {F2.identity(): 1.0}

    def test_adjoint_of_unit(self):
        assert adjoint(a_("ab")).coeffs == {F2.parse("BA"): 1.0}

    def test_adjoint_involution(self):
        x = add(scale(0.5 + 1j, a_("ab")), scale(-2.0, a_("B")))
        assert adjoint(adjoint(x)).coeffs == x.coeffs

    def test_distributivity(self):
        lhs = multiply_elements(add(a_("a"), a_("b")), a_("aa"))
        rhs = add(multiply_elements(a_("a"), a_("aa")), multiply_elements(a_("b"), a_("aa")))
        assert lhs.coeffs == rhs.coeffs


class TestTrace:
    def test_identity(self):
        assert trace(algebra_unit(F2.identity())) == 1.0

    def test_nonidentity(self):
        assert trace(a_("ab")) == 0

    def test_inner_product_formula(self):
        x = add(scale(0.5, a_("a")), scale(2.0 - 1j, a_("bA")))
        got = trace(multiply_elements(adjoint(x), x))
        expect = sum(abs(c) ** 2 for c in x.coeffs.values())
        assert got == pytest.approx(expect)

    def test_kernel_projection(self):
        x = add(scale(3.0, algebra_unit(F2.identity())), a_("b"))
        k = kernel_projection(x)
        assert trace(k) == 0
        back = add(k, scale(trace(x), algebra_unit(F2.identity())))
        assert back.coeffs == x.coeffs


class TestConjugation:
    def test_identity_element_fixed(self):
        nu = uniform_on(F2.generators())
        res = averaged_conjugation(algebra_unit(F2.identity()), nu)
        assert res.coeffs == {F2.identity(): pytest.approx(1.0)}

    def test_dirac_average_is_single_conjugation(self):
        x = add(a_("a"), scale(2.0, a_("b")))
        g = F2.parse("ab")
        lhs = averaged_conjugation(x, dirac(g))
        rhs = conjugate_action(x, g)
        assert lhs.coeffs == pytest.approx(rhs.coeffs)

    def test_composition_identity(self):
        # (a^nu)^mu = a^(nu * mu), coefficientwise, brute force
        random.seed(5)
        els = [F2.parse(w) for w in ("a", "b", "aB", "ba")]
        for _ in range(20):
            x = algebra_element(
                F2, {random.choice(els): random.uniform(-1, 1) for _ in range(3)}
            )
            nu = uniform_on(random.sample(els, 2))
            mu = uniform_on(random.sample(els, 3))
            lhs = averaged_conjugation(averaged_conjugation(x, nu), mu)
            rhs = averaged_conjugation(x, convolve(nu, mu))
            for el in set(lhs.coeffs) | set(rhs.coeffs):
                assert lhs.coeffs.get(el, 0) == pytest.approx(
                    rhs.coeffs.get(el, 0), abs=1e-12
                )

    def test_trace_preserved_and_kernel_invariant(self):
        nu = uniform_on([F2.parse("a"), F2.parse("bA")])
        x = add(scale(0.7, algebra_unit(F2.identity())), scale(0.3, a_("ab")))
        res = averaged_conjugation(x, nu)
        assert trace(res) == pytest.approx(trace(x))
        k = kernel_projection(x)
        assert trace(averaged_conjugation(k, nu)) == pytest.approx(0.0)

    def test_l1_contraction(self):
        nu = uniform_on([F2.parse("a"), F2.parse("b")])
        x = add(a_("ab"), scale(-1.0, a_("Ba")))
        assert l1_norm(averaged_conjugation(x, nu)) <= l1_norm(x) + 1e-12


class TestNormLowerBound:
    def test_unitary(self):
        seq = norm_lower_bound(a_("ab"), 6)
        assert all(t == pytest.approx(1.0) for t in seq)

    def test_zero(self):
        assert norm_lower_bound(algebra_zero(F2), 4) == [0.0] * 4

    def test_srw_kesten(self):
        # independent oracle: radial birth-death chain return probabilities
        a = srw_element()
        moments, engine = trace_moments(a, 41)
        assert engine == "free-walk"
        p = srw_f2_return_probs(82)
        for m in range(42):
            assert moments[m] == pytest.approx(p[2 * m], rel=1e-10)
        seq = norm_lower_bound(a, 40)
        rho = math.sqrt(3) / 2
        assert all(t <= rho + 1e-9 for t in seq)
        assert all(b >= a_ - 1e-10 for a_, b in zip(seq, seq[1:]))
        assert seq[-1] >= 0.85

    def test_nondecreasing_on_random_elements(self):
        random.seed(11)
        for _ in range(10):
            coeffs = {}
            for el in random.sample([F2.parse(w) for w in ("a", "b", "A", "aa", "ab")], 3):
                coeffs[el] = random.uniform(-1, 1)
            x = algebra_element(F2, coeffs)
            try:
                seq = norm_lower_bound(x, 8)
            except Exception:
                continue
            assert all(b >= a - 1e-10 for a, b in zip(seq, seq[1:]))

    def test_conjugate_average_m4(self):
        x = conjugate_average(4)
        seq = norm_lower_bound(x, 40)
        true = 2 * math.sqrt(3) / 4
        assert all(t <= true + 1e-9 for t in seq)
        assert 0.80 <= seq[-1] <= true + 1e-9

    def test_dense_engine_matches_walk_engine(self):
        x = add(scale(0.6, a_("a")), scale(0.4, a_("b")))
        walk, eng1 = trace_moments(x, 5)
        assert eng1 == "free-walk"
        # force the dense engine through a Z-like embedding invariant:
        # compare against explicit power traces
        b = multiply_elements(adjoint(x), x)
        power = algebra_unit(F2.identity())
        for m in range(1, 6):
            power = multiply_elements(power, b)
            assert trace(power) == pytest.approx(walk[m], rel=1e-12)

    def test_abelian_dense_engine(self):
        x = algebra_element(Z, {Z.element(1): 0.5, Z.element(-1): 0.5})
        moments, engine = trace_moments(x, 6)
        assert engine == "dense"
        for m in range(7):
            assert moments[m] == pytest.approx(math.comb(2 * m, m) / 4 ** m)


class TestNormUpperBound:
    def test_unitary(self):
        assert norm_upper_bound(a_("ab"), 3) == pytest.approx(1.0)

    def test_sum_of_two_units_depth_one(self):
        x = add(a_("a"), a_("b"))
        # (l1 of a*a)^(1/2) = 2
        assert norm_upper_bound(x, 1) == pytest.approx(2.0)

    def test_upper_at_least_lower(self):
        random.seed(3)
        for _ in range(10):
            coeffs = {
                F2.parse(w): random.uniform(-1, 1)
                for w in random.sample(["a", "b", "ab", "A", "Ba"], 3)
            }
            x = algebra_element(F2, coeffs)
            up = norm_upper_bound(x, 2)
            try:
                low = max(norm_lower_bound(x, 6))
            except Exception:
                low = l2_norm(x)
            assert up >= low - 1e-9


class TestEstimateNorm:
    def test_unitary_above_half(self):
        est = estimate_norm(a_("b"), threshold=0.5)
        assert est.flag == "certified-above"
        assert est.lower == pytest.approx(1.0)
        assert est.upper == pytest.approx(1.0)

    def test_zero_below_half(self):
        est = estimate_norm(algebra_zero(F2), threshold=0.5)
        assert est.flag == "certified-below"

    def test_srw_above_08(self):
        est = estimate_norm(srw_element(), NormBudget(moment_depth=40), threshold=0.8)
        assert est.flag == "certified-above"
        assert est.lower >= 0.85

    def test_free_support_leinert_bound(self):
        x = conjugate_average(17)
        est = estimate_norm(x, NormBudget(moment_depth=30))
        # true norm 2*sqrt(16)/17
        true = 8 / 17
        assert est.lower <= true <= est.upper
        assert est.upper <= 2 / math.sqrt(17) + 1e-12
        assert est.certification(0.5) == "certified-below"

    def test_averaging_contracts_certified_bounds(self):
        x = add(a_("b"), a_("B"))  # self-adjoint
        nu = uniform_on([F2.parse("a"), F2.parse("aa")])
        up = norm_upper_bound(x, 2)
        y = averaged_conjugation(x, nu)
        t = max(norm_lower_bound(y, 6))
        assert t <= up + 1e-9

    def test_geometric_decay_replay(self):
        # once a two-thirds decay step is certified, a further power of the
        # same measure certifies the squared level (the halving-replay
        # argument, at desk scale on the shipped free-group instance)
        d = a_("b")
        nu = uniform_on([F2.element((1,) * k) for k in range(1, 10)])
        from cstarwalk.measures import convolution_power

        n1 = 2
        nu_n1 = convolution_power(nu, n1)
        y1 = averaged_conjugation(d, nu_n1)
        est1 = estimate_norm(y1, NormBudget(moment_depth=10))
        assert est1.upper <= (2 / 3) * 1.0
        for n2 in range(1, 9):
            y2 = averaged_conjugation(y1, convolution_power(nu, n2))
            est2 = estimate_norm(y2, NormBudget(moment_depth=10))
            if est2.upper <= (2 / 3) ** 2 + 1e-9:
                break
        else:
            raise AssertionError("no n2 <= 8 certified the squared level")

    def test_trace_positivity(self):
        random.seed(23)
        for _ in range(25):
            coeffs = {
                F2.parse(w): complex(random.uniform(-1, 1), random.uniform(-1, 1))
                for w in random.sample(["a", "b", "ab", "A", "Ba", "e"], 3)
            }
            x = algebra_element(F2, coeffs)
            b = multiply_elements(adjoint(x), x)
            power = algebra_unit(F2.identity())
            for m in range(1, 4):
                power = multiply_elements(power, b)
                t = complex(trace(power))
                assert abs(t.imag) < 1e-9
                assert t.real >= -1e-9


class TestSerialization:
    def test_roundtrip(self):
        x = add(scale(0.5 - 0.25j, a_("ab")), scale(-1.5, a_("B")))
        back = algebra_from_table(F2, algebra_to_table(x))
        assert back.coeffs == x.coeffs

    def test_central_product_group(self):
        G = FreeTimesCyclic(2, 2)
        x = algebra_element(G, {G.central_element(): 1.0, G.gen(0): -2.0})
        back = algebra_from_table(G, algebra_to_table(x))
        assert back.coeffs == x.coeffs
