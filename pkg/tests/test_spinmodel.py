import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixedq.combinatorics import PairPartition, partition_of_vector, refines
from mixedq.moments import constant, crossing_weight, moment, tensor_identity, validate
from mixedq.spinmodel import (
    BudgetExceededError,
    EpsilonTable,
    SpinElement,
    SpinRepresentation,
    clt_partition_values,
    clt_statistic,
    clt_statistic_bruteforce,
    conditional_expectation,
    derivation,
    expected_trace,
    falling_factorial,
    gradient_form,
    gradient_form_via_derivation,
    matrix_representation,
    number_operator_spin,
    ou_spin,
    random_element,
    reduce,
    reduce_symbolic,
    reduce_with_schedule,
    sample_epsilon,
    trace,
)

from conftest import random_Q, structure_matrices
from oracles import sign_expectation_by_enumeration

Q2 = validate([[0.3, -0.55], [-0.55, 0.8]])


@pytest.fixture(scope="module")
def eps():
    return sample_epsilon(Q2, 2, 4, seed=17)


class TestSampling:
    def test_degenerate_couplings(self):
        for q, want in [(1.0, 1), (-1.0, -1)]:
            e = sample_epsilon(constant(q, 2), 2, 5, seed=3)
            d = e.dense()
            off = ~np.eye(d.shape[0], dtype=bool)
            assert (d[off] == want).all()
            assert (np.diag(d) == -1).all()

    def test_symmetric_and_deterministic(self, eps):
        d = eps.dense()
        assert np.array_equal(d, d.T)
        assert np.array_equal(d, sample_epsilon(Q2, 2, 4, seed=17).dense())
        assert not np.array_equal(d, sample_epsilon(Q2, 2, 4, seed=18).dense())

    @pytest.mark.parametrize("storage", ["dense", "lazy"])
    def test_empirical_mean(self, storage):
        Q = validate([[0.2, -0.6], [-0.6, 0.7]])
        m = 160 if storage == "dense" else 120
        e = sample_epsilon(Q, 2, m, seed=5, storage=storage)
        d = e.dense().astype(float)
        iu = np.triu_indices(m, 1)
        blocks = {(1, 1): d[:m, :m][iu], (2, 2): d[m:, m:][iu], (1, 2): d[:m, m:].ravel()}
        for (a, b), vals in blocks.items():
            # mean of n independent +-1 draws: standard error sqrt((1 - q^2) / n)
            err = 3 * math.sqrt((1 - Q.q(a, b) ** 2) / len(vals))
            assert abs(vals.mean() - Q.q(a, b)) <= err

    def test_tensor_repeated_pattern(self, eps):
        rep = sample_epsilon(Q2, 6, 4, seed=17, scheme="tensor-repeated")
        for (i, k, j, l) in itertools.product(range(1, 3), range(1, 5), range(1, 3), range(1, 5)):
            for a, b in itertools.product(range(3), repeat=2):
                assert rep.sign((i + 2 * a, k), (j + 2 * b, l)) == eps.sign((i, k), (j, l)) or (i, k) == (j, l)

    def test_scheme_errors(self):
        with pytest.raises(ValueError):
            sample_epsilon(Q2, 3, 2, seed=0)
        with pytest.raises(ValueError):
            sample_epsilon(Q2, 3, 2, seed=0, scheme="tensor-repeated")
        with pytest.raises(ValueError):
            sample_epsilon(Q2, 2, 2, seed=0, scheme="other")

    def test_dump_roundtrip(self, eps, tmp_path):
        path = tmp_path / "eps.bin"
        eps.dump(path)
        back = EpsilonTable.load(path)
        assert np.array_equal(back.dense(), eps.dense())
        assert (back.m, back.seed, back.scheme, back.Q) == (eps.m, eps.seed, eps.scheme, eps.Q)
        head = path.read_bytes().split(b"\n", 1)[0]
        assert b'"seed": 17' in head and b'"scheme": "independent"' in head

    def test_lazy_is_reproducible_and_symmetric(self):
        a = sample_epsilon(Q2, 2, 6, seed=99, storage="lazy")
        b = sample_epsilon(Q2, 2, 6, seed=99, storage="lazy")
        assert np.array_equal(a.dense(), b.dense())
        assert np.array_equal(a.dense(), a.dense().T)


class TestReduce:
    def test_examples(self, eps):
        assert reduce([(1, 1), (1, 1)], eps) == (1, ())
        s = eps.sign((1, 1), (2, 1))
        assert reduce([(1, 1), (2, 1), (1, 1), (2, 1)], eps) == (s, ())
        w = ((1, 1), (1, 3), (2, 2))
        assert reduce(w, eps) == (1, w)

    def test_trace_examples(self, eps):
        assert trace([], eps) == 1.0
        assert trace([(2, 3)], eps) == 0.0
        assert trace([(1, 1), (2, 1), (1, 1), (2, 1)], eps) == eps.sign((1, 1), (2, 1))

    @given(st.lists(st.tuples(st.integers(1, 2), st.integers(1, 4)), max_size=8), st.integers(0, 2**32))
    @settings(max_examples=40)
    def test_confluence(self, word, seed):
        e = sample_epsilon(Q2, 2, 4, seed=17)
        want = reduce(word, e)
        rng = np.random.default_rng(seed)
        for _ in range(100):
            assert reduce_with_schedule(word, e, rng) == want

    def test_output_is_canonical(self, eps):
        rng = np.random.default_rng(0)
        letters = eps.letters()
        for _ in range(200):
            word = [letters[n] for n in rng.integers(0, len(letters), 7)]
            _, r = reduce(word, eps)
            assert list(r) == sorted(set(r)) and len(r) == len(set(r))


class TestExpectedTrace:
    def test_examples(self):
        assert expected_trace([(1, 1), (2, 1), (1, 1), (2, 1)], Q2) == Q2.q(1, 2)
        assert expected_trace([(1, 1), (1, 2), (1, 1), (1, 2)], Q2) == Q2.q(1, 1)
        assert expected_trace([(1, 1), (2, 1), (1, 1)], Q2) == 0.0

    @given(structure_matrices(n_max=2), st.data())
    @settings(max_examples=40)
    def test_matches_enumeration_over_sign_tables(self, Q, data):
        letters = [(i, k) for i in range(1, Q.N + 1) for k in (1, 2)]
        word = data.draw(st.lists(st.sampled_from(letters), min_size=0, max_size=6))
        if len(set(word)) > 4:
            word = word[:4]
        assert expected_trace(word, Q) == pytest.approx(sign_expectation_by_enumeration(word, Q), abs=1e-12)

    def test_tensor_repeated_matches_enlarged_independent(self):
        # the sign law over Q (x) ones(2, 2) with independent signs equals that of the
        # repetition scheme on 2N rows for these moments (checked d <= 4)
        Q = validate([[0.4, -0.2], [-0.2, 0.6]])
        big = tensor_identity(Q, 2)
        for d in (2, 4):
            for i in itertools.product(range(1, 5), repeat=d):
                for m in (2, 3):
                    a = clt_statistic(i, m, Q=Q, scheme="tensor-repeated")
                    b = clt_statistic(i, m, Q=big)
                    diag_collide = any(i[x] != i[y] and (i[x] - i[y]) % 2 == 0 for x in range(d) for y in range(d))
                    if not diag_collide:
                        assert a == pytest.approx(b, abs=1e-12)
                assert clt_statistic(i, 64, Q=Q, scheme="tensor-repeated") == pytest.approx(
                    clt_statistic(i, 64, Q=big), abs=2 * d * d / 64
                )


class TestCLT:
    def test_square(self):
        for m in (1, 3, 10):
            assert clt_statistic((1, 1), m, Q=Q2) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("m", [1, 2, 5, 8, 32])
    def test_fourth_moment_closed_form(self, m):
        q = 0.5
        want = (m * (m - 1) / m**2) * (2 + q) + m / m**2
        assert clt_statistic((1,) * 4, m, Q=constant(q, 1)) == pytest.approx(want, abs=1e-14)

    @given(structure_matrices(n_max=3), st.data())
    @settings(max_examples=20)
    def test_grouped_equals_bruteforce(self, Q, data):
        i = data.draw(st.lists(st.integers(1, Q.N), min_size=1, max_size=5))
        m = data.draw(st.integers(1, 4))
        assert clt_statistic(i, m, Q=Q) == pytest.approx(clt_statistic_bruteforce(i, m, Q=Q), abs=1e-12)
        e = sample_epsilon(Q, Q.N, m, seed=data.draw(st.integers(0, 1000)))
        assert clt_statistic(i, m, eps=e, mode="exact") == pytest.approx(
            clt_statistic_bruteforce(i, m, eps=e), abs=1e-12
        )

    def test_pair_partition_prefactor(self):
        Q = random_Q(np.random.default_rng(8), 2)
        i = (1, 2, 1, 2, 1, 1)
        for term, value in clt_partition_values(i, 7, Q):
            if term.is_pairing:
                pp = PairPartition(term.partition.blocks)
                w = crossing_weight(Q, i, pp) if refines(term.partition, partition_of_vector(i)) else 0.0
                assert value == pytest.approx(falling_factorial(7, 3) * w, abs=1e-12)

    def test_converges_at_rate_one_over_m(self):
        Q = random_Q(np.random.default_rng(3), 2)
        for i in [(1, 1, 1, 1), (1, 1, 2, 2, 1, 1), (2, 1, 1, 2, 2, 2)]:
            ms = [4, 8, 16, 32]
            err = [abs(clt_statistic(i, m, Q=Q) - moment(Q, i)) for m in ms]
            slope = np.polyfit(np.log(ms), np.log(err), 1)[0]
            assert -1.2 < slope < -0.8

    def test_extrapolation_recovers_moment(self):
        Q = random_Q(np.random.default_rng(11), 3)
        for i in [(1,) * 6, (1, 2, 1, 2, 3, 3), (3, 1, 3, 1, 1, 3)]:
            ms = np.array([8, 16, 32])
            vals = [clt_statistic(i, m, Q=Q) for m in ms]
            limit = np.polyval(np.polyfit(1 / ms, vals, 2), 0.0)
            assert limit == pytest.approx(moment(Q, i), abs=1e-10)

    def test_montecarlo_close_to_exact(self, eps):
        i = (1, 2, 1, 2)
        exact = clt_statistic(i, 4, eps=eps, mode="exact")
        mc = clt_statistic(i, 4, eps=eps, mode="montecarlo", samples=20000, seed=1)
        # each sampled trace lies in [-1, 1]; the estimator is m^{d/2} times their mean
        assert abs(mc - exact) <= 16 * 4 / math.sqrt(20000)

    def test_budget(self, eps):
        with pytest.raises(BudgetExceededError, match="montecarlo"):
            clt_statistic((1, 1, 1, 1, 1, 1), 4, eps=eps, mode="exact", budget=10)
        with pytest.raises(ValueError):
            clt_statistic((1, 1), 4, mode="exact")
        with pytest.raises(ValueError):
            clt_statistic((1, 1), 4, Q=Q2, mode="bogus")

    def test_exact_mode_deviation_shrinks(self):
        q = 0.4
        Q = constant(q, 1)
        spread = {}
        for m in (8, 32):
            vals = [clt_statistic((1,) * 4, m, eps=sample_epsilon(Q, 1, m, s), mode="exact") for s in range(30)]
            spread[m] = np.mean(np.abs(np.array(vals) - (2 + q)))
        assert spread[32] < spread[8]


class TestRepresentation:
    def test_two_generators(self):
        anti = EpsilonTable(constant(-1.0, 1), 1, 2, 0, signs=-np.ones((2, 2), dtype=np.int8))
        x1, x2 = matrix_representation(anti)
        X, Z, I = np.array([[0, 1], [1, 0]]), np.diag([1, -1]), np.eye(2)
        assert np.array_equal(x1, np.kron(X, I)) and np.array_equal(x2, np.kron(Z, X))
        comm = EpsilonTable(constant(1.0, 1), 1, 2, 0, signs=np.array([[-1, 1], [1, -1]], dtype=np.int8))
        y1, y2 = matrix_representation(comm)
        assert np.array_equal(y2, np.kron(I, X)) and np.array_equal(y1 @ y2, y2 @ y1)

    def test_relations_exact(self):
        e = sample_epsilon(random_Q(np.random.default_rng(2), 3), 3, 2, seed=4)
        rep = SpinRepresentation(e)
        g = rep.generator_matrices()
        for a, b in itertools.product(range(6), repeat=2):
            if a == b:
                assert np.array_equal(g[a] @ g[a], np.eye(64))
                assert np.array_equal(g[a], g[a].T)
            else:
                assert np.array_equal(g[a] @ g[b], e.sign(rep.letters[a], rep.letters[b]) * (g[b] @ g[a]))

    def test_reduced_words_traceless(self):
        e = sample_epsilon(Q2, 2, 3, seed=4)
        rep = SpinRepresentation(e)
        for r in range(1, 7):
            for w in itertools.combinations(rep.letters, r):
                assert np.trace(rep.matrix(SpinElement(e, {w: 1.0}))) == 0

    def test_trace_via_reduction_equals_matrix_trace(self):
        e = sample_epsilon(Q2, 2, 4, seed=6)
        rep = SpinRepresentation(e)
        rng = np.random.default_rng(0)
        for _ in range(50):
            word = [rep.letters[n] for n in rng.integers(0, 8, rng.integers(1, 7))]
            full = word + word[::-1] if rng.random() < 0.5 else word + word
            mat = np.eye(rep.dim)
            for x in full:
                mat = mat @ rep.generator_matrices()[rep.position[x]]
            assert trace(full, e) == np.trace(mat) / rep.dim

    def test_cap(self):
        with pytest.raises(ValueError):
            SpinRepresentation(sample_epsilon(Q2, 2, 7, seed=0))


def _words(eps, rng, n_terms=6, max_len=4, letters=None):
    return random_element(eps, rng, letters or eps.letters(), max_len, n_terms=n_terms, integer=True)


class TestElements:
    def test_adjoint_involution_and_product(self, eps):
        rng = np.random.default_rng(0)
        for _ in range(20):
            f, g = _words(eps, rng), _words(eps, rng)
            assert f.adjoint().adjoint() == f
            assert (f * g).adjoint() == g.adjoint() * f.adjoint()

    def test_matrix_is_homomorphism(self):
        e = sample_epsilon(Q2, 2, 3, seed=2)
        rep = SpinRepresentation(e)
        rng = np.random.default_rng(1)
        for _ in range(10):
            f, g = _words(e, rng), _words(e, rng)
            assert np.array_equal(rep.matrix(f * g), rep.matrix(f) @ rep.matrix(g))
            assert np.array_equal(rep.matrix(f.adjoint()), rep.matrix(f).T)

    def test_keys_canonical_no_zeros(self, eps):
        f = SpinElement.word(eps, [(2, 1), (1, 1)], 2.0) + SpinElement.word(eps, [(1, 1), (2, 1)], 0.0)
        assert all(list(w) == sorted(w) for w, _ in f.items())
        assert all(c != 0 for _, c in f.items())

    def test_number_operator_and_semigroup(self, eps):
        x = SpinElement(eps, {((1, 1), (1, 2), (2, 1)): 1.0})
        t = 0.3
        assert ou_spin(x, t).terms == {((1, 1), (1, 2), (2, 1)): math.exp(-3 * t)}
        one = SpinElement.scalar(eps)
        assert ou_spin(one, 5.0) == one
        with pytest.raises(ValueError):
            ou_spin(one, -1)
        f = random_element(eps, np.random.default_rng(3), eps.letters()[:5], 3)
        h = 1e-6
        fd = (f - ou_spin(f, h)) * (1 / h)
        assert fd.allclose(number_operator_spin(f), tol=1e-5)


class TestDerivation:
    def test_examples(self, eps):
        N = eps.rows
        d = derivation(SpinElement(eps, {((1, 1),): 1.0}))
        assert d.terms == {((1 + N, 1),): 1.0}
        assert len(derivation(SpinElement.scalar(eps, 3.0))) == 0

    def test_leibniz(self, eps):
        rng = np.random.default_rng(5)
        for _ in range(30):
            f, g = _words(eps, rng, 3), _words(eps, rng, 3)
            assert derivation(f * g) == derivation(f) * g + f * derivation(g)

    def test_one_upper_letter(self, eps):
        rng = np.random.default_rng(6)
        N = eps.rows
        for _ in range(10):
            d = derivation(_words(eps, rng))
            assert all(sum(1 for x in w if x[0] > N) == 1 for w, _ in d.items())
            assert len(conditional_expectation(d)) == 0

    def test_conditional_expectation_examples(self, eps):
        big = eps.doubled()
        N = eps.rows
        assert conditional_expectation(SpinElement(big, {((1, 1),): 1.0})).terms == {((1, 1),): 1.0}
        assert len(conditional_expectation(SpinElement(big, {((N + 1, 1),): 1.0}))) == 0
        f = SpinElement.word(big, [(N + 1, 1), (N + 1, 1), (2, 3)])
        assert conditional_expectation(f).terms == {((2, 3),): 1.0}


class TestGradientForm:
    def test_words(self, eps):
        B = ((1, 1), (1, 2), (2, 1))
        C = ((1, 2), (2, 1), (2, 3))
        xB, xC = SpinElement(eps, {B: 1.0}), SpinElement(eps, {C: 1.0})
        assert gradient_form(xB, xC) == 2 * (xB.adjoint() * xC)
        assert len(gradient_form(SpinElement.scalar(eps), xC)) == 0

    def test_dual_route_exact(self, eps):
        rng = np.random.default_rng(7)
        for _ in range(50):
            f, g = _words(eps, rng, 8), _words(eps, rng, 8)
            assert gradient_form(f, g) == gradient_form_via_derivation(f, g)

    def test_incompatible_tables(self, eps):
        other = sample_epsilon(Q2, 2, 4, seed=18)
        with pytest.raises(ValueError):
            SpinElement.scalar(eps) * SpinElement.scalar(other)
