import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hnn import ring
from hnn.errors import ParameterError

from helpers import (
    naive_negacyclic_transform,
    primitive_2n_root,
    random_ring_element,
    schoolbook_int_negacyclic,
)


def make_params(n, bit_sizes=(42, 41)):
    return ring.RingParams(n, ring.find_ntt_primes(n, list(bit_sizes)))


def from_coeffs(coeffs, params, level=None):
    if level is None:
        level = params.max_level
    return ring.from_int_coeffs(np.asarray(coeffs, dtype=np.int64), params, level)


class TestParams:
    def test_degree_must_be_power_of_two(self):
        with pytest.raises(ParameterError):
            ring.RingParams(12, (13,))
        with pytest.raises(ParameterError):
            ring.RingParams(4, (17,))

    def test_moduli_must_be_ntt_friendly_primes(self):
        with pytest.raises(ParameterError):
            ring.RingParams(8, (15,))  # composite
        with pytest.raises(ParameterError):
            ring.RingParams(8, (19,))  # prime but not 1 mod 16
        with pytest.raises(ParameterError):
            ring.RingParams(8, (17, 17))  # duplicate

    def test_find_ntt_primes_properties(self):
        primes = ring.find_ntt_primes(64, [42, 41, 41, 41])
        assert len(set(primes)) == 4
        for q in primes:
            assert ring.is_prime(q)
            assert q % 128 == 1
        assert primes[0].bit_length() == 42
        for q in primes[1:]:
            assert q.bit_length() == 41


class TestNtt:
    def test_zero_maps_to_zero(self):
        params = ring.RingParams(8, (17,))
        z = ring.zero(params, 0)
        out = ring.ntt_forward(z)
        assert np.all(out.residues == 0)

    def test_roundtrip_exact_1000_random(self):
        params = make_params(64)
        rng = np.random.default_rng(0)
        for _ in range(1000):
            el = random_ring_element(params, params.max_level, rng)
            back = ring.ntt_inverse(ring.ntt_forward(el))
            assert np.array_equal(back.residues, el.residues)

    def test_matches_naive_transform_n8_q17(self):
        # q = 17 is 1 mod 16; forward output is the naive negacyclic
        # evaluation in bit-reversed order
        params = ring.RingParams(8, (17,))
        coeffs = np.arange(1, 9, dtype=np.int64)
        el = from_coeffs(coeffs, params)
        fwd = ring.ntt_forward(el)
        psi = primitive_2n_root(8, 17)
        naive = naive_negacyclic_transform(coeffs, 8, 17, psi)
        perm = ring.bit_reverse_permutation(8)
        assert np.array_equal(fwd.residues[0], naive[perm])
        back = ring.ntt_inverse(fwd)
        assert np.array_equal(back.residues[0], el.residues[0])

    def test_domain_errors(self):
        params = make_params(8, (17,))
        el = from_coeffs([1, 0, 0, 0, 0, 0, 0, 0], params)
        ev = ring.ntt_forward(el)
        with pytest.raises(ValueError):
            ring.ntt_forward(ev)
        with pytest.raises(ValueError):
            ring.ntt_inverse(el)


class TestRingMul:
    # the minimum supported ring degree is 8, so the monomial identities
    # X*X = X^2 and X^(N-1)*X = -1 run there

    def test_monomial_product(self):
        params = ring.RingParams(8, (17,))
        x = from_coeffs([0, 1, 0, 0, 0, 0, 0, 0], params)
        out = ring.ring_mul(x, x)
        expect = from_coeffs([0, 0, 1, 0, 0, 0, 0, 0], params)
        assert np.array_equal(out.residues, expect.residues)

    def test_wraparound_negates(self):
        # X^(N-1) * X = X^N = -1, i.e. constant q-1
        params = ring.RingParams(8, (17,))
        x7 = from_coeffs([0] * 7 + [1], params)
        x1 = from_coeffs([0, 1] + [0] * 6, params)
        out = ring.ring_mul(x7, x1)
        expect = from_coeffs([-1] + [0] * 7, params)
        assert np.array_equal(out.residues, expect.residues)

    def test_matches_schoolbook_random(self):
        params = make_params(64)
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = random_ring_element(params, params.max_level, rng)
            b = random_ring_element(params, params.max_level, rng)
            via_ntt = ring.ring_mul(a, b)
            via_schoolbook = ring.schoolbook_mul(a, b)
            assert np.array_equal(via_ntt.residues, via_schoolbook.residues)

    def test_level_mismatch_rejected(self):
        params = ring.RingParams(8, (17, 97))
        a = from_coeffs([1] * 8, params, level=1)
        b = from_coeffs([1] * 8, params, level=0)
        with pytest.raises(ValueError):
            ring.ring_mul(a, b)


class TestSchoolbook:
    def test_one_plus_x_times_one_minus_x(self):
        # (1 + X)(1 - X) = 1 - X^2
        params = ring.RingParams(8, (17,))
        a = from_coeffs([1, 1, 0, 0, 0, 0, 0, 0], params)
        b = from_coeffs([1, -1, 0, 0, 0, 0, 0, 0], params)
        out = ring.schoolbook_mul(a, b)
        expect = from_coeffs([1, 0, -1, 0, 0, 0, 0, 0], params)
        assert np.array_equal(out.residues, expect.residues)

    def test_constant_times_constant(self):
        params = ring.RingParams(8, (17,))
        a = from_coeffs([3] + [0] * 7, params)
        b = from_coeffs([5] + [0] * 7, params)
        out = ring.schoolbook_mul(a, b)
        expect = from_coeffs([15] + [0] * 7, params)
        assert np.array_equal(out.residues, expect.residues)

    def test_against_independent_python_oracle(self):
        params = make_params(8, (42,))
        rng = np.random.default_rng(2)
        q = params.moduli[0]
        for _ in range(50):
            a = random_ring_element(params, 0, rng)
            b = random_ring_element(params, 0, rng)
            ours = ring.schoolbook_mul(a, b).residues[0]
            oracle = schoolbook_int_negacyclic(a.residues[0], b.residues[0], q)
            assert list(ours) == oracle

    def test_mutual_consistency_200_pairs(self):
        rng = np.random.default_rng(3)
        for n in (8, 64):
            params = make_params(n)
            for _ in range(100):
                a = random_ring_element(params, params.max_level, rng)
                b = random_ring_element(params, params.max_level, rng)
                assert np.array_equal(
                    ring.ring_mul(a, b).residues,
                    ring.schoolbook_mul(a, b).residues,
                )

    def test_corner_coefficients_exhaustive_squares(self):
        # every N=8 polynomial over {0, 1, q-1}: square it both ways,
        # plus random corner-set pairs; wraparound sign handling has no
        # hiding place at these values
        params = ring.RingParams(8, (17,))
        q = 17
        corner = np.array([0, 1, q - 1], dtype=np.int64)
        all_polys = np.stack(
            np.meshgrid(*([corner] * 8), indexing="ij"), axis=-1
        ).reshape(-1, 8)
        for coeffs in all_polys:
            el = from_coeffs(coeffs, params)
            assert np.array_equal(
                ring.ring_mul(el, el).residues,
                ring.schoolbook_mul(el, el).residues,
            )
        rng = np.random.default_rng(21)
        for _ in range(500):
            a = from_coeffs(corner[rng.integers(0, 3, 8)], params)
            b = from_coeffs(corner[rng.integers(0, 3, 8)], params)
            assert np.array_equal(
                ring.ring_mul(a, b).residues, ring.schoolbook_mul(a, b).residues
            )


class TestSamplers:
    def test_ternary_weight_exact(self):
        params = make_params(64)
        rng = np.random.default_rng(4)
        el = ring.sample_ternary(params, 0, 32, rng)
        signed = np.where(
            el.residues[0] > params.moduli[0] // 2,
            el.residues[0].astype(np.int64) - params.moduli[0],
            el.residues[0].astype(np.int64),
        )
        assert np.sum(signed != 0) == 32
        assert set(np.unique(signed)) <= {-1, 0, 1}

    def test_ternary_weight_bounds(self):
        params = make_params(8, (17,))
        rng = np.random.default_rng(5)
        with pytest.raises(ValueError):
            ring.sample_ternary(params, 0, 9, rng)
        with pytest.raises(ValueError):
            ring.sample_ternary(params, 0, 0, rng)

    def test_gaussian_empirical_mean(self):
        # mean of 1e5 signed draws within 5*sigma/sqrt(1e5) of zero
        params = make_params(64)
        rng = np.random.default_rng(6)
        sigma = 3.2
        draws = []
        for _ in range(100_000 // 64):
            el = ring.sample_gaussian(params, 0, sigma, rng)
            signed = np.where(
                el.residues[0] > params.moduli[0] // 2,
                el.residues[0].astype(np.int64) - params.moduli[0],
                el.residues[0].astype(np.int64),
            )
            draws.append(signed)
        flat = np.concatenate(draws).astype(np.float64)
        assert abs(flat.mean()) < 5 * sigma / np.sqrt(len(flat))

    def test_fixed_seed_reproduces(self):
        params = make_params(64)
        for sampler in (
            lambda r: ring.sample_uniform(params, 1, r),
            lambda r: ring.sample_ternary(params, 1, 16, r),
            lambda r: ring.sample_gaussian(params, 1, 3.2, r),
        ):
            a = sampler(np.random.default_rng(99))
            b = sampler(np.random.default_rng(99))
            assert np.array_equal(a.residues, b.residues)


class TestDropLevel:
    def test_identity_and_idempotence(self):
        params = make_params(16, (42, 41, 41))
        rng = np.random.default_rng(7)
        el = random_ring_element(params, 2, rng)
        assert ring.drop_level(el, 2) is el
        once = ring.drop_level(el, 0)
        twice = ring.drop_level(ring.drop_level(el, 1), 0)
        assert np.array_equal(once.residues, twice.residues)

    def test_raising_level_rejected(self):
        params = make_params(16, (42, 41))
        el = ring.zero(params, 0)
        with pytest.raises(ValueError):
            ring.drop_level(el, 1)

    def test_arithmetic_matches_surviving_prime_oracle(self):
        params = make_params(16, (42, 41, 41))
        rng = np.random.default_rng(8)
        a = random_ring_element(params, 2, rng)
        b = random_ring_element(params, 2, rng)
        full_sum = ring.ring_add(a, b)
        full_prod = ring.ring_mul(ring.ntt_forward(a), ring.ntt_forward(b))
        a0, b0 = ring.drop_level(a, 0), ring.drop_level(b, 0)
        assert np.array_equal(
            ring.ring_add(a0, b0).residues, full_sum.residues[:1]
        )
        prod0 = ring.ring_mul(ring.ntt_forward(a0), ring.ntt_forward(b0))
        assert np.array_equal(prod0.residues, full_prod.residues[:1])


class TestAlgebraicProperties:
    PARAMS = None

    @classmethod
    def params(cls):
        if cls.PARAMS is None:
            cls.PARAMS = ring.RingParams(8, (17,))
        return cls.PARAMS

    coeff_lists = st.lists(
        st.integers(min_value=-100, max_value=100), min_size=8, max_size=8
    )

    @given(coeff_lists, coeff_lists)
    @settings(max_examples=60, deadline=None)
    def test_mul_commutes(self, a, b):
        params = self.params()
        ea, eb = from_coeffs(a, params), from_coeffs(b, params)
        assert np.array_equal(
            ring.schoolbook_mul(ea, eb).residues,
            ring.schoolbook_mul(eb, ea).residues,
        )

    @given(coeff_lists, coeff_lists, coeff_lists)
    @settings(max_examples=60, deadline=None)
    def test_mul_associative_add_distributive(self, a, b, c):
        params = self.params()
        ea, eb, ec = (from_coeffs(v, params) for v in (a, b, c))
        left = ring.schoolbook_mul(ring.schoolbook_mul(ea, eb), ec)
        right = ring.schoolbook_mul(ea, ring.schoolbook_mul(eb, ec))
        assert np.array_equal(left.residues, right.residues)
        dist_l = ring.schoolbook_mul(ea, ring.ring_add(eb, ec))
        dist_r = ring.ring_add(
            ring.schoolbook_mul(ea, eb), ring.schoolbook_mul(ea, ec)
        )
        assert np.array_equal(dist_l.residues, dist_r.residues)

    @given(coeff_lists)
    @settings(max_examples=30, deadline=None)
    def test_multiplying_by_x_n_times_negates(self, a):
        params = self.params()
        el = from_coeffs(a, params)
        x = from_coeffs([0, 1] + [0] * 6, params)
        out = el
        for _ in range(8):
            out = ring.schoolbook_mul(out, x)
        assert np.array_equal(out.residues, ring.ring_neg(el).residues)
