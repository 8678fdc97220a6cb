import math

import numpy as np
import pytest

from hnn import approx, encoding, scheme
from hnn.errors import DomainViolation, LevelExhausted

from helpers import reference_soft_argmax, reference_softmax


def enc(keys, values, rng):
    params = keys.scheme
    pt = encoding.encode(values, params.scale, params.ring)
    return scheme.encrypt(keys.pk, pt, rng)


def dec(keys, ct, count):
    return scheme.decrypt_to_slots(keys.sk, ct)[:count]


class TestBuildExpApprox:
    def test_value_at_zero(self):
        fit = approx.build_exp_approx(2.0, 7)
        assert abs(fit(0.0) - 1.0) <= fit.sup_error

    def test_stored_error_consistent_with_regrid(self):
        # diagnostic fit on a wide domain: stored sup error must agree
        # with an independent dense-grid re-measurement
        fit = approx.build_exp_approx(4.0, 7, tol=None)
        remeasured = approx.measure_sup_error(
            fit.coefficients, np.exp, 4.0, grid_points=40001
        )
        assert fit.sup_error <= remeasured * 1.01 + 1e-12
        assert remeasured <= fit.sup_error * 1.01

    def test_error_monotone_in_degree(self):
        worse = approx.build_exp_approx(4.0, 7, tol=None)
        better = approx.build_exp_approx(4.0, 9, tol=None)
        assert better.sup_error <= worse.sup_error

    def test_rejects_insufficient_degree(self):
        # degree 7 cannot reach 1e-3 on [-4, 4]
        with pytest.raises(ValueError, match="raise the degree"):
            approx.build_exp_approx(4.0, 7)

    def test_radius_cap(self):
        with pytest.raises(ValueError):
            approx.build_exp_approx(9.0, 7, tol=None)


class TestEvalPoly:
    def test_degree_one_matches_plain_composition(self, head_keys, rng):
        # c0 + c1*x via eval_poly equals the explicit mult_plain/add_plain
        # route bit for bit
        params = head_keys.scheme
        k = params.slot_capacity
        x = rng.uniform(-1, 1, k)
        ct = enc(head_keys, x, rng)
        fit = approx.PolyApprox((0.25, -1.5), 1.0, 0.0, 1.75)
        via_eval = approx.eval_poly_encrypted(ct, fit, head_keys.evk)
        q = params.ring.moduli[ct.level]
        manual = approx.add_const(
            scheme.rescale(approx.mul_const_raw(ct, -1.5, float(q))), 0.25
        )
        assert via_eval.scale == manual.scale
        a = scheme.decrypt_to_slots(head_keys.sk, via_eval)[:k]
        b = scheme.decrypt_to_slots(head_keys.sk, manual)[:k]
        assert np.max(np.abs(a - b)) < 2.0 ** -25
        assert np.max(np.abs(a - (0.25 - 1.5 * x))) < 2.0 ** -20

    def test_square_on_interval(self, head_keys, rng):
        params = head_keys.scheme
        k = params.slot_capacity
        x = rng.uniform(-2, 2, k)
        ct = enc(head_keys, x, rng)
        fit = approx.PolyApprox((0.0, 0.0, 1.0), 2.0, 0.0, 4.0)
        out = dec(head_keys, approx.eval_poly_encrypted(ct, fit, head_keys.evk), k)
        assert np.max(np.abs(out - x ** 2)) < 2.0 ** -10

    def test_exp_fit_at_landmarks(self, head_keys, rng):
        fit = approx.build_exp_approx(2.0, 7)
        pts = np.array([-1.0, 0.0, 1.0])
        ct = enc(head_keys, pts, rng)
        out = dec(head_keys, approx.eval_poly_encrypted(ct, fit, head_keys.evk), 3)
        expect = np.exp(pts)
        assert np.max(np.abs(out - expect)) < fit.sup_error + 2.0 ** -10

    def test_level_check(self, small_keys, rng):
        # depth-3 tree cannot run on a 4-level chain remnant
        params = small_keys.scheme
        ct = enc(small_keys, np.zeros(params.slot_capacity), rng)
        low = scheme.ct_drop_level(ct, 1)
        fit = approx.build_exp_approx(2.0, 7)
        with pytest.raises(LevelExhausted):
            approx.eval_poly_encrypted(low, fit, small_keys.evk)


class TestEncryptedReciprocal:
    def test_fixed_point_at_upper_bound(self, head_keys, rng):
        # x = b: z0*x = 1 exactly, so every iteration is a no-op
        k = head_keys.scheme.slot_capacity
        b = 2.0
        ct = enc(head_keys, np.full(k, b), rng)
        out = dec(head_keys, approx.encrypted_reciprocal(ct, 0.5, b, 5, head_keys.evk), k)
        assert np.max(np.abs(out - 1.0 / b)) < 1e-6

    def test_unit_input(self, head_keys, rng):
        k = head_keys.scheme.slot_capacity
        ct = enc(head_keys, np.ones(k), rng)
        out = dec(head_keys, approx.encrypted_reciprocal(ct, 0.5, 2.0, 5, head_keys.evk), k)
        assert np.max(np.abs(out - 1.0)) < 1e-4

    def test_error_bound_across_interval(self, head_keys, rng):
        # sampled slots across [a, b]: relative error within the
        # analytic bound (1 - a/b)^(2^k) plus 1e-3 slack, and the
        # encrypted result tracks the plaintext Newton oracle
        params = head_keys.scheme
        k = params.slot_capacity
        a, b, iters = 0.5, 2.0, 4
        xs = np.linspace(a, b, k)
        ct = enc(head_keys, xs, rng)
        out = dec(head_keys, approx.encrypted_reciprocal(ct, a, b, iters, head_keys.evk), k)
        rel = np.abs(out * xs - 1.0)
        bound = (1 - a / b) ** (2 ** iters)
        assert np.max(rel) <= bound + 1e-3
        oracle = approx.newton_reciprocal_plain(xs, b, iters)
        assert np.max(np.abs(out - oracle)) < 1e-4

    def test_input_validation(self, head_keys, rng):
        k = head_keys.scheme.slot_capacity
        ct = enc(head_keys, np.ones(k), rng)
        with pytest.raises(ValueError):
            approx.encrypted_reciprocal(ct, 2.0, 0.5, 5, head_keys.evk)
        low = scheme.ct_drop_level(ct, 3)
        with pytest.raises(LevelExhausted):
            approx.encrypted_reciprocal(low, 0.5, 2.0, 5, head_keys.evk)


class TestEncryptedSoftmax:
    def test_symmetric_logits(self, head_keys, rng):
        cfg = approx.SoftmaxConfig()
        k = head_keys.scheme.slot_capacity
        cts = [enc(head_keys, np.zeros(k), rng) for _ in range(2)]
        sig = approx.encrypted_softmax(cts, cfg, head_keys.evk)
        for s in sig:
            assert np.max(np.abs(dec(head_keys, s, k) - 0.5)) < 1e-3

    def test_known_two_class_value(self, head_keys, rng):
        # logits (2, 0): sigma_1 = 1/(1+e^-2) = 0.880797
        cfg = approx.SoftmaxConfig()
        k = head_keys.scheme.slot_capacity
        cts = [
            enc(head_keys, np.full(k, 2.0), rng),
            enc(head_keys, np.zeros(k), rng),
        ]
        sig = approx.encrypted_softmax(cts, cfg, head_keys.evk, probe_key=head_keys.sk)
        got = dec(head_keys, sig[0], k)
        assert np.max(np.abs(got - 1.0 / (1.0 + math.exp(-2.0)))) < 1e-3

    def test_probabilities_sum_to_one(self, head_keys, rng):
        cfg = approx.SoftmaxConfig()
        k = head_keys.scheme.slot_capacity
        logits = rng.uniform(-2, 2, (k, 2))
        cts = [enc(head_keys, logits[:, i], rng) for i in range(2)]
        sig = approx.encrypted_softmax(cts, cfg, head_keys.evk)
        total = sum(dec(head_keys, s, k) for s in sig)
        assert np.max(np.abs(total - 1.0)) < 2e-3

    def test_matches_oracle_on_random_logits(self, head_keys, rng):
        cfg = approx.SoftmaxConfig()
        k = head_keys.scheme.slot_capacity
        logits = rng.uniform(-2, 2, (k, 2))
        cts = [enc(head_keys, logits[:, i], rng) for i in range(2)]
        sig = approx.encrypted_softmax(cts, cfg, head_keys.evk)
        got = np.stack([dec(head_keys, s, k) for s in sig], axis=1)
        assert np.max(np.abs(got - reference_softmax(logits))) <= 1e-3

    def test_mean_subtraction_invariance(self, head_keys, rng):
        # the plaintext oracle is exactly shift-invariant; the encrypted
        # pipeline output is compared against the shifted oracle
        cfg = approx.SoftmaxConfig()
        k = head_keys.scheme.slot_capacity
        logits = rng.uniform(-1, 1, (k, 2))
        shift = rng.uniform(-5, 5, k)
        shifted = logits + shift[:, None]
        assert np.allclose(
            reference_softmax(logits), reference_softmax(shifted), atol=1e-12
        )
        cts = [enc(head_keys, shifted[:, i], rng) for i in range(2)]
        sig = approx.encrypted_softmax(cts, cfg, head_keys.evk)
        got = np.stack([dec(head_keys, s, k) for s in sig], axis=1)
        assert np.max(np.abs(got - reference_softmax(logits))) <= 1e-3

    def test_domain_probe_detects_violation(self, head_keys, rng):
        cfg = approx.SoftmaxConfig()
        k = head_keys.scheme.slot_capacity
        cts = [
            enc(head_keys, np.full(k, 8.0), rng),
            enc(head_keys, np.full(k, -8.0), rng),
        ]
        with pytest.raises(DomainViolation):
            approx.encrypted_softmax(cts, cfg, head_keys.evk, probe_key=head_keys.sk)


class TestEncryptedSoftArgmax:
    def test_uniform_case(self, head_keys, rng):
        cfg = approx.SoftmaxConfig()
        k = head_keys.scheme.slot_capacity
        cts = [enc(head_keys, np.zeros(k), rng) for _ in range(2)]
        out = dec(head_keys, approx.encrypted_soft_argmax(cts, cfg, head_keys.evk), k)
        assert np.max(np.abs(out - 1.5)) < 1e-3

    def test_three_class_confident_logits(self, rng):
        # logits (10, 0, 0) need a wide domain: mean-centered they reach
        # 20/3, so r = 6.7 with matching degree/iteration counts; nine
        # Newton steps converge fully at the operating point S ~ 787.
        # The worst-case ledger compounds hard over a cosh(6.7)-wide
        # reciprocal interval, so the chain carries spare levels beneath
        # the working range to keep the wraparound guard satisfied.
        from hnn import ring as ring_mod

        cfg = approx.SoftmaxConfig(
            temperature=1.0,
            class_count=3,
            radius=6.7,
            exp_degree=15,
            inv_iterations=9,
            sup_tol=1e-3,
        )
        depth = approx.soft_argmax_min_levels(cfg) + 18
        moduli = ring_mod.find_ntt_primes(16, [42] + [41] * depth)
        params = scheme.SchemeParams(
            security_level=128,
            ring=ring_mod.RingParams(16, moduli),
            scale=2.0 ** 40,
            slot_capacity=8,
            secret_weight=8,
            allow_insecure=True,
        )
        keys = scheme.keygen(params, np.random.default_rng(42))
        k = params.slot_capacity
        logits = np.array([10.0, 0.0, 0.0])
        cts = [
            scheme.encrypt(
                keys.pk,
                encoding.encode(np.full(k, v), params.scale, params.ring),
                rng,
            )
            for v in logits
        ]
        out = scheme.decrypt_to_slots(
            keys.sk, approx.encrypted_soft_argmax(cts, cfg, keys.evk)
        )[:k]
        oracle = reference_soft_argmax(logits[None, :])[0]
        assert abs(oracle - 1.000136) < 1e-6  # plaintext oracle sanity
        assert np.max(np.abs(out - oracle)) < 2e-3

    def test_huge_temperature_approaches_uniform(self, head_keys, rng):
        # T -> inf drives every probability to 1/n, the index sum to (n+1)/2
        cfg = approx.SoftmaxConfig(temperature=1e6)
        k = head_keys.scheme.slot_capacity
        logits = rng.uniform(-2, 2, (k, 2))
        cts = [enc(head_keys, logits[:, i], rng) for i in range(2)]
        out = dec(head_keys, approx.encrypted_soft_argmax(cts, cfg, head_keys.evk), k)
        assert np.max(np.abs(out - 1.5)) < 1e-3

    def test_output_in_index_range(self, head_keys, rng):
        cfg = approx.SoftmaxConfig()
        k = head_keys.scheme.slot_capacity
        logits = rng.uniform(-2, 2, (k, 2))
        cts = [enc(head_keys, logits[:, i], rng) for i in range(2)]
        out = dec(head_keys, approx.encrypted_soft_argmax(cts, cfg, head_keys.evk), k)
        assert np.all(out >= 1.0 - 1e-3)
        assert np.all(out <= 2.0 + 1e-3)

    def test_rounding_matches_argmax_beyond_margin(self, head_keys, rng):
        # gap >= T*ln(199) makes sigma_max >= 0.995, so the rounded index
        # sum recovers argmax exactly; that gap needs a radius >= 2.65
        # domain, hence a dedicated radius-3 configuration
        cfg = approx.SoftmaxConfig(radius=3.0, exp_degree=9, inv_iterations=5)
        assert approx.soft_argmax_min_levels(cfg) <= head_keys.scheme.max_level
        k = head_keys.scheme.slot_capacity
        gap = rng.uniform(math.log(199.0), 5.9, k)
        winner = rng.integers(0, 2, k)
        base = -gap / 2.0
        logits = np.stack([base, base], axis=1)
        logits[np.arange(k), winner] += gap
        cts = [enc(head_keys, logits[:, i], rng) for i in range(2)]
        out = dec(head_keys, approx.encrypted_soft_argmax(cts, cfg, head_keys.evk), k)
        assert np.array_equal(np.rint(out).astype(int) - 1, winner)


class TestDepthBookkeeping:
    def test_default_head_depth_is_fixed_constant(self):
        cfg = approx.SoftmaxConfig()
        assert approx.poly_eval_depth(cfg.exp_degree) == 3
        assert approx.softmax_depth(cfg) == 14
        assert approx.soft_argmax_min_levels(cfg) == 15

    def test_softmax_consumes_exactly_declared_depth(self, head_keys, rng):
        cfg = approx.SoftmaxConfig()
        k = head_keys.scheme.slot_capacity
        cts = [enc(head_keys, np.zeros(k), rng) for _ in range(2)]
        sig = approx.encrypted_softmax(cts, cfg, head_keys.evk)
        assert cts[0].level - sig[0].level == approx.softmax_depth(cfg)

    def test_insufficient_levels_rejected(self, small_keys, rng):
        cfg = approx.SoftmaxConfig()
        k = small_keys.scheme.slot_capacity
        cts = [enc(small_keys, np.zeros(k), rng) for _ in range(2)]
        with pytest.raises(LevelExhausted):
            approx.encrypted_softmax(cts, cfg, small_keys.evk)
