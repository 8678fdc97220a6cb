"""Leveled approximate homomorphic encryption over the negacyclic ring.

The scheme is the usual RLWE construction for approximate arithmetic:
slot vectors are encoded with a fixed scale, encrypted under a public
key (b, a) = (-a*s + e, a), operated on with slotwise add/mult, and
rescaled after products to keep the scale bounded. Relinearization after
ciphertext-ciphertext products uses a base-2^20 gadget decomposition of
the CRT-composed third component against an evaluation key.

Every ciphertext carries a noise ledger: ``noise_bits`` is a heuristic
upper bound on log2(max slot error * scale), updated by fixed rules per
operation, and ``value_bound`` is an interval bound on |slot values|.
Both feed two hard checks run after every operation: the budget check
(noise_bits <= noise_budget_bits) and the wraparound check
(value_bound*scale + noise < Q_level/2), so the scheme errors out before
a decryption could silently wrap.

Parameter sets are vetted against the standard (N, max log2 Q) security
table for uniform ternary secrets; undersized test parameters require an
explicit allow_insecure flag.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import encoding, ring
from .encoding import Plaintext
from .errors import (
    InsecureParameterError,
    LevelExhausted,
    NoiseBudgetExceeded,
    ParameterError,
    ScaleMismatch,
)

# Homomorphic encryption standard table: max log2(Q) per (security, N),
# classical attacks, uniform ternary secret distribution.
SECURITY_TABLE = {
    128: {1024: 27, 2048: 54, 4096: 109, 8192: 218, 16384: 438, 32768: 881},
    192: {1024: 19, 2048: 37, 4096: 75, 8192: 152, 16384: 305, 32768: 611},
    256: {1024: 14, 2048: 29, 4096: 58, 8192: 118, 16384: 237, 32768: 476},
}

DIGIT_BITS = 20          # relinearization gadget base 2^20
DEFAULT_ERR_STD = 3.2    # fresh error standard deviation
KEY_ERR_TAIL = 6.0       # keygen errors resampled into +-6 sigma
SCALE_REL_TOL = 2.0 ** -30  # scales must agree to this relative tolerance

_GUARD_MARGIN_BITS = 1.0  # extra noise bit of slop in the wraparound check


def _log2_sum(*bits) -> float:
    """log2(sum 2^b) over finite/-inf entries, numerically stable."""
    finite = [b for b in bits if b != -math.inf]
    if not finite:
        return -math.inf
    m = max(finite)
    return m + math.log2(sum(2.0 ** (b - m) for b in finite))


def _log2_pos(x: float) -> float:
    return math.log2(x) if x > 0 else -math.inf


@dataclasses.dataclass(frozen=True)
class SchemeParams:
    """Everything needed to instantiate the scheme.

    security_level: target bits (128/192/256) from the embedded table.
    ring: degree and modulus chain.
    scale: default encoding scale (power of two).
    slot_capacity: slots the caller intends to use (<= N/2).
    secret_weight: Hamming weight of the ternary secret.
    err_std: fresh-error standard deviation.
    noise_budget_bits: ledger budget; exceeding it is an error state.
    allow_insecure: accept parameter sets that fail the security table
    (small test rings); never set for production keys.
    """

    security_level: int
    ring: ring.RingParams
    scale: float
    slot_capacity: int
    secret_weight: int
    err_std: float = DEFAULT_ERR_STD
    noise_budget_bits: float = None
    allow_insecure: bool = False

    def __post_init__(self):
        if self.security_level not in SECURITY_TABLE:
            raise ParameterError(
                f"security level {self.security_level} not in "
                f"{sorted(SECURITY_TABLE)}"
            )
        n = self.ring.ring_degree
        if self.slot_capacity > n // 2:
            raise ParameterError(
                f"slot capacity {self.slot_capacity} exceeds N/2 = {n // 2}"
            )
        if not 0 < self.secret_weight <= n:
            raise ParameterError("secret weight outside (0, N]")
        if self.err_std <= 0:
            raise ParameterError("error std must be positive")
        bound = SECURITY_TABLE[self.security_level].get(n)
        total = self.ring.total_bits()
        if not self.allow_insecure and (bound is None or total > bound):
            raise InsecureParameterError(
                f"N={n} with {total} modulus bits fails the "
                f"{self.security_level}-bit table (max {bound}); "
                f"set allow_insecure for test rings"
            )
        if self.noise_budget_bits is None:
            # total - scale - 10 keeps >= 10 bits of final slack on deep
            # chains; the floor keeps shallow (depth 0/1) chains usable
            # for fresh encryptions plus a few additions.
            default = total - math.log2(self.scale) - 10.0
            object.__setattr__(
                self,
                "noise_budget_bits",
                float(max(default, self.fresh_noise_bits() + 6.0)),
            )
        if self.noise_budget_bits <= 0:
            raise ParameterError("noise budget must be positive")

    @property
    def max_level(self) -> int:
        return self.ring.max_level

    @property
    def element_bytes(self) -> int:
        """Serialized payload bytes of one full-level ring element; fixed
        by the parameters, independent of any evaluated circuit."""
        return 8 * self.ring.ring_degree * self.ring.level_count

    def log2_modulus(self, level: int) -> float:
        return math.log2(self.ring.modulus_product(level))

    def fresh_noise_bits(self) -> float:
        """Ledger charge for a fresh encryption: the error polynomial
        e*u + e0 + e1*s has coefficient std ~ err_std*sqrt(2h+1), and the
        embedding spreads it by sqrt(N); 8x covers the max-slot tail."""
        n = self.ring.ring_degree
        return _log2_pos(
            8.0 * self.err_std * math.sqrt((2 * self.secret_weight + 1) * n)
        )

    def rescale_round_bits(self) -> float:
        """Rounding noise of one rescale: +-1/2 per coefficient on both
        parts, the c1 share passing through the secret."""
        n = self.ring.ring_degree
        return _log2_pos(6.0 * math.sqrt((self.secret_weight + 4) * n))

    def relin_noise_bits(self, n_digits: int) -> float:
        n = self.ring.ring_degree
        return _log2_pos(
            8.0 * (2.0 ** DIGIT_BITS) * self.err_std * math.sqrt(n_digits * n)
        )

    def relin_digits(self, level: int) -> int:
        bits = self.ring.modulus_product(level).bit_length()
        return -(-bits // DIGIT_BITS)


def param_gen(
    security_level: int,
    slot_need: int,
    depth_need: int,
    scale_bits: int = None,
    allow_insecure: bool = False,
) -> SchemeParams:
    """Smallest ring satisfying slot, depth, and security constraints.

    Picks the smallest power-of-two N with N/2 >= slot_need whose
    (depth_need+1)-prime chain passes the security table. With scale_bits
    unset, the scale shrinks (40 -> 30 -> 20 bits) before N grows, so
    shallow circuits land on small rings; pass scale_bits explicitly when
    precision matters more than ring size.
    """
    if not 1 <= slot_need <= 2 ** 15:
        raise ParameterError(f"slot_need {slot_need} outside [1, 2^15]")
    if not 0 <= depth_need <= 30:
        raise ParameterError(f"depth_need {depth_need} outside [0, 30]")
    scale_options = [scale_bits] if scale_bits is not None else [40, 30, 20]
    for sb in scale_options:
        if not 14 <= sb <= ring.MAX_PRIME_BITS - 2:
            raise ParameterError(f"scale_bits {sb} unsupported")

    n = max(8, 1 << (2 * slot_need - 1).bit_length())
    max_n = max(SECURITY_TABLE[security_level])
    while n <= max_n:
        for sb in scale_options:
            base_bits = min(sb + 10, ring.MAX_PRIME_BITS)
            chain_total = base_bits + depth_need * (sb + 1)
            table = SECURITY_TABLE[security_level]
            secure = n in table and chain_total <= table[n]
            if not (secure or allow_insecure):
                continue
            bit_sizes = [base_bits] + [sb + 1] * depth_need
            try:
                moduli = ring.find_ntt_primes(n, bit_sizes)
            except ParameterError:
                continue
            rp = ring.RingParams(n, moduli)
            return SchemeParams(
                security_level=security_level,
                ring=rp,
                scale=float(2 ** sb),
                slot_capacity=min(slot_need, n // 2),
                secret_weight=min(64, n // 2),
                allow_insecure=allow_insecure,
            )
        if allow_insecure:
            # first N already had every scale option available
            break
        n <<= 1
    raise ParameterError(
        f"no secure parameter set for slots={slot_need}, depth={depth_need}, "
        f"security={security_level}"
    )


# ---------------------------------------------------------------------------
# Keys
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class SecretKey:
    scheme: SchemeParams
    s: ring.RingElement  # ternary secret, Evaluation domain


@dataclasses.dataclass(frozen=True)
class PublicKey:
    scheme: SchemeParams
    b: ring.RingElement  # -a*s + e
    a: ring.RingElement


@dataclasses.dataclass(frozen=True)
class RelinKey:
    """Gadget encryptions of s^2: component t decrypts to 2^(20 t) s^2."""

    scheme: SchemeParams
    components: tuple  # ((b_t, a_t), ...)
    digit_bits: int = DIGIT_BITS


@dataclasses.dataclass(frozen=True)
class KeyMaterial:
    sk: SecretKey
    pk: PublicKey
    evk: RelinKey

    @property
    def scheme(self) -> SchemeParams:
        return self.sk.scheme


def keygen(params: SchemeParams, rng: np.random.Generator) -> KeyMaterial:
    """Sample (sk, pk, evk). Deterministic for a fixed Generator state."""
    rp = params.ring
    lv = rp.max_level
    s = ring.ntt_forward(
        ring.sample_ternary(rp, lv, params.secret_weight, rng)
    )
    a = ring.sample_uniform(rp, lv, rng)
    e = ring.ntt_forward(
        ring.sample_gaussian(rp, lv, params.err_std, rng, tail_bound=KEY_ERR_TAIL)
    )
    b = ring.ring_add(ring.ring_neg(ring.ring_mul(a, s)), e)

    s2 = ring.ring_mul(s, s)
    big_q = rp.modulus_product(lv)
    n_digits = params.relin_digits(lv)
    comps = []
    for t in range(n_digits):
        a_t = ring.sample_uniform(rp, lv, rng)
        e_t = ring.ntt_forward(
            ring.sample_gaussian(rp, lv, params.err_std, rng, tail_bound=KEY_ERR_TAIL)
        )
        shift = pow(2, DIGIT_BITS * t, big_q)
        shifted = np.empty_like(s2.residues)
        for j, q in enumerate(rp.moduli):
            shifted[j] = ring.mulmod(s2.residues[j], shift % q, q)
        gadget = ring.RingElement(rp, lv, shifted, ring.Domain.EVALUATION)
        b_t = ring.ring_add(
            ring.ring_add(ring.ring_neg(ring.ring_mul(a_t, s)), e_t), gadget
        )
        comps.append((b_t, a_t))
    return KeyMaterial(
        sk=SecretKey(params, s),
        pk=PublicKey(params, b, a),
        evk=RelinKey(params, tuple(comps)),
    )


# ---------------------------------------------------------------------------
# Ciphertexts
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class Ciphertext:
    """(c0, c1[, c2]) with scale, ledgered noise, and a slot-value bound."""

    scheme: SchemeParams
    parts: tuple
    level: int
    scale: float
    noise_bits: float
    value_bound: float

    def __post_init__(self):
        if len(self.parts) < 2:
            raise ValueError("ciphertext needs at least 2 parts")
        for p in self.parts:
            if p.level != self.level:
                raise ValueError("part level mismatch")
            if p.domain != ring.Domain.EVALUATION:
                raise ValueError("ciphertext parts must stay in Evaluation domain")
        if self.scale <= 0:
            raise ValueError("scale must be positive")


def _checked(ct: Ciphertext) -> Ciphertext:
    """Budget and wraparound guards; every op returns through here."""
    params = ct.scheme
    if ct.noise_bits > params.noise_budget_bits:
        raise NoiseBudgetExceeded(
            f"ledger at {ct.noise_bits:.1f} bits exceeds budget "
            f"{params.noise_budget_bits:.1f}"
        )
    payload_bits = _log2_sum(
        _log2_pos(ct.value_bound * ct.scale),
        ct.noise_bits + _GUARD_MARGIN_BITS,
    )
    if payload_bits > params.log2_modulus(ct.level) - 1.0:
        raise NoiseBudgetExceeded(
            f"payload {payload_bits:.1f} bits would wrap the level-{ct.level} "
            f"modulus ({params.log2_modulus(ct.level):.1f} bits)"
        )
    return ct


def with_value_bound(ct: Ciphertext, bound: float) -> Ciphertext:
    """Assert a tighter |slot value| bound known from caller math
    (e.g. Newton iterates stay in (0, 1/a]). Checked by decrypt-probe
    tests, not at runtime."""
    return _checked(dataclasses.replace(ct, value_bound=float(bound)))


def encrypt(
    pk: PublicKey, pt: Plaintext, rng: np.random.Generator
) -> Ciphertext:
    """(b*u + e0 + m, a*u + e1) with ternary u and Gaussian e0, e1.

    Randomized: repeated calls on one plaintext give distinct ciphertexts.
    """
    params = pk.scheme
    rp = params.ring
    if pt.level != rp.max_level:
        raise ValueError(
            f"plaintext at level {pt.level}, encryption requires top level "
            f"{rp.max_level}"
        )
    lv = rp.max_level
    u = ring.ntt_forward(ring.sample_ternary(rp, lv, params.secret_weight, rng))
    e0 = ring.ntt_forward(ring.sample_gaussian(rp, lv, params.err_std, rng))
    e1 = ring.ntt_forward(ring.sample_gaussian(rp, lv, params.err_std, rng))
    m = ring.to_domain(pt.poly, ring.Domain.EVALUATION)
    c0 = ring.ring_add(ring.ring_add(ring.ring_mul(pk.b, u), e0), m)
    c1 = ring.ring_add(ring.ring_mul(pk.a, u), e1)
    noise = _log2_sum(params.fresh_noise_bits(), _log2_pos(pt.round_error))
    return _checked(
        Ciphertext(
            scheme=params,
            parts=(c0, c1),
            level=lv,
            scale=pt.scale,
            noise_bits=noise,
            value_bound=pt.value_bound,
        )
    )


def decrypt(sk: SecretKey, ct: Ciphertext) -> Plaintext:
    """m = c0 + c1*s (+ c2*s^2 for unrelinearized test ciphertexts).

    Deterministic; a wrong key is not detected, it just yields noise.
    """
    s = ring.drop_level(sk.s, ct.level)
    acc = ring.ring_add(ct.parts[0], ring.ring_mul(ct.parts[1], s))
    if len(ct.parts) == 3:
        s2 = ring.ring_mul(s, s)
        acc = ring.ring_add(acc, ring.ring_mul(ct.parts[2], s2))
    elif len(ct.parts) > 3:
        raise ValueError("ciphertexts beyond 3 parts are not supported")
    poly = ring.ntt_inverse(acc)
    return Plaintext(
        poly, ct.scale, round_error=0.0, value_bound=ct.value_bound
    )


def decrypt_to_slots(sk: SecretKey, ct: Ciphertext) -> np.ndarray:
    return encoding.decode(decrypt(sk, ct))


def _require_aligned(a: Ciphertext, b: Ciphertext):
    if a.scheme is not b.scheme and a.scheme != b.scheme:
        raise ValueError("scheme parameter mismatch")
    if a.level != b.level:
        raise ValueError(f"level mismatch: {a.level} vs {b.level}")
    if len(a.parts) != len(b.parts):
        raise ValueError("part count mismatch")


def add(a: Ciphertext, b: Ciphertext) -> Ciphertext:
    """Slotwise sum; scales must match to 2^-30 relative."""
    _require_aligned(a, b)
    if abs(a.scale - b.scale) > SCALE_REL_TOL * max(a.scale, b.scale):
        raise ScaleMismatch(f"scales {a.scale} vs {b.scale}")
    parts = tuple(ring.ring_add(x, y) for x, y in zip(a.parts, b.parts))
    return _checked(
        Ciphertext(
            scheme=a.scheme,
            parts=parts,
            level=a.level,
            scale=a.scale,
            noise_bits=max(a.noise_bits, b.noise_bits) + 1.0,
            value_bound=a.value_bound + b.value_bound,
        )
    )


def sub(a: Ciphertext, b: Ciphertext) -> Ciphertext:
    return add(a, negate(b))


def negate(a: Ciphertext) -> Ciphertext:
    parts = tuple(ring.ring_neg(p) for p in a.parts)
    return dataclasses.replace(a, parts=parts)


def _pt_for(ct: Ciphertext, pt: Plaintext) -> Plaintext:
    if pt.level < ct.level:
        raise ValueError(f"plaintext level {pt.level} below ciphertext {ct.level}")
    poly = ring.to_domain(ring.drop_level(pt.poly, ct.level), ring.Domain.EVALUATION)
    return dataclasses.replace(pt, poly=poly)


def add_plain(ct: Ciphertext, pt: Plaintext) -> Ciphertext:
    if abs(ct.scale - pt.scale) > SCALE_REL_TOL * max(ct.scale, pt.scale):
        raise ScaleMismatch(f"scales {ct.scale} vs {pt.scale}")
    pt = _pt_for(ct, pt)
    parts = (ring.ring_add(ct.parts[0], pt.poly),) + ct.parts[1:]
    return _checked(
        Ciphertext(
            scheme=ct.scheme,
            parts=parts,
            level=ct.level,
            scale=ct.scale,
            noise_bits=_log2_sum(ct.noise_bits, _log2_pos(pt.round_error)),
            value_bound=ct.value_bound + pt.value_bound,
        )
    )


def mult_plain(ct: Ciphertext, pt: Plaintext) -> Ciphertext:
    """Slotwise product with a plaintext; scale multiplies, the caller
    rescales when ready."""
    pt = _pt_for(ct, pt)
    parts = tuple(ring.ring_mul(p, pt.poly) for p in ct.parts)
    re = _log2_pos(pt.round_error)
    noise = _log2_sum(
        ct.noise_bits + _log2_pos(pt.value_bound * pt.scale),
        re + _log2_pos(ct.value_bound * ct.scale),
        ct.noise_bits + re,
    )
    return _checked(
        Ciphertext(
            scheme=ct.scheme,
            parts=parts,
            level=ct.level,
            scale=ct.scale * pt.scale,
            noise_bits=noise,
            value_bound=ct.value_bound * pt.value_bound,
        )
    )


def _relinearize(d2: ring.RingElement, evk: RelinKey, level: int):
    """Decompose the composed c2 in base 2^20 and fold through the evk."""
    rp = evk.scheme.ring
    coeff = ring.ntt_inverse(d2)
    values, big_q = ring.compose(coeff)
    n_digits = evk.scheme.relin_digits(level)
    if n_digits > len(evk.components):
        raise ParameterError("relinearization key has too few digits")
    mask = (1 << DIGIT_BITS) - 1
    acc0 = acc1 = None
    for t in range(n_digits):
        digit = ((values >> (DIGIT_BITS * t)) & mask).astype(np.int64)
        dig_el = ring.ntt_forward(
            ring.from_int_coeffs(digit, rp, level)
        )
        b_t, a_t = evk.components[t]
        term0 = ring.ring_mul(dig_el, ring.drop_level(b_t, level))
        term1 = ring.ring_mul(dig_el, ring.drop_level(a_t, level))
        acc0 = term0 if acc0 is None else ring.ring_add(acc0, term0)
        acc1 = term1 if acc1 is None else ring.ring_add(acc1, term1)
    return acc0, acc1, n_digits


def mult(a: Ciphertext, b: Ciphertext, evk: RelinKey) -> Ciphertext:
    """Tensor product immediately relinearized back to two parts.

    Result scale is scale_a * scale_b; rescale afterwards to bring it
    back down. Raises LevelExhausted when no rescale level would remain.
    """
    _require_aligned(a, b)
    if len(a.parts) != 2:
        raise ValueError("mult expects relinearized 2-part inputs")
    if a.level < 1:
        raise LevelExhausted("multiplication at level 0 leaves no rescale room")
    d0 = ring.ring_mul(a.parts[0], b.parts[0])
    d1 = ring.ring_add(
        ring.ring_mul(a.parts[0], b.parts[1]),
        ring.ring_mul(a.parts[1], b.parts[0]),
    )
    d2 = ring.ring_mul(a.parts[1], b.parts[1])
    r0, r1, n_digits = _relinearize(d2, evk, a.level)
    c0 = ring.ring_add(d0, r0)
    c1 = ring.ring_add(d1, r1)
    params = a.scheme
    # triangle inequality over |m1 nu2| + |m2 nu1| + |nu1 nu2| + relin;
    # each term is an upper bound, so their log-sum needs no extra pad
    noise = _log2_sum(
        a.noise_bits + _log2_pos(b.value_bound * b.scale),
        b.noise_bits + _log2_pos(a.value_bound * a.scale),
        a.noise_bits + b.noise_bits,
        params.relin_noise_bits(n_digits),
    )
    return _checked(
        Ciphertext(
            scheme=params,
            parts=(c0, c1),
            level=a.level,
            scale=a.scale * b.scale,
            noise_bits=noise,
            value_bound=a.value_bound * b.value_bound,
        )
    )


def tensor_no_relin(a: Ciphertext, b: Ciphertext) -> Ciphertext:
    """3-part tensor product, for tests that decrypt with s^2 directly."""
    _require_aligned(a, b)
    d0 = ring.ring_mul(a.parts[0], b.parts[0])
    d1 = ring.ring_add(
        ring.ring_mul(a.parts[0], b.parts[1]),
        ring.ring_mul(a.parts[1], b.parts[0]),
    )
    d2 = ring.ring_mul(a.parts[1], b.parts[1])
    noise = _log2_sum(
        a.noise_bits + _log2_pos(b.value_bound * b.scale),
        b.noise_bits + _log2_pos(a.value_bound * a.scale),
        a.noise_bits + b.noise_bits,
    )
    return _checked(
        Ciphertext(
            scheme=a.scheme,
            parts=(d0, d1, d2),
            level=a.level,
            scale=a.scale * b.scale,
            noise_bits=noise,
            value_bound=a.value_bound * b.value_bound,
        )
    )


def rescale(ct: Ciphertext) -> Ciphertext:
    """Drop the top prime, dividing scale (and value*scale payload) by it.

    Exact RNS rounding: subtract the centered top residue, then multiply
    by q_top^-1 modulo each surviving prime.
    """
    if ct.level < 1:
        raise LevelExhausted("rescale at level 0")
    rp = ct.scheme.ring
    lv = ct.level
    q_top = rp.moduli[lv]
    inv = [pow(q_top, -1, rp.moduli[j]) for j in range(lv)]
    new_parts = []
    for part in ct.parts:
        coeff = ring.ntt_inverse(part)
        top = coeff.residues[lv].astype(np.int64)
        top_signed = np.where(top > q_top // 2, top - q_top, top)
        res = np.empty((lv, rp.ring_degree), dtype=np.uint64)
        for j in range(lv):
            qj = np.uint64(rp.moduli[j])
            lifted = np.mod(top_signed, rp.moduli[j]).astype(np.uint64)
            diff = (coeff.residues[j] + (qj - lifted)) % qj
            res[j] = ring.mulmod(diff, inv[j], rp.moduli[j])
        new_parts.append(
            ring.ntt_forward(
                ring.RingElement(rp, lv - 1, res, ring.Domain.COEFFICIENT)
            )
        )
    params = ct.scheme
    noise = _log2_sum(
        ct.noise_bits - math.log2(q_top), params.rescale_round_bits()
    )
    return _checked(
        Ciphertext(
            scheme=params,
            parts=tuple(new_parts),
            level=lv - 1,
            scale=ct.scale / q_top,
            noise_bits=noise,
            value_bound=ct.value_bound,
        )
    )


def ct_drop_level(ct: Ciphertext, new_level: int) -> Ciphertext:
    """Truncate the modulus chain without touching scale or values."""
    if new_level > ct.level:
        raise ValueError(f"cannot raise level {ct.level} to {new_level}")
    if new_level == ct.level:
        return ct
    parts = tuple(ring.drop_level(p, new_level) for p in ct.parts)
    return _checked(
        dataclasses.replace(ct, parts=parts, level=new_level)
    )


def align_levels(a: Ciphertext, b: Ciphertext):
    lv = min(a.level, b.level)
    return ct_drop_level(a, lv), ct_drop_level(b, lv)


def noise_measure(sk: SecretKey, ct: Ciphertext, reference) -> float:
    """Ground-truth probe: log2(max |decoded - reference| * scale).

    Returns -inf for an exact match (e.g. all-zero ciphertexts built
    without error injection). Test-mode only: requires the secret key.
    """
    reference = np.atleast_1d(np.asarray(reference, dtype=np.float64))
    slots = decrypt_to_slots(sk, ct)[: len(reference)]
    err = float(np.max(np.abs(slots - reference)))
    if err == 0.0:
        return -math.inf
    return math.log2(err * ct.scale)
