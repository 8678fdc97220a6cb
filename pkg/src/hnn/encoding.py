"""Canonical-embedding encoder: real slot vectors <-> scaled plaintexts.

A length-(N/2) real vector is placed on the slot positions 5^k mod 2N of
the conjugate-symmetric evaluation space of X^N + 1, pulled back through
the embedding, scaled by a fixed factor, and rounded (half-to-even) to
integer coefficients. Because the embedding is a ring homomorphism,
polynomial add/mul act slotwise on the decoded values.

The fast transform is a size-N FFT with a 2N-th-root twist; tests check
it against an O(N^2) high-precision oracle.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import ring

# Scales below 2^10 leave fewer than ~10 bits between rounding error and
# signal; refuse rather than silently produce garbage.
MIN_SCALE = 2.0 ** 10

_SLOT_CACHE: dict = {}
_TWIST_CACHE: dict = {}


def slot_positions(ring_degree: int) -> np.ndarray:
    """Indices into the odd-power evaluation array for each slot.

    Slot k lives at the primitive 2N-th root psi^(5^k mod 2N); the odd
    exponent j maps to array position (j-1)/2. The conjugate of slot k
    sits at position N-1-pos[k].
    """
    pos = _SLOT_CACHE.get(ring_degree)
    if pos is None:
        m = 2 * ring_degree
        pos = np.empty(ring_degree // 2, dtype=np.int64)
        j = 1
        for k in range(ring_degree // 2):
            pos[k] = (j - 1) // 2
            j = (j * 5) % m
        pos.flags.writeable = False
        _SLOT_CACHE[ring_degree] = pos
    return pos


def _twist(ring_degree: int) -> np.ndarray:
    tw = _TWIST_CACHE.get(ring_degree)
    if tw is None:
        j = np.arange(ring_degree)
        tw = np.exp(1j * np.pi * j / ring_degree)
        tw.flags.writeable = False
        _TWIST_CACHE[ring_degree] = tw
    return tw


@dataclasses.dataclass(frozen=True)
class Plaintext:
    """Encoded ring element plus its scale.

    round_error: measured max slot-domain error introduced by coefficient
    rounding at encode time (absolute, in units of scale), kept so the
    noise ledger can charge honest per-plaintext rounding noise.
    value_bound: upper bound on |slot values| carried for overflow guards.
    """

    poly: ring.RingElement
    scale: float
    round_error: float = 0.0
    value_bound: float = 0.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def level(self) -> int:
        return self.poly.level


def embed_to_coeffs(values: np.ndarray, ring_degree: int) -> np.ndarray:
    """Pull a full slot vector back through the embedding (float result)."""
    pos = slot_positions(ring_degree)
    evals = np.zeros(ring_degree, dtype=np.complex128)
    evals[pos] = values
    evals[ring_degree - 1 - pos] = np.conj(values)
    coeffs = np.fft.fft(evals) / ring_degree / _twist(ring_degree)
    return np.real(coeffs)


def coeffs_to_slots(coeffs: np.ndarray, ring_degree: int) -> np.ndarray:
    """Evaluate float coefficients at the slot roots (complex result)."""
    pos = slot_positions(ring_degree)
    evals = np.fft.ifft(coeffs * _twist(ring_degree)) * ring_degree
    return evals[pos]


def encode(
    values,
    scale: float,
    params: ring.RingParams,
    level: int = None,
) -> Plaintext:
    """Round scale * embedding^-1(values) into an RNS plaintext.

    values: real vector of length <= N/2 (zero-padded to N/2).
    Rounding is half-to-even on the scaled embedding output.
    """
    n = params.ring_degree
    if level is None:
        level = params.max_level
    values = np.atleast_1d(np.asarray(values, dtype=np.float64))
    if values.ndim != 1 or len(values) > n // 2:
        raise ValueError(
            f"slot vector length {values.shape} exceeds capacity {n // 2}"
        )
    if not np.all(np.isfinite(values)):
        raise ValueError("slot values must be finite")
    if scale < MIN_SCALE:
        raise ValueError(f"scale {scale} below precision floor {MIN_SCALE}")

    full = np.zeros(n // 2)
    full[: len(values)] = values
    if np.all(full == 0.0):
        # exact: embedding of zero is zero
        poly = ring.zero(params, level)
        return Plaintext(poly, float(scale), 0.0, 0.0)
    if np.all(full == full[0]):
        # the embedding of a constant vector is the constant polynomial
        coeffs = np.zeros(n)
        coeffs[0] = full[0] * scale
        ints = np.rint(coeffs).astype(np.int64)
        rounded_err = abs(float(coeffs[0] - ints[0]))
        poly = ring.from_int_coeffs(ints, params, level)
        return Plaintext(
            poly, float(scale), rounded_err, float(abs(full[0])) + rounded_err / scale
        )

    coeffs = embed_to_coeffs(full, n) * scale
    if np.max(np.abs(coeffs)) >= 2.0 ** 62:
        raise ValueError("scaled coefficients exceed exact integer range")
    ints = np.rint(coeffs).astype(np.int64)
    # honest rounding cost, measured in the slot domain
    residual = coeffs_to_slots(coeffs - ints, n)
    round_error = float(np.max(np.abs(residual)))
    poly = ring.from_int_coeffs(ints, params, level)
    bound = float(np.max(np.abs(full))) + round_error / scale
    return Plaintext(poly, float(scale), round_error, bound)


def decode(pt: Plaintext) -> np.ndarray:
    """Slot values of a plaintext: embedding(poly) / scale, length N/2."""
    signed, _ = ring.compose_signed(ring.to_domain(pt.poly, ring.Domain.COEFFICIENT))
    coeffs = signed.astype(np.float64)
    slots = coeffs_to_slots(coeffs, pt.poly.params.ring_degree)
    return np.real(slots) / pt.scale


def decode_complex(pt: Plaintext) -> np.ndarray:
    """As :func:`decode` but keeping the imaginary parts (diagnostics)."""
    signed, _ = ring.compose_signed(ring.to_domain(pt.poly, ring.Domain.COEFFICIENT))
    slots = coeffs_to_slots(signed.astype(np.float64), pt.poly.params.ring_degree)
    return slots / pt.scale


def encode_constant(
    value: float,
    scale: float,
    params: ring.RingParams,
    level: int = None,
) -> Plaintext:
    """Constant polynomial round(value*scale); exact when the product is
    integral, which the evaluator exploits for index vectors and masks."""
    if level is None:
        level = params.max_level
    if not np.isfinite(value):
        raise ValueError("constant must be finite")
    if scale < MIN_SCALE:
        raise ValueError(f"scale {scale} below precision floor {MIN_SCALE}")
    scaled = value * scale
    if abs(scaled) >= 2.0 ** 62:
        raise ValueError("scaled constant exceeds exact integer range")
    c0 = int(np.rint(scaled))
    coeffs = np.zeros(params.ring_degree, dtype=np.int64)
    coeffs[0] = c0
    poly = ring.from_int_coeffs(coeffs, params, level)
    round_error = abs(scaled - c0)
    return Plaintext(
        poly, float(scale), round_error, abs(value) + round_error / scale
    )
