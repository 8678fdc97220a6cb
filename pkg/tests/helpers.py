"""Independent oracles used across the test suite.

Each oracle recomputes the quantity under test by a different route than
the implementation: naive O(N^2) transforms, arbitrary-precision
embeddings, central finite differences, and plain numpy reference math.
"""

import mpmath
import numpy as np

from hnn import ring


def naive_negacyclic_transform(coeffs, n, q, psi):
    """Direct negacyclic evaluation: out[k] = a(psi^(2k+1)), natural order."""
    return np.array(
        [
            sum(int(coeffs[j]) * pow(psi, (2 * k + 1) * j, q) for j in range(n)) % q
            for k in range(n)
        ],
        dtype=np.uint64,
    )


def primitive_2n_root(n, q):
    exp = (q - 1) // (2 * n)
    for g in range(2, 10000):
        psi = pow(g, exp, q)
        if pow(psi, n, q) == q - 1:
            return psi
    raise AssertionError("no primitive root found")


def schoolbook_int_negacyclic(a, b, q):
    """Pure-Python negacyclic convolution, independent of hnn.ring."""
    n = len(a)
    out = [0] * n
    for i in range(n):
        for j in range(n):
            k = i + j
            term = int(a[i]) * int(b[j])
            if k < n:
                out[k] += term
            else:
                out[k - n] -= term
    return [v % q for v in out]


def hp_embed_to_coeffs(values, n, prec_bits=200):
    """Arbitrary-precision inverse canonical embedding (O(N^2))."""
    with mpmath.workprec(prec_bits):
        m = 2 * n
        # slot positions: exponents 5^k mod 2N, plus conjugates
        exps = []
        j = 1
        for _ in range(n // 2):
            exps.append(j)
            j = (j * 5) % m
        evals = {}
        for k, e in enumerate(exps):
            evals[e] = mpmath.mpc(values[k])
            evals[m - e] = mpmath.conj(mpmath.mpc(values[k]))
        coeffs = []
        for i in range(n):
            acc = mpmath.mpc(0)
            for e, z in evals.items():
                root = mpmath.e ** (-1j * mpmath.pi * e * i / n)
                acc += z * root
            coeffs.append(acc / n)
        return np.array([float(mpmath.re(c)) for c in coeffs])


def hp_coeffs_to_slots(coeffs, n, prec_bits=200):
    """Arbitrary-precision canonical embedding at the slot roots."""
    with mpmath.workprec(prec_bits):
        m = 2 * n
        exps = []
        j = 1
        for _ in range(n // 2):
            exps.append(j)
            j = (j * 5) % m
        out = []
        for e in exps:
            acc = mpmath.mpc(0)
            for i in range(n):
                acc += mpmath.mpf(float(coeffs[i])) * mpmath.e ** (
                    1j * mpmath.pi * e * i / n
                )
            out.append(complex(acc))
        return np.array(out)


def central_difference(fn, x, step=1e-5):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        bump = np.zeros_like(x)
        bump.flat[i] = step
        grad.flat[i] = (fn(x + bump) - fn(x - bump)) / (2 * step)
    return grad


def reference_softmax(logits, temperature=1.0):
    z = np.asarray(logits, dtype=np.float64) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def reference_soft_argmax(logits, temperature=1.0):
    probs = reference_softmax(logits, temperature)
    idx = np.arange(1, probs.shape[-1] + 1, dtype=np.float64)
    return probs @ idx


def random_ring_element(params, level, rng, domain=ring.Domain.COEFFICIENT):
    res = np.stack(
        [
            rng.integers(0, params.moduli[j], params.ring_degree, dtype=np.uint64)
            for j in range(level + 1)
        ]
    )
    return ring.RingElement(params, level, res, domain)
