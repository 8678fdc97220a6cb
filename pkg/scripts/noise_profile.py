#!/usr/bin/env python3
"""Profile the noise ledger against measured noise over squaring chains.

For each depth the script multiplies a fresh ciphertext into itself,
rescales, and compares the ledger's estimate with the ground-truth probe
(max |decoded - expected| * scale, in bits). The margin column is the
headroom the static worst-case rules keep above reality.

Example:
    python scripts/noise_profile.py --ring-degree 2048 --depth 8
"""

import argparse
import sys

import numpy as np

from hnn import encoding, ring, scheme


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ring-degree", type=int, default=2048)
    ap.add_argument("--depth", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    moduli = ring.find_ntt_primes(args.ring_degree, [42] + [41] * args.depth)
    params = scheme.SchemeParams(
        security_level=128,
        ring=ring.RingParams(args.ring_degree, moduli),
        scale=2.0 ** 40,
        slot_capacity=args.ring_degree // 2,
        secret_weight=min(64, args.ring_degree // 2),
        allow_insecure=True,
    )
    keys = scheme.keygen(params, np.random.default_rng(args.seed))
    rng = np.random.default_rng(args.seed + 1)

    v = rng.uniform(-1.0, 1.0, params.slot_capacity)
    ct = scheme.encrypt(
        keys.pk, encoding.encode(v, params.scale, params.ring), rng
    )
    vals = v.copy()

    print(f"{'stage':<12} {'estimated':>10} {'measured':>10} {'margin':>8}")
    measured = scheme.noise_measure(keys.sk, ct, vals)
    print(f"{'fresh':<12} {ct.noise_bits:>10.1f} {measured:>10.1f} "
          f"{ct.noise_bits - measured:>8.1f}")
    for depth in range(1, args.depth + 1):
        ct = scheme.rescale(scheme.mult(ct, ct, keys.evk))
        vals = vals * vals
        measured = scheme.noise_measure(keys.sk, ct, vals)
        name = f"square^{depth}"
        print(f"{name:<12} {ct.noise_bits:>10.1f} {measured:>10.1f} "
              f"{ct.noise_bits - measured:>8.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
