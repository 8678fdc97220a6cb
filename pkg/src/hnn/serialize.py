"""Stable on-disk formats: key/ciphertext blobs, parameter files, bundles.

Blob layout (all integers little-endian):

    magic    4 bytes  "HNN1"
    kind     u8       0=pk 1=sk 2=evk 3=ct 4=pt
    version  u16
    params_hash  32 bytes (sha256 of the canonical parameter file text)
    payload_len  u64
    payload      kind-specific
    checksum     32 bytes sha256 of everything above

Ring elements serialize as level u32, domain u8, then (level+1)*N
coefficients as u64 words in chain order, coefficients ascending. Key
blob sizes are a fixed function of the parameter set, independent of any
circuit later evaluated. A bundle file is a manifest (kind, ciphertext
count, slot occupancy) followed by length-prefixed ciphertext blobs.

Every load verifies the checksum and the parameter hash; a single
flipped payload byte fails loudly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import math
import struct

import numpy as np

from . import encoding, ring, scheme
from .errors import FormatError, ParamsHashMismatch

MAGIC = b"HNN1"
BUNDLE_MAGIC = b"HNNB"
FORMAT_VERSION = 1

KIND_PK = 0
KIND_SK = 1
KIND_EVK = 2
KIND_CT = 3
KIND_PT = 4

BUNDLE_FEATURES = 0
BUNDLE_SCORES = 1


# ---------------------------------------------------------------------------
# Parameter files
# ---------------------------------------------------------------------------

def params_to_text(params: scheme.SchemeParams) -> str:
    """Canonical text rendering; loading and re-saving is the identity."""
    bits = ",".join(str(q.bit_length()) for q in params.ring.moduli)
    lines = [
        "hnn-params v1",
        f"lambda = {params.security_level}",
        f"ring_degree = {params.ring.ring_degree}",
        f"modulus_bits = {bits}",
        f"scale_bits = {int(round(math.log2(params.scale)))}",
        f"slots = {params.slot_capacity}",
        f"secret_weight = {params.secret_weight}",
        f"err_std = {params.err_std:.17g}",
        f"noise_budget_bits = {params.noise_budget_bits:.17g}",
        f"allow_insecure = {'true' if params.allow_insecure else 'false'}",
    ]
    return "\n".join(lines) + "\n"


def params_from_text(text: str) -> scheme.SchemeParams:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0] != "hnn-params v1":
        raise FormatError("not a parameter file (missing 'hnn-params v1' header)")
    kv = {}
    for ln in lines[1:]:
        if "=" not in ln:
            raise FormatError(f"malformed parameter line: {ln!r}")
        key, val = ln.split("=", 1)
        kv[key.strip()] = val.strip()
    try:
        n = int(kv["ring_degree"])
        bits = [int(b) for b in kv["modulus_bits"].split(",")]
        moduli = ring.find_ntt_primes(n, bits)
        return scheme.SchemeParams(
            security_level=int(kv["lambda"]),
            ring=ring.RingParams(n, moduli),
            scale=float(2 ** int(kv["scale_bits"])),
            slot_capacity=int(kv["slots"]),
            secret_weight=int(kv["secret_weight"]),
            err_std=float(kv["err_std"]),
            noise_budget_bits=float(kv["noise_budget_bits"]),
            allow_insecure=kv["allow_insecure"] == "true",
        )
    except KeyError as exc:
        raise FormatError(f"parameter file missing field {exc}") from exc


def params_hash(params: scheme.SchemeParams) -> bytes:
    return hashlib.sha256(params_to_text(params).encode()).digest()


def save_params(params: scheme.SchemeParams, path):
    with open(path, "w") as fh:
        fh.write(params_to_text(params))


def load_params(path) -> scheme.SchemeParams:
    with open(path) as fh:
        return params_from_text(fh.read())


# ---------------------------------------------------------------------------
# Primitive writers/readers
# ---------------------------------------------------------------------------

def _write_element(buf: io.BytesIO, el: ring.RingElement):
    buf.write(struct.pack("<IB", el.level, 1 if el.domain == ring.Domain.EVALUATION else 0))
    buf.write(el.residues.astype("<u8").tobytes())


def _read_element(buf, params: scheme.SchemeParams) -> ring.RingElement:
    raw = buf.read(5)
    if len(raw) != 5:
        raise FormatError("truncated ring element header")
    level, domain_flag = struct.unpack("<IB", raw)
    rp = params.ring
    if level >= rp.level_count:
        raise FormatError(f"element level {level} outside chain")
    count = (level + 1) * rp.ring_degree
    data = buf.read(8 * count)
    if len(data) != 8 * count:
        raise FormatError("truncated ring element body")
    res = np.frombuffer(data, dtype="<u8").astype(np.uint64).reshape(
        level + 1, rp.ring_degree
    )
    for j in range(level + 1):
        if np.any(res[j] >= rp.moduli[j]):
            raise FormatError("residue outside modulus range")
    domain = ring.Domain.EVALUATION if domain_flag else ring.Domain.COEFFICIENT
    return ring.RingElement(rp, level, res.copy(), domain)


def _blob(kind: int, hash32: bytes, payload: bytes) -> bytes:
    head = MAGIC + struct.pack("<BH", kind, FORMAT_VERSION) + hash32
    head += struct.pack("<Q", len(payload))
    body = head + payload
    return body + hashlib.sha256(body).digest()


def _open_blob(data: bytes, expected_kind: int, params: scheme.SchemeParams) -> bytes:
    if len(data) < 4 + 3 + 32 + 8 + 32:
        raise FormatError("blob too short")
    if data[:4] != MAGIC:
        raise FormatError("bad magic; not a key/ciphertext blob")
    kind, version = struct.unpack("<BH", data[4:7])
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported blob version {version}")
    if kind != expected_kind:
        raise FormatError(f"expected blob kind {expected_kind}, found {kind}")
    hash32 = data[7:39]
    (payload_len,) = struct.unpack("<Q", data[39:47])
    end = 47 + payload_len
    if len(data) != end + 32:
        raise FormatError("blob length mismatch")
    checksum = data[end:]
    if hashlib.sha256(data[:end]).digest() != checksum:
        raise FormatError("checksum failure; blob corrupted")
    if hash32 != params_hash(params):
        raise ParamsHashMismatch(
            "blob was produced under a different parameter set"
        )
    return data[47:end]


# ---------------------------------------------------------------------------
# Keys
# ---------------------------------------------------------------------------

def public_key_to_bytes(pk: scheme.PublicKey) -> bytes:
    buf = io.BytesIO()
    _write_element(buf, pk.b)
    _write_element(buf, pk.a)
    return _blob(KIND_PK, params_hash(pk.scheme), buf.getvalue())


def public_key_from_bytes(data: bytes, params: scheme.SchemeParams) -> scheme.PublicKey:
    buf = io.BytesIO(_open_blob(data, KIND_PK, params))
    b = _read_element(buf, params)
    a = _read_element(buf, params)
    return scheme.PublicKey(params, b, a)


def secret_key_to_bytes(sk: scheme.SecretKey) -> bytes:
    buf = io.BytesIO()
    _write_element(buf, sk.s)
    return _blob(KIND_SK, params_hash(sk.scheme), buf.getvalue())


def secret_key_from_bytes(data: bytes, params: scheme.SchemeParams) -> scheme.SecretKey:
    buf = io.BytesIO(_open_blob(data, KIND_SK, params))
    return scheme.SecretKey(params, _read_element(buf, params))


def relin_key_to_bytes(evk: scheme.RelinKey) -> bytes:
    buf = io.BytesIO()
    buf.write(struct.pack("<BI", evk.digit_bits, len(evk.components)))
    for b_t, a_t in evk.components:
        _write_element(buf, b_t)
        _write_element(buf, a_t)
    return _blob(KIND_EVK, params_hash(evk.scheme), buf.getvalue())


def relin_key_from_bytes(data: bytes, params: scheme.SchemeParams) -> scheme.RelinKey:
    buf = io.BytesIO(_open_blob(data, KIND_EVK, params))
    raw = buf.read(5)
    if len(raw) != 5:
        raise FormatError("truncated relin key header")
    digit_bits, count = struct.unpack("<BI", raw)
    comps = []
    for _ in range(count):
        b_t = _read_element(buf, params)
        a_t = _read_element(buf, params)
        comps.append((b_t, a_t))
    return scheme.RelinKey(params, tuple(comps), digit_bits)


# ---------------------------------------------------------------------------
# Ciphertexts / plaintexts
# ---------------------------------------------------------------------------

def ciphertext_to_bytes(ct: scheme.Ciphertext) -> bytes:
    buf = io.BytesIO()
    buf.write(
        struct.pack(
            "<BIddd", len(ct.parts), ct.level, ct.scale, ct.noise_bits, ct.value_bound
        )
    )
    for p in ct.parts:
        _write_element(buf, p)
    return _blob(KIND_CT, params_hash(ct.scheme), buf.getvalue())


def ciphertext_from_bytes(data: bytes, params: scheme.SchemeParams) -> scheme.Ciphertext:
    buf = io.BytesIO(_open_blob(data, KIND_CT, params))
    raw = buf.read(29)
    if len(raw) != 29:
        raise FormatError("truncated ciphertext header")
    n_parts, level, scale, noise_bits, value_bound = struct.unpack("<BIddd", raw)
    parts = tuple(_read_element(buf, params) for _ in range(n_parts))
    return scheme.Ciphertext(
        scheme=params,
        parts=parts,
        level=level,
        scale=scale,
        noise_bits=noise_bits,
        value_bound=value_bound,
    )


def plaintext_to_bytes(pt: encoding.Plaintext, params: scheme.SchemeParams) -> bytes:
    buf = io.BytesIO()
    buf.write(struct.pack("<ddd", pt.scale, pt.round_error, pt.value_bound))
    _write_element(buf, pt.poly)
    return _blob(KIND_PT, params_hash(params), buf.getvalue())


def plaintext_from_bytes(data: bytes, params: scheme.SchemeParams) -> encoding.Plaintext:
    buf = io.BytesIO(_open_blob(data, KIND_PT, params))
    raw = buf.read(24)
    if len(raw) != 24:
        raise FormatError("truncated plaintext header")
    scale, round_error, value_bound = struct.unpack("<ddd", raw)
    poly = _read_element(buf, params)
    return encoding.Plaintext(poly, scale, round_error, value_bound)


# ---------------------------------------------------------------------------
# Ciphertext bundles
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class Bundle:
    """Ordered ciphertexts plus a manifest.

    kind BUNDLE_FEATURES: one ciphertext per input feature (column
    packing); kind BUNDLE_SCORES: a single soft-argmax ciphertext.
    n_samples records slot occupancy.
    """

    kind: int
    n_samples: int
    ciphertexts: list


def bundle_to_bytes(bundle: Bundle, params: scheme.SchemeParams) -> bytes:
    buf = io.BytesIO()
    buf.write(BUNDLE_MAGIC)
    buf.write(
        struct.pack(
            "<HBII",
            FORMAT_VERSION,
            bundle.kind,
            len(bundle.ciphertexts),
            bundle.n_samples,
        )
    )
    for ct in bundle.ciphertexts:
        blob = ciphertext_to_bytes(ct)
        buf.write(struct.pack("<Q", len(blob)))
        buf.write(blob)
    return buf.getvalue()


def bundle_from_bytes(data: bytes, params: scheme.SchemeParams) -> Bundle:
    if len(data) < 15 or data[:4] != BUNDLE_MAGIC:
        raise FormatError("not a ciphertext bundle")
    version, kind, count, n_samples = struct.unpack("<HBII", data[4:15])
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported bundle version {version}")
    off = 15
    cts = []
    for _ in range(count):
        if off + 8 > len(data):
            raise FormatError("truncated bundle")
        (blen,) = struct.unpack("<Q", data[off : off + 8])
        off += 8
        if off + blen > len(data):
            raise FormatError("truncated bundle entry")
        cts.append(ciphertext_from_bytes(data[off : off + blen], params))
        off += blen
    if off != len(data):
        raise FormatError("trailing bytes in bundle")
    return Bundle(kind, n_samples, cts)


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

def model_to_text(model, head, radius, exp_degree, inv_iterations, provenance=None):
    """Versioned text document for the probe + head; %.17g round-trips
    float64 exactly, so calibration freeze checks stay bit-exact."""
    lines = [
        "hnn-model v1",
        f"d_in = {model.d_in}",
        f"classes = {model.class_count}",
        f"temperature = {head.temperature:.17g}",
        f"logit_radius = {radius:.17g}",
        f"exp_degree = {exp_degree}",
        f"inv_iterations = {inv_iterations}",
    ]
    for key, val in (provenance or {}).items():
        lines.append(f"prov_{key} = {val}")
    for row in model.weights:
        lines.append("W " + " ".join(f"{w:.17g}" for w in row))
    lines.append("b " + " ".join(f"{v:.17g}" for v in model.bias))
    return "\n".join(lines) + "\n"


def model_from_text(text: str):
    from . import neural  # local import to avoid a cycle

    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0] != "hnn-model v1":
        raise FormatError("not a model file (missing 'hnn-model v1' header)")
    kv = {}
    w_rows = []
    bias = None
    for ln in lines[1:]:
        if ln.startswith("W "):
            w_rows.append([float(x) for x in ln[2:].split()])
        elif ln.startswith("b "):
            bias = [float(x) for x in ln[2:].split()]
        elif "=" in ln:
            key, val = ln.split("=", 1)
            kv[key.strip()] = val.strip()
        else:
            raise FormatError(f"malformed model line: {ln!r}")
    try:
        d_in = int(kv["d_in"])
        classes = int(kv["classes"])
        model = neural.LinearModel(np.array(w_rows), np.array(bias))
        if model.d_in != d_in or model.class_count != classes:
            raise FormatError("model matrix shape disagrees with header")
        head = neural.SoftArgmaxHead(float(kv["temperature"]), classes)
        meta = {
            "radius": float(kv["logit_radius"]),
            "exp_degree": int(kv["exp_degree"]),
            "inv_iterations": int(kv["inv_iterations"]),
        }
        prov = {k[5:]: v for k, v in kv.items() if k.startswith("prov_")}
        return model, head, meta, prov
    except KeyError as exc:
        raise FormatError(f"model file missing field {exc}") from exc
