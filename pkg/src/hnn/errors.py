"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so keep the hierarchy flat
and the categories stable: parameter problems, crypto state problems
(noise budget / level exhaustion), format problems, training problems.
"""


class ParameterError(ValueError):
    """Invalid or unsatisfiable scheme/ring parameters."""


class InsecureParameterError(ParameterError):
    """Parameter set fails the embedded security table and the
    allow_insecure override was not set."""


class CryptoStateError(RuntimeError):
    """Base for errors about ciphertext state rather than inputs."""


class NoiseBudgetExceeded(CryptoStateError):
    """Tracked noise passed the budget, or an operation would push the
    payload into modulus wraparound. Raised *before* corruption."""


class LevelExhausted(CryptoStateError):
    """Not enough moduli left in the chain for the requested operation."""


class ScaleMismatch(ValueError):
    """Binary op between ciphertexts/plaintexts with incompatible scales."""


class DomainViolation(ValueError):
    """Decrypted probe found slot values outside the contracted interval
    (only detectable in test mode with the secret key available)."""


class FormatError(ValueError):
    """Malformed, corrupted, or inconsistent serialized material."""


class ParamsHashMismatch(FormatError):
    """Blob was produced under a different parameter set."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training; message carries the config."""
