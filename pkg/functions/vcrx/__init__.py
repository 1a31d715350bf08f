"""
vcrx: secret common randomness from correlated observations.

Trained quantizers turn paired observations into symbol streams; a
Reed-Solomon code-offset sketch reconciles them into a shared key.
"""

__version__ = "1.0.0"

from .errors import (  # noqa: F401
    ConfigError,
    FileFormatError,
    GraphStateError,
    MissingModelError,
    NonFiniteError,
    TrainingAborted,
    VcrxError,
)
from .reed_solomon import DecodeFailure, RsParams, rs_decode, rs_encode  # noqa: F401
from .sketch import generate_keys, key_rate_bits, leakage_bound_bits, make_sketch, recover  # noqa: F401
