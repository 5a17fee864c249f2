"""Simulation and verification laboratory for the inverse-gamma directed polymer."""
from __future__ import annotations

from .env import (
    CapacityError,
    EnvFileError,
    EnvVersionError,
    Environment,
    Window,
    fingerprint,
    load_environment,
    reverse_environment,
    sample_environment,
    save_environment,
    stream,
)
from .logspace import NEG_INF, log1mexp, lse, lse2, signed_lse
from .reports import IdentityReport, compare
from .scaling import ThetaConstants, constants, digamma, trigamma

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "EnvFileError",
    "EnvVersionError",
    "Environment",
    "IdentityReport",
    "NEG_INF",
    "ThetaConstants",
    "Window",
    "compare",
    "constants",
    "digamma",
    "fingerprint",
    "load_environment",
    "log1mexp",
    "lse",
    "lse2",
    "reverse_environment",
    "sample_environment",
    "save_environment",
    "signed_lse",
    "stream",
    "trigamma",
    "__version__",
]
