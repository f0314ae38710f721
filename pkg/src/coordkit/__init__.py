"""coordkit: strong coordination of signals and actions over noisy channels.

Rate-region membership checks and sweeps, a chained polar codec for the
no-state setting, a tiny-block exact random-binning oracle, and an
experiment harness tying them together.
"""

from .probability import (
    Alphabet,
    DomainError,
    FiniteDist,
    Kernel,
    StructureError,
    binary_entropy,
    check_pinsker_csiszar,
    entropy,
    kl_divergence,
    mutual_information,
    total_variation,
)
from .targets import CoordinationTarget, bsc_test_target

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "CoordinationTarget",
    "DomainError",
    "FiniteDist",
    "Kernel",
    "StructureError",
    "binary_entropy",
    "bsc_test_target",
    "check_pinsker_csiszar",
    "entropy",
    "kl_divergence",
    "mutual_information",
    "total_variation",
    "__version__",
]
