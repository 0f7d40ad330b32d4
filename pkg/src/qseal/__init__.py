"""Simulated quantum seals and seal-based bit commitment."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ArityExceeded,
    BranchBudgetExceeded,
    CapacityExceeded,
    MalformedHeader,
    NotNormalized,
    NotProductState,
    ProtocolViolation,
    QSealError,
    RegisterEntangled,
    RNonSeparating,
)
from .gf2_code import GeneratorMatrix, hamming_8_4  # noqa: E402
from .qbc_session import ProtocolParams, Verdict, run_advanced, run_basic  # noqa: E402
from .quantum_core import JointState, PureQubit  # noqa: E402
from .registers import PublicRegisters  # noqa: E402
from .seal_string import SealParams, check, read, seal  # noqa: E402

__all__ = [
    "ArityExceeded", "BranchBudgetExceeded", "CapacityExceeded", "GeneratorMatrix", "JointState",
    "MalformedHeader", "NotNormalized", "NotProductState", "ProtocolParams", "ProtocolViolation",
    "PublicRegisters", "PureQubit", "QSealError", "RNonSeparating", "RegisterEntangled", "SealParams",
    "Verdict", "check", "hamming_8_4", "read", "run_advanced", "run_basic", "seal",
]
