"""Simulator and analysis toolkit for step-split EPR secure direct communication."""

__version__ = "0.1.0"

from .qcore import BellKind, EncodingOp, MeasBasis, Qubit  # noqa: E402
from .protocol import SessionConfig, SessionStats, run_round, run_session  # noqa: E402
from .adversary import (  # noqa: E402
    DelayLossHiding,
    FirstQubitDepolarize,
    InterceptResendBell,
    NoAttack,
    SecondQubitMeasure,
    SecondQubitUnitary,
)

__all__ = [
    "BellKind",
    "DelayLossHiding",
    "EncodingOp",
    "FirstQubitDepolarize",
    "InterceptResendBell",
    "MeasBasis",
    "NoAttack",
    "Qubit",
    "SecondQubitMeasure",
    "SecondQubitUnitary",
    "SessionConfig",
    "SessionStats",
    "run_round",
    "run_session",
]
