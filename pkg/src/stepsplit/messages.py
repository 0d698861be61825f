"""Public-channel messages. The channel is readable by everyone but unforgeable."""
from __future__ import annotations

from dataclasses import dataclass

from .qcore import MeasBasis


@dataclass(frozen=True)
class Receipt:
    pass


@dataclass(frozen=True)
class CheckAnnounce:
    basis: MeasBasis
    outcome: int


@dataclass(frozen=True)
class CheckVerdict:
    eve_detected: bool


@dataclass(frozen=True)
class Abort:
    reason: str


@dataclass(frozen=True)
class AuthReveal:
    rounds: tuple[int, ...]
    codes: tuple[str, ...]


@dataclass(frozen=True)
class AuthVerdict:
    passed: bool


class PublicChannel:
    """Append-only authenticated log of (round, sender, message)."""

    def __init__(self):
        self._log: list[tuple[int, str, object]] = []

    def send(self, round_index: int, sender: str, message) -> None:
        self._log.append((round_index, sender, message))

    @property
    def log(self) -> tuple:
        return tuple(self._log)
