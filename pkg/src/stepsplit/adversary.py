"""Eavesdropper strategies.

A strategy sees the round through two transit hooks, one for the first qubit
(sent before the receipt) and one for the second (the encoded qubit), plus a
hook for public-channel traffic. Hooks act on qubit handles inside the round's
:class:`~stepsplit.protocol.Lab`; they never copy amplitudes, so no strategy
can clone Alice's qubit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import qcore
from .messages import CheckAnnounce
from .qcore import CODES, DECODE, EncodingOp, MeasBasis


@dataclass
class EveGuess:
    code: str
    informed: bool


@dataclass
class EveState:
    """What Eve holds and has learned, keyed by round index."""

    held: dict = field(default_factory=dict)
    guesses: dict[int, EveGuess] = field(default_factory=dict)
    actions: dict[int, list[str]] = field(default_factory=dict)
    public_log: list = field(default_factory=list)

    def log(self, round_index: int, action: str) -> None:
        self.actions.setdefault(round_index, []).append(action)

    def guess(self, round_index: int, code: str, informed: bool) -> None:
        self.guesses[round_index] = EveGuess(code, informed)

    def informed_rounds(self) -> list[int]:
        return [r for r, g in self.guesses.items() if g.informed]


@dataclass
class Transit:
    """Handle Eve gets when a qubit passes her."""

    lab: "object"
    qubit: "object"
    round_index: int
    eve: EveState


class AttackStrategy:
    """Base strategy: every hook is the identity."""

    name = "none"

    def on_first_qubit(self, transit: Transit, rng: np.random.Generator):
        """Return the handle delivered to Bob, or ``None`` to withhold it."""
        return transit.qubit

    def on_second_qubit(self, transit: Transit, rng: np.random.Generator):
        return transit.qubit

    def on_public_message(self, round_index: int, message, lab, eve: EveState, rng: np.random.Generator):
        """Called for every public message; may return a late first-qubit delivery."""
        eve.public_log.append((round_index, message))
        return None

    def finish_round(self, round_index: int, eve: EveState, rng: np.random.Generator) -> None:
        # Without information Eve's best guess is a uniform one.
        if round_index not in eve.guesses:
            eve.guess(round_index, CODES[int(rng.integers(4))], informed=False)
        eve.held.pop(round_index, None)

    def describe(self) -> dict:
        return {"attack": self.name}


@dataclass
class NoAttack(AttackStrategy):
    name = "none"


@dataclass
class InterceptResendBell(AttackStrategy):
    """Keep Alice's first qubit, send Bob half of a fresh singlet, read the code later."""

    name = "intercept_resend_bell"

    def on_first_qubit(self, transit, rng):
        lab, r = transit.lab, transit.round_index
        _, bob_half = lab.new_pair(qcore.SINGLET_RHO)
        transit.eve.held[r] = transit.qubit
        transit.eve.log(r, "intercept-first")
        return bob_half

    def on_second_qubit(self, transit, rng):
        lab, r, eve = transit.lab, transit.round_index, transit.eve
        held = eve.held.pop(r, None)
        if held is None:
            return transit.qubit
        kind = lab.bell_measure(transit.qubit, held, rng)
        eve.guess(r, DECODE[kind], informed=True)
        eve.log(r, f"bell-measure:{kind.name}")
        # The measured qubit travels on; Bob pairs it with an unrelated half.
        return transit.qubit


@dataclass
class SecondQubitMeasure(AttackStrategy):
    basis: MeasBasis = MeasBasis.Bz
    name = "second_qubit_measure"

    def on_second_qubit(self, transit, rng):
        outcome = transit.lab.measure(transit.qubit, self.basis, rng)
        transit.eve.log(transit.round_index, f"measure-{self.basis.value}:{outcome}")
        return transit.qubit

    def describe(self):
        return {"attack": self.name, "basis": self.basis.value}


@dataclass
class SecondQubitUnitary(AttackStrategy):
    op: EncodingOp = EncodingOp.U11
    name = "second_qubit_unitary"

    def __post_init__(self):
        if self.op is EncodingOp.U00:
            raise ValueError("tampering operation must be one of U01, U10, U11")

    def on_second_qubit(self, transit, rng):
        transit.lab.apply(transit.qubit, self.op.matrix)
        transit.eve.log(transit.round_index, f"apply-{self.op.name}")
        return transit.qubit

    def describe(self):
        return {"attack": self.name, "op": self.op.name}


@dataclass
class DelayLossHiding(AttackStrategy):
    """Hold the first qubit back and pose the gap as channel loss.

    If a check announcement shows up while she holds it, Eve forwards the
    qubit late; otherwise she grabs the encoded qubit and Bell-measures both.
    ``fraction`` is the share of rounds targeted.
    """

    fraction: float = 1.0
    name = "delay_loss_hiding"

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")

    def on_first_qubit(self, transit, rng):
        if rng.random() >= self.fraction:
            return transit.qubit
        transit.eve.held[transit.round_index] = transit.qubit
        transit.eve.log(transit.round_index, "withhold-first")
        return None

    def on_public_message(self, round_index, message, lab, eve, rng):
        super().on_public_message(round_index, message, lab, eve, rng)
        if isinstance(message, CheckAnnounce) and round_index in eve.held:
            eve.log(round_index, "late-forward-first")
            return eve.held.pop(round_index)
        return None

    def on_second_qubit(self, transit, rng):
        held = transit.eve.held.pop(transit.round_index, None)
        if held is None:
            return transit.qubit
        kind = transit.lab.bell_measure(transit.qubit, held, rng)
        transit.eve.guess(transit.round_index, DECODE[kind], informed=True)
        transit.eve.log(transit.round_index, f"bell-measure:{kind.name}")
        return None

    def describe(self):
        return {"attack": self.name, "fraction": self.fraction}


@dataclass
class FirstQubitDepolarize(AttackStrategy):
    p: float = 0.5
    name = "first_qubit_depolarize"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")

    def on_first_qubit(self, transit, rng):
        transit.lab.depolarize(transit.qubit, self.p)
        transit.eve.log(transit.round_index, f"depolarize:{self.p}")
        return transit.qubit

    def describe(self):
        return {"attack": self.name, "p": self.p}


ATTACKS = {
    "none": NoAttack,
    "intercept_resend_bell": InterceptResendBell,
    "second_qubit_measure": SecondQubitMeasure,
    "second_qubit_unitary": SecondQubitUnitary,
    "delay_loss_hiding": DelayLossHiding,
    "first_qubit_depolarize": FirstQubitDepolarize,
}


def make_attack(name: str, basis: Optional[str] = None, op: Optional[str] = None,
                p: Optional[float] = None, fraction: Optional[float] = None) -> AttackStrategy:
    """Build a strategy from CLI-style parameters."""
    if name not in ATTACKS:
        raise ValueError(f"unknown attack {name!r}; choose from {', '.join(ATTACKS)}")
    if name == "second_qubit_measure":
        return SecondQubitMeasure(MeasBasis(basis or "Bz"))
    if name == "second_qubit_unitary":
        return SecondQubitUnitary(EncodingOp[op or "U11"])
    if name == "delay_loss_hiding":
        return DelayLossHiding(1.0 if fraction is None else fraction)
    if name == "first_qubit_depolarize":
        return FirstQubitDepolarize(0.5 if p is None else p)
    return ATTACKS[name]()


def eve_decode_accuracy(eve: EveState, true_codes: dict[int, str], rounds=None) -> float:
    """Share of rounds where Eve's guess matches the true code.

    Rounds without a recorded guess count as a uniform guess (1/4).
    """
    rounds = list(true_codes) if rounds is None else list(rounds)
    if not rounds:
        return float("nan")
    score = 0.0
    for r in rounds:
        g = eve.guesses.get(r)
        score += 0.25 if g is None else float(g.code == true_codes[r])
    return score / len(rounds)
