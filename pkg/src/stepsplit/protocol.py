"""Alice and Bob running the step-split EPR protocol round by round.

One round: Alice prepares a singlet and sends the first qubit; Bob
acknowledges it on the public channel; only then does Alice pick check mode
or encode mode. Check rounds compare same-basis measurements (a coincidence
means interference). Encode rounds carry one 2-bit code through the second
qubit, read by Bob with a Bell measurement.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from . import _kernels, qcore
from .adversary import AttackStrategy, EveState, NoAttack, Transit
from .messages import (
    Abort,
    AuthReveal,
    AuthVerdict,
    CheckAnnounce,
    CheckVerdict,
    PublicChannel,
    Receipt,
)
from .qcore import CODES, DECODE, EncodingOp, MeasBasis, Qubit

class ProtocolError(RuntimeError):
    """A party was driven through an illegal phase transition."""


# --------------------------------------------------------------------------
# shared quantum state of a round
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QubitRef:
    pair: int
    slot: Qubit


class Lab:
    """All qubits alive in one round, stored as independent two-qubit pairs.

    Pairs never interact coherently; an operation on two qubits from
    different pairs is only offered as a terminal Bell measurement, where the
    joint state is the product of the two marginals.
    """

    def __init__(self):
        self.pairs: list[Optional[np.ndarray]] = []

    def new_pair(self, state: np.ndarray) -> tuple[QubitRef, QubitRef]:
        self.pairs.append(qcore.as_density(state))
        idx = len(self.pairs) - 1
        return QubitRef(idx, Qubit.A), QubitRef(idx, Qubit.B)

    def _pair(self, ref: QubitRef) -> np.ndarray:
        rho = self.pairs[ref.pair]
        if rho is None:
            raise ProtocolError(f"qubit {ref} was already consumed")
        return rho

    def apply(self, ref: QubitRef, unitary: np.ndarray) -> None:
        self.pairs[ref.pair] = qcore.apply_to_qubit(unitary, ref.slot, self._pair(ref))

    def depolarize(self, ref: QubitRef, p: float) -> None:
        if p > 0.0:
            self.pairs[ref.pair] = qcore.depolarize(self._pair(ref), ref.slot, p)

    def measure(self, ref: QubitRef, basis: MeasBasis, rng: np.random.Generator) -> int:
        outcome, post = qcore.projective_measure(self._pair(ref), ref.slot, basis, rng)
        self.pairs[ref.pair] = post
        return outcome

    def joint(self, first: QubitRef, second: QubitRef) -> np.ndarray:
        """Density matrix of (first, second) with ``first`` as the leading factor."""
        if first.pair == second.pair:
            if first.slot == second.slot:
                raise ProtocolError("joint state of a qubit with itself")
            rho = self._pair(first)
            return rho if first.slot is Qubit.A else _kernels.swap(rho)
        return qcore.kron2(
            qcore.partial_trace(self._pair(first), first.slot),
            qcore.partial_trace(self._pair(second), second.slot),
        )

    def bell_measure(self, first: QubitRef, second: QubitRef, rng: np.random.Generator) -> qcore.BellKind:
        kind, post = qcore.bell_measure(self.joint(first, second), rng)
        if first.pair == second.pair:
            rho = qcore.density_from_pure(post)
            self.pairs[first.pair] = rho if first.slot is Qubit.A else _kernels.swap(rho)
        else:
            # Partner qubits elsewhere are never touched again this round.
            self.pairs[first.pair] = None
            self.pairs[second.pair] = None
        return kind


# --------------------------------------------------------------------------
# configuration, parties, records
# --------------------------------------------------------------------------


class RoundMode(enum.Enum):
    Encode = "encode"
    Check = "check"


@dataclass
class SessionConfig:
    """Protocol and channel parameters.

    ``rounds`` caps the EPR pairs spent per session. ``abort_threshold`` is the
    number of coincidences that stops the session; 0 disables aborting, which
    is only useful for measuring detection rates.
    """

    rounds: int = 10_000
    check_probability: float = 0.5
    basis_probability: float = 0.5
    receipt_enabled: bool = True
    auth_fraction: float = 0.1
    auth_threshold: float = 0.0
    abort_threshold: int = 1
    loss: float = 0.0
    depolarize: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("check_probability", "basis_probability", "auth_fraction",
                     "auth_threshold", "loss", "depolarize"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} must lie in [0, 1]")
        if self.rounds < 1:
            raise ValueError("rounds must be positive")
        if self.abort_threshold < 0:
            raise ValueError("abort_threshold must be nonnegative")


class AlicePhase(enum.Enum):
    Idle = "idle"
    AwaitReceipt = "await_receipt"
    DecidedEncode = "decided_encode"
    DecidedCheck = "decided_check"
    Done = "done"


class BobPhase(enum.Enum):
    AwaitFirst = "await_first"
    HoldingFirst = "holding_first"
    AwaitSecondOrCheck = "await_second_or_check"
    Done = "done"


@dataclass
class AliceState:
    pending: deque = field(default_factory=deque)
    phase: AlicePhase = AlicePhase.Idle
    retained: Optional[QubitRef] = None

    def _expect(self, *phases: AlicePhase) -> None:
        if self.phase not in phases:
            raise ProtocolError(f"Alice is {self.phase.value}, expected {[p.value for p in phases]}")

    def prepare(self, lab: Lab) -> QubitRef:
        self._expect(AlicePhase.Idle)
        self.retained, first = lab.new_pair(qcore.SINGLET_RHO)
        self.phase = AlicePhase.AwaitReceipt
        return first

    def decide(self, mode: RoundMode) -> None:
        self._expect(AlicePhase.AwaitReceipt)
        self.phase = AlicePhase.DecidedCheck if mode is RoundMode.Check else AlicePhase.DecidedEncode

    def check_measure(self, lab: Lab, basis: MeasBasis, rng) -> int:
        self._expect(AlicePhase.DecidedCheck)
        return lab.measure(self.retained, basis, rng)

    def encode(self, lab: Lab) -> tuple[str, QubitRef]:
        self._expect(AlicePhase.DecidedEncode)
        code = self.pending.popleft()
        lab.apply(self.retained, EncodingOp.from_code(code).matrix)
        return code, self.retained

    def end_round(self) -> None:
        self.phase = AlicePhase.Idle
        self.retained = None


@dataclass
class BobState:
    phase: BobPhase = BobPhase.AwaitFirst
    first: Optional[QubitRef] = None
    decoded: list[str] = field(default_factory=list)

    def _expect(self, *phases: BobPhase) -> None:
        if self.phase not in phases:
            raise ProtocolError(f"Bob is {self.phase.value}, expected {[p.value for p in phases]}")

    def receive_first(self, ref: QubitRef) -> None:
        self._expect(BobPhase.AwaitFirst)
        self.first = ref
        self.phase = BobPhase.HoldingFirst

    def send_receipt(self) -> Receipt:
        self._expect(BobPhase.HoldingFirst)
        self.phase = BobPhase.AwaitSecondOrCheck
        return Receipt()

    def check_measure(self, lab: Lab, basis: MeasBasis, rng) -> int:
        self._expect(BobPhase.AwaitSecondOrCheck, BobPhase.HoldingFirst)
        return lab.measure(self.first, basis, rng)

    def decode(self, lab: Lab, second: QubitRef, rng) -> str:
        self._expect(BobPhase.AwaitSecondOrCheck, BobPhase.HoldingFirst)
        code = DECODE[lab.bell_measure(second, self.first, rng)]
        self.decoded.append(code)
        self.phase = BobPhase.Done
        return code

    def end_round(self) -> None:
        self.phase = BobPhase.AwaitFirst
        self.first = None


@dataclass
class RoundRecord:
    """Outcome of one round; ``outcome`` is exactly one of encode, check, loss."""

    index: int
    outcome: str
    mode: Optional[RoundMode] = None
    true_code: Optional[str] = None
    sent_code: Optional[str] = None
    decoded_code: Optional[str] = None
    check_basis: Optional[MeasBasis] = None
    alice_outcome: Optional[int] = None
    bob_outcome: Optional[int] = None
    coincidence: bool = False
    lost: bool = False
    loss_stage: Optional[str] = None
    gamma: Optional[float] = None
    d_exact: Optional[float] = None
    eve_guess: Optional[str] = None
    eve_informed: bool = False
    eve_actions: tuple[str, ...] = ()
    events: tuple[str, ...] = ()


# --------------------------------------------------------------------------
# rounds and sessions
# --------------------------------------------------------------------------


def _transmit(ref: Optional[QubitRef], lab: Lab, config: SessionConfig, rng) -> Optional[QubitRef]:
    """Channel noise and loss on a qubit that left Eve's hands."""
    if ref is None:
        return None
    if config.loss > 0.0 and rng.random() < config.loss:
        return None
    lab.depolarize(ref, config.depolarize)
    return ref


def _singlet_stats(rho: np.ndarray) -> tuple[float, float]:
    phi_p, phi_m, psi_p, psi_m = qcore.bell_probabilities(rho)
    return 1.0 - psi_m, phi_p + 0.5 * (phi_m + psi_p)


def run_round(
    config: SessionConfig,
    alice: AliceState,
    bob: BobState,
    attack: AttackStrategy,
    rng: np.random.Generator,
    *,
    index: int = 0,
    eve: Optional[EveState] = None,
    channel: Optional[PublicChannel] = None,
) -> RoundRecord:
    eve = EveState() if eve is None else eve
    channel = PublicChannel() if channel is None else channel
    lab = Lab()
    events: list[str] = []
    rec = RoundRecord(index=index, outcome="loss", true_code=alice.pending[0] if alice.pending else None)

    def publish(sender: str, message) -> Optional[QubitRef]:
        channel.send(index, sender, message)
        events.append(f"{sender}:{type(message).__name__}")
        return attack.on_public_message(index, message, lab, eve, rng)

    # (1)-(2) singlet out, first qubit through Eve and the channel
    first = alice.prepare(lab)
    events.append("alice:prepare")
    delivered = attack.on_first_qubit(Transit(lab, first, index, eve), rng)
    delivered = _transmit(delivered, lab, config, rng)

    # (3) Bob acknowledges arrival
    if delivered is not None:
        bob.receive_first(delivered)
        events.append("bob:first-arrived")
        rec.gamma, rec.d_exact = _singlet_stats(lab.joint(alice.retained, delivered))
        if config.receipt_enabled:
            publish("bob", bob.send_receipt())

    def finish(outcome: str) -> RoundRecord:
        rec.outcome = outcome
        rec.lost = outcome == "loss"
        attack.finish_round(index, eve, rng)
        guess = eve.guesses[index]
        rec.eve_guess, rec.eve_informed = guess.code, guess.informed
        rec.eve_actions = tuple(eve.actions.get(index, ()))
        rec.events = tuple(events)
        alice.end_round()
        bob.end_round()
        return rec

    if config.receipt_enabled and delivered is None:
        events.append("alice:timeout")
        rec.loss_stage = "first"
        return finish("loss")

    # (4) mode decision, only after the receipt (or the fixed delay without one)
    mode = RoundMode.Check if rng.random() < config.check_probability else RoundMode.Encode
    alice.decide(mode)
    rec.mode = mode
    events.append(f"alice:decide-{mode.value}")

    if mode is RoundMode.Check:
        basis = MeasBasis.Bz if rng.random() < config.basis_probability else MeasBasis.Bx
        a_out = alice.check_measure(lab, basis, rng)
        rec.check_basis, rec.alice_outcome = basis, a_out
        late = publish("alice", CheckAnnounce(basis, a_out))
        if late is not None and bob.phase is BobPhase.AwaitFirst:
            late = _transmit(late, lab, config, rng)
            if late is not None:
                bob.receive_first(late)
                events.append("bob:first-arrived-late")
        if bob.phase is BobPhase.AwaitFirst:
            rec.loss_stage = "first"
            return finish("loss")
        b_out = bob.check_measure(lab, basis, rng)
        rec.bob_outcome = b_out
        rec.coincidence = a_out == b_out
        publish("bob", CheckVerdict(rec.coincidence))
        return finish("check")

    # (5e) encode and send the second qubit
    code, second = alice.encode(lab)
    rec.sent_code = code
    events.append("alice:encode")
    arriving = attack.on_second_qubit(Transit(lab, second, index, eve), rng)
    arriving = _transmit(arriving, lab, config, rng)
    if arriving is None or bob.phase is BobPhase.AwaitFirst:
        rec.loss_stage = "second" if bob.phase is not BobPhase.AwaitFirst else "first"
        return finish("loss")
    rec.decoded_code = bob.decode(lab, arriving, rng)
    events.append("bob:bell-decode")
    return finish("encode")


@dataclass
class AuthResult:
    passed: bool
    mismatch_rate: float
    sampled: int
    authenticated: bool


def authenticate_session(
    records: Sequence[RoundRecord],
    f: float,
    rng: np.random.Generator,
    threshold: float = 0.0,
    channel: Optional[PublicChannel] = None,
) -> AuthResult:
    """Alice reveals a random share ``f`` of the codes Bob decoded; Bob compares."""
    decoded = [r for r in records if r.outcome == "encode"]
    k = min(len(decoded), math.ceil(f * len(decoded)))
    if k == 0:
        return AuthResult(True, 0.0, 0, False)
    picks = sorted(rng.choice(len(decoded), size=k, replace=False).tolist())
    sample = [decoded[i] for i in picks]
    if channel is not None:
        channel.send(-1, "alice", AuthReveal(tuple(r.index for r in sample), tuple(r.sent_code for r in sample)))
    mismatch = sum(r.decoded_code != r.sent_code for r in sample) / k
    passed = mismatch <= threshold
    if channel is not None:
        channel.send(-1, "bob", AuthVerdict(passed))
    return AuthResult(passed, mismatch, k, True)


def auth_pass_probability(n_decoded: int, n_corrupted: int, f: float) -> float:
    """Chance a zero-threshold check misses every corrupted code (hypergeometric)."""
    k = min(n_decoded, math.ceil(f * n_decoded))
    clean = n_decoded - n_corrupted
    if k > clean:
        return 0.0
    return math.comb(clean, k) / math.comb(n_decoded, k)


@dataclass
class SessionStats:
    """Additive counters; merged stats are the field-wise sum."""

    sessions: int = 0
    rounds_attempted: int = 0
    losses: int = 0
    check_rounds: int = 0
    encode_rounds: int = 0
    coincidences: int = 0
    aborted_sessions: int = 0
    auth_failed_sessions: int = 0
    unauthenticated_sessions: int = 0
    auth_sampled: int = 0
    auth_mismatches: int = 0
    bob_decoded: int = 0
    bob_correct: int = 0
    codes_sent: int = 0
    eve_correct_sent: int = 0
    eve_correct_all: int = 0
    eve_informed: int = 0
    eve_informed_undetected: int = 0
    abort_cause: Optional[str] = None

    def __add__(self, other: "SessionStats") -> "SessionStats":
        out = SessionStats()
        for f in fields(self):
            if f.name == "abort_cause":
                continue
            setattr(out, f.name, getattr(self, f.name) + getattr(other, f.name))
        out.abort_cause = self.abort_cause or other.abort_cause
        return out

    @classmethod
    def from_records(cls, records: Sequence[RoundRecord]) -> "SessionStats":
        s = cls()
        s.rounds_attempted = len(records)
        for r in records:
            if r.outcome == "loss":
                s.losses += 1
            elif r.outcome == "check":
                s.check_rounds += 1
                s.coincidences += int(r.coincidence)
            else:
                s.encode_rounds += 1
                s.bob_decoded += 1
                s.bob_correct += int(r.decoded_code == r.sent_code)
            if r.sent_code is not None:
                s.codes_sent += 1
                s.eve_correct_sent += int(r.eve_guess == r.sent_code)
            if r.true_code is not None:
                s.eve_correct_all += int(r.eve_guess == r.true_code)
            if r.eve_informed:
                s.eve_informed += 1
        return s

    @property
    def aborted(self) -> bool:
        return self.aborted_sessions > 0

    @property
    def bob_decode_accuracy(self) -> float:
        return self.bob_correct / self.bob_decoded if self.bob_decoded else float("nan")

    @property
    def eve_decode_accuracy(self) -> float:
        """Eve's hit rate on codes that actually left Alice."""
        return self.eve_correct_sent / self.codes_sent if self.codes_sent else float("nan")

    @property
    def eve_accuracy_all_rounds(self) -> float:
        """Eve's hit rate against Alice's pending code in every round."""
        return self.eve_correct_all / self.rounds_attempted if self.rounds_attempted else float("nan")

    @property
    def empirical_detection_rate(self) -> float:
        return self.coincidences / self.check_rounds if self.check_rounds else float("nan")

    @property
    def auth_mismatch_rate(self) -> float:
        return self.auth_mismatches / self.auth_sampled if self.auth_sampled else 0.0

    def summary(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        for name in ("bob_decode_accuracy", "eve_decode_accuracy", "eve_accuracy_all_rounds",
                     "empirical_detection_rate", "auth_mismatch_rate"):
            out[name] = getattr(self, name)
        return out


@dataclass
class SessionResult:
    stats: SessionStats
    records: list[RoundRecord]
    eve: EveState
    channel: PublicChannel
    auth: Optional[AuthResult]


def run_session_detailed(
    config: SessionConfig,
    attack: Optional[AttackStrategy],
    message: Sequence[str],
    rng: Optional[np.random.Generator] = None,
) -> SessionResult:
    if not message:
        raise ValueError("message must contain at least one code")
    bad = [c for c in message if c not in CODES]
    if bad:
        raise ValueError(f"invalid codes in message: {bad[:3]}")
    attack = NoAttack() if attack is None else attack
    rng = np.random.default_rng(config.seed) if rng is None else rng
    alice, bob = AliceState(pending=deque(message)), BobState()
    eve, channel = EveState(), PublicChannel()
    records: list[RoundRecord] = []
    coincidences = 0
    aborted = False
    while alice.pending and len(records) < config.rounds:
        rec = run_round(config, alice, bob, attack, rng, index=len(records), eve=eve, channel=channel)
        records.append(rec)
        coincidences += int(rec.coincidence)
        if config.abort_threshold and coincidences >= config.abort_threshold:
            channel.send(rec.index, "alice", Abort("coincidence in check mode"))
            aborted = True
            break

    stats = SessionStats.from_records(records)
    stats.sessions = 1
    auth = None
    if aborted:
        stats.aborted_sessions = 1
        stats.abort_cause = "coincidence"
    else:
        auth = authenticate_session(records, config.auth_fraction, rng, config.auth_threshold, channel)
        stats.auth_sampled = auth.sampled
        stats.auth_mismatches = round(auth.mismatch_rate * auth.sampled)
        stats.auth_failed_sessions = int(not auth.passed)
        stats.unauthenticated_sessions = int(not auth.authenticated)
        stats.eve_informed_undetected = stats.eve_informed
    return SessionResult(stats, records, eve, channel, auth)


def run_session(
    config: SessionConfig,
    attack: Optional[AttackStrategy],
    message: Sequence[str],
    rng: Optional[np.random.Generator] = None,
) -> SessionStats:
    """Send ``message`` until done, aborted, or out of rounds; then authenticate."""
    return run_session_detailed(config, attack, message, rng).stats
