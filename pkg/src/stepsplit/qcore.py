"""Exact one- and two-qubit quantum mechanics.

States are plain numpy arrays: a pure two-qubit state is a length-4 complex
vector ordered |00>,|01>,|10>,|11>, a mixed state is a 4x4 density matrix.
The first tensor factor is qubit A (Alice's retained qubit, the one she
encodes), the second is qubit B (the qubit sent first).
"""
from __future__ import annotations

import enum
from typing import Sequence

import numpy as np

from . import _kernels

ATOL = 1e-12
PSD_TOL = 1e-10
ZERO_PROB = 1e-14

_S = np.sqrt(0.5)

KET0 = np.array([1.0, 0.0], dtype=np.complex128)
KET1 = np.array([0.0, 1.0], dtype=np.complex128)
KET_PLUS = np.array([_S, _S], dtype=np.complex128)
KET_MINUS = np.array([_S, -_S], dtype=np.complex128)

I2 = np.eye(2, dtype=np.complex128)


class Qubit(enum.Enum):
    A = 0
    B = 1


class BellKind(enum.Enum):
    PhiPlus = 0
    PhiMinus = 1
    PsiPlus = 2
    PsiMinus = 3


class MeasBasis(enum.Enum):
    Bz = "Bz"
    Bx = "Bx"

    @property
    def kets(self) -> tuple[np.ndarray, np.ndarray]:
        if self is MeasBasis.Bz:
            return KET0, KET1
        return KET_PLUS, KET_MINUS


class EncodingOp(enum.Enum):
    U00 = "00"
    U01 = "01"
    U10 = "10"
    U11 = "11"

    @property
    def code(self) -> str:
        return self.value

    @property
    def matrix(self) -> np.ndarray:
        return _ENCODING_MATRICES[self].copy()

    @classmethod
    def from_code(cls, code: str) -> "EncodingOp":
        return cls(code)


_ENCODING_MATRICES = {
    EncodingOp.U00: np.array([[1, 0], [0, 1]], dtype=np.complex128),
    EncodingOp.U01: np.array([[1, 0], [0, -1]], dtype=np.complex128),
    EncodingOp.U10: np.array([[0, 1], [1, 0]], dtype=np.complex128),
    EncodingOp.U11: np.array([[0, 1], [-1, 0]], dtype=np.complex128),
}

# Bell state each encoding produces from the singlet; Bob inverts this to decode.
ENCODING_TARGET = {
    EncodingOp.U00: BellKind.PsiMinus,
    EncodingOp.U01: BellKind.PsiPlus,
    EncodingOp.U10: BellKind.PhiMinus,
    EncodingOp.U11: BellKind.PhiPlus,
}
DECODE = {kind: op.code for op, kind in ENCODING_TARGET.items()}

CODES = ("00", "01", "10", "11")


def bell_state(kind: BellKind) -> np.ndarray:
    """Bell state from its computational-basis expansion."""
    return _kernels.BELL_ROWS[kind.value].copy()


def bell_state_pm(kind: BellKind) -> np.ndarray:
    """Bell state written in the |+>,|-> product basis.

    Used as a cross-check of :func:`bell_state`; the singlet line differs by a
    global phase of -1.
    """
    pp = np.kron(KET_PLUS, KET_PLUS)
    pm = np.kron(KET_PLUS, KET_MINUS)
    mp = np.kron(KET_MINUS, KET_PLUS)
    mm = np.kron(KET_MINUS, KET_MINUS)
    table = {
        BellKind.PhiPlus: pp + mm,
        BellKind.PhiMinus: pm + mp,
        BellKind.PsiPlus: pp - mm,
        BellKind.PsiMinus: pm - mp,
    }
    return _S * table[kind]


def singlet() -> np.ndarray:
    return bell_state(BellKind.PsiMinus)


SINGLET_RHO = np.outer(_kernels.BELL_ROWS[3], _kernels.BELL_ROWS[3].conj())
SINGLET_RHO.flags.writeable = False


def product_state(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def is_pure(state: np.ndarray) -> bool:
    return state.ndim == 1


def validate_state(state: np.ndarray) -> None:
    """Raise ``ValueError`` if ``state`` is not a valid vector or density matrix."""
    state = np.asarray(state)
    if state.ndim == 1:
        if abs(np.vdot(state, state).real - 1.0) > ATOL:
            raise ValueError("state vector is not normalised")
        return
    if state.ndim != 2 or state.shape[0] != state.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {state.shape}")
    if np.abs(state - state.conj().T).max() > ATOL:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(state).real - 1.0) > ATOL:
        raise ValueError("density matrix trace is not 1")
    if eig_hermitian(state)[-1] < -PSD_TOL:
        raise ValueError("density matrix is not positive semidefinite")


def same_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = ATOL) -> bool:
    return abs(abs(np.vdot(a, b)) - 1.0) <= atol


def _c128(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.complex128)


def kron2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two 2x2 matrices."""
    return _kernels.kron2(_c128(a), _c128(b))


def lift(op: np.ndarray, which: Qubit) -> np.ndarray:
    """Embed a single-qubit operator into the two-qubit space."""
    return kron2(op, I2) if which is Qubit.A else kron2(I2, op)


def apply_to_qubit(op, which: Qubit, state: np.ndarray) -> np.ndarray:
    """Apply a single-qubit unitary (an :class:`EncodingOp` or a 2x2 matrix)."""
    mat = op.matrix if isinstance(op, EncodingOp) else _c128(op)
    if is_pure(state):
        return lift(mat, which) @ state
    return _kernels.apply_1q(_c128(state), mat, which.value)


def density_from_pure(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=np.complex128)
    return np.outer(state, state.conj())


def as_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state)
    return density_from_pure(state) if state.ndim == 1 else _c128(state)


def partial_trace(rho: np.ndarray, keep: Qubit) -> np.ndarray:
    """Reduced 2x2 state of the kept qubit."""
    return _kernels.ptrace(as_density(rho), keep.value)


def _other(which: Qubit) -> Qubit:
    return Qubit.B if which is Qubit.A else Qubit.A


_KET_PROJECTORS = {
    basis: tuple(np.outer(k, k.conj()) for k in basis.kets) for basis in MeasBasis
}


def sample_index(probs, rng: np.random.Generator) -> int:
    """Draw an index with the given probabilities; zero entries are never drawn."""
    probs = [float(p) for p in probs]
    u = rng.random() * sum(probs)
    last = 0
    acc = 0.0
    for i, p in enumerate(probs):
        if p <= 0.0:
            continue
        acc += p
        last = i
        if u < acc:
            return i
    return last


def _clean_binary(p0: float) -> list[float]:
    p0 = min(max(p0, 0.0), 1.0)
    probs = [p0, 1.0 - p0]
    return [0.0 if p < ZERO_PROB else p for p in probs]


def outcome_probabilities(state: np.ndarray, which: Qubit, basis: MeasBasis) -> np.ndarray:
    p0, _ = _kernels.project(as_density(state), _KET_PROJECTORS[basis][0], which.value)
    probs = np.array(_clean_binary(p0))
    return probs / probs.sum()


def projective_measure(state: np.ndarray, which: Qubit, basis: MeasBasis, rng: np.random.Generator):
    """Born-rule measurement of one qubit; returns ``(outcome_bit, post_state)``.

    The post-measurement state keeps the representation of the input (vector
    in, vector out).
    """
    if is_pure(state):
        probs = outcome_probabilities(state, which, basis)
        outcome = sample_index(probs, rng)
        post = lift(_KET_PROJECTORS[basis][outcome], which) @ state
        return outcome, post / np.linalg.norm(post)
    rho = _c128(state)
    projs = _KET_PROJECTORS[basis]
    p0, post = _kernels.project(rho, projs[0], which.value)
    outcome = sample_index(_clean_binary(p0), rng)
    if outcome == 1:
        _, post = _kernels.project(rho, projs[1], which.value)
    return outcome, post


def bell_probabilities(state: np.ndarray) -> np.ndarray:
    """Born probabilities of the four Bell outcomes, ordered as :class:`BellKind`."""
    probs = _kernels.bell_probs(as_density(state))
    probs = np.where(probs < ZERO_PROB, 0.0, probs)
    return probs / probs.sum()


def bell_measure(state: np.ndarray, rng: np.random.Generator):
    probs = bell_probabilities(state)
    kind = BellKind(sample_index(probs, rng))
    return kind, bell_state(kind)


def fidelity(target: np.ndarray, rho: np.ndarray) -> float:
    """sqrt(<target|rho|target>) for a pure target."""
    rho = as_density(rho)
    overlap = np.vdot(target, rho @ target).real
    return float(np.sqrt(min(max(overlap, 0.0), 1.0)))


def singlet_gamma(rho: np.ndarray) -> float:
    """1 - <psi-|rho|psi->, the departure from the ideal singlet."""
    return 1.0 - fidelity(singlet(), rho) ** 2


def eig_hermitian_with_vectors(m: np.ndarray):
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if np.abs(m - m.conj().T).max() > PSD_TOL:
        raise ValueError("matrix is not Hermitian")
    w, v = _kernels.jacobi_eigh(m[None])
    return w[0], v[0]


def eig_hermitian(m: np.ndarray) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix in descending order (Jacobi)."""
    return eig_hermitian_with_vectors(m)[0]


def _entropy_from_eigs(w: np.ndarray, base: float = 2.0) -> np.ndarray:
    w = np.clip(np.asarray(w, dtype=float), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0.0, -w * np.log(w), 0.0)
    return terms.sum(axis=-1) / np.log(base)


def von_neumann_entropy(rho: np.ndarray, base: float = 2.0) -> float:
    """-sum(l log l) over the spectrum; bits by default."""
    return float(max(_entropy_from_eigs(eig_hermitian(as_density(rho)), base), 0.0))


def entropies(stack: np.ndarray, base: float = 2.0) -> np.ndarray:
    """Von Neumann entropy of every matrix in a ``(n, d, d)`` stack."""
    w, _ = _kernels.jacobi_eigh(np.asarray(stack, dtype=np.complex128))
    return np.maximum(_entropy_from_eigs(w, base), 0.0)


def holevo(ensemble: Sequence[tuple[float, np.ndarray]], base: float = 2.0) -> float:
    """S(sum p_i rho_i) - sum p_i S(rho_i)."""
    probs = np.array([p for p, _ in ensemble], dtype=float)
    if (probs < 0).any() or abs(probs.sum() - 1.0) > ATOL:
        raise ValueError("ensemble probabilities must be nonnegative and sum to 1")
    mats = np.stack([as_density(r) for _, r in ensemble])
    mixture = np.tensordot(probs, mats, axes=1)
    ent = entropies(np.concatenate([mixture[None], mats]), base)
    return float(ent[0] - probs @ ent[1:])


def encoding_ensemble(rho: np.ndarray, matrices=None) -> list[tuple[float, np.ndarray]]:
    """The four equiprobable encodings applied to qubit A of ``rho``."""
    if matrices is None:
        matrices = [op.matrix for op in EncodingOp]
    rho = as_density(rho)
    return [(1.0 / len(matrices), apply_to_qubit(m, Qubit.A, rho)) for m in matrices]


def depolarize(rho: np.ndarray, which: Qubit, p: float) -> np.ndarray:
    """(1-p) rho + p (I/2 on ``which``, tensored with the other qubit's marginal)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing probability {p} outside [0, 1]")
    return _kernels.depolarize(as_density(rho), which.value, float(p))


def random_density_matrix(rng: np.random.Generator, dim: int = 4, rank: int | None = None) -> np.ndarray:
    """Ginibre-distributed density matrix (full rank unless ``rank`` is given)."""
    k = dim if rank is None else rank
    g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def bell_diagonal(populations: Sequence[float]) -> np.ndarray:
    """Mixture of Bell projectors weighted in :class:`BellKind` order."""
    rows = _kernels.BELL_ROWS
    return sum(w * np.outer(rows[k], rows[k].conj()) for k, w in enumerate(populations))
