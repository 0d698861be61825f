"""Property checks run by ``stepsplit selftest``.

Each check returns a :class:`Check`. The encoding matrices and the log base
can be swapped out so the checks can be shown to catch broken inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bounds, qcore
from .qcore import BellKind, EncodingOp, MeasBasis, Qubit


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def outcome_table(state: np.ndarray, basis: MeasBasis) -> np.ndarray:
    """P(a, b) for measuring both qubits of a pure state in ``basis`` (plain kron algebra)."""
    table = np.zeros((2, 2))
    for a, ka in enumerate(basis.kets):
        for b, kb in enumerate(basis.kets):
            table[a, b] = abs(np.vdot(np.kron(ka, kb), state)) ** 2
    return table


def check_bell_table(matrices=None) -> Check:
    matrices = matrices or {op: op.matrix for op in EncodingOp}
    psi = qcore.singlet()
    worst = 0.0
    for op, m in matrices.items():
        out = np.kron(m, qcore.I2) @ psi
        target = qcore.bell_state(qcore.ENCODING_TARGET[op])
        worst = max(worst, abs(abs(np.vdot(target, out)) - 1.0))
    return Check("bell_encoding_table", worst <= 1e-12, f"max | |<t|U psi>| - 1 | = {worst:.3g}")


def check_dual_basis() -> Check:
    worst = max(
        abs(abs(np.vdot(qcore.bell_state(k), qcore.bell_state_pm(k))) - 1.0) for k in BellKind
    )
    return Check("dual_basis_expansions", worst <= 1e-12, f"max deviation {worst:.3g}")


def check_singlet_anticorrelation() -> Check:
    psi = qcore.singlet()
    worst = max(np.trace(outcome_table(psi, b)) for b in MeasBasis)
    return Check("singlet_anticorrelation", worst <= 1e-12, f"max same-outcome probability {worst:.3g}")


def check_correlation_table() -> Check:
    cases = [
        (BellKind.PhiPlus, MeasBasis.Bz),
        (BellKind.PhiMinus, MeasBasis.Bz),
        (BellKind.PsiPlus, MeasBasis.Bx),
    ]
    worst = max(abs(np.trace(outcome_table(qcore.bell_state(k), b)) - 1.0) for k, b in cases)
    return Check("correlation_table", worst <= 1e-12, f"max deviation from certain coincidence {worst:.3g}")


def check_partial_traces() -> Check:
    worst = 0.0
    for k in BellKind:
        rho = qcore.density_from_pure(qcore.bell_state(k))
        for q in Qubit:
            worst = max(worst, np.abs(qcore.partial_trace(rho, q) - qcore.I2 / 2).max())
    return Check("bell_marginals_maximally_mixed", worst <= 1e-12, f"max entry error {worst:.3g}")


def check_entropy_peak(log_base: float = 2.0) -> Check:
    s = qcore.von_neumann_entropy(bounds.max_entropy_state(0.75), base=log_base)
    closed = bounds.entropy_upper_bound(0.75, base=log_base)
    err = max(abs(s - 2.0), abs(closed - 2.0))
    return Check("entropy_at_gamma_three_quarters", err <= 1e-9, f"S = {s:.12g}, closed form = {closed:.12g}")


def check_entropy_dominance(n: int = 300, seed: int = 11) -> Check:
    rng = np.random.default_rng(seed)
    margins = [
        bounds.verify_entropy_dominance(qcore.random_density_matrix(rng, rank=int(rng.integers(1, 5)))).margin
        for _ in range(n)
    ]
    worst = min(margins)
    return Check("entropy_dominance", worst >= -1e-9, f"min margin over {n} states {worst:.3g}")


def check_detection_bound(n: int = 2000, seed: int = 12) -> Check:
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(n):
        rho = qcore.random_density_matrix(rng, rank=int(rng.integers(1, 5)))
        worst = min(worst, bounds.detection_exact(rho) - bounds.gamma_of(rho) / 2)
    return Check("detection_at_least_half_gamma", worst >= -1e-12, f"min d - gamma/2 = {worst:.3g}")


def check_holevo(matrices=None, log_base: float = 2.0) -> Check:
    mats = None if matrices is None else list(matrices.values())
    chi = bounds.encoding_holevo(qcore.singlet(), mats, base=log_base)
    rows, ok = bounds.holevo_monotonicity_grid(bounds.bell_diagonal_family(9), np.arange(1, 10) / 10)
    passed = abs(chi - 2.0) <= 1e-9 and ok
    return Check("holevo_singlet_and_monotonicity", passed, f"chi(singlet) = {chi:.12g}; grid {len(rows)} points monotone={ok}")


def run_selftest(matrices=None, log_base: float = 2.0) -> list[Check]:
    return [
        check_bell_table(matrices),
        check_dual_basis(),
        check_singlet_anticorrelation(),
        check_correlation_table(),
        check_partial_traces(),
        check_entropy_peak(log_base),
        check_entropy_dominance(),
        check_detection_bound(),
        check_holevo(matrices, log_base),
    ]
