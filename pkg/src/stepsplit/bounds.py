"""Closed-form security quantities and their checks against exact states.

``gamma`` is the singlet infidelity 1 - <psi-|rho|psi->. The maximum-entropy
state at a given gamma is Bell-diagonal with weights (1-gamma, gamma/3,
gamma/3, gamma/3); its entropy bounds what Eve can learn.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Iterable, Optional

import numpy as np

from . import qcore
from .qcore import BellKind


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not (0.0 <= gamma <= 1.0) or math.isnan(gamma):
        raise ValueError(f"gamma={gamma} outside [0, 1]")
    return gamma


def entropy_upper_bound(gamma: float, base: float = 2.0) -> float:
    """Entropy of the maximum-entropy state with singlet weight 1 - gamma.

    Not monotone on [0, 1]: it peaks at 2 bits for gamma = 3/4 and falls back
    to log2(3) at gamma = 1.
    """
    gamma = _check_gamma(gamma)
    out = 0.0
    if gamma < 1.0:
        out -= (1.0 - gamma) * math.log1p(-gamma)
    if gamma > 0.0:
        # split the log so subnormal gamma cannot underflow to log(0)
        out -= gamma * (math.log(gamma) - math.log(3.0))
    return out / math.log(base)


def detection_lower_bound(gamma: float) -> float:
    return _check_gamma(gamma) / 2.0


def max_entropy_state(gamma: float) -> np.ndarray:
    """Bell-diagonal state with weight 1 - gamma on the singlet, the rest spread evenly."""
    gamma = _check_gamma(gamma)
    w = gamma / 3.0
    return qcore.bell_diagonal([w, w, w, 1.0 - gamma])


def detection_exact(rho: np.ndarray) -> float:
    """Coincidence probability of a check round with a uniformly random basis.

    Same-basis coincidences project onto span{phi+, phi-} for Bz and onto
    span{phi+, psi+} for Bx.
    """
    p = qcore.bell_probabilities(rho)
    return float(
        p[BellKind.PhiPlus.value] + 0.5 * (p[BellKind.PhiMinus.value] + p[BellKind.PsiPlus.value])
    )


def gamma_of(rho: np.ndarray) -> float:
    return qcore.singlet_gamma(rho)


@dataclass
class DominanceResult:
    holds: bool
    margin: float
    gamma: float
    entropy: float
    bound: float


def verify_entropy_dominance(rho: np.ndarray, tol: float = 1e-9) -> DominanceResult:
    gamma = min(max(gamma_of(rho), 0.0), 1.0)
    s = qcore.von_neumann_entropy(rho)
    bound = entropy_upper_bound(gamma)
    margin = bound - s
    return DominanceResult(margin >= -tol, margin, gamma, s, bound)


@dataclass
class GammaPoint:
    gamma: float
    s_max_bits: float
    d_lower: float
    d_exact: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


def bound_sweep(grid: Iterable[float]) -> list[GammaPoint]:
    """One row per gamma. ``d_exact`` is evaluated on the maximum-entropy state,
    which is exactly the one-sided depolarized singlet for gamma <= 3/4."""
    rows = []
    for g in grid:
        g = _check_gamma(g)
        rows.append(
            GammaPoint(
                gamma=g,
                s_max_bits=entropy_upper_bound(g),
                d_lower=detection_lower_bound(g),
                d_exact=detection_exact(max_entropy_state(g)),
            )
        )
    return rows


def parse_grid(spec: str) -> np.ndarray:
    """``"start:stop:step"`` with an inclusive stop, e.g. ``"0:1:0.25"`` -> 5 points."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid {spec!r} must look like start:stop:step")
    try:
        start, stop, step = (float(x) for x in parts)
    except ValueError as exc:
        raise ValueError(f"grid {spec!r} has a non-numeric field") from exc
    if step <= 0 or stop < start:
        raise ValueError(f"grid {spec!r} needs step > 0 and stop >= start")
    if start < 0 or stop > 1:
        raise ValueError(f"grid {spec!r} must stay inside [0, 1]")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 12)


def encoding_holevo(rho: np.ndarray, matrices=None, base: float = 2.0) -> float:
    """Holevo quantity of the four equiprobable encodings applied to ``rho``."""
    return qcore.holevo(qcore.encoding_ensemble(rho, matrices), base=base)


def holevo_monotonicity_grid(family: Iterable[np.ndarray], ps: Iterable[float], tol: float = 1e-9):
    """(chi before, chi after) for each state and depolarizing strength on qubit B.

    Returns the rows and whether chi never increased beyond ``tol``.
    """
    rows = []
    ok = True
    ps = list(ps)
    for i, rho in enumerate(family):
        before = encoding_holevo(rho)
        for p in ps:
            after = encoding_holevo(qcore.depolarize(rho, qcore.Qubit.B, p))
            ok &= after <= before + tol
            rows.append((i, p, before, after))
    return rows, ok


def bell_diagonal_family(n: int = 9) -> list[np.ndarray]:
    """Fixed Bell-diagonal states used for the monotonicity grid.

    Mixes the maximum-entropy line with skewed populations so the grid is
    not confined to one symmetry class.
    """
    rng = np.random.default_rng(20040312)
    states = []
    for k in range(n):
        if k % 2 == 0:
            states.append(max_entropy_state(0.1 * (k + 1)))
        else:
            states.append(qcore.bell_diagonal(rng.dirichlet(np.ones(4) * 0.7)))
    return states
