"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``STEPSPLIT_NO_NUMBA=1`` to force the numpy implementations. The
eigensolver and Bell populations take stacks of shape ``(n, d, d)``; the
remaining kernels act on a single two-qubit density matrix. Both paths agree
to round-off.
"""
from __future__ import annotations

import os

import numpy as np

JACOBI_TOL = 1e-12
MAX_SWEEPS = 60

_DISABLED = os.environ.get("STEPSPLIT_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

_SQRT_HALF = np.sqrt(0.5)

# Rows: phi+, phi-, psi+, psi- in the computational basis |00>,|01>,|10>,|11>.
BELL_ROWS = np.array(
    [
        [_SQRT_HALF, 0.0, 0.0, _SQRT_HALF],
        [_SQRT_HALF, 0.0, 0.0, -_SQRT_HALF],
        [0.0, _SQRT_HALF, _SQRT_HALF, 0.0],
        [0.0, _SQRT_HALF, -_SQRT_HALF, 0.0],
    ],
    dtype=np.complex128,
)


# --------------------------------------------------------------------------
# numpy fallback
# --------------------------------------------------------------------------


def _offdiag_norm_np(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    mask = ~np.eye(n, dtype=bool)
    return np.sqrt(np.sum(np.abs(a[:, mask]) ** 2, axis=1))


def jacobi_eigh_numpy(stack: np.ndarray, tol: float = JACOBI_TOL):
    """Cyclic complex Jacobi, vectorised across the batch axis.

    Every matrix in the batch sees the same pivot order; matrices that have
    already converged get the identity rotation.
    """
    a = np.array(stack, dtype=np.complex128, copy=True)
    nb, n, _ = a.shape
    v = np.broadcast_to(np.eye(n, dtype=np.complex128), a.shape).copy()
    scale = np.maximum(1.0, np.sqrt(np.sum(np.abs(a) ** 2, axis=(1, 2))))
    rows = np.arange(nb)
    for _ in range(MAX_SWEEPS):
        active = _offdiag_norm_np(a) >= tol * scale
        if not active.any():
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = a[:, p, q]
                mag = np.abs(b)
                rot = active & (mag > 1e-300)
                if not rot.any():
                    continue
                safe = np.where(rot, mag, 1.0)
                phase = np.where(rot, b / safe, 1.0)  # e^{i theta}
                app = a[:, p, p].real
                aqq = a[:, q, q].real
                theta = (aqq - app) / (2.0 * safe)
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                t = np.where(theta == 0.0, 1.0, t)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                c = np.where(rot, c, 1.0)
                s = np.where(rot, s, 0.0)
                ph_conj = np.conj(phase)

                # columns: A <- A U
                col_p = a[:, :, p].copy()
                col_q = a[:, :, q].copy()
                a[:, :, p] = c[:, None] * col_p - (s * ph_conj)[:, None] * col_q
                a[:, :, q] = s[:, None] * col_p + (c * ph_conj)[:, None] * col_q
                # rows: A <- U^H A
                row_p = a[:, p, :].copy()
                row_q = a[:, q, :].copy()
                a[:, p, :] = c[:, None] * row_p - (s * phase)[:, None] * row_q
                a[:, q, :] = s[:, None] * row_p + (c * phase)[:, None] * row_q
                a[rows[rot], p, q] = 0.0
                a[rows[rot], q, p] = 0.0
                # eigenvectors: V <- V U
                vp = v[:, :, p].copy()
                vq = v[:, :, q].copy()
                v[:, :, p] = c[:, None] * vp - (s * ph_conj)[:, None] * vq
                v[:, :, q] = s[:, None] * vp + (c * ph_conj)[:, None] * vq
    w = np.real(np.diagonal(a, axis1=1, axis2=2)).copy()
    order = np.argsort(-w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return w, v


def bell_populations_numpy(stack: np.ndarray) -> np.ndarray:
    """<Bell_k|rho|Bell_k> for each rho in the stack, columns phi+, phi-, psi+, psi-."""
    pops = np.einsum("ki,nij,kj->nk", BELL_ROWS.conj(), stack, BELL_ROWS, optimize=True)
    return pops.real


def apply_1q_numpy(rho, u, slot):
    t = rho.reshape(2, 2, 2, 2)
    if slot == 0:
        t = np.einsum("ai,ijkl,bk->ajbl", u, t, u.conj())
    else:
        t = np.einsum("aj,ijkl,bl->iakb", u, t, u.conj())
    return t.reshape(4, 4)


def ptrace_numpy(rho, keep):
    t = rho.reshape(2, 2, 2, 2)
    return np.einsum("ijkj->ik", t) if keep == 0 else np.einsum("jijk->ik", t)


def kron2_numpy(a, b):
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(4, 4)


def depolarize_numpy(rho, slot, p):
    half = np.eye(2, dtype=np.complex128) / 2
    other = ptrace_numpy(rho, 1 - slot)
    mixed = kron2_numpy(half, other) if slot == 0 else kron2_numpy(other, half)
    return (1.0 - p) * rho + p * mixed


def project_numpy(rho, proj, slot):
    """Probability of a one-qubit projector and the normalised post state."""
    eye = np.eye(2, dtype=np.complex128)
    full = kron2_numpy(proj, eye) if slot == 0 else kron2_numpy(eye, proj)
    post = full @ rho @ full
    prob = np.trace(post).real
    if prob > 0.0:
        post = post / prob
    return max(prob, 0.0), post


def bell_probs_numpy(rho):
    return ((BELL_ROWS.conj() @ rho) * BELL_ROWS).sum(axis=1).real


def swap_numpy(rho):
    return rho.reshape(2, 2, 2, 2).transpose(1, 0, 3, 2).reshape(4, 4).copy()


# --------------------------------------------------------------------------
# numba
# --------------------------------------------------------------------------


def _jacobi_eigh_loops(stack, tol):
    nb, n, _ = stack.shape
    w_out = np.empty((nb, n))
    v_out = np.empty((nb, n, n), dtype=np.complex128)
    for m in range(nb):
        a = stack[m].copy()
        v = np.eye(n, dtype=np.complex128)
        scale = 0.0
        for i in range(n):
            for j in range(n):
                scale += abs(a[i, j]) ** 2
        scale = max(1.0, np.sqrt(scale))
        for _sweep in range(MAX_SWEEPS):
            off = 0.0
            for i in range(n):
                for j in range(n):
                    if i != j:
                        off += abs(a[i, j]) ** 2
            if np.sqrt(off) < tol * scale:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    b = a[p, q]
                    mag = abs(b)
                    if mag <= 1e-300:
                        continue
                    phase = b / mag
                    ph_conj = phase.conjugate()
                    theta = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                    if theta == 0.0:
                        t = 1.0
                    else:
                        t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    c = 1.0 / np.sqrt(t * t + 1.0)
                    s = t * c
                    for k in range(n):
                        akp = a[k, p]
                        akq = a[k, q]
                        a[k, p] = c * akp - s * ph_conj * akq
                        a[k, q] = s * akp + c * ph_conj * akq
                    for k in range(n):
                        apk = a[p, k]
                        aqk = a[q, k]
                        a[p, k] = c * apk - s * phase * aqk
                        a[q, k] = s * apk + c * phase * aqk
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for k in range(n):
                        vkp = v[k, p]
                        vkq = v[k, q]
                        v[k, p] = c * vkp - s * ph_conj * vkq
                        v[k, q] = s * vkp + c * ph_conj * vkq
        w = np.empty(n)
        for i in range(n):
            w[i] = a[i, i].real
        order = np.argsort(-w, kind="mergesort")
        for i in range(n):
            w_out[m, i] = w[order[i]]
            for k in range(n):
                v_out[m, k, i] = v[k, order[i]]
    return w_out, v_out


def _bell_populations_loops(stack, bell):
    nb = stack.shape[0]
    out = np.empty((nb, 4))
    for m in range(nb):
        for k in range(4):
            acc = 0.0 + 0.0j
            for i in range(4):
                bi = bell[k, i].conjugate()
                if bi == 0:
                    continue
                for j in range(4):
                    acc += bi * stack[m, i, j] * bell[k, j]
            out[m, k] = acc.real
    return out


def _apply_1q_loops(rho, u, slot):
    out = np.zeros((4, 4), dtype=np.complex128)
    full = np.zeros((4, 4), dtype=np.complex128)
    for a in range(2):
        for b in range(2):
            for i in range(2):
                if slot == 0:
                    full[2 * a + i, 2 * b + i] = u[a, b]
                else:
                    full[2 * i + a, 2 * i + b] = u[a, b]
    tmp = np.zeros((4, 4), dtype=np.complex128)
    for i in range(4):
        for k in range(4):
            f = full[i, k]
            if f != 0:
                for j in range(4):
                    tmp[i, j] += f * rho[k, j]
    for i in range(4):
        for j in range(4):
            acc = 0j
            for k in range(4):
                acc += tmp[i, k] * full[j, k].conjugate()
            out[i, j] = acc
    return out


def _ptrace_loops(rho, keep):
    out = np.zeros((2, 2), dtype=np.complex128)
    for i in range(2):
        for k in range(2):
            for j in range(2):
                if keep == 0:
                    out[i, k] += rho[2 * i + j, 2 * k + j]
                else:
                    out[i, k] += rho[2 * j + i, 2 * j + k]
    return out


def _kron2_loops(a, b):
    out = np.empty((4, 4), dtype=np.complex128)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    out[2 * i + k, 2 * j + l] = a[i, j] * b[k, l]
    return out


def _depolarize_loops(rho, slot, p):
    # marginal of the untouched qubit
    other = np.zeros((2, 2), dtype=np.complex128)
    for i in range(2):
        for k in range(2):
            for j in range(2):
                if slot == 1:
                    other[i, k] += rho[2 * i + j, 2 * k + j]
                else:
                    other[i, k] += rho[2 * j + i, 2 * j + k]
    out = np.empty((4, 4), dtype=np.complex128)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    if slot == 0:
                        m = (0.5 if i == j else 0.0) * other[k, l]
                    else:
                        m = other[i, j] * (0.5 if k == l else 0.0)
                    r = 2 * i + k
                    c = 2 * j + l
                    out[r, c] = (1.0 - p) * rho[r, c] + p * m
    return out


def _project_loops(rho, proj, slot):
    full = np.zeros((4, 4), dtype=np.complex128)
    for a in range(2):
        for b in range(2):
            for i in range(2):
                if slot == 0:
                    full[2 * a + i, 2 * b + i] = proj[a, b]
                else:
                    full[2 * i + a, 2 * i + b] = proj[a, b]
    post = full @ rho @ full
    prob = 0.0
    for i in range(4):
        prob += post[i, i].real
    if prob > 0.0:
        post = post / prob
    return max(prob, 0.0), post


def _bell_probs_loops(rho, bell):
    out = np.empty(4)
    for k in range(4):
        acc = 0j
        for i in range(4):
            bi = bell[k, i].conjugate()
            if bi == 0:
                continue
            for j in range(4):
                acc += bi * rho[i, j] * bell[k, j]
        out[k] = acc.real
    return out


def _swap_loops(rho):
    out = np.empty((4, 4), dtype=np.complex128)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    out[2 * i + j, 2 * k + l] = rho[2 * j + i, 2 * l + k]
    return out


if HAVE_NUMBA:
    _jit = njit(cache=True)
    _jacobi_eigh_nb = _jit(_jacobi_eigh_loops)
    _bell_populations_nb = _jit(_bell_populations_loops)
    apply_1q_numba = _jit(_apply_1q_loops)
    ptrace_numba = _jit(_ptrace_loops)
    kron2_numba = _jit(_kron2_loops)
    depolarize_numba = _jit(_depolarize_loops)
    project_numba = _jit(_project_loops)
    _bell_probs_nb = _jit(_bell_probs_loops)
    swap_numba = _jit(_swap_loops)

    def jacobi_eigh_numba(stack: np.ndarray, tol: float = JACOBI_TOL):
        return _jacobi_eigh_nb(np.ascontiguousarray(stack, dtype=np.complex128), tol)

    def bell_populations_numba(stack: np.ndarray) -> np.ndarray:
        return _bell_populations_nb(np.ascontiguousarray(stack, dtype=np.complex128), BELL_ROWS)

    def bell_probs_numba(rho):
        return _bell_probs_nb(rho, BELL_ROWS)

    BACKEND = "numba"
else:
    BACKEND = "numpy"

_NAMES = ("jacobi_eigh", "bell_populations", "apply_1q", "ptrace", "kron2",
          "depolarize", "project", "bell_probs", "swap")


def implementations(backend: str) -> dict:
    """Kernel table for ``"numba"`` or ``"numpy"``."""
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not available")
    g = globals()
    return {name: g[f"{name}_{backend}"] for name in _NAMES}


globals().update(implementations(BACKEND))
