"""Independent brute-force checker for the detector-to-property problem.

Works directly with numpy on dense Kronecker products and does not use the
solver.  For a subset S of spin slots, a spatial projector R with
(1 (x) P_S) psi = (R (x) 1) psi exists iff span{phi_m : m in S} is orthogonal
to span{phi_m : m not in S}; every such R is the projector onto the first
span plus anything orthogonal to all phi_m.  Hence a triple admits three
mutually non-commuting solutions iff each pair of minimal projectors fails
to commute or at least two free directions remain.
"""
from __future__ import annotations

import itertools

import numpy as np

RANK_TOL = 1e-9
COS_TOL = 1e-8


def _basis(cols: list[np.ndarray]) -> np.ndarray:
    if not cols:
        return np.zeros((0, 0))
    A = np.column_stack(cols)
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    return U[:, s > RANK_TOL * max(s[0], 1.0)]


def components(psi: np.ndarray, n: int, d: int) -> np.ndarray:
    return psi.reshape(n, d)


def minimal_projector(phi: np.ndarray, mask: int) -> np.ndarray | None:
    """Projector onto the kept span, or None when the subset is infeasible."""
    n, d = phi.shape
    scale = np.linalg.norm(phi)
    active = [k for k in range(d) if np.linalg.norm(phi[:, k]) > 1e-10 * scale]
    Qin = _basis([phi[:, k] for k in active if mask >> k & 1])
    Qout = _basis([phi[:, k] for k in active if not mask >> k & 1])
    if Qin.size and Qout.size and np.linalg.norm(Qin.conj().T @ Qout, 2) > COS_TOL:
        return None
    return Qin @ Qin.conj().T if Qin.size else np.zeros((n, n))


def free_dim(phi: np.ndarray) -> int:
    n, d = phi.shape
    scale = np.linalg.norm(phi)
    return n - _basis([phi[:, k] for k in range(d)
                       if np.linalg.norm(phi[:, k]) > 1e-10 * scale]).shape[1]


def detection_residual(psi: np.ndarray, R: np.ndarray, mask: int, d: int) -> float:
    P = np.diag([float(mask >> k & 1) for k in range(d)])
    n = R.shape[0]
    lhs = np.kron(np.eye(n), P) @ psi
    rhs = np.kron(R, np.eye(d)) @ psi
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(psi))


def nontrivial_split(psi: np.ndarray, R: np.ndarray, d: int, thr: float) -> bool:
    n = R.shape[0]
    Rpsi = np.kron(R, np.eye(d)) @ psi
    nrm = np.linalg.norm(psi)
    return np.linalg.norm(Rpsi) / nrm > thr and np.linalg.norm(psi - Rpsi) / nrm > thr


def solvable_triples(psi: np.ndarray, n: int, d: int, require_incompatible: bool = True,
                     thr: float = 1e-6, abs_tol: float = 1e-10) -> set[tuple[int, int, int]]:
    phi = components(psi, n, d)
    f = free_dim(phi)
    props = {}
    for mask in range(1 << d):
        R = minimal_projector(phi, mask)
        if R is None:
            continue
        assert detection_residual(psi, R, mask, d) <= abs_tol
        if nontrivial_split(psi, R, d, thr):
            props[mask] = R
    out = set()
    for trip in itertools.product(props, repeat=3):
        if require_incompatible and f < 2:
            Rs = [props[m] for m in trip]
            if any(np.linalg.norm(A @ B - B @ A) <= thr
                   for A, B in itertools.combinations(Rs, 2)):
                continue
        out.add(trip)
    return out
