"""Dense complex linear algebra on small Hilbert spaces.

Operators and state vectors are thin immutable wrappers around numpy arrays
carrying a space tag (``spatial``, ``spin`` or ``composite``).  Composite
objects also remember their factor dimensions so that partial structure
(``1 (x) X``) can be checked.  The Kronecker convention is spatial-major: the
spatial index is the slow (outer) index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SPACES = ("spatial", "spin", "composite")


class ContractError(ValueError):
    """Raised when operands violate a dimension or space-tag contract."""


class NotHermitianError(ContractError):
    def __init__(self, asymmetry: float):
        super().__init__(f"operator is not Hermitian (||A - A^H||_F = {asymmetry:.3e})")
        self.asymmetry = asymmetry


class NotOrthonormalError(ContractError):
    def __init__(self, gram_defect: float):
        super().__init__(
            f"vectors are not orthonormal (||Gram - I||_F = {gram_defect:.3e})"
        )
        self.gram_defect = gram_defect


class RankDeficientError(ContractError):
    def __init__(self, index: int):
        super().__init__(f"vector {index} is linearly dependent on its predecessors")
        self.index = index


@dataclass(frozen=True)
class ToleranceConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    audit_warn_tol: float = 1e-6

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol", "audit_warn_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.abs_tol > self.audit_warn_tol:
            raise ValueError("abs_tol must not exceed audit_warn_tol")

    def as_dict(self) -> dict[str, float]:
        return {
            "abs_tol": self.abs_tol,
            "rel_tol": self.rel_tol,
            "audit_warn_tol": self.audit_warn_tol,
        }


DEFAULT_TOL = ToleranceConfig()


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=complex)
    out.setflags(write=False)
    return out


def _check_space(space: str) -> None:
    if space not in SPACES:
        raise ContractError(f"unknown space tag {space!r}")


@dataclass(frozen=True, eq=False)
class StateVector:
    data: np.ndarray
    space: str = "spatial"
    factors: tuple[int, int] | None = None

    def __post_init__(self):
        _check_space(self.space)
        object.__setattr__(self, "data", _frozen(self.data))
        if self.data.ndim != 1 or self.data.size == 0:
            raise ContractError("state vector entries must be a non-empty 1-d array")
        if self.space == "composite" and self.factors is not None:
            if self.factors[0] * self.factors[1] != self.data.size:
                raise ContractError("factor dimensions do not match vector length")

    @property
    def dim(self) -> int:
        return self.data.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def is_unit(self, tol: float = DEFAULT_TOL.abs_tol) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def inner(self, other: StateVector) -> complex:
        """<self|other>, antilinear in ``self``."""
        _same_shape(self, other)
        return complex(np.vdot(self.data, other.data))

    def _like(self, data) -> StateVector:
        return StateVector(data, self.space, self.factors)

    def __add__(self, other: StateVector) -> StateVector:
        _same_shape(self, other)
        return self._like(self.data + other.data)

    def __sub__(self, other: StateVector) -> StateVector:
        _same_shape(self, other)
        return self._like(self.data - other.data)

    def __neg__(self) -> StateVector:
        return self._like(-self.data)

    def __mul__(self, c: complex) -> StateVector:
        return self._like(c * self.data)

    __rmul__ = __mul__

    def __truediv__(self, c: complex) -> StateVector:
        return self._like(self.data / c)

    def __repr__(self) -> str:
        return f"StateVector(dim={self.dim}, space={self.space!r})"


@dataclass(frozen=True, eq=False)
class Operator:
    data: np.ndarray
    space: str = "spatial"
    factors: tuple[int, int] | None = None
    label: str = field(default="", compare=False)
    # (spatial, spin) factor arrays when built by tensor(); enables exact
    # shortcuts for norms of commutators and products
    kron: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        _check_space(self.space)
        object.__setattr__(self, "data", _frozen(self.data))
        if self.data.ndim != 2 or self.data.shape[0] != self.data.shape[1]:
            raise ContractError("operator entries must be a square 2-d array")
        if self.data.shape[0] == 0:
            raise ContractError("operator dimension must be positive")
        if self.space == "composite" and self.factors is not None:
            if self.factors[0] * self.factors[1] != self.data.shape[0]:
                raise ContractError("factor dimensions do not match operator size")

    @classmethod
    def identity(cls, dim: int, space: str = "spatial", factors=None) -> Operator:
        return cls(np.eye(dim), space, factors)

    @classmethod
    def zero(cls, dim: int, space: str = "spatial", factors=None) -> Operator:
        return cls(np.zeros((dim, dim)), space, factors)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.data))

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def hermitian_defect(self) -> float:
        return float(np.linalg.norm(self.data - self.data.conj().T))

    def idempotency_defect(self) -> float:
        return float(np.linalg.norm(self.data @ self.data - self.data))

    def is_hermitian(self, tol: float = DEFAULT_TOL.abs_tol) -> bool:
        return self.hermitian_defect() <= tol

    def is_projector(self, tol: float = DEFAULT_TOL.abs_tol) -> bool:
        return self.hermitian_defect() <= tol and self.idempotency_defect() <= tol

    def rank(self, tol: float = 1e-8) -> int:
        return int(np.linalg.matrix_rank(self.data, tol=tol))

    def apply(self, v: StateVector) -> StateVector:
        if v.dim != self.dim or v.space != self.space:
            raise ContractError(
                f"cannot apply {self.space} operator of dim {self.dim} "
                f"to {v.space} vector of dim {v.dim}"
            )
        if self.kron is not None:
            A, B = self.kron
            out = A @ v.data.reshape(A.shape[0], B.shape[0]) @ B.T
            return StateVector(out.reshape(-1), self.space, self.factors)
        return StateVector(self.data @ v.data, self.space, self.factors or v.factors)

    def _like(self, data) -> Operator:
        return Operator(data, self.space, self.factors)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return self.apply(other)
        return matmul(self, other)

    def __add__(self, other: Operator) -> Operator:
        _same_shape(self, other)
        return self._like(self.data + other.data)

    def __sub__(self, other: Operator) -> Operator:
        _same_shape(self, other)
        return self._like(self.data - other.data)

    def __neg__(self) -> Operator:
        return self._like(-self.data)

    def __mul__(self, c: complex) -> Operator:
        return self._like(c * self.data)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        name = f" {self.label!r}" if self.label else ""
        return f"Operator{name}(dim={self.dim}, space={self.space!r})"


def _same_shape(a, b) -> None:
    if a.data.shape != b.data.shape:
        raise ContractError(f"dimension mismatch: {a.data.shape} vs {b.data.shape}")
    if a.space != b.space:
        raise ContractError(f"space mismatch: {a.space} vs {b.space}")


def matmul(a: Operator, b: Operator) -> Operator:
    _same_shape(a, b)
    return Operator(a.data @ b.data, a.space, a.factors or b.factors)


def adjoint(a: Operator) -> Operator:
    return Operator(a.data.conj().T, a.space, a.factors)


def commutator(a: Operator, b: Operator) -> Operator:
    _same_shape(a, b)
    return Operator(a.data @ b.data - b.data @ a.data, a.space, a.factors or b.factors)


def commutator_norm(a: Operator, b: Operator) -> float:
    """||ab - ba||_F, factorized when both operands are Kronecker products.

    [A(x)B, C(x)D] = [A,C](x)BD when B and D commute, and AC(x)[B,D] when A
    and C commute; both cases avoid forming the full product.
    """
    _same_shape(a, b)
    if a.kron is not None and b.kron is not None:
        (A, B), (C, D) = a.kron, b.kron
        AC, CA, BD, DB = A @ C, C @ A, B @ D, D @ B
        if np.array_equal(BD, DB):
            return float(np.linalg.norm(AC - CA) * np.linalg.norm(BD))
        if np.array_equal(AC, CA):
            return float(np.linalg.norm(AC) * np.linalg.norm(BD - DB))
    return commutator(a, b).frobenius()


def tensor(a: Operator, b: Operator) -> Operator:
    """Kronecker product ``a (x) b`` with ``a`` spatial and ``b`` spin."""
    if a.space != "spatial" or b.space != "spin":
        raise ContractError(
            f"tensor expects (spatial, spin) factors, got ({a.space}, {b.space})"
        )
    return Operator(np.kron(a.data, b.data), "composite", (a.dim, b.dim),
                    kron=(a.data, b.data))


def tensor_vec(a: StateVector, b: StateVector) -> StateVector:
    if a.space != "spatial" or b.space != "spin":
        raise ContractError(
            f"tensor_vec expects (spatial, spin) factors, got ({a.space}, {b.space})"
        )
    return StateVector(np.kron(a.data, b.data), "composite", (a.dim, b.dim))


def basis_vector(dim: int, index: int, space: str = "spatial") -> StateVector:
    e = np.zeros(dim)
    e[index] = 1.0
    return StateVector(e, space)


def dyad(u: StateVector, v: StateVector | None = None) -> Operator:
    """|u><v| (``v`` defaults to ``u``)."""
    v = u if v is None else v
    _same_shape(u, v)
    return Operator(np.outer(u.data, v.data.conj()), u.space, u.factors)


def gram_matrix(vs: Sequence[StateVector]) -> np.ndarray:
    if not vs:
        return np.zeros((0, 0), dtype=complex)
    V = np.column_stack([v.data for v in vs])
    return V.conj().T @ V


@dataclass(frozen=True)
class GramDefect:
    kind: str  # "norm", "overlap" or "dependent"
    i: int
    j: int
    value: float


@dataclass(frozen=True)
class GramSchmidtResult:
    vectors: list[StateVector]
    rank: int
    defects: list[GramDefect]

    def __iter__(self):
        return iter((self.vectors, self.rank, self.defects))


def gram_defects(vs: Sequence[StateVector], warn_tol: float) -> list[GramDefect]:
    G = gram_matrix(vs)
    out = []
    for i in range(len(vs)):
        dev = abs(G[i, i].real - 1.0)
        if dev > warn_tol:
            out.append(GramDefect("norm", i, i, float(G[i, i].real - 1.0)))
        for j in range(i + 1, len(vs)):
            if abs(G[i, j]) > warn_tol:
                out.append(GramDefect("overlap", i, j, float(abs(G[i, j]))))
    return out


def gram_schmidt(
    vs: Sequence[StateVector], tol: ToleranceConfig = DEFAULT_TOL
) -> GramSchmidtResult:
    """Orthonormalize ``vs`` in order, dropping dependent vectors.

    Uses modified Gram-Schmidt with one re-orthogonalization pass.  A vector
    counts as dependent when its residual falls below ``abs_tol`` relative to
    its own norm (or below ``abs_tol`` absolutely for tiny inputs).
    """
    vs = list(vs)
    if not vs:
        return GramSchmidtResult([], 0, [])
    first = vs[0]
    for v in vs[1:]:
        _same_shape(first, v)
    defects = gram_defects(vs, tol.audit_warn_tol)
    basis: list[np.ndarray] = []
    for k, v in enumerate(vs):
        w = v.data.copy()
        for _ in range(2):
            for q in basis:
                w = w - np.vdot(q, w) * q
        scale = max(np.linalg.norm(v.data), 1.0)
        nrm = np.linalg.norm(w)
        if nrm <= tol.abs_tol * scale:
            defects.append(GramDefect("dependent", k, k, float(nrm)))
            continue
        basis.append(w / nrm)
    out = [StateVector(q, first.space, first.factors) for q in basis]
    return GramSchmidtResult(out, len(out), defects)


def _rotate(A: np.ndarray, V: np.ndarray, p: int, q: int) -> None:
    apq = A[p, q]
    r = abs(apq)
    phase = apq / r
    tau = (A[q, q].real - A[p, p].real) / (2.0 * r)
    t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c
    # phase rotation makes the pivot real, then a real Jacobi rotation zeroes it
    J = np.diag([1.0, np.conj(phase)]) @ np.array([[c, s], [-s, c]])
    j00, j01, j10, j11 = J[0, 0], J[0, 1], J[1, 0], J[1, 1]
    cp, cq = A[:, p].copy(), A[:, q].copy()
    A[:, p] = cp * j00 + cq * j10
    A[:, q] = cp * j01 + cq * j11
    rp, rq = A[p, :].copy(), A[q, :].copy()
    A[p, :] = np.conj(j00) * rp + np.conj(j10) * rq
    A[q, :] = np.conj(j01) * rp + np.conj(j11) * rq
    A[p, q] = A[q, p] = 0.0
    vp, vq = V[:, p].copy(), V[:, q].copy()
    V[:, p] = vp * j00 + vq * j10
    V[:, q] = vp * j01 + vq * j11


def _jacobi(H: np.ndarray, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    A = np.array(H, dtype=complex)
    n = A.shape[0]
    V = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(A), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= 1e-15 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) > 1e-300 and abs(A[p, q]) > 1e-18 * scale:
                    _rotate(A, V, p, q)
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    return np.diag(A).real.copy(), V


def hermitian_eig(
    a: Operator, tol: ToleranceConfig = DEFAULT_TOL
) -> tuple[np.ndarray, list[StateVector]]:
    """Eigen-decomposition of a Hermitian operator by cyclic complex Jacobi.

    Returns ascending eigenvalues and the matching orthonormal eigenvectors.
    """
    asym = a.hermitian_defect()
    if asym > tol.abs_tol * a.dim:
        raise NotHermitianError(asym)
    H = 0.5 * (a.data + a.data.conj().T)
    w, V = _jacobi(H)
    order = np.argsort(w, kind="stable")
    w = w[order]
    V = V[:, order]
    vecs = [StateVector(V[:, k], a.space, a.factors) for k in range(a.dim)]
    return w, vecs


def inverse_sqrt_psd(S: np.ndarray, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    w, vecs = hermitian_eig(Operator(S), tol)
    if w[0] <= 0:
        raise ContractError("matrix is not positive definite")
    U = np.column_stack([v.data for v in vecs])
    return (U * (1.0 / np.sqrt(w))) @ U.conj().T


def lowdin_orthonormalize(
    vs: Sequence[StateVector], tol: ToleranceConfig = DEFAULT_TOL
) -> list[StateVector]:
    """Symmetric orthonormalization V (V^H V)^(-1/2)."""
    vs = list(vs)
    if not vs:
        return []
    res = gram_schmidt(vs, tol)
    dependent = [d.i for d in res.defects if d.kind == "dependent"]
    if dependent:
        raise RankDeficientError(dependent[0])
    V = np.column_stack([v.data for v in vs])
    out = V @ inverse_sqrt_psd(V.conj().T @ V, tol)
    return [StateVector(out[:, k], vs[0].space, vs[0].factors) for k in range(len(vs))]


def orthonormality_defect(vs: Sequence[StateVector]) -> float:
    G = gram_matrix(vs)
    return float(np.linalg.norm(G - np.eye(len(vs))))


def projector_from_orthonormal(
    vs: Iterable[StateVector], tol: ToleranceConfig = DEFAULT_TOL
) -> Operator:
    """Sum of dyads |v><v| over an orthonormal family."""
    vs = list(vs)
    if not vs:
        raise ContractError("need at least one vector")
    defect = orthonormality_defect(vs)
    if defect > tol.abs_tol:
        raise NotOrthonormalError(defect)
    V = np.column_stack([v.data for v in vs])
    return Operator(V @ V.conj().T, vs[0].space, vs[0].factors)


def dyad_sum(vs: Iterable[StateVector]) -> Operator:
    """Sum of |v><v| without any orthonormality requirement."""
    vs = list(vs)
    V = np.column_stack([v.data for v in vs])
    return Operator(V @ V.conj().T, vs[0].space, vs[0].factors)
