"""Spin-j operators in the S_z basis ordered m = +j, j-1, ..., -j."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .linalg import DEFAULT_TOL, ContractError, Operator, StateVector, hermitian_eig


def m_label(m: Fraction) -> str:
    m = Fraction(m)
    return str(m.numerator) if m.denominator == 1 else f"{m.numerator}/{m.denominator}"


def ket_label(m: Fraction) -> str:
    return f"|{m_label(m)}>"


@dataclass(frozen=True)
class SpinSystem:
    j: Fraction = Fraction(7, 2)

    def __post_init__(self):
        j = Fraction(self.j)
        if j < 0 or (2 * j).denominator != 1:
            raise ValueError("j must be a non-negative integer or half-integer")
        object.__setattr__(self, "j", j)

    @property
    def dim(self) -> int:
        return int(2 * self.j) + 1

    @property
    def labels(self) -> list[Fraction]:
        return [self.j - k for k in range(self.dim)]

    def index(self, m) -> int:
        m = Fraction(m)
        k = self.j - m
        if k.denominator != 1 or not 0 <= k < self.dim:
            raise ValueError(f"m = {m} is not a basis label for j = {self.j}")
        return int(k)


SPIN_7_2 = SpinSystem(Fraction(7, 2))


@dataclass(frozen=True)
class SpinSubset:
    """A set of S_z values, stored as a bitmask over basis slots.

    Bit ``k`` corresponds to basis slot ``k``, i.e. ``m = j - k``.
    """

    system: SpinSystem
    mask: int

    def __post_init__(self):
        if not 0 <= self.mask < (1 << self.system.dim):
            raise ValueError("mask has bits outside the spin basis")

    @classmethod
    def of(cls, system: SpinSystem, values: Iterable) -> SpinSubset:
        mask = 0
        for m in values:
            mask |= 1 << system.index(m)
        return cls(system, mask)

    @property
    def members(self) -> list[Fraction]:
        return [m for k, m in enumerate(self.system.labels) if self.mask >> k & 1]

    @property
    def slots(self) -> list[int]:
        return [k for k in range(self.system.dim) if self.mask >> k & 1]

    def complement(self) -> SpinSubset:
        return SpinSubset(self.system, ((1 << self.system.dim) - 1) ^ self.mask)

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __contains__(self, m) -> bool:
        return bool(self.mask >> self.system.index(m) & 1)

    def __str__(self) -> str:
        return "{" + ", ".join(m_label(m) for m in self.members) + "}"


def s_z(sys: SpinSystem = SPIN_7_2) -> Operator:
    return Operator(np.diag([float(m) for m in sys.labels]), "spin")


def s_ladder(sys: SpinSystem = SPIN_7_2) -> tuple[Operator, Operator]:
    """Raising and lowering operators, <m+1|S+|m> = sqrt(j(j+1) - m(m+1))."""
    j = float(sys.j)
    ms = [float(m) for m in sys.labels]
    sp = np.zeros((sys.dim, sys.dim))
    # slot k holds m = j - k, so m + 1 sits one slot up
    for k in range(1, sys.dim):
        m = ms[k]
        sp[k - 1, k] = np.sqrt(j * (j + 1) - m * (m + 1))
    plus = Operator(sp, "spin")
    return plus, Operator(sp.T, "spin")


def s_x(sys: SpinSystem = SPIN_7_2) -> Operator:
    plus, minus = s_ladder(sys)
    return (plus + minus) * 0.5


def s_y(sys: SpinSystem = SPIN_7_2) -> Operator:
    plus, minus = s_ladder(sys)
    return (plus - minus) * (1 / 2j)


def sx_top_eigenvector(sys: SpinSystem = SPIN_7_2) -> StateVector:
    """Unit eigenvector of S_x for eigenvalue +j, top amplitude real positive."""
    w, vecs = hermitian_eig(s_x(sys))
    if sys.dim > 1 and abs(w[-1] - w[-2]) < 1e-6:
        raise RuntimeError("top S_x eigenvalue is degenerate")
    v = vecs[-1].data
    pivot = v[0]
    if abs(pivot) < DEFAULT_TOL.abs_tol:
        raise RuntimeError("top S_x eigenvector has no |+j> amplitude")
    v = v * (abs(pivot) / pivot)
    v = v / np.linalg.norm(v)
    return StateVector(v, "spin")


def eigenprojector(sys: SpinSystem, i: int) -> Operator:
    """A^i = |j_i><j_i| with j_i = j - (i - 1), 1-based ``i``."""
    if not 1 <= i <= sys.dim:
        raise ContractError(f"eigenprojector index {i} outside 1..{sys.dim}")
    d = np.zeros(sys.dim)
    d[i - 1] = 1.0
    return Operator(np.diag(d), "spin")


def subset_projector(sys: SpinSystem, s: SpinSubset) -> Operator:
    if s.system != sys:
        raise ContractError("subset belongs to a different spin system")
    d = np.array([float(s.mask >> k & 1) for k in range(sys.dim)])
    return Operator(np.diag(d), "spin")
