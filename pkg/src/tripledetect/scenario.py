"""The spin-7/2 double-slit construction: printed data and preparation pipeline.

Every printed object is kept twice where it matters: verbatim (``literal``)
and, when the verbatim object fails a structural requirement, a repaired
counterpart.  Exact coefficients are held as sympy expressions so that dumps
can carry provenance strings next to floating values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np
import sympy as sp

from .linalg import (
    DEFAULT_TOL,
    ContractError,
    NotOrthonormalError,
    Operator,
    StateVector,
    ToleranceConfig,
    basis_vector,
    dyad_sum,
    gram_schmidt,
    lowdin_orthonormalize,
    projector_from_orthonormal,
    tensor,
    tensor_vec,
)
from .spin import (
    SPIN_7_2,
    SpinSubset,
    SpinSystem,
    ket_label,
    subset_projector,
)

SPATIAL_DIM = 10
SLIT_SIZE = 5

Q = sp.Rational
sqrt = sp.sqrt

H = Fraction(1, 2)
M = {s: Fraction(s) for s in ("7/2", "5/2", "3/2", "1/2", "-1/2", "-3/2", "-5/2", "-7/2")}

T_VALUES = (M["7/2"], M["5/2"], M["3/2"], M["-1/2"])
Y_VALUES = (M["7/2"], M["5/2"], M["1/2"], M["-3/2"])
W_VALUES = (M["7/2"], M["3/2"], M["1/2"], M["-5/2"])
BLOCKED = (M["5/2"], M["-3/2"])
# spins routed towards slit 1; the rest go to slit 2
SLIT1_SPINS = T_VALUES

T_SUBSET = SpinSubset.of(SPIN_7_2, T_VALUES)
Y_SUBSET = SpinSubset.of(SPIN_7_2, Y_VALUES)
W_SUBSET = SpinSubset.of(SPIN_7_2, W_VALUES)
PRINTED_SUBSETS = (T_SUBSET, Y_SUBSET, W_SUBSET)

# Conventional orthogonal patterns on five same-slit basis vectors.
_A = (-1, -2, 1, 1, 1)
_B = (-1, 1, -2, 0, 3)
_C = (1, 1, 0, 3, 0)
_D = (4, 1, 3, 0, 3)


def _on_slit(slit: int, coeffs) -> tuple:
    pad = (0,) * SLIT_SIZE
    coeffs = tuple(sp.sympify(c) for c in coeffs)
    return coeffs + pad if slit == 1 else pad + coeffs


@dataclass(frozen=True)
class PrintedVector:
    """A spatial vector given as a sum of prefactor * coefficient-list parts."""

    name: str
    parts: tuple[tuple[sp.Expr, tuple], ...]
    source: str = ""

    @cached_property
    def exact(self) -> tuple:
        out = [sp.Integer(0)] * SPATIAL_DIM
        for pref, coeffs in self.parts:
            for k, c in enumerate(coeffs):
                out[k] += pref * c
        return tuple(sp.nsimplify(sp.radsimp(x)) if x != 0 else sp.Integer(0) for x in out)

    @cached_property
    def vector(self) -> StateVector:
        return StateVector(np.array([complex(x) for x in self.exact]), "spatial")

    def sub_vectors(self) -> list[StateVector]:
        return [
            StateVector(np.array([complex(pref * c) for c in coeffs]), "spatial")
            for pref, coeffs in self.parts
        ]


def _pv(name: str, *parts, source: str = "") -> PrintedVector:
    return PrintedVector(name, tuple((sp.sympify(p), c) for p, c in parts), source)


def _terms(name: str, terms, source: str = "") -> PrintedVector:
    """Vector from (1-based basis index, coefficient) terms; repeats add up."""
    coeffs = [sp.Integer(0)] * SPATIAL_DIM
    for idx, c in terms:
        coeffs[idx - 1] += sp.sympify(c)
    return PrintedVector(name, ((sp.Integer(1), tuple(coeffs)),), source)


def spatial_basis() -> list[StateVector]:
    return [basis_vector(SPATIAL_DIM, k) for k in range(SPATIAL_DIM)]


def build_E() -> tuple[Operator, Operator]:
    """Slit-1 projector E_I and its lift E = E_I (x) 1."""
    E_I = projector_from_orthonormal(spatial_basis()[:SLIT_SIZE])
    return E_I, tensor(E_I, Operator.identity(SPIN_7_2.dim, "spin"))


# -- the prepared state ------------------------------------------------------

PSI_TERMS: dict[Fraction, PrintedVector] = {
    M["7/2"]: _pv("Psi|7/2>", (Q(1, 32), _on_slit(1, _A))),
    M["3/2"]: _pv("Psi|3/2>", (sqrt(Q(7, 10)) / 8, _on_slit(1, _B))),
    M["1/2"]: _pv("Psi|1/2>", (sqrt(35) / 32, _on_slit(2, _A))),
    M["-1/2"]: _pv(
        "Psi|-1/2>",
        (sqrt(Q(35, 11)) / 16, _on_slit(1, _C)),
        (Q(1, 16), _on_slit(1, _D)),
    ),
    M["-5/2"]: _pv("Psi|-5/2>", (sqrt(Q(7, 30)) / 8, _on_slit(2, _B))),
    M["-7/2"]: _pv(
        "Psi|-7/2>",
        (1 / (16 * sqrt(11)), _on_slit(2, _C)),
        (1 / (16 * sqrt(35)), _on_slit(2, _D)),
    ),
}


def psi_exact(sys: SpinSystem = SPIN_7_2) -> list[list[sp.Expr]]:
    """Exact amplitude table indexed [spatial][spin slot]."""
    table = [[sp.Integer(0)] * sys.dim for _ in range(SPATIAL_DIM)]
    for m, pv in PSI_TERMS.items():
        k = sys.index(m)
        for i, c in enumerate(pv.exact):
            table[i][k] = c
    return table


def _compose(components: dict[Fraction, StateVector], sys: SpinSystem) -> StateVector:
    """Sum over m of component_m (x) |m>."""
    mat = np.zeros((SPATIAL_DIM, sys.dim), dtype=complex)
    for m, v in components.items():
        mat[:, sys.index(m)] = v.data
    return StateVector(mat.reshape(-1), "composite", (SPATIAL_DIM, sys.dim))


def spin_components(psi: StateVector) -> np.ndarray:
    """Matrix whose column k is the spatial vector paired with spin slot k."""
    if psi.space != "composite" or psi.factors is None:
        raise ContractError("expected a composite state with known factors")
    return psi.data.reshape(psi.factors)


def build_Psi_literal(sys: SpinSystem = SPIN_7_2) -> StateVector:
    """The prepared entangled state with the printed coefficients, unnormalized."""
    return _compose({m: pv.vector for m, pv in PSI_TERMS.items()}, sys)


def normalize_for_probability(v: StateVector, tol: ToleranceConfig = DEFAULT_TOL) -> StateVector:
    n = v.norm()
    if n <= tol.abs_tol:
        raise ContractError(f"cannot normalize a vector of norm {n:.3e}")
    return v / n


# -- G and L -----------------------------------------------------------------

G_SOURCE_1 = (
    "1/6*psi1 - 1/6*psi2 - 1/6*psi1 - sqrt(3)/2*psi7 "
    "+ 1/(2*sqrt(3))*psi9 + 1/(2*sqrt(3))*psi10"
)

G_VECTORS_LITERAL = (
    _terms(
        "psi^(1)",
        [(1, Q(1, 6)), (2, -Q(1, 6)), (1, -Q(1, 6)), (7, -sqrt(3) / 2),
         (9, 1 / (2 * sqrt(3))), (10, 1 / (2 * sqrt(3)))],
        G_SOURCE_1,
    ),
    _terms(
        "psi^(2)",
        [(1, -sqrt(3) / 2), (2, 1 / (2 * sqrt(3))), (3, 1 / (2 * sqrt(3))),
         (6, -sqrt(6) / 4), (8, sqrt(6) / 4), (9, 1 / (2 * sqrt(6))),
         (10, 1 / (2 * sqrt(6)))],
    ),
    _pv("psi^(3)", (sqrt(2) / 4, _on_slit(1, _A))),
)

# The third slot of psi^(1) read as psi3 instead of a repeated psi1.
G_VECTORS_PSI3_READING = (
    _terms(
        "psi^(1)",
        [(1, Q(1, 6)), (2, -Q(1, 6)), (3, -Q(1, 6)), (7, -sqrt(3) / 2),
         (9, 1 / (2 * sqrt(3))), (10, 1 / (2 * sqrt(3)))],
        G_SOURCE_1.replace("- 1/6*psi1 -", "- 1/6*psi3 -"),
    ),
    G_VECTORS_LITERAL[1],
    G_VECTORS_LITERAL[2],
)

_r11 = sqrt(11)
L_VECTORS = (
    _pv("psi^[1]", (sqrt(Q(11, 15)) / 5,
                    (-2, 2, 2, 0, 0, -9 / _r11, 9 / _r11, 0, 0, 9 / _r11))),
    _pv("psi^[2]", (sqrt(Q(11, 65)) / 10,
                    (3, -3, -3, 0, 0, -24 / _r11, -51 / _r11, 0, 25 / _r11, 49 / _r11))),
    _pv("psi^[3]", (sqrt(Q(33, 26)) / 5,
                    (-1, 1, 1, 0, 0, -17 / (6 * _r11), -14 / (3 * _r11),
                     65 / (6 * _r11), 5 / (2 * _r11), -11 / (2 * _r11)))),
    _pv("psi^[4]", (1 / sqrt(15), _on_slit(1, _B))),
    _pv("psi^[5]", (1 / (2 * sqrt(2)), _on_slit(1, _A))),
)


@dataclass(frozen=True)
class GLiteral:
    vectors: list[StateVector]
    vectors_psi3_reading: list[StateVector]
    dyad_sum: Operator
    projector: Operator | None
    projector_error: NotOrthonormalError | None
    lowdin_vectors: list[StateVector]
    lowdin_projector: Operator


def build_G_literal(tol: ToleranceConfig = DEFAULT_TOL) -> GLiteral:
    """Printed G vectors and what becomes of them as a projector.

    The verbatim triple is not orthonormal, so ``projector`` is None and the
    Gram defect is kept in ``projector_error``.  The Lowdin-repaired projector
    is built from the psi3 reading of the first vector.
    """
    vecs = [pv.vector for pv in G_VECTORS_LITERAL]
    alt = [pv.vector for pv in G_VECTORS_PSI3_READING]
    try:
        proj, err = projector_from_orthonormal(vecs, tol), None
    except NotOrthonormalError as exc:
        proj, err = None, exc
    low = lowdin_orthonormalize(alt, tol)
    return GLiteral(vecs, alt, dyad_sum(vecs), proj, err, low,
                    projector_from_orthonormal(low, tol))


def build_L(tol: ToleranceConfig = DEFAULT_TOL) -> tuple[list[StateVector], Operator]:
    vecs = [pv.vector for pv in L_VECTORS]
    return vecs, projector_from_orthonormal(vecs, tol)


def build_detectors(sys: SpinSystem = SPIN_7_2) -> tuple[Operator, Operator, Operator]:
    one = Operator.identity(SPATIAL_DIM)
    return tuple(tensor(one, subset_projector(sys, s)) for s in PRINTED_SUBSETS)


# -- scenario container ------------------------------------------------------

@dataclass(frozen=True)
class PaperScenario:
    """Properties, detectors and state of one solution candidate."""

    E_I: Operator
    G_I: Operator
    L_I: Operator
    T_II: Operator
    Y_II: Operator
    W_II: Operator
    psi: StateVector
    variant: str = "literal"
    notes: dict = field(default_factory=dict, compare=False)

    def _lift_spatial(self, A: Operator) -> Operator:
        return tensor(A, Operator.identity(self.T_II.dim, "spin"))

    def _lift_spin(self, A: Operator) -> Operator:
        return tensor(Operator.identity(self.E_I.dim), A)

    @cached_property
    def E(self) -> Operator:
        return self._lift_spatial(self.E_I)

    @cached_property
    def G(self) -> Operator:
        return self._lift_spatial(self.G_I)

    @cached_property
    def L(self) -> Operator:
        return self._lift_spatial(self.L_I)

    @cached_property
    def T(self) -> Operator:
        return self._lift_spin(self.T_II)

    @cached_property
    def Y(self) -> Operator:
        return self._lift_spin(self.Y_II)

    @cached_property
    def W(self) -> Operator:
        return self._lift_spin(self.W_II)

    def with_psi(self, psi: StateVector) -> PaperScenario:
        return PaperScenario(self.E_I, self.G_I, self.L_I, self.T_II, self.Y_II,
                             self.W_II, psi, self.variant, dict(self.notes))

    def detector_pairs(self) -> list[tuple[str, Operator, str, Operator]]:
        return [("T", self.T, "E", self.E), ("Y", self.Y, "G", self.G),
                ("W", self.W, "L", self.L)]


def literal_scenario(tol: ToleranceConfig = DEFAULT_TOL) -> PaperScenario:
    E_I, _ = build_E()
    g = build_G_literal(tol)
    _, L_I = build_L(tol)
    T_II, Y_II, W_II = (subset_projector(SPIN_7_2, s) for s in PRINTED_SUBSETS)
    return PaperScenario(
        E_I, g.dyad_sum, L_I, T_II, Y_II, W_II, build_Psi_literal(), "literal",
        {"G_I": "sum of dyads of the verbatim psi^(1..3); not a projector"},
    )


# -- preparation pipeline ----------------------------------------------------

class Stage(Enum):
    T0_SELECTED = 0
    T_HALF_ROUTED = 1
    T1_FILTERED = 2


@dataclass(frozen=True)
class PipelineState:
    stage: Stage
    vector: StateVector
    norm_squared: float

    @classmethod
    def at(cls, stage: Stage, vector: StateVector) -> PipelineState:
        return cls(stage, vector, vector.norm() ** 2)


S_PRINTED = (
    Q(1) / (8 * sqrt(2)) * sp.Matrix([1, sqrt(7), sqrt(21), sqrt(35), sqrt(35),
                                      sqrt(21), sqrt(7), 1])
)


def s_printed() -> StateVector:
    return StateVector(np.array([complex(x) for x in S_PRINTED]), "spin")


CHANNELS_PRINTED: dict[Fraction, PrintedVector] = {
    M["7/2"]: _pv("psi_1^[7/2]", (1 / (2 * sqrt(2)), _on_slit(1, _A))),
    M["3/2"]: _pv("psi_1^[3/2]", (1 / sqrt(15), _on_slit(1, _B))),
    M["1/2"]: _pv("psi_2^[1/2]", (1 / (2 * sqrt(2)), _on_slit(2, _A))),
    M["-1/2"]: _pv(
        "psi_1^[-1/2]",
        (1 / sqrt(22), _on_slit(1, _C)),
        (1 / sqrt(70), _on_slit(1, _D)),
    ),
    M["-5/2"]: _pv("psi_2^[-5/2]", (1 / sqrt(15), _on_slit(2, _B))),
    M["-7/2"]: _pv(
        "psi_2^[-7/2]",
        (1 / sqrt(22), _on_slit(2, _C)),
        (1 / sqrt(70), _on_slit(2, _D)),
    ),
}


def slit_of(m: Fraction) -> int:
    return 1 if m in SLIT1_SPINS else 2


def channel_name(m: Fraction) -> str:
    return f"psi_{slit_of(m)}^[{ket_label(m)[1:-1]}]"


@dataclass(frozen=True)
class ChannelVectors:
    """Spatial channel per S_z value; ``printed`` marks the given ones."""

    vectors: dict[Fraction, StateVector]
    printed: frozenset
    variant: str

    def ordered(self, sys: SpinSystem = SPIN_7_2) -> list[tuple[Fraction, StateVector]]:
        return [(m, self.vectors[m]) for m in sys.labels]

    def gram(self, sys: SpinSystem = SPIN_7_2) -> np.ndarray:
        V = np.column_stack([v.data for _, v in self.ordered(sys)])
        return V.conj().T @ V


def _slit_candidates(slit: int) -> list[StateVector]:
    basis = spatial_basis()
    return basis[:SLIT_SIZE] if slit == 1 else basis[SLIT_SIZE:]


def load_channels(
    variant: str = "literal",
    blocked_offset: int = 0,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> ChannelVectors:
    """Channel vectors for the router.

    The two blocked channels are never printed; they are completed by
    Gram-Schmidt inside their slit against the printed ones.  ``blocked_offset``
    rotates the candidate order so that alternative completions can be tried.
    """
    vecs: dict[Fraction, StateVector] = {m: pv.vector for m, pv in CHANNELS_PRINTED.items()}
    for m in BLOCKED:
        slit = slit_of(m)
        taken = [v for mm, v in vecs.items() if slit_of(mm) == slit]
        cands = _slit_candidates(slit)
        k = blocked_offset % len(cands)
        cands = cands[k:] + cands[:k]
        res = gram_schmidt(taken + cands, tol)
        n_taken = gram_schmidt(taken, tol).rank
        vecs[m] = res.vectors[n_taken]
    if variant == "repaired":
        order = SPIN_7_2.labels
        low = lowdin_orthonormalize([vecs[m] for m in order], tol)
        vecs = dict(zip(order, low))
    elif variant != "literal":
        raise ValueError(f"unknown variant {variant!r}")
    return ChannelVectors(vecs, frozenset(CHANNELS_PRINTED), variant)


def select_sx(seed: StateVector | None = None, s: StateVector | None = None) -> PipelineState:
    """First stage: keep only particles with S_x = +7/2."""
    seed = spatial_basis()[0] if seed is None else seed
    if not seed.is_unit(1e-8):
        raise ContractError("the spatial seed must be a unit vector")
    s = s_printed() if s is None else s
    return PipelineState.at(Stage.T0_SELECTED, tensor_vec(seed, s))


def routing_operator(
    channels: ChannelVectors, seed: StateVector, sys: SpinSystem = SPIN_7_2
) -> Operator:
    """The spin-dependent router on span{seed (x) |m>}.

    Maps seed (x) |m> to channel_m (x) |m>; acts as zero on the orthogonal
    complement of the seed, which the model never populates.
    """
    out = np.zeros((SPATIAL_DIM * sys.dim,) * 2, dtype=complex)
    for m, ch in channels.ordered(sys):
        k = sys.index(m)
        P = np.zeros((sys.dim, sys.dim))
        P[k, k] = 1.0
        out += np.kron(np.outer(ch.data, seed.data.conj()), P)
    return Operator(out, "composite", (SPATIAL_DIM, sys.dim))


def route(
    state: PipelineState, channels: ChannelVectors, seed: StateVector | None = None
) -> PipelineState:
    if state.stage is not Stage.T0_SELECTED:
        raise ContractError(f"routing needs a selected state, got {state.stage.name}")
    seed = spatial_basis()[0] if seed is None else seed
    U = routing_operator(channels, seed)
    return PipelineState.at(Stage.T_HALF_ROUTED, U @ state.vector)


def blocking_filter(sys: SpinSystem = SPIN_7_2) -> Operator:
    keep = SpinSubset.of(sys, [m for m in sys.labels if m not in BLOCKED])
    return tensor(Operator.identity(SPATIAL_DIM), subset_projector(sys, keep))


def apply_filter(state: PipelineState) -> PipelineState:
    if state.stage is not Stage.T_HALF_ROUTED:
        raise ContractError(f"filtering needs a routed state, got {state.stage.name}")
    return PipelineState.at(Stage.T1_FILTERED, blocking_filter() @ state.vector)


def unblocked_part(psi_hat: StateVector) -> StateVector:
    return blocking_filter() @ psi_hat


def rank_one_filter(psi_hat: StateVector) -> StateVector:
    """|Psi_1><Psi_1| applied to psi_hat, with Psi_1 the unblocked part."""
    psi1 = unblocked_part(psi_hat)
    return psi1 * psi1.inner(psi_hat)


@dataclass(frozen=True)
class PipelineResult:
    final: PipelineState
    routed: PipelineState
    selected: PipelineState
    reconstruction_residual: float
    channels: ChannelVectors


def run_pipeline(
    variant: str = "literal",
    seed: StateVector | None = None,
    blocked_offset: int = 0,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> PipelineResult:
    """Select, route and filter; compare the output with the printed state.

    The residual is the Euclidean distance to the verbatim prepared state.
    """
    channels = load_channels(variant, blocked_offset, tol)
    s0 = select_sx(seed)
    s1 = route(s0, channels, seed)
    s2 = apply_filter(s1)
    residual = (s2.vector - build_Psi_literal()).norm()
    return PipelineResult(s2, s1, s0, residual, channels)


def pipeline_state(variant: str = "literal", **kw) -> tuple[PipelineState, float]:
    res = run_pipeline(variant, **kw)
    return res.final, res.reconstruction_residual


def composite_label(i: int, m: Fraction) -> str:
    return f"psi{i + 1}⊗{ket_label(m)}"


def vector_entries(vec: Sequence[sp.Expr]) -> list[tuple[int, sp.Expr]]:
    return [(i, c) for i, c in enumerate(vec) if c != 0]
