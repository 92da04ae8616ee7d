"""Derive spatial properties detected by spin-subset detectors.

Write a composite state as psi = sum_m phi_m (x) |m>.  A spatial projector R
satisfies (1 (x) P_S) psi = (R (x) 1) psi exactly when R fixes every phi_m
with m in S and annihilates every phi_m with m outside S.  Such an orthogonal
projector exists iff the two spans are orthogonal; the minimal choice is the
projector onto the fixed span, and any extra rank must come from the free
subspace orthogonal to all phi_m.

All derived fixed parts are sums of mutually orthogonal blocks and therefore
commute with one another.  Incompatibility between derived properties can
only come from the completion inside the free subspace, which is why the
completion rule below looks for it explicitly.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import audit
from . import scenario as sc
from .linalg import (
    DEFAULT_TOL,
    ContractError,
    Operator,
    StateVector,
    ToleranceConfig,
    gram_schmidt,
    tensor,
    tensor_vec,
)
from .spin import SpinSubset, SpinSystem, m_label, subset_projector

# largest principal cosine between fixed and annihilated spans still
# treated as orthogonal
FEASIBILITY_COS = 1e-8
MIX_WEIGHTS = (1.0, 2.0, 3.0)


class InfeasibleError(ContractError):
    def __init__(self, subset: SpinSubset, m_in, m_out, overlap: float, cosine: float):
        super().__init__(
            f"subset {subset} is infeasible: components at m={m_label(m_in)} (kept) and "
            f"m={m_label(m_out)} (dropped) overlap (|<phi,phi'>| = {overlap:.3e}, "
            f"largest principal cosine {cosine:.3e})"
        )
        self.subset = subset
        self.pair = (m_in, m_out)
        self.overlap = overlap
        self.cosine = cosine


class RankError(ContractError):
    pass


@dataclass(frozen=True)
class DetectionConstraint:
    psi: StateVector
    detector_subset: SpinSubset
    target_rank: int | None = None

    def __post_init__(self):
        if self.psi.norm() <= DEFAULT_TOL.abs_tol:
            raise ContractError("constraint state has (near) zero norm")


@dataclass
class SolverSolution:
    R_I: Operator
    subset: SpinSubset
    certificates: dict
    freedom_dim: int
    fixed_rank: int
    completion: list[StateVector] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "subset": str(self.subset),
            "mask": self.subset.mask,
            "rank": self.fixed_rank + len(self.completion),
            "fixed_rank": self.fixed_rank,
            "freedom_dim": self.freedom_dim,
            "certificates": self.certificates,
        }


@dataclass(frozen=True)
class Decomposition:
    """Spin decomposition of a composite state and its derived subspaces."""

    phi: np.ndarray  # column k pairs with spin slot k
    active: tuple[int, ...]
    span: tuple[np.ndarray, ...]  # orthonormal basis of span{phi_m}
    free: tuple[np.ndarray, ...]  # orthonormal basis of its complement
    norm: float

    @property
    def freedom_dim(self) -> int:
        return len(self.free)


def decompose(psi: StateVector, tol: ToleranceConfig = DEFAULT_TOL) -> Decomposition:
    phi = sc.spin_components(psi)
    n_sp = phi.shape[0]
    norm = psi.norm()
    if norm <= tol.abs_tol:
        raise ContractError("state has (near) zero norm")
    # channels carrying less than abs_tol of the state impose no constraint
    active = tuple(k for k in range(phi.shape[1])
                   if np.linalg.norm(phi[:, k]) > tol.abs_tol * norm)
    dirs = [StateVector(phi[:, k] / np.linalg.norm(phi[:, k])) for k in active]
    span = gram_schmidt(dirs, tol).vectors
    basis = [StateVector(np.eye(n_sp)[i]) for i in range(n_sp)]
    full = gram_schmidt(dirs + basis, tol).vectors
    return Decomposition(
        phi, active,
        tuple(v.data for v in span),
        tuple(v.data for v in full[len(span):]),
        norm,
    )


def _orthobasis(vectors: Sequence[np.ndarray], tol: ToleranceConfig) -> np.ndarray:
    if not vectors:
        return np.zeros((0, 0))
    dirs = [StateVector(v / np.linalg.norm(v)) for v in vectors]
    out = gram_schmidt(dirs, tol).vectors
    return np.column_stack([v.data for v in out])


def _feasibility(dec: Decomposition, subset: SpinSubset, tol: ToleranceConfig):
    kept = [k for k in dec.active if subset.mask >> k & 1]
    dropped = [k for k in dec.active if not subset.mask >> k & 1]
    Qf = _orthobasis([dec.phi[:, k] for k in kept], tol)
    Qa = _orthobasis([dec.phi[:, k] for k in dropped], tol)
    cosine = 0.0
    if kept and dropped:
        cosine = float(np.linalg.norm(Qf.conj().T @ Qa, 2))
    return kept, dropped, Qf, cosine


def is_feasible(psi: StateVector, subset: SpinSubset, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    return _feasibility(decompose(psi, tol), subset, tol)[3] <= FEASIBILITY_COS


def completion_candidates(dec: Decomposition, mixed: bool) -> list[np.ndarray]:
    """Free basis vectors, then (for ``mixed``) normalized pairwise mixtures."""
    free = list(dec.free)
    out = list(free)
    if mixed:
        for w in MIX_WEIGHTS:
            for i, j in itertools.combinations(range(len(free)), 2):
                out.append((free[i] + w * free[j]) / np.sqrt(1 + w * w))
    return out


def _commutes(P: np.ndarray, v: np.ndarray, tol: float) -> bool:
    D = np.outer(v, v.conj())
    return np.linalg.norm(P @ D - D @ P) <= tol


def _complete(dec, needed, against, tol):
    """Pick ``needed`` orthonormal completion vectors from the free subspace.

    Candidates are tried in a fixed order.  With ``against`` projectors, a
    candidate is kept only if its rank-one projector fails to commute with
    each of them; if that cannot fill the rank, the plain order is used and
    the result is flagged.
    """
    def fill(cands, accept):
        chosen: list[np.ndarray] = []
        for c in cands:
            if len(chosen) == needed:
                break
            w = c.copy()
            for _ in range(2):
                for q in chosen:
                    w = w - np.vdot(q, w) * q
            nrm = np.linalg.norm(w)
            if nrm <= 1e-8:
                continue
            w = w / nrm
            if accept and any(_commutes(P, w, tol.audit_warn_tol) for P in against):
                continue
            chosen.append(w)
        return chosen

    if needed == 0:
        return [], True
    if against:
        chosen = fill(completion_candidates(dec, mixed=True), True)
        if len(chosen) == needed:
            return chosen, True
    chosen = fill(completion_candidates(dec, mixed=False), False)
    if len(chosen) < needed:
        raise RankError(f"only {len(chosen)} free directions for {needed} completions")
    return chosen, not against


def derive_property(
    c: DetectionConstraint,
    against: Sequence[Operator] = (),
    names: Sequence[str] = (),
    tol: ToleranceConfig = DEFAULT_TOL,
    decomposition: Decomposition | None = None,
) -> SolverSolution:
    """Spatial projector detected by ``1 (x) P_subset`` on ``c.psi``.

    Without ``target_rank`` the projector onto the kept components is
    returned.  Extra rank is completed from the free subspace; when
    ``against`` projectors are supplied, the completion is chosen so as not to
    commute with them.
    """
    dec = decomposition or decompose(c.psi, tol)
    subset = c.detector_subset
    kept, dropped, Qf, cosine = _feasibility(dec, subset, tol)
    if cosine > FEASIBILITY_COS:
        pairs = [(abs(np.vdot(dec.phi[:, i], dec.phi[:, j])), i, j)
                 for i in kept for j in dropped]
        ov, i, j = max(pairs)
        labels = subset.system.labels
        raise InfeasibleError(subset, labels[i], labels[j], float(ov), cosine)
    fixed_rank = Qf.shape[1] if kept else 0
    target = fixed_rank if c.target_rank is None else c.target_rank
    if target < fixed_rank:
        raise RankError(f"target rank {target} below the fixed rank {fixed_rank}")
    needed = target - fixed_rank
    if needed > dec.freedom_dim:
        raise RankError(f"target rank {target} needs {needed} free directions, "
                        f"only {dec.freedom_dim} available")
    against_mats = [A.data for A in against]
    completion, incompatible = _complete(dec, needed, against_mats, tol)

    n_sp = dec.phi.shape[0]
    cols = ([Qf[:, k] for k in range(fixed_rank)] if kept else []) + completion
    R = np.zeros((n_sp, n_sp), dtype=complex)
    for v in cols:
        R += np.outer(v, v.conj())
    R_I = Operator(R)

    P = np.diag([float(subset.mask >> k & 1) for k in range(subset.system.dim)])
    residual = float(np.linalg.norm(dec.phi @ P - R @ dec.phi) / dec.norm)
    orth = max((abs(np.vdot(v, dec.phi[:, k])) / np.linalg.norm(dec.phi[:, k])
                for v in completion for k in dec.active), default=0.0)
    certs = {
        "detector_residual": residual,
        "projector_defect": max(R_I.hermitian_defect(), R_I.idempotency_defect()),
        "principal_cosine": cosine,
        "completion_orthogonality": float(orth),
        "incompatible_completion": incompatible,
        "commutator_norms": {
            (names[k] if k < len(names) else f"P{k}"): float(np.linalg.norm(R @ A - A @ R))
            for k, A in enumerate(against_mats)
        },
    }
    return SolverSolution(R_I, subset, certs, dec.freedom_dim, fixed_rank,
                          [StateVector(v) for v in completion])


def _auto_rank(dec: Decomposition, subset: SpinSubset, tol) -> int:
    kept = [k for k in dec.active if subset.mask >> k & 1]
    rank = _orthobasis([dec.phi[:, k] for k in kept], tol).shape[1] if kept else 0
    return rank + (1 if dec.freedom_dim >= 1 else 0)


@dataclass
class TripleResult:
    solutions: list[SolverSolution]
    report: audit.ConditionReport
    scenario: sc.PaperScenario


SLOT_NAMES = ("E", "G", "L")


def solve_triple(
    psi: StateVector,
    subsets: Sequence[SpinSubset],
    ranks: Sequence[int | None] | None = None,
    tol: ToleranceConfig = DEFAULT_TOL,
    decomposition: Decomposition | None = None,
    _prefix: Sequence[SolverSolution] = (),
) -> TripleResult:
    """Derive one property per detector subset and evaluate all conditions.

    Slots are derived in order, each completion avoiding commutation with the
    properties derived before it.  ``ranks`` entries of None mean one rank
    above the fixed part (when a free direction exists).
    """
    if len(subsets) != 3:
        raise ValueError("need exactly three detector subsets")
    dec = decomposition or decompose(psi, tol)
    ranks = list(ranks) if ranks is not None else [None] * 3
    sols: list[SolverSolution] = list(_prefix)
    for k in range(len(sols), 3):
        target = ranks[k] if ranks[k] is not None else _auto_rank(dec, subsets[k], tol)
        sols.append(derive_property(
            DetectionConstraint(psi, subsets[k], target),
            against=[s.R_I for s in sols], names=SLOT_NAMES[:k], tol=tol,
            decomposition=dec,
        ))
    system = subsets[0].system
    s = sc.PaperScenario(
        sols[0].R_I, sols[1].R_I, sols[2].R_I,
        *(subset_projector(system, sub) for sub in subsets),
        psi, "solved",
    )
    return TripleResult(sols, audit.evaluate_conditions(s, tol), s)


@dataclass
class EnumeratedSolution:
    masks: tuple[int, int, int]
    inert_mask: int
    report: audit.ConditionReport

    def contains(self, masks: Sequence[int]) -> bool:
        keep = ~self.inert_mask
        return all((m & keep) == r for m, r in zip(masks, self.masks))

    def triples(self) -> list[tuple[int, int, int]]:
        inert_bits = [1 << k for k in range(self.inert_mask.bit_length())
                      if self.inert_mask >> k & 1]
        extras = [sum(c) for r in range(len(inert_bits) + 1)
                  for c in itertools.combinations(inert_bits, r)]
        return sorted(tuple(m | e for m, e in zip(self.masks, es))
                      for es in itertools.product(extras, repeat=3))

    def to_dict(self, system: SpinSystem) -> dict:
        return {
            "masks": list(self.masks),
            "subsets": [str(SpinSubset(system, m)) for m in self.masks],
            "inert_mask": self.inert_mask,
            "conditions": {e.id: e.measured for e in self.report.conditions},
        }


def _passes(report: audit.ConditionReport, require_incompatible: bool) -> bool:
    skip = () if require_incompatible else ("C.1", "C.2", "C.3")
    return all(e.verdict == audit.PASS for e in report.conditions if e.id not in skip)


def enumerate_solutions(
    psi: StateVector,
    system: SpinSystem,
    ranks: Sequence[int | None] | None = None,
    require_incompatible: bool = True,
    first: Iterable[SpinSubset] | None = None,
    prune: bool = True,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> list[EnumeratedSolution]:
    """All detector-subset triples whose derived properties solve the problem.

    With ``prune`` on: subsets whose spin-side split of psi is trivial are
    skipped (they violate C.10 whatever the property), feasibility is shared
    between a subset and its complement, and subsets differing only on
    channels where psi vanishes are collapsed into one class (the derivation
    never sees those channels).  Each returned class records the collapsed
    channels in ``inert_mask``.  With ``prune`` off every triple, including
    the empty and full subsets, is derived and evaluated directly.
    Results are ordered by bitmask triple.
    """
    dec = decompose(psi, tol)
    d = system.dim
    full = (1 << d) - 1
    active_mask = sum(1 << k for k in dec.active)
    inert = full ^ active_mask if prune else 0
    phi = dec.phi
    weights = np.array([np.linalg.norm(phi[:, k]) ** 2 for k in range(d)]) / dec.norm ** 2
    split_floor = tol.audit_warn_tol - tol.abs_tol

    def candidates() -> list[int]:
        if not prune:
            return list(range(1 << d))
        out, feas = [], {}
        for mask in range(1 << d):
            if mask & inert:
                continue
            w_in = float(np.sqrt(sum(weights[k] for k in range(d) if mask >> k & 1)))
            w_out = float(np.sqrt(sum(weights[k] for k in range(d) if not mask >> k & 1)))
            if min(w_in, w_out) <= split_floor:
                continue
            key = min(mask, mask ^ active_mask)
            if key not in feas:
                feas[key] = _feasibility(dec, SpinSubset(system, mask), tol)[3] <= FEASIBILITY_COS
            if feas[key]:
                out.append(mask)
        return out

    pool = candidates()
    if first is None:
        firsts = pool
    else:
        wanted = {s.mask & ~inert for s in first}
        firsts = [m for m in pool if m in wanted]
    ranks = list(ranks) if ranks is not None else [None] * 3

    def derive_slot(prefix: list[SolverSolution], mask: int):
        k = len(prefix)
        subset = SpinSubset(system, mask)
        target = ranks[k] if ranks[k] is not None else _auto_rank(dec, subset, tol)
        try:
            return derive_property(
                DetectionConstraint(psi, subset, target),
                against=[s.R_I for s in prefix], names=SLOT_NAMES[:k], tol=tol,
                decomposition=dec,
            )
        except (InfeasibleError, RankError):
            return None

    results: list[EnumeratedSolution] = []
    for m1 in firsts:
        s1 = derive_slot([], m1)
        if s1 is None:
            continue
        for m2 in pool:
            s2 = derive_slot([s1], m2)
            if s2 is None:
                continue
            for m3 in pool:
                s3 = derive_slot([s1, s2], m3)
                if s3 is None:
                    continue
                scen = sc.PaperScenario(
                    s1.R_I, s2.R_I, s3.R_I,
                    *(subset_projector(system, SpinSubset(system, m)) for m in (m1, m2, m3)),
                    psi, "solved",
                )
                report = audit.evaluate_conditions(scen, tol)
                if _passes(report, require_incompatible):
                    results.append(EnumeratedSolution((m1, m2, m3), inert, report))
    return results


def product_state(
    spatial: StateVector | None = None, spin: StateVector | None = None
) -> StateVector:
    """psi (x) |s>, the state right after S_x selection."""
    spatial = sc.spatial_basis()[0] if spatial is None else spatial
    spin = sc.s_printed() if spin is None else spin
    return tensor_vec(spatial, spin)


def repair_scenario(
    literal: sc.PaperScenario, tol: ToleranceConfig = DEFAULT_TOL
) -> sc.PaperScenario:
    """Replace the defective G_I by one derived from the Y detector.

    The printed L_I is verified (orthonormal vectors, exact detection by W)
    and kept.  The new G_I has the printed rank 3 and its free direction is
    chosen not to commute with E_I or L_I.
    """
    psi = literal.psi
    dec = decompose(psi, tol)
    lit_res = float(np.linalg.norm(
        sc.spin_components(psi) @ literal.W_II.data - literal.L_I.data @ sc.spin_components(psi)
    ) / psi.norm())
    if not literal.L_I.is_projector(tol.abs_tol) or lit_res > tol.abs_tol:
        raise ContractError("printed L_I does not verify; cannot keep it")
    g = derive_property(
        DetectionConstraint(psi, sc.Y_SUBSET, 3),
        against=[literal.E_I, literal.L_I], names=("E", "L"), tol=tol, decomposition=dec,
    )
    notes = {
        "G_I": "derived from the Y detector (rank 3), completion avoiding E_I and L_I",
        "G_certificates": g.certificates,
        "G_freedom_dim": g.freedom_dim,
        "L_I": "printed vectors, verified",
        "L_detection_residual": lit_res,
    }
    return sc.PaperScenario(
        literal.E_I, g.R_I, literal.L_I, literal.T_II, literal.Y_II, literal.W_II,
        psi, "repaired", notes,
    )


def build_scenario(variant: str, tol: ToleranceConfig = DEFAULT_TOL) -> sc.PaperScenario:
    lit = sc.literal_scenario(tol)
    if variant == "literal":
        return lit
    if variant == "repaired":
        return repair_scenario(lit, tol)
    raise ValueError(f"unknown variant {variant!r}")


def lift(R_I: Operator, spin_dim: int) -> Operator:
    return tensor(R_I, Operator.identity(spin_dim, "spin"))
