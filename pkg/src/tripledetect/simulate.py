"""Joint outcome statistics of commuting detectors on the prepared state."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import scenario as sc
from .linalg import DEFAULT_TOL, ContractError, Operator, StateVector, ToleranceConfig, commutator_norm

# Philox4x64-10 bit generator keyed through numpy's SeedSequence; shard k
# draws from the k-th spawned child sequence.
GENERATOR_ID = "numpy.Philox4x64-10/SeedSequence.spawn"
DEFAULT_SEED = 42


class NonCommutingError(ContractError):
    def __init__(self, i: int, j: int, norm: float):
        super().__init__(f"detectors {i} and {j} do not commute (||[.,.]||_F = {norm:.3e})")
        self.pair = (i, j)
        self.norm = norm


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = DEFAULT_SEED
    n_trials: int = 1_000_000
    generator_id: str = GENERATOR_ID
    shards: int = 1

    def __post_init__(self):
        if self.n_trials < 0:
            raise ValueError("n_trials must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.generator_id != GENERATOR_ID:
            raise ValueError(f"unsupported generator {self.generator_id!r}")
        if self.shards < 1:
            raise ValueError("shards must be positive")


@dataclass
class OutcomeDistribution:
    outcomes: list[tuple[int, ...]]
    probabilities: np.ndarray
    provenance: str = "exact"
    counts: np.ndarray | None = None
    config: SamplerConfig | None = field(default=None, repr=False)

    def probability(self, outcome: Sequence[int]) -> float:
        return float(self.probabilities[self.outcomes.index(tuple(outcome))])

    def total_variation(self, other: OutcomeDistribution) -> float:
        if self.outcomes != other.outcomes:
            raise ValueError("distributions are over different outcome lists")
        return 0.5 * float(np.abs(self.probabilities - other.probabilities).sum())

    def to_dict(self) -> dict:
        out = {
            "provenance": self.provenance,
            "outcomes": [
                {"bits": list(o), "probability": float(p)}
                for o, p in zip(self.outcomes, self.probabilities)
            ],
        }
        if self.counts is not None:
            for row, c in zip(out["outcomes"], self.counts):
                row["count"] = int(c)
            out["seed"] = self.config.seed
            out["n_trials"] = self.config.n_trials
            out["generator"] = self.config.generator_id
            out["shards"] = self.config.shards
        return out


def outcome_order(k: int) -> list[tuple[int, ...]]:
    """Lexicographic with 1 before 0: (1,1,1), (1,1,0), ..., (0,0,0)."""
    return list(itertools.product((1, 0), repeat=k))


def check_commuting(detectors: Sequence[Operator], tol: ToleranceConfig = DEFAULT_TOL) -> None:
    for i, j in itertools.combinations(range(len(detectors)), 2):
        c = commutator_norm(detectors[i], detectors[j])
        if c > tol.abs_tol:
            raise NonCommutingError(i, j, c)


def exact_joint_distribution(
    psi: StateVector, detectors: Sequence[Operator], tol: ToleranceConfig = DEFAULT_TOL
) -> OutcomeDistribution:
    """Born probabilities of every joint outcome of commuting projectors."""
    check_commuting(detectors, tol)
    psi = sc.normalize_for_probability(psi, tol)
    outcomes = outcome_order(len(detectors))
    probs = []
    for bits in outcomes:
        v = psi
        for b, P in zip(bits, detectors):
            Pv = P @ v
            v = Pv if b else v - Pv
        probs.append(v.norm() ** 2)
    return OutcomeDistribution(outcomes, np.array(probs))


def sample(
    psi: StateVector,
    detectors: Sequence[Operator],
    cfg: SamplerConfig = SamplerConfig(),
    tol: ToleranceConfig = DEFAULT_TOL,
) -> OutcomeDistribution:
    """Draw ``cfg.n_trials`` joint outcomes by inverse-CDF sampling."""
    exact = exact_joint_distribution(psi, detectors, tol)
    cdf = np.cumsum(exact.probabilities)
    cdf[-1] = max(cdf[-1], 1.0)
    counts = np.zeros(len(exact.outcomes), dtype=np.int64)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.shards)
    base, extra = divmod(cfg.n_trials, cfg.shards)
    for k, child in enumerate(children):
        n = base + (1 if k < extra else 0)
        if n == 0:
            continue
        rng = np.random.Generator(np.random.Philox(child))
        idx = np.searchsorted(cdf, rng.random(n), side="right")
        counts += np.bincount(np.minimum(idx, len(cdf) - 1), minlength=len(cdf))
    n = max(cfg.n_trials, 1)
    return OutcomeDistribution(
        exact.outcomes, counts / n,
        f"sampled(n={cfg.n_trials}, seed={cfg.seed})", counts, cfg,
    )


@dataclass
class InferenceRow:
    detector: str
    property: str
    p_detector: float
    p_property: float
    residual: float
    inference: bool

    def to_dict(self) -> dict:
        return {
            "detector": self.detector,
            "property": self.property,
            "p_detector": self.p_detector,
            "p_property": self.p_property,
            "residual": self.residual,
            "inference": self.inference,
        }


def detection_inference_table(
    psi: StateVector, scenario: sc.PaperScenario, tol: ToleranceConfig = DEFAULT_TOL
) -> list[InferenceRow]:
    """P(detector = 1), P(property = 1) and ||S psi - R psi|| / ||psi|| per pair.

    A detector licenses inference on its property only when the residual
    vanishes, in which case the two probabilities coincide.
    """
    n = psi.norm()
    rows = []
    for dn, S, rn, R in scenario.with_psi(psi).detector_pairs():
        Spsi, Rpsi = S @ psi, R @ psi
        res = (Spsi - Rpsi).norm() / n
        rows.append(InferenceRow(dn, rn, (Spsi.norm() / n) ** 2, (Rpsi.norm() / n) ** 2,
                                 res, res <= tol.abs_tol))
    return rows
