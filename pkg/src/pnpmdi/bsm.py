"""Linear-optics Bell-state measurement on the four detector clicks."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import optics
from .optics import DetectorParams, FieldState


class BellOutcome(enum.IntEnum):
    PSI_PLUS = 0
    PSI_MINUS = 1
    INCONCLUSIVE = 2

    @property
    def symbol(self) -> str:
        return {0: "psi+", 1: "psi-", 2: "inconclusive"}[int(self)]


@dataclass(frozen=True, order=True)
class ClickPattern:
    """Clicks of SPD1..SPD4; ordering is lexicographic, matching :attr:`index`."""

    clicks: tuple[bool, bool, bool, bool]

    def __post_init__(self):
        if len(self.clicks) != 4:
            raise ValueError("a click pattern has exactly four detectors")
        object.__setattr__(self, "clicks", tuple(bool(c) for c in self.clicks))

    @classmethod
    def of(cls, *detectors: int) -> "ClickPattern":
        """Pattern in which exactly the listed SPDs (1-based) fired."""
        return cls(tuple(i in detectors for i in range(1, 5)))

    @classmethod
    def from_index(cls, index: int) -> "ClickPattern":
        return cls(tuple(bool(b) for b in optics.PATTERN_BITS[index]))

    @property
    def index(self) -> int:
        c1, c2, c3, c4 = self.clicks
        return 8 * c1 + 4 * c2 + 2 * c3 + c4

    @property
    def fired(self) -> tuple[int, ...]:
        return tuple(i + 1 for i, c in enumerate(self.clicks) if c)


ALL_PATTERNS = tuple(ClickPattern.from_index(k) for k in range(optics.N_PATTERNS))

_PSI_PLUS_PAIRS = {(1, 2), (3, 4)}
_PSI_MINUS_PAIRS = {(1, 4), (2, 3)}


def classify(pattern: ClickPattern) -> BellOutcome:
    """Exactly two clicks in {1,2} or {3,4} is psi+, in {1,4} or {2,3} psi-.

    Anything else, including three- and four-fold clicks, is inconclusive.
    """
    fired = pattern.fired
    if fired in _PSI_PLUS_PAIRS:
        return BellOutcome.PSI_PLUS
    if fired in _PSI_MINUS_PAIRS:
        return BellOutcome.PSI_MINUS
    return BellOutcome.INCONCLUSIVE


# Outcome of each pattern index, for vectorized classification.
OUTCOME_TABLE = np.array([int(classify(p)) for p in ALL_PATTERNS], dtype=np.int8)


def classify_indices(indices) -> np.ndarray:
    return OUTCOME_TABLE[np.asarray(indices)]


def outcome_fibers(pattern_probs: np.ndarray) -> np.ndarray:
    """Sum pattern probabilities ``(..., 16)`` into ``(..., 3)`` outcome probabilities."""
    out = np.zeros(pattern_probs.shape[:-1] + (3,))
    for k in range(3):
        out[..., k] = pattern_probs[..., OUTCOME_TABLE == k].sum(axis=-1)
    return out


def outcome_probabilities(pol_a, pol_b, mu_a: float, mu_b: float, overlap: float,
                          params: DetectorParams, phase_nodes: int = 256
                          ) -> tuple[float, float, float]:
    """Probabilities of (psi+, psi-, inconclusive) for one pair of encoded pulses."""
    field = FieldState.from_polarizations(pol_a, pol_b, mu_a, mu_b, overlap)
    dist = optics.joint_pattern_distribution(field, params, phase_nodes)
    p_plus, p_minus, p_inc = outcome_fibers(dist)
    return float(p_plus), float(p_minus), float(p_inc)
