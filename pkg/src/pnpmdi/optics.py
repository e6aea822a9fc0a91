"""Polarization algebra, beamsplitter interference and threshold detection.

Jones vectors are complex numpy arrays of shape ``(2,)`` ordered (H, V) and
Jones matrices are ``(2, 2)`` arrays. The four detectors behind Charlie's
beamsplitter are numbered SPD1..SPD4 = (out1-H, out1-V, out2-H, out2-V).

Beamsplitter convention: ``out1 = (a + i b)/sqrt(2)``, ``out2 = (i a + b)/sqrt(2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

SQRT_HALF = 1.0 / math.sqrt(2.0)

H = np.array([1.0, 0.0], dtype=complex)
V = np.array([0.0, 1.0], dtype=complex)
D = np.array([SQRT_HALF, SQRT_HALF], dtype=complex)
A = np.array([SQRT_HALF, -SQRT_HALF], dtype=complex)

STATES = {"H": H, "V": V, "D": D, "A": A}

N_DETECTORS = 4
N_PATTERNS = 16

# Row k holds the clicks (SPD1..SPD4) of pattern index k = 8*c1 + 4*c2 + 2*c3 + c4.
PATTERN_BITS = np.array(
    [[(k >> (3 - i)) & 1 for i in range(N_DETECTORS)] for k in range(N_PATTERNS)],
    dtype=bool,
)


def jones(h: complex, v: complex, normalize: bool = False) -> np.ndarray:
    vec = np.array([h, v], dtype=complex)
    if normalize:
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise InvalidArgument("cannot normalize the zero Jones vector")
        vec = vec / norm
    return vec


def is_unitary(m: np.ndarray, atol: float = 1e-10) -> bool:
    m = np.asarray(m)
    return m.shape == (2, 2) and np.allclose(m.conj().T @ m, np.eye(2), rtol=0, atol=atol)


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Overlap |<a|b>|^2 of two Jones vectors, insensitive to global phase."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return float(abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real))


def hwp_matrix(angle: float) -> np.ndarray:
    """Half-wave plate with fast axis at ``angle`` radians from H.

    Maps linear polarization at angle ``alpha`` to ``2*angle - alpha``.
    """
    if not math.isfinite(angle):
        raise InvalidArgument(f"waveplate angle must be finite, got {angle!r}")
    c, s = math.cos(2 * angle), math.sin(2 * angle)
    return np.array([[c, s], [s, -c]], dtype=complex)


def rotation_matrix(angle: float) -> np.ndarray:
    """Rotates linear polarization by ``angle`` radians (counterclockwise)."""
    if not math.isfinite(angle):
        raise InvalidArgument(f"rotation angle must be finite, got {angle!r}")
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]], dtype=complex)


def faraday_mirror_matrix() -> np.ndarray:
    """Faraday mirror in the fiber's fixed frame, global phase dropped.

    ``F = [[0, 1], [-1, 0]]`` sends every polarization to its orthogonal one.
    For any ``U`` in SU(2), ``U.T @ F @ U == F``, which is what cancels the
    fiber birefringence on a reciprocal round trip.
    """
    return np.array([[0, 1], [-1, 0]], dtype=complex)


@dataclass(frozen=True)
class DetectorParams:
    """Threshold detector: efficiency and dark-click probability per trial slot."""

    efficiency: float = 0.5
    dark_prob: float = 1e-5

    def __post_init__(self):
        for name in ("efficiency", "dark_prob"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise InvalidArgument(f"{name} must lie in [0, 1], got {value!r}")


@dataclass
class FieldState:
    """Coherent amplitudes of both pulses at the beamsplitter input.

    ``alpha_a`` and ``alpha_b`` are (H, V) amplitudes in units of sqrt(photons);
    Bob's pulse overlaps Alice's mode with fraction ``overlap`` and arrives with
    phase ``rel_phase`` relative to Alice.
    """

    alpha_a: np.ndarray
    alpha_b: np.ndarray
    overlap: float = 1.0
    rel_phase: float = 0.0

    def __post_init__(self):
        self.alpha_a = np.asarray(self.alpha_a, dtype=complex)
        self.alpha_b = np.asarray(self.alpha_b, dtype=complex)
        if self.alpha_a.shape != (2,) or self.alpha_b.shape != (2,):
            raise InvalidArgument("field amplitudes must be complex 2-vectors")
        if not (0.0 <= self.overlap <= 1.0):
            raise InvalidArgument(f"overlap must lie in [0, 1], got {self.overlap!r}")

    @classmethod
    def from_polarizations(cls, pol_a, pol_b, mu_a: float, mu_b: float,
                           overlap: float = 1.0, rel_phase: float = 0.0) -> "FieldState":
        if mu_a < 0 or mu_b < 0:
            raise InvalidArgument("mean photon numbers must be non-negative")
        pol_a = jones(*pol_a, normalize=True)
        pol_b = jones(*pol_b, normalize=True)
        return cls(math.sqrt(mu_a) * pol_a, math.sqrt(mu_b) * pol_b, overlap, rel_phase)

    @property
    def mu_a(self) -> float:
        return float(np.vdot(self.alpha_a, self.alpha_a).real)

    @property
    def mu_b(self) -> float:
        return float(np.vdot(self.alpha_b, self.alpha_b).real)


def detector_means(alpha_a, alpha_b, overlap, phase) -> np.ndarray:
    """Vectorized mean photon numbers at SPD1..SPD4.

    ``alpha_a``/``alpha_b`` have shape ``(..., 2)``; ``overlap`` and ``phase``
    broadcast against the leading dimensions. Returns shape ``(..., 4)``.
    """
    alpha_a = np.asarray(alpha_a, dtype=complex)
    alpha_b = np.asarray(alpha_b, dtype=complex)
    overlap = np.asarray(overlap, dtype=float)
    phase = np.asarray(phase, dtype=float)

    matched = (1j * np.exp(1j * phase) * np.sqrt(overlap))[..., None] * alpha_b
    unmatched = 0.5 * (1.0 - overlap)[..., None] * np.abs(alpha_b) ** 2
    out1 = 0.5 * np.abs(alpha_a + matched) ** 2 + unmatched
    out2 = 0.5 * np.abs(alpha_a - matched) ** 2 + unmatched
    return np.concatenate([out1, out2], axis=-1)


def beamsplitter_outputs(field: FieldState, phase: float | None = None) -> np.ndarray:
    """Mean photon numbers at the four detectors for one relative phase.

    Uses ``field.rel_phase`` unless ``phase`` is given.
    """
    phi = field.rel_phase if phase is None else phase
    return detector_means(field.alpha_a, field.alpha_b, field.overlap, phi)


def click_probability(mean_photons, params: DetectorParams):
    """Probability that a threshold detector fires in one slot.

    ``1 - (1 - p_dark) * exp(-eta * n)``; accepts scalars or arrays.
    """
    n = np.asarray(mean_photons, dtype=float)
    if np.any(n < 0) or np.any(np.isnan(n)):
        raise InvalidArgument("mean photon number must be non-negative")
    p = 1.0 - (1.0 - params.dark_prob) * np.exp(-params.efficiency * n)
    return float(p) if p.ndim == 0 else p


def pattern_probabilities(click_probs) -> np.ndarray:
    """Independent-detector probabilities of all 16 click patterns.

    ``click_probs`` has shape ``(..., 4)``; the result has shape ``(..., 16)``
    indexed like :data:`PATTERN_BITS`.
    """
    p = np.asarray(click_probs, dtype=float)[..., None, :]
    return np.prod(np.where(PATTERN_BITS, p, 1.0 - p), axis=-1)


def phase_nodes_grid(phase_nodes: int) -> np.ndarray:
    if int(phase_nodes) != phase_nodes or phase_nodes < 1:
        raise InvalidArgument(f"phase_nodes must be a positive integer, got {phase_nodes!r}")
    return 2.0 * np.pi * np.arange(int(phase_nodes)) / int(phase_nodes)


def joint_pattern_distribution(field: FieldState, params: DetectorParams,
                               phase_nodes: int = 256) -> np.ndarray:
    """Phase-averaged distribution over the 16 click patterns.

    The relative phase is averaged with the uniform rule on ``phase_nodes``
    points of [0, 2*pi); the integrand is smooth and periodic, so the error
    falls off faster than any power of the node count.
    """
    phis = phase_nodes_grid(phase_nodes)
    means = detector_means(field.alpha_a, field.alpha_b, field.overlap, phis)
    probs = pattern_probabilities(click_probability(means, params))
    return probs.mean(axis=0)


_PATTERN_WEIGHTS = np.array([8, 4, 2, 1])


def sample_patterns(means, params: DetectorParams, rng: np.random.Generator) -> np.ndarray:
    """Draw one click pattern per row of ``means`` (shape ``(n, 4)``); returns pattern indices."""
    probs = click_probability(np.asarray(means, dtype=float), params)
    clicks = rng.random(probs.shape) < probs
    return clicks.astype(np.int64) @ _PATTERN_WEIGHTS
