"""Interference scans, sine fits and the BSM / QBER reproductions.

The interference scans use the direct-connection topology: each beamsplitter
output feeds a single detector with no polarizing split, so a port's mean
photon number is the sum of its H and V parts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import bsm, optics, streams
from .channel import ChannelModel, random_channel_unitary, round_trip
from .errors import InvalidArgument
from .optics import DetectorParams
from .protocol import (QberReport, SessionConfig, TallyTable, qber_report, qber_x, qber_z,
                       run_session)


@dataclass
class ScanCurve:
    x: np.ndarray
    y: np.ndarray
    y_err: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.y_err = np.asarray(self.y_err, dtype=float)
        if not (self.x.shape == self.y.shape == self.y_err.shape) or self.x.ndim != 1:
            raise InvalidArgument("scan arrays must be 1-d with equal lengths")
        if np.any(self.y < 0):
            raise InvalidArgument("scan rates must be non-negative")

    def visibility(self) -> float:
        """(max - min) / (max + min) of the raw samples."""
        hi, lo = float(self.y.max()), float(self.y.min())
        return 0.0 if hi + lo == 0 else (hi - lo) / (hi + lo)


@dataclass(frozen=True)
class SineFit:
    """Least-squares fit of ``y = offset - amplitude * cos(harmonic * x - phase)``."""

    offset: float
    amplitude: float
    phase: float
    residual_norm: float
    harmonic: int = 4

    @property
    def visibility(self) -> float:
        return 0.0 if self.offset == 0 else self.amplitude / self.offset

    def __call__(self, x):
        return self.offset - self.amplitude * np.cos(self.harmonic * np.asarray(x) - self.phase)


def fit_sine(curve: ScanCurve, harmonic: int = 4) -> SineFit:
    """Fit offset, amplitude and phase at a fixed angular frequency.

    The model is linear in ``(B, a, b)`` for ``B + a cos(hx) + b sin(hx)``, so
    the fit is a single linear least-squares solve. ``harmonic=4`` matches the
    90-degree period of coincidences versus waveplate angle.
    """
    x, y = curve.x, curve.y
    if len(x) < 6:
        raise InvalidArgument(f"need at least 6 samples to fit, got {len(x)}")
    if np.ptp(x) < math.pi / harmonic - 1e-12:
        raise InvalidArgument("samples must span at least half a period")
    design = np.column_stack([np.ones_like(x), np.cos(harmonic * x), np.sin(harmonic * x)])
    (offset, a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    amplitude = math.hypot(a, b)
    # Constant data leaves a and b at round-off level.
    if amplitude <= 1e-12 * max(abs(offset), 1e-300):
        amplitude, phase = 0.0, 0.0
    else:
        phase = math.atan2(-b, -a)
    resid = float(np.linalg.norm(design @ np.array([offset, a, b]) - y))
    return SineFit(float(offset), amplitude, phase, resid, harmonic)


def hom_visibility(v_sine: float) -> float:
    """Convert peak-to-peak sine visibility to HOM dip depth over the maximum."""
    if not 0.0 <= v_sine < 1.0:
        raise InvalidArgument(f"sine visibility must lie in [0, 1), got {v_sine!r}")
    return 2.0 * v_sine / (1.0 + v_sine)


# ---------------------------------------------------------------- scans

def _port_means(alpha_a, alpha_b, overlap, phase) -> np.ndarray:
    means = optics.detector_means(alpha_a, alpha_b, overlap, phase)
    return np.stack([means[..., 0] + means[..., 1], means[..., 2] + means[..., 3]], axis=-1)


def _block_rates(hits: np.ndarray, blocks: int) -> tuple[float, float]:
    n = len(hits)
    block_of = np.arange(n) * blocks // n
    sums = np.bincount(block_of, weights=hits, minlength=blocks)
    sizes = np.bincount(block_of, minlength=blocks)
    rates = sums / sizes
    return float(hits.mean()), float(rates.std(ddof=1))


def _expected_block_std(p: float, config: SessionConfig) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / (config.n_trials / config.blocks))


def scan_phase(sync: bool, config: SessionConfig, phases, port: int = 0) -> ScanCurve:
    """Singles rate at one output port versus the path phase.

    Both parties send H. With ``sync`` the phase randomizers are locked and the
    relative phase equals the scan value; otherwise each trial adds an
    independent uniform phase on top of it.
    """
    phases = np.asarray(phases, dtype=float)
    if phases.size == 0:
        raise InvalidArgument("phase grid is empty")
    pols_a, pols_b = config.party_polarizations()
    alpha_a = math.sqrt(config.mu_a) * pols_a[0]
    alpha_b = math.sqrt(config.mu_b) * pols_b[0]
    y, y_err = [], []
    for k, phi in enumerate(phases):
        if config.engine == "analytic":
            grid = np.array([phi]) if sync else phi + optics.phase_nodes_grid(config.phase_nodes)
            p = float(np.mean(optics.click_probability(
                _port_means(alpha_a, alpha_b, config.overlap, grid)[..., port], config.detector)))
            y.append(p)
            y_err.append(_expected_block_std(p, config))
            continue
        rng = streams.derive_rng(config.seed, streams.STREAM_SCAN, 0 if sync else 1, k)
        n = config.n_trials
        if sync:
            rel = np.full(n, phi)
        else:
            theta = rng.uniform(0.0, 2.0 * np.pi, size=(2, n))
            rel = phi + theta[1] - theta[0]
        probs = optics.click_probability(
            _port_means(alpha_a, alpha_b, config.overlap, rel)[..., port], config.detector)
        hits = (rng.random(n) < probs).astype(float)
        rate, err = _block_rates(hits, config.blocks)
        y.append(rate)
        y_err.append(err)
    return ScanCurve(phases, y, y_err)


def scan_hwp(config: SessionConfig, angles, hwp1: float = 0.0) -> ScanCurve:
    """Cross-output coincidence rate versus Bob's waveplate angle (radians).

    Alice's waveplate stays at ``hwp1``; phase randomization is always on.
    """
    angles = np.asarray(angles, dtype=float)
    if angles.size == 0:
        raise InvalidArgument("angle list is empty")
    if np.ptp(angles) > math.pi / 2 + 1e-12:
        raise InvalidArgument("waveplate angles must lie within one 90-degree period")
    launch = optics.H
    pol_a, _ = round_trip(launch, config.channel_a, hwp1)
    alpha_a = math.sqrt(config.mu_a) * pol_a
    rot = optics.rotation_matrix(config.misalignment)
    y, y_err = [], []
    for k, theta in enumerate(angles):
        pol_b, _ = round_trip(launch, config.channel_b, float(theta))
        alpha_b = math.sqrt(config.mu_b) * (rot @ pol_b)
        if config.engine == "analytic":
            grid = optics.phase_nodes_grid(config.phase_nodes)
            click = optics.click_probability(_port_means(alpha_a, alpha_b, config.overlap, grid),
                                             config.detector)
            p = float(np.mean(click[:, 0] * click[:, 1]))
            y.append(p)
            y_err.append(_expected_block_std(p, config))
            continue
        rng = streams.derive_rng(config.seed, streams.STREAM_SCAN, 2, k)
        n = config.n_trials
        rel = rng.uniform(0.0, 2.0 * np.pi, size=n)
        click = optics.click_probability(_port_means(alpha_a, alpha_b, config.overlap, rel),
                                         config.detector)
        fired = rng.random((n, 2)) < click
        rate, err = _block_rates((fired[:, 0] & fired[:, 1]).astype(float), config.blocks)
        y.append(rate)
        y_err.append(err)
    return ScanCurve(angles, y, y_err)


# ---------------------------------------------------------------- reproductions

def reproduce_bsm_bars(config: SessionConfig) -> TallyTable:
    """psi+/psi- counts for each of the 16 fixed polarization pairs.

    Every pair is run for ``config.n_trials`` trials at ``mu_a``/``mu_b``;
    ``stddev`` comes from the spread over ``config.blocks`` accumulation blocks.
    Divide by ``n_trials`` for rates per trial.
    """
    pols_a, pols_b = config.party_polarizations()
    counts = np.zeros((4, 4, 2))
    stddev = np.zeros((4, 4, 2))
    for i, j in itertools.product(range(4), repeat=2):
        if config.engine == "analytic":
            p = bsm.outcome_probabilities(pols_a[i], pols_b[j], config.mu_a, config.mu_b,
                                          config.overlap, config.detector, config.phase_nodes)
            for k in range(2):
                counts[i, j, k] = config.n_trials * p[k]
                stddev[i, j, k] = math.sqrt(config.n_trials * p[k] * (1.0 - p[k]))
            continue
        rng = streams.derive_rng(config.seed, streams.STREAM_BARS, 4 * i + j)
        n = config.n_trials
        rel = rng.uniform(0.0, 2.0 * np.pi, size=n)
        means = optics.detector_means(math.sqrt(config.mu_a) * pols_a[i],
                                      math.sqrt(config.mu_b) * pols_b[j], config.overlap, rel)
        outcome = bsm.classify_indices(optics.sample_patterns(means, config.detector, rng))
        for k in range(2):
            hits = (outcome == k).astype(float)
            rate, err = _block_rates(hits, config.blocks)
            counts[i, j, k] = hits.sum()
            stddev[i, j, k] = err * n / math.sqrt(config.blocks)
    return TallyTable(counts, stddev)


def reproduce_table1(mus, config: SessionConfig) -> list[QberReport]:
    """One session per mean photon number (equal for Alice and Bob)."""
    reports = []
    for mu in mus:
        tally, _ = run_session(config.replace(mu_a=float(mu), mu_b=float(mu)))
        reports.append(qber_report(tally, mu=float(mu), as_printed=config.eq2_as_printed))
    return reports


# Reported QBER central values: mu -> (E_Z, E_X), and the weights used to compare.
TABLE1 = {0.3: (0.0037, 0.265), 0.5: (0.0030, 0.267)}
TABLE1_SIGMA = (0.0005, 0.004)


def fit_imperfections(dark_probs, misalignments, overlaps, efficiency: float = 0.5,
                      phase_nodes: int = 64, targets=TABLE1):
    """Coarse grid search for (p_dark, misalignment, overlap) closest to the reported QBERs.

    Returns candidates sorted by a weighted squared distance; each entry is
    ``(cost, dark_prob, misalignment, overlap, {mu: (E_Z, E_X)})``.
    """
    out = []
    for pd, eps, xi in itertools.product(dark_probs, misalignments, overlaps):
        base = SessionConfig(overlap=xi, misalignment=eps, phase_nodes=phase_nodes,
                             detector=DetectorParams(efficiency, pd))
        values, cost = {}, 0.0
        for mu, (ez_t, ex_t) in targets.items():
            tally, _ = run_session(base.replace(mu_a=mu, mu_b=mu))
            ez, ex = qber_z(tally), qber_x(tally)
            values[mu] = (ez, ex)
            cost += ((ez - ez_t) / TABLE1_SIGMA[0]) ** 2 + ((ex - ex_t) / TABLE1_SIGMA[1]) ** 2
        out.append((cost, pd, eps, xi, values))
    out.sort(key=lambda r: r[0])
    return out


@dataclass(frozen=True)
class FaradayCheck:
    samples: int
    worst_fidelity: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.worst_fidelity > self.threshold


def faraday_check(samples: int, seed: int, reciprocal: bool = True, identity: bool = False,
                  threshold: float = 1.0 - 1e-10) -> FaradayCheck:
    """Round-trip random fibers with a passive encoder and compare against ``F @ input``.

    Each channel is probed with H, D and one random elliptical input.
    """
    if samples < 1:
        raise InvalidArgument("samples must be >= 1")
    rng = streams.derive_rng(seed, streams.STREAM_FARADAY)
    fm = optics.faraday_mirror_matrix()
    worst = 1.0
    for _ in range(samples):
        u = np.eye(2, dtype=complex) if identity else random_channel_unitary(rng)
        channel = ChannelModel(forward_unitary=u, reciprocal=reciprocal)
        probe = optics.jones(*(rng.standard_normal(2) + 1j * rng.standard_normal(2)), normalize=True)
        for pol in (optics.H, optics.D, probe):
            out, _ = round_trip(pol, channel, None)
            worst = min(worst, optics.fidelity(fm @ pol, out))
    return FaradayCheck(samples, worst, threshold)
