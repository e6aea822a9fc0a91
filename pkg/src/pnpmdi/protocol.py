"""MDI-QKD session engine: random choices, Bell-state announcements, sifting, QBER."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import bsm, optics, streams
from .bsm import BellOutcome
from .channel import POLARIZATIONS, ChannelModel, encoded_polarizations
from .errors import ConfigError, DataError, UndefinedStatistic
from .optics import DetectorParams

ENGINES = ("analytic", "monte-carlo")
# Trials per random stream. Fixed, so the stream layout depends only on the
# seed and n_trials, never on the worker count.
CHUNK_TRIALS = 1 << 16

_IDX = {label: i for i, label in enumerate(POLARIZATIONS)}
_OUTCOME_NAMES = ("psi+", "psi-")


@dataclass(frozen=True)
class SessionConfig:
    """Full parameterization of one simulated session.

    ``mu_a``/``mu_b`` are mean photon numbers at Charlie's beamsplitter input.
    ``intensities`` lists ``(label, factor, probability)`` intensity-modulator
    settings shared by both parties; the factor multiplies ``mu``.
    """

    mu_a: float = 0.5
    mu_b: float = 0.5
    overlap: float = 1.0
    detector: DetectorParams = field(default_factory=DetectorParams)
    misalignment: float = 0.0
    n_trials: int = 1_000_000
    seed: int = 0
    engine: str = "analytic"
    basis_probs: tuple[float, float] = (0.5, 0.5)
    eq2_as_printed: bool = False
    phase_nodes: int = 256
    blocks: int = 10
    intensities: tuple = (("signal", 1.0, 1.0),)
    channel_a: ChannelModel = field(default_factory=ChannelModel)
    channel_b: ChannelModel = field(default_factory=ChannelModel)
    workers: int = 1

    def __post_init__(self):
        problems = {}
        for name in ("mu_a", "mu_b"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                problems[name] = f"must be a finite number >= 0, got {v!r}"
        if not 0.0 <= self.overlap <= 1.0:
            problems["overlap"] = f"must lie in [0, 1], got {self.overlap!r}"
        if not math.isfinite(self.misalignment):
            problems["misalignment"] = "must be finite"
        if int(self.n_trials) != self.n_trials or self.n_trials < 1:
            problems["n_trials"] = f"must be an integer >= 1, got {self.n_trials!r}"
        if int(self.seed) != self.seed or self.seed < 0:
            problems["seed"] = f"must be an integer >= 0, got {self.seed!r}"
        if self.engine not in ENGINES:
            problems["engine"] = f"must be one of {ENGINES}, got {self.engine!r}"
        bp = self.basis_probs
        if len(bp) != 2 or any(not 0.0 <= p <= 1.0 for p in bp) or not math.isclose(sum(bp), 1.0):
            problems["basis_probs"] = f"must be two probabilities summing to 1, got {bp!r}"
        if int(self.phase_nodes) != self.phase_nodes or self.phase_nodes < 1:
            problems["phase_nodes"] = "must be an integer >= 1"
        if int(self.blocks) != self.blocks or not 2 <= self.blocks <= self.n_trials:
            problems["blocks"] = "must be an integer in [2, n_trials]"
        if not self.intensities:
            problems["intensities"] = "at least one setting is required"
        else:
            probs = [p for _, _, p in self.intensities]
            if any(f < 0 for _, f, _ in self.intensities):
                problems["intensities"] = "factors must be >= 0"
            elif any(p < 0 for p in probs) or not math.isclose(sum(probs), 1.0):
                problems["intensities"] = "probabilities must be >= 0 and sum to 1"
        if self.workers < 1:
            problems["workers"] = "must be >= 1"
        if problems:
            raise ConfigError(problems)

    def replace(self, **changes) -> "SessionConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return SessionConfig(**values)

    @property
    def intensity_factors(self) -> np.ndarray:
        return np.array([f for _, f, _ in self.intensities], dtype=float)

    @property
    def intensity_probs(self) -> np.ndarray:
        return np.array([p for _, _, p in self.intensities], dtype=float)

    def polarization_probs(self) -> np.ndarray:
        """Probability of each of H, V, D, A for one party."""
        pz, px = self.basis_probs
        return np.array([pz, pz, px, px]) / 2.0

    def party_polarizations(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit-norm polarization at Charlie for each encoding, Alice then Bob."""
        return (encoded_polarizations(self.channel_a),
                encoded_polarizations(self.channel_b, misalignment=self.misalignment))


@dataclass
class TallyTable:
    """Coincidence counts ``C[pol_a][pol_b][outcome]`` with outcome 0 = psi+, 1 = psi-.

    Counts are integers from the Monte Carlo engine and expectations from the
    analytic one. ``stddev`` is the standard deviation of each total.
    """

    counts: np.ndarray
    stddev: np.ndarray | None = None

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.shape != (4, 4, 2):
            raise DataError(f"tally must have shape (4, 4, 2), got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise DataError("tally counts must be non-negative")
        if self.stddev is None:
            self.stddev = np.zeros_like(self.counts)

    def c(self, pol_a: str, pol_b: str, outcome: BellOutcome | None = None) -> float:
        """``C_ij^pm`` for one outcome, or ``C_ij = C_ij^+ + C_ij^-`` when omitted."""
        row = self.counts[_IDX[pol_a], _IDX[pol_b]]
        if outcome is None:
            return float(row.sum())
        return float(row[int(outcome)])

    def swapped(self) -> "TallyTable":
        """Same data with Alice and Bob relabeled."""
        return TallyTable(self.counts.transpose(1, 0, 2).copy(), self.stddev.transpose(1, 0, 2).copy())

    def rows(self):
        for i, pa in enumerate(POLARIZATIONS):
            for j, pb in enumerate(POLARIZATIONS):
                for k, name in enumerate(_OUTCOME_NAMES):
                    yield pa, pb, name, float(self.counts[i, j, k]), float(self.stddev[i, j, k])


@dataclass
class TrialRecords:
    """Per-trial choices and Charlie's announcement (Monte Carlo engine only).

    Bases are 0 = Z, 1 = X; ``outcome`` follows :class:`BellOutcome`.
    """

    basis_a: np.ndarray
    bit_a: np.ndarray
    basis_b: np.ndarray
    bit_b: np.ndarray
    intensity_a: np.ndarray
    intensity_b: np.ndarray
    rel_phase: np.ndarray
    pattern: np.ndarray
    outcome: np.ndarray

    def __len__(self) -> int:
        return len(self.outcome)

    def validate(self) -> None:
        n = len(self.outcome)
        for f in fields(self):
            arr = np.asarray(getattr(self, f.name))
            if arr.ndim != 1 or len(arr) != n:
                raise DataError(f"record field {f.name!r} must be a 1-d array of length {n}")
        for name in ("basis_a", "bit_a", "basis_b", "bit_b"):
            if np.any((np.asarray(getattr(self, name)) != 0) & (np.asarray(getattr(self, name)) != 1)):
                raise DataError(f"record field {name!r} must hold 0/1 values")
        if np.any((self.outcome < 0) | (self.outcome > 2)):
            raise DataError("outcome codes must be 0, 1 or 2")
        if np.any(bsm.classify_indices(self.pattern) != self.outcome):
            raise DataError("outcome disagrees with the recorded click pattern")

    @property
    def pol_a(self) -> np.ndarray:
        return 2 * self.basis_a + self.bit_a

    @property
    def pol_b(self) -> np.ndarray:
        return 2 * self.basis_b + self.bit_b


@dataclass(frozen=True)
class QberReport:
    mu: float
    e_z: float
    e_x: float
    se_z: float
    se_x: float
    n_z: float
    n_x: float


@dataclass
class SiftedKeyPair:
    alice_bits: np.ndarray
    bob_bits: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        if not len(self.alice_bits) == len(self.bob_bits) == len(self.basis):
            raise DataError("sifted key arrays must have equal length")

    def __len__(self) -> int:
        return len(self.alice_bits)

    def error_fraction(self, basis: int) -> float:
        sel = self.basis == basis
        n = int(sel.sum())
        if n == 0:
            raise UndefinedStatistic("no sifted bits in this basis")
        return int((self.alice_bits[sel] != self.bob_bits[sel]).sum()) / n


# ---------------------------------------------------------------- engines

def _analytic_tally(config: SessionConfig) -> TallyTable:
    pols_a, pols_b = config.party_polarizations()
    p_pol = config.polarization_probs()
    factors, p_int = config.intensity_factors, config.intensity_probs
    counts = np.zeros((4, 4, 2))
    for i in range(4):
        for j in range(4):
            acc = np.zeros(2)
            for fa, qa in zip(factors, p_int):
                for fb, qb in zip(factors, p_int):
                    if qa * qb == 0:
                        continue
                    p_plus, p_minus, _ = bsm.outcome_probabilities(
                        pols_a[i], pols_b[j], config.mu_a * fa, config.mu_b * fb,
                        config.overlap, config.detector, config.phase_nodes)
                    acc += qa * qb * np.array([p_plus, p_minus])
            counts[i, j] = config.n_trials * p_pol[i] * p_pol[j] * acc
    q = counts / config.n_trials
    return TallyTable(counts, np.sqrt(config.n_trials * q * (1.0 - q)))


def _simulate_chunk(config: SessionConfig, pols_a, pols_b, chunk: int, n: int) -> dict:
    rng = streams.derive_rng(config.seed, streams.STREAM_SESSION, chunk)
    px = config.basis_probs[1]
    basis_a = (rng.random(n) < px).astype(np.int8)
    bit_a = rng.integers(0, 2, n, dtype=np.int8)
    basis_b = (rng.random(n) < px).astype(np.int8)
    bit_b = rng.integers(0, 2, n, dtype=np.int8)
    n_int = len(config.intensities)
    int_a = rng.choice(n_int, size=n, p=config.intensity_probs).astype(np.int8)
    int_b = rng.choice(n_int, size=n, p=config.intensity_probs).astype(np.int8)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(2, n))
    rel_phase = (theta[1] - theta[0]) % (2.0 * np.pi)

    factors = config.intensity_factors
    alpha_a = np.sqrt(config.mu_a * factors[int_a])[:, None] * pols_a[2 * basis_a + bit_a]
    alpha_b = np.sqrt(config.mu_b * factors[int_b])[:, None] * pols_b[2 * basis_b + bit_b]
    means = optics.detector_means(alpha_a, alpha_b, config.overlap, rel_phase)
    pattern = optics.sample_patterns(means, config.detector, rng).astype(np.int8)
    return dict(basis_a=basis_a, bit_a=bit_a, basis_b=basis_b, bit_b=bit_b,
                intensity_a=int_a, intensity_b=int_b, rel_phase=rel_phase,
                pattern=pattern, outcome=bsm.classify_indices(pattern))


def simulate_trials(config: SessionConfig) -> TrialRecords:
    """Monte Carlo trials; bitwise independent of ``config.workers``."""
    pols_a, pols_b = config.party_polarizations()
    n_chunks = -(-config.n_trials // CHUNK_TRIALS)
    sizes = [min(CHUNK_TRIALS, config.n_trials - k * CHUNK_TRIALS) for k in range(n_chunks)]

    def work(k):
        return _simulate_chunk(config, pols_a, pols_b, k, sizes[k])

    if config.workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(work, range(n_chunks)))
    else:
        parts = [work(k) for k in range(n_chunks)]
    return TrialRecords(**{f.name: np.concatenate([p[f.name] for p in parts])
                           for f in fields(TrialRecords)})


def tally_records(records: TrialRecords, blocks: int = 10) -> TallyTable:
    """Tally conclusive trials; stddev from the spread over contiguous blocks."""
    records.validate()
    n = len(records)
    conclusive = records.outcome != BellOutcome.INCONCLUSIVE
    cell = (records.pol_a.astype(np.int64) * 4 + records.pol_b) * 2 + records.outcome
    cell = cell[conclusive]
    counts = np.bincount(cell, minlength=32).reshape(4, 4, 2)
    if blocks >= 2 and n >= blocks:
        block_of = (np.arange(n, dtype=np.int64) * blocks // n)[conclusive]
        per_block = np.zeros((blocks, 32))
        np.add.at(per_block, (block_of, cell), 1)
        stddev = (per_block.std(axis=0, ddof=1) * math.sqrt(blocks)).reshape(4, 4, 2)
    else:
        stddev = np.sqrt(counts)
    return TallyTable(counts, stddev)


def run_session(config: SessionConfig) -> tuple[TallyTable, TrialRecords | None]:
    """Run one session; trial records exist only for the Monte Carlo engine."""
    if config.engine == "analytic":
        return _analytic_tally(config), None
    records = simulate_trials(config)
    return tally_records(records, config.blocks), records


# ---------------------------------------------------------------- analysis

def sift(records: TrialRecords) -> SiftedKeyPair:
    """Keep conclusive, basis-matched trials and apply Bob's bit flip.

    Z basis: both psi+ and psi- are anti-correlated, Bob always flips.
    X basis: psi+ is correlated, psi- anti-correlated, Bob flips on psi- only.
    """
    records.validate()
    keep = (records.outcome != BellOutcome.INCONCLUSIVE) & (records.basis_a == records.basis_b)
    basis = np.asarray(records.basis_a[keep])
    outcome = records.outcome[keep]
    flip = (basis == 0) | (outcome == BellOutcome.PSI_MINUS)
    bob = np.asarray(records.bit_b[keep]) ^ flip.astype(np.int8)
    return SiftedKeyPair(np.asarray(records.bit_a[keep]), bob, basis)


def _ratio(num: float, den: float, what: str) -> float:
    if den <= 0:
        raise UndefinedStatistic(f"{what}: no coincidences in this basis")
    return num / den


def _z_terms(t: TallyTable) -> tuple[float, float]:
    err = t.c("H", "H") + t.c("V", "V")
    return err, err + t.c("H", "V") + t.c("V", "H")


def _x_terms(t: TallyTable, as_printed: bool) -> tuple[float, float]:
    plus, minus = BellOutcome.PSI_PLUS, BellOutcome.PSI_MINUS
    dd = t.c("D", "D", plus if as_printed else minus)
    err = dd + t.c("A", "A", minus) + t.c("D", "A", plus) + t.c("A", "D", plus)
    den = t.c("D", "D") + t.c("A", "A") + t.c("D", "A") + t.c("A", "D")
    return err, den


def qber_z(t: TallyTable) -> float:
    """(C_HH + C_VV) / (C_HH + C_VV + C_HV + C_VH)."""
    return _ratio(*_z_terms(t), "E_Z")


def qber_x(t: TallyTable, as_printed: bool = False) -> float:
    """X-basis error rate.

    Erroneous coincidences are psi- for DD and AA and psi+ for DA and AD. With
    ``as_printed`` the DD term uses psi+ instead, reproducing the formula as it
    appears in print (which contradicts the error assignment above).
    """
    return _ratio(*_x_terms(t, as_printed), "E_X")


def qber_uncertainty(t: TallyTable, as_printed: bool = False) -> tuple[float, float]:
    """Binomial standard errors sqrt(E(1-E)/N) of E_Z and E_X."""
    out = []
    for err, n in (_z_terms(t), _x_terms(t, as_printed)):
        e = _ratio(err, n, "standard error")
        out.append(math.sqrt(max(e * (1.0 - e), 0.0) / n))
    return out[0], out[1]


def qber_report(t: TallyTable, mu: float = float("nan"), as_printed: bool = False) -> QberReport:
    se_z, se_x = qber_uncertainty(t, as_printed)
    return QberReport(mu=mu, e_z=qber_z(t), e_x=qber_x(t, as_printed), se_z=se_z, se_x=se_x,
                      n_z=_z_terms(t)[1], n_x=_x_terms(t, as_printed)[1])
