"""The plug-and-play round trip seen by one party.

Charlie's pulse travels through the fiber (Jones matrix ``U``), is reflected by
the Faraday mirror, phase-randomized, encoded by a half-wave plate, attenuated
by the intensity modulator and sent back through the same fiber. A reciprocal
fiber acts as ``U.T`` on the way back, so the polarization at Charlie is
``U.T @ HWP @ F @ U @ launch``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import optics
from .errors import InvalidArgument
from .optics import FieldState

POLARIZATIONS = ("H", "V", "D", "A")
BASES = ("Z", "X")

# Linear-polarization angle of each BB84 state.
_STATE_ANGLE = {"H": 0.0, "V": math.pi / 2, "D": math.pi / 4, "A": -math.pi / 4}


@dataclass(frozen=True)
class Encoding:
    """One BB84 choice: Z bit 0/1 -> H/V, X bit 0/1 -> D/A."""

    basis: str
    bit: int

    def __post_init__(self):
        if self.basis not in BASES or self.bit not in (0, 1):
            raise InvalidArgument(f"invalid encoding {self.basis!r}/{self.bit!r}")

    @classmethod
    def from_label(cls, label: str) -> "Encoding":
        return cls.from_index(POLARIZATIONS.index(label))

    @classmethod
    def from_index(cls, index: int) -> "Encoding":
        return cls(BASES[index // 2], index % 2)

    @property
    def index(self) -> int:
        return 2 * BASES.index(self.basis) + self.bit

    @property
    def label(self) -> str:
        return POLARIZATIONS[self.index]

    @property
    def state(self) -> np.ndarray:
        return optics.STATES[self.label]


@dataclass(frozen=True)
class ChannelModel:
    forward_unitary: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex))
    one_way_loss_db: float = 0.0
    reciprocal: bool = True

    def __post_init__(self):
        object.__setattr__(self, "forward_unitary", np.asarray(self.forward_unitary, dtype=complex))
        if not self.one_way_loss_db >= 0:
            raise InvalidArgument(f"one_way_loss_db must be >= 0, got {self.one_way_loss_db!r}")

    @property
    def transmission(self) -> float:
        """Round-trip intensity transmission."""
        return 10.0 ** (-2.0 * self.one_way_loss_db / 10.0)

    @property
    def return_unitary(self) -> np.ndarray:
        u = self.forward_unitary
        # The non-reciprocal branch exists as a negative control for the
        # auto-compensation check.
        return u.T if self.reciprocal else u


@dataclass(frozen=True)
class SourceParams:
    """Launch intensity and the intensity-modulator settings of one party.

    ``intensities`` lists ``(label, attenuation factor)``; ``probabilities``
    defaults to a uniform choice.
    """

    launch_intensity: float
    intensities: tuple = (("signal", 1.0),)
    probabilities: tuple | None = None

    def __post_init__(self):
        if not self.launch_intensity >= 0:
            raise InvalidArgument("launch_intensity must be >= 0")
        if not self.intensities:
            raise InvalidArgument("at least one intensity setting is required")
        for label, factor in self.intensities:
            if not factor >= 0:
                raise InvalidArgument(f"intensity {label!r} has negative factor {factor!r}")
        if self.probabilities is not None:
            p = np.asarray(self.probabilities, dtype=float)
            if p.shape != (len(self.intensities),) or np.any(p < 0) or not math.isclose(p.sum(), 1.0):
                raise InvalidArgument("intensity probabilities must match settings and sum to 1")

    @property
    def choice_probabilities(self) -> np.ndarray:
        if self.probabilities is None:
            return np.full(len(self.intensities), 1.0 / len(self.intensities))
        return np.asarray(self.probabilities, dtype=float)

    @property
    def factors(self) -> np.ndarray:
        return np.array([f for _, f in self.intensities], dtype=float)


@dataclass(frozen=True)
class PartyChoice:
    encoding: Encoding
    intensity: int = 0


def random_channel_unitary(rng: np.random.Generator) -> np.ndarray:
    """Haar-random element of SU(2), from a uniformly random unit quaternion."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    a = complex(q[0], q[1])
    b = complex(q[2], q[3])
    return np.array([[a, -b.conjugate()], [b, a.conjugate()]])


def encoder_angle(target: Encoding | str, launch_pol=optics.H) -> float:
    """Waveplate angle that turns the reflected launch state into ``target``.

    Calibrated on the bench, i.e. for an identity fiber.
    """
    label = target if isinstance(target, str) else target.label
    s = optics.faraday_mirror_matrix() @ np.asarray(launch_pol, dtype=complex)
    s = s * np.exp(-1j * np.angle(s[np.argmax(np.abs(s))]))
    if np.max(np.abs(s.imag)) > 1e-12:
        raise InvalidArgument("launch polarization must be linear")
    incoming = math.atan2(s[1].real, s[0].real)
    return 0.5 * (_STATE_ANGLE[label] + incoming)


def round_trip(input_pol, channel: ChannelModel, encoder_angle: float | None,
               intensity: float = 1.0, phase: float = 0.0) -> tuple[np.ndarray, complex]:
    """Polarization and amplitude scale of a pulse after one plug-and-play round trip.

    ``encoder_angle=None`` means a passive encoder (no waveplate). The amplitude
    scale folds in the round-trip loss, the intensity setting and the phase.
    """
    u = channel.forward_unitary
    if not optics.is_unitary(u):
        raise InvalidArgument("channel forward_unitary is not unitary")
    if not intensity >= 0:
        raise InvalidArgument(f"intensity must be >= 0, got {intensity!r}")
    enc = np.eye(2) if encoder_angle is None else optics.hwp_matrix(encoder_angle)
    out = channel.return_unitary @ enc @ optics.faraday_mirror_matrix() @ u @ np.asarray(input_pol, dtype=complex)
    scale = 10.0 ** (-2.0 * channel.one_way_loss_db / 20.0) * math.sqrt(intensity) * np.exp(1j * phase)
    return out, complex(scale)


def encoded_polarizations(channel: ChannelModel, launch_pol=optics.H,
                          misalignment: float = 0.0) -> np.ndarray:
    """Unit-intensity output polarization for each of H, V, D, A; shape ``(4, 2)``."""
    rot = optics.rotation_matrix(misalignment)
    rows = []
    for label in POLARIZATIONS:
        pol, _ = round_trip(launch_pol, channel, encoder_angle(label, launch_pol))
        rows.append(rot @ pol)
    return np.array(rows)


def prepare_field(choice_a: PartyChoice, choice_b: PartyChoice,
                  channels: tuple[ChannelModel, ChannelModel],
                  sources: tuple[SourceParams, SourceParams],
                  overlap: float, rng: np.random.Generator | None = None,
                  misalignment: float = 0.0, launch_pol=optics.H,
                  sync_phase: float | None = None) -> FieldState:
    """Build the two pulses arriving at Charlie for one trial.

    Each party's phase randomizer draws an independent uniform phase; only the
    difference survives in the returned state. With ``sync_phase`` the
    randomizers are locked and the relative phase is that value.
    ``misalignment`` rotates Bob's encoded polarization.
    """
    if sync_phase is None:
        if rng is None:
            raise InvalidArgument("an rng is required unless the phase is synchronized")
        theta_a, theta_b = rng.uniform(0.0, 2.0 * np.pi, size=2)
        rel_phase = float((theta_b - theta_a) % (2.0 * np.pi))
    else:
        rel_phase = float(sync_phase)

    alphas = []
    for choice, channel, source, eps in ((choice_a, channels[0], sources[0], 0.0),
                                         (choice_b, channels[1], sources[1], misalignment)):
        factor = source.intensities[choice.intensity][1]
        pol, scale = round_trip(launch_pol, channel,
                                encoder_angle(choice.encoding, launch_pol), factor)
        pol = optics.rotation_matrix(eps) @ pol
        alphas.append(math.sqrt(source.launch_intensity) * abs(scale) * pol)
    return FieldState(alphas[0], alphas[1], overlap, rel_phase)
