"""Plug-and-play MDI-QKD simulator: weak coherent pulses, Bell-state measurement, QBER."""

__version__ = "0.1.0"

from .bsm import BellOutcome, ClickPattern, classify, outcome_probabilities
from .optics import DetectorParams, FieldState
from .protocol import (QberReport, SessionConfig, TallyTable, qber_uncertainty, qber_x, qber_z,
                       run_session, sift)

__all__ = [
    "BellOutcome", "ClickPattern", "DetectorParams", "FieldState", "QberReport",
    "SessionConfig", "TallyTable", "classify", "outcome_probabilities", "qber_uncertainty",
    "qber_x", "qber_z", "run_session", "sift",
]
