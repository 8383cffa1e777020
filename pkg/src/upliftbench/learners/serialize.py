"""Scorer serialization: JSON documents that reload to identical scores.

Floats are emitted through json's shortest round-trip representation, so a
saved and reloaded scorer reproduces its predictions bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

from .meta import RidgeEffectScorer, XLearnerScorer
from .scoring import UpliftScorer
from .uplift import CvtScorer, MomScorer, SdrScorer, TwoModelScorer

_SCORER_TYPES = {
    "two_model": TwoModelScorer,
    "cvt": CvtScorer,
    "mom": MomScorer,
    "sdr": SdrScorer,
    "x_learner": XLearnerScorer,
    "r_learner": RidgeEffectScorer,
    "dr_learner": RidgeEffectScorer,
}


def scorer_to_dict(scorer: UpliftScorer) -> dict:
    return scorer.to_dict()


def scorer_from_dict(raw: dict) -> UpliftScorer:
    method = raw.get("method")
    if method not in _SCORER_TYPES:
        raise ValueError(f"unknown scorer method {method!r}")
    return _SCORER_TYPES[method].from_dict(raw)


def save_scorer(scorer: UpliftScorer, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scorer.to_dict(), indent=1), encoding="utf-8")


def load_scorer(path: str | Path) -> UpliftScorer:
    return scorer_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
