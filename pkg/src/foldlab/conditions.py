"""Imaging-condition taxonomy and per-image parameter sampling.

Seven retained degradation axes, each with easy/medium/hard uniform sampling
intervals plus a canonical (baseline) value.  The axes dropped after the
screening experiments (clutter, shadows, specularities, wrinkles, noise, FoV
cropping, lens intrinsics) are documented in DISCARDED_CONDITIONS and never
rendered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidArgument, ParseError


class Condition(Enum):
    FOCUS_BLUR = "fb"
    MOTION_BLUR = "mb"
    POSE_CHANGE = "po"
    DEFORMATION = "de"
    EXTERNAL_OCCLUSION = "eo"
    SCALE = "sc"
    LIGHTING = "li"

    @classmethod
    def from_tag(cls, tag: str) -> "Condition":
        try:
            return cls(tag)
        except ValueError:
            valid = ", ".join(c.value for c in cls)
            raise InvalidArgument(f"unknown condition {tag!r}; valid tags: {valid}")


class Difficulty(Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"
    CANONICAL = "canonical"

    @classmethod
    def from_tag(cls, tag: str) -> "Difficulty":
        try:
            return cls(tag)
        except ValueError:
            valid = ", ".join(d.value for d in cls)
            raise InvalidArgument(f"unknown difficulty {tag!r}; valid: {valid}")


#: axes analysed but dropped after screening; enumerated for documentation only
DISCARDED_CONDITIONS = (
    "self-occlusion",
    "clutter",
    "shadows",
    "specularities",
    "wrinkles",
    "noise",
    "fov-cropping",
    "lens-intrinsics",
)

_D = Difficulty

# uniform sampling intervals per (condition, difficulty)
RANGES = {
    Condition.FOCUS_BLUR: {
        "kernel_pct": {
            _D.EASY: (0.39, 0.97),
            _D.MEDIUM: (1.17, 1.95),
            _D.HARD: (2.14, 2.92),
        }
    },
    Condition.MOTION_BLUR: {
        "length_pct": {
            _D.EASY: (0.39, 0.97),
            _D.MEDIUM: (1.17, 2.92),
            _D.HARD: (3.12, 4.88),
        },
        "angle": {
            _D.EASY: (0.0, math.pi),
            _D.MEDIUM: (0.0, math.pi),
            _D.HARD: (0.0, math.pi),
        },
    },
    Condition.POSE_CHANGE: {
        "euler": {
            _D.EASY: (0.0, math.pi / 6),
            _D.MEDIUM: (math.pi / 6, math.pi / 3),
            _D.HARD: (math.pi / 3, math.pi / 2),
        },
        "translation": {
            _D.EASY: (0.0, 0.5),
            _D.MEDIUM: (0.5, 1.0),
            _D.HARD: (1.0, 2.0),
        },
    },
    Condition.DEFORMATION: {
        "ruling_count": {
            _D.EASY: (3, 3),
            _D.MEDIUM: (5, 5),
            _D.HARD: (8, 8),
        }
    },
    Condition.SCALE: {
        "small": {
            _D.EASY: (0.75, 1.0),
            _D.MEDIUM: (0.5, 0.75),
            _D.HARD: (0.1, 0.5),
        },
        "large": {
            _D.EASY: (1.0, 1.5),
            _D.MEDIUM: (1.5, 2.25),
            _D.HARD: (2.25, 3.0),
        },
    },
    Condition.EXTERNAL_OCCLUSION: {
        "visibility": {
            _D.EASY: (0.7, 0.9),
            _D.MEDIUM: (0.3, 0.7),
            _D.HARD: (0.1, 0.3),
        }
    },
    Condition.LIGHTING: {
        "dark": {
            _D.EASY: (0.5, 1.0),
            _D.MEDIUM: (0.05, 0.5),
            _D.HARD: (0.01, 0.05),
        },
        "bright": {
            _D.EASY: (0.5, 1.0),
            _D.MEDIUM: (1.0, 5.0),
            _D.HARD: (5.0, 10.0),
        },
    },
}

CANONICAL_RULING_COUNT = 2


@dataclass(frozen=True)
class ConditionParams:
    """One sampled degradation instance; payload keys depend on condition."""

    condition: Condition
    difficulty: Difficulty
    payload: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        rec = {"condition": self.condition.value, "difficulty": self.difficulty.value}
        rec.update(self.payload)
        return rec

    @classmethod
    def from_json(cls, rec: dict) -> "ConditionParams":
        rec = dict(rec)
        try:
            condition = Condition(rec.pop("condition"))
            difficulty = Difficulty(rec.pop("difficulty"))
        except (KeyError, ValueError) as exc:
            raise ParseError(f"bad condition record: {exc}")
        return cls(condition, difficulty, rec)


def canonical_params(c: Condition) -> ConditionParams:
    payload = {
        Condition.FOCUS_BLUR: {"kernel_pct": 0.0},
        Condition.MOTION_BLUR: {"length_pct": 0.0, "angle": 0.0},
        Condition.POSE_CHANGE: {
            "roll": 0.0,
            "pitch": 0.0,
            "yaw": 0.0,
            "translation": 0.0,
            "tdir": [0.0, 0.0, 1.0],
        },
        Condition.DEFORMATION: {
            "ruling_count": CANONICAL_RULING_COUNT,
            "bend_limit": 0.0,
        },
        Condition.EXTERNAL_OCCLUSION: {"visibility": 1.0},
        Condition.SCALE: {"factor": 1.0, "branch": "small"},
        Condition.LIGHTING: {"irradiance": 1.0, "branch": "dark"},
    }[c]
    return ConditionParams(c, Difficulty.CANONICAL, payload)


def _sample_one(c: Condition, delta: Difficulty, rng: np.random.Generator) -> dict:
    r = RANGES[c]
    if c is Condition.FOCUS_BLUR:
        return {"kernel_pct": float(rng.uniform(*r["kernel_pct"][delta]))}
    if c is Condition.MOTION_BLUR:
        return {
            "length_pct": float(rng.uniform(*r["length_pct"][delta])),
            "angle": float(rng.uniform(*r["angle"][delta])),
        }
    if c is Condition.POSE_CHANGE:
        lo, hi = r["euler"][delta]
        tvec = rng.normal(size=3)
        tvec /= np.linalg.norm(tvec)
        return {
            "roll": float(rng.uniform(lo, hi)),
            "pitch": float(rng.uniform(lo, hi)),
            "yaw": float(rng.uniform(lo, hi)),
            "translation": float(rng.uniform(*r["translation"][delta])),
            "tdir": [float(x) for x in tvec],
        }
    if c is Condition.DEFORMATION:
        lo, hi = r["ruling_count"][delta]
        return {
            "ruling_count": int(rng.integers(lo, hi + 1)),
            "bend_limit": math.pi / 2,
        }
    if c is Condition.SCALE:
        branch = "small" if rng.uniform() < 0.5 else "large"
        return {"factor": float(rng.uniform(*r[branch][delta])), "branch": branch}
    if c is Condition.EXTERNAL_OCCLUSION:
        return {"visibility": float(rng.uniform(*r["visibility"][delta]))}
    if c is Condition.LIGHTING:
        branch = "dark" if rng.uniform() < 0.5 else "bright"
        return {"irradiance": float(rng.uniform(*r[branch][delta])), "branch": branch}
    raise InvalidArgument(f"unhandled condition {c}")


def generate_parameters(
    c: Condition, delta: Difficulty, n: int, rng_seed: int
) -> list[ConditionParams]:
    """Sample n parameter records uniformly from the difficulty interval."""
    if n < 0:
        raise InvalidArgument("n must be >= 0")
    if delta is Difficulty.CANONICAL:
        raise InvalidArgument("use canonical_params() for the canonical baseline")
    rng = np.random.default_rng(rng_seed)
    return [ConditionParams(c, delta, _sample_one(c, delta, rng)) for _ in range(n)]
