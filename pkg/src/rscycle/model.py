"""Core model objects: the unit-circle phase variable, the signaling and
responsive regions, feedback profiles, and weighted populations.

Cells live on the circle [0, 1) and advance with unit base speed.  Two arcs
control the coupling: the signaling region S = [0, s) just after division,
and the responsive region R = [r, 1) just before it, with 0 < s < r < 1.
Cells inside R have their speed multiplied by 1 + f(I), where I is the
weighted fraction of the population currently inside S and f is a monotone
feedback profile with f(0) = 0.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition."""


class CertificateError(RuntimeError):
    """Raised when a numerical cross-check that must hold fails."""


class Region(Enum):
    IN_S = "InS"
    MIDDLE = "Middle"
    IN_R = "InR"


# Feedback profiles are validated on this many interior sample points plus
# the endpoints 0 and 1.
_VALIDATION_GRID = 1000

# Tolerance for deciding that two boundary-hit times coincide.
TIE_TOL = 1e-12


def wrap01(x):
    """Map x onto [0, 1). Works on scalars and arrays."""
    return np.asarray(x, dtype=float) % 1.0


def circle_distance(x: float, y: float) -> float:
    """Shortest arc distance between two phases."""
    d = abs(float(x) - float(y)) % 1.0
    return min(d, 1.0 - d)


@dataclass(frozen=True)
class RegionParams:
    """Arc geometry of the two coupling regions.

    s is the upper end of the signaling region S = [0, s); r is the lower
    end of the responsive region R = [r, 1).
    """

    s: float
    r: float

    def __post_init__(self):
        if not (0.0 < self.s < self.r < 1.0):
            raise ValidationError(
                f"region bounds must satisfy 0 < s < r < 1, got s={self.s}, r={self.r}"
            )

    @property
    def len_S(self) -> float:
        return self.s

    @property
    def len_R(self) -> float:
        return 1.0 - self.r

    @property
    def interaction_length(self) -> float:
        """|R| + |S|, the gap size below which two groups can interact."""
        return self.len_R + self.len_S


def region_of(x: float, rp: RegionParams) -> Region:
    """Which region a phase sits in. Boundaries are half-open: s belongs to
    the middle stretch, r belongs to R, and a cell that reaches 1 wraps to 0
    and is therefore in S."""
    p = float(np.asarray(x) % 1.0)
    if p < rp.s:
        return Region.IN_S
    if p < rp.r:
        return Region.MIDDLE
    return Region.IN_R


def max_isolated_clusters(rp: RegionParams) -> int:
    """Largest number of groups that can be pairwise non-interacting.

    Groups interact when the gap between them is below |R| + |S|; fitting k
    gaps of at least that size around the circle requires
    k <= 1/(|R|+|S|), so the count is the floor of that reciprocal.
    """
    # tiny nudge so exact-integer reciprocals are not rounded down by fp
    return int(np.floor(1.0 / rp.interaction_length + 1e-9))


@dataclass(frozen=True)
class FeedbackSpec:
    """A validated feedback profile f acting on the signaling fraction.

    Supported kinds:
      linear    f(I) = gamma * I
      hill      f(I) = gamma * I**h / (I**h + theta**h)
      tabulated monotone piecewise-linear interpolation of (I, f) pairs

    Validation enforces f(0) = 0, monotonicity with a single sign on (0, 1]
    (or f identically zero), and the admissible speed window
    0 < v_min <= 1 + f(I) <= v_max on a dense grid.
    """

    kind: str
    gamma: Optional[float] = None
    theta: Optional[float] = None
    h: Optional[float] = None
    table: Optional[Tuple[Tuple[float, float], ...]] = None
    v_min: float = 0.05
    v_max: float = 20.0

    @classmethod
    def linear(cls, gamma: float, v_min: float = 0.05, v_max: float = 20.0) -> "FeedbackSpec":
        return cls(kind="linear", gamma=float(gamma), v_min=v_min, v_max=v_max)

    @classmethod
    def hill(cls, gamma: float, theta: float, h: float,
             v_min: float = 0.05, v_max: float = 20.0) -> "FeedbackSpec":
        return cls(kind="hill", gamma=float(gamma), theta=float(theta), h=float(h),
                   v_min=v_min, v_max=v_max)

    @classmethod
    def tabulated(cls, points: Sequence[Tuple[float, float]],
                  v_min: float = 0.05, v_max: float = 20.0) -> "FeedbackSpec":
        table = tuple((float(a), float(b)) for a, b in points)
        return cls(kind="tabulated", table=table, v_min=v_min, v_max=v_max)

    @classmethod
    def none(cls) -> "FeedbackSpec":
        """No coupling: f identically zero."""
        return cls.linear(0.0)

    def __post_init__(self):
        if self.kind not in ("linear", "hill", "tabulated"):
            raise ValidationError(f"unknown feedback kind {self.kind!r}")
        if not (0.0 < self.v_min <= 1.0 <= self.v_max):
            raise ValidationError(
                f"speed window must satisfy 0 < v_min <= 1 <= v_max, "
                f"got ({self.v_min}, {self.v_max})"
            )
        if self.kind == "linear":
            if self.gamma is None:
                raise ValidationError("linear feedback needs gamma")
        elif self.kind == "hill":
            if self.gamma is None or self.theta is None or self.h is None:
                raise ValidationError("hill feedback needs gamma, theta, h")
            if self.theta <= 0 or self.h <= 0:
                raise ValidationError("hill feedback needs theta > 0 and h > 0")
        else:
            if self.table is None or len(self.table) < 2:
                raise ValidationError("tabulated feedback needs at least two points")
            xs = np.array([p[0] for p in self.table])
            if xs[0] != 0.0 or xs[-1] != 1.0:
                raise ValidationError("table must span I = 0 to I = 1")
            if np.any(np.diff(xs) <= 0):
                raise ValidationError("table abscissae must be strictly increasing")
        self._validate_profile()

    def _raw(self, I):
        I = np.asarray(I, dtype=float)
        if self.kind == "linear":
            return self.gamma * I
        if self.kind == "hill":
            num = np.power(I, self.h, where=I > 0, out=np.zeros_like(I))
            return self.gamma * num / (num + self.theta ** self.h)
        xs = np.array([p[0] for p in self.table])
        ys = np.array([p[1] for p in self.table])
        return np.interp(I, xs, ys)

    def _validate_profile(self):
        grid = np.concatenate(([0.0], np.linspace(0.0, 1.0, _VALIDATION_GRID), [1.0]))
        vals = self._raw(grid)
        if vals[0] != 0.0:
            raise ValidationError(f"feedback must vanish at I=0, got f(0)={vals[0]}")
        diffs = np.diff(vals)
        if not (np.all(diffs >= 0.0) or np.all(diffs <= 0.0)):
            raise ValidationError("feedback profile must be monotone")
        interior = vals[grid > 0.0]
        pos, neg = np.any(interior > 0.0), np.any(interior < 0.0)
        if pos and neg:
            raise ValidationError("feedback sign must be constant on (0, 1]")
        if (pos or neg) and np.any(interior == 0.0):
            raise ValidationError("feedback may only vanish at I=0 (or identically)")
        speeds = 1.0 + vals
        if speeds.min() < self.v_min or speeds.max() > self.v_max:
            raise ValidationError(
                f"speeds 1+f(I) leave the admissible window "
                f"[{self.v_min}, {self.v_max}]: range "
                f"[{speeds.min():.6g}, {speeds.max():.6g}]"
            )

    @property
    def sign(self) -> int:
        """+1 for positive feedback, -1 for negative, 0 for none."""
        v = float(self._raw(1.0))
        return (v > 0) - (v < 0)

    def __call__(self, I):
        """Evaluate f at a signaling fraction in [0, 1]."""
        arr = np.asarray(I, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValidationError(f"signaling fraction outside [0, 1]: {I}")
        out = self._raw(arr)
        return float(out) if np.isscalar(I) or arr.ndim == 0 else out


@dataclass
class Population:
    """Phases (and optional weights) of the cells.

    Weights let a handful of entries stand for point clusters of many cells;
    the weighted total plays the role of n when computing fractions.
    """

    phases: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        self.phases = np.asarray(self.phases, dtype=float).copy()
        if self.phases.ndim != 1 or self.phases.size == 0:
            raise ValidationError("population needs a non-empty 1-d phase array")
        if np.any(self.phases < 0.0) or np.any(self.phases >= 1.0):
            raise ValidationError("phases must lie in [0, 1)")
        if self.weights is None:
            self.weights = np.ones(self.phases.size, dtype=float)
        else:
            self.weights = np.asarray(self.weights, dtype=float).copy()
            if self.weights.shape != self.phases.shape:
                raise ValidationError("weights must match phases in shape")
            if np.any(self.weights <= 0.0):
                raise ValidationError("weights must be positive")

    def __len__(self) -> int:
        return self.phases.size

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def copy(self) -> "Population":
        return Population(self.phases.copy(), self.weights.copy())


def signaling_fraction(pop: Population, rp: RegionParams) -> float:
    """Weighted fraction of the population inside S = [0, s)."""
    if len(pop) == 0:
        raise ValidationError("empty population")
    in_s = pop.phases < rp.s
    return float(pop.weights[in_s].sum() / pop.total_weight)
