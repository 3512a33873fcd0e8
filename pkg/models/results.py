"""
Result containers: priors, parameter grids, error series, bounds and
diagnostic maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid


@dataclass(frozen=True)
class PriorSpec:
    """Sine-squared-exponential prior on [theta_min, theta_max]; alpha sets the sharpness."""
    theta_min: float
    theta_max: float
    alpha: float = -1000.0

    def __post_init__(self):
        if not self.theta_max > self.theta_min:
            raise ValueError(f"theta_max ({self.theta_max}) must exceed theta_min ({self.theta_min})")

    @property
    def width(self) -> float:
        return self.theta_max - self.theta_min

    def to_dict(self) -> Dict[str, float]:
        return {"theta_min": self.theta_min, "theta_max": self.theta_max, "alpha": self.alpha}


@dataclass
class ParameterGrid:
    """Discretised theta axis with log-prior, log-likelihood and normalised log-posterior."""
    which_parameter: str
    nodes: np.ndarray
    log_prior: np.ndarray
    log_likelihood: np.ndarray
    log_posterior: np.ndarray
    time: float = 0.0

    @property
    def weights(self) -> np.ndarray:
        """Posterior density values at the nodes."""
        return np.exp(self.log_posterior)

    def normalization(self) -> float:
        return float(trapezoid(self.weights, self.nodes))

    def mean(self) -> float:
        return float(trapezoid(self.nodes * self.weights, self.nodes))

    def variance(self) -> float:
        mu = self.mean()
        return float(trapezoid((self.nodes - mu) ** 2 * self.weights, self.nodes))

    def mass_within(self, center: float, half_width: float) -> float:
        mask = np.abs(self.nodes - center) <= half_width
        if mask.sum() < 2:
            return 0.0
        return float(trapezoid(self.weights[mask], self.nodes[mask]))


class MseMode(str, Enum):
    SQUARED_ERROR = "squared_error"
    POSTERIOR_VARIANCE = "posterior_variance"


@dataclass
class MseSeries:
    times: np.ndarray
    estimate: np.ndarray
    mse: np.ndarray
    mode: MseMode = MseMode.SQUARED_ERROR
    members: List["MseSeries"] = field(default_factory=list)

    def __post_init__(self):
        if not (len(self.times) == len(self.estimate) == len(self.mse)):
            raise ValueError(
                f"MseSeries arrays differ in length: {len(self.times)}, {len(self.estimate)}, {len(self.mse)}"
            )

    def dispersion(self) -> Optional[np.ndarray]:
        """Standard deviation of member MSE curves, when averaged."""
        if not self.members:
            return None
        return np.std(np.vstack([m.mse for m in self.members]), axis=0)


class BoundKind(str, Enum):
    CRB = "CRB"
    QCRB = "QCRB"
    VAN_TREES = "VanTrees"
    QVAN_TREES = "QVanTrees"

    @property
    def is_bayesian(self) -> bool:
        return self in (BoundKind.VAN_TREES, BoundKind.QVAN_TREES)

    @property
    def is_quantum(self) -> bool:
        return self in (BoundKind.QCRB, BoundKind.QVAN_TREES)


@dataclass
class BoundSeries:
    times: np.ndarray
    value: np.ndarray
    kind: BoundKind
    source: str  # "ensemble", "conditional:<record fingerprint>", optionally "+reduced-cavity"
    information: Optional[np.ndarray] = None


@dataclass
class EntropySeries:
    """Linear entropy of the cavity along closed (possibly no-click) evolution."""
    times: np.ndarray
    entropy: np.ndarray
    norm: np.ndarray
    jump_times: Tuple[float, ...] = ()


@dataclass
class NegativitySeries:
    times: np.ndarray
    negativity: np.ndarray
    raw: np.ndarray
    click_times: Tuple[float, ...] = ()
    before_click: Optional[np.ndarray] = None
    after_click: Optional[np.ndarray] = None


@dataclass
class ZetaMap:
    """Normalised next-emission histogram; NaN marks bins without data."""
    values: np.ndarray
    t1_edges: np.ndarray
    t2_edges: np.ndarray
    relative: bool = False
    pair_count: int = 0
    fingerprint: str = ""

    @property
    def t1_centers(self) -> np.ndarray:
        return 0.5 * (self.t1_edges[1:] + self.t1_edges[:-1])

    @property
    def t2_centers(self) -> np.ndarray:
        return 0.5 * (self.t2_edges[1:] + self.t2_edges[:-1])


@dataclass
class G2Grid:
    t1: np.ndarray
    dt: np.ndarray
    values: np.ndarray  # shape (len(t1), len(dt)); NaN where undefined
    fingerprint: str = ""

    def to_rows(self) -> List[Tuple[float, float, float]]:
        rows = []
        for i, t1 in enumerate(self.t1):
            for j, dt in enumerate(self.dt):
                rows.append((float(t1), float(dt), float(self.values[i, j])))
        return rows


def series_rows(times: np.ndarray, *columns: np.ndarray) -> List[List[Any]]:
    return [[float(t)] + [float(c[i]) for c in columns] for i, t in enumerate(times)]
