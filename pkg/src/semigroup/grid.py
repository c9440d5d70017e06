"""Time grids for decay curves."""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np

from utils.errors import DomainError, GridMismatchError

DEFAULT_T_MAX = 6.0
DEFAULT_POINTS = 48
FIRST_POSITIVE = 0.01


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing semigroup times with a truncation horizon for infinite integrals."""

    points: tuple
    tail_T: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise DomainError("time grid needs at least one point")
        if pts[0] < 0:
            raise DomainError(f"time grid starts at negative t={pts[0]}")
        if np.any(np.diff(pts) <= 0):
            raise DomainError("time grid must be strictly increasing")
        if self.tail_T < pts[-1]:
            raise DomainError(f"tail_T={self.tail_T} lies before the last grid point {pts[-1]}")
        object.__setattr__(self, 'points', tuple(float(t) for t in pts))

    @classmethod
    def from_points(cls, points: Sequence[float], tail_T: Optional[float] = None) -> 'TimeGrid':
        points = [float(t) for t in points]
        return cls(tuple(points), points[-1] if tail_T is None else float(tail_T))

    @classmethod
    def geometric(cls, t_max: float = DEFAULT_T_MAX, points: int = DEFAULT_POINTS,
                  first: float = FIRST_POSITIVE) -> 'TimeGrid':
        """0 followed by ``points - 1`` geometrically spaced times up to t_max."""
        if points < 2:
            raise DomainError(f"geometric grid needs at least 2 points, got {points}")
        if not 0 < first < t_max:
            raise DomainError(f"need 0 < first < t_max, got first={first}, t_max={t_max}")
        return cls(tuple(np.concatenate([[0.0], np.geomspace(first, t_max, points - 1)])), float(t_max))

    @classmethod
    def uniform(cls, t_max: float, points: int) -> 'TimeGrid':
        if points < 2:
            raise DomainError(f"uniform grid needs at least 2 points, got {points}")
        return cls(tuple(np.linspace(0.0, t_max, points)), float(t_max))

    @classmethod
    def from_spec(cls, spec: Dict[str, Any]) -> 'TimeGrid':
        """Build a grid from a manifest entry (``kind``: geometric | uniform | explicit)."""
        kind = spec.get('kind', 'geometric')
        if kind == 'explicit':
            return cls.from_points(spec['points'], spec.get('tail_T'))
        t_max = float(spec.get('t_max', DEFAULT_T_MAX))
        points = int(spec.get('points', DEFAULT_POINTS))
        if kind == 'uniform':
            return cls.uniform(t_max, points)
        if kind == 'geometric':
            return cls.geometric(t_max, points, float(spec.get('first', FIRST_POSITIVE)))
        raise DomainError(f"unknown grid kind: {kind}")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def index_of(self, t: float, atol: float = 1e-12) -> int:
        """Index of grid point t; raises if t is not on the grid."""
        idx = int(np.argmin(np.abs(self.array - t)))
        if abs(self.points[idx] - t) > atol:
            raise DomainError(f"t={t} is not a grid point")
        return idx

    def truncated(self, T: float) -> 'TimeGrid':
        """The grid points in [0, T]; T must be a grid point."""
        idx = self.index_of(T)
        return TimeGrid(self.points[:idx + 1], float(T))

    def require_same(self, other: 'TimeGrid') -> None:
        if len(self) != len(other) or not np.allclose(self.array, other.array, rtol=0, atol=1e-12):
            raise GridMismatchError("curves are sampled on different time grids")

    def to_dict(self) -> Dict[str, Any]:
        return {'points': list(self.points), 'tail_T': self.tail_T}
