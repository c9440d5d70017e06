"""Sampled decay curves t -> I(t) with per-point error bars."""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional

import numpy as np

from semigroup.grid import TimeGrid
from stats.estimate import EstimateWithCI
from utils.errors import DomainError, ShapeError

logger = logging.getLogger(__name__)

KIND_I = 'I'
KIND_I_R = 'I_r'
KIND_J_R = 'J_r'
KIND_K = 'K'
KIND_GAMMA2 = 'Gamma2'
KIND_HESSIAN = 'Hessian'
CURVE_KINDS = (KIND_I, KIND_I_R, KIND_J_R, KIND_K, KIND_GAMMA2, KIND_HESSIAN)

CSV_COLUMNS = ('t', 'estimate', 'stderr', 'kind', 'r')


@dataclass(frozen=True)
class DecayCurve:
    """
    A decay curve sampled on a TimeGrid.

    ``values`` are the bias-corrected estimates; ``raw`` keeps the uncorrected
    nested Monte Carlo values when a correction was applied.
    """

    grid: TimeGrid
    values: tuple
    kind: str
    r: Optional[int] = None
    raw: Optional[tuple] = None
    meta: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise DomainError(f"unknown curve kind: {self.kind}")
        object.__setattr__(self, 'values', tuple(self.values))
        if len(self.values) != len(self.grid):
            raise ShapeError(f"{len(self.values)} values for a grid of {len(self.grid)} points")
        if self.raw is not None:
            object.__setattr__(self, 'raw', tuple(self.raw))

    @classmethod
    def from_arrays(cls, grid: TimeGrid, values, stderr=None, kind: str = KIND_I, r: Optional[int] = None,
                    **meta) -> 'DecayCurve':
        """Curve from plain arrays; missing error bars mean exact values."""
        values = np.asarray(values, dtype=float)
        stderr = np.zeros_like(values) if stderr is None else np.asarray(stderr, dtype=float)
        ests = [EstimateWithCI(float(v), float(s), 0, 0, 0) for v, s in zip(values, stderr)]
        return cls(grid, tuple(ests), kind, r, meta=meta)

    @classmethod
    def from_function(cls, grid: TimeGrid, fn, kind: str = KIND_I, r: Optional[int] = None) -> 'DecayCurve':
        """Exact curve t -> fn(t)."""
        return cls.from_arrays(grid, [fn(t) for t in grid.points], kind=kind, r=r)

    @property
    def t(self) -> np.ndarray:
        return self.grid.array

    @property
    def estimates(self) -> np.ndarray:
        return np.array([e.value for e in self.values])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([e.stderr for e in self.values])

    def at(self, t: float) -> EstimateWithCI:
        return self.values[self.grid.index_of(t)]

    def _rescaled(self, factors: np.ndarray, kind: str) -> 'DecayCurve':
        values = tuple(e.scaled(float(c)) for e, c in zip(self.values, factors))
        raw = None if self.raw is None else tuple(e.scaled(float(c)) for e, c in zip(self.raw, factors))
        return replace(self, values=values, raw=raw, kind=kind)

    def to_j(self) -> 'DecayCurve':
        """J_r(t) = e^{2t} I_r(t), or K(t) = e^{2t} I(t) for an I curve."""
        if self.kind == KIND_I_R:
            return self._rescaled(np.exp(2.0 * self.t), KIND_J_R)
        if self.kind == KIND_I:
            return self._rescaled(np.exp(2.0 * self.t), KIND_K)
        raise DomainError(f"e^(2t) rescaling applies to I or I_r curves, not {self.kind}")

    def to_k(self) -> 'DecayCurve':
        if self.kind != KIND_I:
            raise DomainError(f"K is defined from an I curve, not {self.kind}")
        return self.to_j()

    def scaled(self, factor: float) -> 'DecayCurve':
        return self._rescaled(np.full(len(self.grid), factor), self.kind)

    def csv_rows(self) -> List[Dict[str, Any]]:
        return [
            {'t': t, 'estimate': e.value, 'stderr': e.stderr, 'kind': self.kind,
             'r': '' if self.r is None else self.r}
            for t, e in zip(self.grid.points, self.values)
        ]

    def to_dict(self) -> Dict[str, Any]:
        d = {
            'kind': self.kind,
            'r': self.r,
            'grid': self.grid.to_dict(),
            'values': [e.to_dict() for e in self.values],
        }
        if self.raw is not None:
            d['raw'] = [e.to_dict() for e in self.raw]
        if self.meta:
            d['meta'] = self.meta
        return d
