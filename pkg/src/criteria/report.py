"""Per-point verdicts for inequalities between noisy estimates."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from stats.estimate import INCONCLUSIVE, EstimateWithCI
from utils.errors import ShapeError
from utils.metrics import record_verdicts

logger = logging.getLogger(__name__)

HOLDS = 'holds'
HOLDS_WITHIN_CI = 'holds_within_CI'
VIOLATED = 'violated'
VERDICT_INCONCLUSIVE = 'inconclusive'

LE = '<='
GE = '>='

# Bands must separate by this many standard errors before a claim is called violated
SIGMA = 3.0
REL_TOL = 1e-12

CSV_COLUMNS = ('name', 't', 'lhs', 'lhs_se', 'rhs', 'rhs_se', 'verdict')


def judge(lhs: EstimateWithCI, rhs: EstimateWithCI, relation: str = LE, sigma: float = SIGMA) -> str:
    """
    Verdict on the claim ``lhs <= rhs`` (or ``lhs >= rhs``).

    holds: the point estimates satisfy the claim (relative tolerance 1e-12).
    violated: they fail it by more than ``sigma`` combined standard errors.
    holds_within_CI: anything in between.
    inconclusive: a non-finite value or an estimate flagged inconclusive.
    """
    if relation == GE:
        lhs, rhs = rhs, lhs
    elif relation != LE:
        raise ValueError(f"unknown relation: {relation}")
    if not (np.isfinite(lhs.value) and np.isfinite(rhs.value)) \
            or lhs.has_flag(INCONCLUSIVE) or rhs.has_flag(INCONCLUSIVE):
        return VERDICT_INCONCLUSIVE
    gap = lhs.value - rhs.value
    if gap <= REL_TOL * max(abs(lhs.value), abs(rhs.value)):
        return HOLDS
    if gap > sigma * np.hypot(lhs.stderr, rhs.stderr):
        return VIOLATED
    return HOLDS_WITHIN_CI


def judge_equal(lhs: EstimateWithCI, rhs: EstimateWithCI, sigma: float = SIGMA) -> str:
    """Verdict on the identity ``lhs == rhs``: violated when the bands separate by ``sigma``."""
    if not (np.isfinite(lhs.value) and np.isfinite(rhs.value)):
        return VERDICT_INCONCLUSIVE
    gap = abs(lhs.value - rhs.value)
    if gap <= REL_TOL * max(abs(lhs.value), abs(rhs.value), 1.0):
        return HOLDS
    if gap > sigma * np.hypot(lhs.stderr, rhs.stderr):
        return VIOLATED
    return HOLDS_WITHIN_CI


@dataclass(frozen=True)
class InequalityReport:
    """Verdicts of one inequality at a sequence of points (grid times or trial indices)."""

    name: str
    points: tuple
    lhs: tuple
    rhs: tuple
    verdicts: tuple
    relation: str = LE
    meta: Dict[str, Any] = field(default_factory=dict, compare=False)

    @classmethod
    def build(cls, name: str, points: Sequence[float], lhs: Sequence[EstimateWithCI],
              rhs: Sequence[EstimateWithCI], relation: str = LE, verdicts: Optional[Sequence[str]] = None,
              **meta) -> 'InequalityReport':
        if not len(points) == len(lhs) == len(rhs):
            raise ShapeError(f"report {name}: {len(points)} points, {len(lhs)} lhs, {len(rhs)} rhs")
        if verdicts is None:
            verdicts = [judge(a, b, relation) for a, b in zip(lhs, rhs)]
        report = cls(name, tuple(points), tuple(lhs), tuple(rhs), tuple(verdicts), relation, meta)
        record_verdicts(name, report.verdicts)
        counts = report.counts()
        logger.info(f"{name}: " + ', '.join(f"{k}={v}" for k, v in counts.items() if v))
        return report

    @property
    def margins(self) -> np.ndarray:
        """Slack of the claim at each point; negative where the estimates break it."""
        diff = np.array([b.value - a.value for a, b in zip(self.lhs, self.rhs)])
        return diff if self.relation == LE else -diff

    @property
    def violated(self) -> bool:
        return VIOLATED in self.verdicts

    @property
    def inconclusive(self) -> bool:
        return VERDICT_INCONCLUSIVE in self.verdicts

    def counts(self) -> Dict[str, int]:
        return {v: self.verdicts.count(v) for v in (HOLDS, HOLDS_WITHIN_CI, VIOLATED, VERDICT_INCONCLUSIVE)}

    def csv_rows(self) -> List[Dict[str, Any]]:
        return [
            {'name': self.name, 't': t, 'lhs': a.value, 'lhs_se': a.stderr,
             'rhs': b.value, 'rhs_se': b.stderr, 'verdict': v}
            for t, a, b, v in zip(self.points, self.lhs, self.rhs, self.verdicts)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'relation': self.relation,
            'counts': self.counts(),
            'points': [
                {'t': t, 'lhs': a.to_dict(), 'rhs': b.to_dict(), 'margin': float(m), 'verdict': v}
                for t, a, b, m, v in zip(self.points, self.lhs, self.rhs, self.margins, self.verdicts)
            ],
            'meta': self.meta,
        }


def add_estimates(a: EstimateWithCI, b: EstimateWithCI) -> EstimateWithCI:
    """a + b with stderr a.se + b.se, valid whatever the correlation between them."""
    return EstimateWithCI(a.value + b.value, a.stderr + b.stderr, max(a.n_samples, b.n_samples),
                          max(a.n_batches, b.n_batches), a.seed_fingerprint or b.seed_fingerprint,
                          tuple(dict.fromkeys(a.flags + b.flags)))
