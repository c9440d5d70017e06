"""Monte Carlo results and estimator tunables."""

from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

# Flags an estimate can carry instead of raising
LOW_PRECISION = 'low_precision'
ZERO_NORM = 'zero_norm'
TAIL_DOMINATED = 'tail_dominated'
INCONCLUSIVE = 'inconclusive'
TAIL_NOT_NEGLIGIBLE = 'tail_not_negligible'


@dataclass(frozen=True)
class EstimateWithCI:
    """A point estimate with its batch-means standard error and provenance."""

    value: float
    stderr: float
    n_samples: int
    n_batches: int
    seed_fingerprint: int
    flags: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.stderr < 0 or np.isnan(self.stderr):
            raise ValueError(f"stderr must be nonnegative, got {self.stderr}")

    @classmethod
    def exact(cls, value: float) -> 'EstimateWithCI':
        """A closed-form value: zero error bar, no samples."""
        return cls(float(value), 0.0, 0, 0, 0)

    def ci(self, z: float = 1.96) -> Tuple[float, float]:
        return self.value - z * self.stderr, self.value + z * self.stderr

    @property
    def rel_ci(self) -> float:
        """Half-width of the 95% interval relative to |value|."""
        if self.stderr == 0:
            return 0.0
        if self.value == 0:
            return float('inf')
        return 1.96 * self.stderr / abs(self.value)

    def has_flag(self, flag: str) -> bool:
        return flag in self.flags

    def with_flag(self, flag: str) -> 'EstimateWithCI':
        if flag in self.flags:
            return self
        return replace(self, flags=self.flags + (flag,))

    def scaled(self, factor: float) -> 'EstimateWithCI':
        return replace(self, value=self.value * factor, stderr=self.stderr * abs(factor))

    def shifted(self, offset: float) -> 'EstimateWithCI':
        return replace(self, value=self.value + offset)

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d['flags'] = list(self.flags)
        return d


@dataclass(frozen=True)
class ArrayEstimate:
    """Componentwise estimates sharing one sample (gradients, Hessians)."""

    value: np.ndarray
    stderr: np.ndarray
    n_samples: int
    n_batches: int
    seed_fingerprint: int
    flags: Tuple[str, ...] = ()

    def __getitem__(self, index) -> EstimateWithCI:
        return EstimateWithCI(float(self.value[index]), float(self.stderr[index]),
                              self.n_samples, self.n_batches, self.seed_fingerprint, self.flags)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def to_dict(self) -> Dict[str, Any]:
        return {
            'value': self.value.tolist(),
            'stderr': self.stderr.tolist(),
            'n_samples': self.n_samples,
            'n_batches': self.n_batches,
            'seed_fingerprint': self.seed_fingerprint,
            'flags': list(self.flags),
        }


@dataclass
class EstimatorConfig:
    """Sample budget of one estimate.

    ``samples`` is the first-round size; each further round doubles the total
    until the 95% half-width is within ``target_rel_ci`` of the value or
    ``max_samples`` is reached.
    """

    samples: int = 4096
    batches: int = 32
    target_rel_ci: float = 0.05
    max_samples: int = 65536
    threads: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        if self.batches < 2:
            raise ValueError(f"batches must be >= 2, got {self.batches}")
        if self.samples < self.batches or self.samples % self.batches:
            raise ValueError(f"samples ({self.samples}) must be a positive multiple of batches ({self.batches})")
        if self.target_rel_ci <= 0:
            raise ValueError(f"target_rel_ci must be positive, got {self.target_rel_ci}")
        if self.max_samples < self.samples:
            self.max_samples = self.samples

    def fixed(self) -> 'EstimatorConfig':
        """Same budget with auto-doubling disabled."""
        return replace(self, max_samples=self.samples)
