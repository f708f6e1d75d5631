"""Resolution-time decomposition and diagnosis-reduction projection.

All durations are minutes. Projection outputs are hypotheses, labeled
"projected", never measurements.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


class RangeError(ValueError):
    """A ratio argument fell outside [0, 1]."""


@dataclass(frozen=True)
class MttrModel:
    t_detect: float
    t_diagnose: float
    t_fix: float

    def __post_init__(self) -> None:
        for name, value in (
            ("t_detect", self.t_detect),
            ("t_diagnose", self.t_diagnose),
            ("t_fix", self.t_fix),
        ):
            if value < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class Projection:
    projected_mttr: float
    absolute_saving: float
    relative_saving: float


def mttr_total(m: MttrModel) -> float:
    """Detection + diagnosis + fix time."""
    return m.t_detect + m.t_diagnose + m.t_fix


def project_reduction(
    m: MttrModel, reduction: float, diagnose_fraction: Optional[float] = None
) -> Projection:
    """Projected resolution time if diagnosis time shrinks by `reduction`.

    When diagnose_fraction is given it overrides the model's own diagnosis
    share with fraction x total.
    """
    if not 0 <= reduction <= 1:
        raise RangeError(f"reduction {reduction} outside [0, 1]")
    if diagnose_fraction is not None and not 0 <= diagnose_fraction <= 1:
        raise RangeError(f"diagnose_fraction {diagnose_fraction} outside [0, 1]")

    total = mttr_total(m)
    effective_diagnose = (
        diagnose_fraction * total if diagnose_fraction is not None else m.t_diagnose
    )
    projected = total - effective_diagnose * reduction
    saving = total - projected
    relative = saving / total if total > 0 else 0.0
    return Projection(
        projected_mttr=projected,
        absolute_saving=saving,
        relative_saving=relative,
    )
