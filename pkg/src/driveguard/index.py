"""Distraction Index: a per-window severity score from band-power ratios.

DI = theta/alpha + alpha/beta + beta/gamma. Delta is deliberately left
out. Being a sum of ratios, the score cancels any gain factor common to
all bands, so electrode coupling and broadband artifacts shift it far
less than they shift absolute powers.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError
from .model import DISTRACTION_TASKS, BandPowers, TaskLabel


class UndefinedIndexError(ValidationError):
    """A ratio denominator is not strictly positive."""

    def __init__(self, band, value):
        self.band = band
        self.value = value
        super().__init__(
            f"distraction index undefined: band {band} power must be > 0, got {value}"
        )


class CoverageError(ValidationError):
    """The trial collection does not cover every distraction task."""


def distraction_index(bp: BandPowers) -> float:
    for band in ("alpha", "beta", "gamma"):
        v = getattr(bp, band)
        if not v > 0.0:
            raise UndefinedIndexError(band, v)
    return bp.theta / bp.alpha + bp.alpha / bp.beta + bp.beta / bp.gamma


@dataclass(frozen=True)
class TaskRanking:
    """Distraction tasks ordered by mean DI, highest first.

    entries is a tuple of (TaskLabel, mean_di). Tasks whose means are
    exactly equal keep task-enum order and are listed in tied_groups so
    callers never mistake an arbitrary order for a real one. The Base
    condition never participates in the ranking; its mean (when Base
    trials were supplied) is reported separately.
    """

    entries: tuple
    tied_groups: tuple
    base_mean: float | None

    @property
    def order(self):
        return tuple(task for task, _ in self.entries)

    @property
    def has_ties(self):
        return bool(self.tied_groups)


def rank_tasks(labeled_band_powers) -> TaskRanking:
    """Rank distraction tasks by mean DI over their trials.

    Input is an iterable of (TaskLabel, BandPowers) pairs. Every
    distraction task needs at least one trial; Base trials are optional
    and only feed the separately-reported base mean.
    """
    sums = {t: 0.0 for t in TaskLabel}
    counts = {t: 0 for t in TaskLabel}
    for task, bp in labeled_band_powers:
        if not isinstance(task, TaskLabel):
            raise ValidationError(f"labels must be TaskLabel, got {task!r}")
        sums[task] += distraction_index(bp)
        counts[task] += 1

    missing = [t.value for t in DISTRACTION_TASKS if counts[t] == 0]
    if missing:
        raise CoverageError(
            f"no trials for distraction task(s): {', '.join(missing)}"
        )

    means = {t: sums[t] / counts[t] for t in DISTRACTION_TASKS}
    # descending by mean; equal means keep enum order (enum position is
    # the stable secondary key)
    enum_pos = {t: i for i, t in enumerate(TaskLabel)}
    ordered = sorted(means, key=lambda t: (-means[t], enum_pos[t]))
    entries = tuple((t, means[t]) for t in ordered)

    tied_groups = []
    i = 0
    while i < len(ordered):
        j = i
        while j + 1 < len(ordered) and means[ordered[j + 1]] == means[ordered[i]]:
            j += 1
        if j > i:
            tied_groups.append(tuple(ordered[i:j + 1]))
        i = j + 1

    base_mean = sums[TaskLabel.BASE] / counts[TaskLabel.BASE] if counts[TaskLabel.BASE] else None
    return TaskRanking(entries=entries, tied_groups=tuple(tied_groups), base_mean=base_mean)
