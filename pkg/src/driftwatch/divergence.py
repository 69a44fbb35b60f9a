"""Fixed-bin score histograms and the Jensen-Shannon divergence signal.

The drift signal is the JSD, in shannon units (base-2 entropy), between
the score histograms of the reference and target windows. Histograms keep
integer counts so that incremental maintenance matches batch construction
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .windows import PushResult, WindowPair


class EmptyWindowError(Exception):
    """Histogram requested over zero events."""


class IncompatibleHistogramsError(Exception):
    """JSD requested between histograms with different binning."""


DEFAULT_BIN_COUNT = 100


def bin_of(score: float, bin_count: int) -> int:
    """Equal-width bin index on [0, 1]; a score of 1.0 lands in the last bin."""
    return min(int(score * bin_count), bin_count - 1)


@dataclass
class ScoreHistogram:
    """Normalized equal-width histogram of scores on [0, 1].

    ``counts`` are integers; ``mass()`` divides by the total on demand so
    that add/remove sequences and batch builds agree bit for bit.
    """

    bin_count: int = DEFAULT_BIN_COUNT
    counts: np.ndarray = field(default=None)
    total: int = 0

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(self.bin_count, dtype=np.int64)

    @classmethod
    def from_scores(cls, scores: Iterable[float], bin_count: int = DEFAULT_BIN_COUNT) -> "ScoreHistogram":
        hist = cls(bin_count)
        for score in scores:
            hist.add(score)
        if hist.total == 0:
            raise EmptyWindowError("histogram over empty score list")
        return hist

    def add(self, score: float) -> None:
        self.counts[bin_of(score, self.bin_count)] += 1
        self.total += 1

    def remove(self, score: float) -> None:
        index = bin_of(score, self.bin_count)
        if self.counts[index] == 0:
            raise ValueError(f"removing score {score} from empty bin {index}")
        self.counts[index] -= 1
        self.total -= 1

    def mass(self) -> np.ndarray:
        if self.total == 0:
            raise EmptyWindowError("mass of empty histogram")
        return self.counts / self.total

    def copy(self) -> "ScoreHistogram":
        return ScoreHistogram(self.bin_count, self.counts.copy(), self.total)


def _entropy_bits(mass: np.ndarray) -> float:
    """Shannon entropy in bits with the 0*log(0) = 0 convention."""
    nonzero = mass[mass > 0.0]
    return float(-(nonzero * np.log2(nonzero)).sum())


def jsd(p: ScoreHistogram, q: ScoreHistogram) -> float:
    """Jensen-Shannon divergence between two histograms, in shannons.

    Returns H(m) - (H(p) + H(q)) / 2 with m the pointwise average
    histogram. Bounded in [0, 1]; 0 for identical histograms, 1 for
    disjoint supports.
    """
    if p.bin_count != q.bin_count:
        raise IncompatibleHistogramsError(
            f"bin counts differ: {p.bin_count} vs {q.bin_count}"
        )
    p_mass = p.mass()
    q_mass = q.mass()
    mid = 0.5 * (p_mass + q_mass)
    value = _entropy_bits(mid) - 0.5 * (_entropy_bits(p_mass) + _entropy_bits(q_mass))
    if value < 0.0:
        return 0.0
    if value > 1.0:
        return 1.0
    return value


def signal(pair: WindowPair, bin_count: int = DEFAULT_BIN_COUNT) -> float:
    """JSD between the R and T window score histograms, built from scratch."""
    if not pair.warmed_up:
        raise EmptyWindowError("windows not warmed up")
    hist_r = ScoreHistogram.from_scores((e.score for e in pair.r_events), bin_count)
    hist_t = ScoreHistogram.from_scores((e.score for e in pair.t_events), bin_count)
    return jsd(hist_r, hist_t)


class IncrementalSignal:
    """Maintains the two window histograms incrementally per pushed event.

    Feed every push's displacement result; the counts then equal a batch
    rebuild of the current windows at every step.
    """

    def __init__(self, bin_count: int = DEFAULT_BIN_COUNT):
        self.bin_count = bin_count
        self.hist_r = ScoreHistogram(bin_count)
        self.hist_t = ScoreHistogram(bin_count)

    def update(self, pushed_score: float, result: PushResult) -> None:
        self.hist_t.add(pushed_score)
        if result.moved_to_r is not None:
            self.hist_t.remove(result.moved_to_r.score)
            self.hist_r.add(result.moved_to_r.score)
        if result.dropped is not None:
            self.hist_r.remove(result.dropped.score)

    def value(self) -> float:
        return jsd(self.hist_r, self.hist_t)
