"""Streaming percentile sketch with constant memory and one pass per event.

The sketch keeps ``n + 1`` sorted positions ``P[0] .. P[n]`` interpreted as
estimated percentile locations: ``P[0]`` tracks the running minimum,
``P[n]`` the running maximum, and the walls in between aim to keep the
estimated event count equal in every bin. Each consumed value updates all
walls in a single linear sweep, so time per event is O(n) and space is
O(n) regardless of how many values have streamed through.

The sweep is directional. A left-to-right pass carries a small directional
bias, so the update can also run right-to-left on the mirrored positions,
and the default policy flips a seeded coin per event to average the two
directions out over time.
"""

from __future__ import annotations

import bisect
import json
import math
import random

JITTER = 1e-9

POLICIES = (
    "left_right",
    "right_left",
    "bidirectional_average",
    "alternate",
    "random",
)


class SketchWarmupError(Exception):
    """Percentile queried before the sketch collected n + 1 values."""


def update_percentiles(positions: list[float], x: float, count: int) -> list[float]:
    """One left-to-right wall update; returns new positions, input untouched.

    ``count`` is the number of values consumed before ``x``. The target
    count per bin after absorbing ``x`` is ``(count + 1) / n``; walls with
    a deficit expand right by borrowing at the next bin's density, walls
    past the new value's bin shed the excess into the next bin at the
    current bin's density. Zero-width bins are treated as infinitely
    dense, so a wall resting on its neighbor does not move and division
    by zero never occurs. Floating-point rounding is clamped so a wall
    never crosses its neighbors.
    """
    p = list(positions)
    n = len(p) - 1
    c_per_bin = count / n
    c_target = (count + 1.0) / n

    c_this = c_per_bin
    if x < p[0]:
        p[0] = x
    if x < p[1]:
        c_this += 1.0

    for i in range(1, n):
        delta = c_target - c_this
        left = p[i]
        if delta > 0.0:
            right = p[i + 1]
            width = right - left
            if width <= 0.0:
                c_this = c_per_bin + (1.0 if x < right else 0.0)
                continue
            count_next = c_per_bin + 1.0 if x < right else c_per_bin
            density = count_next / width
            moved = left + delta / density
            if moved > right:
                moved = right
            p[i] = moved
            c_this = density * (right - moved)
        else:
            previous = p[i - 1]
            width = left - previous
            if width <= 0.0:
                c_this = c_per_bin - delta
                continue
            density = c_this / width
            moved = left + delta / density
            if moved < previous:
                moved = previous
            p[i] = moved
            c_this = c_per_bin - delta

    if x > p[n]:
        p[n] = x
    return p


def update_percentiles_reversed(positions: list[float], x: float, count: int) -> list[float]:
    """The same update applied right-to-left.

    Runs the left-to-right sweep on the negated, reversed positions and
    mirrors the result back, which is exactly a right-to-left pass over
    the original axis.
    """
    mirrored = [-v for v in reversed(positions)]
    updated = update_percentiles(mirrored, -x, count)
    return [-v for v in reversed(updated)]


class PercentileSketch:
    """Streaming percentile estimator over a scalar value stream.

    The first ``n + 1`` values initialize the positions in sorted order;
    duplicates get a deterministic additive jitter so positions start
    strictly sorted. Later values update the walls per the configured
    direction policy.
    """

    def __init__(self, n: int = 100, policy: str = "random", seed: int = 0):
        if n < 2:
            raise ValueError("sketch needs at least 2 bins")
        if policy not in POLICIES:
            raise ValueError(f"unknown direction policy {policy!r}")
        self.n = n
        self.policy = policy
        self.positions: list[float] = []
        self.count = 0
        self._rng = random.Random(seed)
        self._go_left_next = False

    @property
    def initialized(self) -> bool:
        return self.count >= self.n + 1

    def _insert_initial(self, x: float) -> None:
        value = x
        while True:
            at = bisect.bisect_left(self.positions, value)
            if at < len(self.positions) and self.positions[at] == value:
                value += JITTER * (1.0 + abs(value))
                continue
            self.positions.insert(at, value)
            return

    def consume(self, x: float) -> None:
        """Feed one value; the whole wall vector updates in one pass."""
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"rejected value {x!r}: must be finite")
        if not self.initialized:
            self._insert_initial(x)
            self.count += 1
            return

        if self.policy == "left_right":
            forward = True
        elif self.policy == "right_left":
            forward = False
        elif self.policy == "alternate":
            forward = not self._go_left_next
            self._go_left_next = forward
        elif self.policy == "random":
            forward = self._rng.random() < 0.5
        else:  # bidirectional_average
            ahead = update_percentiles(self.positions, x, self.count)
            behind = update_percentiles_reversed(self.positions, x, self.count)
            self.positions = [0.5 * (a + b) for a, b in zip(ahead, behind)]
            self.count += 1
            return

        if forward:
            self.positions = update_percentiles(self.positions, x, self.count)
        else:
            self.positions = update_percentiles_reversed(self.positions, x, self.count)
        self.count += 1

    def percentile(self, q: float) -> float:
        """Linear interpolation at rank q/100 * n over the wall positions."""
        if not 0.0 <= q <= 100.0:
            raise ValueError(f"percentile {q} outside [0, 100]")
        if not self.initialized:
            raise SketchWarmupError(
                f"sketch warmed with {self.count} of {self.n + 1} values"
            )
        rank = q / 100.0 * self.n
        low = int(math.floor(rank))
        if low >= self.n:
            return self.positions[self.n]
        frac = rank - low
        return self.positions[low] + frac * (self.positions[low + 1] - self.positions[low])

    def to_json(self) -> str:
        """Checkpoint the sketch state, including the policy RNG."""
        state = self._rng.getstate()
        return json.dumps(
            {
                "n": self.n,
                "policy": self.policy,
                "count": self.count,
                "positions": self.positions,
                "rng_state": [state[0], list(state[1]), state[2]],
                "go_left_next": self._go_left_next,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PercentileSketch":
        doc = json.loads(text)
        sketch = cls(doc["n"], doc["policy"])
        sketch.positions = [float(v) for v in doc["positions"]]
        sketch.count = int(doc["count"])
        version, internal, gauss = doc["rng_state"]
        sketch._rng.setstate((version, tuple(internal), gauss))
        sketch._go_left_next = bool(doc["go_left_next"])
        return sketch
