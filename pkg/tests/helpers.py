"""Builders shared across test modules."""

from __future__ import annotations

from driftwatch import (
    CATEGORICAL,
    NUMERIC,
    Event,
    FeatureSchema,
    FeatureSpec,
    MonitorConfig,
)

EMPTY_SCHEMA = FeatureSchema(())


def score_events(scores, start_ts: int = 0) -> list[Event]:
    """Featureless events with consecutive timestamps."""
    return [Event(start_ts + i, float(s), ()) for i, s in enumerate(scores)]


def schema_of(*pairs) -> FeatureSchema:
    return FeatureSchema(tuple(FeatureSpec(name, kind) for name, kind in pairs))


def tiny_monitor_config(**overrides) -> MonitorConfig:
    """Smallest sane config for fast monitor tests."""
    settings = dict(
        n_r=40,
        n_t=20,
        bin_count=4,
        sketch_bins=4,
        min_signal_samples=10,
        threshold_percentile=95.0,
    )
    settings.update(overrides)
    return MonitorConfig(**settings)
