"""Alarm explanation pipeline.

Given an alarm's frozen (R, T) snapshots this module removes
time-correlated features, encodes the remaining ones, trains the
discriminator on the R-vs-T labels, ranks the target events, sweeps the
validation curve, and cross-validates the discriminator. The assembled
:class:`~driftwatch.report.AlarmReport` is what users actually read.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import gbdt
from .divergence import ScoreHistogram, jsd
from .report import AlarmReport, RankedEventRow
from .stream_model import (
    CATEGORICAL,
    MISSING,
    NUMERIC,
    Event,
    FeatureSchema,
)

MIC_ESTIMATOR_NAME = "equi-frequency midrank grid search"
DEFAULT_MIC_SAMPLE = 1000
DEFAULT_SHUFFLE_ALPHA = 0.05
DEFAULT_SHUFFLE_CONFIDENCE = 0.95


def _rank_structure(values: np.ndarray):
    """Stable sort order plus midranks of tied-value groups.

    Returns (order, group_of_sorted, group_midrank). All occurrences of a
    value share one midrank (the mean of their sorted positions), so the
    derived bin assignments cannot distinguish tied values by position.
    """
    n = len(values)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    new_group = np.empty(n, dtype=bool)
    new_group[0] = True
    new_group[1:] = sorted_vals[1:] != sorted_vals[:-1]
    group_of_sorted = np.cumsum(new_group) - 1
    positions = np.arange(n, dtype=np.float64)
    totals = np.bincount(group_of_sorted, weights=positions)
    sizes = np.bincount(group_of_sorted)
    return order, group_of_sorted, totals / sizes


def _axis_assignments(values: np.ndarray, max_bins: int) -> dict[int, np.ndarray]:
    """Equi-frequency midrank bin assignment per bin count 2..max_bins."""
    n = len(values)
    order, group_of_sorted, midrank = _rank_structure(values)
    out = {}
    for bins in range(2, max_bins + 1):
        bin_of_group = np.minimum((midrank * bins / n).astype(np.int64), bins - 1)
        assignment = np.empty(n, dtype=np.int64)
        assignment[order] = bin_of_group[group_of_sorted]
        out[bins] = assignment
    return out


def _mutual_information_bits(xa: np.ndarray, a: int, tb: np.ndarray, b: int, n: int) -> float:
    # Marginals come from the integer bin counts, not from summing the
    # joint grid: float row sums depend on the reduction axis, while
    # count / n is one division. Together with the sorted summation below
    # this makes mic(x, t) == mic(t, x) exact.
    joint = np.bincount(xa * b + tb, minlength=a * b).astype(np.float64) / n
    px = np.bincount(xa, minlength=a).astype(np.float64) / n
    pt = np.bincount(tb, minlength=b).astype(np.float64) / n
    independent = np.outer(px, pt).ravel()
    keep = joint > 0.0
    terms = joint[keep] * np.log2(joint[keep] / independent[keep])
    terms.sort()
    return float(terms.sum())


def _grid_budget(n: int) -> int:
    return int(n ** 0.6)


def _mic_from_assignments(
    x_assign: dict[int, np.ndarray],
    t_assign: dict[int, np.ndarray],
    n: int,
    budget: int,
) -> float:
    best = 0.0
    for a, xa in x_assign.items():
        for b in range(2, budget // a + 1):
            value = _mutual_information_bits(xa, a, t_assign[b], b, n)
            value /= math.log2(min(a, b))
            if value > best:
                best = value
    return min(best, 1.0)


def _is_constant(values: np.ndarray) -> bool:
    return bool(np.all(values == values[0]))


def mic(x, t) -> float:
    """Maximal information coefficient over equi-frequency grids.

    Searches all grid shapes (a, b) with a, b >= 2 and a * b bounded by
    n^0.6, normalizing the mutual information by log2(min(a, b)).
    Deterministic, symmetric in its arguments, bounded in [0, 1], and 0
    for a constant series.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if len(x) != len(t):
        raise ValueError(f"length mismatch: {len(x)} vs {len(t)}")
    n = len(x)
    if n < 2 or _is_constant(x) or _is_constant(t):
        return 0.0
    budget = _grid_budget(n)
    if budget < 4:
        return 0.0
    max_bins = budget // 2
    x_assign = _axis_assignments(x, max_bins)
    t_assign = _axis_assignments(t, max_bins)
    return _mic_from_assignments(x_assign, t_assign, n, budget)


def shuffle_count(alpha: float, p: float) -> int:
    """Shuffles needed so max of the null sample exceeds a level-alpha
    outlier with probability p: ceil(log(1-p) / log(1-alpha))."""
    if not 0.0 < alpha < 1.0 or not 0.0 < p < 1.0:
        raise ValueError("alpha and p must lie strictly inside (0, 1)")
    return math.ceil(math.log1p(-p) / math.log1p(-alpha))


@dataclass(frozen=True)
class FeatureFilterEntry:
    name: str
    kind: str
    mic: float
    shuffle_threshold: float
    removed: bool
    warning: str | None = None


@dataclass(frozen=True)
class MicFilterResult:
    features: tuple[FeatureFilterEntry, ...]
    shuffles: int
    sample_size: int
    alpha: float
    confidence: float
    estimator: str = MIC_ESTIMATOR_NAME

    def removed_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features if f.removed)


def _frequency_codes(counts: Counter) -> dict[str, int]:
    """Most frequent category gets code 1; ties break by value; missing is 0."""
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return {value: code for code, (value, _) in enumerate(ranked, start=1)}


def _numeric_series(events, feature_index):
    """Column as floats with missing imputed to the median; (series, warning)."""
    raw = np.array(
        [
            e.features[feature_index] if e.features[feature_index] is not MISSING else np.nan
            for e in events
        ],
        dtype=np.float64,
    )
    present = raw[~np.isnan(raw)]
    if len(present) == 0:
        return np.zeros(len(raw)), "all values missing"
    if len(present) < len(raw):
        raw = np.where(np.isnan(raw), float(np.median(present)), raw)
    return raw, None


def _categorical_series(events, feature_index):
    values = [e.features[feature_index] for e in events]
    counts = Counter(v for v in values if v is not MISSING)
    codes = _frequency_codes(counts)
    return np.array([codes.get(v, 0) if v is not MISSING else 0 for v in values],
                    dtype=np.float64)


def _burn_in_sample_indices(total: int, sample_size: int) -> np.ndarray:
    if total <= sample_size:
        return np.arange(total)
    return np.round(np.linspace(0, total - 1, sample_size)).astype(np.int64)


def time_correlation_filter(
    burn_in_events: list[Event],
    schema: FeatureSchema,
    seed=0,
    sample_size: int = DEFAULT_MIC_SAMPLE,
    alpha: float = DEFAULT_SHUFFLE_ALPHA,
    confidence: float = DEFAULT_SHUFFLE_CONFIDENCE,
) -> MicFilterResult:
    """Flag features whose MIC against event order beats every shuffled MIC.

    Samples uniformly spaced events from the burn-in, computes each
    feature's MIC against the sample index, then the max MIC over M
    random shuffles of the feature series. A feature is removed when its
    MIC exceeds that max. Per-feature problems never abort the filter;
    the feature is kept and its entry carries a warning.
    """
    if len(burn_in_events) == 0:
        raise ValueError("empty burn-in")
    picked = _burn_in_sample_indices(len(burn_in_events), sample_size)
    if len(picked) < sample_size:
        warnings.warn(
            f"burn-in has {len(burn_in_events)} events, fewer than the "
            f"{sample_size} requested sample points; using all of them",
            stacklevel=2,
        )
    sample = [burn_in_events[i] for i in picked]
    n = len(sample)
    order_series = np.arange(n, dtype=np.float64)
    shuffles = shuffle_count(alpha, confidence)
    rng = np.random.default_rng(seed)
    budget = _grid_budget(n)
    max_bins = max(budget // 2, 2)
    t_assign = _axis_assignments(order_series, max_bins)

    entries = []
    for index, spec in enumerate(schema.features):
        if spec.kind == NUMERIC:
            series, warning = _numeric_series(sample, index)
        else:
            series, warning = _categorical_series(sample, index), None
        if _is_constant(series) or budget < 4:
            entries.append(FeatureFilterEntry(spec.name, spec.kind, 0.0, 0.0, False, warning))
            # The shuffle draws below must still happen so that the RNG
            # consumption, and hence every later feature's threshold,
            # does not depend on which features were constant.
            for _ in range(shuffles):
                rng.permutation(n)
            continue
        x_assign = _axis_assignments(series, max_bins)
        observed = _mic_from_assignments(x_assign, t_assign, n, budget)
        threshold = 0.0
        for _ in range(shuffles):
            perm = rng.permutation(n)
            permuted = {bins: arr[perm] for bins, arr in x_assign.items()}
            threshold = max(threshold, _mic_from_assignments(permuted, t_assign, n, budget))
        entries.append(
            FeatureFilterEntry(
                spec.name, spec.kind, observed, threshold, observed > threshold, warning
            )
        )
    return MicFilterResult(tuple(entries), shuffles, n, alpha, confidence)


MODEL_SCORE_COLUMN = "model_score"


def encode(
    r_events: tuple[Event, ...],
    t_events: tuple[Event, ...],
    schema: FeatureSchema,
    filter_result: MicFilterResult,
) -> tuple[gbdt.TrainingMatrix, list[str]]:
    """Snapshot events to a training matrix with R labeled 0 and T labeled 1.

    Removed features are dropped. Numeric missing values impute to the
    column median over R and T together; categorical values map to
    frequency-rank codes with missing and unseen as 0. The model score is
    appended as the final column. Returns the matrix and any per-column
    warnings.
    """
    events = list(r_events) + list(t_events)
    removed = set(filter_result.removed_names())
    kept = [
        (index, spec)
        for index, spec in enumerate(schema.features)
        if spec.name not in removed
    ]
    columns = []
    names = []
    column_warnings = []
    for index, spec in kept:
        if spec.kind == NUMERIC:
            series, warning = _numeric_series(events, index)
            if warning:
                column_warnings.append(f"{spec.name}: {warning}")
        else:
            series = _categorical_series(events, index)
        columns.append(series)
        names.append(spec.name)
    columns.append(np.array([e.score for e in events], dtype=np.float64))
    names.append(MODEL_SCORE_COLUMN)
    x = np.column_stack(columns)
    y = np.concatenate([np.zeros(len(r_events), dtype=np.int64),
                        np.ones(len(t_events), dtype=np.int64)])
    return gbdt.TrainingMatrix(x, y, names), column_warnings


def rank_target_events(
    model: gbdt.TreeEnsemble, t_events: tuple[Event, ...], t_rows: np.ndarray
) -> list[tuple[int, Event, float]]:
    """T events by alarm score descending; score ties go to newer events.

    Returns (position-in-T, event, alarm score) triples in rank order.
    """
    scores = gbdt.predict_proba(model, t_rows)
    order = sorted(range(len(t_events)), key=lambda i: (-scores[i], -i))
    return [(i, t_events[i], float(scores[i])) for i in order]


@dataclass(frozen=True)
class ValidationCurve:
    """Signal after removing the top-k ranked vs k random events from T."""

    k_values: tuple[int, ...]
    ranked_jsd: tuple[float, ...]
    random_jsd: tuple[float, ...]
    seed_note: str


def validation_curve(
    r_events: tuple[Event, ...],
    t_events: tuple[Event, ...],
    ranked_positions: list[int],
    bin_count: int,
    step: int | None = None,
    max_k: int | None = None,
    rng: np.random.Generator | None = None,
) -> ValidationCurve:
    """Sweep k from 0 upward, removing events from T and recomputing the signal.

    The ranked sweep peels events in ranking order; the random sweep peels
    a seeded random permutation, so each k's random removal set contains
    the previous one. Both sweeps share the k grid and bin count, and the
    k = 0 entries equal the alarm signal exactly.
    """
    size = len(t_events)
    if step is None:
        step = max(1, size // 50)
    if max_k is None:
        max_k = size // 2
    if max_k >= size:
        raise ValueError("max_k must leave at least one event in T")
    rng = rng or np.random.default_rng(0)

    hist_r = ScoreHistogram.from_scores((e.score for e in r_events), bin_count)
    base_t = ScoreHistogram.from_scores((e.score for e in t_events), bin_count)
    k_values = tuple(range(0, max_k + 1, step))

    def sweep(removal_order) -> tuple[float, ...]:
        hist = base_t.copy()
        values = []
        removed = 0
        for k in k_values:
            while removed < k:
                hist.remove(t_events[removal_order[removed]].score)
                removed += 1
            values.append(jsd(hist_r, hist))
        return tuple(values)

    ranked_values = sweep(ranked_positions)
    random_values = sweep(rng.permutation(size))
    return ValidationCurve(k_values, ranked_values, random_values,
                           "nested random removal, one permutation per curve")


@dataclass
class ReportConfig:
    """Knobs for report assembly; defaults mirror the monitoring pipeline."""

    bin_count: int = 100
    top_importances: int = 10
    top_events: int = 100
    cv_folds: int = 5
    validation_step: int | None = None
    validation_max_k: int | None = None
    gbdt_params: gbdt.GBDTParams = field(default_factory=gbdt.GBDTParams)
    mic_sample_size: int = DEFAULT_MIC_SAMPLE
    mic_alpha: float = DEFAULT_SHUFFLE_ALPHA
    mic_confidence: float = DEFAULT_SHUFFLE_CONFIDENCE


def _seed_list(seed) -> list[int]:
    if isinstance(seed, (list, tuple)):
        return [int(s) for s in seed]
    return [int(seed)]


def _display_cell(event: Event, column: str, schema: FeatureSchema) -> str:
    if column == MODEL_SCORE_COLUMN:
        return format(event.score, ".6g")
    index = schema.names.index(column)
    value = event.features[index]
    if value is MISSING:
        return ""
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def build_report(trigger, schema: FeatureSchema, config: ReportConfig | None = None,
                 seed=0) -> AlarmReport:
    """Assemble the full explanation for one alarm trigger.

    Uses the trigger's attached burn-in filter result, computing it from
    the raw burn-in sample only when absent. All randomness (filter
    shuffles, validation removals, CV folds) derives from the seed.
    """
    config = config or ReportConfig()
    seeds = _seed_list(seed)
    filter_result = trigger.filter_result
    if filter_result is None:
        filter_result = time_correlation_filter(
            list(trigger.burn_in_sample), schema, seed=seeds + [0],
            sample_size=config.mic_sample_size,
            alpha=config.mic_alpha, confidence=config.mic_confidence,
        )

    matrix, column_warnings = encode(
        trigger.r_snapshot, trigger.t_snapshot, schema, filter_result
    )
    model = gbdt.fit(matrix, config.gbdt_params)
    importances = gbdt.feature_importance(model)

    t_rows = matrix.x[len(trigger.r_snapshot):]
    ranking = rank_target_events(model, trigger.t_snapshot, t_rows)
    curve = validation_curve(
        trigger.r_snapshot, trigger.t_snapshot,
        [position for position, _, _ in ranking],
        config.bin_count,
        step=config.validation_step,
        max_k=config.validation_max_k,
        rng=np.random.default_rng(seeds + [1]),
    )
    cv = gbdt.kfold_auc(matrix, k=config.cv_folds, params=config.gbdt_params,
                        seed=seeds + [2])

    event_columns = [name for name, _ in importances]
    top = ranking[: min(config.top_events, len(ranking))]
    rows = [
        RankedEventRow(
            rank=rank,
            alarm_score=score,
            timestamp=event.timestamp,
            extras=event.extras_dict(),
            cells=[_display_cell(event, column, schema) for column in event_columns],
        )
        for rank, (_, event, score) in enumerate(top, start=1)
    ]

    r_snap, t_snap = trigger.r_snapshot, trigger.t_snapshot
    return AlarmReport(
        alarm_index=trigger.alarm_index,
        event_index=trigger.event_index,
        timestamp=trigger.timestamp,
        signal=trigger.signal,
        threshold=trigger.threshold,
        r_size=len(r_snap),
        t_size=len(t_snap),
        r_start_timestamp=r_snap[0].timestamp,
        r_end_timestamp=r_snap[-1].timestamp,
        t_start_timestamp=t_snap[0].timestamp,
        t_end_timestamp=t_snap[-1].timestamp,
        importances=importances[: config.top_importances],
        event_columns=event_columns,
        ranked_events=rows,
        validation=curve,
        cv_mean_auc=cv.mean_auc,
        cv_fold_aucs=cv.fold_aucs,
        cv_rocs=cv.fold_rocs,
        cv_k=cv.k,
        filter_result=filter_result,
        warnings=column_warnings,
    )
