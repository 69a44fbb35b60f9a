"""Command-line surface: replay monitoring, stream generation, report viewing.

Exit codes: 0 success, 1 input error (unreadable or empty stream, unknown
alarm id), 2 configuration error (missing schema, bad config value,
overlapping drift segments). Configuration files are flat ``key = value``
text with dotted section prefixes; every monitoring knob is exposed under
``monitor.`` and report assembly under ``report.``.

The replay loop owns the monitor state on the main thread. Alarm reports
build in a small worker pool so a slow report never stalls ingestion; the
pool is bounded, and results are drained in submission order so manifests
come out identical run to run.
"""

from __future__ import annotations

import argparse
import bisect
import hashlib
import heapq
import json
import math
import sys
from collections import deque
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

from .explain import ReportConfig, build_report, time_correlation_filter
from .monitor import Monitor, MonitorConfig, SignalPoint
from .report import write_report_files
from .stream_model import FeatureSchema, SchemaError, StreamError, read_stream
from .synthetic import spec_from_json, write_outputs
from .windows import ConfigError

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONFIG = 2

SIGNAL_FILE = "signal.csv"
MANIFEST_FILE = "manifest.json"


class CliError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


@dataclass
class RunnerConfig:
    """Knobs owned by the CLI layer rather than the monitor itself."""

    workers: int = 2
    valley_count: int = 5

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("report.workers must be at least 1")
        if self.valley_count < 0:
            raise ConfigError("monitor.valley_count must be non-negative")


@dataclass
class RunManifest:
    config: dict
    input_digest: str
    seed: int
    outputs: dict
    counts: dict
    valleys: list[int] = field(default_factory=list)
    alarms: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "config": self.config,
                "input_digest": self.input_digest,
                "seed": self.seed,
                "outputs": self.outputs,
                "counts": self.counts,
                "valleys": self.valleys,
                "alarms": self.alarms,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        doc = json.loads(text)
        return cls(
            doc["config"], doc["input_digest"], doc["seed"],
            doc["outputs"], doc["counts"], doc["valleys"], doc["alarms"],
        )


def _parse_config_lines(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(
                f"config line {line_number}: expected key = value, got {line!r}",
                EXIT_CONFIG,
            )
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


_MONITOR_FIELDS = {
    "n_r": int,
    "n_t": int,
    "bin_count": int,
    "threshold_percentile": float,
    "sketch_bins": int,
    "refractory_events": int,
    "min_signal_samples": int,
    "valley_percentile": float,
    "direction_policy": str,
}
_RUNNER_FIELDS = {"valley_count": int}
_REPORT_FIELDS = {
    "workers": int,
    "cv_folds": int,
    "top_events": int,
    "top_importances": int,
    "validation_step": int,
    "validation_max_k": int,
}


def load_run_config(path: str) -> tuple[MonitorConfig, ReportConfig, RunnerConfig, dict]:
    """Parse the flat config file; returns configs plus the resolved echo dict."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}", EXIT_CONFIG) from exc
    raw = _parse_config_lines(text)

    monitor_kwargs: dict = {}
    report_kwargs: dict = {}
    runner_kwargs: dict = {}
    for key, value in raw.items():
        section, _, name = key.partition(".")
        try:
            if section == "monitor" and name in _MONITOR_FIELDS:
                monitor_kwargs[name] = _MONITOR_FIELDS[name](value)
            elif section == "monitor" and name in _RUNNER_FIELDS:
                runner_kwargs[name] = _RUNNER_FIELDS[name](value)
            elif section == "report" and name in _REPORT_FIELDS:
                if name == "workers":
                    runner_kwargs[name] = int(value)
                else:
                    report_kwargs[name] = _REPORT_FIELDS[name](value)
            else:
                raise CliError(f"unknown config key {key!r}", EXIT_CONFIG)
        except ValueError as exc:
            raise CliError(f"bad value for {key!r}: {exc}", EXIT_CONFIG) from exc
    for required in ("n_r", "n_t"):
        if required not in monitor_kwargs:
            raise CliError(f"config missing monitor.{required}", EXIT_CONFIG)

    try:
        monitor_config = MonitorConfig(**monitor_kwargs)
        report_config = ReportConfig(**report_kwargs)
        runner_config = RunnerConfig(**runner_kwargs)
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc

    echo = {
        "monitor": {
            "n_r": monitor_config.n_r,
            "n_t": monitor_config.n_t,
            "bin_count": monitor_config.bin_count,
            "threshold_percentile": monitor_config.threshold_percentile,
            "sketch_bins": monitor_config.sketch_bins,
            "refractory_events": monitor_config.refractory_events,
            "min_signal_samples": monitor_config.min_signal_samples,
            "valley_percentile": monitor_config.valley_percentile,
            "direction_policy": monitor_config.direction_policy,
            "valley_count": runner_config.valley_count,
        },
        "report": {
            "workers": runner_config.workers,
            "cv_folds": report_config.cv_folds,
            "top_events": report_config.top_events,
            "top_importances": report_config.top_importances,
            "validation_step": report_config.validation_step,
            "validation_max_k": report_config.validation_max_k,
        },
    }
    return monitor_config, report_config, runner_config, echo


def _load_schema(path: str) -> FeatureSchema:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read schema: {exc}", EXIT_CONFIG) from exc
    try:
        return FeatureSchema.from_json(text)
    except SchemaError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc


def _sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _sorted_percentile(values: list[float], q: float) -> float:
    rank = q / 100.0 * (len(values) - 1)
    low = math.floor(rank)
    high = min(low + 1, len(values) - 1)
    frac = rank - low
    return values[low] * (1.0 - frac) + values[high] * frac


class ValleyCollector:
    """Streaming pick of the lowest well-spaced signal valleys.

    Keeps a bounded pool of the lowest-valued local minima that were
    flagged as valley candidates at emission time, then resolves spacing
    greedily at the end of the run. Constant memory, unlike the offline
    ``select_valleys``, which needs the whole series.
    """

    def __init__(self, count: int, min_spacing: int, pool_size: int = 4096):
        self.count = count
        self.min_spacing = min_spacing
        self.pool_size = max(pool_size, count * 8)
        self._heap: list[tuple[float, int]] = []
        self._before_previous: float | None = None
        self._previous: SignalPoint | None = None

    def observe(self, point: SignalPoint) -> None:
        if self.count == 0:
            return
        previous = self._previous
        if previous is not None:
            left = self._before_previous
            if (left is None or previous.signal <= left) \
                    and previous.signal <= point.signal:
                self._offer(previous)
            self._before_previous = previous.signal
        self._previous = point

    def _offer(self, point: SignalPoint) -> None:
        if not point.is_valley_candidate:
            return
        # Max-heap by value via negation, so the worst candidate pops first.
        heapq.heappush(self._heap, (-point.signal, -point.event_index))
        if len(self._heap) > self.pool_size:
            heapq.heappop(self._heap)

    def finalize(self) -> list[int]:
        previous = self._previous
        if previous is not None:
            left = self._before_previous
            if left is None or previous.signal <= left:
                self._offer(previous)
        candidates = sorted((-v, -i) for v, i in self._heap)
        accepted: list[int] = []
        for _, index in candidates:
            if all(abs(index - taken) >= self.min_spacing for taken in accepted):
                accepted.append(index)
                if len(accepted) == self.count:
                    break
        return accepted


def _build_and_write(trigger, schema, report_config, seed_list, out_dir) -> dict[str, str]:
    report = build_report(trigger, schema, report_config, seed=seed_list)
    stem = f"alarm_{trigger.alarm_index:04d}"
    paths = write_report_files(report, out_dir, stem)
    return {name: str(path) for name, path in paths.items()}


def _drain_one(pending: deque, report_paths: dict[int, dict[str, str]]) -> None:
    alarm_index, future = pending.popleft()
    report_paths[alarm_index] = future.result()


def cmd_monitor(args) -> int:
    schema = _load_schema(args.schema)
    monitor_config, report_config, runner_config, echo = load_run_config(args.config)
    input_path = Path(args.input)
    if not input_path.is_file():
        raise CliError(f"cannot read input: {input_path}", EXIT_INPUT)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        monitor = Monitor(monitor_config, seed=args.seed)
    except (ConfigError, ValueError) as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc

    digest = _sha256_of(input_path)
    signal_path = out_dir / SIGNAL_FILE
    valleys = ValleyCollector(runner_config.valley_count, monitor_config.n_t)
    landmark_values: list[float] | None = [] if args.debug_landmark else None

    shared_filter = None
    pending: deque[tuple[int, Future]] = deque()
    report_paths: dict[int, dict[str, str]] = {}
    alarm_summaries: list[dict] = []
    events_seen = 0
    points_emitted = 0

    stream_format = "jsonl" if input_path.suffix == ".jsonl" else "csv"
    header = "event_index,timestamp,signal,threshold,is_alarm"
    if landmark_values is not None:
        header += ",landmark"

    with open(input_path, "r", encoding="utf-8", newline="") as source, \
            open(signal_path, "w", encoding="utf-8", newline="") as sink, \
            ThreadPoolExecutor(max_workers=runner_config.workers) as pool:
        sink.write(header + "\n")
        try:
            for event in read_stream(source, schema, stream_format):
                point, trigger = monitor.step(event)
                events_seen += 1
                if point is not None:
                    points_emitted += 1
                    row = (
                        f"{point.event_index},{point.timestamp},"
                        f"{point.signal!r},{point.threshold!r},"
                        f"{1 if point.is_alarm else 0}"
                    )
                    if landmark_values is not None:
                        landmark = _sorted_percentile(
                            landmark_values, monitor_config.threshold_percentile
                        )
                        row += f",{landmark!r}"
                    sink.write(row + "\n")
                    valleys.observe(point)
                if landmark_values is not None and monitor.windows.warmed_up:
                    bisect.insort(landmark_values, monitor.signal_state.value())
                if trigger is not None:
                    if shared_filter is None:
                        shared_filter = time_correlation_filter(
                            list(monitor.burn_in_sample), schema,
                            seed=[args.seed, 0],
                            sample_size=report_config.mic_sample_size,
                            alpha=report_config.mic_alpha,
                            confidence=report_config.mic_confidence,
                        )
                    trigger = trigger.with_filter(shared_filter)
                    while len(pending) >= runner_config.workers * 2:
                        _drain_one(pending, report_paths)
                    future = pool.submit(
                        _build_and_write, trigger, schema, report_config,
                        [args.seed, trigger.alarm_index], out_dir,
                    )
                    pending.append((trigger.alarm_index, future))
                    alarm_summaries.append(
                        {
                            "alarm": trigger.alarm_index,
                            "event_index": trigger.event_index,
                            "timestamp": trigger.timestamp,
                            "signal": trigger.signal,
                            "threshold": trigger.threshold,
                        }
                    )
        except StreamError as exc:
            raise CliError(str(exc), EXIT_INPUT) from exc
        finally:
            while pending:
                _drain_one(pending, report_paths)

    if events_seen == 0:
        raise CliError("empty stream: no events", EXIT_INPUT)

    valley_indices = valleys.finalize()
    manifest = RunManifest(
        config=echo,
        input_digest=digest,
        seed=args.seed,
        outputs={
            "signal_csv": str(signal_path),
            "reports": {
                str(alarm): paths for alarm, paths in sorted(report_paths.items())
            },
        },
        counts={
            "events": events_seen,
            "signal_points": points_emitted,
            "alarms": len(alarm_summaries),
            "valleys": len(valley_indices),
        },
        valleys=valley_indices,
        alarms=alarm_summaries,
    )
    (out_dir / MANIFEST_FILE).write_text(manifest.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        text = Path(args.spec).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read spec: {exc}", EXIT_CONFIG) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"bad spec JSON: {exc}", EXIT_CONFIG) from exc
    try:
        spec = spec_from_json(doc)
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    try:
        paths = write_outputs(spec, args.out)
    except OSError as exc:
        raise CliError(f"cannot write output: {exc}", EXIT_INPUT) from exc
    print(json.dumps(paths, indent=2))
    return EXIT_OK


def cmd_report(args) -> int:
    manifest_path = Path(args.run) / MANIFEST_FILE
    try:
        manifest = RunManifest.from_json(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise CliError(f"cannot read run manifest: {exc}", EXIT_INPUT) from exc
    paths = manifest.outputs.get("reports", {}).get(str(args.alarm))
    if paths is None:
        raise CliError(f"unknown alarm id: {args.alarm}", EXIT_INPUT)
    try:
        markdown = Path(paths["markdown"]).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read report: {exc}", EXIT_INPUT) from exc
    print(markdown, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftwatch",
        description="Label-free model monitoring over score streams.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    monitor = commands.add_parser("monitor", help="replay a stream and emit alarms")
    monitor.add_argument("--input", required=True, help="event stream (.csv or .jsonl)")
    monitor.add_argument("--schema", required=True, help="feature schema JSON")
    monitor.add_argument("--config", required=True, help="flat key=value config file")
    monitor.add_argument("--out", required=True, help="output directory")
    monitor.add_argument("--seed", type=int, default=0)
    monitor.add_argument(
        "--debug-landmark", action="store_true",
        help="add an exact full-history percentile column to the signal CSV",
    )
    monitor.set_defaults(handler=cmd_monitor)

    generate = commands.add_parser("generate", help="write a synthetic labeled stream")
    generate.add_argument("--spec", required=True, help="synthetic spec JSON")
    generate.add_argument("--out", required=True, help="output CSV path")
    generate.set_defaults(handler=cmd_generate)

    report = commands.add_parser("report", help="print an alarm report as Markdown")
    report.add_argument("--run", required=True, help="output directory of a monitor run")
    report.add_argument("--alarm", required=True, help="alarm id from the manifest")
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
