"""Run reports: per-connector time series (CSV) and angle/current figures.

Every connector that produced telemetry gets one CSV of per-tick samples
and, optionally, one PNG with the angle trajectory over its commanded state
changes and the measured current against the goal-current ceiling.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .config import DEFAULT_CONFIG, SimConfig
from .trace import KIND_SAMPLE, KIND_STATE, EventTrace

SERIES_FIELDS = ("time_s", "angle_deg", "current_ma", "state")


def sampled_subjects(trace: EventTrace) -> list[str]:
    return sorted({e.subject for e in trace.events if e.kind == KIND_SAMPLE})


def _safe_name(subject: str) -> str:
    return subject.replace(":", "_")


def write_series_csv(trace: EventTrace, subject: str, path: Path) -> int:
    """Write one connector's samples; returns the row count."""
    rows = 0
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_FIELDS)
        for event in trace.by_kind(KIND_SAMPLE, subject):
            writer.writerow([
                f"{event.time_s:.3f}",
                event.payload["angle_deg"],
                event.payload["current_ma"],
                event.payload["state"],
            ])
            rows += 1
    return rows


def write_connector_figure(trace: EventTrace, subject: str, path: Path,
                           config: SimConfig = DEFAULT_CONFIG) -> None:
    samples = trace.by_kind(KIND_SAMPLE, subject)
    times = [e.time_s for e in samples]
    angles = [e.payload["angle_deg"] for e in samples]
    currents = [e.payload["current_ma"] for e in samples]

    fig, (ax_angle, ax_current) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    ax_angle.plot(times, angles, color="tab:blue", linewidth=1.5)
    for event in trace.by_kind(KIND_STATE, subject):
        ax_angle.axvline(event.time_s, color="0.8", linewidth=0.8, zorder=0)
    ax_angle.set_ylabel("angle [deg]")
    ax_angle.set_title(subject)
    ax_angle.grid(True, alpha=0.3)

    ax_current.plot(times, currents, color="tab:orange", linewidth=1.5)
    ax_current.axhline(config.goal_current_limit_ma, color="tab:red",
                       linestyle="--", linewidth=1.0, label="goal current limit")
    ax_current.set_ylabel("current [mA]")
    ax_current.set_xlabel("time [s]")
    ax_current.grid(True, alpha=0.3)
    ax_current.legend(loc="upper right", fontsize=8)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_report(trace: EventTrace, out_dir: str | Path,
                  config: SimConfig = DEFAULT_CONFIG, *, plot: bool = True) -> list[Path]:
    """Write events.jsonl plus per-connector CSV series and figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    events_path = out / "events.jsonl"
    events_path.write_text(trace.to_jsonl())
    written.append(events_path)
    for subject in sampled_subjects(trace):
        base = _safe_name(subject)
        csv_path = out / f"{base}.csv"
        write_series_csv(trace, subject, csv_path)
        written.append(csv_path)
        if plot:
            png_path = out / f"{base}.png"
            write_connector_figure(trace, subject, png_path, config)
            written.append(png_path)
    return written
