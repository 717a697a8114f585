"""CSV ingestion and validation.

Input contract (UTF-8, header row required, ISO-8601 dates):

* ``cases.csv``        date,region,confirmed,suspected,deaths,cumulative
* ``search.csv``       date,region,term,fraction
* ``media.csv``        date,region,article_count
* ``mechanistic.csv``  date,region,forecast_new_cases

Files are taken as-is (no retroactive revision handling). The region universe
comes from the cases file. Interior gaps in a region's coverage are imputed
(zero for flow signals, forward-fill for the cumulative signal) and flagged;
cells outside a region's own coverage stay missing and are reported, as are
cumulative-monotonicity violations. Nothing is silently repaired.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataValidationError
from .timeseries import SEARCH_PREFIX, SignalPanel

CASES_HEADER = ["date", "region", "confirmed", "suspected", "deaths", "cumulative"]
SEARCH_HEADER = ["date", "region", "term", "fraction"]
MEDIA_HEADER = ["date", "region", "article_count"]
MECH_HEADER = ["date", "region", "forecast_new_cases"]


@dataclass
class IngestReport:
    """Everything the validation pass noticed, cell by cell."""

    imputed: list[tuple[str, str, dt.date]] = field(default_factory=list)
    uncovered: dict[str, int] = field(default_factory=dict)
    monotonicity_violations: list[tuple[str, dt.date]] = field(default_factory=list)
    unknown_regions: dict[str, list[str]] = field(default_factory=dict)
    trimmed_days: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def findings(self) -> int:
        return (
            len(self.imputed)
            + sum(self.uncovered.values())
            + len(self.monotonicity_violations)
            + sum(len(v) for v in self.unknown_regions.values())
            + self.trimmed_days
        )

    def summary(self) -> str:
        lines = [f"validation findings: {self.findings}"]
        lines.append(f"  imputed cells: {len(self.imputed)}")
        for sig, region, date in self.imputed[:20]:
            lines.append(f"    {sig} {region} {date.isoformat()}")
        if len(self.imputed) > 20:
            lines.append(f"    ... and {len(self.imputed) - 20} more")
        lines.append(
            f"  uncovered cells: {sum(self.uncovered.values())}"
            + (
                " (" + ", ".join(f"{k}: {v}" for k, v in sorted(self.uncovered.items())) + ")"
                if self.uncovered
                else ""
            )
        )
        lines.append(
            f"  cumulative monotonicity violations: {len(self.monotonicity_violations)}"
        )
        for region, date in self.monotonicity_violations[:20]:
            lines.append(f"    {region} {date.isoformat()}")
        for fname, regions in self.unknown_regions.items():
            lines.append(f"  regions ignored from {fname}: {', '.join(regions)}")
        if self.trimmed_days:
            lines.append(f"  trailing days trimmed for bin alignment: {self.trimmed_days}")
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


def _parse_date(text: str, path, line) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise DataValidationError(
            f"invalid ISO date {text!r}", file=path, line=line, column="date"
        ) from None


def _parse_number(text: str, path, line, column) -> float:
    text = text.strip()
    if text == "":
        return float("nan")
    try:
        value = float(text)
    except ValueError:
        raise DataValidationError(
            f"invalid numeric value {text!r}", file=path, line=line, column=column
        ) from None
    if not np.isfinite(value):
        raise DataValidationError(
            f"non-finite value {text!r}", file=path, line=line, column=column
        )
    if value < 0:
        raise DataValidationError(
            f"negative value {value!r}", file=path, line=line, column=column
        )
    return value


def _read_rows(path: Path, header: list[str]) -> list[tuple[int, dict[str, str]]]:
    if not path.exists():
        raise DataValidationError("file not found", file=path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        # keep true line numbers while allowing leading '#' comment headers
        numbered = [
            (i, line) for i, line in enumerate(fh, start=1) if not line.startswith("#")
        ]
    if not numbered:
        raise DataValidationError("missing header row", file=path, line=1)
    header_no, header_line = numbered[0]
    got = next(csv.reader([header_line]))
    if [h.strip() for h in got] != header:
        raise DataValidationError(
            f"expected header {','.join(header)}, got {','.join(got)}",
            file=path,
            line=header_no,
        )
    rows = []
    for i, line in numbered[1:]:
        if not line.strip():
            continue
        row = next(csv.reader([line]))
        if all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataValidationError(
                f"expected {len(header)} fields, got {len(row)}",
                file=path,
                line=i,
            )
        rows.append((i, dict(zip(header, row))))
    return rows


def _file_records(path, header, value_cols, key_cols=("date", "region")):
    """Parse and de-duplicate one CSV; returns {key: {col: value}} plus spans."""
    rows = _read_rows(path, header)
    records: dict[tuple, dict[str, float]] = {}
    for line, row in rows:
        date = _parse_date(row["date"], path, line)
        key_parts = [date]
        for kc in key_cols[1:]:
            key_parts.append(row[kc].strip())
        key = tuple(key_parts)
        if key in records:
            raise DataValidationError(
                f"duplicate row for {', '.join(str(k) for k in key)}",
                file=path,
                line=line,
            )
        records[key] = {
            col: _parse_number(row[col], path, line, col) for col in value_cols
        }
    return records


def _fill_signal(
    values: np.ndarray,
    covered: np.ndarray,
    imputed_mask: np.ndarray,
    signal: str,
    regions: tuple[str, ...],
    calendar: tuple[dt.date, ...],
    cumulative: bool,
    report: IngestReport,
) -> None:
    """Impute interior gaps in place; report what stayed uncovered.

    Uncovered cells are judged against the signal's own coverage span (the
    min/max date any region reported), not the union calendar: a forecast
    stream extending past the case frontier is by design, not a finding.
    """
    any_covered = np.where(covered.any(axis=0))[0]
    if any_covered.size == 0:
        return
    span_lo, span_hi = any_covered[0], any_covered[-1]
    for r, region in enumerate(regions):
        present = np.where(covered[r])[0]
        if present.size == 0:
            report.uncovered[signal] = (
                report.uncovered.get(signal, 0) + (span_hi - span_lo + 1)
            )
            continue
        lo, hi = present[0], present[-1]
        for t in range(lo, hi + 1):
            if covered[r, t]:
                continue
            if cumulative:
                values[r, t] = values[r, t - 1]
            else:
                values[r, t] = 0.0
            covered[r, t] = True
            imputed_mask[r, t] = True
            report.imputed.append((signal, region, calendar[t]))
        missing_in_span = (lo - span_lo) + (span_hi - hi)
        if missing_in_span:
            report.uncovered[signal] = (
                report.uncovered.get(signal, 0) + missing_in_span
            )


def ingest(
    cases_path: str | Path,
    search_path: str | Path | None = None,
    media_path: str | Path | None = None,
    mechanistic_path: str | Path | None = None,
    combine_search_terms: bool = False,
    window: int = 2,
) -> tuple[SignalPanel, IngestReport]:
    """Merge the input CSVs into one daily panel plus a validation report."""
    report = IngestReport()
    cases_path = Path(cases_path)
    cases = _file_records(
        cases_path, CASES_HEADER, ["confirmed", "suspected", "deaths", "cumulative"]
    )
    if not cases:
        raise DataValidationError("empty input: no case rows", file=cases_path)

    regions = tuple(sorted({k[1] for k in cases}))
    cases_dates = [k[0] for k in cases]
    min_date = min(cases_dates)
    max_date = max(cases_dates)
    cases_end = max_date

    search = {}
    media = {}
    mech = {}
    if search_path is not None:
        search = _file_records(
            Path(search_path), SEARCH_HEADER, ["fraction"],
            key_cols=("date", "region", "term"),
        )
    if media_path is not None:
        media = _file_records(Path(media_path), MEDIA_HEADER, ["article_count"])
    if mechanistic_path is not None:
        mech = _file_records(Path(mechanistic_path), MECH_HEADER, ["forecast_new_cases"])

    for name, recs in (("search", search), ("media", media), ("mechanistic", mech)):
        if recs:
            min_date = min(min_date, min(k[0] for k in recs))
            max_date = max(max_date, max(k[0] for k in recs))

    # The cases frontier must land on a bin end under last-date anchoring.
    overhang = (max_date - cases_end).days % window
    if overhang:
        report.trimmed_days = overhang
        report.notes.append(
            f"trimmed {overhang} trailing day(s) so the case frontier is a bin end"
        )
        max_date -= dt.timedelta(days=overhang)

    n_days = (max_date - min_date).days + 1
    calendar = tuple(min_date + dt.timedelta(days=d) for d in range(n_days))
    day_index = {d: i for i, d in enumerate(calendar)}
    region_index = {r: i for i, r in enumerate(regions)}

    def new_layer():
        return np.full((len(regions), n_days), np.nan), np.zeros(
            (len(regions), n_days), dtype=bool
        )

    values: dict[str, np.ndarray] = {}
    covered: dict[str, np.ndarray] = {}
    for signal in ("confirmed", "suspected", "deaths", "cumulative"):
        values[signal], covered[signal] = new_layer()
    for (date, region), row in cases.items():
        if date not in day_index:
            continue
        r, t = region_index[region], day_index[date]
        for signal in ("confirmed", "suspected", "deaths", "cumulative"):
            if np.isfinite(row[signal]):
                values[signal][r, t] = row[signal]
                covered[signal][r, t] = True

    def place(recs, signal_of_key, value_col, fname):
        ignored = set()
        for key, row in recs.items():
            date, region = key[0], key[1]
            if region not in region_index:
                ignored.add(region)
                continue
            if date not in day_index:
                continue
            signal = signal_of_key(key)
            if signal not in values:
                values[signal], covered[signal] = new_layer()
            r, t = region_index[region], day_index[date]
            v = row[value_col]
            if np.isfinite(v):
                prev = values[signal][r, t]
                values[signal][r, t] = v if not np.isfinite(prev) else prev + v
                covered[signal][r, t] = True
        if ignored:
            report.unknown_regions[fname] = sorted(ignored)

    if search:
        if combine_search_terms:
            place(search, lambda k: SEARCH_PREFIX, "fraction", "search.csv")
        else:
            place(search, lambda k: f"{SEARCH_PREFIX}:{k[2]}", "fraction", "search.csv")
    if media:
        place(media, lambda k: "media_count", "article_count", "media.csv")
    if mech:
        place(mech, lambda k: "mechanistic_forecast", "forecast_new_cases", "mechanistic.csv")

    imputed_masks: dict[str, np.ndarray] = {}
    for signal in sorted(values):
        mask = np.zeros((len(regions), n_days), dtype=bool)
        _fill_signal(
            values[signal],
            covered[signal],
            mask,
            signal,
            regions,
            calendar,
            cumulative=(signal == "cumulative"),
            report=report,
        )
        imputed_masks[signal] = mask

    panel = SignalPanel(
        regions=regions,
        calendar=calendar,
        values=dict(sorted(values.items())),
        imputed=imputed_masks,
    )
    report.monotonicity_violations = panel.cumulative_violations()
    return panel, report
