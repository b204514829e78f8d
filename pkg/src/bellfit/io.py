"""File formats: dataset CSV, key=value config, analysis reports.

Dataset files start with ``#`` metadata lines of the form ``# key=value``;
``schema_version`` is mandatory.  The body is a CSV table with the columns of
:data:`DATASET_COLUMNS` and an optional trailing ``n_pairs`` column.  Angles
are written with ``repr`` so a write/parse cycle is lossless.
"""

from __future__ import annotations

import csv
import io
import math
import os
import re
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .dataset import COUNT_FIELDS, CountRecord, Dataset, angle_key
from .errors import (
    BellfitError,
    DatasetFormatError,
    DegenerateDataError,
    ParameterDomainError,
    UnsupportedVersionError,
)
from .model import AnalyzerArm, DetectorBank, SetupConfig
from .stats import Thresholds, lhv_model_curve, qm_model_curve

SCHEMA_VERSION = "1"
DATASET_COLUMNS = ("alice_deg", "bob_deg") + COUNT_FIELDS
OPTIONAL_COLUMN = "n_pairs"
_INTEGER = re.compile(r"-?[0-9]+")


# --------------------------------------------------------------------------
# dataset CSV
# --------------------------------------------------------------------------

def format_dataset(dataset: Dataset) -> str:
    """Text of ``dataset`` in the CSV layout."""
    with_n = any(r.n_pairs is not None for r in dataset.records)
    out = io.StringIO()
    out.write(f"# schema_version={SCHEMA_VERSION}\n")
    for key in sorted(dataset.metadata):
        value = str(dataset.metadata[key])
        if "\n" in value or "=" in key or key == "schema_version":
            raise DatasetFormatError(f"metadata entry {key!r} cannot be serialized")
        out.write(f"# {key}={value}\n")
    columns = DATASET_COLUMNS + ((OPTIONAL_COLUMN,) if with_n else ())
    out.write(",".join(columns) + "\n")
    for r in dataset.records:
        row = [repr(float(r.alpha_deg)), repr(float(r.beta_deg))]
        row += [str(getattr(r, name)) for name in COUNT_FIELDS]
        if with_n:
            row.append("" if r.n_pairs is None else str(r.n_pairs))
        out.write(",".join(row) + "\n")
    return out.getvalue()


def write_dataset(dataset: Dataset, path) -> None:
    Path(path).write_text(format_dataset(dataset), encoding="utf-8", newline="\n")


def _parse_count(text, column, line, path):
    if not _INTEGER.fullmatch(text):
        raise DatasetFormatError(f"{column}={text!r} is not an integer count", line, path)
    value = int(text)
    if value < 0:
        raise DatasetFormatError(f"{column}={value} is negative", line, path)
    return value


def _parse_angle(text, column, line, path):
    try:
        value = float(text)
    except ValueError:
        raise DatasetFormatError(f"{column}={text!r} is not a number", line, path) from None
    if not math.isfinite(value):
        raise DatasetFormatError(f"{column}={text!r} is not finite", line, path)
    return value


def parse_dataset_text(text, path=None) -> Dataset:
    lines = text.splitlines()
    if not any(line.strip() for line in lines):
        raise DatasetFormatError("empty dataset file", 1, path)
    metadata, version = {}, None
    body_start = None
    for number, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if not stripped.startswith("#"):
            body_start = number
            break
        entry = stripped[1:].strip()
        if "=" not in entry:
            continue  # free comment
        key, value = (part.strip() for part in entry.split("=", 1))
        if key == "schema_version":
            version = value
        else:
            metadata[key] = value
    if version is None:
        raise DatasetFormatError("missing '# schema_version=' header line", 1, path)
    if version != SCHEMA_VERSION:
        raise UnsupportedVersionError(
            f"schema_version {version!r} is not supported (expected {SCHEMA_VERSION})",
            1, path)
    if body_start is None:
        raise DatasetFormatError("no column header after metadata", len(lines), path)

    header = [c.strip() for c in next(csv.reader([lines[body_start - 1]]))]
    expected = list(DATASET_COLUMNS)
    if header not in (expected, expected + [OPTIONAL_COLUMN]):
        raise DatasetFormatError(
            f"column header {header} does not match {expected} [+ {OPTIONAL_COLUMN}]",
            body_start, path)
    with_n = len(header) == len(expected) + 1

    records, seen = [], {}
    rows = csv.reader(lines[body_start:])
    for offset, row in enumerate(rows, start=body_start + 1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DatasetFormatError(
                f"expected {len(header)} fields, found {len(row)}", offset, path)
        cells = [cell.strip() for cell in row]
        alpha = _parse_angle(cells[0], "alice_deg", offset, path)
        beta = _parse_angle(cells[1], "bob_deg", offset, path)
        counts = {name: _parse_count(cells[2 + k], name, offset, path)
                  for k, name in enumerate(COUNT_FIELDS)}
        n_pairs = None
        if with_n and cells[-1]:
            n_pairs = _parse_count(cells[-1], OPTIONAL_COLUMN, offset, path)
        rec = CountRecord(alpha, beta, n_pairs=n_pairs, **counts)
        key = (angle_key(alpha), angle_key(beta))
        if key in seen:
            raise DatasetFormatError(
                f"duplicate setting alice_deg={alpha}, bob_deg={beta} "
                f"(first seen on line {seen[key]})", offset, path)
        seen[key] = offset
        records.append(rec)
    if not records:
        raise DatasetFormatError("dataset has no data rows", len(lines), path)
    try:
        return Dataset(records, metadata)
    except DegenerateDataError as exc:
        raise DatasetFormatError(str(exc), None, path) from None


def parse_dataset(path) -> Dataset:
    """Read and validate a dataset file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise DatasetFormatError(f"not UTF-8 text ({exc.reason})", None, path) from None
    return parse_dataset_text(text, path=os.fspath(path))


# --------------------------------------------------------------------------
# config files
# --------------------------------------------------------------------------

_ARM_FIELDS = tuple(f.name for f in fields(AnalyzerArm))
_DET_FIELDS = tuple(f.name for f in fields(DetectorBank))
_THRESHOLD_FIELDS = tuple(f.name for f in fields(Thresholds))
CONFIG_KEYS = (
    ("gamma", "mu_a", "mu_b", "r0")
    + tuple(f"arm_a.{n}" for n in _ARM_FIELDS)
    + tuple(f"arm_b.{n}" for n in _ARM_FIELDS)
    + tuple(f"det.{n}" for n in _DET_FIELDS)
    + tuple(f"thresholds.{n}" for n in _THRESHOLD_FIELDS)
)


def config_items(config: SetupConfig, thresholds: Thresholds | None = None):
    """(dotted key, value) pairs describing ``config`` (and ``thresholds``)."""
    items = [(k, getattr(config, k)) for k in ("gamma", "mu_a", "mu_b", "r0")]
    for arm in ("arm_a", "arm_b"):
        items += [(f"{arm}.{n}", getattr(getattr(config, arm), n)) for n in _ARM_FIELDS]
    items += [(f"det.{n}", getattr(config.det, n)) for n in _DET_FIELDS]
    if thresholds is not None:
        items += [(f"thresholds.{n}", getattr(thresholds, n)) for n in _THRESHOLD_FIELDS]
    return items


def format_config(config: SetupConfig, thresholds: Thresholds | None = None) -> str:
    return "".join(f"{k} = {v!r}\n" for k, v in config_items(config, thresholds))


def build_config(values: dict, base: SetupConfig | None = None,
                 base_thresholds: Thresholds | None = None):
    """Apply dotted ``values`` on top of ``base``; returns (config, thresholds)."""
    base = base or SetupConfig()
    thresholds = base_thresholds or Thresholds()
    top, arms, det, thr = {}, {"arm_a": {}, "arm_b": {}}, {}, {}
    for key, value in values.items():
        head, _, tail = key.partition(".")
        if head in arms:
            arms[head][tail] = value
        elif head == "det":
            det[tail] = value
        elif head == "thresholds":
            thr[tail] = value
        else:
            top[key] = value
    def build(prefix, obj, changes):
        try:
            return replace(obj, **changes)
        except ParameterDomainError as exc:
            name = f"{prefix}.{exc.field}" if prefix else exc.field
            raise ParameterDomainError(name, exc.value, exc.requirement) from None

    parts = {arm: build(arm, getattr(base, arm), arms[arm]) for arm in arms}
    parts["det"] = build("det", base.det, det)
    config = build("", base, {**parts, **top})
    return config, build("thresholds", thresholds, thr)


def parse_config_text(text, path=None, base=None, base_thresholds=None):
    values, where = {}, {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DatasetFormatError(f"expected 'key = value', got {raw.strip()!r}",
                                     number, path)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise DatasetFormatError(f"unknown config key {key!r}", number, path)
        if key in values:
            raise DatasetFormatError(
                f"config key {key!r} repeated (first on line {where[key]})", number, path)
        try:
            values[key] = float(value)
        except ValueError:
            raise DatasetFormatError(f"config key {key!r}: {value!r} is not a number",
                                     number, path) from None
        where[key] = number
    try:
        return build_config(values, base, base_thresholds)
    except ParameterDomainError as exc:
        raise DatasetFormatError(f"config key {exc.field!r}: {exc}",
                                 where.get(exc.field), path) from None


def load_config(path, base=None, base_thresholds=None):
    """(SetupConfig, Thresholds) from a key=value file.

    Keys left out keep the values of ``base`` / ``base_thresholds``.
    """
    return parse_config_text(Path(path).read_text(encoding="utf-8"), os.fspath(path),
                             base, base_thresholds)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

SCAN_COLUMNS = (
    "beta_deg", "n_points", "v_prime", "sigma_v_prime", "nu", "sigma_nu",
    "deviation_sigma", "eta_star", "eta_lo", "eta_hi",
    "chi2_qm", "dof_qm", "chi2_lhv", "dof_lhv",
    "eta_fit", "eta_fit_lo", "eta_fit_hi", "epsilon_fit",
    "consistent_qm", "lhv1_compatible", "lhv2_compatible", "warnings",
)
PLOT_COLUMNS = ("phi_deg", "f", "sigma_f", "model_qm", "model_lhv")
DELTA_COLUMNS = ("beta_deg", "channel", "mean_rate", "v", "delta", "sigma_delta")


def fmt(value):
    """Fixed textual form of a report cell."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    return format(value, ".10g")


def verdicts(row, thresholds: Thresholds):
    """Verdict flags recomputed from a scan row's own numbers."""
    dev, lo, hi = row["deviation_sigma"], row["eta_lo"], row["eta_hi"]
    has_nu = dev is not None and not math.isnan(dev)
    consistent = has_nu and abs(dev) <= thresholds.qm_sigma
    lhv1 = lo is not None and hi is not None and hi >= thresholds.lhv1_eta
    lhv2 = lo is not None and hi is not None and hi >= thresholds.lhv2_eta
    return (consistent if has_nu else None,
            lhv1 if has_nu else None,
            lhv2 if has_nu else None)


def scan_row(report, thresholds: Thresholds):
    """Ordered dict of :data:`SCAN_COLUMNS` for one :class:`ScanReport`."""
    row = dict.fromkeys(SCAN_COLUMNS)
    row["beta_deg"] = report.beta_deg
    row["n_points"] = len(report.series)
    if report.nu is not None:
        nu = report.nu
        row.update(v_prime=nu.v_prime, sigma_v_prime=nu.sigma_v_prime, nu=nu.nu,
                   sigma_nu=nu.sigma_nu, deviation_sigma=nu.sigma_deviation_from_qm,
                   eta_star=nu.eta_star, eta_lo=nu.eta_interval[0],
                   eta_hi=nu.eta_interval[1])
    if report.fit_qm is not None:
        row.update(chi2_qm=report.fit_qm.chi2, dof_qm=report.fit_qm.dof)
    if report.fit_lhv is not None:
        lhv = report.fit_lhv
        lo, hi = lhv.eta_interval or (None, None)
        row.update(chi2_lhv=lhv.chi2, dof_lhv=lhv.dof, eta_fit=lhv.params["eta"],
                   eta_fit_lo=lo, eta_fit_hi=hi, epsilon_fit=lhv.params["epsilon"])
    row["consistent_qm"], row["lhv1_compatible"], row["lhv2_compatible"] = \
        verdicts(row, thresholds)
    row["warnings"] = "; ".join(report.warnings)
    return row


def _csv_text(columns, rows):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row[c]) for c in columns])
    return out.getvalue()


def plot_rows(report):
    series = report.series
    qm = (qm_model_curve(series.phi, report.fit_qm) if report.fit_qm is not None
          else [None] * len(series))
    lhv = (lhv_model_curve(series.phi, report.fit_lhv) if report.fit_lhv is not None
           else [None] * len(series))
    return [dict(phi_deg=p, f=f, sigma_f=s, model_qm=q, model_lhv=m)
            for p, f, s, q, m in zip(series.phi_deg, series.f, series.sigma, qm, lhv)]


def plot_filename(beta_deg):
    return f"plot_beta_{beta_deg:07.3f}.csv"


def report_files(reports, thresholds: Thresholds, summary: dict):
    """Mapping file name -> text of the full report bundle."""
    reports = sorted(reports, key=lambda r: r.beta_deg)
    files = {"scans.csv": _csv_text(SCAN_COLUMNS, [scan_row(r, thresholds)
                                                    for r in reports])}
    delta_rows = []
    for r in reports:
        for channel in sorted(r.deltas):
            d = r.deltas[channel]
            delta_rows.append(dict(beta_deg=r.beta_deg, channel=channel,
                                   mean_rate=d.mean_rate, v=d.v, delta=d.delta,
                                   sigma_delta=d.sigma_delta))
    files["deltas.csv"] = _csv_text(DELTA_COLUMNS, delta_rows)
    for r in reports:
        files[plot_filename(r.beta_deg)] = _csv_text(PLOT_COLUMNS, plot_rows(r))
    files["summary.txt"] = "".join(f"{k}={fmt(v)}\n" for k, v in summary.items())
    return files


def write_report(outdir, reports, thresholds: Thresholds, summary: dict):
    """Write the bundle into ``outdir``; returns the list of written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in report_files(reports, thresholds, summary).items():
        path = outdir / name
        path.write_text(text, encoding="utf-8", newline="\n")
        written.append(path)
    return written


__all__ = [
    "BellfitError", "CONFIG_KEYS", "DATASET_COLUMNS", "SCHEMA_VERSION",
    "build_config", "config_items", "format_config", "format_dataset",
    "load_config", "parse_config_text", "parse_dataset", "parse_dataset_text",
    "report_files", "scan_row", "verdicts", "write_dataset", "write_report",
]
