"""Delimited text formats: datasets, fit reports, traces, study summaries.

All numeric output uses 17 significant digits so a write/read round trip is
value-identical for doubles.  Fit reports follow the (name, estimate, se)
shape with a dash for coefficients outside the active set and a final
intercept row recovered from the training residual median.
"""

import csv
import json

import numpy as np

from .data import Dataset
from .errors import ColumnMismatch, ConfigError, ParseError


def _fmt(v):
    return format(float(v), ".17g")


def _parse_float(cell, line, column):
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"line {line}, column {column}: not a number: {cell!r}",
                         index=line, column=column) from None


def _expected_header(p):
    return ["y", "l", "r"] + [f"x{k}" for k in range(1, p + 1)]


def read_csv(path):
    """Read a dataset from CSV with header y,l,r,x1..xp.

    Raises ParseError with the offending line and column, or the data-model
    validation errors annotated with their line number.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise ParseError("empty file", index=1) from None
        if len(header) < 4 or header[:3] != ["y", "l", "r"]:
            raise ParseError("header must start with y,l,r,x1,...", index=1)
        p = len(header) - 3
        if header != _expected_header(p):
            raise ParseError(
                f"covariate columns must be x1..x{p} in order", index=1
            )
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"line {line_no}: {len(row)} fields, expected {len(header)}",
                    index=line_no,
                )
            rows.append((line_no,
                         [_parse_float(c.strip(), line_no, header[k])
                          for k, c in enumerate(row)]))
    if len(rows) < 2:
        raise ParseError("need at least two data rows", index=len(rows) + 1)
    arr = np.array([vals for _, vals in rows])
    y, l, r, x = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3:]
    # per-row checks first so errors carry line numbers
    for k, (line_no, _) in enumerate(rows):
        if not np.all(np.isfinite(arr[k])):
            raise ParseError(f"line {line_no}: non-finite value", index=line_no)
        if not (l[k] < y[k] < r[k]):
            from .errors import WindowViolation
            raise WindowViolation(
                f"line {line_no}: y={y[k]} not strictly inside ({l[k]}, {r[k]})",
                index=line_no,
            )
    return Dataset(y, l, r, x)


def write_csv(dataset, path):
    """Write a dataset in the read_csv format (round-trip exact)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_expected_header(dataset.p))
        for k in range(dataset.n):
            writer.writerow([_fmt(dataset.y[k]), _fmt(dataset.l[k]),
                             _fmt(dataset.r[k])]
                            + [_fmt(v) for v in dataset.x[k]])


def read_covariates_csv(path):
    """Read prediction inputs: x1..xp required, y optional, l and r ignored.

    Returns (x, y_or_None).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise ParseError("empty file", index=1) from None
        xcols = [k for k, name in enumerate(header) if name.startswith("x")]
        p = len(xcols)
        if p == 0 or [header[k] for k in xcols] != [f"x{j}" for j in range(1, p + 1)]:
            raise ParseError("covariate columns must be x1..xp in order", index=1)
        ycol = header.index("y") if "y" in header else None
        xs, ys = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"line {line_no}: {len(row)} fields, expected {len(header)}",
                    index=line_no,
                )
            xs.append([_parse_float(row[k].strip(), line_no, header[k])
                       for k in xcols])
            if ycol is not None:
                ys.append(_parse_float(row[ycol].strip(), line_no, "y"))
    return np.array(xs, dtype=float), (np.array(ys) if ycol is not None else None)


def write_report(path, estimates, se_map, intercept):
    """Fit report: name,estimate,se rows for x1..xp plus the intercept.

    se_map maps coefficient index to its standard error; everything else
    (zeros and the intercept) gets a dash.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "estimate", "se"])
        for j, est in enumerate(estimates):
            se = se_map.get(j)
            writer.writerow([f"x{j + 1}", _fmt(est),
                             _fmt(se) if se is not None else "-"])
        writer.writerow(["intercept", _fmt(intercept), "-"])


def read_report(path):
    """Read a fit report back into (estimates, se_map, intercept)."""
    names, ests, ses = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["name", "estimate", "se"]:
            raise ParseError("not a fit report", index=1)
        for row in reader:
            if not row:
                continue
            names.append(row[0])
            ests.append(float(row[1]))
            ses.append(None if row[2] == "-" else float(row[2]))
    intercept = 0.0
    est_map = {}
    se_map = {}
    for name, est, se in zip(names, ests, ses):
        if name == "intercept":
            intercept = est
        else:
            if not name.startswith("x"):
                raise ParseError(f"unexpected row name {name!r}")
            j = int(name[1:]) - 1
            est_map[j] = est
            if se is not None:
                se_map[j] = se
    p = max(est_map) + 1 if est_map else 0
    estimates = np.zeros(p)
    for j, est in est_map.items():
        estimates[j] = est
    return estimates, se_map, intercept


def write_trace(path, trace):
    """Selection path: lambda,bic,df,loss rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "bic", "df", "loss"])
        for point in trace:
            writer.writerow([_fmt(point.lam), _fmt(point.bic), point.df,
                             _fmt(point.loss)])


def write_predictions(path, y_pred, y_true=None):
    """Plot-ready prediction rows: index,y_true,y_pred."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "y_true", "y_pred"])
        for k, yp in enumerate(y_pred):
            yt = "" if y_true is None else _fmt(y_true[k])
            writer.writerow([k, yt, _fmt(yp)])


def write_study_summary(path, summary):
    """Study summary: method,me_median,me_mad,cn,in,rcm rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "me_median", "me_mad", "cn", "in", "rcm"])
        for name, row in summary.methods.items():
            writer.writerow([name, _fmt(row.me_median), _fmt(row.me_mad),
                             _fmt(row.cn), _fmt(row.incorrect), _fmt(row.rcm)])


def write_meta(path, meta):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_meta(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


_CONFIG_SCHEMA = {
    "n_tilde": int,
    "error_law": str,
    "truncation_target": float,
    "replications": int,
    "seed": int,
    "grid_size": int,
    "gamma": float,
    "se_reps": int,
    "n_jobs": int,
    "max_iter": int,
    "tol": float,
}


def parse_config(path):
    """Key = value study configuration; '#' starts a comment.

    Unknown keys and malformed values raise ConfigError naming the key.
    """
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {line_no}: expected key = value",
                                  key=line)
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _CONFIG_SCHEMA:
                raise ConfigError(f"unknown configuration key {key!r}", key=key)
            try:
                out[key] = _CONFIG_SCHEMA[key](value)
            except ValueError:
                raise ConfigError(
                    f"invalid value for {key!r}: {value!r}", key=key
                ) from None
    if "error_law" in out and out["error_law"] not in ("normal", "extreme_min"):
        raise ConfigError(
            f"invalid value for 'error_law': {out['error_law']!r}",
            key="error_law",
        )
    return out
