"""Reading count tables and metadata, writing reports, diagnostics and benchmarks."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import ConditionLabels, CountTable, ValidationError
from .inference import DaReport
from .kde import default_bandwidth, density_on_grid

RESULT_COLUMNS = ("feature_id", "mean_lfc", "sd_lfc", "ci_low", "ci_high", "tail_p",
                  "q_value", "significant")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def sniff_delimiter(path, delimiter: Optional[str] = None) -> str:
    if delimiter:
        return "\t" if delimiter in ("tab", "\\t") else delimiter
    return "," if str(path).lower().endswith(".csv") else "\t"


def _read_rows(path, delimiter):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter)]
    rows = [r for r in rows if r and not (len(r) == 1 and not r[0].strip())]
    if not rows:
        raise ValidationError(f"{path}: file is empty")
    return rows


def _parse_count(cell: str, row: int, col: int, path) -> int:
    where = f"{path}: row {row}, column {col}"
    s = cell.strip()
    try:
        v = int(s)
    except ValueError:
        try:
            f = float(s)
        except ValueError:
            raise ValidationError(f"{where}: non-numeric cell {cell!r}") from None
        if not math.isfinite(f):
            raise ValidationError(f"{where}: non-finite count {cell!r}") from None
        if f != int(f):
            raise ValidationError(f"{where}: non-integer count {cell!r}") from None
        v = int(f)
    if v < 0:
        raise ValidationError(f"{where}: negative count {cell!r}")
    return v


def read_count_table(path, delimiter: Optional[str] = None,
                     transpose: bool = False) -> CountTable:
    """Parse a delimited count matrix.

    Features are rows and samples are columns: the header holds sample ids
    after a corner cell, and the first column holds feature ids. With
    ``transpose=True`` the file is read samples-as-rows instead.
    """
    delim = sniff_delimiter(path, delimiter)
    rows = _read_rows(path, delim)
    header = [h.strip() for h in rows[0][1:]]
    width = len(rows[0])
    row_ids, values = [], []
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != width:
            raise ValidationError(f"{path}: ragged row {i}: expected {width} fields, got {len(r)}")
        row_ids.append(r[0].strip())
        values.append([_parse_count(c, i, j, path) for j, c in enumerate(r[1:], start=2)])
    counts = np.array(values, dtype=np.int64).reshape(len(row_ids), len(header))
    if transpose:
        return CountTable(header, row_ids, counts.T)
    return CountTable(row_ids, header, counts)


def write_count_table(table: CountTable, path, delimiter: Optional[str] = None,
                      corner: str = "feature_id") -> None:
    delim = sniff_delimiter(path, delimiter)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delim, lineterminator="\n")
        w.writerow([corner, *table.sample_ids])
        for fid, row in zip(table.feature_ids, table.counts):
            w.writerow([fid, *(str(int(v)) for v in row)])


@dataclass(frozen=True, eq=False)
class SampleMetadata:
    sample_ids: tuple
    labels: ConditionLabels
    case_value: str
    control_value: str
    loads: Optional[np.ndarray] = None

    def aligned_to(self, table: CountTable) -> "SampleMetadata":
        """Reorder to the table's sample order; sample sets must match exactly."""
        if set(self.sample_ids) != set(table.sample_ids) or len(self.sample_ids) != table.shape[1]:
            missing = sorted(set(table.sample_ids) - set(self.sample_ids))
            extra = sorted(set(self.sample_ids) - set(table.sample_ids))
            raise ValidationError(
                f"sample mismatch with count table (missing {missing[:5]}, extra {extra[:5]})")
        pos = {s: i for i, s in enumerate(self.sample_ids)}
        order = np.array([pos[s] for s in table.sample_ids])
        loads = None if self.loads is None else self.loads[order]
        return SampleMetadata(table.sample_ids, ConditionLabels(self.labels.assignment[order]),
                              self.case_value, self.control_value, loads)


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _parse_load(cell, sid, path) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise ValidationError(f"{path}: load for {sid!r} is not numeric: {cell!r}") from None
    if not math.isfinite(v) or v <= 0:
        raise ValidationError(f"{path}: non-positive load for {sid!r}: {cell!r}")
    return v


def read_metadata(path, case: Optional[str] = None, delimiter: Optional[str] = None,
                  condition_column: str = "condition",
                  load_column: str = "load") -> SampleMetadata:
    """Read sample conditions (and optional loads) from a delimited file with a header.

    The first column is the sample id. Condition values are mapped to 0/1 by
    first appearance unless ``case`` names the value to code as 1.
    """
    delim = sniff_delimiter(path, delimiter)
    rows = _read_rows(path, delim)
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise ValidationError(f"{path}: need sample_id and condition columns")
    cond_col = header.index(condition_column) if condition_column in header else 1
    load_col = header.index(load_column) if load_column in header else None
    sids, conds, loads = [], [], []
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise ValidationError(f"{path}: ragged row {i}")
        sids.append(r[0].strip())
        conds.append(r[cond_col].strip())
        if load_col is not None:
            loads.append(_parse_load(r[load_col].strip(), sids[-1], path))
    if len(set(sids)) != len(sids):
        raise ValidationError(f"{path}: duplicate sample ids")
    levels = list(dict.fromkeys(conds))
    if len(levels) != 2:
        raise ValidationError(
            f"{path}: condition must take exactly two values, found {len(levels)}: {levels}")
    if case is None:
        control_value, case_value = levels
    elif case in levels:
        case_value = case
        control_value = levels[0] if levels[1] == case else levels[1]
    else:
        raise ValidationError(f"--case value {case!r} not among conditions {levels}")
    x = np.array([1 if c == case_value else 0 for c in conds])
    return SampleMetadata(tuple(sids), ConditionLabels(x), case_value, control_value,
                          np.array(loads) if load_col is not None else None)


def read_loads(path, delimiter: Optional[str] = None) -> dict:
    """Two-column (sample_id, load) file; a non-numeric first row is a header."""
    rows = _read_rows(path, sniff_delimiter(path, delimiter))
    if len(rows[0]) >= 2 and not _is_number(rows[0][1]):
        rows = rows[1:]
    out = {}
    for i, r in enumerate(rows, start=1):
        if len(r) < 2:
            raise ValidationError(f"{path}: row {i} needs sample_id and load")
        sid = r[0].strip()
        if sid in out:
            raise ValidationError(f"{path}: duplicate sample id {sid!r}")
        out[sid] = _parse_load(r[1].strip(), sid, path)
    return out


def loads_for(table: CountTable, loads: dict) -> np.ndarray:
    missing = [s for s in table.sample_ids if s not in loads]
    if missing:
        raise ValidationError(f"no load given for samples {missing[:5]}")
    return np.array([loads[s] for s in table.sample_ids])


# --- reports -----------------------------------------------------------------

def results_rows(report: DaReport, log_base: str = "e"):
    s = report.summary
    k = 1.0 if log_base == "e" else 1.0 / math.log(2.0)
    for i, fid in enumerate(report.feature_ids):
        yield (fid, s.mean_lfc[i] * k, s.sd_lfc[i] * k, s.ci_low[i] * k, s.ci_high[i] * k,
               s.tail_p[i], s.q_value[i], bool(s.significant[i]))


def write_results(report: DaReport, path, log_base: str = "e") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for row in results_rows(report, log_base):
            w.writerow([row[0], *(fmt(v) for v in row[1:])])


def density_diagnostic(comp_lfc_draws, grid_size: int = 512):
    """Mean KDE of the compositional LFC draws on one shared grid.

    Returns ``(grid, mean_density)``; each draw uses its own bandwidth.
    """
    draws = np.atleast_2d(np.asarray(comp_lfc_draws, dtype=float))
    hs = np.array([default_bandwidth(d) for d in draws])
    lo = float(draws.min() - 3.0 * hs.max())
    hi = float(draws.max() + 3.0 * hs.max())
    step = (hi - lo) / (grid_size - 1)
    dens = np.zeros(grid_size)
    for d, h in zip(draws, hs):
        dens += density_on_grid(d, h, lo, step, grid_size)
    return lo + step * np.arange(grid_size), dens / len(draws)


def write_diagnostics(directory, comp_lfc_draws, mode_draws, shift_draws=None,
                      grid_size: int = 512) -> dict:
    """``lfc_density.tsv`` (grid_size rows) and ``mode_draws.tsv`` (one row per draw)."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    grid, dens = density_diagnostic(comp_lfc_draws, grid_size)
    density_path = out / "lfc_density.tsv"
    with open(density_path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(("t", "density"))
        for t, p in zip(grid, dens):
            w.writerow((fmt(t), fmt(p)))
    modes = np.asarray(mode_draws, dtype=float)
    shifts = -modes if shift_draws is None else np.asarray(shift_draws, dtype=float)
    modes_path = out / "mode_draws.tsv"
    with open(modes_path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(("draw", "mode", "scale_shift"))
        for s, (m, sh) in enumerate(zip(modes, shifts)):
            w.writerow((s, fmt(m), fmt(sh)))
    return {"density": str(density_path), "modes": str(modes_path)}


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def report_metadata(report: DaReport) -> dict:
    return {
        "method": report.method,
        "scale_model_kind": report.scale_model_kind,
        "scale_variance": report.scale_variance,
        "scale_variances": report.scale_variances,
        "n_features": len(report.feature_ids),
        "n_significant": report.n_significant,
    }


def write_report(report: DaReport, directory, manifest: Optional[dict] = None,
                 log_base: str = "e") -> dict:
    """Write results.tsv, manifest.json and the diagnostics/ folder."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_results(report, out / "results.tsv", log_base)
    diag = write_diagnostics(out / "diagnostics", report.comp_lfc_draws, report.mode_draws,
                             report.shift_draws, report.config.kde_grid_size)
    man = dict(manifest or {})
    man.setdefault("config", report.config.to_dict())
    man["report"] = report_metadata(report)
    man["warnings"] = list(man.get("warnings", [])) + list(report.warnings)
    write_json(man, out / "manifest.json")
    return {"results": str(out / "results.tsv"), "manifest": str(out / "manifest.json"), **diag}


# --- synthetic data and benchmarks ---------------------------------------------

def write_dataset(data, directory) -> dict:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_count_table(data.table, out / "counts.tsv")
    with open(out / "metadata.tsv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(("sample_id", "condition", "load"))
        for sid, x, load in zip(data.table.sample_ids, data.labels.assignment, data.true_loads):
            w.writerow((sid, "case" if x else "control", fmt(load)))
    with open(out / "truth.tsv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(("feature_id", "true_lfc", "relevant"))
        for fid, t in zip(data.table.feature_ids, data.truth):
            w.writerow((fid, fmt(t), fmt(bool(t != 0))))
    return {k: str(out / f) for k, f in
            (("counts", "counts.tsv"), ("metadata", "metadata.tsv"), ("truth", "truth.tsv"))}


def read_truth(path) -> dict:
    rows = _read_rows(path, "\t")
    return {r[0]: float(r[1]) for r in rows[1:]}


def write_benchmark(result, directory, sweep_field: Optional[str] = None) -> dict:
    """Long-format TSV, full JSON and (for sweeps) a plot-ready CSV."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    rows = result.summary_rows()
    paths = {"tsv": str(out / "benchmark.tsv"), "json": str(out / "benchmark.json")}
    with open(out / "benchmark.tsv", "w", newline="") as fh:
        fh.write(f"# {result.note}\n")
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(("scenario", "method", "metric", "value"))
        for r in rows:
            for metric in ("fdr", "tpr", "f_half", "discovery_rate", "replicates", "failed"):
                w.writerow((r["scenario"], r["method"], metric, fmt(r[metric])))
    write_json(result.to_dict(), out / "benchmark.json")
    if sweep_field:
        paths["csv"] = str(out / "sweep.csv")
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow((sweep_field, "method", "fdr", "tpr", "f_half"))
            for r in rows:
                level = getattr(result.scenarios[r["scenario"]], sweep_field)
                w.writerow((fmt(level), r["method"], fmt(r["fdr"]), fmt(r["tpr"]),
                            fmt(r["f_half"])))
    return paths


def scenario_from_dict(d: dict):
    from .sim import GeneratorSpec
    return GeneratorSpec(**d)


def read_scenarios(path) -> list:
    """Scenario file: JSON list of generator settings (or ``{"scenarios": [...]}``)."""
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data.get("scenarios", [])
    if not isinstance(data, list) or not data:
        raise ValidationError(f"{path}: expected a non-empty list of scenarios")
    try:
        return [scenario_from_dict(d) for d in data]
    except TypeError as e:
        raise ValidationError(f"{path}: bad scenario: {e}") from None


def write_consistency(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(("depth", "D", "rmse", "posterior_sd", "seeds"))
        for r in rows:
            w.writerow((fmt(r["depth"]), r["D"], fmt(r["rmse"]), fmt(r["posterior_sd"]),
                        r["seeds"]))


def spec_dict(spec) -> dict:
    return asdict(spec)
