"""CSV, JSON and gnuplot column output of experiment results."""
import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from models.reports import plain

logger = logging.getLogger(__name__)

COLUMNS = {
    'flow': ['t', 'dt', 'psi_sup', 'psi_l2', 'ymh', 'det_deviation', 'trace_mean'],
    'epsilon': ['epsilon', 'log_sup', 'log_l2', 'eps_log_sup', 'eps_log_l2', 'psi_sup',
                'det_deviation', 'newton_iterations', 'residual'],
    'pair': ['t', 'conjugation_residual', 'ymh', 'ymh_metric'],
    'approx': ['epsilon', 'value'],
    'newton': ['stage', 'step', 'residual', 'step_length', 'krylov_iterations'],
}


def _cell(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, rows: Iterable[Dict[str, Any]], kind: str) -> Path:
    """
    Write per-step rows with the fixed column order of ``kind``.

    An empty run still gets the header line.
    """
    path = Path(path)
    columns = COLUMNS[kind]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])
    return path


def write_dat(path: Path, rows: Iterable[Dict[str, Any]], kind: str) -> Path:
    """Whitespace separated columns with a commented header, for gnuplot."""
    path = Path(path)
    columns = COLUMNS[kind]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write('# ' + ' '.join(columns) + '\n')
        for row in rows:
            f.write(' '.join(_cell(row.get(c)) or 'nan' for c in columns) + '\n')
    return path


def write_json(path: Path, report: Dict[str, Any]) -> Path:
    """Final structured report."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(plain(report), f, indent=2)
    return path


def emit_report(out_dir: Path, name: str, summary: Dict[str, Any], rows: Optional[List[Dict[str, Any]]] = None,
                kind: Optional[str] = None, csv_enabled: bool = True, dat: bool = False) -> List[Path]:
    """
    Write the outputs of one run.

    Args:
        out_dir: Output directory
        name: File stem
        summary: Structured final report
        rows: Per-step records (None when the run has no steps)
        kind: Column layout of the rows
        csv_enabled: Write the per-step CSV
        dat: Also write gnuplot columns

    Returns:
        Paths written
    """
    out_dir = Path(out_dir)
    written = [write_json(out_dir / f"{name}.json", summary)]
    if kind is not None and csv_enabled:
        written.append(write_csv(out_dir / f"{name}.csv", rows or [], kind))
    if kind is not None and dat:
        written.append(write_dat(out_dir / f"{name}.dat", rows or [], kind))
    for path in written:
        logger.info("wrote %s", path)
    return written


__all__ = ['COLUMNS', 'write_csv', 'write_dat', 'write_json', 'emit_report']
