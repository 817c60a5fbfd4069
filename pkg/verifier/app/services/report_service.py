"""
Report and per-point table writers
"""
import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

from app.services.geometry_service import PointInvariants

logger = logging.getLogger(__name__)

REPORT_FILE = 'report.json'
TABLE_FILE = 'points.csv'


def _plain(value):
    """JSON-ready copy: numpy scalars and arrays unpacked, non-finite floats as null"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def render_report(report, include_timings=True):
    """Key-ordered JSON text of a RunReport"""
    return json.dumps(_plain(report.to_dict(include_timings)), sort_keys=True, indent=2) + '\n'


def write_report(report, out_dir):
    """Write report.json under out_dir and return its path"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / REPORT_FILE
    path.write_text(render_report(report), encoding='utf-8')
    logger.info(f"Report written: {path} (status {report.status})")
    return path


def _fmt(value):
    value = float(value)
    return '%.17g' % value if math.isfinite(value) else 'nan'


def write_point_table(grid, out_dir):
    """One row per grid point keyed by chart and grid indices, one column per invariant"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / TABLE_FILE
    inv = grid.pointwise.invariants
    fields = [name for name in PointInvariants.FIELDS if getattr(inv, name) is not None]
    n = grid.n

    header = (['chart', 'affine_chart'] + [f'i{k}' for k in range(n)] + [f'u{k}' for k in range(n)]
              + fields + ['weight'])
    columns = [np.asarray(getattr(inv, name)).reshape(-1) for name in fields]
    points = grid.points.reshape(-1, n)
    chart_ids = np.broadcast_to(grid.chart_ids, grid.shape).reshape(-1)
    weights = grid.weights.reshape(-1)

    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for flat, index in enumerate(np.ndindex(*grid.shape)):
            row = [grid.chart, int(chart_ids[flat])] + list(index)
            row += [_fmt(x) for x in points[flat]]
            row += [_fmt(col[flat]) for col in columns]
            row.append(_fmt(weights[flat]))
            writer.writerow(row)
    logger.info(f"Point table written: {path} ({grid.size} rows)")
    return path
