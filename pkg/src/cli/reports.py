"""Report writers: pretty JSON with a provenance header, RFC-4180 CSV."""

import csv
import json
import logging
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from __version__ import VERSION_STRING

logger = logging.getLogger(__name__)


def to_jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays, tuples and report objects into plain JSON values.

    Non-finite floats become null so the output stays strict JSON.
    """
    if hasattr(obj, 'to_dict'):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def render_body(manifest: Dict[str, Any], body: Dict[str, Any]) -> str:
    """The deterministic part of a report: manifest and results, keys sorted."""
    return json.dumps({'manifest': to_jsonable(manifest), 'body': to_jsonable(body)},
                      indent=2, sort_keys=True, ensure_ascii=False)


def write_json_report(path: Path, manifest: Dict[str, Any], body: Dict[str, Any],
                      generated_at: Optional[datetime] = None) -> Path:
    """
    Write a JSON report

    The header holds the only run-dependent fields (timestamp, version
    string); everything under ``manifest`` and ``body`` is reproduced
    byte-for-byte by re-running the manifest.

    Args:
        path: Destination file
        manifest: Manifest dictionary embedded for provenance
        body: Results

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stamp = (generated_at or datetime.now(timezone.utc)).isoformat()
    document = {
        'header': {'generated_at': stamp, 'generator': VERSION_STRING},
        'manifest': to_jsonable(manifest),
        'body': to_jsonable(body),
    }
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write('\n')
    logger.info(f"JSON report written to {path}")
    return path


def _cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return repr(value) if math.isfinite(value) else ''
    if isinstance(value, (np.integer,)):
        return int(value)
    return value


def write_csv_report(path: Path, rows: Iterable[Dict[str, Any]], columns: Sequence[str]) -> Path:
    """
    Write rows as UTF-8 CSV with CRLF line endings and minimal quoting

    Floats are written with repr so a re-run reproduces the file exactly;
    non-finite values become empty cells.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows: List[Dict[str, Any]] = list(rows)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=list(columns), extrasaction='ignore',
                                quoting=csv.QUOTE_MINIMAL, lineterminator='\r\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(v) for k, v in row.items()})
    logger.info(f"CSV report written to {path} ({len(rows)} rows)")
    return path
