"""
Report plumbing: deterministic JSON, CSV for orbits and curves, atomic writes.

Floats are written with 17 significant digits so identical runs produce
byte-identical files.
"""

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import fields, is_dataclass
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from .errors import InvalidInputError


class Report:
    """Mixin for frozen report dataclasses"""

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: to_plain(getattr(self, f.name)) for f in fields(self)}


def to_plain(value: Any) -> Any:
    """Convert numpy containers and nested reports into JSON-ready Python values"""
    if isinstance(value, Report):
        return value.to_dict()
    if is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_plain(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    return value


def format_float(value: float) -> str:
    if math.isnan(value):
        return 'NaN'
    if math.isinf(value):
        return 'Infinity' if value > 0 else '-Infinity'
    text = f"{value:.17g}"
    if 'e' not in text and '.' not in text and 'n' not in text:
        text += '.0'
    return text


def _encode(value: Any, indent: int, level: int) -> str:
    pad = ' ' * (indent * (level + 1))
    end_pad = ' ' * (indent * level)
    if value is None:
        return 'null'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        if not value:
            return '{}'
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}"
                 for k, v in sorted(value.items(), key=lambda item: str(item[0]))]
        return '{\n' + ',\n'.join(items) + '\n' + end_pad + '}'
    if isinstance(value, (list, tuple)):
        if not value:
            return '[]'
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            return '[' + ', '.join(_encode(v, indent, level + 1) for v in value) + ']'
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in value]
        return '[\n' + ',\n'.join(items) + '\n' + end_pad + ']'
    raise TypeError(f"cannot encode {type(value).__name__}")


def dumps_report(payload: Any, indent: int = 2) -> str:
    """Serialize a report deterministically (17 significant digits, sorted keys)"""
    return _encode(to_plain(payload), indent, 0) + '\n'


def write_atomic(path: str, text: str):
    """Write text through a temp file in the target directory, then rename"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.osb_', suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        os.replace(tmp_path, path)
    except Exception:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow(['' if v is None else (format_float(float(v)) if isinstance(v, (float, np.floating)) else v)
                         for v in row])
    return buffer.getvalue()


def curve_to_csv(vertices: np.ndarray) -> str:
    """Vertex list of a closed planar curve; the closing vertex is not repeated"""
    vertices = np.asarray(vertices, dtype=float)
    return rows_to_csv(['x', 'y'], ((float(p[0]), float(p[1])) for p in vertices))


def read_curve_csv(text: str) -> np.ndarray:
    """Parse a curve CSV; a header row is optional"""
    reader = csv.reader(io.StringIO(text))
    points: List[List[float]] = []
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < 2:
            raise InvalidInputError(f"curve line {lineno}: expected two columns, got {len(row)}")
        try:
            points.append([float(row[0]), float(row[1])])
        except ValueError:
            if lineno == 1:
                continue
            raise InvalidInputError(f"curve line {lineno}: non-numeric vertex {row[:2]}")
    if len(points) < 3:
        raise InvalidInputError(f"curve needs at least 3 vertices, got {len(points)}")
    arr = np.array(points, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("curve vertices must be finite")
    return arr
