"""
Output Format Definitions

Versioned JSON documents and CSV tables written by every stage.
JSON documents carry a schema/version header; CSV files start with a
`# <kind> v<version>` line followed by a column header row.
"""

import csv
import io
import json
import math
from enum import IntEnum
from typing import Any, Dict, List, Sequence, Tuple


# =============================================================================
# Exit Codes
# =============================================================================

class ExitCode(IntEnum):
    OK = 0              # Run completed
    INPUT_ERROR = 1     # Malformed map, config or corpus
    INCONCLUSIVE = 2    # Every report came back inconclusive
    MISMATCH = 3        # Corpus verdicts differ from their sidecars


# =============================================================================
# Header Format
# =============================================================================

SCHEMA_VERSION = 1

# Document kinds
KIND_SCAN = "radial_scan"
KIND_WITNESS = "witness"
KIND_REPORT = "condition_report"
KIND_VERDICT = "verdict"
KIND_LEVEL_CURVES = "level_curves"
KIND_BIFURCATION = "bifurcation_scan"
KIND_CORPUS = "corpus_summary"


def format_float(value: float) -> str:
    """Exact, locale-free float text (repr round-trips binary64)."""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats to plain JSON."""
    if hasattr(value, "tolist"):
        value = value.tolist()
    if isinstance(value, float):
        if math.isfinite(value):
            return value
        return format_float(value)
    if isinstance(value, complex):
        return [_jsonable(value.real), _jsonable(value.imag)]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def pack_json(kind: str, payload: Dict[str, Any]) -> str:
    """Serialize a document with its schema header."""
    document = {'schema': kind, 'version': SCHEMA_VERSION}
    document.update(_jsonable(payload))
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


# =============================================================================
# CSV Tables
# =============================================================================

def csv_header_line(kind: str) -> str:
    return f"# {kind} v{SCHEMA_VERSION}"


def pack_csv(kind: str, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """Render a versioned CSV table; floats are written exactly."""
    buffer = io.StringIO()
    buffer.write(csv_header_line(kind) + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return buffer.getvalue()


def unpack_csv(text: str, kind: str) -> Tuple[List[str], List[List[str]]]:
    """Parse a versioned CSV table into (columns, rows of strings)."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != csv_header_line(kind):
        raise ValueError(f"Missing '{csv_header_line(kind)}' header line")
    reader = csv.reader(lines[1:])
    rows = list(reader)
    if not rows:
        raise ValueError(f"{kind} table has no column header")
    return rows[0], rows[1:]


def write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


def read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()
