"""
CSV and JSON writers.

Every CSV opens with '#' comment lines carrying the tool version, schema
version, master seed and the resolved run config (sorted JSON). Floats are
written with repr so identical runs give identical bytes. No timestamps.
"""

import csv
import io
import json
import logging
import sys
from enum import Enum
from typing import Any, Iterable, Optional, Sequence

import config
from models import RunConfig

logger = logging.getLogger(__name__)

# Scheduling-only fields; left out so output bytes do not depend on them
_UNRECORDED = {"workers"}


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "dtype"):
        return format_value(value.item())
    return str(value)


def metadata_lines(run: RunConfig) -> list[str]:
    resolved = run.model_dump(mode="json", exclude=_UNRECORDED)
    return [
        f"# alpharisk {config.VERSION}",
        f"# schema {run.schema_version}",
        f"# seed {run.seed}",
        f"# config {json.dumps(resolved, sort_keys=True)}",
    ]


def render_csv(run: RunConfig, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    for line in metadata_lines(run):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_text(text: str, out: Optional[str]) -> None:
    """Write to `out`, or stdout when no path is given."""
    if out:
        with open(out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        logger.info(f"wrote {len(text)} bytes to {out}")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def write_csv(run: RunConfig, columns: Sequence[str], rows: Iterable[Sequence[Any]], out: Optional[str]) -> None:
    write_text(render_csv(run, columns, rows), out)


def write_json(payload: dict, out: Optional[str]) -> None:
    write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", out)
