import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import structlog

from ..exceptions import IoError

logger = structlog.get_logger(__name__)


def atomic_write_text(path: Path, text: str) -> None:
    """
    Write a file by writing a sibling temp file and renaming it into place

    Args:
        path: Destination file
        text: Full file contents
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    except OSError as e:
        logger.error("write failed", path=str(path), error=str(e))
        raise IoError(f"Failed to write {path}: {e}")
    logger.debug("file written", path=str(path), size=len(text))


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format_cell(value) for value in row])
    return buffer.getvalue()


def render_json(payload: Mapping[str, Any]) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _format_cell(value: Any) -> Any:
    # repr of a float round-trips exactly, so replays stay byte-identical
    if isinstance(value, float):
        return repr(float(value))
    return value
