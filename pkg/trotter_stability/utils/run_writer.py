"""
RunWriter - output helper for campaign runs

Owns an output directory for the duration of one command. Files are written
with stable formatting so two runs with the same seed produce identical bytes,
and everything written so far is removed again if the command fails.

Design principle: "a run either leaves all of its files or none of them"
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, List

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """
    Convert results into plain JSON values.

    Objects with a to_dict() are expanded, numpy scalars and arrays become
    Python values, and non-finite floats become the strings "inf", "-inf"
    and "nan".
    """
    if hasattr(value, "to_dict") and not isinstance(value, pd.DataFrame):
        return to_jsonable(value.to_dict())
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, complex):
        return [to_jsonable(value.real), to_jsonable(value.imag)]
    if isinstance(value, Path):
        return str(value)
    return value


class RunWriter:
    """
    Collects the files of one run under out_dir.

    Use as a context manager; on an exception every file written through
    this writer is deleted, along with any directory it had to create.
    """

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.written: List[Path] = []
        self._created_dirs: List[Path] = []

    def __enter__(self) -> "RunWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is not None:
            self.discard()
        return False

    def path(self, name: str) -> Path:
        target = self.out_dir / name
        self._ensure_dir(target.parent)
        return target

    def _ensure_dir(self, directory: Path) -> None:
        missing = []
        d = directory
        while not d.exists():
            missing.append(d)
            d = d.parent
        for d in reversed(missing):
            d.mkdir()
            self._created_dirs.append(d)

    def write_json(self, name: str, payload: Any) -> Path:
        target = self.path(name)
        text = json.dumps(to_jsonable(payload), indent=2, allow_nan=False)
        target.write_text(text + "\n")
        self.written.append(target)
        logger.debug("Wrote %s", target)
        return target

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        target = self.path(name)
        frame.to_csv(target, index=False, lineterminator="\n")
        self.written.append(target)
        logger.debug("Wrote %s (%d rows)", target, len(frame))
        return target

    def discard(self) -> None:
        """Remove everything this writer produced."""
        for target in reversed(self.written):
            target.unlink(missing_ok=True)
        for d in reversed(self._created_dirs):
            if d.exists() and not any(d.iterdir()):
                d.rmdir()
        if self.written:
            logger.warning("Removed %d partial output file(s) from %s", len(self.written), self.out_dir)
        self.written.clear()
        self._created_dirs.clear()
