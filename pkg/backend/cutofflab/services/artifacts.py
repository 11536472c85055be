"""
Result files: CSV tables behind a one-line JSON header, and JSON summaries
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Tuple

import numpy as np
import pandas as pd

from cutofflab import __version__
from cutofflab.core.errors import UsageError
from cutofflab.schemas.run_config import RunConfig

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
HEADER_PREFIX = "# "


def to_plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings"""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def metadata(config: RunConfig, **extra: Any) -> Dict[str, Any]:
    meta = {"tool": "cutofflab", "version": __version__, "config": config.model_dump(mode="json")}
    meta.update(extra)
    return to_plain(meta)


def write_table(path: Path, frame: pd.DataFrame, meta: Dict[str, Any]) -> Path:
    """Write frame as CSV with 17 significant digits after a '# {json}' line"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(HEADER_PREFIX + json.dumps(to_plain(meta), sort_keys=True) + "\n")
            frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except Exception as e:
        logger.error(f"Error writing {path}: {e}")
        raise
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_plain(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path


def read_table(path: Path) -> Tuple[Dict[str, Any], pd.DataFrame]:
    """Inverse of write_table: (header metadata, table)"""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"input file {path} does not exist")
    with open(path, encoding="utf-8") as f:
        first = f.readline()
        if not first.startswith(HEADER_PREFIX.strip()):
            raise UsageError(f"{path} has no metadata header")
        meta = json.loads(first.lstrip("#").strip())
        frame = pd.read_csv(f, float_precision="round_trip")
    return meta, frame
