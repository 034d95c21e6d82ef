from datetime import datetime
from pathlib import Path
from typing import Any
import json

import numpy as np


class ArrayEncoder(json.JSONEncoder):
    """JSON encoder for numpy values, paths and datetimes.

    Floats are written with ``repr`` precision, so float64 values round-trip
    bit-exactly.
    """

    def default(self, obj: Any) -> Any:
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, datetime):
            return obj.isoformat()
        if isinstance(obj, Path):
            return str(obj)
        return super().default(obj)


def json_dumps(obj: Any, **kwargs: Any) -> str:
    """Serialize object to JSON string with numpy support."""
    return json.dumps(obj, cls=ArrayEncoder, allow_nan=False, **kwargs)


def json_loads(s: str) -> Any:
    """Deserialize JSON string to object."""
    return json.loads(s)
