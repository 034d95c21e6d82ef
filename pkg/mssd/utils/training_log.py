import logging
import threading
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from mssd.utils.json import json_dumps, json_loads

logger = logging.getLogger(__name__)


class TrainingLog:
    """
    Per-epoch training records, kept in memory and appended to a
    newline-delimited JSON file when a path is given.
    """

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
        self._records: List[Dict[str, Any]] = []
        self._lock = threading.Lock()

    def log_epoch(
        self,
        epoch: int,
        train_mse: float,
        val_mse: float,
        wall_ms: float,
        variable: Optional[str] = None,
    ) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            "epoch": int(epoch),
            "train_mse": float(train_mse),
            "val_mse": float(val_mse),
            "wall_ms": float(wall_ms),
        }
        if variable is not None:
            record["variable"] = variable
        with self._lock:
            if self.path is not None:
                line = json_dumps(record)
                with open(self.path, "a") as f:
                    f.write(line + "\n")
            self._records.append(record)
        return record

    def get_records(self, variable: Optional[str] = None) -> List[Dict[str, Any]]:
        """Records in logging order, optionally for one variable."""
        with self._lock:
            records = list(self._records)
        if variable is not None:
            records = [r for r in records if r.get("variable") == variable]
        return records

    @staticmethod
    def read(path: Union[str, Path]) -> List[Dict[str, Any]]:
        with open(path, "r") as f:
            return [json_loads(line) for line in f if line.strip()]

    def clear(self) -> None:
        with self._lock:
            self._records.clear()
            if self.path is not None and self.path.exists():
                self.path.unlink()
        logger.debug("Training log cleared")

    def __len__(self) -> int:
        return len(self._records)
