"""
Checkpoint persistence.

A checkpoint is one JSON document holding a version tag, the model
configuration, the normalization statistics and every parameter as
``(name, shape, row-major values)``. Floats are written at round-trip
precision, so loading reproduces every parameter bit for bit.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
from pydantic import ValidationError

from mssd.core.errors import CheckpointError, ContractViolation
from mssd.models.mssd import MssdConfig, MssdModel
from mssd.training.normalize import NormStats
from mssd.utils.json import json_dumps, json_loads

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = "mssd-checkpoint/1"


def checkpoint_payload(model: MssdModel) -> Dict[str, Any]:
    return {
        "version": CHECKPOINT_VERSION,
        "config": model.config.model_dump(),
        "norm_stats": model.norm_stats.to_dict() if model.norm_stats is not None else None,
        "parameters": [
            {"name": name, "shape": list(tensor.shape), "values": tensor.flat.tolist()}
            for name, tensor in model.named_parameters()
        ],
    }


def save_checkpoint(model: MssdModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json_dumps(checkpoint_payload(model)))
    logger.info(f"Saved checkpoint ({model.num_parameters()} parameters) to {path}")
    return path


def model_from_payload(payload: Dict[str, Any]) -> MssdModel:
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version: {payload.get('version')!r}")
    try:
        config = MssdConfig.model_validate(payload["config"])
        stats = payload.get("norm_stats")
        model = MssdModel(config, NormStats.from_dict(stats) if stats else None)
        state = {
            entry["name"]: np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
            for entry in payload["parameters"]
        }
        model.load_state_dict(state)
    except (KeyError, TypeError, ValueError, ValidationError, ContractViolation) as e:
        raise CheckpointError(f"Malformed checkpoint: {e}") from e
    return model


def load_checkpoint(path: Union[str, Path]) -> MssdModel:
    path = Path(path)
    try:
        payload = json_loads(path.read_text())
    except (OSError, ValueError) as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    model = model_from_payload(payload)
    logger.info(f"Loaded checkpoint from {path}")
    return model
