"""
Error types for the MSSD toolkit.

Every error carries a stable ``code`` and a human readable ``message`` so the
CLI can print a one-line diagnostic and tests can assert on the failure kind.
"""

from typing import Any, Dict, Optional

from pydantic import BaseModel, Field


class ErrorDetail(BaseModel):
    """Serializable view of an error."""
    code: str = Field(..., description="Error code")
    message: str = Field(..., description="Error message")
    details: Optional[Dict[str, Any]] = Field(None, description="Additional error details")


class MssdError(Exception):
    """Base class for all toolkit errors."""

    code = "MSSD_000"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_detail(self) -> ErrorDetail:
        return ErrorDetail(code=self.code, message=self.message, details=self.details or None)

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class DimensionError(MssdError, ValueError):
    """Shape or channel mismatch between operands."""
    code = "NUM_001"


class EmptyOutputError(MssdError, ValueError):
    """A convolution would produce fewer than one output position."""
    code = "NUM_002"


class ContractViolation(MssdError):
    """A caller broke an operation precondition."""
    code = "NUM_003"


class ConfigurationError(MssdError, ValueError):
    """Invalid configuration or data too short for the requested protocol."""
    code = "CFG_001"


class IngestionError(MssdError):
    """A dataset file could not be turned into a SeriesFrame."""
    code = "DATA_001"

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        details: Dict[str, Any] = {}
        if row is not None:
            details["row"] = row
        if column is not None:
            details["column"] = column
        super().__init__(message, details)
        self.row = row
        self.column = column


class TrainingDivergedError(MssdError):
    """The training loss became NaN or infinite."""
    code = "TRN_001"

    def __init__(self, message: str, epoch: int, batch_index: int):
        super().__init__(message, {"epoch": epoch, "batch_index": batch_index})
        self.epoch = epoch
        self.batch_index = batch_index


class CheckpointError(MssdError):
    """A checkpoint file is unreadable or has an unknown format."""
    code = "CKP_001"
