"""Phase predictors and the MSSD composite."""

from mssd.models.checkpoint import load_checkpoint, save_checkpoint
from mssd.models.linear import LinearPhasePredictor, linear_phase_forward
from mssd.models.mssd import MssdConfig, MssdModel, mssd_forward
from mssd.models.sdnet import (
    GlobalBlock,
    LocalBlock,
    SDNet,
    SDNetBranch,
    SDNetConfig,
    TCNStack,
    TemporalBlock,
    global_block,
    local_block,
    multi_head_split,
    sdnet_forward,
    tcn_stack,
)

__all__ = [
    "GlobalBlock",
    "LinearPhasePredictor",
    "LocalBlock",
    "MssdConfig",
    "MssdModel",
    "SDNet",
    "SDNetBranch",
    "SDNetConfig",
    "TCNStack",
    "TemporalBlock",
    "global_block",
    "linear_phase_forward",
    "load_checkpoint",
    "local_block",
    "mssd_forward",
    "multi_head_split",
    "save_checkpoint",
    "sdnet_forward",
    "tcn_stack",
]
