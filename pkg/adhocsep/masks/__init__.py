from .base_provider import (
    FIRST_STEP,
    SECOND_STEP,
    BaseMaskProvider,
    MaskProviderConfig,
    StepTag,
    TfMask,
)
from .file_provider import FileMaskProvider, load_mask, save_mask
from .oracle_provider import OracleIRMProvider, export_oracle_masks, oracle_irm
from .unit_provider import UnitMaskProvider, unit_mask

__all__ = [
    "FIRST_STEP",
    "SECOND_STEP",
    "BaseMaskProvider",
    "MaskProviderConfig",
    "StepTag",
    "TfMask",
    "FileMaskProvider",
    "load_mask",
    "save_mask",
    "OracleIRMProvider",
    "export_oracle_masks",
    "oracle_irm",
    "UnitMaskProvider",
    "unit_mask",
]
