from .adaptation import (
    AlgoHyperParams,
    BNMHook,
    BranchCLossHook,
    BSPHook,
    ClassifierHook,
    CLossHook,
    DANNHook,
    DiscrepancyHook,
    DomainLossHook,
    L2NormHook,
    MCDHook,
    RepeatHook,
    discrepancy,
)
from .core import (
    BaseHook,
    ChainHook,
    DetachHook,
    FeaturesHook,
    LogitsHook,
    OptimizerHook,
    ResolutionEvent,
    check_contract,
    run_hook,
    trace_resolution,
)

__all__ = [
    "AlgoHyperParams", "BNMHook", "BSPHook", "BaseHook", "BranchCLossHook", "CLossHook", "ChainHook",
    "ClassifierHook", "DANNHook", "DetachHook", "DiscrepancyHook", "DomainLossHook", "FeaturesHook",
    "L2NormHook", "LogitsHook", "MCDHook", "OptimizerHook", "RepeatHook", "ResolutionEvent",
    "check_contract", "discrepancy", "run_hook", "trace_resolution",
]
