"""Byte-accurate simulator for padding-free FP8 grouped GEMM data movement."""

from .descriptors import (
    DescriptorPool,
    GroupStorePlan,
    TwoPhasePlan,
    build_pool,
    format_plan,
    plan_group_stores,
    plan_two_phase,
)
from .engine import (
    GroupedOperands,
    ProblemConfig,
    bf16_from_f32,
    f32_from_bf16,
    run_adaptive,
    run_padded_baseline,
    verify_bitwise,
)
from .errors import (
    AlignmentError,
    BoundsError,
    ConfigError,
    InvalidInput,
    NoAlignedSolution,
    OutOfMemory,
    ResOutOfRange,
    SimError,
)
from .fp8 import E4M3_MAX, Fp8Tensor, decode, encode, quantize_blocks, quantize_row_tiles
from .memory import TmaDescriptor, TmaEngine, TransferOp
from .prefetch import PrefetchWindow, plan_prefetch
from .workload import TrafficReport, account, generate_group_sizes

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "BoundsError",
    "ConfigError",
    "DescriptorPool",
    "E4M3_MAX",
    "Fp8Tensor",
    "GroupStorePlan",
    "GroupedOperands",
    "InvalidInput",
    "NoAlignedSolution",
    "OutOfMemory",
    "PrefetchWindow",
    "ProblemConfig",
    "ResOutOfRange",
    "SimError",
    "TmaDescriptor",
    "TmaEngine",
    "TrafficReport",
    "TransferOp",
    "TwoPhasePlan",
    "account",
    "bf16_from_f32",
    "build_pool",
    "decode",
    "encode",
    "f32_from_bf16",
    "format_plan",
    "generate_group_sizes",
    "plan_group_stores",
    "plan_prefetch",
    "plan_two_phase",
    "quantize_blocks",
    "quantize_row_tiles",
    "run_adaptive",
    "run_padded_baseline",
    "verify_bitwise",
]
