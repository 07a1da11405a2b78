"""In-memory instrumented EVM subset."""

from .errors import ConfigInvalid, DeployRevert, EvmError, InsufficientBalance, OutOfGas, UnknownAccount
from .gas import SEND_STIPEND, GasSchedule, compute_forwarded_gas
from .interpreter import VM, Frame, make_frame, step_interpreter
from .state import ZERO_ADDRESS, Account, AccountKind, BlockContext, WorldState, derive_address, to_address
from .trace import CallKind, CallRecord, Outcome

__all__ = [
    "VM", "Frame", "make_frame", "step_interpreter",
    "Account", "AccountKind", "BlockContext", "WorldState", "ZERO_ADDRESS", "derive_address", "to_address",
    "CallKind", "CallRecord", "Outcome",
    "GasSchedule", "SEND_STIPEND", "compute_forwarded_gas",
    "EvmError", "UnknownAccount", "InsufficientBalance", "DeployRevert", "OutOfGas", "ConfigInvalid",
]
