"""Native attacker account.

The agent has no bytecode of its own. When the interpreter delivers a call to
it, the controller decides what to do and hands back a short synthetic
program that runs in the agent's context, so every reentrant call it makes
shows up as an ordinary ``CallRecord`` in the trace.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .asm import AsmLine, AsmProgram, assemble
from .evm.gas import SEND_STIPEND
from .evm.interpreter import DEFAULT_TX_GAS, VM
from .evm.state import AccountKind, BlockContext
from .evm.trace import CallRecord

DEFAULT_REENTRY_LIMIT = 2
BURN_ITERATIONS = 160  # ~19 gas per iteration under the default schedule


class AgentMode(enum.Enum):
    REENTRANT = "Reentrant"
    EXPENSIVE_FALLBACK = "ExpensiveFallback"
    PASSIVE = "Passive"


class AgentAction(enum.Enum):
    REENTER = "reenter"
    BURN = "burn"
    ACCEPT = "accept"


@dataclass
class AgentState:
    stored_target: bytes | None = None
    stored_calldata: bytes = b""
    reentry_depth: int = 0
    reentry_limit: int = DEFAULT_REENTRY_LIMIT
    mode: AgentMode = AgentMode.REENTRANT


def _reentry_program(target: bytes, calldata: bytes) -> bytes:
    lines = []
    for off in range(0, len(calldata), 32):
        chunk = calldata[off:off + 32].ljust(32, b"\x00")
        lines += [AsmLine("PUSH32", int.from_bytes(chunk, "big")), AsmLine("PUSH2", off), AsmLine("MSTORE")]
    lines += [
        AsmLine("PUSH1", 0),                       # retSize
        AsmLine("PUSH1", 0),                       # retOffset
        AsmLine("PUSH2", len(calldata)),           # argsSize
        AsmLine("PUSH1", 0),                       # argsOffset
        AsmLine("PUSH1", 0),                       # value
        AsmLine("PUSH20", int.from_bytes(target, "big")),
        AsmLine("GAS"),
        AsmLine("CALL"),
        AsmLine("POP"),
        AsmLine("STOP"),
    ]
    return assemble(AsmProgram(lines))


def _burn_program(iterations: int = BURN_ITERATIONS) -> bytes:
    return assemble(f"""
        PUSH2 {iterations}
        :loop
        PUSH1 1
        SWAP1
        SUB
        DUP1
        PUSH2 :loop
        JUMPI
        POP
        STOP
    """)


_BURN_CODE = _burn_program()


def agent_on_receive(state: AgentState, gas: int) -> AgentAction:
    """Decide how the agent reacts to an incoming call carrying ``gas``."""
    if state.mode is AgentMode.REENTRANT:
        if (
            state.stored_target is not None
            and state.reentry_depth < state.reentry_limit
            and gas > SEND_STIPEND
        ):
            state.reentry_depth += 1
            return AgentAction.REENTER
        return AgentAction.ACCEPT
    if state.mode is AgentMode.EXPENSIVE_FALLBACK:
        return AgentAction.BURN
    return AgentAction.ACCEPT


class Agent:
    """Controller registered in ``VM.natives`` for the agent's address."""

    def __init__(self, address: bytes, state: AgentState | None = None):
        self.address = address
        self.state = state or AgentState()

    def on_receive(self, record: CallRecord, gas: int) -> bytes:
        action = agent_on_receive(self.state, gas)
        if action is AgentAction.REENTER:
            return _reentry_program(self.state.stored_target, self.state.stored_calldata)
        if action is AgentAction.BURN:
            return _BURN_CODE
        return b""

    def install(self, vm: VM) -> None:
        st = vm.state
        if not st.exists(self.address):
            st.create_account(self.address, AccountKind.AGENT)
            st.commit()
        vm.natives[self.address] = self


def agent_initiate(
    vm: VM,
    agent: Agent,
    target: bytes,
    calldata: bytes,
    value: int = 0,
    gas: int = DEFAULT_TX_GAS,
    ctx: BlockContext | None = None,
) -> CallRecord:
    """Store the attack call, reset the reentry counter and send it from the agent."""
    agent.state.stored_target = target
    agent.state.stored_calldata = bytes(calldata)
    agent.state.reentry_depth = 0
    return vm.call(agent.address, target, calldata, value, gas, ctx)
