"""Instrumented call records."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator

from .gas import SEND_STIPEND


class CallKind(enum.Enum):
    CALL = "Call"
    DELEGATECALL = "DelegateCall"
    SEND = "Send"
    CREATE = "Create"


class Outcome(enum.Enum):
    SUCCESS = "Success"
    REVERT = "Revert"
    OUT_OF_GAS = "OutOfGas"
    INVALID_OP = "InvalidOp"
    BALANCE_TOO_LOW = "BalanceTooLow"


@dataclass
class CallRecord:
    caller: bytes
    callee: bytes
    kind: CallKind
    input: bytes
    value: int
    gas_limit: int
    gas_used: int = 0
    outcome: Outcome = Outcome.SUCCESS
    internal_calls: list["CallRecord"] = field(default_factory=list)
    opcode_trace: list[str] = field(default_factory=list)
    depth: int = 0

    @property
    def selector(self) -> bytes | None:
        return self.input[:4] if len(self.input) >= 4 else None

    @property
    def failed(self) -> bool:
        return self.outcome is not Outcome.SUCCESS

    @property
    def is_send(self) -> bool:
        return self.kind is CallKind.SEND

    def walk(self, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], "CallRecord"]]:
        """Pre-order traversal yielding (child-index path, record); iterative, so deep chains are fine."""
        stack = [(path, self)]
        while stack:
            p, rec = stack.pop()
            yield p, rec
            for i in range(len(rec.internal_calls) - 1, -1, -1):
                stack.append((p + (i,), rec.internal_calls[i]))

    def to_dict(self) -> dict:
        out: dict = {}
        stack = [(self, out)]
        while stack:
            rec, d = stack.pop()
            d.update({
                "caller": "0x" + rec.caller.hex(),
                "callee": "0x" + rec.callee.hex(),
                "kind": rec.kind.value,
                "input": "0x" + rec.input.hex(),
                "value": rec.value,
                "gas_limit": rec.gas_limit,
                "gas_used": rec.gas_used,
                "outcome": rec.outcome.value,
                "depth": rec.depth,
                "opcode_trace": list(rec.opcode_trace),
                "internal_calls": [],
            })
            for child in rec.internal_calls:
                cd: dict = {}
                d["internal_calls"].append(cd)
                stack.append((child, cd))
        return out


def classify_call(value: int, data: bytes, gas_limit: int) -> CallKind:
    """A value-bearing CALL with no input that forwards only the stipend is a send."""
    if value > 0 and not data and gas_limit == SEND_STIPEND:
        return CallKind.SEND
    return CallKind.CALL
