"""Flat gas schedule and call-gas forwarding."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .errors import ConfigInvalid, OutOfGas

SEND_STIPEND = 2300


@dataclass(frozen=True)
class GasSchedule:
    default: int = 3
    jumpdest: int = 1
    halt: int = 0  # STOP, RETURN, REVERT
    sload: int = 200
    sstore: int = 5000
    sha3: int = 30
    sha3_word: int = 6
    call: int = 700
    call_value: int = 9000
    selfdestruct: int = 5000
    overrides: dict = field(default_factory=dict)  # mnemonic -> cost

    @classmethod
    def from_mapping(cls, mapping: dict) -> "GasSchedule":
        """Build from config keys; known field names set fields, mnemonics go to overrides."""
        known = {f.name for f in fields(cls)} - {"overrides"}
        kwargs, overrides = {}, {}
        for key, cost in mapping.items():
            if not isinstance(cost, int) or isinstance(cost, bool) or cost < 0:
                raise ConfigInvalid(f"gas cost for {key!r} must be a non-negative integer")
            if key.lower() in known:
                kwargs[key.lower()] = cost
            else:
                overrides[key.upper()] = cost
        return replace(cls(), **kwargs, overrides=overrides)

    def table(self) -> list[int]:
        """Static per-opcode cost, indexed by opcode byte."""
        from .opcodes import NAMES

        costs = [self.default] * 256
        costs[0x5B] = self.jumpdest
        for op in (0x00, 0xF3, 0xFD):
            costs[op] = self.halt
        costs[0x54] = self.sload
        costs[0x55] = self.sstore
        costs[0x20] = self.sha3
        costs[0xFF] = self.selfdestruct
        # CALL-family cost is charged by the handler through compute_forwarded_gas
        costs[0xF1] = 0
        costs[0xF4] = 0
        for name, cost in self.overrides.items():
            op = next((o for o, n in NAMES.items() if n == name), None)
            if op is None:
                raise ConfigInvalid(f"unknown opcode in gas overrides: {name}")
            costs[op] = cost
        return costs


def call_base_cost(schedule: GasSchedule, value: int) -> int:
    return schedule.call + (schedule.call_value if value > 0 else 0)


def compute_forwarded_gas(
    requested: int, available: int, value: int, schedule: GasSchedule | None = None
) -> int:
    """Gas handed to a callee frame.

    The caller can forward at most what remains after the base cost; a
    value-bearing call adds the 2300 stipend on top, so ``requested == 0``
    with value yields exactly the send stipend.
    """
    schedule = schedule or GasSchedule()
    base = call_base_cost(schedule, value)
    if available < base:
        raise OutOfGas(f"call needs {base} gas, {available} available")
    forwarded = min(requested, available - base)
    if value > 0:
        forwarded += SEND_STIPEND
    return forwarded
