"""Opcode tables.

``NAMES`` covers the full historical instruction set so the disassembler can
name anything it meets in real bytecode; ``SUPPORTED`` is the subset the
interpreter executes.
"""

NAMES: dict[int, str] = {
    0x00: "STOP", 0x01: "ADD", 0x02: "MUL", 0x03: "SUB", 0x04: "DIV", 0x05: "SDIV",
    0x06: "MOD", 0x07: "SMOD", 0x08: "ADDMOD", 0x09: "MULMOD", 0x0A: "EXP",
    0x0B: "SIGNEXTEND",
    0x10: "LT", 0x11: "GT", 0x12: "SLT", 0x13: "SGT", 0x14: "EQ", 0x15: "ISZERO",
    0x16: "AND", 0x17: "OR", 0x18: "XOR", 0x19: "NOT", 0x1A: "BYTE", 0x1B: "SHL",
    0x1C: "SHR", 0x1D: "SAR",
    0x20: "SHA3",
    0x30: "ADDRESS", 0x31: "BALANCE", 0x32: "ORIGIN", 0x33: "CALLER", 0x34: "CALLVALUE",
    0x35: "CALLDATALOAD", 0x36: "CALLDATASIZE", 0x37: "CALLDATACOPY", 0x38: "CODESIZE",
    0x39: "CODECOPY", 0x3A: "GASPRICE", 0x3B: "EXTCODESIZE", 0x3C: "EXTCODECOPY",
    0x3D: "RETURNDATASIZE", 0x3E: "RETURNDATACOPY", 0x3F: "EXTCODEHASH",
    0x40: "BLOCKHASH", 0x41: "COINBASE", 0x42: "TIMESTAMP", 0x43: "NUMBER",
    0x44: "DIFFICULTY", 0x45: "GASLIMIT", 0x46: "CHAINID", 0x47: "SELFBALANCE",
    0x48: "BASEFEE",
    0x50: "POP", 0x51: "MLOAD", 0x52: "MSTORE", 0x53: "MSTORE8", 0x54: "SLOAD",
    0x55: "SSTORE", 0x56: "JUMP", 0x57: "JUMPI", 0x58: "PC", 0x59: "MSIZE", 0x5A: "GAS",
    0x5B: "JUMPDEST", 0x5F: "PUSH0",
    0xA0: "LOG0", 0xA1: "LOG1", 0xA2: "LOG2", 0xA3: "LOG3", 0xA4: "LOG4",
    0xF0: "CREATE", 0xF1: "CALL", 0xF2: "CALLCODE", 0xF3: "RETURN", 0xF4: "DELEGATECALL",
    0xF5: "CREATE2", 0xFA: "STATICCALL", 0xFD: "REVERT", 0xFE: "INVALID",
    0xFF: "SELFDESTRUCT",
}
for _n in range(1, 33):
    NAMES[0x5F + _n] = f"PUSH{_n}"
for _n in range(1, 17):
    NAMES[0x7F + _n] = f"DUP{_n}"
    NAMES[0x8F + _n] = f"SWAP{_n}"

OPCODES: dict[str, int] = {name: op for op, name in NAMES.items()}

SUPPORTED: frozenset[int] = frozenset(
    [
        0x00, 0x01, 0x02, 0x03, 0x04, 0x06, 0x0A,
        0x10, 0x11, 0x12, 0x13, 0x14, 0x15, 0x16, 0x17, 0x18, 0x19, 0x1A,
        0x20,
        0x30, 0x31, 0x33, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39,
        0x42, 0x43,
        0x50, 0x51, 0x52, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x5A, 0x5B,
        0xA0, 0xA1, 0xA2,
        0xF1, 0xF3, 0xF4, 0xFD, 0xFF,
    ]
    + list(range(0x60, 0xA0))
)

# Pushed to a CallRecord's opcode_trace when executed.
MONITORED: frozenset[str] = frozenset(
    [
        "CALL", "DELEGATECALL", "SELFDESTRUCT", "TIMESTAMP", "NUMBER", "SSTORE",
        "SLOAD", "SHA3", "BALANCE", "CALLER", "CALLVALUE", "LOG0", "LOG1", "LOG2",
    ]
)


def push_width(op: int) -> int:
    """Immediate byte count of ``op`` (0 for non-PUSH opcodes)."""
    return op - 0x5F if 0x60 <= op <= 0x7F else 0
