"""Static analysis of runtime bytecode.

Function bodies are located through the compiler's dispatcher idiom
(``PUSH4 sel ... EQ PUSHn dest JUMPI``) and treated as linear ranges
between consecutive dispatched entry points. No CFG is recovered.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

from ._kernels import instruction_starts
from .abi import AbiFunction
from .evm.opcodes import NAMES, push_width


class Instruction(NamedTuple):
    offset: int
    opcode: str
    immediate: bytes = b""
    byte: int = 0

    def to_bytes(self) -> bytes:
        return bytes([self.byte]) + self.immediate

    def __str__(self) -> str:
        if self.immediate:
            return f"{self.opcode} 0x{self.immediate.hex()}"
        return self.opcode


def disassemble(code: bytes) -> list[Instruction]:
    """Linear sweep. Unknown bytes and truncated PUSHes decode as INVALID."""
    code = bytes(code)
    out = []
    for off in instruction_starts(code):
        op = code[off]
        width = push_width(op)
        imm = code[off + 1:off + 1 + width]
        if len(imm) < width:
            out.append(Instruction(off, "INVALID", imm, op))
        else:
            out.append(Instruction(off, NAMES.get(op, "INVALID"), imm, op))
    return out


def assemble_instructions(instructions: Iterable[Instruction]) -> bytes:
    return b"".join(i.to_bytes() for i in instructions)


# -- dispatcher ---------------------------------------------------------------

_DISPATCH_WINDOW = 4


def find_dispatch_entries(instructions: list[Instruction], selectors: Iterable[bytes]) -> dict[bytes, tuple[int, int]]:
    """Map selector -> (index of its PUSH4 comparison, body entry offset)."""
    wanted = set(selectors)
    jumpdests = {i.offset for i in instructions if i.opcode == "JUMPDEST"}
    found: dict[bytes, tuple[int, int]] = {}
    for idx, ins in enumerate(instructions):
        if ins.opcode != "PUSH4" or ins.immediate not in wanted or ins.immediate in found:
            continue
        window = instructions[idx + 1:idx + 1 + _DISPATCH_WINDOW + 2]
        for j, nxt in enumerate(window):
            if nxt.opcode == "EQ":
                rest = window[j + 1:j + 3]
                if (
                    len(rest) == 2
                    and rest[0].opcode.startswith("PUSH")
                    and rest[0].immediate
                    and rest[1].opcode == "JUMPI"
                ):
                    dest = int.from_bytes(rest[0].immediate, "big")
                    if dest in jumpdests:
                        found[ins.immediate] = (idx, dest)
                break
            if j >= _DISPATCH_WINDOW - 1:
                break
    return found


def extract_function_bodies(instructions: list[Instruction], abi_selectors: Iterable[bytes]) -> dict[bytes, list[Instruction]]:
    """Selector -> instructions of its body; empty list when no dispatcher entry was found."""
    abi_selectors = list(abi_selectors)
    entries = find_dispatch_entries(instructions, abi_selectors)
    starts = sorted({dest for _, dest in entries.values()})
    offsets = [i.offset for i in instructions]

    def segment(dest: int) -> list[Instruction]:
        later = [s for s in starts if s > dest]
        end = later[0] if later else None
        lo = offsets.index(dest)
        hi = offsets.index(end) if end is not None else len(instructions)
        return instructions[lo:hi]

    return {sel: segment(entries[sel][1]) if sel in entries else [] for sel in abi_selectors}


def find_function_selectors(code: bytes, abi: Iterable[AbiFunction]) -> dict[AbiFunction, set[bytes]]:
    """Selectors pushed (PUSH4) inside each ABI function's body.

    Dispatcher comparisons are excluded, and functions whose set would be
    empty are left out of the result.
    """
    abi = list(abi)
    instructions = disassemble(code)
    selectors = [f.selector for f in abi]
    dispatch_idx = {idx for idx, _ in find_dispatch_entries(instructions, selectors).values()}
    dispatch_offsets = {instructions[i].offset for i in dispatch_idx}
    bodies = extract_function_bodies(instructions, selectors)

    usage: dict[AbiFunction, set[bytes]] = {}
    for fn in abi:
        found = {
            ins.immediate
            for ins in bodies[fn.selector]
            if ins.opcode == "PUSH4" and ins.offset not in dispatch_offsets
        }
        if found:
            usage[fn] = found
    return usage


def build_selector_index(corpus: Iterable[tuple[bytes, Iterable[AbiFunction]]]) -> dict[bytes, list[bytes]]:
    """Selector -> addresses of every contract whose ABI exposes it (deduplicated, in corpus order)."""
    index: dict[bytes, list[bytes]] = {}
    for address, functions in corpus:
        for fn in functions:
            bucket = index.setdefault(fn.selector, [])
            if address not in bucket:
                bucket.append(address)
    return index


@dataclass(frozen=True)
class TransferCapability:
    has_call: bool
    has_selfdestruct: bool
    has_delegatecall: bool


def scan_transfer_capability(code: bytes) -> TransferCapability:
    """Which ether-moving opcodes appear in the code itself (PUSH data is skipped)."""
    ops = {ins.opcode for ins in disassemble(code)}
    return TransferCapability(
        has_call=bool(ops & {"CALL", "CALLCODE"}),
        has_selfdestruct="SELFDESTRUCT" in ops,
        has_delegatecall="DELEGATECALL" in ops,
    )
