"""A small textual assembler for fixture contracts.

Syntax, one instruction per line::

    # comment
    :loop                 # label; a JUMPDEST is emitted here unless the next
    JUMPDEST              # instruction already is one
    PUSH1 0x20
    PUSH 300              # width inferred (PUSH2)
    PUSH2 :loop           # label references are absolute byte offsets
    JUMP
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .evm.opcodes import OPCODES


class AsmError(ValueError):
    pass


class UnknownMnemonic(AsmError):
    pass


class UnresolvedLabel(AsmError):
    pass


class OperandTooWide(AsmError):
    pass


class DuplicateSelector(AsmError):
    pass


@dataclass(frozen=True)
class AsmLine:
    mnemonic: str | None = None
    operand: int | str | None = None  # int literal, or label name for references
    label: str | None = None
    lineno: int = 0

    def to_source(self) -> str:
        parts = []
        if self.label:
            parts.append(f":{self.label}")
        if self.mnemonic:
            parts.append(self.mnemonic)
            if isinstance(self.operand, str):
                parts.append(f":{self.operand}")
            elif self.operand is not None:
                parts.append(hex(self.operand))
        return " ".join(parts)


@dataclass
class AsmProgram:
    lines: list[AsmLine] = field(default_factory=list)

    def __add__(self, other: "AsmProgram") -> "AsmProgram":
        return AsmProgram(self.lines + other.lines)

    def to_source(self) -> str:
        return "\n".join(line.to_source() for line in self.lines) + "\n"


def _parse_operand(tok: str, lineno: int) -> int | str:
    if tok.startswith(":"):
        if len(tok) == 1:
            raise AsmError(f"line {lineno}: empty label reference")
        return tok[1:]
    try:
        return int(tok, 0)
    except ValueError:
        raise AsmError(f"line {lineno}: bad operand {tok!r}") from None


def parse(source: str) -> AsmProgram:
    lines: list[AsmLine] = []
    for lineno, raw in enumerate(source.splitlines(), 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        toks = text.split()
        label = None
        if toks[0].startswith(":"):
            label = toks.pop(0)[1:]
            if not label:
                raise AsmError(f"line {lineno}: empty label")
        if not toks:
            lines.append(AsmLine(label=label, lineno=lineno))
            continue
        mnemonic = toks[0].upper()
        if mnemonic != "PUSH" and mnemonic not in OPCODES:
            raise UnknownMnemonic(f"line {lineno}: {toks[0]}")
        is_push = mnemonic == "PUSH" or (mnemonic.startswith("PUSH") and mnemonic != "PUSH0")
        if is_push:
            if len(toks) != 2:
                raise AsmError(f"line {lineno}: {mnemonic} takes one operand")
            operand = _parse_operand(toks[1], lineno)
        else:
            if len(toks) != 1:
                raise AsmError(f"line {lineno}: {mnemonic} takes no operand")
            operand = None
        lines.append(AsmLine(mnemonic, operand, label, lineno))
    return AsmProgram(lines)


def _width(line: AsmLine) -> int:
    m = line.mnemonic
    if m == "PUSH":
        if isinstance(line.operand, str):
            return 2
        if line.operand < 0:
            raise OperandTooWide(f"line {line.lineno}: negative operand")
        return max(1, (line.operand.bit_length() + 7) // 8)
    if m.startswith("PUSH") and m != "PUSH0":
        return int(m[4:])
    return 0


def _layout(lines: list[AsmLine]) -> tuple[list[tuple[str, AsmLine]], dict[str, int]]:
    """Expand label sites into JUMPDESTs and compute label offsets."""
    items: list[tuple[str, AsmLine]] = []
    labels: dict[str, int] = {}
    offset = 0
    pending: list[str] = []
    for i, line in enumerate(lines):
        if line.label:
            if line.label in labels or line.label in pending:
                raise AsmError(f"line {line.lineno}: label {line.label!r} defined twice")
            pending.append(line.label)
        if line.mnemonic is None:
            continue
        if pending and line.mnemonic != "JUMPDEST":
            items.append(("JUMPDEST", AsmLine("JUMPDEST", lineno=line.lineno)))
            for name in pending:
                labels[name] = offset
            offset += 1
            pending = []
        for name in pending:
            labels[name] = offset
        pending = []
        items.append((line.mnemonic, line))
        offset += 1 + _width(line)
    if pending:
        items.append(("JUMPDEST", AsmLine("JUMPDEST")))
        for name in pending:
            labels[name] = offset
    return items, labels


def assemble(source: "str | AsmProgram") -> bytes:
    """Assemble source text (or a parsed program) into bytecode."""
    program = parse(source) if isinstance(source, str) else source
    items, labels = _layout(program.lines)
    out = bytearray()
    for mnemonic, line in items:
        width = _width(line)
        if mnemonic == "PUSH":
            mnemonic = f"PUSH{width}"
        out.append(OPCODES[mnemonic])
        if width:
            value = line.operand
            if isinstance(value, str):
                if value not in labels:
                    raise UnresolvedLabel(f"line {line.lineno}: {value}")
                value = labels[value]
            if value < 0 or value >= 1 << (8 * width):
                raise OperandTooWide(f"line {line.lineno}: {value:#x} does not fit {mnemonic}")
            out += value.to_bytes(width, "big")
    return bytes(out)


SELECTOR_SHIFT = 1 << 224


def build_dispatcher(functions: list[tuple[bytes, str]], fallback_label: str | None = None) -> AsmProgram:
    """Selector dispatch prologue: one PUSH4/EQ/JUMPI compare per function, then the fallback tail.

    Each body is entered with the call's selector still on the stack.
    Without ``fallback_label`` unmatched calls revert.
    """
    seen = set()
    lines = [
        AsmLine("PUSH1", 0),
        AsmLine("CALLDATALOAD"),
        AsmLine("PUSH29", SELECTOR_SHIFT),
        AsmLine("SWAP1"),
        AsmLine("DIV"),
    ]
    for selector, label in functions:
        if selector in seen:
            raise DuplicateSelector(selector.hex())
        seen.add(selector)
        lines += [
            AsmLine("DUP1"),
            AsmLine("PUSH4", int.from_bytes(selector, "big")),
            AsmLine("EQ"),
            AsmLine("PUSH2", label),
            AsmLine("JUMPI"),
        ]
    lines.append(AsmLine("POP"))
    if fallback_label:
        lines += [AsmLine("PUSH2", fallback_label), AsmLine("JUMP")]
    else:
        lines += [AsmLine("PUSH1", 0), AsmLine("DUP1"), AsmLine("REVERT")]
    return AsmProgram(lines)


_LOADER_SIZE = 15


def creation_code(runtime: bytes, constructor: bytes = b"") -> bytes:
    """Init code: run ``constructor`` (which must fall through), then return ``runtime``."""
    start = len(constructor) + _LOADER_SIZE
    n = len(runtime)
    if n >= 1 << 16 or start >= 1 << 16:
        raise OperandTooWide("runtime too large for the PUSH2 loader")
    loader = (
        bytes([0x61]) + n.to_bytes(2, "big")        # PUSH2 size
        + bytes([0x61]) + start.to_bytes(2, "big")  # PUSH2 offset
        + bytes([0x60, 0x00, 0x39])                 # PUSH1 0, CODECOPY
        + bytes([0x61]) + n.to_bytes(2, "big")      # PUSH2 size
        + bytes([0x60, 0x00, 0xF3])                 # PUSH1 0, RETURN
    )
    assert len(loader) == _LOADER_SIZE
    return bytes(constructor) + loader + bytes(runtime)
