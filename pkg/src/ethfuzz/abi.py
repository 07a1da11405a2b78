"""Contract ABI parsing, selectors and calldata encoding.

Values use plain Python types: ``int`` for uint/int, ``bool``, 20-byte
``bytes`` for address, ``bytes`` for bytes<M>/bytes, ``str`` for string and
``list`` for arrays.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from ._kernels import keccak256


class AbiError(ValueError):
    pass


class MalformedJson(AbiError):
    pass


class UnsupportedType(AbiError):
    pass


class ArityMismatch(AbiError):
    pass


class ValueOutOfDomain(AbiError):
    pass


@dataclass(frozen=True)
class AbiType:
    """One ABI type.

    ``kind`` is one of uint, int, address, bool, fixed_bytes, bytes, string,
    fixed_array, array. ``size`` is the bit width for ints, the byte width
    for fixed_bytes and the length for fixed_array.
    """

    kind: str
    size: int = 0
    elem: "AbiType | None" = None

    @property
    def canonical(self) -> str:
        if self.kind in ("uint", "int"):
            return f"{self.kind}{self.size}"
        if self.kind == "fixed_bytes":
            return f"bytes{self.size}"
        if self.kind == "fixed_array":
            return f"{self.elem.canonical}[{self.size}]"
        if self.kind == "array":
            return f"{self.elem.canonical}[]"
        return self.kind

    @property
    def is_dynamic(self) -> bool:
        if self.kind in ("bytes", "string", "array"):
            return True
        if self.kind == "fixed_array":
            return self.elem.is_dynamic
        return False

    @property
    def head_size(self) -> int:
        """Bytes this type occupies in the head of an enclosing tuple."""
        if self.kind == "fixed_array" and not self.is_dynamic:
            return self.size * self.elem.head_size
        return 32

    def __str__(self) -> str:
        return self.canonical


_ELEMENTARY = re.compile(r"^(uint|int)(\d*)$|^bytes(\d+)$|^(address|bool|bytes|string|byte)$")
_ARRAY = re.compile(r"^(.*)\[(\d*)\]$")


def parse_type(text: str) -> AbiType:
    """Parse a Solidity type name, canonicalizing ``uint``/``int``/``byte``."""
    text = text.strip()
    m = _ARRAY.match(text)
    if m:
        elem = parse_type(m.group(1))
        if elem.kind in ("array", "fixed_array"):
            raise UnsupportedType(f"nested arrays are not supported: {text}")
        if m.group(2) == "":
            return AbiType("array", elem=elem)
        n = int(m.group(2))
        if n < 1:
            raise UnsupportedType(f"zero-length array: {text}")
        return AbiType("fixed_array", n, elem)
    m = _ELEMENTARY.match(text)
    if not m:
        raise UnsupportedType(text)
    if m.group(1):
        bits = int(m.group(2)) if m.group(2) else 256
        if bits % 8 or not 8 <= bits <= 256:
            raise UnsupportedType(text)
        return AbiType(m.group(1), bits)
    if m.group(3):
        width = int(m.group(3))
        if not 1 <= width <= 32:
            raise UnsupportedType(text)
        return AbiType("fixed_bytes", width)
    name = m.group(4)
    if name == "byte":
        return AbiType("fixed_bytes", 1)
    return AbiType(name)


def compute_selector(signature: str) -> bytes:
    return keccak256(signature.encode())[:4]


@dataclass(frozen=True)
class AbiFunction:
    name: str
    inputs: tuple[AbiType, ...] = ()
    payable: bool = False
    constant: bool = False

    @property
    def canonical_signature(self) -> str:
        return f"{self.name}({','.join(t.canonical for t in self.inputs)})"

    @property
    def selector(self) -> bytes:
        return compute_selector(self.canonical_signature)

    @property
    def has_args(self) -> bool:
        return bool(self.inputs)

    def __str__(self) -> str:
        return self.canonical_signature


@dataclass(frozen=True)
class ContractAbi:
    functions: tuple[AbiFunction, ...] = ()
    has_fallback: bool = False
    fallback_payable: bool = False
    constructor_inputs: tuple[AbiType, ...] = ()

    def by_selector(self) -> dict[bytes, AbiFunction]:
        return {f.selector: f for f in self.functions}


def _payable(entry: dict) -> bool:
    return bool(entry.get("payable")) or entry.get("stateMutability") == "payable"


def parse_abi(json_text: str) -> ContractAbi:
    """Parse ABI JSON; only functions, the fallback flag and constructor inputs are kept."""
    try:
        entries = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise MalformedJson(str(exc)) from None
    if not isinstance(entries, list):
        raise MalformedJson("ABI must be a JSON array")

    functions: list[AbiFunction] = []
    has_fallback = fallback_payable = False
    ctor: tuple[AbiType, ...] = ()
    for entry in entries:
        if not isinstance(entry, dict):
            raise MalformedJson("ABI entries must be objects")
        kind = entry.get("type", "function")
        if kind in ("fallback", "receive"):
            has_fallback = True
            fallback_payable = fallback_payable or _payable(entry)
            continue
        if kind not in ("function", "constructor"):
            continue
        try:
            inputs = tuple(parse_type(arg["type"]) for arg in entry.get("inputs", []))
        except (KeyError, TypeError):
            raise MalformedJson(f"bad inputs in {entry!r}") from None
        if kind == "constructor":
            ctor = inputs
            continue
        if "name" not in entry:
            raise MalformedJson("function entry without a name")
        constant = bool(entry.get("constant")) or entry.get("stateMutability") in ("view", "pure")
        functions.append(AbiFunction(entry["name"], inputs, _payable(entry), constant))
    return ContractAbi(tuple(functions), has_fallback, fallback_payable, ctor)


# -- encoding ----------------------------------------------------------------


def check_value(t: AbiType, v) -> None:
    """Raise ValueOutOfDomain unless ``v`` is a valid value of ``t``."""
    k = t.kind
    if k == "uint":
        if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v < 1 << t.size:
            raise ValueOutOfDomain(f"{v!r} is not a {t}")
    elif k == "int":
        lim = 1 << (t.size - 1)
        if isinstance(v, bool) or not isinstance(v, int) or not -lim <= v < lim:
            raise ValueOutOfDomain(f"{v!r} is not a {t}")
    elif k == "bool":
        if not isinstance(v, bool):
            raise ValueOutOfDomain(f"{v!r} is not a bool")
    elif k == "address":
        if not isinstance(v, (bytes, bytearray)) or len(v) != 20:
            raise ValueOutOfDomain(f"{v!r} is not a 20-byte address")
    elif k == "fixed_bytes":
        if not isinstance(v, (bytes, bytearray)) or len(v) != t.size:
            raise ValueOutOfDomain(f"{v!r} is not {t}")
    elif k == "bytes":
        if not isinstance(v, (bytes, bytearray)):
            raise ValueOutOfDomain(f"{v!r} is not bytes")
    elif k == "string":
        if not isinstance(v, str):
            raise ValueOutOfDomain(f"{v!r} is not a string")
    elif k in ("array", "fixed_array"):
        if not isinstance(v, (list, tuple)):
            raise ValueOutOfDomain(f"{v!r} is not a list for {t}")
        if k == "fixed_array" and len(v) != t.size:
            raise ValueOutOfDomain(f"{t} needs {t.size} elements, got {len(v)}")
        for item in v:
            check_value(t.elem, item)


def _pad_right(data: bytes) -> bytes:
    return bytes(data) + b"\x00" * (-len(data) % 32)


def _encode_static(t: AbiType, v) -> bytes:
    k = t.kind
    if k == "uint":
        return v.to_bytes(32, "big")
    if k == "int":
        return (v % (1 << 256)).to_bytes(32, "big")
    if k == "bool":
        return (1 if v else 0).to_bytes(32, "big")
    if k == "address":
        return bytes(12) + bytes(v)
    if k == "fixed_bytes":
        return _pad_right(v)
    if k == "fixed_array":
        return b"".join(_encode_static(t.elem, item) for item in v)
    raise AssertionError(k)


def _encode_one(t: AbiType, v) -> bytes:
    if not t.is_dynamic:
        return _encode_static(t, v)
    if t.kind in ("bytes", "string"):
        raw = v.encode() if t.kind == "string" else bytes(v)
        return len(raw).to_bytes(32, "big") + _pad_right(raw)
    if t.kind == "array":
        return len(v).to_bytes(32, "big") + _encode_tuple([t.elem] * len(v), v)
    return _encode_tuple([t.elem] * t.size, v)  # fixed array of dynamic elements


def _encode_tuple(types, values) -> bytes:
    head_len = sum(t.head_size for t in types)
    heads, tails = [], []
    tail_len = 0
    for t, v in zip(types, values):
        if t.is_dynamic:
            heads.append((head_len + tail_len).to_bytes(32, "big"))
            enc = _encode_one(t, v)
            tails.append(enc)
            tail_len += len(enc)
        else:
            heads.append(_encode_static(t, v))
    return b"".join(heads) + b"".join(tails)


def encode_arguments(types, values) -> bytes:
    """Standard head/tail ABI encoding of ``values`` as a tuple of ``types``."""
    types = list(types)
    values = list(values)
    if len(types) != len(values):
        raise ArityMismatch(f"{len(types)} types but {len(values)} values")
    for t, v in zip(types, values):
        check_value(t, v)
    return _encode_tuple(types, values)


def encode_call(fn: AbiFunction, values) -> bytes:
    return fn.selector + encode_arguments(fn.inputs, values)
