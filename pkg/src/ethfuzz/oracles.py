"""Trace-based vulnerability oracles.

Every composite oracle is the conjunction of small sub-predicates over a
finished call tree; the sub-predicates are exported so they can be checked on
their own. Paths are tuples of child indices from the root record.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .analysis import TransferCapability
from .evm.gas import SEND_STIPEND
from .evm.trace import CallKind, CallRecord, Outcome

Path = tuple[int, ...]


class VulnKind(enum.Enum):
    GASLESS_SEND = "GaslessSend"
    EXCEPTION_DISORDER = "ExceptionDisorder"
    REENTRANCY = "Reentrancy"
    TIMESTAMP_DEPENDENCY = "TimestampDependency"
    BLOCKNUM_DEPENDENCY = "BlockNumDependency"
    DANGEROUS_DELEGATECALL = "DangerousDelegateCall"
    FREEZING_ETHER = "FreezingEther"

    @classmethod
    def parse(cls, name: str) -> "VulnKind":
        for kind in cls:
            if kind.value.lower() == name.strip().lower():
                return kind
        raise ValueError(f"unknown oracle {name!r}")


ALL_KINDS = tuple(VulnKind)


@dataclass
class OracleVerdict:
    kind: VulnKind
    contract: bytes
    evidence: dict = field(default_factory=dict)
    triggering_call: object | None = None  # FuzzCall
    tx_index: int | None = None

    def to_dict(self) -> dict:
        call = self.triggering_call
        return {
            "kind": self.kind.value,
            "contract": "0x" + self.contract.hex(),
            "evidence": self.evidence,
            "triggering_call": call.to_dict() if call is not None else None,
            "tx_index": self.tx_index,
        }


@dataclass
class SessionStats:
    max_balance_observed: int = 0
    executed_delegatecall: bool = False
    static_transfer_flags: TransferCapability | None = None

    def observe_balance(self, balance: int) -> None:
        if balance > self.max_balance_observed:
            self.max_balance_observed = balance

    def observe_trace(self, root: CallRecord, contract: bytes) -> None:
        if any(r.kind is CallKind.DELEGATECALL and r.caller == contract for _, r in root.walk()):
            self.executed_delegatecall = True


def _descendants(root: CallRecord) -> Iterator[tuple[Path, CallRecord]]:
    it = root.walk()
    next(it)
    return it


def _with_parents(root: CallRecord) -> Iterator[tuple[Path, CallRecord, CallRecord]]:
    stack = [((), root)]
    while stack:
        path, rec = stack.pop()
        for i, child in enumerate(rec.internal_calls):
            yield path + (i,), child, rec
        stack.extend((path + (i,), c) for i, c in reversed(list(enumerate(rec.internal_calls))))


def _fmt(path: Path) -> list[int]:
    return list(path)


def _call_attrs(rec: CallRecord) -> dict:
    return {
        "caller": "0x" + rec.caller.hex(),
        "callee": "0x" + rec.callee.hex(),
        "kind": rec.kind.value,
        "value": rec.value,
        "gas_limit": rec.gas_limit,
        "input": "0x" + rec.input.hex(),
        "outcome": rec.outcome.value,
    }


# -- sub-predicates -------------------------------------------------------------


def send_calls(root: CallRecord) -> list[Path]:
    """Paths of records with the send signature (empty input, 2300 gas, value > 0)."""
    return [p for p, r in root.walk() if r.kind is CallKind.SEND]


def gasless_sends(root: CallRecord) -> list[Path]:
    return [p for p, r in root.walk() if r.kind is CallKind.SEND and r.outcome is Outcome.OUT_OF_GAS]


def ether_transfers(root: CallRecord) -> list[Path]:
    """Internal calls moving ether. The root's own value is the fuzzer's deposit, not a transfer."""
    return [p for p, r in _descendants(root) if r.value > 0 and r.kind in (CallKind.CALL, CallKind.SEND)]


def send_call(root: CallRecord) -> bool:
    return bool(send_calls(root))


def ether_transfer(root: CallRecord) -> bool:
    return bool(ether_transfers(root))


def opcode_uses(root: CallRecord, contract: bytes, opcode: str) -> list[Path]:
    """Records running ``contract``'s code whose trace contains ``opcode``."""
    return [
        p for p, r in root.walk()
        if r.callee == contract and r.kind is not CallKind.CREATE and opcode in r.opcode_trace
    ]


def timestamp_op(root: CallRecord, contract: bytes) -> bool:
    return bool(opcode_uses(root, contract, "TIMESTAMP"))


def blocknum_op(root: CallRecord, contract: bytes) -> bool:
    return bool(opcode_uses(root, contract, "NUMBER"))


def swallowed_failures(root: CallRecord, agent: bytes | None = None) -> list[Path]:
    """Failed calls whose direct caller frame kept running successfully.

    Failures swallowed by the agent's own synthetic code are not the contract's doing
    and are skipped.
    """
    out = []
    for path, rec, parent in _with_parents(root):
        if not rec.failed or parent.failed:
            continue
        if agent is not None and parent.callee == agent and parent.kind is not CallKind.DELEGATECALL:
            continue
        out.append(path)
    return out


def _key(rec: CallRecord) -> tuple[bytes, bytes | None]:
    return rec.callee, rec.selector


def reentrancy_calls(root: CallRecord, agent: bytes) -> list[tuple[Path, Path]]:
    """(first, repeat) path pairs where the same (callee, selector) is entered again
    further down one root-to-leaf path and the repeated activation completed."""
    pairs = []
    # (record, path, index of next child); the stack doubles as the ancestor chain
    stack: list[tuple[CallRecord, Path, int]] = [(root, (), 0)]
    while stack:
        rec, path, nxt = stack[-1]
        if nxt == 0 and path and rec.callee != agent and rec.kind is CallKind.CALL \
                and rec.outcome is Outcome.SUCCESS:
            key = _key(rec)
            for anc, apath, _ in stack[:-1]:
                if anc.kind is CallKind.CALL and _key(anc) == key:
                    pairs.append((apath, path))
                    break
        if nxt < len(rec.internal_calls):
            stack[-1] = (rec, path, nxt + 1)
            stack.append((rec.internal_calls[nxt], path + (nxt,), 0))
        else:
            stack.pop()
    return pairs


def calls_agent_with_value(root: CallRecord, agent: bytes) -> list[Path]:
    """Successful value-bearing calls into the agent that carried more than the stipend."""
    return [
        p for p, r in root.walk()
        if r.callee == agent and r.kind is CallKind.CALL and r.value > 0
        and r.gas_limit > SEND_STIPEND and r.outcome is Outcome.SUCCESS
    ]


def reentrancy_call(root: CallRecord, agent: bytes) -> bool:
    return bool(reentrancy_calls(root, agent))


def call_agent_with_value(root: CallRecord, agent: bytes) -> bool:
    return bool(calls_agent_with_value(root, agent))


def tainted_delegatecalls(root: CallRecord, top_input: bytes) -> list[Path]:
    return [
        p for p, r in root.walk()
        if r.kind is CallKind.DELEGATECALL and len(r.input) >= 4 and r.input[:4] in top_input
    ]


# -- composite checks -----------------------------------------------------------


def check_gasless_send(root: CallRecord, contract: bytes) -> OracleVerdict | None:
    hits = gasless_sends(root)
    if not hits:
        return None
    rec = _at(root, hits[0])
    return OracleVerdict(VulnKind.GASLESS_SEND, contract, {
        "paths": [_fmt(p) for p in hits], "call": _call_attrs(rec),
    })


def check_exception_disorder(root: CallRecord, contract: bytes, agent: bytes | None = None) -> OracleVerdict | None:
    if root.outcome is not Outcome.SUCCESS:
        return None
    hits = swallowed_failures(root, agent)
    if not hits:
        return None
    rec = _at(root, hits[0])
    return OracleVerdict(VulnKind.EXCEPTION_DISORDER, contract, {
        "paths": [_fmt(p) for p in hits], "call": _call_attrs(rec),
    })


def check_reentrancy(root: CallRecord, contract: bytes, agent: bytes) -> OracleVerdict | None:
    """Repeated activation whose own subtree pays the agent with forwarded gas."""
    value_paths = calls_agent_with_value(root, agent)
    for first, repeat in reentrancy_calls(root, agent):
        inside = [v for v in value_paths if v[:len(repeat)] == repeat and len(v) > len(repeat)]
        if inside:
            return OracleVerdict(VulnKind.REENTRANCY, contract, {
                "first": _fmt(first),
                "repeat": _fmt(repeat),
                "value_call": _fmt(inside[0]),
                "call": _call_attrs(_at(root, inside[0])),
                "selector": "0x" + (_at(root, repeat).selector or b"").hex(),
            })
    return None


def _dependency(kind: VulnKind, opcode: str, root: CallRecord, contract: bytes) -> OracleVerdict | None:
    uses = opcode_uses(root, contract, opcode)
    if not uses:
        return None
    moves = send_calls(root) + ether_transfers(root)
    if not moves:
        return None
    return OracleVerdict(kind, contract, {
        "opcode": opcode,
        "opcode_paths": [_fmt(p) for p in uses],
        "transfer_paths": [list(p) for p in sorted(set(moves))],
        "call": _call_attrs(_at(root, moves[0])),
    })


def check_timestamp_dependency(root: CallRecord, contract: bytes) -> OracleVerdict | None:
    return _dependency(VulnKind.TIMESTAMP_DEPENDENCY, "TIMESTAMP", root, contract)


def check_blocknum_dependency(root: CallRecord, contract: bytes) -> OracleVerdict | None:
    return _dependency(VulnKind.BLOCKNUM_DEPENDENCY, "NUMBER", root, contract)


def check_dangerous_delegatecall(root: CallRecord, contract: bytes, top_input: bytes | None = None) -> OracleVerdict | None:
    top_input = root.input if top_input is None else top_input
    hits = tainted_delegatecalls(root, top_input)
    if not hits:
        return None
    rec = _at(root, hits[0])
    return OracleVerdict(VulnKind.DANGEROUS_DELEGATECALL, contract, {
        "paths": [_fmt(p) for p in hits], "call": _call_attrs(rec),
        "selector": "0x" + rec.input[:4].hex(),
    })


def check_freezing_ether(contract: bytes, stats: SessionStats) -> OracleVerdict | None:
    flags = stats.static_transfer_flags
    if flags is None or flags.has_call or flags.has_selfdestruct:
        return None
    if stats.max_balance_observed <= 0 or not stats.executed_delegatecall:
        return None
    return OracleVerdict(VulnKind.FREEZING_ETHER, contract, {
        "max_balance_observed": stats.max_balance_observed,
        "executed_delegatecall": True,
        "has_call": False,
        "has_selfdestruct": False,
    })


def _at(root: CallRecord, path: Iterable[int]) -> CallRecord:
    rec = root
    for i in path:
        rec = rec.internal_calls[i]
    return rec


def evaluate_all(
    root: CallRecord,
    contract: bytes,
    agent: bytes,
    enabled: Iterable[VulnKind] = ALL_KINDS,
) -> list[OracleVerdict]:
    """All enabled per-trace checks; FreezingEther is per session (see ``OracleEngine``)."""
    enabled = set(enabled)
    checks = [
        (VulnKind.GASLESS_SEND, lambda: check_gasless_send(root, contract)),
        (VulnKind.EXCEPTION_DISORDER, lambda: check_exception_disorder(root, contract, agent)),
        (VulnKind.REENTRANCY, lambda: check_reentrancy(root, contract, agent)),
        (VulnKind.TIMESTAMP_DEPENDENCY, lambda: check_timestamp_dependency(root, contract)),
        (VulnKind.BLOCKNUM_DEPENDENCY, lambda: check_blocknum_dependency(root, contract)),
        (VulnKind.DANGEROUS_DELEGATECALL, lambda: check_dangerous_delegatecall(root, contract)),
    ]
    return [v for kind, check in checks if kind in enabled for v in [check()] if v is not None]


class OracleEngine:
    """Accumulates verdicts for one contract's session, first occurrence per kind."""

    def __init__(self, contract: bytes, agent: bytes, enabled: Iterable[VulnKind] = ALL_KINDS):
        self.contract = contract
        self.agent = agent
        self.enabled = frozenset(enabled)
        self._verdicts: dict[VulnKind, OracleVerdict] = {}

    def evaluate(self, root: CallRecord, call=None, tx_index: int | None = None) -> list[OracleVerdict]:
        fresh = []
        for v in evaluate_all(root, self.contract, self.agent, self.enabled):
            if v.kind not in self._verdicts:
                v.triggering_call = call
                v.tx_index = tx_index
                self._verdicts[v.kind] = v
                fresh.append(v)
        return fresh

    def finish(self, stats: SessionStats) -> OracleVerdict | None:
        if VulnKind.FREEZING_ETHER not in self.enabled or VulnKind.FREEZING_ETHER in self._verdicts:
            return None
        v = check_freezing_ether(self.contract, stats)
        if v is not None:
            self._verdicts[v.kind] = v
        return v

    @property
    def verdicts(self) -> list[OracleVerdict]:
        order = {k: i for i, k in enumerate(ALL_KINDS)}
        return sorted(self._verdicts.values(), key=lambda v: order[v.kind])
