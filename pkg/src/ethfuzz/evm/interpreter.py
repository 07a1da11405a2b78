"""Instrumented stack-machine interpreter.

Calls are run on an explicit frame stack rather than by Python recursion, so
a 1024-deep call chain costs no interpreter stack. Each frame owns the
``CallRecord`` that describes it; the records of a transaction form the call
tree the oracles inspect.
"""

from __future__ import annotations

from typing import Protocol

from .._kernels import keccak256, valid_jumpdests
from .errors import DeployRevert, InsufficientBalance, OutOfGas, UnknownAccount
from .gas import SEND_STIPEND, GasSchedule, call_base_cost, compute_forwarded_gas
from .opcodes import MONITORED, NAMES, SUPPORTED
from .state import ZERO_ADDRESS, AccountKind, BlockContext, WorldState, derive_address, to_address
from .trace import CallKind, CallRecord, Outcome, classify_call

WORD = 1 << 256
MASK = WORD - 1
SIGN = 1 << 255

MAX_DEPTH = 1024
MAX_STACK = 1024
MAX_MEMORY = 1 << 20  # memory beyond this halts with OutOfGas (no expansion gas is charged)

DEFAULT_TX_GAS = 1_000_000
DEFAULT_DEPLOY_GAS = 10_000_000


class NativeAccount(Protocol):
    def on_receive(self, record: CallRecord, gas: int) -> bytes:
        """Bytecode to run in the native account's context for this incoming call."""


class Halt(Exception):
    def __init__(self, outcome: Outcome):
        self.outcome = outcome


def _stack_needs() -> list[int]:
    need = [0] * 256
    for op, n in {
        0x01: 2, 0x02: 2, 0x03: 2, 0x04: 2, 0x06: 2, 0x0A: 2,
        0x10: 2, 0x11: 2, 0x12: 2, 0x13: 2, 0x14: 2, 0x15: 1, 0x16: 2, 0x17: 2,
        0x18: 2, 0x19: 1, 0x1A: 2, 0x20: 2, 0x31: 1, 0x35: 1, 0x37: 3, 0x39: 3,
        0x50: 1, 0x51: 1, 0x52: 2, 0x53: 2, 0x54: 1, 0x55: 2, 0x56: 1, 0x57: 2,
        0xA0: 2, 0xA1: 3, 0xA2: 4, 0xF1: 7, 0xF3: 2, 0xF4: 6, 0xFD: 2, 0xFF: 1,
    }.items():
        need[op] = n
    for n in range(1, 17):
        need[0x7F + n] = n
        need[0x8F + n] = n + 1
    return need


_STACK_NEEDS = _stack_needs()
_MONITORED_OPS = frozenset(op for op, name in NAMES.items() if name in MONITORED and op not in (0xF1, 0xF4))


class Frame:
    """Execution context of one call."""

    __slots__ = (
        "code", "jumpdests", "pc", "stack", "memory", "gas", "address", "caller",
        "value", "calldata", "record", "checkpoint", "return_data", "ret_offset",
        "ret_size", "pending",
    )

    def __init__(self, code, jumpdests, address, caller, value, calldata, gas, record, checkpoint):
        self.code = code
        self.jumpdests = jumpdests
        self.pc = 0
        self.stack: list[int] = []
        self.memory = bytearray()
        self.gas = gas
        self.address = address
        self.caller = caller
        self.value = value
        self.calldata = calldata
        self.record = record
        self.checkpoint = checkpoint
        self.return_data = b""
        self.ret_offset = 0
        self.ret_size = 0
        self.pending: Frame | None = None


def _signed(x: int) -> int:
    return x - WORD if x & SIGN else x


def _extend(frame: Frame, offset: int, size: int) -> None:
    if size == 0:
        return
    end = offset + size
    if end > MAX_MEMORY:
        raise Halt(Outcome.OUT_OF_GAS)
    mem = frame.memory
    if end > len(mem):
        mem.extend(bytes(-(-end // 32) * 32 - len(mem)))


class VM:
    """Interpreter bound to one ``WorldState``.

    ``natives`` maps addresses of native (agent) accounts to controllers whose
    ``on_receive`` supplies the code run when they are called.
    """

    def __init__(self, state: WorldState, schedule: GasSchedule | None = None):
        self.state = state
        self.schedule = schedule or GasSchedule()
        self.natives: dict[bytes, NativeAccount] = {}
        self.ctx: BlockContext = state.block
        self.last_deploy_record: CallRecord | None = None
        self._costs = self.schedule.table()
        self._jumpdest_cache: dict[bytes, bytes] = {}
        self._handlers = self._build_handlers()

    # -- public entry points -----------------------------------------------

    def deploy_contract(
        self,
        creator: bytes,
        init_code: bytes,
        constructor_args: bytes = b"",
        endowment: int = 0,
        gas: int = DEFAULT_DEPLOY_GAS,
    ) -> bytes:
        """Run creation code and install the returned runtime code at a fresh address."""
        st = self.state
        if st.get(creator).balance < endowment:
            raise InsufficientBalance(f"creator cannot fund endowment {endowment}")
        cp = st.checkpoint()
        address = derive_address(creator, st.bump_counter(creator))
        while address == ZERO_ADDRESS or st.exists(address):
            address = derive_address(creator, st.bump_counter(creator))
        st.create_account(address, AccountKind.CONTRACT)
        code = bytes(init_code) + bytes(constructor_args)
        record = CallRecord(creator, address, CallKind.CREATE, code, endowment, gas)
        self.last_deploy_record = record
        st.transfer(creator, address, endowment)
        frame = Frame(code, self._jumpdests(code), address, creator, endowment, b"", gas, record, st.checkpoint())
        self._run(frame)
        if record.outcome is Outcome.SUCCESS:
            st.set_code(address, frame.return_data)
            st.commit()
            return address
        st.revert(cp)
        st.commit()
        if record.outcome is Outcome.OUT_OF_GAS:
            raise OutOfGas(f"deployment ran out of gas ({gas})")
        raise DeployRevert(f"init code halted with {record.outcome.value}")

    def call(
        self,
        caller: bytes,
        target: bytes,
        data: bytes = b"",
        value: int = 0,
        gas: int = DEFAULT_TX_GAS,
        ctx: BlockContext | None = None,
    ) -> CallRecord:
        """Execute one top-level transaction; state is committed iff the root succeeds."""
        st = self.state
        if not st.exists(caller):
            raise UnknownAccount(f"caller {caller.hex()}")
        if not st.exists(target):
            raise UnknownAccount(f"target {target.hex()}")
        self.ctx = ctx or st.block
        data = bytes(data)
        record = CallRecord(caller, target, CallKind.CALL, data, value, gas)
        cp = st.checkpoint()
        frame = self._open(record, st.code(target), target, caller, value, data, transfer=True)
        if frame is not None:
            self._run(frame)
        if record.outcome is not Outcome.SUCCESS:
            st.revert(cp)
        st.commit()
        return record

    def execute_transaction(self, call, ctx: BlockContext | None = None) -> CallRecord:
        """Run a ``FuzzCall``-shaped object (caller, target, calldata, value, gas_budget)."""
        return self.call(call.caller, call.target, call.calldata, call.value, call.gas_budget, ctx)

    def step(self, frame: Frame) -> Outcome | None:
        """Execute one opcode; ``None`` means continue, an ``Outcome`` means the frame halted."""
        code = frame.code
        pc = frame.pc
        if pc >= len(code):
            return Outcome.SUCCESS
        op = code[pc]
        handler = self._handlers[op]
        if handler is None:
            return Outcome.INVALID_OP
        cost = self._costs[op]
        if frame.gas < cost:
            return Outcome.OUT_OF_GAS
        frame.gas -= cost
        if len(frame.stack) < _STACK_NEEDS[op]:
            return Outcome.INVALID_OP
        if op in _MONITORED_OPS:
            frame.record.opcode_trace.append(NAMES[op])
        frame.pc = pc + 1
        try:
            outcome = handler(frame, op)
        except Halt as halt:
            return halt.outcome
        if len(frame.stack) > MAX_STACK:
            return Outcome.INVALID_OP
        return outcome

    # -- frame lifecycle ---------------------------------------------------

    def _jumpdests(self, code: bytes) -> bytes:
        mask = self._jumpdest_cache.get(code)
        if mask is None:
            mask = valid_jumpdests(code)
            self._jumpdest_cache[code] = mask
        return mask

    def _open(self, record, code, address, caller, value, calldata, transfer) -> Frame | None:
        """Start a call described by ``record``; returns None if it resolved immediately."""
        st = self.state
        cp = st.checkpoint()
        if record.depth > MAX_DEPTH:
            record.outcome = Outcome.INVALID_OP
            return None
        if transfer and value:
            if st.balance(record.caller) < value:
                record.outcome = Outcome.BALANCE_TOO_LOW
                return None
            st.transfer(record.caller, record.callee, value)
        native = self.natives.get(record.callee)
        if native is not None and record.kind is not CallKind.DELEGATECALL:
            code = native.on_receive(record, record.gas_limit)
        if not code:
            return None
        return Frame(code, self._jumpdests(code), address, caller, value, calldata, record.gas_limit, record, cp)

    def _run(self, root: Frame) -> None:
        frames = [root]
        step = self.step
        while frames:
            frame = frames[-1]
            outcome = step(frame)
            if outcome is None:
                if frame.pending is not None:
                    frames.append(frame.pending)
                    frame.pending = None
                continue
            self._halt(frame, outcome)
            frames.pop()
            if frames:
                self._resume(frames[-1], frame)

    def _halt(self, frame: Frame, outcome: Outcome) -> None:
        record = frame.record
        record.outcome = outcome
        if outcome is not Outcome.SUCCESS:
            self.state.revert(frame.checkpoint)
            if outcome is not Outcome.REVERT:
                frame.gas = 0
                frame.return_data = b""
        record.gas_used = record.gas_limit - frame.gas

    def _resume(self, parent: Frame, child: Frame) -> None:
        parent.stack.append(0 if child.record.failed else 1)
        parent.gas += child.gas
        data = child.return_data
        n = min(child.ret_size, len(data))
        if n:
            parent.memory[child.ret_offset:child.ret_offset + n] = data[:n]

    # -- opcode handlers ---------------------------------------------------

    def _build_handlers(self):
        h = [None] * 256
        simple = {
            0x00: self._op_stop, 0x01: self._op_add, 0x02: self._op_mul, 0x03: self._op_sub,
            0x04: self._op_div, 0x06: self._op_mod, 0x0A: self._op_exp, 0x10: self._op_lt,
            0x11: self._op_gt, 0x12: self._op_slt, 0x13: self._op_sgt, 0x14: self._op_eq,
            0x15: self._op_iszero, 0x16: self._op_and, 0x17: self._op_or, 0x18: self._op_xor,
            0x19: self._op_not, 0x1A: self._op_byte, 0x20: self._op_sha3, 0x30: self._op_address,
            0x31: self._op_balance, 0x33: self._op_caller, 0x34: self._op_callvalue,
            0x35: self._op_calldataload, 0x36: self._op_calldatasize, 0x37: self._op_calldatacopy,
            0x38: self._op_codesize, 0x39: self._op_codecopy, 0x42: self._op_timestamp,
            0x43: self._op_number, 0x50: self._op_pop, 0x51: self._op_mload, 0x52: self._op_mstore,
            0x53: self._op_mstore8, 0x54: self._op_sload, 0x55: self._op_sstore, 0x56: self._op_jump,
            0x57: self._op_jumpi, 0x58: self._op_pc, 0x5A: self._op_gas, 0x5B: self._op_jumpdest,
            0xA0: self._op_log, 0xA1: self._op_log, 0xA2: self._op_log, 0xF1: self._op_call,
            0xF3: self._op_return, 0xF4: self._op_call, 0xFD: self._op_revert,
            0xFF: self._op_selfdestruct,
        }
        for op, fn in simple.items():
            h[op] = fn
        for op in range(0x60, 0x80):
            h[op] = self._op_push
        for op in range(0x80, 0x90):
            h[op] = self._op_dup
        for op in range(0x90, 0xA0):
            h[op] = self._op_swap
        assert {op for op in range(256) if h[op] is not None} == SUPPORTED
        return h

    def _op_stop(self, f, op):
        return Outcome.SUCCESS

    def _op_add(self, f, op):
        s = f.stack
        s.append((s.pop() + s.pop()) & MASK)

    def _op_mul(self, f, op):
        s = f.stack
        s.append((s.pop() * s.pop()) & MASK)

    def _op_sub(self, f, op):
        s = f.stack
        a = s.pop()
        s.append((a - s.pop()) & MASK)

    def _op_div(self, f, op):
        s = f.stack
        a, b = s.pop(), s.pop()
        s.append(a // b if b else 0)

    def _op_mod(self, f, op):
        s = f.stack
        a, b = s.pop(), s.pop()
        s.append(a % b if b else 0)

    def _op_exp(self, f, op):
        s = f.stack
        a, b = s.pop(), s.pop()
        s.append(pow(a, b, WORD))

    def _op_lt(self, f, op):
        s = f.stack
        a, b = s.pop(), s.pop()
        s.append(1 if a < b else 0)

    def _op_gt(self, f, op):
        s = f.stack
        a, b = s.pop(), s.pop()
        s.append(1 if a > b else 0)

    def _op_slt(self, f, op):
        s = f.stack
        a, b = s.pop(), s.pop()
        s.append(1 if _signed(a) < _signed(b) else 0)

    def _op_sgt(self, f, op):
        s = f.stack
        a, b = s.pop(), s.pop()
        s.append(1 if _signed(a) > _signed(b) else 0)

    def _op_eq(self, f, op):
        s = f.stack
        s.append(1 if s.pop() == s.pop() else 0)

    def _op_iszero(self, f, op):
        s = f.stack
        s.append(0 if s.pop() else 1)

    def _op_and(self, f, op):
        s = f.stack
        s.append(s.pop() & s.pop())

    def _op_or(self, f, op):
        s = f.stack
        s.append(s.pop() | s.pop())

    def _op_xor(self, f, op):
        s = f.stack
        s.append(s.pop() ^ s.pop())

    def _op_not(self, f, op):
        s = f.stack
        s.append(MASK ^ s.pop())

    def _op_byte(self, f, op):
        s = f.stack
        i, x = s.pop(), s.pop()
        s.append((x >> (8 * (31 - i))) & 0xFF if i < 32 else 0)

    def _op_sha3(self, f, op):
        s = f.stack
        offset, size = s.pop(), s.pop()
        extra = self.schedule.sha3_word * (-(-size // 32))
        if f.gas < extra:
            raise Halt(Outcome.OUT_OF_GAS)
        f.gas -= extra
        _extend(f, offset, size)
        s.append(int.from_bytes(keccak256(bytes(f.memory[offset:offset + size])), "big"))

    def _op_address(self, f, op):
        f.stack.append(int.from_bytes(f.address, "big"))

    def _op_balance(self, f, op):
        s = f.stack
        s.append(self.state.balance(to_address(s.pop())))

    def _op_caller(self, f, op):
        f.stack.append(int.from_bytes(f.caller, "big"))

    def _op_callvalue(self, f, op):
        f.stack.append(f.value)

    def _op_calldataload(self, f, op):
        s = f.stack
        i = s.pop()
        chunk = f.calldata[i:i + 32] if i < len(f.calldata) else b""
        s.append(int.from_bytes(chunk.ljust(32, b"\x00"), "big"))

    def _op_calldatasize(self, f, op):
        f.stack.append(len(f.calldata))

    def _copy_into_memory(self, f, source: bytes):
        s = f.stack
        mem_off, src_off, size = s.pop(), s.pop(), s.pop()
        _extend(f, mem_off, size)
        if size:
            chunk = source[src_off:src_off + size] if src_off < len(source) else b""
            f.memory[mem_off:mem_off + size] = chunk.ljust(size, b"\x00")

    def _op_calldatacopy(self, f, op):
        self._copy_into_memory(f, f.calldata)

    def _op_codesize(self, f, op):
        f.stack.append(len(f.code))

    def _op_codecopy(self, f, op):
        self._copy_into_memory(f, f.code)

    def _op_timestamp(self, f, op):
        f.stack.append(self.ctx.timestamp)

    def _op_number(self, f, op):
        f.stack.append(self.ctx.number)

    def _op_pop(self, f, op):
        f.stack.pop()

    def _op_mload(self, f, op):
        s = f.stack
        offset = s.pop()
        _extend(f, offset, 32)
        s.append(int.from_bytes(f.memory[offset:offset + 32], "big"))

    def _op_mstore(self, f, op):
        s = f.stack
        offset, value = s.pop(), s.pop()
        _extend(f, offset, 32)
        f.memory[offset:offset + 32] = value.to_bytes(32, "big")

    def _op_mstore8(self, f, op):
        s = f.stack
        offset, value = s.pop(), s.pop()
        _extend(f, offset, 1)
        f.memory[offset] = value & 0xFF

    def _op_sload(self, f, op):
        s = f.stack
        s.append(self.state.sload(f.address, s.pop()))

    def _op_sstore(self, f, op):
        s = f.stack
        key, value = s.pop(), s.pop()
        self.state.sstore(f.address, key, value)

    def _op_jump(self, f, op):
        dest = f.stack.pop()
        if dest >= len(f.jumpdests) or not f.jumpdests[dest]:
            raise Halt(Outcome.INVALID_OP)
        f.pc = dest

    def _op_jumpi(self, f, op):
        s = f.stack
        dest, cond = s.pop(), s.pop()
        if cond:
            if dest >= len(f.jumpdests) or not f.jumpdests[dest]:
                raise Halt(Outcome.INVALID_OP)
            f.pc = dest

    def _op_pc(self, f, op):
        f.stack.append(f.pc - 1)

    def _op_gas(self, f, op):
        f.stack.append(f.gas)

    def _op_jumpdest(self, f, op):
        pass

    def _op_push(self, f, op):
        n = op - 0x5F
        start = f.pc
        f.stack.append(int.from_bytes(f.code[start:start + n].ljust(n, b"\x00"), "big"))
        f.pc = start + n

    def _op_dup(self, f, op):
        s = f.stack
        s.append(s[-(op - 0x7F)])

    def _op_swap(self, f, op):
        s = f.stack
        n = op - 0x8F + 1
        s[-1], s[-n] = s[-n], s[-1]

    def _op_log(self, f, op):
        s = f.stack
        offset, size = s.pop(), s.pop()
        for _ in range(op - 0xA0):
            s.pop()
        _extend(f, offset, size)

    def _op_return(self, f, op):
        s = f.stack
        offset, size = s.pop(), s.pop()
        _extend(f, offset, size)
        f.return_data = bytes(f.memory[offset:offset + size])
        return Outcome.SUCCESS

    def _op_revert(self, f, op):
        s = f.stack
        offset, size = s.pop(), s.pop()
        _extend(f, offset, size)
        f.return_data = bytes(f.memory[offset:offset + size])
        return Outcome.REVERT

    def _op_selfdestruct(self, f, op):
        beneficiary = to_address(f.stack.pop())
        st = self.state
        balance = st.balance(f.address)
        if beneficiary != f.address:
            st.transfer(f.address, beneficiary, balance)
        st.clear_contract(f.address)
        return Outcome.SUCCESS

    def _op_call(self, f, op):
        s = f.stack
        delegate = op == 0xF4
        requested = s.pop()
        target = to_address(s.pop())
        value = 0 if delegate else s.pop()
        in_off, in_size, out_off, out_size = s.pop(), s.pop(), s.pop(), s.pop()
        _extend(f, in_off, in_size)
        _extend(f, out_off, out_size)
        try:
            forwarded = compute_forwarded_gas(requested, f.gas, value, self.schedule)
        except OutOfGas:
            raise Halt(Outcome.OUT_OF_GAS) from None
        f.gas -= call_base_cost(self.schedule, value) + forwarded - (SEND_STIPEND if value else 0)

        data = bytes(f.memory[in_off:in_off + in_size])
        kind = CallKind.DELEGATECALL if delegate else classify_call(value, data, forwarded)
        record = CallRecord(
            caller=f.address, callee=target, kind=kind, input=data, value=value,
            gas_limit=forwarded, depth=f.record.depth + 1,
        )
        f.record.internal_calls.append(record)
        f.record.opcode_trace.append(NAMES[op])

        code = self.state.code(target)
        if delegate:
            child = self._open(record, code, f.address, f.caller, f.value, data, transfer=False)
        else:
            child = self._open(record, code, target, f.address, value, data, transfer=True)
        if child is None:
            s.append(0 if record.failed else 1)
            f.gas += record.gas_limit
            return None
        child.ret_offset = out_off
        child.ret_size = out_size
        f.pending = child
        return None


def step_interpreter(vm: VM, frame: Frame) -> Outcome | None:
    return vm.step(frame)


def make_frame(vm: VM, code: bytes, gas: int, address: bytes = b"\x01" * 20, calldata: bytes = b"") -> Frame:
    """Bare frame over ``code`` for single-stepping in tests and tools."""
    record = CallRecord(ZERO_ADDRESS, address, CallKind.CALL, calldata, 0, gas)
    if not vm.state.exists(address):
        vm.state.create_account(address, AccountKind.CONTRACT)
    return Frame(bytes(code), vm._jumpdests(bytes(code)), address, ZERO_ADDRESS, 0, calldata, gas, record,
                 vm.state.checkpoint())
