import copy

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ethfuzz.abi import AbiFunction
from ethfuzz.agent import AgentMode, agent_initiate
from ethfuzz.analysis import TransferCapability, scan_transfer_capability
from ethfuzz.evm import CallKind, CallRecord, Outcome
from ethfuzz.fixtures import load_fixture
from ethfuzz.oracles import (
    ALL_KINDS,
    OracleEngine,
    SessionStats,
    VulnKind,
    blocknum_op,
    call_agent_with_value,
    check_blocknum_dependency,
    check_dangerous_delegatecall,
    check_exception_disorder,
    check_freezing_ether,
    check_gasless_send,
    check_reentrancy,
    check_timestamp_dependency,
    ether_transfer,
    evaluate_all,
    gasless_sends,
    reentrancy_call,
    send_call,
    swallowed_failures,
    tainted_delegatecalls,
    timestamp_op,
)

from helpers import AGENT, USER, deploy_fixture, fresh_vm

C = b"\xcc" * 20
OTHER = b"\x0e" * 20
SEL = bytes.fromhex("12345678")


def rec(caller=USER, callee=C, kind=CallKind.CALL, input=b"", value=0, gas=100_000,
        outcome=Outcome.SUCCESS, ops=(), children=()):
    r = CallRecord(caller, callee, kind, input, value, gas, outcome=outcome,
                   internal_calls=list(children), opcode_trace=list(ops))
    return r


def send(to=OTHER, outcome=Outcome.SUCCESS, value=1):
    return rec(C, to, CallKind.SEND, b"", value, 2300, outcome)


def fix_depths(root, depth=0):
    stack = [(root, depth)]
    while stack:
        r, d = stack.pop()
        r.depth = d
        stack.extend((c, d + 1) for c in r.internal_calls)
    return root


# -- synthetic example traces --------------------------------------------------------


def test_gasless_send_fires_on_out_of_gas_send():
    root = rec(children=[send(AGENT, Outcome.OUT_OF_GAS)])
    v = check_gasless_send(root, C)
    assert v.kind is VulnKind.GASLESS_SEND and v.evidence["paths"] == [[0]]


def test_successful_send_is_not_gasless():
    assert check_gasless_send(rec(children=[send()]), C) is None


def test_call_with_data_is_not_a_send():
    root = rec(children=[rec(C, OTHER, CallKind.CALL, SEL, 1, 2300, Outcome.OUT_OF_GAS)])
    assert not send_call(root) and check_gasless_send(root, C) is None


def test_exception_disorder_on_swallowed_failure():
    root = rec(children=[send(AGENT, Outcome.OUT_OF_GAS)])
    assert check_exception_disorder(root, C).evidence["paths"] == [[0]]


def test_no_disorder_when_failure_propagates():
    root = rec(outcome=Outcome.REVERT, children=[send(AGENT, Outcome.OUT_OF_GAS)])
    assert check_exception_disorder(root, C) is None


def test_failures_swallowed_by_agent_code_are_skipped():
    inner = rec(AGENT, C, input=SEL, outcome=Outcome.REVERT)
    root = rec(AGENT, C, input=SEL, children=[rec(C, AGENT, value=1, gas=50_000, children=[inner])])
    assert swallowed_failures(root, AGENT) == []
    assert swallowed_failures(root) == [(0, 0)]


def test_timestamp_with_transfer_fires():
    root = rec(ops=["TIMESTAMP"], children=[send()])
    v = check_timestamp_dependency(root, C)
    assert v.evidence["opcode_paths"] == [[]] and v.evidence["transfer_paths"] == [[0]]


def test_timestamp_without_transfer_is_clean():
    root = rec(value=5, ops=["TIMESTAMP"])
    assert timestamp_op(root, C) and not ether_transfer(root)
    assert check_timestamp_dependency(root, C) is None


def test_timestamp_in_other_contract_is_ignored():
    root = rec(children=[rec(C, OTHER, ops=["TIMESTAMP"]), send()])
    assert check_timestamp_dependency(root, C) is None


def test_blocknum_with_value_call():
    root = rec(ops=["NUMBER"], children=[rec(C, OTHER, value=3)])
    assert check_blocknum_dependency(root, C).kind is VulnKind.BLOCKNUM_DEPENDENCY
    assert check_timestamp_dependency(root, C) is None


def test_delegatecall_of_input_selector():
    root = rec(input=SEL + bytes(32), children=[rec(C, OTHER, CallKind.DELEGATECALL, SEL + bytes(32))])
    v = check_dangerous_delegatecall(root, C)
    assert v.evidence["selector"] == "0x12345678"


def test_delegatecall_of_constant_selector_is_clean():
    root = rec(input=SEL, children=[rec(C, OTHER, CallKind.DELEGATECALL, bytes.fromhex("deadbeef"))])
    assert check_dangerous_delegatecall(root, C) is None


def test_short_delegatecall_input_is_clean():
    root = rec(input=SEL, children=[rec(C, OTHER, CallKind.DELEGATECALL, b"\x12")])
    assert tainted_delegatecalls(root, root.input) == []


def test_reentrancy_synthetic():
    reenter = rec(AGENT, C, input=SEL, children=[rec(C, AGENT, value=1, gas=50_000)])
    root = rec(AGENT, C, input=SEL, children=[rec(C, AGENT, value=1, gas=90_000, children=[reenter])])
    v = check_reentrancy(fix_depths(root), C, AGENT)
    assert v.evidence["first"] == [] and v.evidence["repeat"] == [0, 0] and v.evidence["value_call"] == [0, 0, 0]


def test_reentry_paid_only_by_outer_frame_is_clean():
    # the state is already updated when the agent re-enters, so the inner call pays nothing
    reenter = rec(AGENT, C, input=SEL)
    root = rec(AGENT, C, input=SEL, children=[rec(C, AGENT, value=1, gas=90_000, children=[reenter])])
    assert reentrancy_call(root, AGENT) and call_agent_with_value(root, AGENT)
    assert check_reentrancy(root, C, AGENT) is None


CAP_NONE = TransferCapability(False, False, True)


@pytest.mark.parametrize("flags, balance, delegated, fires", [
    (CAP_NONE, 10, True, True),
    (CAP_NONE, 0, True, False),
    (CAP_NONE, 10, False, False),
    (TransferCapability(True, False, True), 10, True, False),
    (TransferCapability(False, True, True), 10, True, False),
    (None, 10, True, False),
])
def test_freezing_ether_conditions(flags, balance, delegated, fires):
    stats = SessionStats(balance, delegated, flags)
    assert (check_freezing_ether(C, stats) is not None) is fires


def test_session_stats_tracks_contract_delegatecalls_only():
    stats = SessionStats()
    stats.observe_trace(rec(children=[rec(OTHER, C, CallKind.DELEGATECALL, SEL)]), C)
    assert not stats.executed_delegatecall
    stats.observe_trace(rec(children=[rec(C, OTHER, CallKind.DELEGATECALL, SEL)]), C)
    assert stats.executed_delegatecall
    stats.observe_balance(5)
    stats.observe_balance(3)
    assert stats.max_balance_observed == 5


# -- fixture traces ---------------------------------------------------------------------


CLAIM, ADD = AbiFunction("claimBounty").selector, AbiFunction("addBounty").selector
WITHDRAW, DEPOSIT = AbiFunction("withdraw").selector, AbiFunction("deposit").selector


def _attack(name, deposit, withdraw):
    vm, agent = fresh_vm(agent_mode=AgentMode.REENTRANT)
    target = deploy_fixture(vm, load_fixture(name))
    agent_initiate(vm, agent, target, deposit, 10**18)
    return vm, target, agent_initiate(vm, agent, target, withdraw)


def test_bounty_hunt_reentrancy():
    _, target, root = _attack("bounty_hunt", ADD, CLAIM)
    assert check_reentrancy(root, target, AGENT) is not None


def test_patched_bounty_is_not_reentrant():
    _, target, root = _attack("patched_bounty", ADD, CLAIM)
    assert root.outcome is Outcome.SUCCESS
    assert check_reentrancy(root, target, AGENT) is None


@pytest.mark.parametrize("name", ["transfer_bank", "benign_bank"])
def test_banks_are_not_reentrant(name):
    _, target, root = _attack(name, DEPOSIT, WITHDRAW)
    assert check_reentrancy(root, target, AGENT) is None


def test_transfer_bank_gasless_send_against_expensive_agent():
    vm, agent = fresh_vm(agent_mode=AgentMode.EXPENSIVE_FALLBACK)
    target = deploy_fixture(vm, load_fixture("transfer_bank"))
    agent_initiate(vm, agent, target, DEPOSIT, 10**18)
    root = agent_initiate(vm, agent, target, WITHDRAW)
    assert root.outcome is Outcome.REVERT
    assert check_gasless_send(root, target) is not None
    assert check_exception_disorder(root, target, AGENT) is None


def test_past_date_guard_executes_timestamp_without_verdict():
    vm, _ = fresh_vm()
    fx = load_fixture("past_date_guard")
    target = deploy_fixture(vm, fx)
    for fn in fx.abi().functions:
        root = vm.call(USER, target, fn.selector, 10**15)
        assert check_timestamp_dependency(root, target) is None


# -- properties --------------------------------------------------------------------------


ADDRS = [C, AGENT, OTHER]


@st.composite
def leaves(draw):
    if draw(st.booleans()):
        outcome = draw(st.sampled_from([Outcome.SUCCESS, Outcome.OUT_OF_GAS]))
        return send(draw(st.sampled_from(ADDRS)), outcome)
    return rec(
        draw(st.sampled_from(ADDRS)), draw(st.sampled_from(ADDRS)),
        draw(st.sampled_from([CallKind.CALL, CallKind.DELEGATECALL])),
        draw(st.sampled_from([b"", SEL, SEL + bytes(32), bytes.fromhex("deadbeef")])),
        draw(st.sampled_from([0, 0, 1])), draw(st.sampled_from([2300, 50_000])),
        draw(st.sampled_from(list(Outcome)[:3])),
        draw(st.lists(st.sampled_from(["TIMESTAMP", "NUMBER", "CALLER"]), max_size=2)),
    )


def _with_children(children):
    return st.builds(lambda node, kids: (setattr(node, "internal_calls", kids), node)[1], leaves(), st.just(children))


traces = st.recursive(
    leaves(), lambda inner: st.lists(inner, max_size=3).flatmap(_with_children), max_leaves=12,
).map(fix_depths)


@given(traces)
def test_composite_fidelity(root):
    assert (check_gasless_send(root, C) is not None) == (send_call(root) and bool(gasless_sends(root)))
    assert (check_exception_disorder(root, C, AGENT) is not None) == (
        root.outcome is Outcome.SUCCESS and bool(swallowed_failures(root, AGENT)))
    moves = send_call(root) or ether_transfer(root)
    assert (check_timestamp_dependency(root, C) is not None) == (timestamp_op(root, C) and moves)
    assert (check_blocknum_dependency(root, C) is not None) == (blocknum_op(root, C) and moves)
    assert (check_dangerous_delegatecall(root, C) is not None) == bool(tainted_delegatecalls(root, root.input))
    if check_reentrancy(root, C, AGENT) is not None:
        assert reentrancy_call(root, AGENT) and call_agent_with_value(root, AGENT)


@given(st.lists(traces, max_size=6))
def test_verdicts_only_accumulate(roots):
    engine = OracleEngine(C, AGENT)
    seen: set = set()
    for i, root in enumerate(roots):
        engine.evaluate(root, None, i)
        kinds = {v.kind for v in engine.verdicts}
        assert seen <= kinds
        seen = kinds


@given(traces)
def test_checks_do_not_mutate_inputs(root):
    before = copy.deepcopy(root.to_dict())
    stats = SessionStats(7, True, CAP_NONE)
    evaluate_all(root, C, AGENT)
    check_freezing_ether(C, stats)
    assert root.to_dict() == before
    assert stats == SessionStats(7, True, CAP_NONE)


def test_checks_do_not_touch_world_state():
    vm, target, root = _attack("bounty_hunt", ADD, CLAIM)
    snapshot = copy.deepcopy(vm.state.accounts)
    evaluate_all(root, target, AGENT)
    assert vm.state.accounts == snapshot


def test_engine_keeps_first_verdict_per_kind():
    engine = OracleEngine(C, AGENT)
    root = rec(children=[send(AGENT, Outcome.OUT_OF_GAS)])
    first = engine.evaluate(root, "call-a", 0)
    again = engine.evaluate(root, "call-b", 1)
    assert {v.kind for v in first} == {VulnKind.GASLESS_SEND, VulnKind.EXCEPTION_DISORDER}
    assert again == []
    assert all(v.tx_index == 0 for v in engine.verdicts)


def test_engine_respects_enabled_set():
    engine = OracleEngine(C, AGENT, {VulnKind.GASLESS_SEND})
    engine.evaluate(rec(children=[send(AGENT, Outcome.OUT_OF_GAS)]))
    assert [v.kind for v in engine.verdicts] == [VulnKind.GASLESS_SEND]


def test_engine_freezing_ether_at_finish():
    engine = OracleEngine(C, AGENT)
    assert engine.finish(SessionStats(1, True, CAP_NONE)).kind is VulnKind.FREEZING_ETHER
    assert [v.kind for v in engine.verdicts] == [VulnKind.FREEZING_ETHER]


def test_frozen_wallet_flags_from_bytecode():
    assert scan_transfer_capability(load_fixture("frozen_wallet").runtime_code()) == CAP_NONE


def test_kind_parsing():
    assert VulnKind.parse(" reentrancy ") is VulnKind.REENTRANCY
    with pytest.raises(ValueError):
        VulnKind.parse("overflow")
    assert len(ALL_KINDS) == 7
