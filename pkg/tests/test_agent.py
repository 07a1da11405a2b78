import pytest
from hypothesis import given
from hypothesis import strategies as st

from ethfuzz.abi import AbiFunction
from ethfuzz.agent import (
    BURN_ITERATIONS,
    AgentAction,
    AgentMode,
    AgentState,
    agent_initiate,
    agent_on_receive,
)
from ethfuzz.evm import CallKind, Outcome
from ethfuzz.fixtures import load_fixture

from helpers import AGENT, FUNDS, deploy_asm, deploy_fixture, fresh_vm

ADD, CLAIM = AbiFunction("addBounty").selector, AbiFunction("claimBounty").selector
STAKE = 10**18


def _max_depth(rec):
    return max(r.depth for _, r in rec.walk())


def bounty_attack(limit=2, mode=AgentMode.REENTRANT):
    vm, agent = fresh_vm(agent_mode=mode, reentry_limit=limit)
    bounty = deploy_fixture(vm, load_fixture("bounty_hunt"))
    assert agent_initiate(vm, agent, bounty, ADD, STAKE).outcome is Outcome.SUCCESS
    root = agent_initiate(vm, agent, bounty, CLAIM)
    return vm, agent, bounty, root


def test_bounty_is_drained_once_per_reentry():
    vm, agent, bounty, root = bounty_attack(limit=2)
    assert root.outcome is Outcome.SUCCESS
    assert agent.state.reentry_depth == 2
    claims = [r for _, r in root.walk() if r.callee == bounty and r.selector == CLAIM]
    payouts = [r for _, r in root.walk() if r.callee == AGENT and r.value == STAKE]
    assert len(claims) == 3 and len(payouts) == 3
    assert vm.state.balance(AGENT) == FUNDS + 2 * STAKE


def test_reentry_is_verbatim_and_valueless():
    _, _, bounty, root = bounty_attack(limit=1)
    payout = root.internal_calls[0]
    assert payout.callee == AGENT and payout.kind is CallKind.CALL
    (reentry,) = payout.internal_calls
    assert (reentry.caller, reentry.callee, reentry.input, reentry.value) == (AGENT, bounty, CLAIM, 0)


def test_contract_that_never_calls_back():
    vm, agent = fresh_vm(agent_mode=AgentMode.REENTRANT)
    target = deploy_asm(vm, "PUSH1 1\nPUSH1 0\nSSTORE\nSTOP")
    root = agent_initiate(vm, agent, target, b"\x01\x02\x03\x04")
    assert root.outcome is Outcome.SUCCESS and root.internal_calls == []
    assert agent.state.reentry_depth == 0
    assert agent.state.stored_target == target and agent.state.stored_calldata == b"\x01\x02\x03\x04"


def test_initiate_with_insufficient_balance():
    vm, agent = fresh_vm()
    target = deploy_asm(vm, "STOP")
    root = agent_initiate(vm, agent, target, b"", FUNDS + 1)
    assert root.outcome is Outcome.BALANCE_TOO_LOW
    assert vm.state.balance(AGENT) == FUNDS


def test_initiate_resets_counter():
    vm, agent, bounty, _ = bounty_attack(limit=2)
    agent_initiate(vm, agent, bounty, ADD, 1)
    assert agent.state.reentry_depth == 0


PAY_AGENT = """
PUSH1 0
PUSH1 0
PUSH1 0
PUSH1 0
PUSH1 1
PUSH20 0x{agent}
PUSH2 {gas}
CALL
PUSH1 0
SSTORE
STOP
"""


@pytest.mark.parametrize("gas, ok", [(0, False), (10_000, True)])
def test_expensive_fallback_needs_more_than_stipend(gas, ok):
    vm, agent = fresh_vm(agent_mode=AgentMode.EXPENSIVE_FALLBACK)
    payer = deploy_asm(vm, PAY_AGENT.format(agent=AGENT.hex(), gas=gas), endowment=10)
    root = vm.call(b"\xee" * 20, payer)
    (child,) = root.internal_calls
    assert child.gas_limit == gas + 2300
    assert child.outcome is (Outcome.SUCCESS if ok else Outcome.OUT_OF_GAS)
    assert vm.state.sload(payer, 0) == int(ok)
    assert vm.state.balance(AGENT) == FUNDS + int(ok)


def test_burn_costs_more_than_stipend():
    vm, agent = fresh_vm(agent_mode=AgentMode.EXPENSIVE_FALLBACK)
    payer = deploy_asm(vm, PAY_AGENT.format(agent=AGENT.hex(), gas=50_000), endowment=10)
    child = vm.call(b"\xee" * 20, payer).internal_calls[0]
    assert child.gas_used > 2300
    assert BURN_ITERATIONS * 19 > 2300


def test_passive_accepts_everything():
    vm, agent = fresh_vm(agent_mode=AgentMode.PASSIVE)
    payer = deploy_asm(vm, PAY_AGENT.format(agent=AGENT.hex(), gas=0), endowment=10)
    child = vm.call(b"\xee" * 20, payer).internal_calls[0]
    assert child.outcome is Outcome.SUCCESS and child.internal_calls == [] and child.gas_used == 0


def test_stipend_never_triggers_reentry():
    state = AgentState(stored_target=b"\x01" * 20, mode=AgentMode.REENTRANT)
    assert agent_on_receive(state, 2300) is AgentAction.ACCEPT
    assert agent_on_receive(state, 2301) is AgentAction.REENTER
    assert state.reentry_depth == 1


def test_reentry_needs_stored_target():
    assert agent_on_receive(AgentState(mode=AgentMode.REENTRANT), 10**6) is AgentAction.ACCEPT


@given(st.integers(0, 6), st.integers(0, 10**7))
def test_reentry_counter_bounded(limit, gas):
    state = AgentState(stored_target=b"\x01" * 20, reentry_limit=limit)
    for _ in range(limit + 5):
        agent_on_receive(state, gas)
    assert state.reentry_depth <= limit


@pytest.mark.parametrize("limit", range(5))
def test_trace_depth_bounded_by_limit(limit):
    _, agent, _, root = bounty_attack(limit=limit)
    assert agent.state.reentry_depth == limit
    # each reentry adds a payout frame and a reentrant call frame
    assert _max_depth(root) <= 2 * limit + 2


def test_reentry_witness_in_trace():
    _, _, bounty, root = bounty_attack(limit=2)
    nested = [p for p, r in root.walk() if p and r.callee == bounty and r.selector == CLAIM]
    assert nested, "no nested call back into the target"
