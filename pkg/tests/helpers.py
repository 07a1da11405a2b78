"""Small builders shared by the test modules."""

from ethfuzz.agent import Agent, AgentMode, AgentState
from ethfuzz.asm import assemble, creation_code
from ethfuzz.evm import VM, AccountKind, WorldState

CREATOR = b"\xc0" * 20
USER = b"\xee" * 20
AGENT = b"\xa9" * 20
FUNDS = 10**24


def fresh_vm(*, agent_mode=None, reentry_limit=2):
    state = WorldState()
    state.create_account(CREATOR, AccountKind.EOA, FUNDS)
    state.create_account(USER, AccountKind.EOA, FUNDS)
    state.create_account(AGENT, AccountKind.AGENT, FUNDS)
    state.commit()
    vm = VM(state)
    agent = Agent(AGENT, AgentState(reentry_limit=reentry_limit, mode=agent_mode or AgentMode.PASSIVE))
    agent.install(vm)
    return vm, agent


def deploy_asm(vm, runtime_src, endowment=0, ctor_src=""):
    runtime = assemble(runtime_src)
    ctor = assemble(ctor_src) if ctor_src else b""
    return vm.deploy_contract(CREATOR, creation_code(runtime, ctor), endowment=endowment)


def deploy_fixture(vm, fixture):
    return vm.deploy_contract(CREATOR, fixture.creation_code(), endowment=fixture.endowment)
