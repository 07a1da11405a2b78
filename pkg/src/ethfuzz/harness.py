"""Corpus loading, campaign orchestration and reports."""

from __future__ import annotations

import json
import logging
import os
import random
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

from ._kernels import keccak256
from .abi import AbiError, ContractAbi, parse_abi
from .agent import DEFAULT_REENTRY_LIMIT, Agent, AgentMode, AgentState, agent_initiate
from .analysis import build_selector_index, find_function_selectors, scan_transfer_capability
from .evm import VM, BlockContext, ConfigInvalid, EvmError, GasSchedule, WorldState
from .evm.state import AccountKind
from .inputs import (
    DEFAULT_GAS_BUDGET,
    DEFAULT_K,
    DEFAULT_VALUE_DIVISOR,
    Actors,
    CallerKind,
    FuzzCall,
    build_private_pool,
    generate_call_pool,
    select_next_call,
)
from .oracles import ALL_KINDS, OracleEngine, SessionStats, VulnKind

log = logging.getLogger(__name__)

REPORT_SCHEMA = 1
DEFAULT_MAX_CALLS = 200
GENESIS = BlockContext(timestamp=1_700_000_000, number=18_000_000)
ACTOR_FUNDS = 10**21
DEFAULT_AGENT_PHASES = (AgentMode.REENTRANT, AgentMode.EXPENSIVE_FALLBACK)


class NoCorpus(FileNotFoundError):
    pass


def _actor(label: str) -> bytes:
    return keccak256(f"ethfuzz/{label}".encode())[12:]


ACTORS = Actors(creator=_actor("creator"), plain=_actor("plain"), agent=_actor("agent"))


# -- corpus -------------------------------------------------------------------


@dataclass(frozen=True)
class ContractArtifact:
    name: str
    creation_code: bytes
    abi: ContractAbi
    constructor_args: bytes = b""
    endowment: int = 0


def parse_hex(text: str) -> bytes:
    """Hex text with optional 0x prefix, any case, surrounding whitespace ignored."""
    s = "".join(text.split())
    if s[:2].lower() == "0x":
        s = s[2:]
    return bytes.fromhex(s)


def _load_artifact(d: Path) -> ContractArtifact:
    code = parse_hex((d / "contract.bin").read_text())
    if not code:
        raise ValueError("empty creation code")
    abi = parse_abi((d / "contract.abi").read_text())
    args_file = d / "contract.args"
    args = parse_hex(args_file.read_text()) if args_file.exists() else b""
    endowment = 0
    meta_file = d / "contract.meta"
    if meta_file.exists():
        meta = json.loads(meta_file.read_text())
        endowment = int(meta.get("endowment", 0)) if isinstance(meta, dict) else int(meta)
        if endowment < 0:
            raise ValueError("negative endowment")
    return ContractArtifact(d.name, code, abi, args, endowment)


def load_corpus(directory: str | Path) -> list[ContractArtifact]:
    root = Path(directory)
    if not root.is_dir():
        raise NoCorpus(f"corpus directory not found: {root}")
    artifacts = []
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        try:
            artifacts.append(_load_artifact(d))
        except (OSError, ValueError, AbiError) as exc:
            log.warning("skipping %s: %s", d.name, exc)
    if not artifacts:
        raise NoCorpus(f"no loadable contracts in {root}")
    return artifacts


# -- configuration ------------------------------------------------------------


@dataclass
class CampaignConfig:
    corpus_dir: str
    seed: int = 0
    k: int = DEFAULT_K
    max_calls_per_contract: int = DEFAULT_MAX_CALLS
    gas_budget: int = DEFAULT_GAS_BUDGET
    enabled_oracles: frozenset[VulnKind] = frozenset(ALL_KINDS)
    reentry_limit: int = DEFAULT_REENTRY_LIMIT
    output_path: str | None = None
    value_divisor: int = DEFAULT_VALUE_DIVISOR
    agent_phases: tuple[AgentMode, ...] = DEFAULT_AGENT_PHASES
    gas_schedule: GasSchedule = field(default_factory=GasSchedule)

    def validate(self) -> None:
        for name in ("k", "value_divisor"):
            if getattr(self, name) < 1:
                raise ConfigInvalid(f"{name} must be at least 1")
        for name in ("max_calls_per_contract", "gas_budget", "reentry_limit"):
            if getattr(self, name) < 0:
                raise ConfigInvalid(f"{name} must be non-negative")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigInvalid("seed must be a 64-bit unsigned integer")
        if not self.agent_phases:
            raise ConfigInvalid("at least one agent phase is required")

    def echo(self) -> dict:
        return {
            "corpus_dir": str(self.corpus_dir),
            "seed": self.seed,
            "k": self.k,
            "max_calls_per_contract": self.max_calls_per_contract,
            "gas_budget": self.gas_budget,
            "enabled_oracles": sorted(v.value for v in self.enabled_oracles),
            "reentry_limit": self.reentry_limit,
            "value_divisor": self.value_divisor,
            "agent_phases": [m.value for m in self.agent_phases],
        }

    @classmethod
    def from_mapping(cls, corpus_dir: str, mapping: dict) -> "CampaignConfig":
        """Build from a config-file mapping; unknown keys are rejected."""
        kwargs: dict = {}
        for key, value in mapping.items():
            if key in ("seed", "k", "max_calls_per_contract", "gas_budget", "reentry_limit", "value_divisor"):
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigInvalid(f"{key} must be an integer")
                kwargs[key] = value
            elif key == "enabled_oracles":
                kwargs[key] = parse_oracles(value)
            elif key == "agent_phases":
                try:
                    kwargs[key] = tuple(AgentMode(v) for v in value)
                except (ValueError, TypeError):
                    raise ConfigInvalid(f"bad agent_phases: {value!r}") from None
            elif key == "gas":
                if not isinstance(value, dict):
                    raise ConfigInvalid("gas must be a mapping")
                kwargs["gas_schedule"] = GasSchedule.from_mapping(value)
            else:
                raise ConfigInvalid(f"unknown config key {key!r}")
        config = cls(corpus_dir=corpus_dir, **kwargs)
        config.validate()
        return config


def parse_oracles(value: str | Iterable[str]) -> frozenset[VulnKind]:
    names = value.split(",") if isinstance(value, str) else list(value)
    names = [n for n in (s.strip() for s in names) if n]
    if not names or [n.lower() for n in names] == ["all"]:
        return frozenset(ALL_KINDS)
    try:
        return frozenset(VulnKind.parse(n) for n in names)
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from None


# -- sessions -----------------------------------------------------------------


@dataclass
class ContractReport:
    name: str
    address: bytes | None
    deployed: bool
    calls_executed: int = 0
    pool_size: int = 0
    coverage: set[str] = field(default_factory=set)
    verdicts: list = field(default_factory=list)
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "address": "0x" + self.address.hex() if self.address else None,
            "deployed": self.deployed,
            "calls_executed": self.calls_executed,
            "pool_size": self.pool_size,
            "coverage": sorted(self.coverage),
            "verdicts": [v.to_dict() for v in self.verdicts],
            "error": self.error,
        }


@dataclass
class Report:
    config: dict
    contracts: list[ContractReport]

    @property
    def totals(self) -> dict[str, int]:
        counts = {k.value: 0 for k in ALL_KINDS}
        for c in self.contracts:
            for v in c.verdicts:
                counts[v.kind.value] += 1
        return counts

    def verdict_kinds(self, name: str) -> set[str]:
        for c in self.contracts:
            if c.name == name:
                return {v.kind.value for v in c.verdicts}
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "campaign": {
                "seed": self.config.get("seed"),
                "config": self.config,
                "contracts_tested": sum(1 for c in self.contracts if c.deployed),
                "totals": self.totals,
            },
            "contracts": [c.to_dict() for c in self.contracts],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


@dataclass
class Chain:
    """The deployed corpus: a pristine state to copy each session from."""

    state: WorldState
    deployed: list[tuple[ContractArtifact, bytes]]
    failed: list[tuple[ContractArtifact, str]]
    index: dict[bytes, list[bytes]]


def deploy_corpus(artifacts: list[ContractArtifact], schedule: GasSchedule | None = None) -> Chain:
    state = WorldState(GENESIS)
    endowments = sum(a.endowment for a in artifacts)
    state.create_account(ACTORS.creator, AccountKind.EOA, ACTOR_FUNDS + endowments)
    state.create_account(ACTORS.plain, AccountKind.EOA, ACTOR_FUNDS)
    state.create_account(ACTORS.agent, AccountKind.AGENT, ACTOR_FUNDS)
    state.commit()
    vm = VM(state, schedule)
    deployed, failed = [], []
    for art in artifacts:
        try:
            addr = vm.deploy_contract(ACTORS.creator, art.creation_code, art.constructor_args, art.endowment)
        except EvmError as exc:
            log.warning("deploy of %s failed: %s", art.name, exc)
            failed.append((art, f"{type(exc).__name__}: {exc}"))
            continue
        deployed.append((art, addr))
    index = build_selector_index((addr, art.abi.functions) for art, addr in deployed)
    return Chain(state, deployed, failed, index)


@dataclass
class Step:
    tx_index: int
    call: FuzzCall
    record: object  # CallRecord
    mode: AgentMode


class Session:
    """Fuzzing of one contract on a private copy of the deployed chain."""

    def __init__(self, config: CampaignConfig, chain: Chain, artifact: ContractArtifact, address: bytes):
        self.config = config
        self.artifact = artifact
        self.address = address
        self.state = chain.state.copy()
        self.vm = VM(self.state, config.gas_schedule)
        self.agent = Agent(ACTORS.agent, AgentState(reentry_limit=config.reentry_limit))
        self.agent.install(self.vm)
        self.rng = random.Random(f"{config.seed}/{artifact.name}")

        code = self.state.code(address)
        functions = artifact.abi.functions
        usage = find_function_selectors(code, functions)
        self.pools = {fn: build_private_pool(fn, usage, chain.index, exclude=address) for fn in functions}
        balances = {a: self.state.balance(a) for a in ACTORS}
        self.pool = generate_call_pool(
            address, artifact.abi, self.pools, self.rng, config.k, ACTORS, balances,
            config.gas_budget, config.value_divisor,
        )
        self.stats = SessionStats(static_transfer_flags=scan_transfer_capability(code))
        self.engine = OracleEngine(address, ACTORS.agent, config.enabled_oracles)
        self.ctx = self.state.block
        self.coverage: set[str] = set()
        self.calls_executed = 0

    def phase(self, tx_index: int) -> AgentMode:
        phases = self.config.agent_phases
        n = max(1, self.config.max_calls_per_contract)
        return phases[min(len(phases) - 1, tx_index * len(phases) // n)]

    def steps(self, limit: int | None = None):
        """Yield each executed transaction; oracles and statistics are updated as it goes."""
        total = self.config.max_calls_per_contract if limit is None else limit
        if not self.pool:
            return
        for i in range(total):
            self.ctx = self.ctx.advance()
            mode = self.phase(i)
            self.agent.state.mode = mode
            call = select_next_call(self.pool, self.rng)
            if call.caller_kind is CallerKind.AGENT:
                record = agent_initiate(self.vm, self.agent, call.target, call.calldata, call.value,
                                        call.gas_budget, self.ctx)
            else:
                record = self.vm.execute_transaction(call, self.ctx)
            self.calls_executed += 1
            if record.outcome.value == "Success":
                self.coverage.add(call.function.canonical_signature if call.function else "<fallback>")
            self.stats.observe_trace(record, self.address)
            self.stats.observe_balance(self.state.balance(self.address))
            self.engine.evaluate(record, call, i)
            yield Step(i, call, record, mode)

    def run(self) -> ContractReport:
        for _ in self.steps():
            pass
        self.engine.finish(self.stats)
        return ContractReport(
            name=self.artifact.name,
            address=self.address,
            deployed=True,
            calls_executed=self.calls_executed,
            pool_size=len(self.pool),
            coverage=self.coverage,
            verdicts=self.engine.verdicts,
        )


def run_campaign(config: CampaignConfig, artifacts: list[ContractArtifact] | None = None) -> Report:
    config.validate()
    if artifacts is None:
        artifacts = load_corpus(config.corpus_dir)
    if not artifacts:
        raise NoCorpus("empty corpus")
    chain = deploy_corpus(artifacts, config.gas_schedule)
    reports = []
    for art, addr in chain.deployed:
        reports.append(Session(config, chain, art, addr).run())
    for art, err in chain.failed:
        reports.append(ContractReport(art.name, None, False, error=err))
    reports.sort(key=lambda r: r.name)
    return Report(config.echo(), reports)


def replay(config: CampaignConfig, artifacts: list[ContractArtifact], name: str, tx_index: int) -> Step:
    """Re-run a contract's session from scratch up to and including ``tx_index``."""
    chain = deploy_corpus(artifacts, config.gas_schedule)
    for art, addr in chain.deployed:
        if art.name == name:
            session = Session(config, chain, art, addr)
            last = None
            for last in session.steps(limit=tx_index + 1):
                pass
            if last is None or last.tx_index != tx_index:
                raise IndexError(f"{name} has no transaction {tx_index}")
            return last
    raise KeyError(name)


# -- output -------------------------------------------------------------------


_LABELS = {
    VulnKind.GASLESS_SEND: "Gasless Send",
    VulnKind.EXCEPTION_DISORDER: "Exception Disorder",
    VulnKind.REENTRANCY: "Reentrancy",
    VulnKind.TIMESTAMP_DEPENDENCY: "Timestamp Dependency",
    VulnKind.BLOCKNUM_DEPENDENCY: "Block Number Dependency",
    VulnKind.DANGEROUS_DELEGATECALL: "Dangerous DelegateCall",
    VulnKind.FREEZING_ETHER: "Freezing Ether",
}


def format_summary(report: Report) -> str:
    totals = report.totals
    grand = sum(totals.values())
    rows = [f"{'Vulnerability Type':<26}{'Number':>8}{'Percentage':>12}"]
    for kind in ALL_KINDS:
        n = totals[kind.value]
        pct = f"{100 * n / grand:.2f}%" if grand else "0.00%"
        rows.append(f"{_LABELS[kind]:<26}{n:>8}{pct:>12}")
    rows.append(f"{'Total':<26}{grand:>8}{'/':>12}")
    tested = sum(1 for c in report.contracts if c.deployed)
    flagged = sum(1 for c in report.contracts if c.verdicts)
    rows.append(f"{tested} contracts fuzzed, {flagged} with findings")
    return "\n".join(rows) + "\n"


def write_report(report: Report, path: str | Path, stdout: TextIO | None = None) -> None:
    """Write canonical JSON atomically and print the summary table."""
    path = Path(path)
    data = report.to_json()
    parent = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=parent)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    (stdout or sys.stdout).write(format_summary(report))
