"""Accounts, world state and the undo journal used for frame reverts."""

from __future__ import annotations

import copy
import enum
import json
from dataclasses import dataclass, field

from .._kernels import keccak256
from .errors import InsufficientBalance, UnknownAccount

UINT256_MAX = (1 << 256) - 1
ZERO_ADDRESS = b"\x00" * 20


class AccountKind(enum.Enum):
    EOA = "EOA"
    CONTRACT = "Contract"
    AGENT = "Agent"


@dataclass
class Account:
    address: bytes
    balance: int = 0
    code: bytes = b""
    storage: dict[int, int] = field(default_factory=dict)
    kind: AccountKind = AccountKind.EOA


@dataclass(frozen=True)
class BlockContext:
    timestamp: int
    number: int

    def advance(self, seconds: int = 15) -> "BlockContext":
        return BlockContext(self.timestamp + seconds, self.number + 1)


def to_address(value: int) -> bytes:
    return (value & ((1 << 160) - 1)).to_bytes(20, "big")


def derive_address(creator: bytes, counter: int) -> bytes:
    return keccak256(creator + counter.to_bytes(32, "big"))[12:]


class WorldState:
    """Mapping from addresses to accounts, plus a journal for nested reverts.

    Every mutation goes through a method here so that ``revert(checkpoint)``
    can roll back exactly the changes made since the checkpoint.
    """

    def __init__(self, block: BlockContext | None = None):
        self.accounts: dict[bytes, Account] = {}
        self.deploy_counters: dict[bytes, int] = {}
        self.block = block or BlockContext(timestamp=1_700_000_000, number=18_000_000)
        self._journal: list[tuple] = []

    # -- queries -----------------------------------------------------------

    def get(self, address: bytes) -> Account:
        try:
            return self.accounts[address]
        except KeyError:
            raise UnknownAccount(address.hex()) from None

    def exists(self, address: bytes) -> bool:
        return address in self.accounts

    def balance(self, address: bytes) -> int:
        acct = self.accounts.get(address)
        return acct.balance if acct else 0

    def code(self, address: bytes) -> bytes:
        acct = self.accounts.get(address)
        return acct.code if acct else b""

    def sload(self, address: bytes, key: int) -> int:
        return self.accounts[address].storage.get(key, 0)

    def total_balance(self) -> int:
        return sum(a.balance for a in self.accounts.values())

    # -- journaled mutations -----------------------------------------------

    def create_account(self, address: bytes, kind: AccountKind = AccountKind.EOA, balance: int = 0) -> Account:
        if address in self.accounts:
            raise ValueError(f"account {address.hex()} already exists")
        acct = Account(address=address, balance=balance, kind=kind)
        self.accounts[address] = acct
        self._journal.append(("create", address))
        return acct

    def set_balance(self, address: bytes, balance: int) -> None:
        acct = self.accounts[address]
        self._journal.append(("balance", address, acct.balance))
        acct.balance = balance

    def transfer(self, sender: bytes, recipient: bytes, value: int) -> None:
        if value == 0:
            return
        if self.balance(sender) < value:
            raise InsufficientBalance(f"{sender.hex()} cannot send {value}")
        if recipient not in self.accounts:
            self.create_account(recipient)
        self.set_balance(sender, self.accounts[sender].balance - value)
        self.set_balance(recipient, self.accounts[recipient].balance + value)

    def sstore(self, address: bytes, key: int, value: int) -> None:
        storage = self.accounts[address].storage
        self._journal.append(("storage", address, key, storage.get(key)))
        if value:
            storage[key] = value
        else:
            storage.pop(key, None)

    def set_code(self, address: bytes, code: bytes) -> None:
        acct = self.accounts[address]
        self._journal.append(("code", address, acct.code, acct.kind))
        acct.code = bytes(code)
        acct.kind = AccountKind.CONTRACT if code else acct.kind

    def clear_contract(self, address: bytes) -> None:
        """Self-destruct cleanup: drop code and storage, keep any residual balance."""
        acct = self.accounts[address]
        self._journal.append(("wipe", address, acct.code, acct.kind, dict(acct.storage)))
        acct.code = b""
        acct.storage = {}
        acct.kind = AccountKind.EOA

    def bump_counter(self, creator: bytes) -> int:
        n = self.deploy_counters.get(creator, 0)
        self._journal.append(("counter", creator, self.deploy_counters.get(creator)))
        self.deploy_counters[creator] = n + 1
        return n

    # -- checkpoints -------------------------------------------------------

    def checkpoint(self) -> int:
        return len(self._journal)

    def revert(self, checkpoint: int) -> None:
        while len(self._journal) > checkpoint:
            entry = self._journal.pop()
            tag, address = entry[0], entry[1]
            if tag == "create":
                del self.accounts[address]
            elif tag == "balance":
                self.accounts[address].balance = entry[2]
            elif tag == "storage":
                storage = self.accounts[address].storage
                if entry[3] is None:
                    storage.pop(entry[2], None)
                else:
                    storage[entry[2]] = entry[3]
            elif tag == "code":
                acct = self.accounts[address]
                acct.code, acct.kind = entry[2], entry[3]
            elif tag == "wipe":
                acct = self.accounts[address]
                acct.code, acct.kind, acct.storage = entry[2], entry[3], entry[4]
            elif tag == "counter":
                if entry[2] is None:
                    del self.deploy_counters[address]
                else:
                    self.deploy_counters[address] = entry[2]

    def commit(self) -> None:
        self._journal.clear()

    def copy(self) -> "WorldState":
        clone = WorldState(self.block)
        clone.accounts = copy.deepcopy(self.accounts)
        clone.deploy_counters = dict(self.deploy_counters)
        return clone

    def serialize(self) -> bytes:
        """Canonical byte form of accounts and deploy counters."""
        doc = {
            "accounts": [
                {
                    "address": a.address.hex(),
                    "balance": a.balance,
                    "code": a.code.hex(),
                    "kind": a.kind.value,
                    "storage": [[hex(k), hex(v)] for k, v in sorted(a.storage.items())],
                }
                for _, a in sorted(self.accounts.items())
            ],
            "counters": [[c.hex(), n] for c, n in sorted(self.deploy_counters.items())],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
