"""ABI-typed candidate values and per-contract call pools."""

from __future__ import annotations

import enum
import random
import string
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .abi import AbiFunction, AbiType, ContractAbi, encode_call
from .evm.state import ZERO_ADDRESS

DEFAULT_K = 10
DEFAULT_GAS_BUDGET = 1_000_000
DEFAULT_VALUE_DIVISOR = 16
MAX_DYNAMIC_LENGTH = 64


class EmptyPool(LookupError):
    pass


class CallerKind(enum.Enum):
    CREATOR = "Creator"
    PLAIN = "PlainEOA"
    AGENT = "Agent"


@dataclass(frozen=True)
class Actors:
    creator: bytes
    plain: bytes
    agent: bytes

    def address(self, kind: CallerKind) -> bytes:
        return {CallerKind.CREATOR: self.creator, CallerKind.PLAIN: self.plain, CallerKind.AGENT: self.agent}[kind]

    def __iter__(self):
        return iter((self.creator, self.plain, self.agent))


@dataclass(frozen=True)
class FuzzCall:
    caller_kind: CallerKind
    caller: bytes
    target: bytes
    function: AbiFunction | None
    calldata: bytes
    value: int
    gas_budget: int = DEFAULT_GAS_BUDGET

    def to_dict(self) -> dict:
        return {
            "caller_kind": self.caller_kind.value,
            "caller": "0x" + self.caller.hex(),
            "target": "0x" + self.target.hex(),
            "function": self.function.canonical_signature if self.function else None,
            "calldata": "0x" + self.calldata.hex(),
            "value": self.value,
            "gas_budget": self.gas_budget,
        }


@dataclass
class CandidateSet:
    type: AbiType
    values: list


def seed_values(t: AbiType) -> list:
    """Boundary values commonly hit by contract code."""
    if t.kind == "uint":
        top = (1 << t.size) - 1
        return [0, 1, 2, top, top - 1]
    if t.kind == "int":
        lim = 1 << (t.size - 1)
        return [-lim, -1, 0, 1, lim - 1]
    if t.kind == "bool":
        return [True, False]
    if t.kind == "fixed_bytes":
        return [bytes(t.size), b"\xff" * t.size]
    return []


def _domain_size(t: AbiType) -> int | None:
    if t.kind == "bool":
        return 2
    if t.kind in ("uint", "int"):
        return 1 << t.size
    if t.kind == "fixed_bytes":
        return 1 << (8 * t.size)
    return None


def _address_domain(pool: Sequence[bytes], actors: Actors | None) -> list[bytes]:
    domain = list(dict.fromkeys(pool))
    extra = list(actors) if actors else []
    if not domain:
        extra.append(ZERO_ADDRESS)
    for a in extra:
        if a not in domain:
            domain.append(a)
    return domain


def random_value(t: AbiType, rng: random.Random, addresses: Sequence[bytes]):
    """One uniform draw from the domain of ``t``."""
    k = t.kind
    if k == "uint":
        return rng.getrandbits(t.size)
    if k == "int":
        return rng.getrandbits(t.size) - (1 << (t.size - 1))
    if k == "bool":
        return rng.random() < 0.5
    if k == "address":
        return rng.choice(addresses)
    if k == "fixed_bytes":
        return rng.randbytes(t.size)
    if k == "bytes":
        return rng.randbytes(rng.randint(1, MAX_DYNAMIC_LENGTH))
    if k == "string":
        n = rng.randint(1, MAX_DYNAMIC_LENGTH)
        return "".join(rng.choice(string.ascii_letters + string.digits) for _ in range(n))
    if k == "fixed_array":
        return [_element(t.elem, rng, addresses) for _ in range(t.size)]
    if k == "array":
        return [_element(t.elem, rng, addresses) for _ in range(rng.randint(1, MAX_DYNAMIC_LENGTH))]
    raise AssertionError(k)


def _element(t: AbiType, rng: random.Random, addresses: Sequence[bytes]):
    seeds = seed_values(t)
    if seeds and rng.random() < 0.25:
        return rng.choice(seeds)
    return random_value(t, rng, addresses)


def generate_candidates(
    t: AbiType,
    pool: Sequence[bytes],
    rng: random.Random,
    k: int = DEFAULT_K,
    actors: Actors | None = None,
) -> CandidateSet:
    """k candidate values for ``t``: seed boundary values merged with random draws.

    Address candidates come from the function's private contract pool plus the
    fuzzing accounts; small domains (bool, a short address list) are covered
    exhaustively before any repeats are drawn.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    addresses = _address_domain(pool, actors)

    if t.kind == "address":
        domain = addresses
    elif _domain_size(t) is not None and _domain_size(t) <= k:
        domain = seed_values(t)
    else:
        domain = None

    if domain is not None:
        if len(domain) >= k:
            return CandidateSet(t, rng.sample(domain, k))
        values = list(domain) + [rng.choice(domain) for _ in range(k - len(domain))]
        return CandidateSet(t, values)

    seeds = seed_values(t)
    n_seed = min(len(seeds), max(1, (k + 1) // 2)) if seeds else 0
    values = rng.sample(seeds, n_seed)
    values += [random_value(t, rng, addresses) for _ in range(k - n_seed)]
    return CandidateSet(t, values)


def build_private_pool(
    fn: AbiFunction,
    usage: Mapping[AbiFunction, Iterable[bytes]],
    index: Mapping[bytes, Sequence[bytes]],
    exclude: bytes | None = None,
) -> list[bytes]:
    """Contracts able to serve the selectors ``fn`` uses internally."""
    pool: list[bytes] = []
    for sel in sorted(usage.get(fn, ())):
        for addr in index.get(sel, ()):
            if addr != exclude and addr not in pool:
                pool.append(addr)
    return pool


def _argument_tuples(fn: AbiFunction, pool, rng, k, actors) -> list[list]:
    columns = []
    for t in fn.inputs:
        values = generate_candidates(t, pool, rng, k, actors).values
        rng.shuffle(values)
        columns.append(values)
    return [list(row) for row in zip(*columns)]


def generate_call_pool(
    contract: bytes,
    abi: ContractAbi,
    pools: Mapping[AbiFunction, Sequence[bytes]],
    rng: random.Random,
    k: int = DEFAULT_K,
    actors: Actors | None = None,
    balances: Mapping[bytes, int] | None = None,
    gas_budget: int = DEFAULT_GAS_BUDGET,
    value_divisor: int = DEFAULT_VALUE_DIVISOR,
) -> list[FuzzCall]:
    """Every function gets (k tuples or one empty tuple) x 3 caller kinds x 2 value modes.

    A fallback adds six empty-calldata calls.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if actors is None:
        raise ValueError("actors are required to assign callers")
    balances = balances or {}

    def value_for(caller: bytes, with_value: bool) -> int:
        if not with_value:
            return 0
        return rng.randint(1, max(1, balances.get(caller, 0) // value_divisor))

    def expand(fn: AbiFunction | None, calldata: bytes) -> list[FuzzCall]:
        out = []
        for kind in CallerKind:
            caller = actors.address(kind)
            for with_value in (False, True):
                out.append(FuzzCall(kind, caller, contract, fn, calldata, value_for(caller, with_value), gas_budget))
        return out

    calls: list[FuzzCall] = []
    for fn in abi.functions:
        if fn.has_args:
            for args in _argument_tuples(fn, pools.get(fn, ()), rng, k, actors):
                calls += expand(fn, encode_call(fn, args))
        else:
            calls += expand(fn, fn.selector)
    if abi.has_fallback:
        calls += expand(None, b"")
    return calls


def expected_pool_size(abi: ContractAbi, k: int) -> int:
    return sum(6 * k if fn.has_args else 6 for fn in abi.functions) + (6 if abi.has_fallback else 0)


def select_next_call(pool: Sequence[FuzzCall], rng: random.Random) -> FuzzCall:
    if not pool:
        raise EmptyPool("call pool is empty")
    return pool[rng.randrange(len(pool))]
