"""Fixture contracts written in the package's assembly dialect.

Each fixture directory holds ``runtime.asm`` (function bodies and fallback,
addressed by label), an optional ``ctor.asm`` that falls through into the
code loader, ``abi.json`` and ``meta.json``. ``meta.json`` maps canonical
signatures to body labels, names the fallback label, gives the deploy
endowment and lists the verdict kinds the fixture is designed to trigger.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..abi import compute_selector, parse_abi
from ..asm import assemble, build_dispatcher, creation_code, parse


@dataclass(frozen=True)
class Fixture:
    name: str
    runtime_source: str
    ctor_source: str
    abi_json: str
    meta: dict

    @property
    def expected(self) -> frozenset[str]:
        return frozenset(self.meta.get("expected", ()))

    @property
    def endowment(self) -> int:
        return int(self.meta.get("endowment", 0))

    def dispatch(self) -> list[tuple[bytes, str]]:
        return [(compute_selector(sig), label) for sig, label in self.meta.get("dispatch", {}).items()]

    def runtime_code(self) -> bytes:
        program = build_dispatcher(self.dispatch(), self.meta.get("fallback")) + parse(self.runtime_source)
        return assemble(program)

    def constructor_code(self) -> bytes:
        return assemble(self.ctor_source) if self.ctor_source.strip() else b""

    def creation_code(self) -> bytes:
        return creation_code(self.runtime_code(), self.constructor_code())

    def abi(self):
        return parse_abi(self.abi_json)


def _root():
    return resources.files(__name__)


def fixture_names() -> list[str]:
    return sorted(p.name for p in _root().iterdir() if p.is_dir() and p.joinpath("meta.json").is_file())


def load_fixture(name: str) -> Fixture:
    d = _root().joinpath(name)
    if not d.joinpath("meta.json").is_file():
        raise KeyError(name)
    ctor = d.joinpath("ctor.asm")
    return Fixture(
        name=name,
        runtime_source=d.joinpath("runtime.asm").read_text(),
        ctor_source=ctor.read_text() if ctor.is_file() else "",
        abi_json=d.joinpath("abi.json").read_text(),
        meta=json.loads(d.joinpath("meta.json").read_text()),
    )


def load_fixtures(names=None) -> list[Fixture]:
    return [load_fixture(n) for n in (names or fixture_names())]


def write_corpus(out_dir: str | Path, names=None) -> list[Path]:
    """Assemble fixtures into the on-disk corpus layout read by ``load_corpus``."""
    out = Path(out_dir)
    written = []
    for fx in load_fixtures(names):
        d = out / fx.name
        d.mkdir(parents=True, exist_ok=True)
        (d / "contract.bin").write_text(fx.creation_code().hex() + "\n")
        (d / "contract.abi").write_text(fx.abi_json)
        meta = {"endowment": fx.endowment, "expected": sorted(fx.expected), "description": fx.meta.get("description", "")}
        (d / "contract.meta").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        written.append(d)
    return written
