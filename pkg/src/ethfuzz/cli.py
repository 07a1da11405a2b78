"""Command-line entry point: ``ethfuzz fuzz | analyze | asm | fixtures``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .analysis import find_function_selectors, scan_transfer_capability
from .asm import AsmError, assemble, creation_code
from .evm import ConfigInvalid
from .harness import CampaignConfig, NoCorpus, deploy_corpus, load_corpus, parse_oracles, run_campaign, write_report

EXIT_CLEAN, EXIT_FINDINGS, EXIT_USAGE = 0, 1, 2


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ethfuzz", description="Fuzz EVM contracts for seven vulnerability classes.")
    p.add_argument("-v", "--verbose", action="store_true", help="log warnings and progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fuzz", help="run a fuzzing campaign over a corpus")
    f.add_argument("--corpus", required=True, help="directory with one subdirectory per contract")
    f.add_argument("--seed", type=int)
    f.add_argument("--k", type=int, help="argument tuples per function")
    f.add_argument("--max-calls", type=int, help="transactions per contract")
    f.add_argument("--gas-budget", type=int)
    f.add_argument("--reentry-limit", type=int)
    f.add_argument("--value-divisor", type=int)
    f.add_argument("--oracles", help="comma-separated oracle names, or 'all'")
    f.add_argument("--config", help="JSON config file; command-line flags take precedence")
    f.add_argument("--out", required=True, help="report JSON path")

    a = sub.add_parser("analyze", help="static analysis only")
    a.add_argument("--corpus", required=True)
    a.add_argument("--out", required=True)

    s = sub.add_parser("asm", help="assemble a source file to hex bytecode")
    s.add_argument("source")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--creation", action="store_true", help="wrap the result in a code-returning loader")

    x = sub.add_parser("fixtures", help="write the bundled fixture contracts as a corpus")
    x.add_argument("--out", required=True)
    return p


def _config_from_args(args) -> CampaignConfig:
    mapping = {}
    if args.config:
        try:
            mapping = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(mapping, dict):
            raise ConfigInvalid("config file must hold a JSON object")
    overrides = {
        "seed": args.seed, "k": args.k, "max_calls_per_contract": args.max_calls,
        "gas_budget": args.gas_budget, "reentry_limit": args.reentry_limit,
        "value_divisor": args.value_divisor,
    }
    mapping.update({k: v for k, v in overrides.items() if v is not None})
    if args.oracles is not None:
        mapping["enabled_oracles"] = sorted(o.value for o in parse_oracles(args.oracles))
    config = CampaignConfig.from_mapping(args.corpus, mapping)
    config.output_path = args.out
    return config


def _cmd_fuzz(args) -> int:
    config = _config_from_args(args)
    report = run_campaign(config)
    write_report(report, args.out)
    return EXIT_FINDINGS if any(report.totals.values()) else EXIT_CLEAN


def _cmd_analyze(args) -> int:
    chain = deploy_corpus(load_corpus(args.corpus))
    contracts = []
    for art, addr in chain.deployed:
        code = chain.state.code(addr)
        usage = find_function_selectors(code, art.abi.functions)
        cap = scan_transfer_capability(code)
        contracts.append({
            "name": art.name,
            "address": "0x" + addr.hex(),
            "runtime_size": len(code),
            "selector_usage": {
                fn.canonical_signature: sorted("0x" + s.hex() for s in sels) for fn, sels in usage.items()
            },
            "transfer_capability": {
                "has_call": cap.has_call, "has_selfdestruct": cap.has_selfdestruct,
                "has_delegatecall": cap.has_delegatecall,
            },
        })
    out = {
        "schema": 1,
        "contracts": contracts,
        "failed_deployments": {art.name: err for art, err in chain.failed},
        "selector_index": {"0x" + s.hex(): ["0x" + a.hex() for a in addrs] for s, addrs in chain.index.items()},
    }
    Path(args.out).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return EXIT_CLEAN


def _cmd_asm(args) -> int:
    code = assemble(Path(args.source).read_text())
    if args.creation:
        code = creation_code(code)
    Path(args.output).write_text(code.hex() + "\n")
    return EXIT_CLEAN


def _cmd_fixtures(args) -> int:
    from .fixtures import write_corpus

    for d in write_corpus(args.out):
        print(d)
    return EXIT_CLEAN


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    handler = {"fuzz": _cmd_fuzz, "analyze": _cmd_analyze, "asm": _cmd_asm, "fixtures": _cmd_fixtures}[args.command]
    try:
        return handler(args)
    except (ConfigInvalid, NoCorpus, AsmError) as exc:
        print(f"ethfuzz: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"ethfuzz: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
