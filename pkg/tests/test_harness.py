import io
import json

import pytest

from ethfuzz.abi import parse_abi
from ethfuzz.asm import assemble, creation_code
from ethfuzz.cli import main
from ethfuzz.evm import ConfigInvalid
from ethfuzz.fixtures import write_corpus
from ethfuzz.harness import (
    ACTORS,
    CampaignConfig,
    ContractArtifact,
    ContractReport,
    NoCorpus,
    Report,
    Session,
    deploy_corpus,
    format_summary,
    load_corpus,
    parse_hex,
    replay,
    run_campaign,
    write_report,
)
from ethfuzz.inputs import expected_pool_size
from ethfuzz.oracles import VulnKind, evaluate_all

STOP_CREATION = creation_code(assemble("STOP"))


def make_entry(root, name, code=STOP_CREATION.hex(), abi="[]", meta=None):
    d = root / name
    d.mkdir()
    if code is not None:
        (d / "contract.bin").write_text(code)
    if abi is not None:
        (d / "contract.abi").write_text(abi)
    if meta is not None:
        (d / "contract.meta").write_text(json.dumps(meta))
    return d


# -- corpus loading -----------------------------------------------------------------


def test_load_three_entries_sorted(tmp_path):
    for name in ("c", "a", "b"):
        make_entry(tmp_path, name)
    assert [a.name for a in load_corpus(tmp_path)] == ["a", "b", "c"]


def test_entry_missing_abi_is_skipped(tmp_path, caplog):
    make_entry(tmp_path, "good")
    make_entry(tmp_path, "noabi", abi=None)
    make_entry(tmp_path, "badhex", code="zz")
    assert [a.name for a in load_corpus(tmp_path)] == ["good"]
    assert "noabi" in caplog.text


def test_hex_prefix_and_case(tmp_path):
    make_entry(tmp_path, "x", code="0x" + STOP_CREATION.hex().upper() + "\n")
    (art,) = load_corpus(tmp_path)
    assert art.creation_code == STOP_CREATION
    assert parse_hex(" 0XAbCd ") == b"\xab\xcd"


def test_meta_endowment(tmp_path):
    make_entry(tmp_path, "x", meta={"endowment": 5})
    assert load_corpus(tmp_path)[0].endowment == 5


def test_missing_or_empty_corpus(tmp_path):
    with pytest.raises(NoCorpus):
        load_corpus(tmp_path / "nope")
    with pytest.raises(NoCorpus):
        load_corpus(tmp_path)


# -- campaigns ------------------------------------------------------------------------


def test_zero_calls_gives_no_verdicts(artifacts):
    report = run_campaign(CampaignConfig("<fixtures>", max_calls_per_contract=0), artifacts)
    assert all(c.verdicts == [] and c.calls_executed == 0 for c in report.contracts)
    assert sum(report.totals.values()) == 0


def test_double_run_is_byte_identical(artifacts):
    cfg = dict(corpus_dir="<fixtures>", seed=7, max_calls_per_contract=60)
    a = run_campaign(CampaignConfig(**cfg), artifacts).to_json()
    b = run_campaign(CampaignConfig(**cfg), artifacts).to_json()
    assert a == b


def test_seed_changes_the_campaign(artifacts):
    a = run_campaign(CampaignConfig("<fixtures>", seed=1, max_calls_per_contract=30), artifacts).to_json()
    b = run_campaign(CampaignConfig("<fixtures>", seed=2, max_calls_per_contract=30), artifacts).to_json()
    assert a != b


def test_fixture_matrix_at_seed_42(seed42_report, fixtures):
    for fx in fixtures:
        assert seed42_report.verdict_kinds(fx.name) == set(fx.expected), fx.name


def test_pool_size_fidelity(seed42_report, fixtures):
    for fx in fixtures:
        c = next(c for c in seed42_report.contracts if c.name == fx.name)
        assert c.pool_size == expected_pool_size(fx.abi(), 10)


def test_sessions_are_isolated(seed42_report, artifacts):
    cfg = CampaignConfig("<fixtures>", seed=42)
    chain = deploy_corpus(artifacts)
    for art, addr in reversed(chain.deployed):
        alone = Session(cfg, chain, art, addr).run()
        full = next(c for c in seed42_report.contracts if c.name == art.name)
        assert alone.to_dict() == full.to_dict()


def test_verdicts_replay(seed42_report, artifacts):
    cfg = CampaignConfig("<fixtures>", seed=42)
    checked = 0
    for c in seed42_report.contracts:
        for v in c.verdicts:
            if v.tx_index is None:
                continue
            step = replay(cfg, artifacts, c.name, v.tx_index)
            assert step.call == v.triggering_call
            again = evaluate_all(step.record, c.address, ACTORS.agent, {v.kind})
            assert [x.evidence for x in again] == [v.evidence]
            checked += 1
    assert checked > 0


def test_failed_deployment_is_reported():
    bad = ContractArtifact("bad", assemble("PUSH1 0\nDUP1\nREVERT"), parse_abi("[]"))
    good = ContractArtifact("good", STOP_CREATION, parse_abi("[]"))
    report = run_campaign(CampaignConfig("<x>", max_calls_per_contract=5), [bad, good])
    bad_report = report.contracts[0]
    assert not bad_report.deployed and "DeployRevert" in bad_report.error
    assert report.contracts[1].deployed


def test_empty_pool_runs_no_calls():
    report = run_campaign(CampaignConfig("<x>", max_calls_per_contract=5),
                          [ContractArtifact("empty", STOP_CREATION, parse_abi("[]"))])
    assert report.contracts[0].calls_executed == 0


def test_agent_phases(artifacts):
    chain = deploy_corpus(artifacts[:1])
    art, addr = chain.deployed[0]
    s = Session(CampaignConfig("<x>", max_calls_per_contract=10), chain, art, addr)
    assert [s.phase(i).value for i in (0, 4, 5, 9)] == ["Reentrant", "Reentrant", "ExpensiveFallback",
                                                        "ExpensiveFallback"]


def test_block_context_advances(artifacts):
    chain = deploy_corpus(artifacts[:1])
    art, addr = chain.deployed[0]
    s = Session(CampaignConfig("<x>", max_calls_per_contract=3), chain, art, addr)
    stamps = []
    for _ in s.steps():
        stamps.append((s.ctx.timestamp, s.ctx.number))
    assert stamps == [(1_700_000_000 + 15 * i, 18_000_000 + i) for i in (1, 2, 3)]


# -- configuration ---------------------------------------------------------------------


@pytest.mark.parametrize("mapping", [
    {"k": 0}, {"max_calls_per_contract": -1}, {"seed": -1}, {"seed": 1 << 64}, {"k": "3"},
    {"bogus": 1}, {"enabled_oracles": ["Overflow"]}, {"agent_phases": ["Sleepy"]}, {"agent_phases": []},
])
def test_invalid_config(mapping):
    with pytest.raises(ConfigInvalid):
        CampaignConfig.from_mapping("<x>", mapping)


def test_config_mapping():
    cfg = CampaignConfig.from_mapping("<x>", {"seed": 3, "enabled_oracles": ["Reentrancy"],
                                              "agent_phases": ["Passive"]})
    assert cfg.seed == 3 and cfg.enabled_oracles == {VulnKind.REENTRANCY}
    assert cfg.echo()["agent_phases"] == ["Passive"]


# -- reports ----------------------------------------------------------------------------


def test_write_empty_report(tmp_path):
    out = io.StringIO()
    path = tmp_path / "r.json"
    write_report(Report(CampaignConfig("<x>").echo(), []), path, out)
    data = json.loads(path.read_text())
    assert data["schema"] == 1 and data["contracts"] == []
    assert set(data["campaign"]["totals"].values()) == {0}
    assert "Total" in out.getvalue()


def test_totals_and_rewrite(tmp_path, seed42_report):
    path = tmp_path / "r.json"
    write_report(seed42_report, path, io.StringIO())
    first = path.read_bytes()
    data = json.loads(first)
    assert sum(data["campaign"]["totals"].values()) == sum(len(c["verdicts"]) for c in data["contracts"])
    write_report(seed42_report, path, io.StringIO())
    assert path.read_bytes() == first
    assert list(tmp_path.iterdir()) == [path]


def test_summary_table(seed42_report):
    text = format_summary(seed42_report)
    assert "Reentrancy" in text and "Freezing Ether" in text
    assert f"{len(seed42_report.contracts)} contracts fuzzed" in text


def test_contract_report_shape():
    d = ContractReport("n", None, False, error="x").to_dict()
    assert d["address"] is None and d["verdicts"] == []


# -- command line -----------------------------------------------------------------------


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    write_corpus(d)
    return d


def test_cli_fuzz_with_findings(corpus_dir, tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main(["fuzz", "--corpus", str(corpus_dir), "--seed", "42", "--max-calls", "200", "--out", str(out)])
    assert code == 1
    data = json.loads(out.read_text())
    assert data["campaign"]["seed"] == 42
    assert "Vulnerability Type" in capsys.readouterr().out


def test_cli_clean_corpus(tmp_path):
    corpus = tmp_path / "corpus"
    write_corpus(corpus, ["owner_guarded", "benign_bank"])
    assert main(["fuzz", "--corpus", str(corpus), "--max-calls", "50", "--out", str(tmp_path / "r.json")]) == 0


def test_cli_config_file(corpus_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 42, "enabled_oracles": ["TimestampDependency"]}))
    out = tmp_path / "r.json"
    assert main(["fuzz", "--corpus", str(corpus_dir), "--config", str(cfg), "--out", str(out)]) == 1
    kinds = {v["kind"] for c in json.loads(out.read_text())["contracts"] for v in c["verdicts"]}
    assert kinds == {"TimestampDependency"}


@pytest.mark.parametrize("extra", [
    ["--oracles", "Overflow"], ["--k", "0"], ["--config", "/nonexistent.json"],
])
def test_cli_usage_errors(corpus_dir, tmp_path, extra):
    argv = ["fuzz", "--corpus", str(corpus_dir), "--out", str(tmp_path / "r.json")] + extra
    assert main(argv) == 2


def test_cli_missing_corpus(tmp_path):
    assert main(["fuzz", "--corpus", str(tmp_path / "none"), "--out", str(tmp_path / "r.json")]) == 2


def test_cli_analyze(corpus_dir, tmp_path):
    out = tmp_path / "a.json"
    assert main(["analyze", "--corpus", str(corpus_dir), "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    router = next(c for c in data["contracts"] if c["name"] == "token_router")
    assert router["selector_usage"] == {"forward(address,uint256)": ["0xa9059cbb"]}


def test_cli_asm(tmp_path):
    src = tmp_path / "p.asm"
    src.write_text("PUSH1 1\nPUSH1 2\nADD\nSTOP\n")
    out = tmp_path / "p.hex"
    assert main(["asm", str(src), "-o", str(out)]) == 0
    assert out.read_text().strip() == "600160020100"
    src.write_text("FROB\n")
    assert main(["asm", str(src), "-o", str(out)]) == 2
