import pytest
from hypothesis import HealthCheck, settings

from ethfuzz.fixtures import load_fixtures
from ethfuzz.harness import CampaignConfig, ContractArtifact, run_campaign

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def artifacts_from_fixtures(fixtures):
    return [ContractArtifact(f.name, f.creation_code(), f.abi(), b"", f.endowment) for f in fixtures]


@pytest.fixture(scope="session")
def fixtures():
    return load_fixtures()


@pytest.fixture(scope="session")
def artifacts(fixtures):
    return artifacts_from_fixtures(fixtures)


@pytest.fixture(scope="session")
def seed42_report(artifacts):
    return run_campaign(CampaignConfig(corpus_dir="<fixtures>", seed=42), artifacts)
