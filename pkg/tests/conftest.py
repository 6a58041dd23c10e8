import pytest

from capforge.pool import open_pool
from capforge.poolgen import GenConfig, SynSource, generate_pool


@pytest.fixture(scope="session")
def gen_pool(tmp_path_factory):
    """Midsize generated pool with two synthetic sources, reused read-only."""
    path = tmp_path_factory.mktemp("pools") / "gen5k"
    config = GenConfig(
        num_records=5000,
        seed=42,
        records_per_shard=1000,
        syn_sources=[SynSource("blip2", 0.75, 0.7), SynSource("blip2", 1.5, 0.9)],
    )
    generate_pool(config, path)
    return open_pool(path)


@pytest.fixture(scope="session")
def gen_pool_config():
    return GenConfig(
        num_records=5000,
        seed=42,
        records_per_shard=1000,
        syn_sources=[SynSource("blip2", 0.75, 0.7), SynSource("blip2", 1.5, 0.9)],
    )
