"""Shared fixtures.

The full desk-scale Monte Carlo store takes about half an hour to build, so
it is cached on disk under tests/.cache keyed by the configuration
fingerprint. Delete the cache directory to force a fresh run. Wall-clock
timing per level is cached alongside because the store itself never
persists it.
"""
import json
from pathlib import Path

import pytest

from skmsim.config import desk_config
from skmsim.pipeline import SampleStore, run_simulation

CACHE_ROOT = Path(__file__).resolve().parent / ".cache"


def _build_cached_store(config, tag):
    cache = CACHE_ROOT / f"{tag}-{config.fingerprint[:12]}"
    timing = cache / "timing.json"
    if (cache / "meta.json").exists() and timing.exists():
        store = SampleStore.load(cache)
        store.level_seconds.update(
            {float(k): float(v) for k, v in json.loads(timing.read_text()).items()}
        )
        return store
    store = run_simulation(config, out_dir=cache)
    timing.write_text(
        json.dumps({repr(k): v for k, v in store.level_seconds.items()}) + "\n"
    )
    return store


@pytest.fixture(scope="session")
def desk_store():
    """Full desk-preset run: 3 levels x 16 symbols x 200 trials."""
    return _build_cached_store(desk_config(), "desk")


@pytest.fixture(scope="session")
def desk_weak_stats(desk_store):
    from skmsim.detection import fit_symbol_stats
    from skmsim.pipeline import optimize_mask

    label = optimize_mask(desk_store, 1e-15, "scaled-mean").label
    return fit_symbol_stats(desk_store.symbol_samples(1e-15, label))


@pytest.fixture(scope="session")
def desk_report(desk_store):
    """Full characterization (mask tuning + subset search) of the desk run.

    The M=8 search alone evaluates 12870 subsets per level, so this is
    computed once per session and shared.
    """
    from skmsim.pipeline import characterize

    return characterize(desk_store)
