"""Shared fixtures: the seeded regime runs are expensive, so run them once.

The j=3 regime streams 1.6e8 increments (~20 s); it is opt-in via
LEVY_GIBBS_RUN_SLOW=1 so the default suite stays fast.
"""

import os

import pytest

from levygibbs.experiment import RegimeSpec, run_regime

MASTER_SEED = 0


def slow_enabled() -> bool:
    return os.environ.get("LEVY_GIBBS_RUN_SLOW", "") == "1"


@pytest.fixture(scope="session")
def regime_reports():
    """Reports for j=1 and j=2 under the master seed, shared by all tests."""
    return {j: run_regime(RegimeSpec.from_j(j), seed=MASTER_SEED) for j in (1, 2)}


@pytest.fixture(scope="session")
def regime_report_j3():
    if not slow_enabled():
        pytest.skip("j=3 streams 1.6e8 increments; set LEVY_GIBBS_RUN_SLOW=1 to include it")
    return run_regime(RegimeSpec.from_j(3), seed=MASTER_SEED)
