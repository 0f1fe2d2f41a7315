import os

import numpy as np
import pytest
from hypothesis import settings

from interarb.battery import BatteryParams
from interarb.synthetic import gradient_flows, skewed_prices

settings.register_profile("ci", max_examples=100, deadline=None)
settings.register_profile("fast", max_examples=25, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture
def battery():
    return BatteryParams()


@pytest.fixture(scope="session")
def week():
    pa, pb = skewed_prices(days=7, seed=0)
    flow = gradient_flows(pa, pb, 1000.0, seed=0)
    return pa, pb, flow
