import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from swiptbeam import ScenarioParams

# acceptance-scale geometry: CRs at 10 m from the transmitter (the class-book
# 100 m places the received signal ~20 dB under the ID-processing noise at the
# pinned sweep budgets), jammer 100 m from the CRs, and heterogeneous ERs so
# the AN and the jammer each guard/fuel one eavesdropper.
DESK = ScenarioParams(d_cr=10.0, f_cr=100.0, d_er=(8.0, 25.0), f_er=(20.0, 8.0),
                      p_tx_dbm=30.0, p_jam_dbm=30.0, eps_cr=0.01, eps_er=0.01,
                      rate_target=0.5)


@pytest.fixture
def desk_params():
    return DESK
