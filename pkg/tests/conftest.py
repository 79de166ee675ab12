import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from psasec.em import DoaPoa
from psasec.relay import RelayScenario
from psasec.simo import SimoScenario

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]


def cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_doa(rng) -> DoaPoa:
    return DoaPoa(rng.uniform(0, np.pi), rng.uniform(0.2, np.pi - 0.2),
                  rng.uniform(-np.pi / 2, np.pi / 2), rng.uniform(-np.pi / 4, np.pi / 4))


def simo_scenario(seed: int, n_d: int = 8, n_e: int = 6, desired=None, jammer=None) -> SimoScenario:
    rng = np.random.default_rng(seed)
    desired = desired or DoaPoa.from_degrees(40, 90, -30, 0)
    jammer = jammer or DoaPoa.from_degrees(rng.uniform(0, 180), 90, rng.uniform(-90, 90), 0)
    return SimoScenario(n_d, n_e, desired, jammer, complex(cn(rng)), complex(cn(rng)), cn(rng, n_e), cn(rng, n_e))


def relay_scenario(seed: int, n_r: int = 8, p_s_db: float = 14.0, jammer_deg: float = 65.0,
                   **kw) -> RelayScenario:
    rng = np.random.default_rng(seed)
    h = cn(rng, 5 + 2 * n_r)
    return RelayScenario(
        n_r=n_r, desired=DoaPoa.from_degrees(40, 90, -30, 0), jammer=DoaPoa.from_degrees(jammer_deg, 90, 0, 0),
        h_sr=complex(h[0]), h_jr=complex(h[1]), h_se=complex(h[2]), h_je=complex(h[3]), h_jd=complex(h[4]),
        h_rd=h[5:5 + n_r], h_re=h[5 + n_r:], p_s=10 ** (p_s_db / 10), p_r_max=10 ** 2.5, p_j_max=10.0, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
