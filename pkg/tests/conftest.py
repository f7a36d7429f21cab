import os
from pathlib import Path

# baseline comparisons assume single-threaded reductions
for _v in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_v, "1")

import numpy as np
import pytest

from accretion.config import load_config
from accretion.coupling import run_coupled
from accretion.geometry import Disk, DomainSpec, build_grid

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
DATA = Path(__file__).parent / "data"


def disk_domain(T=0.25, anchor_r=0.05, c=0.5, C=1.0):
    return DomainSpec(1.0, 1.0, Disk((0.5, 0.5), 0.1), Disk((0.5, 0.5), anchor_r), T, c, C)


@pytest.fixture(scope="session")
def domain():
    return disk_domain()


@pytest.fixture(scope="session")
def grid33():
    return build_grid(disk_domain(anchor_r=0.02, T=0.15), 33)


@pytest.fixture(scope="session")
def grid65(domain):
    return build_grid(domain, 65)


@pytest.fixture(scope="session")
def reference_cfg():
    return load_config(CONFIGS / "reference.ini")


@pytest.fixture(scope="session")
def reference_run(reference_cfg):
    return run_coupled(reference_cfg)


@pytest.fixture(scope="session")
def decoupled_run():
    return run_coupled(load_config(CONFIGS / "decoupled.ini"))


@pytest.fixture(scope="session")
def identity_run():
    return run_coupled(load_config(CONFIGS / "identity.ini"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
