from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from accretion.config import (
    ConfigError,
    dumps_config,
    format_region,
    load_config,
    loads_config,
    parse_region,
)
from accretion.geometry import Disk, DiskUnion, Polygon

from conftest import CONFIGS

BASE = """
[domain]
omega0 = disk 0.5 0.5 0.1
anchor = disk 0.5 0.5 0.05
T = 0.25
"""


def test_reference_config(reference_cfg):
    c = reference_cfg
    assert c.nx == 65 and c.n_steps == 16
    assert c.material.kappa == 1000.0
    assert c.force == (0.0, -0.5)
    assert c.tau == pytest.approx(0.25 / 16)
    assert c.tol_theta == pytest.approx(2.5e-4)
    c.validate()


@pytest.mark.parametrize("name", ["reference", "decoupled", "identity", "too_long"])
def test_roundtrip(name):
    c = load_config(CONFIGS / f"{name}.ini")
    assert loads_config(dumps_config(c)) == c


def test_defaults_filled():
    c = loads_config(BASE)
    assert c.nx == 65 and c.force == (0.0, 0.0) and c.y0 == "identity"
    assert c.solver.K_max == 20


@pytest.mark.parametrize(
    "extra, msg",
    [
        ("[material]\nbogus = 1\n", "unknown key 'bogus'"),
        ("[discretization]\nnx = many\n", "bad value for nx"),
        ("[extras]\na = 1\n", "unknown sections"),
        ("[loading]\nwind = 1\n", "unknown key 'wind'"),
    ],
)
def test_bad_keys(extra, msg):
    with pytest.raises(ConfigError, match=msg):
        loads_config(BASE + extra)


def test_missing_domain():
    with pytest.raises(ConfigError, match=r"missing \[domain\]"):
        loads_config("[material]\nkappa = 1\n")


def test_regions():
    assert parse_region("disk 0.5 0.5 0.1") == Disk((0.5, 0.5), 0.1)
    u = parse_region("disk 0.3 0.5 0.1; disk 0.7 0.5 0.1")
    assert isinstance(u, DiskUnion) and len(u.disks) == 2
    p = parse_region("polygon 0 0 1 0 1 1")
    assert isinstance(p, Polygon) and len(p.vertices) == 3
    for r in (u, p):
        assert parse_region(format_region(r)) == r
    with pytest.raises(ConfigError, match="cannot parse region"):
        parse_region("square 0 0 1")
    with pytest.raises(ConfigError, match="unions"):
        parse_region("disk 0.5 0.5 0.1; polygon 0 0 1 0 1 1")


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(1e-3, 0.5))
def test_disk_format_roundtrip(x, y, r):
    d = Disk((x, y), r)
    assert parse_region(format_region(d)) == d


def test_force_ramp(reference_cfg):
    c = reference_cfg
    assert np.array_equal(c.force_at(0.0), [0.0, -0.0])
    assert np.allclose(c.force_at(c.ramp_time / 2), [0.0, -0.25])
    assert np.array_equal(c.force_at(c.ramp_time), [0.0, -0.5])
    assert np.array_equal(c.force_at(c.T), [0.0, -0.5])
    no_ramp = replace(c, ramp_time=0.0)
    assert np.array_equal(no_ramp.force_at(0.0), [0.0, -0.5])


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 0.0625))
def test_force_ramp_monotone(t):
    c = loads_config(BASE + "[loading]\nforce = 0 -1\nramp_time = 0.0625\n")
    assert 0.0 <= -c.force_at(t)[1] <= -c.force_at(min(t + 1e-3, 0.0625))[1] + 1e-15


@pytest.mark.parametrize(
    "extra, msg",
    [
        ("[material]\nq = 3\n", r"\(H6\)"),
        ("[initial]\nA0 = 1 0 0 -1\n", r"\(H13\)"),
        ("[initial]\ny0 = wobble\n", "unknown initial deformation"),
        ("[solver]\non_nonconverged = ignore\n", "on_nonconverged"),
    ],
)
def test_validate_names_violation(extra, msg):
    with pytest.raises(ConfigError, match=msg):
        loads_config(BASE + extra).validate()


def test_too_long_horizon():
    with pytest.raises(ConfigError, match=r"\(H15\)"):
        load_config(CONFIGS / "too_long.ini").validate()


def test_resolved_is_complete(reference_cfg):
    r = reference_cfg.resolved()
    assert set(r) == {"domain", "material", "discretization", "loading", "initial", "solver", "output", "run"}
    assert r["solver"]["tol_theta"] == reference_cfg.tol_theta
