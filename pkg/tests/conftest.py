import os

import numpy as np
import pytest

from boltzslab import (
    AngularQuadrature,
    SlabConfig,
    assemble_operator,
    hard_sphere,
    make_grid,
    maxwellian_boundary,
    solve,
    temperature_step_boundary,
)

# operator assembly is the expensive step; cache it next to the tests so
# repeated pytest runs stay fast (the cache is keyed by grid + quadrature)
CACHE_DIR = os.path.join(os.path.dirname(__file__), "_op_cache")


@pytest.fixture(scope="session")
def hs_model():
    return hard_sphere()


@pytest.fixture(scope="session")
def tiny_grid():
    return make_grid(n_zeta1=16, n_zeta_r=8, azimuthal_order=8)


@pytest.fixture(scope="session")
def tiny_op(hs_model, tiny_grid):
    aq = AngularQuadrature(n_phi=8, n_theta=8, n_eps=8)
    return assemble_operator(hs_model, tiny_grid, aq, cache_dir=CACHE_DIR)


@pytest.fixture(scope="session")
def base_grid():
    return make_grid(n_zeta1=32, n_zeta_r=16, azimuthal_order=12)


@pytest.fixture(scope="session")
def base_op(hs_model, base_grid):
    return assemble_operator(hs_model, base_grid, cache_dir=CACHE_DIR)


@pytest.fixture(scope="session")
def slab_cfg():
    return SlabConfig()


@pytest.fixture(scope="session")
def eq_run(base_op, slab_cfg):
    bc = maxwellian_boundary()
    return solve(bc, base_op, slab_cfg), bc


@pytest.fixture(scope="session")
def ts_run(base_op, slab_cfg):
    bc = temperature_step_boundary(1.1)
    return solve(bc, base_op, slab_cfg), bc


@pytest.fixture(scope="session")
def tiny_slab_cfg():
    from boltzslab import make_x_grid
    return SlabConfig(x_nodes=make_x_grid(1.0, 24))


@pytest.fixture(scope="session")
def tiny_ts_run(tiny_op, tiny_slab_cfg):
    bc = temperature_step_boundary(1.1)
    return solve(bc, tiny_op, tiny_slab_cfg), bc


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
