import numpy as np
import pytest

from boltzslab.velocity_grid import VelocityGrid, make_grid, refine, stencil_1d


def test_default_grid_structure():
    g = make_grid(n_zeta1=32, n_zeta_r=16)
    assert g.n_nodes == 32 * 16
    assert np.all(g.weights > 0)
    assert not np.any(g.z1_levels == 0.0)
    # symmetric about zero
    assert np.allclose(g.z1_levels, -g.z1_levels[::-1])
    # innermost node near 1e-3 * zeta_max
    assert abs(np.min(np.abs(g.z1_levels)) - 1e-3 * g.zeta_max) < 2e-4 * g.zeta_max


def test_maxwellian_mass_window():
    for n1, nr in [(16, 8), (32, 16), (48, 24)]:
        g = make_grid(n_zeta1=n1, n_zeta_r=nr)
        assert 0.0 <= g.mass_defect <= g.mass_tol


def test_grid_validation():
    with pytest.raises(ValueError):
        make_grid(n_zeta1=31, n_zeta_r=16)   # odd axial count
    with pytest.raises(ValueError):
        make_grid(n_zeta1=4, n_zeta_r=16)
    levels = np.array([-1.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        VelocityGrid(z1_levels=levels, zr_levels=np.array([0.5]),
                     w1=np.ones(3), wr=np.ones(1),
                     azimuthal_order=4, zeta_max=1.0)


def test_refine_counts():
    g = make_grid(n_zeta1=32, n_zeta_r=16)
    r = refine(g, 1.5)
    assert len(r.z1_levels) == 48
    assert len(r.zr_levels) == 24
    assert r.zeta_max == g.zeta_max


def test_reflect_index_involution():
    g = make_grid(n_zeta1=16, n_zeta_r=8)
    refl = g.reflect_index()
    assert np.array_equal(refl[refl], np.arange(g.n_nodes))
    assert np.allclose(g.zeta1[refl], -g.zeta1)
    assert np.allclose(g.zeta_r[refl], g.zeta_r)


def test_content_hash_changes():
    g1 = make_grid(n_zeta1=16, n_zeta_r=8)
    g2 = make_grid(n_zeta1=16, n_zeta_r=8, zeta_max=5.0)
    assert g1.content_hash() != g2.content_hash()
    assert g1.content_hash() == make_grid(n_zeta1=16, n_zeta_r=8).content_hash()


@pytest.mark.parametrize("order,polys", [
    (3, [lambda z: np.ones_like(z), lambda z: z, lambda z: z**2]),
    (2, [lambda z: np.ones_like(z), lambda z: z]),
])
def test_stencil_polynomial_exactness(order, polys, rng):
    g = make_grid(n_zeta1=16, n_zeta_r=8)
    levels = g.z1_levels
    vals = {i: p(levels) for i, p in enumerate(polys)}
    # interior points and mild extrapolation beyond the hull
    pts = np.concatenate([rng.uniform(levels[0], levels[-1], 40),
                          [levels[0] - 0.3, levels[-1] + 0.3]])
    for p in pts:
        start, w = stencil_1d(levels, float(p), order)
        for i, poly in enumerate(polys):
            approx = float(np.dot(w, vals[i][start:start + order]))
            assert abs(approx - poly(np.array([p]))[0]) < 1e-10 * max(1.0, abs(p) ** 2)
